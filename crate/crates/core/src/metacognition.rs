//! Calibration and self-awareness of individual agents.
//!
//! An agent's reviews reduce to `(confidence, correct)` pairs. From those:
//!
//! * self-awareness: Pearson r between confidence and the 0/1 correctness
//!   indicator,
//! * calibration difference: accuracy on cases at or above the agent's 75th
//!   confidence percentile minus accuracy at or below the 25th,
//! * confidence bias: mean confidence when correct minus when incorrect.
//!
//! [`quadrant_analysis`] places every (agent, arm) on the self-awareness ×
//! calibration-difference plane, splits both axes at the median and tests
//! whether occupancy of the upper-right ("ideal") quadrant depends on the arm.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::numeric::{mean, median, pearson_r, quantile};
use crate::report::opt_finite_or_null;
use crate::stats::{fisher_exact_2x2, TestResult};
use crate::study_data::{Arm, StudyLog};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetacognitionError {
    #[error("need at least {needed} cases, got {got}")]
    TooFewCases { needed: usize, got: usize },
    #[error("a confidence percentile subset is empty")]
    EmptySubset,
    #[error("both correct and incorrect cases are required")]
    OneOutcomeOnly,
    #[error("confidence or correctness has zero variance")]
    ZeroVariance,
    #[error("need at least two occupied confidence bins, got {0}")]
    TooFewBins(usize),
    #[error("need at least four points, got {0}")]
    TooFewPoints(usize),
}

/// One review reduced to what calibration needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Response {
    pub confidence: f64,
    pub correct: bool,
}

/// Human responses of one reader in one arm, ordered by case id.
pub fn reader_responses(log: &StudyLog, reader_id: &str, arm: Arm) -> Vec<Response> {
    let truth = log.truth_map();
    log.assessments_for(reader_id, arm)
        .into_iter()
        .map(|a| Response { confidence: a.confidence, correct: a.is_correct(truth[a.case_id.as_str()]) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationDifference {
    pub value: f64,
    /// All confidences were equal; `value` is 0 by convention.
    pub degenerate: bool,
    pub p25: f64,
    pub p75: f64,
    pub n_low: usize,
    pub n_high: usize,
}

fn accuracy(rs: impl Iterator<Item = bool>) -> Option<(f64, usize)> {
    let (mut n, mut k) = (0usize, 0usize);
    for c in rs {
        n += 1;
        k += usize::from(c);
    }
    (n > 0).then(|| (k as f64 / n as f64, n))
}

/// Calibration difference against the agent's own confidence percentiles
/// (linear interpolation, boundary cases in both subsets).
pub fn calibration_difference(responses: &[Response]) -> Result<CalibrationDifference, MetacognitionError> {
    if responses.len() < 4 {
        return Err(MetacognitionError::TooFewCases { needed: 4, got: responses.len() });
    }
    let conf: Vec<f64> = responses.iter().map(|r| r.confidence).collect();
    calibration_difference_at(responses, quantile(&conf, 0.25), quantile(&conf, 0.75))
}

/// Calibration difference with externally supplied thresholds, e.g. pooled
/// percentiles across all agents.
pub fn calibration_difference_at(responses: &[Response], p25: f64, p75: f64) -> Result<CalibrationDifference, MetacognitionError> {
    if responses.len() < 4 {
        return Err(MetacognitionError::TooFewCases { needed: 4, got: responses.len() });
    }
    let first = responses[0].confidence;
    if responses.iter().all(|r| r.confidence == first) {
        return Ok(CalibrationDifference { value: 0.0, degenerate: true, p25, p75, n_low: responses.len(), n_high: responses.len() });
    }
    let high = accuracy(responses.iter().filter(|r| r.confidence >= p75).map(|r| r.correct));
    let low = accuracy(responses.iter().filter(|r| r.confidence <= p25).map(|r| r.correct));
    match (high, low) {
        (Some((ah, nh)), Some((al, nl))) => {
            Ok(CalibrationDifference { value: ah - al, degenerate: false, p25, p75, n_low: nl, n_high: nh })
        }
        _ => Err(MetacognitionError::EmptySubset),
    }
}

/// 25th and 75th confidence percentiles over several agents' responses pooled.
pub fn pooled_percentiles<'a>(groups: impl IntoIterator<Item = &'a [Response]>) -> Option<(f64, f64)> {
    let all: Vec<f64> = groups.into_iter().flatten().map(|r| r.confidence).collect();
    (!all.is_empty()).then(|| (quantile(&all, 0.25), quantile(&all, 0.75)))
}

/// Mean confidence when correct minus mean confidence when incorrect.
pub fn confidence_bias(responses: &[Response]) -> Result<f64, MetacognitionError> {
    let right: Vec<f64> = responses.iter().filter(|r| r.correct).map(|r| r.confidence).collect();
    let wrong: Vec<f64> = responses.iter().filter(|r| !r.correct).map(|r| r.confidence).collect();
    if right.is_empty() || wrong.is_empty() {
        return Err(MetacognitionError::OneOutcomeOnly);
    }
    Ok(mean(&right) - mean(&wrong))
}

/// Point-biserial correlation between confidence and correctness.
pub fn self_awareness(responses: &[Response]) -> Result<f64, MetacognitionError> {
    let conf: Vec<f64> = responses.iter().map(|r| r.confidence).collect();
    let corr: Vec<f64> = responses.iter().map(|r| f64::from(u8::from(r.correct))).collect();
    pearson_r(&conf, &corr).ok_or(MetacognitionError::ZeroVariance)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub agent_id: String,
    pub arm: Arm,
    pub n_cases: usize,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub self_awareness: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub calibration_difference: Option<f64>,
    pub calibration_degenerate: bool,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub confidence_bias: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub mean_confidence: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub accuracy: Option<f64>,
}

/// All per-agent quantities; undefined ones are `None`. `thresholds` switches
/// the calibration difference to pooled percentiles.
pub fn calibration_summary(agent_id: &str, arm: Arm, responses: &[Response], thresholds: Option<(f64, f64)>) -> CalibrationSummary {
    let cd = match thresholds {
        Some((lo, hi)) => calibration_difference_at(responses, lo, hi),
        None => calibration_difference(responses),
    };
    let conf: Vec<f64> = responses.iter().map(|r| r.confidence).collect();
    CalibrationSummary {
        agent_id: agent_id.to_string(),
        arm,
        n_cases: responses.len(),
        self_awareness: self_awareness(responses).ok(),
        calibration_difference: cd.as_ref().ok().map(|c| c.value),
        calibration_degenerate: cd.map(|c| c.degenerate).unwrap_or(false),
        confidence_bias: confidence_bias(responses).ok(),
        mean_confidence: (!conf.is_empty()).then(|| mean(&conf)),
        accuracy: accuracy(responses.iter().map(|r| r.correct)).map(|(a, _)| a),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub confidence: u8,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationFit {
    pub slope: f64,
    pub intercept: f64,
    /// Count-weighted mean |bin accuracy - confidence/10|.
    pub mean_accuracy_deviation: f64,
    pub bins: Vec<CalibrationBin>,
}

/// Bin responses by rounded confidence (0–10), then fit accuracy on
/// confidence by least squares weighted by bin counts.
pub fn pooled_calibration_fit(responses: &[Response]) -> Result<CalibrationFit, MetacognitionError> {
    let mut tally: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    for r in responses {
        let c = r.confidence.round().clamp(0.0, 10.0) as u8;
        let e = tally.entry(c).or_default();
        e.0 += 1;
        e.1 += usize::from(r.correct);
    }
    if tally.len() < 2 {
        return Err(MetacognitionError::TooFewBins(tally.len()));
    }
    let bins: Vec<CalibrationBin> = tally
        .into_iter()
        .map(|(c, (n, k))| CalibrationBin { confidence: c, n, accuracy: k as f64 / n as f64 })
        .collect();
    let w_total: f64 = bins.iter().map(|b| b.n as f64).sum();
    let wmean = |f: &dyn Fn(&CalibrationBin) -> f64| bins.iter().map(|b| b.n as f64 * f(b)).sum::<f64>() / w_total;
    let xbar = wmean(&|b| f64::from(b.confidence));
    let ybar = wmean(&|b| b.accuracy);
    let sxy = wmean(&|b| (f64::from(b.confidence) - xbar) * (b.accuracy - ybar));
    let sxx = wmean(&|b| (f64::from(b.confidence) - xbar).powi(2));
    let slope = sxy / sxx;
    let deviation = wmean(&|b| (b.accuracy - f64::from(b.confidence) / 10.0).abs());
    Ok(CalibrationFit { slope, intercept: ybar - slope * xbar, mean_accuracy_deviation: deviation, bins })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    Ideal,
    AwareUncalibrated,
    UnawareCalibrated,
    Poor,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Ideal, Quadrant::AwareUncalibrated, Quadrant::UnawareCalibrated, Quadrant::Poor];

    /// Points on a median go to the upper / right side.
    pub fn classify(x: f64, y: f64, x_median: f64, y_median: f64) -> Self {
        match (x >= x_median, y >= y_median) {
            (true, true) => Quadrant::Ideal,
            (true, false) => Quadrant::AwareUncalibrated,
            (false, true) => Quadrant::UnawareCalibrated,
            (false, false) => Quadrant::Poor,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::Ideal => "ideal",
            Quadrant::AwareUncalibrated => "aware_uncalibrated",
            Quadrant::UnawareCalibrated => "unaware_calibrated",
            Quadrant::Poor => "poor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantPoint {
    pub agent_id: String,
    pub arm: Arm,
    pub self_awareness: f64,
    pub calibration_difference: f64,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantReport {
    pub points: Vec<QuadrantPoint>,
    pub self_awareness_median: f64,
    pub calibration_difference_median: f64,
    /// Quadrant counts per arm.
    pub counts: BTreeMap<Arm, BTreeMap<Quadrant, usize>>,
    /// Agents excluded because a coordinate was undefined, as `agent_id/arm`.
    pub excluded: Vec<String>,
    /// Fisher's exact test on arm (unassisted, assisted) × in-ideal (yes, no).
    pub ideal_by_arm: TestResult,
}

/// Median-split quadrant allocation over all summaries with both coordinates
/// defined; points are ordered by (arm, agent_id).
pub fn quadrant_analysis(summaries: &[CalibrationSummary]) -> Result<QuadrantReport, MetacognitionError> {
    let mut excluded = Vec::new();
    let mut raw: Vec<(String, Arm, f64, f64)> = Vec::new();
    for s in summaries {
        match (s.self_awareness, s.calibration_difference) {
            (Some(x), Some(y)) => raw.push((s.agent_id.clone(), s.arm, x, y)),
            _ => excluded.push(format!("{}/{}", s.agent_id, s.arm)),
        }
    }
    if raw.len() < 4 {
        return Err(MetacognitionError::TooFewPoints(raw.len()));
    }
    raw.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
    let xs: Vec<f64> = raw.iter().map(|p| p.2).collect();
    let ys: Vec<f64> = raw.iter().map(|p| p.3).collect();
    let (mx, my) = (median(&xs), median(&ys));
    let points: Vec<QuadrantPoint> = raw
        .into_iter()
        .map(|(agent_id, arm, x, y)| QuadrantPoint {
            agent_id,
            arm,
            self_awareness: x,
            calibration_difference: y,
            quadrant: Quadrant::classify(x, y, mx, my),
        })
        .collect();
    let mut counts: BTreeMap<Arm, BTreeMap<Quadrant, usize>> = BTreeMap::new();
    for &arm in Arm::ALL {
        counts.insert(arm, Quadrant::ALL.iter().map(|&q| (q, 0)).collect());
    }
    for p in &points {
        *counts.get_mut(&p.arm).unwrap().get_mut(&p.quadrant).unwrap() += 1;
    }
    let tally = |arm: Arm| {
        let ideal = counts[&arm][&Quadrant::Ideal] as u64;
        let total: usize = counts[&arm].values().sum();
        (ideal, total as u64 - ideal)
    };
    let (a, b) = tally(Arm::Unassisted);
    let (c, d) = tally(Arm::Assisted);
    let ideal_by_arm = fisher_exact_2x2(a, b, c, d).expect("non-empty table");
    Ok(QuadrantReport {
        points,
        self_awareness_median: mx,
        calibration_difference_median: my,
        counts,
        excluded,
        ideal_by_arm,
    })
}
