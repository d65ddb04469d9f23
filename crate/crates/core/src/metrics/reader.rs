//! Reader-averaged summaries with a two-way (reader × case) bootstrap.
//!
//! Each resample draws readers with replacement and, independently, cases
//! with replacement from the union of reviewed cases; a reader's metric on
//! that resample uses its own reviews weighted by case multiplicity.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bootstrap::{percentile_interval, BootstrapConfig, Interval};
use super::classification::{classification_metrics, ConfusionCounts, Metric, PointMetrics};
use super::MetricsError;
use crate::numeric::mean;
use crate::report::opt_finite_or_null;
use crate::rng;
use crate::study_data::{Arm, StudyLog};

const TWO_WAY_STREAM: u64 = 0x23A7_B007;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReaderMetrics {
    pub reader_id: String,
    pub n_cases: usize,
    pub point: PointMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReaderAveragedSummary {
    pub arm: Arm,
    pub readers: Vec<ReaderMetrics>,
    pub mean: BTreeMap<Metric, MeanValue>,
    pub ci: BTreeMap<Metric, Interval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MeanValue(#[serde(serialize_with = "opt_finite_or_null")] pub Option<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub metric: Metric,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub unassisted_mean: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub assisted_mean: Option<f64>,
    /// Mean over readers of (assisted - unassisted).
    #[serde(serialize_with = "opt_finite_or_null")]
    pub delta: Option<f64>,
    /// 100 · (assisted_mean - unassisted_mean) / unassisted_mean.
    #[serde(serialize_with = "opt_finite_or_null")]
    pub pct_change_of_means: Option<f64>,
    /// Mean over readers of each reader's percentage change.
    #[serde(serialize_with = "opt_finite_or_null")]
    pub mean_pct_change: Option<f64>,
    pub delta_ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmComparison {
    pub unassisted: ReaderAveragedSummary,
    pub assisted: ReaderAveragedSummary,
    pub deltas: Vec<MetricDelta>,
}

/// Per-reader reviews as (case index into `cases`, prediction, truth).
struct ArmData {
    reader_ids: Vec<String>,
    reviews: Vec<Vec<(usize, bool, bool)>>,
    n_cases: usize,
}

fn select_readers<'a>(log: &'a StudyLog, filter: Option<&[String]>) -> Vec<&'a str> {
    log.human_readers()
        .into_iter()
        .map(|r| r.reader_id.as_str())
        .filter(|id| filter.is_none_or(|f| f.iter().any(|x| x == id)))
        .collect()
}

fn arm_data(log: &StudyLog, readers: &[&str], arm: Arm) -> ArmData {
    let truth = log.truth_map();
    let mut universe: Vec<&str> = readers.iter().flat_map(|r| log.reader_case_set(r)).collect();
    universe.sort_unstable();
    universe.dedup();
    let index: BTreeMap<&str, usize> = universe.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let reviews = readers
        .iter()
        .map(|r| {
            log.assessments_for(r, arm)
                .into_iter()
                .map(|a| (index[a.case_id.as_str()], a.prediction, truth[a.case_id.as_str()]))
                .collect()
        })
        .collect();
    ArmData { reader_ids: readers.iter().map(|s| s.to_string()).collect(), reviews, n_cases: universe.len() }
}

fn weighted_counts(reviews: &[(usize, bool, bool)], weights: &[u64]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for &(ci, p, t) in reviews {
        c.add(p, t, weights[ci]);
    }
    c
}

fn two_way_draw(seed: u64, b: usize, n_readers: usize, n_cases: usize) -> (Vec<usize>, Vec<u64>) {
    let mut rng = rng::substream(seed, TWO_WAY_STREAM, b as u64);
    let readers = (0..n_readers).map(|_| rng.random_range(0..n_readers)).collect();
    let mut weights = vec![0u64; n_cases];
    for _ in 0..n_cases {
        weights[rng.random_range(0..n_cases)] += 1;
    }
    (readers, weights)
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

fn point_summary(data: &ArmData) -> (Vec<ReaderMetrics>, BTreeMap<Metric, MeanValue>) {
    let ones = vec![1u64; data.n_cases];
    let readers: Vec<ReaderMetrics> = data
        .reader_ids
        .iter()
        .zip(&data.reviews)
        .map(|(id, rev)| ReaderMetrics {
            reader_id: id.clone(),
            n_cases: rev.len(),
            point: classification_metrics(&weighted_counts(rev, &ones)),
        })
        .collect();
    let means = Metric::ALL
        .iter()
        .map(|&m| (m, MeanValue(mean_defined(readers.iter().map(|r| r.point.get(m))))))
        .collect();
    (readers, means)
}

fn check_readers(readers: &[&str], cfg: &BootstrapConfig) -> Result<(), MetricsError> {
    if readers.len() < 2 {
        return Err(MetricsError::TooFewReaders(readers.len()));
    }
    if cfg.resamples < 100 {
        return Err(MetricsError::InvalidConfig(format!("need at least 100 resamples, got {}", cfg.resamples)));
    }
    Ok(())
}

fn intervals(draws: &[Vec<Option<f64>>], cfg: &BootstrapConfig) -> BTreeMap<Metric, Interval> {
    Metric::ALL
        .iter()
        .enumerate()
        .filter_map(|(j, &m)| {
            let vals: Vec<f64> = draws.iter().filter_map(|d| d[j]).collect();
            let skipped = cfg.resamples - vals.len();
            percentile_interval(vals, cfg.level, skipped, cfg.resamples).ok().map(|iv| (m, iv))
        })
        .collect()
}

/// Mean metrics across human readers in one arm with a two-way bootstrap CI.
/// `readers` restricts the summary to the given ids (all humans when `None`).
pub fn reader_averaged_summary(
    log: &StudyLog,
    arm: Arm,
    readers: Option<&[String]>,
    cfg: &BootstrapConfig,
) -> Result<ReaderAveragedSummary, MetricsError> {
    let ids = select_readers(log, readers);
    check_readers(&ids, cfg)?;
    let data = arm_data(log, &ids, arm);
    let (reader_metrics, mean) = point_summary(&data);
    let draws: Vec<Vec<Option<f64>>> = (0..cfg.resamples)
        .into_par_iter()
        .map(|b| {
            let (rs, w) = two_way_draw(cfg.seed, b, ids.len(), data.n_cases);
            let per_reader: Vec<ConfusionCounts> = rs.iter().map(|&r| weighted_counts(&data.reviews[r], &w)).collect();
            Metric::ALL
                .iter()
                .map(|&m| mean_defined(per_reader.iter().map(|c| c.metric(m).ok())))
                .collect()
        })
        .collect();
    Ok(ReaderAveragedSummary { arm, readers: reader_metrics, mean, ci: intervals(&draws, cfg) })
}

/// Both arms plus paired per-metric changes. The delta interval reuses each
/// reader/case resample for both arms.
pub fn arm_comparison(log: &StudyLog, readers: Option<&[String]>, cfg: &BootstrapConfig) -> Result<ArmComparison, MetricsError> {
    let unassisted = reader_averaged_summary(log, Arm::Unassisted, readers, cfg)?;
    let assisted = reader_averaged_summary(log, Arm::Assisted, readers, cfg)?;
    let ids = select_readers(log, readers);
    let un = arm_data(log, &ids, Arm::Unassisted);
    let asx = arm_data(log, &ids, Arm::Assisted);

    let pair_deltas = |rs: &[usize], w: &[u64]| -> Vec<Option<f64>> {
        let cu: Vec<ConfusionCounts> = rs.iter().map(|&r| weighted_counts(&un.reviews[r], w)).collect();
        let ca: Vec<ConfusionCounts> = rs.iter().map(|&r| weighted_counts(&asx.reviews[r], w)).collect();
        Metric::ALL
            .iter()
            .map(|&m| {
                mean_defined(cu.iter().zip(&ca).map(|(u, a)| match (u.metric(m), a.metric(m)) {
                    (Ok(u), Ok(a)) => Some(a - u),
                    _ => None,
                }))
            })
            .collect()
    };
    let draws: Vec<Vec<Option<f64>>> = (0..cfg.resamples)
        .into_par_iter()
        .map(|b| {
            let (rs, w) = two_way_draw(cfg.seed, b, ids.len(), un.n_cases);
            pair_deltas(&rs, &w)
        })
        .collect();
    let delta_ci = intervals(&draws, cfg);

    let deltas = Metric::ALL
        .iter()
        .map(|&m| {
            let pairs: Vec<(f64, f64)> = unassisted
                .readers
                .iter()
                .zip(&assisted.readers)
                .filter_map(|(u, a)| Some((u.point.get(m)?, a.point.get(m)?)))
                .collect();
            let delta = (!pairs.is_empty()).then(|| pairs.iter().map(|(u, a)| a - u).sum::<f64>() / pairs.len() as f64);
            let pct: Vec<f64> = pairs.iter().filter(|(u, _)| *u != 0.0).map(|(u, a)| 100.0 * (a - u) / u).collect();
            let um = unassisted.mean[&m].0;
            let am = assisted.mean[&m].0;
            MetricDelta {
                metric: m,
                unassisted_mean: um,
                assisted_mean: am,
                delta,
                pct_change_of_means: match (um, am) {
                    (Some(u), Some(a)) if u != 0.0 => Some(100.0 * (a - u) / u),
                    _ => None,
                },
                mean_pct_change: (!pct.is_empty()).then(|| mean(&pct)),
                delta_ci: delta_ci.get(&m).copied(),
            }
        })
        .collect();
    Ok(ArmComparison { unassisted, assisted, deltas })
}
