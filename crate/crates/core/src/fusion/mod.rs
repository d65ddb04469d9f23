//! Human input integration for the AI agent.
//!
//! The model's probability is blended with a probability derived from the
//! human's call and Likert confidence:
//!
//! ```text
//! p_h     = 0.5 ± 0.5 · confidence / 10          (+ for a positive call)
//! p_fused = (1 - w) · p_model + w · p_h
//! ```
//!
//! In selective mode the human is consulted only when the model is uncertain,
//! `|p_model - 0.5| ≤ h`; otherwise `p_fused = p_model`. The fused decision is
//! `p_fused ≥ 0.5` (ties resolve positive) and the fused confidence on the
//! 0–10 scale is `10 · |2 p_fused - 1|`.
//!
//! [`nested_cv_optimize`] tunes `(mode, w, h)` by nested cross-validation.

mod config;
mod nested_cv;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::study_data::{Arm, Assessment, StudyLog};

pub use config::FusionConfig;
pub use nested_cv::{
    fusion_items, nested_cv_optimize, nested_cv_optimize_audited, outer_folds, AccessAudit, CvSettings,
    FusionItem, NestedCvReport, NoAudit, OuterFoldResult, SeedSummary, SummaryStats,
};

pub const DECISION_THRESHOLD: f64 = 0.5;
pub const MIN_HUMAN_WEIGHT: f64 = 0.1;
pub const MAX_HUMAN_WEIGHT: f64 = 0.8;
pub const MAX_BAND_HALFWIDTH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("{field} = {value} outside {bounds}")]
    RangeViolation { field: &'static str, value: f64, bounds: &'static str },
    #[error("case `{0}` has no model output")]
    MissingModelOutput(String),
    #[error("case `{0}` has no human assessment in the requested arm")]
    MissingHumanAssessment(String),
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("stratified folding infeasible: {0}")]
    InfeasibleStratification(String),
    #[error("invalid fusion configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Consult the human only inside the uncertainty band.
    Selective,
    /// Always blend.
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub mode: FusionMode,
    pub human_weight: f64,
    /// Half-width of the uncertainty band around 0.5; unused in `Always` mode.
    pub band_halfwidth: f64,
    pub decision_threshold: f64,
}

impl FusionParams {
    pub fn new(mode: FusionMode, human_weight: f64, band_halfwidth: f64) -> Result<Self, FusionError> {
        let p = Self { mode, human_weight, band_halfwidth, decision_threshold: DECISION_THRESHOLD };
        p.validate()?;
        Ok(p)
    }

    pub fn always(human_weight: f64) -> Result<Self, FusionError> {
        Self::new(FusionMode::Always, human_weight, 0.0)
    }

    pub fn selective(human_weight: f64, band_halfwidth: f64) -> Result<Self, FusionError> {
        Self::new(FusionMode::Selective, human_weight, band_halfwidth)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if !(MIN_HUMAN_WEIGHT..=MAX_HUMAN_WEIGHT).contains(&self.human_weight) {
            return Err(FusionError::RangeViolation { field: "human_weight", value: self.human_weight, bounds: "[0.1, 0.8]" });
        }
        if !(0.0..=MAX_BAND_HALFWIDTH).contains(&self.band_halfwidth) {
            return Err(FusionError::RangeViolation { field: "band_halfwidth", value: self.band_halfwidth, bounds: "[0, 0.1]" });
        }
        if self.decision_threshold != DECISION_THRESHOLD {
            return Err(FusionError::RangeViolation { field: "decision_threshold", value: self.decision_threshold, bounds: "{0.5}" });
        }
        Ok(())
    }

    /// Stable identifier, e.g. `selective/w=0.3/h=0.05` or `always/w=0.5`.
    pub fn label(&self) -> String {
        match self.mode {
            FusionMode::Selective => format!("selective/w={}/h={}", self.human_weight, self.band_halfwidth),
            FusionMode::Always => format!("always/w={}", self.human_weight),
        }
    }

    /// Whether a case with this model probability triggers human input.
    pub fn consults(&self, p_model: f64) -> bool {
        match self.mode {
            FusionMode::Always => true,
            FusionMode::Selective => (p_model - 0.5).abs() <= self.band_halfwidth,
        }
    }
}

impl fmt::Display for FusionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedOutcome {
    pub case_id: String,
    pub reader_id: String,
    pub p_fused: f64,
    pub decision: bool,
    pub confidence_10: f64,
    pub human_consulted: bool,
}

/// Map a human call and Likert confidence onto a probability of enhancement.
pub fn human_probability(prediction: bool, confidence: f64) -> Result<f64, FusionError> {
    if !(1.0..=10.0).contains(&confidence) {
        return Err(FusionError::RangeViolation { field: "confidence", value: confidence, bounds: "[1, 10]" });
    }
    let sign = if prediction { 1.0 } else { -1.0 };
    Ok(0.5 + sign * (confidence / 10.0) * 0.5)
}

/// Blend already-validated probabilities. Returns `(p_fused, human_consulted)`.
pub fn fuse_probability(p_model: f64, p_human: f64, params: &FusionParams) -> (f64, bool) {
    if params.consults(p_model) {
        let w = params.human_weight;
        ((1.0 - w) * p_model + w * p_human, true)
    } else {
        (p_model, false)
    }
}

pub fn decision(p: f64) -> bool {
    p >= DECISION_THRESHOLD
}

/// Confidence on the 0–10 scale for a probability.
pub fn confidence_10(p: f64) -> f64 {
    10.0 * (2.0 * p - 1.0).abs()
}

/// Fuse one model probability with one human assessment.
pub fn fuse_case(p_model: f64, human: &Assessment, params: &FusionParams) -> Result<FusedOutcome, FusionError> {
    if !(0.0..=1.0).contains(&p_model) {
        return Err(FusionError::RangeViolation { field: "p_model", value: p_model, bounds: "[0, 1]" });
    }
    params.validate()?;
    let p_h = human_probability(human.prediction, human.confidence)?;
    let (p_fused, human_consulted) = fuse_probability(p_model, p_h, params);
    Ok(FusedOutcome {
        case_id: human.case_id.clone(),
        reader_id: human.reader_id.clone(),
        p_fused,
        decision: decision(p_fused),
        confidence_10: confidence_10(p_fused),
        human_consulted,
    })
}

/// Fuse every (case, human) pair in one arm, ordered by (case_id, reader_id).
///
/// Every case reviewed by a human in either arm must have a model output and
/// an assessment in `human_source`.
pub fn fuse_log(log: &StudyLog, params: &FusionParams, human_source: Arm) -> Result<Vec<FusedOutcome>, FusionError> {
    params.validate()?;
    let outputs = log.model_output_map();
    let mut pairs: BTreeMap<(&str, &str), &Assessment> = BTreeMap::new();
    for a in log.assessments.iter().filter(|a| a.arm == human_source) {
        pairs.insert((a.case_id.as_str(), a.reader_id.as_str()), a);
    }
    if let Some(a) = log.assessments.iter().find(|a| !pairs.keys().any(|(c, _)| *c == a.case_id)) {
        return Err(FusionError::MissingHumanAssessment(a.case_id.clone()));
    }
    if pairs.is_empty() {
        return Err(FusionError::MissingHumanAssessment("<none reviewed>".into()));
    }
    pairs
        .values()
        .map(|a| {
            let m = outputs
                .get(a.case_id.as_str())
                .ok_or_else(|| FusionError::MissingModelOutput(a.case_id.clone()))?;
            fuse_case(m.p_model, a, params)
        })
        .collect()
}

/// The default search grid: w ∈ {0.1, …, 0.8} crossed with selective mode at
/// h ∈ {0, 0.05, 0.1} and always mode. 32 configurations, w-major order.
pub fn default_grid() -> Vec<FusionParams> {
    FusionConfig::default().grid().expect("default config is valid")
}
