use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::bootstrap::Interval;
use super::{check_lengths, MetricsError};
use crate::report::opt_finite_or_null;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BalancedAccuracy,
    Sensitivity,
    Specificity,
    Precision,
    F1,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::BalancedAccuracy,
        Metric::Sensitivity,
        Metric::Specificity,
        Metric::Precision,
        Metric::F1,
        Metric::Accuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
            Metric::Precision => "precision",
            Metric::F1 => "f1",
            Metric::Accuracy => "accuracy",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64, metric: Metric) -> Result<f64, MetricsError> {
    if den == 0 {
        Err(MetricsError::UndefinedMetric(metric))
    } else {
        Ok(num as f64 / den as f64)
    }
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn add(&mut self, prediction: bool, truth: bool, weight: u64) {
        match (prediction, truth) {
            (true, true) => self.tp += weight,
            (true, false) => self.fp += weight,
            (false, false) => self.tn += weight,
            (false, true) => self.fn_ += weight,
        }
    }

    pub fn metric(&self, m: Metric) -> Result<f64, MetricsError> {
        match m {
            Metric::Sensitivity => ratio(self.tp, self.positives(), m),
            Metric::Specificity => ratio(self.tn, self.negatives(), m),
            Metric::Precision => ratio(self.tp, self.tp + self.fp, m),
            Metric::Accuracy => ratio(self.tp + self.tn, self.total(), m),
            Metric::BalancedAccuracy => {
                let sens = self.metric(Metric::Sensitivity).map_err(|_| MetricsError::UndefinedMetric(m))?;
                let spec = self.metric(Metric::Specificity).map_err(|_| MetricsError::UndefinedMetric(m))?;
                Ok((sens + spec) / 2.0)
            }
            // 2·prec·sens/(prec+sens) simplifies to 2tp/(2tp+fp+fn); the
            // simplified form stays defined when precision alone is not.
            Metric::F1 => ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_, m),
        }
    }
}

/// Tally predictions against truths.
pub fn confusion(preds: &[bool], truths: &[bool]) -> Result<ConfusionCounts, MetricsError> {
    check_lengths(preds.len(), truths.len())?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in preds.iter().zip(truths) {
        c.add(p, t, 1);
    }
    Ok(c)
}

/// Point metrics. Undefined values are `None` with the reason recorded in
/// `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointMetrics {
    pub counts: ConfusionCounts,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub balanced_accuracy: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub sensitivity: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub specificity: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub precision: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub f1: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub undefined: BTreeMap<Metric, &'static str>,
}

impl PointMetrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::BalancedAccuracy => self.balanced_accuracy,
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
            Metric::Precision => self.precision,
            Metric::F1 => self.f1,
            Metric::Accuracy => self.accuracy,
        }
    }
}

/// All point metrics from a confusion table. Zero denominators are reported
/// per metric rather than failing the whole call.
pub fn classification_metrics(c: &ConfusionCounts) -> PointMetrics {
    let mut undefined = BTreeMap::new();
    let mut get = |m: Metric| match c.metric(m) {
        Ok(v) => Some(v),
        Err(_) => {
            undefined.insert(m, "zero_denominator");
            None
        }
    };
    PointMetrics {
        counts: *c,
        balanced_accuracy: get(Metric::BalancedAccuracy),
        sensitivity: get(Metric::Sensitivity),
        specificity: get(Metric::Specificity),
        precision: get(Metric::Precision),
        f1: get(Metric::F1),
        accuracy: get(Metric::Accuracy),
        undefined,
    }
}

/// Point metrics with percentile-bootstrap intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub point: PointMetrics,
    pub ci: BTreeMap<Metric, Interval>,
}
