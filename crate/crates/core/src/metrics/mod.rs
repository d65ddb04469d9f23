//! Classification metrics, bootstrap intervals, agreement, ROC/PRC curves,
//! reader-averaged summaries and throughput.

mod agreement;
mod bootstrap;
mod classification;
mod curves;
mod reader;
mod throughput;

pub use agreement::{cohens_kappa, kappa_difference_test, kappa_from_counts, KappaDifference};
pub use bootstrap::{bootstrap_ci, metric_report, percentile_bootstrap, BootstrapConfig, Interval, ScoredCase};
pub use classification::{classification_metrics, confusion, ConfusionCounts, Metric, MetricReport, PointMetrics};
pub use curves::{auroc_rank, prc, roc, trapezoid_area, write_curve_csv, CurvePoint, CurvePoints};
pub use reader::{arm_comparison, reader_averaged_summary, ArmComparison, MeanValue, MetricDelta, ReaderAveragedSummary, ReaderMetrics};
pub use throughput::{throughput_summary, Throughput};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("{0} is undefined (zero denominator)")]
    UndefinedMetric(Metric),
    #[error("both classes must be present")]
    OneClassOnly,
    #[error("at least one positive case is required")]
    NoPositives,
    #[error("at least two readers are required, got {0}")]
    TooFewReaders(usize),
    #[error("need at least {needed} cases, got {got}")]
    TooFewCases { needed: usize, got: usize },
    #[error("every bootstrap resample was degenerate ({0} skipped)")]
    DegenerateResample(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}
