//! Human–AI decision fusion and multi-reader study analytics.
//!
//! Modules, bottom-up:
//!
//! - [`stats`]: hypothesis tests and distribution tails
//! - [`study_data`]: reader-study data model, CSV ingestion, case allocation
//! - [`metrics`]: classification metrics, bootstrap intervals, agreement, curves
//! - [`fusion`]: uncertainty-gated human input integration and nested CV tuning
//! - [`metacognition`]: confidence calibration and self-awareness analytics
//! - [`economics`]: experience regressions and pay-schedule valuation
//! - [`sim`]: synthetic cohorts, study logs and brute-force oracles
//! - [`plot`]: byte-stable SVG plots

// `!(x >= 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod economics;
pub mod fusion;
pub mod metacognition;
pub mod metrics;
mod numeric;
pub mod plot;
pub mod report;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod study_data;

pub use fusion::{FusedOutcome, FusionMode, FusionParams, NestedCvReport};
pub use metrics::{ConfusionCounts, CurvePoints, MetricReport};
pub use study_data::{Arm, Assessment, CaseRecord, ModelCaseOutput, ReaderKind, ReaderProfile, StudyLog};
