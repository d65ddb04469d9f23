//! Self-contained hypothesis-test library with its own distribution tails.
//!
//! No external statistics dependency: incomplete beta and gamma functions are
//! evaluated by Lentz continued fractions in [`special`].

pub mod distributions;
pub mod hypothesis;
pub mod special;

pub use hypothesis::{
    bonferroni, chi_square, fisher_exact_2x2, ks_uniform_distance, levene, mann_whitney_u,
    mann_whitney_u_pair, mcnemar, oneway_anova, pearson, spearman, t_test, TestMethod, TestResult,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no discordant pairs (b + c = 0)")]
    NoDiscordant,
    #[error("zero variance with no effect; statistic undefined")]
    ZeroVariance,
    #[error("at least two groups are required")]
    TooFewGroups,
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
