use serde::Serialize;

use super::MetricsError;
use crate::numeric::{mean, sample_sd};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Throughput {
    pub n: usize,
    pub mean_seconds: f64,
    pub sd_seconds: f64,
    /// 3600 / mean_seconds.
    pub cases_per_hour: f64,
    /// cases_per_hour scaled by the coefficient of variation.
    pub cases_per_hour_sd: f64,
    /// sd_seconds / mean_seconds.
    pub cv: f64,
}

/// Reporting-time summary over per-case response times (seconds).
pub fn throughput_summary(times: &[f64]) -> Result<Throughput, MetricsError> {
    if times.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if let Some(bad) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(MetricsError::InvalidConfig(format!("response time {bad} is not positive")));
    }
    let m = mean(times);
    let sd = sample_sd(times);
    let cv = sd / m;
    let cph = SECONDS_PER_HOUR / m;
    Ok(Throughput { n: times.len(), mean_seconds: m, sd_seconds: sd, cases_per_hour: cph, cases_per_hour_sd: cph * cv, cv })
}
