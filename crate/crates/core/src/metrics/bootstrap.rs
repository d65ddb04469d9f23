use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classification::{classification_metrics, ConfusionCounts, Metric, MetricReport};
use super::MetricsError;
use crate::numeric::{cmp_f64, quantile_sorted};
use crate::rng;

const BOOTSTRAP_STREAM: u64 = 0xB007_5742;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: 2000, level: 0.95, seed: 0 }
    }
}

impl BootstrapConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn check(&self) -> Result<(), MetricsError> {
        if self.resamples < 100 {
            return Err(MetricsError::InvalidConfig(format!("need at least 100 resamples, got {}", self.resamples)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(MetricsError::InvalidConfig(format!("level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

/// Percentile interval from a bootstrap distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    /// Resamples on which the statistic was undefined.
    pub skipped: usize,
    pub resamples: usize,
}

/// One scored case: binary prediction and ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredCase {
    pub prediction: bool,
    pub truth: bool,
}

/// Draw the case indices for resample `b`. Each resample has its own RNG
/// stream, so the draw is independent of which thread evaluates it.
pub(crate) fn resample_indices(seed: u64, b: usize, n: usize, out: &mut Vec<usize>) {
    let mut rng = rng::substream(seed, BOOTSTRAP_STREAM, b as u64);
    out.clear();
    out.extend((0..n).map(|_| rng.random_range(0..n)));
}

pub(crate) fn percentile_interval(mut values: Vec<f64>, level: f64, skipped: usize, resamples: usize) -> Result<Interval, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::DegenerateResample(skipped));
    }
    values.sort_by(cmp_f64);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        low: quantile_sorted(&values, alpha),
        high: quantile_sorted(&values, 1.0 - alpha),
        skipped,
        resamples,
    })
}

/// Generic case-resampling percentile bootstrap over `k` statistics at once.
///
/// `stat` receives the resampled indices and returns one value per
/// statistic, `None` where undefined on that resample.
pub fn percentile_bootstrap<F>(n: usize, k: usize, cfg: &BootstrapConfig, stat: F) -> Result<Vec<Interval>, MetricsError>
where
    F: Fn(&[usize]) -> Vec<Option<f64>> + Sync,
{
    cfg.check()?;
    if n < 2 {
        return Err(MetricsError::TooFewCases { needed: 2, got: n });
    }
    let draws: Vec<Vec<Option<f64>>> = (0..cfg.resamples)
        .into_par_iter()
        .map_init(Vec::new, |buf, b| {
            resample_indices(cfg.seed, b, n, buf);
            stat(buf)
        })
        .collect();
    (0..k)
        .map(|j| {
            let vals: Vec<f64> = draws.iter().filter_map(|d| d[j]).collect();
            let skipped = cfg.resamples - vals.len();
            percentile_interval(vals, cfg.level, skipped, cfg.resamples)
        })
        .collect()
}

fn counts_for(cases: &[ScoredCase], idx: &[usize]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for &i in idx {
        c.add(cases[i].prediction, cases[i].truth, 1);
    }
    c
}

/// Percentile bootstrap interval for one metric.
pub fn bootstrap_ci(cases: &[ScoredCase], metric: Metric, cfg: &BootstrapConfig) -> Result<Interval, MetricsError> {
    let mut v = percentile_bootstrap(cases.len(), 1, cfg, |idx| vec![counts_for(cases, idx).metric(metric).ok()])?;
    Ok(v.remove(0))
}

/// Point metrics plus intervals for every metric, sharing one set of
/// resamples. Metrics undefined on every resample get no interval.
pub fn metric_report(cases: &[ScoredCase], cfg: &BootstrapConfig) -> Result<MetricReport, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut point_counts = ConfusionCounts::default();
    for c in cases {
        point_counts.add(c.prediction, c.truth, 1);
    }
    let point = classification_metrics(&point_counts);
    let mut ci = BTreeMap::new();
    if cases.len() >= 2 {
        cfg.check()?;
        let draws: Vec<ConfusionCounts> = (0..cfg.resamples)
            .into_par_iter()
            .map_init(Vec::new, |buf, b| {
                resample_indices(cfg.seed, b, cases.len(), buf);
                counts_for(cases, buf)
            })
            .collect();
        for m in Metric::ALL {
            let vals: Vec<f64> = draws.iter().filter_map(|c| c.metric(m).ok()).collect();
            let skipped = cfg.resamples - vals.len();
            if let Ok(iv) = percentile_interval(vals, cfg.level, skipped, cfg.resamples) {
                ci.insert(m, iv);
            }
        }
    }
    Ok(MetricReport { point, ci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn constant_correct_gives_degenerate_interval() {
        let cases: Vec<ScoredCase> = (0..30).map(|i| ScoredCase { prediction: i % 2 == 0, truth: i % 2 == 0 }).collect();
        let iv = bootstrap_ci(&cases, Metric::Accuracy, &BootstrapConfig::with_seed(1)).unwrap();
        assert_eq!((iv.low, iv.high), (1.0, 1.0));
    }

    // Exhaustive enumeration of all n^n equally likely resamples of a
    // two-case set, then the same type-7 percentile rule on that exact
    // distribution (expanded with multiplicities scaled to B).
    #[test]
    fn two_case_interval_matches_exhaustive_enumeration() {
        let cases = [ScoredCase { prediction: true, truth: true }, ScoredCase { prediction: true, truth: false }];
        let mut exact = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                let correct = [a, b].iter().filter(|&&i| cases[i].prediction == cases[i].truth).count();
                exact.push(correct as f64 / 2.0);
            }
        }
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(exact, vec![0.0, 0.5, 0.5, 1.0]);
        // P(0) = P(1) = 1/4 far exceeds the 2.5% tails.
        let iv = bootstrap_ci(&cases, Metric::Accuracy, &BootstrapConfig { resamples: 2000, level: 0.95, seed: 3 }).unwrap();
        assert_eq!(iv.low, exact[0]);
        assert_eq!(iv.high, exact[3]);
        assert_eq!(iv.skipped, 0);
    }

    #[test]
    fn one_class_resamples_are_skipped_for_balanced_accuracy() {
        let cases = [
            ScoredCase { prediction: true, truth: true },
            ScoredCase { prediction: false, truth: false },
            ScoredCase { prediction: true, truth: false },
        ];
        let iv = bootstrap_ci(&cases, Metric::BalancedAccuracy, &BootstrapConfig::with_seed(5)).unwrap();
        assert!(iv.skipped > 0 && iv.skipped < iv.resamples);
        assert!(iv.low <= iv.high && iv.low >= 0.0 && iv.high <= 1.0);
    }

    #[test]
    fn width_shrinks_like_inverse_root_n() {
        let draw = |n: usize, seed: u64| -> Vec<ScoredCase> {
            let mut rng = rng::stream(seed, 0);
            (0..n).map(|_| ScoredCase { prediction: true, truth: rng.random_bool(0.8) }).collect()
        };
        let mut ratios = Vec::new();
        for seed in 0..5 {
            let cfg = BootstrapConfig::with_seed(seed);
            let w100 = bootstrap_ci(&draw(100, seed), Metric::Accuracy, &cfg).map(|i| i.high - i.low).unwrap();
            let w400 = bootstrap_ci(&draw(400, seed + 100), Metric::Accuracy, &cfg).map(|i| i.high - i.low).unwrap();
            ratios.push(w100 / w400);
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((1.4..=2.6).contains(&mean_ratio), "ratio {mean_ratio}");
    }

    #[test]
    fn rejects_small_configs() {
        let cases = [ScoredCase { prediction: true, truth: true }; 3];
        let cfg = BootstrapConfig { resamples: 50, level: 0.95, seed: 0 };
        assert!(matches!(bootstrap_ci(&cases, Metric::Accuracy, &cfg), Err(MetricsError::InvalidConfig(_))));
        assert!(matches!(
            bootstrap_ci(&cases[..1], Metric::Accuracy, &BootstrapConfig::default()),
            Err(MetricsError::TooFewCases { .. })
        ));
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let cases: Vec<ScoredCase> = (0..50).map(|i| ScoredCase { prediction: i % 3 == 0, truth: i % 2 == 0 }).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| metric_report(&cases, &BootstrapConfig::with_seed(11)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
