//! Hypothesis tests. All p-values are two-sided and lie in [0, 1].

use serde::{Deserialize, Serialize};

use super::distributions::{
    binomial_cdf, chi2_sf, f_sf, hypergeometric_pmf, normal_sf, student_t_two_sided,
};
use super::StatsError;
use crate::numeric::{mean, midranks, pearson_r, sample_variance, tie_group_sizes};
use crate::report::finite_or_null;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ChiSquare,
    McnemarExact,
    McnemarCc,
    TPaired,
    TIndependent,
    MannWhitney,
    FisherExact,
    Levene,
    AnovaOneway,
    Pearson,
    Spearman,
}

/// Outcome of a single hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: TestMethod,
    /// Test statistic. Infinite when `degenerate` is set; serialized as null then.
    #[serde(serialize_with = "finite_or_null")]
    pub statistic: f64,
    pub p_value: f64,
    pub df: Option<f64>,
    /// Denominator degrees of freedom for F-based tests.
    pub df2: Option<f64>,
    pub n: usize,
    /// Zero-variance input with a nonzero effect: statistic is ±∞, p = 0.
    pub degenerate: bool,
}

impl TestResult {
    fn new(method: TestMethod, statistic: f64, p_value: f64, n: usize) -> Self {
        Self {
            method,
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            df: None,
            df2: None,
            n,
            degenerate: false,
        }
    }

    fn with_df(mut self, df: f64) -> Self {
        self.df = Some(df);
        self
    }

    fn with_df2(mut self, df2: f64) -> Self {
        self.df2 = Some(df2);
        self
    }

    fn degenerate(method: TestMethod, sign: f64, n: usize) -> Self {
        Self {
            degenerate: true,
            ..Self::new(method, sign.signum() * f64::INFINITY, 0.0, n)
        }
    }
}

/// Discordant-pair count at or above which McNemar switches from the exact
/// binomial to the continuity-corrected chi-square.
pub const MCNEMAR_EXACT_LIMIT: u64 = 25;

/// McNemar's test on the discordant cells `b` and `c` of a paired 2×2 table.
pub fn mcnemar(b: u64, c: u64) -> Result<TestResult, StatsError> {
    let n = b + c;
    if n == 0 {
        return Err(StatsError::NoDiscordant);
    }
    if n < MCNEMAR_EXACT_LIMIT {
        let k = b.min(c);
        let p = (2.0 * binomial_cdf(k, n, 0.5)).min(1.0);
        Ok(TestResult::new(TestMethod::McnemarExact, b as f64, p, n as usize))
    } else {
        let diff = (b as f64 - c as f64).abs();
        let stat = (diff - 1.0).max(0.0).powi(2) / n as f64;
        Ok(TestResult::new(TestMethod::McnemarCc, stat, chi2_sf(stat, 1.0), n as usize).with_df(1.0))
    }
}

/// Fisher's exact test for the table `[[a, b], [c, d]]`.
///
/// The statistic reported is the top-left count `a`, the variable the test
/// conditions on. Two-sided p sums every table at the observed margins whose
/// probability does not exceed the observed one.
pub fn fisher_exact_2x2(a: u64, b: u64, c: u64, d: u64) -> Result<TestResult, StatsError> {
    let total = a + b + c + d;
    if total == 0 {
        return Err(StatsError::InvalidInput("empty contingency table".into()));
    }
    let row1 = a + b;
    let col1 = a + c;
    let row2 = c + d;
    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let p_obs = hypergeometric_pmf(a, total, row1, col1);
    let cutoff = p_obs * (1.0 + 1e-7);
    let p: f64 = (lo..=hi)
        .map(|x| hypergeometric_pmf(x, total, row1, col1))
        .filter(|&p| p <= cutoff)
        .sum();
    Ok(TestResult::new(TestMethod::FisherExact, a as f64, p.min(1.0), total as usize))
}

/// Student's t-test. Paired uses differences `y - x`; independent uses a
/// pooled variance and the statistic `(mean(y) - mean(x)) / se`.
pub fn t_test(x: &[f64], y: &[f64], paired: bool) -> Result<TestResult, StatsError> {
    if paired {
        if x.len() != y.len() {
            return Err(StatsError::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(StatsError::TooFewObservations { needed: 2, got: x.len() });
        }
        let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
        let n = diffs.len();
        let d_bar = mean(&diffs);
        let var = sample_variance(&diffs);
        if var == 0.0 {
            if d_bar == 0.0 {
                return Err(StatsError::ZeroVariance);
            }
            return Ok(TestResult::degenerate(TestMethod::TPaired, d_bar, n).with_df((n - 1) as f64));
        }
        let t = d_bar / (var / n as f64).sqrt();
        let df = (n - 1) as f64;
        Ok(TestResult::new(TestMethod::TPaired, t, student_t_two_sided(t, df), n).with_df(df))
    } else {
        if x.len() < 2 || y.len() < 2 {
            return Err(StatsError::TooFewObservations { needed: 2, got: x.len().min(y.len()) });
        }
        let (nx, ny) = (x.len() as f64, y.len() as f64);
        let diff = mean(y) - mean(x);
        let pooled = ((nx - 1.0) * sample_variance(x) + (ny - 1.0) * sample_variance(y)) / (nx + ny - 2.0);
        let df = nx + ny - 2.0;
        let n = x.len() + y.len();
        if pooled == 0.0 {
            if diff == 0.0 {
                return Err(StatsError::ZeroVariance);
            }
            return Ok(TestResult::degenerate(TestMethod::TIndependent, diff, n).with_df(df));
        }
        let t = diff / (pooled * (1.0 / nx + 1.0 / ny)).sqrt();
        Ok(TestResult::new(TestMethod::TIndependent, t, student_t_two_sided(t, df), n).with_df(df))
    }
}

/// Mann–Whitney U statistics `(U_x, U_y)`; they always sum to `n_x · n_y`.
pub fn mann_whitney_u_pair(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let nx = x.len() as f64;
    let ny = y.len() as f64;
    let rx: f64 = ranks[..x.len()].iter().sum();
    let ux = rx - nx * (nx + 1.0) / 2.0;
    (ux, nx * ny - ux)
}

/// Largest `n_x · n_y` for which the exact null distribution is enumerated.
pub const MANN_WHITNEY_EXACT_LIMIT: usize = 400;

/// Mann–Whitney U test; the reported statistic is `U_x`.
///
/// Exact permutation p when `n_x · n_y ≤ 400` and there are no ties, normal
/// approximation with tie-corrected variance otherwise.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    let (ux, _) = mann_whitney_u_pair(x, y);
    let (nx, ny) = (x.len(), y.len());
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ties = tie_group_sizes(&pooled);
    let has_ties = ties.iter().any(|&t| t > 1);

    if nx * ny <= MANN_WHITNEY_EXACT_LIMIT && !has_ties {
        let dist = mann_whitney_null_counts(nx, ny);
        let total: f64 = dist.iter().sum();
        let u = ux.round() as usize;
        let lower: f64 = dist[..=u].iter().sum::<f64>() / total;
        let upper: f64 = dist[u..].iter().sum::<f64>() / total;
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(TestResult::new(TestMethod::MannWhitney, ux, p, n));
    }

    let (fx, fy, fnn) = (nx as f64, ny as f64, n as f64);
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = fx * fy / 12.0 * ((fnn + 1.0) - tie_term / (fnn * (fnn - 1.0)));
    if var <= 0.0 {
        return Ok(TestResult::new(TestMethod::MannWhitney, ux, 1.0, n));
    }
    let z = (ux - fx * fy / 2.0) / var.sqrt();
    Ok(TestResult::new(TestMethod::MannWhitney, ux, 2.0 * normal_sf(z.abs()), n))
}

// Number of rank arrangements yielding each U in 0..=m·n, by the recurrence
// f(m, n, u) = f(m-1, n, u-n) + f(m, n-1, u).
fn mann_whitney_null_counts(m: usize, n: usize) -> Vec<f64> {
    let max_u = m * n;
    // table[j][u] for the current m, j = 0..=n
    let mut prev: Vec<Vec<f64>> = (0..=n)
        .map(|_| {
            let mut v = vec![0.0; max_u + 1];
            v[0] = 1.0;
            v
        })
        .collect();
    for mi in 1..=m {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n + 1];
        cur[0][0] = 1.0;
        for j in 1..=n {
            for u in 0..=mi * j {
                let mut v = cur[j - 1][u];
                if u >= j {
                    v += prev[j][u - j];
                }
                cur[j][u] = v;
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

/// Levene's test with mean centering.
pub fn levene(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(StatsError::TooFewObservations { needed: 2, got: g.len() });
    }
    let deviations: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|v| (v - m).abs()).collect()
        })
        .collect();
    let mut res = anova_core(&deviations)?;
    res.method = TestMethod::Levene;
    Ok(res)
}

/// One-way ANOVA F-test.
pub fn oneway_anova(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    anova_core(groups)
}

fn anova_core(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= k {
        return Err(StatsError::TooFewObservations { needed: k + 1, got: n });
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let df1 = (k - 1) as f64;
    let df2 = (n - k) as f64;
    // rounding noise on exactly equal means
    if ss_between < 1e-24 * (1.0 + ss_within) {
        ss_between = 0.0;
    }
    if ss_within == 0.0 {
        if ss_between == 0.0 {
            return Err(StatsError::ZeroVariance);
        }
        return Ok(TestResult::degenerate(TestMethod::AnovaOneway, 1.0, n).with_df(df1).with_df2(df2));
    }
    let f = (ss_between / df1) / (ss_within / df2);
    Ok(TestResult::new(TestMethod::AnovaOneway, f, f_sf(f, df1, df2), n)
        .with_df(df1)
        .with_df2(df2))
}

/// Pearson chi-square test of independence on an r×c table (no continuity
/// correction).
pub fn chi_square(table: &[Vec<u64>]) -> Result<TestResult, StatsError> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(StatsError::InvalidInput("table must be rectangular and at least 2x2".into()));
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let total: f64 = row_sums.iter().sum();
    if row_sums.iter().chain(&col_sums).any(|&s| s == 0.0) {
        return Err(StatsError::InvalidInput("table has an empty row or column".into()));
    }
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let exp = row_sums[i] * col_sums[j] / total;
            stat += (obs as f64 - exp).powi(2) / exp;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as f64;
    Ok(TestResult::new(TestMethod::ChiSquare, stat, chi2_sf(stat, df), total as usize).with_df(df))
}

/// Pearson correlation with a t-transform p-value (df = n - 2).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    correlation(x, y, TestMethod::Pearson)
}

/// Spearman rank correlation: Pearson on midranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    correlation(&midranks(x), &midranks(y), TestMethod::Spearman)
}

fn correlation(x: &[f64], y: &[f64], method: TestMethod) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: n });
    }
    let r = pearson_r(x, y).ok_or(StatsError::ZeroVariance)?;
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        student_t_two_sided(t, df)
    };
    Ok(TestResult::new(method, r, p, n).with_df(df))
}

/// Bonferroni adjustment within a family of size `family_size`.
pub fn bonferroni(p_values: &[f64], family_size: usize) -> Result<Vec<f64>, StatsError> {
    if p_values.is_empty() || family_size < p_values.len() {
        return Err(StatsError::InvalidInput(format!(
            "family size {family_size} smaller than {} p-values",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (p * family_size as f64).min(1.0)).collect())
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// Uniform(0, 1).
pub fn ks_uniform_distance(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(crate::numeric::cmp_f64);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &p)| {
            let above = (i + 1) as f64 / n - p;
            let below = p - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}
