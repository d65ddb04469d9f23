use rayon::prelude::*;
use serde::Serialize;

use super::bootstrap::{resample_indices, BootstrapConfig};
use super::{check_lengths, MetricsError};

/// Cohen's kappa from the 2×2 agreement table: `both` = both raters positive,
/// `a_only` / `b_only` = one rater positive, `neither` = both negative.
pub fn kappa_from_counts(both: u64, a_only: u64, b_only: u64, neither: u64) -> f64 {
    let n = both + a_only + b_only + neither;
    let a_pos = both + a_only;
    let b_pos = both + b_only;
    let expected_num = a_pos * b_pos + (n - a_pos) * (n - b_pos);
    if expected_num == n * n {
        // Both raters constant and identical.
        return 1.0;
    }
    let nf = n as f64;
    let p_o = (both + neither) as f64 / nf;
    let p_e = expected_num as f64 / (nf * nf);
    (p_o - p_e) / (1.0 - p_e)
}

fn table(a: &[bool], b: &[bool], idx: impl Iterator<Item = usize>) -> (u64, u64, u64, u64) {
    let (mut both, mut a_only, mut b_only, mut neither) = (0, 0, 0, 0);
    for i in idx {
        match (a[i], b[i]) {
            (true, true) => both += 1,
            (true, false) => a_only += 1,
            (false, true) => b_only += 1,
            (false, false) => neither += 1,
        }
    }
    (both, a_only, b_only, neither)
}

/// Cohen's kappa between two binary raters.
pub fn cohens_kappa(labels_a: &[bool], labels_b: &[bool]) -> Result<f64, MetricsError> {
    check_lengths(labels_a.len(), labels_b.len())?;
    let (w, x, y, z) = table(labels_a, labels_b, 0..labels_a.len());
    Ok(kappa_from_counts(w, x, y, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaDifference {
    pub kappa_without: f64,
    pub kappa_with: f64,
    /// `kappa_with - kappa_without`.
    pub delta: f64,
    pub p_value: f64,
    pub resamples: usize,
}

/// Paired bootstrap test of a change in agreement between two conditions
/// over the same cases. Each condition is a pair of rater label vectors.
///
/// Two-sided p = 2·min(P*(Δ ≤ 0), P*(Δ ≥ 0)), clipped to [2/B, 1].
pub fn kappa_difference_test(
    without: (&[bool], &[bool]),
    with: (&[bool], &[bool]),
    cfg: &BootstrapConfig,
) -> Result<KappaDifference, MetricsError> {
    let n = without.0.len();
    check_lengths(n, without.1.len())?;
    check_lengths(n, with.0.len())?;
    check_lengths(n, with.1.len())?;
    if cfg.resamples < 100 {
        return Err(MetricsError::InvalidConfig(format!("need at least 100 resamples, got {}", cfg.resamples)));
    }
    let kappa_without = cohens_kappa(without.0, without.1)?;
    let kappa_with = cohens_kappa(with.0, with.1)?;

    let deltas: Vec<f64> = (0..cfg.resamples)
        .into_par_iter()
        .map_init(Vec::new, |buf, b| {
            resample_indices(cfg.seed, b, n, buf);
            let (w, x, y, z) = table(with.0, with.1, buf.iter().copied());
            let k_with = kappa_from_counts(w, x, y, z);
            let (w, x, y, z) = table(without.0, without.1, buf.iter().copied());
            k_with - kappa_from_counts(w, x, y, z)
        })
        .collect();
    let b = cfg.resamples as f64;
    let le = deltas.iter().filter(|&&d| d <= 0.0).count() as f64 / b;
    let ge = deltas.iter().filter(|&&d| d >= 0.0).count() as f64 / b;
    let p_value = (2.0 * le.min(ge)).clamp(2.0 / b, 1.0);
    Ok(KappaDifference { kappa_without, kappa_with, delta: kappa_with - kappa_without, p_value, resamples: cfg.resamples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn from_table(a: usize, b: usize, c: usize, d: usize) -> (Vec<bool>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (n, (p, q)) in [(a, (true, true)), (b, (true, false)), (c, (false, true)), (d, (false, false))] {
            for _ in 0..n {
                x.push(p);
                y.push(q);
            }
        }
        (x, y)
    }

    #[test]
    fn identical_raters() {
        let v = [true, false, true, true, false];
        assert_eq!(cohens_kappa(&v, &v).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&[true; 4], &[true; 4]).unwrap(), 1.0);
    }

    #[test]
    fn marginal_arithmetic_example() {
        let (x, y) = from_table(45, 15, 25, 15);
        let k = cohens_kappa(&x, &y).unwrap();
        assert!((k - 0.06 / 0.46).abs() < 1e-12);
        assert!((k - 0.1304).abs() < 1e-4);
    }

    #[test]
    fn kappa_is_symmetric() {
        let (x, y) = from_table(10, 3, 7, 12);
        assert_eq!(cohens_kappa(&x, &y).unwrap(), cohens_kappa(&y, &x).unwrap());
    }

    #[test]
    fn identical_conditions_give_p_one() {
        let (x, y) = from_table(20, 5, 8, 17);
        let r = kappa_difference_test((&x, &y), (&x, &y), &BootstrapConfig { resamples: 1000, level: 0.95, seed: 2 }).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn coin_flips_versus_truth_is_significant() {
        let mut rng = rng::stream(99, 0);
        let n = 200;
        let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let a: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let b: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let r = kappa_difference_test((&a, &b), (&truth, &truth), &BootstrapConfig { resamples: 5000, level: 0.95, seed: 1 }).unwrap();
        assert!(r.p_value <= 0.01);
        assert!(r.delta > 0.0);
        let direct = cohens_kappa(&truth, &truth).unwrap() - cohens_kappa(&a, &b).unwrap();
        assert_eq!(r.delta.signum(), direct.signum());
    }
}
