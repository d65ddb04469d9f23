//! CDFs and tail probabilities used by the hypothesis tests.

use super::special::{beta_inc, choose, erfc, gamma_q, ln_choose};

/// Standard normal CDF Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail 1 - Φ(z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Student's t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_inc(df / 2.0, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value P(|T| ≥ |t|).
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_inc(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Inverse of [`student_t_cdf`] by bisection; `p` in (0, 1).
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must lie in (0, 1)");
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while student_t_cdf(lo, df) > p {
        lo *= 2.0;
    }
    while student_t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Chi-square upper tail P(X ≥ x).
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Chi-square CDF.
pub fn chi2_cdf(x: f64, df: f64) -> f64 {
    1.0 - chi2_sf(x, df)
}

/// F-distribution upper tail P(F ≥ f).
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_inc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

/// F-distribution CDF.
pub fn f_cdf(f: f64, d1: f64, d2: f64) -> f64 {
    1.0 - f_sf(f, d1, d2)
}

/// Binomial pmf.
pub fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.5 && n <= 1000 {
        return choose(n, k) * 0.5f64.powi(n as i32);
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Binomial CDF P(X ≤ k).
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    (0..=k.min(n)).map(|i| binomial_pmf(i, n, p)).sum::<f64>().min(1.0)
}

/// Hypergeometric pmf: probability of `k` successes in `draws` draws from a
/// population of `total` containing `successes` successes.
pub fn hypergeometric_pmf(k: u64, total: u64, successes: u64, draws: u64) -> f64 {
    if k > successes || k > draws || draws - k > total - successes {
        return 0.0;
    }
    if total <= 1000 {
        return choose(successes, k) * choose(total - successes, draws - k) / choose(total, draws);
    }
    (ln_choose(successes, k) + ln_choose(total - successes, draws - k) - ln_choose(total, draws))
        .exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Composite Simpson on [a, b]; test-only quadrature oracle.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    fn gamma_fn(x: f64) -> f64 {
        super::super::special::ln_gamma(x).exp()
    }

    #[test]
    fn golden_normal() {
        let phi = normal_cdf(1.96);
        assert!((phi - 0.9750).abs() < 1e-4);
        let dens = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let quad = 0.5 + simpson(dens, 0.0, 1.96, 2000);
        assert!((phi - quad).abs() < 1e-10);
    }

    #[test]
    fn golden_student_t() {
        let got = student_t_cdf(2.228, 10.0);
        assert!((got - 0.975).abs() < 1e-3);
        let df = 10.0f64;
        let c = gamma_fn((df + 1.0) / 2.0) / ((df * std::f64::consts::PI).sqrt() * gamma_fn(df / 2.0));
        let dens = |t: f64| c * (1.0 + t * t / df).powf(-(df + 1.0) / 2.0);
        let quad = 0.5 + simpson(dens, 0.0, 2.228, 4000);
        assert!((got - quad).abs() < 1e-9);
    }

    #[test]
    fn golden_chi_square() {
        let got = chi2_cdf(3.841, 1.0);
        assert!((got - 0.95).abs() < 1e-3);
        // df = 1: substitute x = u², density becomes 2·φ(u)
        let dens = |u: f64| 2.0 * (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let quad = simpson(dens, 0.0, 3.841f64.sqrt(), 4000);
        assert!((got - quad).abs() < 1e-9);
    }

    #[test]
    fn golden_f() {
        let got = f_cdf(4.26, 2.0, 9.0);
        assert!((got - 0.95).abs() < 2e-3);
        let (d1, d2) = (2.0f64, 9.0f64);
        let b = gamma_fn(d1 / 2.0) * gamma_fn(d2 / 2.0) / gamma_fn((d1 + d2) / 2.0);
        let dens = |x: f64| {
            ((d1 * x).powf(d1) * d2.powf(d2) / (d1 * x + d2).powf(d1 + d2)).sqrt() / (x * b)
        };
        let quad = simpson(dens, 1e-12, 4.26, 20_000);
        assert!((got - quad).abs() < 1e-6);
    }

    #[test]
    fn t_quantile_inverts_cdf() {
        for &df in &[1.0, 3.0, 9.0, 30.0] {
            for &p in &[0.025, 0.3, 0.975] {
                let q = student_t_quantile(p, df);
                assert!((student_t_cdf(q, df) - p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn binomial_and_hypergeometric_sum_to_one() {
        let s: f64 = (0..=12).map(|k| binomial_pmf(k, 12, 0.5)).sum();
        assert!((s - 1.0).abs() < 1e-14);
        let s: f64 = (0..=4).map(|k| hypergeometric_pmf(k, 8, 4, 4)).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }
}
