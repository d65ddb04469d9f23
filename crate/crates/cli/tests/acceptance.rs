//! Acceptance criteria 1–7. Each test prints one `criterion N ... PASS|FAIL`
//! line straight to stderr (bypassing output capture) and then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use tandem_cli::{cmd_analyze, cmd_optimize, cmd_simulate, AnalyzeOptions, Clock, RunContext, SimulateSource, FUSED_OUTCOMES_FILE};
use tandem_core::economics::{
    agent_performance, cumulative_value, equivalent_experience, experience_fits, fit_ols, support_leverage, PayBand,
    PaySchedule,
};
use tandem_core::fusion::{
    fuse_probability, fusion_items, human_probability, nested_cv_optimize, nested_cv_optimize_audited, outer_folds,
    AccessAudit, FusionConfig, FusionMode, FusionParams,
};
use tandem_core::metacognition::{
    calibration_difference, confidence_bias, pooled_calibration_fit, quadrant_analysis, self_awareness, CalibrationSummary,
    Quadrant, Response,
};
use tandem_core::metrics::{auroc_rank, classification_metrics, cohens_kappa, confusion, prc, roc, throughput_summary};
use tandem_core::rng::stream;
use tandem_core::sim::{brute_force_oracles, paper_like, simulate, skilled_humans, AgentSpec, CohortSpec, OracleFixture};
use tandem_core::stats::{fisher_exact_2x2, levene, mann_whitney_u, mcnemar, t_test};
use tandem_core::Arm;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "criterion {n} {name}: {status} ({detail})");
    assert!(pass, "criterion {n} {name}: {detail}");
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_throughput_identities() {
    let cph = |secs: f64| throughput_summary(&[secs; 40]).unwrap().cases_per_hour;
    let unassisted = cph(45.6);
    let assisted = cph(30.6);
    let model = cph(4.10);
    let ratio = assisted / unassisted;
    let checks = [
        format!("{unassisted:.1}") == "78.9" && unassisted.round() == 79.0,
        format!("{assisted:.1}") == "117.6" && assisted.round() == 118.0,
        format!("{ratio:.2}") == "1.49" && ((ratio - 1.0) * 100.0).round() == 49.0,
        model.round() == 878.0,
    ];
    let detail = format!("{unassisted:.1}/h, {assisted:.1}/h, ratio {ratio:.2}, model {model:.0}/h");
    verdict(1, "throughput identities", checks.iter().all(|&c| c), &detail);
}

// ---------------------------------------------------------------- 2

fn random_fixture(seed: u64) -> OracleFixture {
    let mut rng = stream(seed, 2);
    let n = rng.random_range(1..=20);
    let prevalence = [0.0, 1.0, 0.5, 0.3][rng.random_range(0..4)];
    let tied_scores = rng.random_bool(0.5);
    let flat_confidence = rng.random_bool(0.05);
    let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(prevalence)).collect();
    let prediction: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let other_rater: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let score: Vec<f64> = (0..n)
        .map(|_| if tied_scores { f64::from(rng.random_range(0..5u8)) / 4.0 } else { rng.random::<f64>() })
        .collect();
    let confidence: Vec<f64> =
        (0..n).map(|_| if flat_confidence { 5.0 } else { f64::from(rng.random_range(1..=10u8)) }).collect();
    OracleFixture { truth, prediction, other_rater, score, confidence }
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..500u64 {
        let f = random_fixture(seed);
        let o = brute_force_oracles(&f, 20).unwrap();
        let c = confusion(&f.prediction, &f.truth).unwrap();
        let m = classification_metrics(&c);
        let resp: Vec<Response> = f
            .confidence
            .iter()
            .zip(f.prediction.iter().zip(&f.truth))
            .map(|(&confidence, (p, t))| Response { confidence, correct: p == t })
            .collect();
        let exact = [
            ("counts", (c.tp, c.fp, c.tn, c.fn_) == (o.tp, o.fp, o.tn, o.fn_)),
            ("sensitivity", m.sensitivity == o.sensitivity),
            ("specificity", m.specificity == o.specificity),
            ("precision", m.precision == o.precision),
            ("f1", m.f1 == o.f1),
            ("accuracy", m.accuracy == o.accuracy),
        ];
        let auroc = auroc_rank(&f.score, &f.truth).ok();
        let real = [
            ("balanced_accuracy", close(m.balanced_accuracy, o.balanced_accuracy, 1e-12)),
            ("kappa", close(cohens_kappa(&f.prediction, &f.other_rater).ok(), o.kappa, 1e-12)),
            ("auroc", close(auroc, o.auroc, 1e-12)),
            ("roc_area", close(roc(&f.score, &f.truth).ok().map(|r| r.area), o.auroc, 1e-12)),
            ("average_precision", close(prc(&f.score, &f.truth).ok().map(|r| r.area), o.average_precision, 1e-12)),
            ("calibration_difference", close(calibration_difference(&resp).ok().map(|d| d.value), o.calibration_difference, 1e-12)),
            ("confidence_bias", close(confidence_bias(&resp).ok(), o.confidence_bias, 1e-12)),
            ("self_awareness", close(self_awareness(&resp).ok(), o.self_awareness, 1e-12)),
        ];
        for (name, ok) in exact.iter().chain(&real) {
            if !ok {
                failures.push(format!("seed {seed} {name}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("500 fixtures, {} mismatches {:?}, {secs:.2}s", failures.len(), failures.iter().take(5).collect::<Vec<_>>());
    verdict(2, "oracle equivalence", failures.is_empty() && secs < 10.0, &detail);
}

// ---------------------------------------------------------------- 3

const NULL_REPS: u64 = 1000;
const KS_LIMIT: f64 = 0.06;

fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

fn normals(rng: &mut impl Rng, n: usize, shift: f64) -> Vec<f64> {
    (0..n).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect()
}

fn null_pvalues(name: &str) -> Vec<f64> {
    (0..NULL_REPS)
        .map(|rep| {
            let mut rng = stream(rep, tandem_core::rng::stable_hash(name));
            match name {
                "mcnemar" => {
                    let discordant = Binomial::new(4000, 0.5).unwrap().sample(&mut rng);
                    let b = Binomial::new(discordant, 0.5).unwrap().sample(&mut rng);
                    mcnemar(b, discordant - b).unwrap().p_value
                }
                "t_independent" => {
                    let (x, y) = (normals(&mut rng, 20, 0.0), normals(&mut rng, 25, 0.0));
                    t_test(&x, &y, false).unwrap().p_value
                }
                "t_paired" => {
                    let base = normals(&mut rng, 20, 0.0);
                    let x: Vec<f64> = base.iter().map(|b| b + rng.sample::<f64, _>(StandardNormal)).collect();
                    let y: Vec<f64> = base.iter().map(|b| b + rng.sample::<f64, _>(StandardNormal)).collect();
                    t_test(&x, &y, true).unwrap().p_value
                }
                "mann_whitney" => {
                    let (x, y) = (normals(&mut rng, 30, 0.0), normals(&mut rng, 35, 0.0));
                    mann_whitney_u(&x, &y).unwrap().p_value
                }
                "levene" => {
                    let groups: Vec<Vec<f64>> = (0..3).map(|_| normals(&mut rng, 25, 0.0)).collect();
                    levene(&groups).unwrap().p_value
                }
                "fisher" => {
                    // Large groups keep the conditional null close to continuous.
                    let a = Binomial::new(4000, 0.5).unwrap().sample(&mut rng);
                    let c = Binomial::new(4000, 0.5).unwrap().sample(&mut rng);
                    fisher_exact_2x2(a, 4000 - a, c, 4000 - c).unwrap().p_value
                }
                _ => unreachable!(),
            }
        })
        .collect()
}

fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Largest |library − enumeration| over every 2×2 table with total ≤ 12.
fn fisher_enumeration_error() -> f64 {
    let mut worst: f64 = 0.0;
    for total in 1..=12u64 {
        for a in 0..=total {
            for b in 0..=total - a {
                for c in 0..=total - a - b {
                    let d = total - a - b - c;
                    let (row1, row2, col1) = (a + b, c + d, a + c);
                    let weight = |x: u64| if col1 < x { 0 } else { choose(row1, x) * choose(row2, col1 - x) };
                    let observed = weight(a);
                    let tail: u128 = (0..=col1.min(row1)).map(weight).filter(|&w| w <= observed).sum();
                    let exact = tail as f64 / choose(total, col1) as f64;
                    let lib = fisher_exact_2x2(a, b, c, d).unwrap().p_value;
                    worst = worst.max((lib - exact.min(1.0)).abs());
                }
            }
        }
    }
    worst
}

fn mcnemar_enumeration_error() -> f64 {
    let mut worst: f64 = 0.0;
    for n in 1..=12u64 {
        for b in 0..=n {
            let k = b.min(n - b);
            let tail: u128 = (0..=k).map(|i| choose(n, i)).sum();
            let exact = (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0);
            worst = worst.max((mcnemar(b, n - b).unwrap().p_value - exact).abs());
        }
    }
    worst
}

/// Every split of ranks 1..=n (n ≤ 12) into x and y, against the U
/// distribution counted over all splits.
fn mann_whitney_enumeration_error() -> f64 {
    let mut worst: f64 = 0.0;
    for n in 2..=12usize {
        for nx in 1..n {
            let masks: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize == nx).collect();
            let u_of = |mask: u32| -> usize {
                let mut u = 0;
                for i in 0..n {
                    if mask >> i & 1 == 1 {
                        u += (0..i).filter(|&j| mask >> j & 1 == 0).count();
                    }
                }
                u
            };
            let us: Vec<usize> = masks.iter().map(|&m| u_of(m)).collect();
            let total = us.len() as f64;
            for (&mask, &u) in masks.iter().zip(&us) {
                let lower = us.iter().filter(|&&v| v <= u).count() as f64 / total;
                let upper = us.iter().filter(|&&v| v >= u).count() as f64 / total;
                let exact = (2.0 * lower.min(upper)).min(1.0);
                let x: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i as f64).collect();
                let y: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| i as f64).collect();
                worst = worst.max((mann_whitney_u(&x, &y).unwrap().p_value - exact).abs());
            }
        }
    }
    worst
}

#[test]
fn criterion_3_test_calibration() {
    let start = Instant::now();
    let names = ["mcnemar", "t_independent", "t_paired", "mann_whitney", "levene", "fisher"];
    let ks: BTreeMap<&str, f64> = names.iter().map(|&n| (n, ks_uniform(null_pvalues(n)))).collect();
    let exact = [
        ("fisher", fisher_enumeration_error()),
        ("mcnemar", mcnemar_enumeration_error()),
        ("mann_whitney", mann_whitney_enumeration_error()),
    ];
    let secs = start.elapsed().as_secs_f64();
    let pass = ks.values().all(|&d| d < KS_LIMIT) && exact.iter().all(|&(_, e)| e <= 1e-12) && secs < 60.0;
    let ks_text: Vec<String> = ks.iter().map(|(k, v)| format!("{k} {v:.3}")).collect();
    let exact_text: Vec<String> = exact.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    let detail = format!("KS {}; exact max error {}; {secs:.1}s", ks_text.join(", "), exact_text.join(", "));
    verdict(3, "statistical test calibration", pass, &detail);
}

// ---------------------------------------------------------------- 4

#[derive(Default)]
struct Recorder(Mutex<Vec<(u64, usize, usize)>>);

impl AccessAudit for Recorder {
    fn record(&self, seed: u64, outer_fold: usize, case: usize) {
        self.0.lock().unwrap().push((seed, outer_fold, case));
    }
}

fn random_params(rng: &mut impl Rng) -> FusionParams {
    let w = rng.random_range(0.1..=0.8);
    if rng.random_bool(0.5) {
        FusionParams::selective(w, rng.random_range(0.0..=0.1)).unwrap()
    } else {
        FusionParams::always(w).unwrap()
    }
}

/// Fusion-rule properties for one random configuration; returns failures.
fn fusion_properties(seed: u64) -> Vec<&'static str> {
    let mut rng = stream(seed, 4);
    let params = random_params(&mut rng);
    let mut failed = Vec::new();
    for _ in 0..100 {
        let p_model: f64 = rng.random();
        let (pred, conf) = (rng.random_bool(0.5), f64::from(rng.random_range(1..=10u8)));
        let p_h = human_probability(pred, conf).unwrap();
        let (p, consulted) = fuse_probability(p_model, p_h, &params);
        if consulted && !(p >= p_model.min(p_h) - 1e-12 && p <= p_model.max(p_h) + 1e-12) {
            failed.push("convexity");
        }
        if params.mode == FusionMode::Selective && (p_model - 0.5).abs() > params.band_halfwidth && (p != p_model || consulted) {
            failed.push("selective identity");
        }
        let zero_band = FusionParams::selective(params.human_weight, 0.0).unwrap();
        if p_model != 0.5 && fuse_probability(p_model, p_h, &zero_band).0 != p_model {
            failed.push("selective identity at h=0");
        }
        let p_h2 = rng.random_range(p_h..=1.0);
        if fuse_probability(p_model, p_h2, &params).0 < p {
            failed.push("monotone in p_h");
        }
        if p_h > p_model && params.human_weight < 0.8 {
            let heavier = FusionParams { human_weight: rng.random_range(params.human_weight..=0.8), ..params };
            if fuse_probability(p_model, p_h, &heavier).0 < p - 1e-12 {
                failed.push("monotone in w");
            }
        }
    }
    failed
}

/// Nested CV on a small random study and config; true when no outer-test
/// case was touched during selection.
fn leakage_free(seed: u64) -> Result<bool, String> {
    let mut rng = stream(seed, 44);
    let mut spec = skilled_humans();
    spec.cohort = CohortSpec::new(rng.random_range(80..=160), rng.random_range(0.35..=0.65));
    spec.agents.truncate(rng.random_range(2..=5));
    spec.cases_per_reader = 2 * rng.random_range(10..=20);
    let log = simulate(&spec, seed).map_err(|e| e.to_string())?;

    let w_lo = rng.random_range(1..=4u8);
    let (w_min, w_max) = (f64::from(w_lo) / 10.0, f64::from(rng.random_range(w_lo..=8)) / 10.0);
    let mut mode_set = match rng.random_range(0..3) {
        0 => vec![FusionMode::Selective],
        1 => vec![FusionMode::Always],
        _ => vec![FusionMode::Selective, FusionMode::Always],
    };
    mode_set.sort();
    let mut h_set: Vec<f64> = [0.0, 0.05, 0.1].into_iter().filter(|_| rng.random_bool(0.6)).collect();
    if h_set.is_empty() {
        h_set.push(0.05);
    }
    let config = FusionConfig {
        mode_set,
        w_min,
        w_max,
        w_step: 0.1,
        h_set,
        n_outer: rng.random_range(2..=5),
        n_inner: rng.random_range(2..=3),
        seeds: (0..rng.random_range(1..=2)).map(|_| rng.random()).collect(),
        human_source: if rng.random_bool(0.5) { Arm::Unassisted } else { Arm::Assisted },
    };
    let audit = Recorder::default();
    nested_cv_optimize_audited(&log, &config, &audit).map_err(|e| e.to_string())?;
    let (case_ids, _) = fusion_items(&log, config.human_source).map_err(|e| e.to_string())?;
    let truth = log.truth_map();
    let case_truth: Vec<bool> = case_ids.iter().map(|c| truth[c.as_str()]).collect();
    let accesses = audit.0.into_inner().unwrap();
    let leaked = config.seeds.iter().any(|&s| {
        let folds = outer_folds(&case_truth, config.n_outer, s);
        accesses.iter().any(|&(rs, f, c)| rs == s && folds[c] == f)
    });
    Ok(!accesses.is_empty() && !leaked)
}

#[test]
fn criterion_4_fusion_properties() {
    let start = Instant::now();
    let property_failures: Vec<(u64, &str)> =
        (0..200u64).flat_map(|s| fusion_properties(s).into_iter().map(move |f| (s, f))).collect();
    let audit_failures: Vec<String> = (0..200u64)
        .filter_map(|s| match leakage_free(s) {
            Ok(true) => None,
            Ok(false) => Some(format!("seed {s}: leak")),
            Err(e) => Some(format!("seed {s}: {e}")),
        })
        .collect();
    let log = simulate(&skilled_humans(), 2024).unwrap();
    let report = nested_cv_optimize(&log, &FusionConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = property_failures.is_empty() && audit_failures.is_empty() && report.seeds_fused_better >= 4 && secs < 60.0;
    let detail = format!(
        "{} property failures, {} audit failures {:?}, skilled preset fused {:.3} vs model {:.3} better in {}/5 seeds, {secs:.1}s",
        property_failures.len(),
        audit_failures.len(),
        audit_failures.iter().take(3).collect::<Vec<_>>(),
        report.fused.mean.unwrap_or(f64::NAN),
        report.model_alone.mean.unwrap_or(f64::NAN),
        report.seeds_fused_better
    );
    verdict(4, "fusion properties", pass, &detail);
}

// ---------------------------------------------------------------- 5

fn point(agent: usize, arm: Arm, x: f64, y: f64) -> CalibrationSummary {
    CalibrationSummary {
        agent_id: format!("A{agent:02}"),
        arm,
        n_cases: 100,
        self_awareness: Some(x),
        calibration_difference: Some(y),
        calibration_degenerate: false,
        confidence_bias: None,
        mean_confidence: None,
        accuracy: None,
    }
}

#[test]
fn criterion_5_calibration_analytics() {
    let mut rng = stream(5, 5);
    let mut responses = Vec::new();
    for c in 1..=10u32 {
        let k = rng.random_range(1..=6);
        let n = 10 * k;
        for i in 0..n {
            responses.push(Response { confidence: f64::from(c), correct: i < c * k });
        }
    }
    let fit = pooled_calibration_fit(&responses).unwrap();
    let slope_ok = (fit.slope - 0.1).abs() <= 1e-12;

    // 12 agents: 2 ideal without support, 9 with. Quadrant coordinates are
    // jittered around ±1 so the medians fall near 0.
    let mut summaries = Vec::new();
    let mut r = stream(5, 55);
    let mut jitter = move || r.random_range(0.0..0.2);
    for i in 0..12 {
        let (ux, uy) = match i {
            0 | 1 => (1.0, 1.0),
            2 => (1.0, -1.0),
            3 => (-1.0, 1.0),
            _ => (-1.0, -1.0),
        };
        let (ax, ay) = if i < 9 { (1.0, 1.0) } else { (-1.0, -1.0) };
        summaries.push(point(i, Arm::Unassisted, ux + jitter(), uy + jitter()));
        summaries.push(point(i, Arm::Assisted, ax + jitter(), ay + jitter()));
    }
    let q = quadrant_analysis(&summaries).unwrap();
    let ideal = |arm: Arm| q.counts[&arm][&Quadrant::Ideal];
    let quad_ok = ideal(Arm::Unassisted) == 2 && ideal(Arm::Assisted) == 9 && q.ideal_by_arm.p_value < 0.05;
    let detail = format!(
        "slope {:.15}, ideal {} -> {} of 12, Fisher p {:.4}",
        fit.slope,
        ideal(Arm::Unassisted),
        ideal(Arm::Assisted),
        q.ideal_by_arm.p_value
    );
    verdict(5, "calibration analytics", slope_ok && quad_ok, &detail);
}

// ---------------------------------------------------------------- 6

const INJECTED_YEARS: f64 = 10.0;

/// 31 agents with 1..=31 years; accuracy 0.55 + 0.01·years and confidence
/// 3 + 0.1·years, support adding +0.10 accuracy and +1.0 confidence, i.e.
/// ten years on both lines.
fn leverage_recovery(seed: u64) -> f64 {
    let mut spec = paper_like();
    spec.cohort = CohortSpec::new(2000, 0.5);
    spec.cases_per_reader = 1000;
    let template = spec.agents[0].clone();
    spec.agents = (1..=31)
        .map(|y| {
            let y = f64::from(y);
            AgentSpec {
                agent_id: format!("A{y:02}"),
                years_experience: y,
                base_sensitivity: 0.55 + 0.01 * y,
                base_specificity: 0.55 + 0.01 * y,
                assisted_gain_slope: 0.01 * INJECTED_YEARS / y,
                base_confidence: 3.0 + 0.1 * y,
                confidence_gain_correct: 0.0,
                assisted_confidence_gain: 0.1 * INJECTED_YEARS,
                confidence_noise_sd: 1.0,
                ..template.clone()
            }
        })
        .collect();
    let log = simulate(&spec, seed).unwrap();
    let fits = experience_fits(&agent_performance(&log).unwrap()).unwrap();
    support_leverage(&log, &fits, None, None).unwrap().leveraged_years.unwrap().median
}

#[test]
fn criterion_6_economics_round_trip() {
    // Noise-free inversion.
    let years = [1.0, 4.0, 9.0, 15.0, 22.0];
    let acc: Vec<f64> = years.iter().map(|y| 0.6 + 0.005 * y).collect();
    let conf: Vec<f64> = years.iter().map(|y| 4.0 + 0.08 * y).collect();
    let (fa, fc) = (fit_ols(&years, &acc).unwrap(), fit_ols(&years, &conf).unwrap());
    let eq = equivalent_experience(&fa, &fc, 0.6 + 0.005 * 17.5, 4.0 + 0.08 * 17.5).unwrap();
    let exact_ok = (eq.years - 17.5).abs() <= 1e-9;

    let recovered: Vec<f64> = [11u64, 12, 13].iter().map(|&s| leverage_recovery(s)).collect();
    let recovery_ok = recovered.iter().all(|r| (r - INJECTED_YEARS).abs() <= 0.05 * INJECTED_YEARS);

    let banded = PaySchedule {
        currency: "GBP".into(),
        bands: vec![
            PayBand { years_from: 0, annual: 30_000.0 },
            PayBand { years_from: 2, annual: 45_000.0 },
            PayBand { years_from: 5, annual: 60_000.0 },
            PayBand { years_from: 10, annual: 80_000.0 },
        ],
    };
    let sums = [
        (0.0, 0.0),
        (1.0, 30_000.0),
        (3.5, 127_500.0),
        (5.0, 195_000.0),
        (12.0, 655_000.0),
        (20.25, 1_315_000.0),
    ];
    let sums_ok = sums.iter().all(|&(y, v)| cumulative_value(y, &banded).unwrap() == v)
        && cumulative_value(7.5, &PaySchedule::flat("USD", 100_000.0)).unwrap() == 750_000.0;

    let detail = format!(
        "exact inversion {:.12}, recovered {:?} of {INJECTED_YEARS} years, banded sums {}",
        eq.years,
        recovered.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
        if sums_ok { "exact" } else { "wrong" }
    );
    verdict(6, "economics round trip", exact_ok && recovery_ok && sums_ok, &detail);
}

// ---------------------------------------------------------------- 7

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).unwrap().display().to_string();
            out.insert(rel, std::fs::read(&path).unwrap());
        }
    }
}

fn full_pipeline(threads: usize) -> (BTreeMap<String, Vec<u8>>, f64) {
    let dir = tempfile::tempdir().unwrap();
    let ctx = RunContext { seed: 42, clock: Clock::Fixed(1_700_000_000) };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let start = Instant::now();
    pool.install(|| {
        let study = dir.path().join("study");
        let opt = dir.path().join("opt");
        cmd_simulate(&SimulateSource::Preset("paper_like".into()), &study, &ctx).unwrap();
        let report = cmd_optimize(&study, None, &opt, &ctx).unwrap();
        assert_eq!((report.grid.len(), report.folds.len()), (32, 25));
        let opts = AnalyzeOptions { fused: Some(opt.join(FUSED_OUTCOMES_FILE)), ..AnalyzeOptions::default() };
        cmd_analyze(&study, &opts, &dir.path().join("analysis"), &ctx).unwrap();
    });
    let secs = start.elapsed().as_secs_f64();
    let mut files = BTreeMap::new();
    collect_files(dir.path(), dir.path(), &mut files);
    (files, secs)
}

#[test]
fn criterion_7_end_to_end_determinism() {
    let (one, t1) = full_pipeline(1);
    let (eight, t8) = full_pipeline(8);
    let (again, t8b) = full_pipeline(8);
    let differing: Vec<&String> = one.keys().filter(|k| one.get(*k) != eight.get(*k) || one.get(*k) != again.get(*k)).collect();
    let cases = std::str::from_utf8(&one["study/cases.csv"]).unwrap().lines().count() - 1;
    let pass = differing.is_empty() && one.len() == eight.len() && cases == 1109 && t1.max(t8).max(t8b) < 60.0;
    let detail = format!(
        "{} files, {} differ {:?}, {cases} cases, {t1:.1}s on 1 thread, {t8:.1}s and {t8b:.1}s on 8",
        one.len(),
        differing.len(),
        differing.iter().take(3).collect::<Vec<_>>()
    );
    verdict(7, "end-to-end determinism", pass, &detail);
}
