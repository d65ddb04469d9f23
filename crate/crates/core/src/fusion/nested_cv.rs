//! Nested cross-validation over the fusion grid.
//!
//! Folds are built over cases, stratified by ground truth, so every
//! (case, human) item of a case lands in the same fold. For each seed and each
//! outer fold the grid is scored by mean balanced accuracy across inner folds
//! of the outer-training cases only; the winner (earliest grid entry on ties)
//! is then evaluated once on the outer-test cases.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{decision, fuse_probability, human_probability, FusionConfig, FusionError, FusionParams};
use crate::metrics::{ConfusionCounts, Metric};
use crate::numeric::{mean, sample_sd};
use crate::report::opt_finite_or_null;
use crate::rng;
use crate::study_data::{Arm, StudyLog};

const OUTER_STREAM: u64 = 0x0F_01D5;
const INNER_STREAM: u64 = 0x1F_01D5;

/// One (case, human) pair prepared for fusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionItem {
    /// Index into the case list returned by [`fusion_items`].
    pub case: usize,
    pub p_model: f64,
    pub p_human: f64,
    pub truth: bool,
}

/// Observer of every item access made while selecting parameters. Used to
/// verify that outer-test cases never influence selection.
pub trait AccessAudit: Sync {
    fn record(&self, seed: u64, outer_fold: usize, case: usize);
}

pub struct NoAudit;

impl AccessAudit for NoAudit {
    fn record(&self, _: u64, _: usize, _: usize) {}
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvSettings {
    pub n_outer: usize,
    pub n_inner: usize,
    pub seeds: Vec<u64>,
    pub human_source: Arm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterFoldResult {
    pub seed: u64,
    pub fold: usize,
    pub selected: FusionParams,
    pub selected_index: usize,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub inner_score: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub fused_balanced_accuracy: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub model_balanced_accuracy: Option<f64>,
    pub n_test_cases: usize,
    pub n_test_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Mean outer-fold balanced accuracy of the tuned fusion.
    #[serde(serialize_with = "opt_finite_or_null")]
    pub fused_balanced_accuracy: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub model_balanced_accuracy: Option<f64>,
    pub fused_beats_model: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    #[serde(serialize_with = "opt_finite_or_null")]
    pub mean: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub sd: Option<f64>,
}

impl SummaryStats {
    fn of(values: &[f64]) -> Self {
        match values.len() {
            0 => Self { mean: None, sd: None },
            1 => Self { mean: Some(values[0]), sd: None },
            _ => Self { mean: Some(mean(values)), sd: Some(sample_sd(values)) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedCvReport {
    pub settings: CvSettings,
    pub grid: Vec<FusionParams>,
    pub n_cases: usize,
    pub n_items: usize,
    pub folds: Vec<OuterFoldResult>,
    pub seeds: Vec<SeedSummary>,
    pub fused: SummaryStats,
    pub model_alone: SummaryStats,
    /// Seeds on which the tuned fusion beat the model alone.
    pub seeds_fused_better: usize,
    /// How often each grid entry was selected, keyed by label.
    pub selection_frequency: BTreeMap<String, usize>,
    /// Every grid entry scored identically in every inner search, so the
    /// selection carries no information.
    pub degenerate_grid: bool,
}

/// Prepare (case, human) items from one arm. Returns the case ids (items
/// reference them by index) and the items ordered by (case, reader).
pub fn fusion_items(log: &StudyLog, arm: Arm) -> Result<(Vec<String>, Vec<FusionItem>), FusionError> {
    let outputs = log.model_output_map();
    let truth = log.truth_map();
    let mut pairs: BTreeMap<(&str, &str), (bool, f64)> = BTreeMap::new();
    for a in log.assessments.iter().filter(|a| a.arm == arm) {
        pairs.insert((a.case_id.as_str(), a.reader_id.as_str()), (a.prediction, a.confidence));
    }
    let mut case_ids: Vec<String> = Vec::new();
    let mut items = Vec::with_capacity(pairs.len());
    for ((case, _), (pred, conf)) in pairs {
        let p_model = outputs
            .get(case)
            .ok_or_else(|| FusionError::MissingModelOutput(case.to_string()))?
            .p_model;
        if case_ids.last().is_none_or(|c| c != case) {
            case_ids.push(case.to_string());
        }
        let t = *truth.get(case).ok_or_else(|| FusionError::MissingHumanAssessment(case.to_string()))?;
        items.push(FusionItem { case: case_ids.len() - 1, p_model, p_human: human_probability(pred, conf)?, truth: t });
    }
    if let Some(a) = log.assessments.iter().find(|a| case_ids.binary_search(&a.case_id).is_err()) {
        return Err(FusionError::MissingHumanAssessment(a.case_id.clone()));
    }
    if items.is_empty() {
        return Err(FusionError::MissingHumanAssessment("<none reviewed>".into()));
    }
    Ok((case_ids, items))
}

/// Stratified k-fold assignment of `members` (case indices): each class is
/// shuffled and dealt round-robin, negatives continuing where positives end.
fn stratify(members: &[usize], truth: &[bool], k: usize, rng: &mut rng::StreamRng) -> BTreeMap<usize, usize> {
    let mut pos: Vec<usize> = members.iter().copied().filter(|&c| truth[c]).collect();
    let mut neg: Vec<usize> = members.iter().copied().filter(|&c| !truth[c]).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let offset = pos.len();
    pos.iter()
        .enumerate()
        .map(|(i, &c)| (c, i % k))
        .chain(neg.iter().enumerate().map(|(i, &c)| (c, (offset + i) % k)))
        .collect()
}

fn check_feasible(truth: &[bool], n_outer: usize, n_inner: usize) -> Result<(), FusionError> {
    for class in [true, false] {
        let c = truth.iter().filter(|&&t| t == class).count();
        let train_min = c - c.div_ceil(n_outer);
        if c < n_outer || train_min < n_inner {
            return Err(FusionError::InfeasibleStratification(format!(
                "{} {} cases cannot fill {n_outer} outer x {n_inner} inner folds",
                c,
                if class { "positive" } else { "negative" }
            )));
        }
    }
    Ok(())
}

/// Outer fold index for each case under `seed`.
pub fn outer_folds(case_truth: &[bool], n_outer: usize, seed: u64) -> Vec<usize> {
    let members: Vec<usize> = (0..case_truth.len()).collect();
    let map = stratify(&members, case_truth, n_outer, &mut rng::stream(seed, OUTER_STREAM));
    members.iter().map(|c| map[c]).collect()
}

fn balanced_accuracy<'a>(items: impl Iterator<Item = &'a FusionItem>, decide: impl Fn(&FusionItem) -> bool) -> Option<f64> {
    let mut c = ConfusionCounts::default();
    for it in items {
        c.add(decide(it), it.truth, 1);
    }
    c.metric(Metric::BalancedAccuracy).ok()
}

fn fused_decision(params: &FusionParams) -> impl Fn(&FusionItem) -> bool + '_ {
    move |it| decision(fuse_probability(it.p_model, it.p_human, params).0)
}

struct Selection {
    index: usize,
    score: Option<f64>,
    all_tied: bool,
}

#[allow(clippy::too_many_arguments)]
fn select(
    items: &[FusionItem],
    train: &[usize],
    inner_fold: &BTreeMap<usize, usize>,
    n_inner: usize,
    grid: &[FusionParams],
    audit: &dyn AccessAudit,
    seed: u64,
    outer: usize,
) -> Selection {
    for &i in train {
        audit.record(seed, outer, items[i].case);
    }
    let scores: Vec<Option<f64>> = grid
        .iter()
        .map(|p| {
            let per_fold: Vec<f64> = (0..n_inner)
                .filter_map(|f| {
                    let val = train.iter().map(|&i| &items[i]).filter(|it| inner_fold[&it.case] == f);
                    balanced_accuracy(val, fused_decision(p))
                })
                .collect();
            (!per_fold.is_empty()).then(|| mean(&per_fold))
        })
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.unwrap_or(f64::NEG_INFINITY) > scores[best].unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
    }
    Selection { index: best, score: scores[best], all_tied: scores.iter().all(|s| *s == scores[0]) }
}

/// Nested CV with the default (no-op) audit.
pub fn nested_cv_optimize(log: &StudyLog, config: &FusionConfig) -> Result<NestedCvReport, FusionError> {
    nested_cv_optimize_audited(log, config, &NoAudit)
}

/// Nested CV reporting every item access made during parameter selection.
pub fn nested_cv_optimize_audited(
    log: &StudyLog,
    config: &FusionConfig,
    audit: &dyn AccessAudit,
) -> Result<NestedCvReport, FusionError> {
    let grid = config.grid()?;
    let (case_ids, items) = fusion_items(log, config.human_source)?;
    let truth_map = log.truth_map();
    let case_truth: Vec<bool> = case_ids.iter().map(|c| truth_map[c.as_str()]).collect();
    check_feasible(&case_truth, config.n_outer, config.n_inner)?;

    let jobs: Vec<(u64, usize)> =
        config.seeds.iter().flat_map(|&s| (0..config.n_outer).map(move |f| (s, f))).collect();
    let per_seed_folds: BTreeMap<u64, Vec<usize>> =
        config.seeds.iter().map(|&s| (s, outer_folds(&case_truth, config.n_outer, s))).collect();

    let results: Vec<(OuterFoldResult, bool)> = jobs
        .par_iter()
        .map(|&(seed, outer)| {
            let folds = &per_seed_folds[&seed];
            let train_cases: Vec<usize> = (0..case_ids.len()).filter(|&c| folds[c] != outer).collect();
            let mut inner_rng = rng::substream(seed, INNER_STREAM, outer as u64);
            let inner_fold = stratify(&train_cases, &case_truth, config.n_inner, &mut inner_rng);
            let (train, test): (Vec<usize>, Vec<usize>) = (0..items.len()).partition(|&i| folds[items[i].case] != outer);
            let sel = select(&items, &train, &inner_fold, config.n_inner, &grid, audit, seed, outer);
            let chosen = grid[sel.index];
            let test_items = || test.iter().map(|&i| &items[i]);
            let result = OuterFoldResult {
                seed,
                fold: outer,
                selected: chosen,
                selected_index: sel.index,
                inner_score: sel.score,
                fused_balanced_accuracy: balanced_accuracy(test_items(), fused_decision(&chosen)),
                model_balanced_accuracy: balanced_accuracy(test_items(), |it| decision(it.p_model)),
                n_test_cases: folds.iter().filter(|&&f| f == outer).count(),
                n_test_items: test.len(),
            };
            (result, sel.all_tied)
        })
        .collect();

    let degenerate_grid = results.iter().all(|(_, tied)| *tied);
    let folds: Vec<OuterFoldResult> = results.into_iter().map(|(r, _)| r).collect();
    let seeds: Vec<SeedSummary> = config
        .seeds
        .iter()
        .map(|&s| {
            let fr: Vec<&OuterFoldResult> = folds.iter().filter(|r| r.seed == s).collect();
            let avg = |get: fn(&OuterFoldResult) -> Option<f64>| {
                let v: Vec<f64> = fr.iter().filter_map(|r| get(r)).collect();
                (!v.is_empty()).then(|| mean(&v))
            };
            let fused = avg(|r| r.fused_balanced_accuracy);
            let model = avg(|r| r.model_balanced_accuracy);
            SeedSummary {
                seed: s,
                fused_balanced_accuracy: fused,
                model_balanced_accuracy: model,
                fused_beats_model: matches!((fused, model), (Some(f), Some(m)) if f > m),
            }
        })
        .collect();
    let mut selection_frequency = BTreeMap::new();
    for r in &folds {
        *selection_frequency.entry(r.selected.label()).or_insert(0) += 1;
    }
    let fused_vals: Vec<f64> = seeds.iter().filter_map(|s| s.fused_balanced_accuracy).collect();
    let model_vals: Vec<f64> = seeds.iter().filter_map(|s| s.model_balanced_accuracy).collect();
    Ok(NestedCvReport {
        settings: CvSettings {
            n_outer: config.n_outer,
            n_inner: config.n_inner,
            seeds: config.seeds.clone(),
            human_source: config.human_source,
        },
        grid,
        n_cases: case_ids.len(),
        n_items: items.len(),
        seeds_fused_better: seeds.iter().filter(|s| s.fused_beats_model).count(),
        folds,
        seeds,
        fused: SummaryStats::of(&fused_vals),
        model_alone: SummaryStats::of(&model_vals),
        selection_frequency,
        degenerate_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_folds_balance_classes() {
        let truth: Vec<bool> = (0..53).map(|i| i % 3 == 0).collect();
        let folds = outer_folds(&truth, 5, 11);
        for f in 0..5 {
            let members: Vec<usize> = (0..53).filter(|&c| folds[c] == f).collect();
            let pos = members.iter().filter(|&&c| truth[c]).count();
            assert!((3..=4).contains(&pos), "fold {f} has {pos} positives");
            assert!((10..=11).contains(&members.len()));
        }
        assert_eq!(folds, outer_folds(&truth, 5, 11));
        assert_ne!(folds, outer_folds(&truth, 5, 12));
    }

    #[test]
    fn feasibility() {
        let truth = [true, true, true, false, false, false, false, false];
        assert!(check_feasible(&truth, 5, 3).is_err());
        let many: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        assert!(check_feasible(&many, 5, 3).is_ok());
    }
}
