//! `tandem analyze`: metrics, agreement, metacognition and economics reports
//! plus ROC/PR curves and SVG plots. Each section degrades independently:
//! a failing section is replaced by an error record and the rest still runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{Debug, Display};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tandem_core::economics::{
    agent_performance, experience_fits, support_leverage, AgentPerformance, ModelPerformance, PaySchedule, ValueReport,
};
use tandem_core::fusion::{confidence_10, decision, fusion_items, human_probability};
use tandem_core::metacognition::{
    calibration_summary, pooled_calibration_fit, quadrant_analysis, reader_responses, CalibrationFit, CalibrationSummary,
    QuadrantReport, Response,
};
use tandem_core::metrics::{
    arm_comparison, cohens_kappa, kappa_difference_test, metric_report, prc, roc, throughput_summary, write_curve_csv,
    ArmComparison, BootstrapConfig, CurvePoints, Interval, MeanValue, Metric, ScoredCase, Throughput,
};
use tandem_core::plot::{line_plot_svg, quadrant_plot_svg, Series};
use tandem_core::report::opt_finite_or_null;
use tandem_core::stats::{levene, mcnemar, t_test, TestResult};
use tandem_core::study_data::{load_study_dir, pairwise_overlap, StudyPaths, STUDY_META_FILE};
use tandem_core::{Arm, FusedOutcome, StudyLog};

use crate::fused_csv::read_fused;
use crate::manifest::{RunContext, RunManifest};
use crate::{create_dir, write_bytes, write_json, CliError, Envelope};

pub const KAPPA_RESAMPLES: usize = 5000;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Fused outcomes written by `tandem optimize`.
    pub fused: Option<PathBuf>,
    pub pay_schedule: Option<PathBuf>,
    pub resamples: usize,
    pub level: f64,
    pub kappa_resamples: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { fused: None, pay_schedule: None, resamples: 2000, level: 0.95, kappa_resamples: KAPPA_RESAMPLES }
    }
}

/// Path-free view of the options, hashed into the manifest.
#[derive(Serialize)]
struct EffectiveConfig {
    fused_supplied: bool,
    pay_schedule_supplied: bool,
    resamples: usize,
    level: f64,
    kappa_resamples: usize,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionError {
    pub code: String,
    pub message: String,
}

impl SectionError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into() }
    }

    /// The code is the error variant name in snake case.
    fn from_err<E: Debug + Display>(e: E) -> Self {
        let debug = format!("{e:?}");
        let mut code = String::new();
        for (i, ch) in debug.chars().take_while(|c| c.is_alphanumeric()).enumerate() {
            if ch.is_uppercase() && i > 0 {
                code.push('_');
            }
            code.push(ch.to_ascii_lowercase());
        }
        Self { code, message: e.to_string() }
    }
}

type Errors = BTreeMap<String, SectionError>;

fn keep<T>(errors: &mut Errors, section: &str, r: Result<T, SectionError>) -> Option<T> {
    r.map_err(|e| errors.insert(section.to_string(), e)).ok()
}

fn record<T, E: Debug + Display>(errors: &mut Errors, section: &str, r: Result<T, E>) -> Option<T> {
    r.map_err(|e| errors.insert(section.to_string(), SectionError::from_err(e))).ok()
}

/// One cell of the agent × support factorial.
#[derive(Debug, Clone, Serialize)]
pub struct FactorialCell {
    pub agent: &'static str,
    pub supported: bool,
    /// `reader_mean` for humans, `pooled_reviews` for the model.
    pub unit: &'static str,
    pub n_readers: usize,
    pub n_reviews: usize,
    pub point: BTreeMap<Metric, MeanValue>,
    pub ci: BTreeMap<Metric, Interval>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Factorial {
    pub human_unassisted: Option<FactorialCell>,
    pub human_assisted: Option<FactorialCell>,
    pub model_alone: Option<FactorialCell>,
    pub model_with_human_input: Option<FactorialCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyOverview {
    pub n_cases: usize,
    pub n_positive: usize,
    pub n_human_readers: usize,
    pub n_assessments: usize,
    pub has_model_outputs: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThroughputSection {
    pub unassisted: Throughput,
    pub assisted: Throughput,
    /// Assisted over unassisted cases per hour.
    pub speedup: f64,
    pub variance_test: Option<TestResult>,
    /// Paired t-test on per-reader mean times (assisted minus unassisted).
    pub reader_time_test: Option<TestResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSupport {
    pub n_reviews: usize,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub balanced_accuracy_delta: Option<f64>,
    /// Model right, fused wrong.
    pub model_only_correct: u64,
    /// Fused right, model wrong.
    pub fused_only_correct: u64,
    pub human_consulted_fraction: f64,
    pub mcnemar: Option<TestResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveArea {
    #[serde(serialize_with = "opt_finite_or_null")]
    pub auroc: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub average_precision: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub study: StudyOverview,
    pub factorial: Factorial,
    pub human_support: Option<ArmComparison>,
    /// Paired t-test on per-reader balanced accuracy.
    pub human_support_test: Option<TestResult>,
    pub model_support: Option<ModelSupport>,
    pub throughput: Option<ThroughputSection>,
    pub curves: BTreeMap<String, CurveArea>,
    pub errors: Errors,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairKappa {
    pub reader_a: String,
    pub reader_b: String,
    pub n_shared: usize,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub unassisted: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub assisted: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KappaChange {
    pub n_items: usize,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub unassisted: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub assisted: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub delta: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub p_value: Option<f64>,
    pub resamples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub human_pairs: Vec<PairKappa>,
    /// All shared human reviews pooled across reader pairs.
    pub human_pooled: Option<KappaChange>,
    /// Model decision against each human review.
    pub model_human: Option<KappaChange>,
    pub errors: Errors,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentDelta {
    pub agent_id: String,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub self_awareness: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub calibration_difference: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub confidence_bias: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetacognitionReport {
    pub summaries: Vec<CalibrationSummary>,
    pub deltas: Vec<AgentDelta>,
    /// Paired t-tests across human readers, assisted minus unassisted.
    pub delta_tests: BTreeMap<String, TestResult>,
    pub pooled_fit: BTreeMap<Arm, CalibrationFit>,
    pub quadrant: Option<QuadrantReport>,
    pub errors: Errors,
}

#[derive(Debug, Clone, Serialize)]
pub struct EconomicsReport {
    pub agents: Vec<AgentPerformance>,
    pub model: Option<ModelPerformance>,
    pub value: Option<ValueReport>,
    pub errors: Errors,
}

/// Everything `cmd_analyze` writes, for callers that want it in memory.
#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub manifest: RunManifest,
    pub metrics: MetricsReport,
    pub agreement: AgreementReport,
    pub metacognition: MetacognitionReport,
    pub economics: EconomicsReport,
}

/// A model review: the model's probability for the case a human reviewed.
struct ModelItem {
    p_model: f64,
    truth: bool,
}

struct Inputs<'a> {
    log: &'a StudyLog,
    truth: BTreeMap<&'a str, bool>,
    model_items: Result<Vec<ModelItem>, SectionError>,
    fused: &'a Result<Vec<FusedOutcome>, SectionError>,
    cfg: BootstrapConfig,
    kappa_cfg: BootstrapConfig,
}

pub fn cmd_analyze(study_dir: &Path, opts: &AnalyzeOptions, out: &Path, ctx: &RunContext) -> Result<AnalysisOutput, CliError> {
    let effective = EffectiveConfig {
        fused_supplied: opts.fused.is_some(),
        pay_schedule_supplied: opts.pay_schedule.is_some(),
        resamples: opts.resamples,
        level: opts.level,
        kappa_resamples: opts.kappa_resamples,
        seed: ctx.seed,
    };
    let mut manifest = RunManifest::start("analyze", &effective, vec![ctx.seed], ctx.clock);
    let paths = StudyPaths::in_dir(study_dir);
    for p in [&paths.cases, &paths.readers, &paths.assessments, &paths.model_outputs, &study_dir.join(STUDY_META_FILE)] {
        manifest.add_input(p)?;
    }
    for p in opts.fused.iter().chain(opts.pay_schedule.iter()) {
        if !p.exists() {
            return Err(CliError::io(p, "file not found"));
        }
        manifest.add_input(p)?;
    }
    let log = load_study_dir(study_dir)?;

    let fused = load_fused(&log, opts.fused.as_deref())?;
    let schedule = match &opts.pay_schedule {
        Some(p) => Some(PaySchedule::from_json(&crate::read_text(p)?).map_err(SectionError::from_err)),
        None => None,
    };
    let inputs = Inputs {
        log: &log,
        truth: log.truth_map(),
        model_items: model_items(&log, fused.as_ref().ok()),
        fused: &fused,
        cfg: BootstrapConfig { resamples: opts.resamples, level: opts.level, seed: ctx.seed },
        kappa_cfg: BootstrapConfig { resamples: opts.kappa_resamples, level: opts.level, seed: ctx.seed },
    };

    create_dir(out)?;
    create_dir(&out.join("curves"))?;
    create_dir(&out.join("plots"))?;

    let mut metrics = metrics_section(&inputs);
    curves_section(&inputs, out, &mut metrics)?;
    let agreement = agreement_section(&inputs);
    let metacognition = metacognition_section(&inputs);
    if let Some(q) = &metacognition.quadrant {
        write_bytes(&out.join("plots").join("quadrant.svg"), quadrant_plot_svg(q).as_bytes())?;
    }
    let economics = economics_section(&inputs, schedule);

    manifest.finish(ctx.clock);
    write_json(&out.join("metrics.json"), &Envelope { manifest: &manifest, body: &metrics })?;
    write_json(&out.join("agreement.json"), &Envelope { manifest: &manifest, body: &agreement })?;
    write_json(&out.join("metacognition.json"), &Envelope { manifest: &manifest, body: &metacognition })?;
    write_json(&out.join("economics.json"), &Envelope { manifest: &manifest, body: &economics })?;
    Ok(AnalysisOutput { manifest, metrics, agreement, metacognition, economics })
}

/// Fused outcomes are only meaningful when the study has model outputs and
/// every row refers to an existing human review.
fn load_fused(log: &StudyLog, path: Option<&Path>) -> Result<Result<Vec<FusedOutcome>, SectionError>, CliError> {
    if let Err(e) = fusion_items(log, Arm::Unassisted) {
        return Ok(Err(SectionError::from_err(e)));
    }
    let Some(path) = path else {
        return Ok(Err(SectionError::new("not_supplied", "no fused outcomes supplied (see `tandem optimize`)")));
    };
    let rows = match read_fused(path) {
        Ok(rows) => rows,
        Err(CliError::Data(msg)) => return Ok(Err(SectionError::new("malformed_fused_outcomes", msg))),
        Err(e) => return Err(e),
    };
    let reviewed: BTreeSet<(&str, &str)> =
        log.assessments.iter().map(|a| (a.reader_id.as_str(), a.case_id.as_str())).collect();
    let mut seen = BTreeSet::new();
    for o in &rows {
        let key = (o.reader_id.as_str(), o.case_id.as_str());
        if !reviewed.contains(&key) {
            return Ok(Err(SectionError::new(
                "dangling_reference",
                format!("fused outcome for {}/{} has no matching review", o.reader_id, o.case_id),
            )));
        }
        if !seen.insert(key) {
            return Ok(Err(SectionError::new("duplicate_key", format!("{}/{} appears twice", o.reader_id, o.case_id))));
        }
    }
    if rows.is_empty() {
        return Ok(Err(SectionError::new("empty_input", "fused outcome file has no rows")));
    }
    Ok(Ok(rows))
}

/// The model's review set mirrors the fused outcomes when present, else the
/// unassisted human reviews.
fn model_items<'a>(log: &'a StudyLog, fused: Option<&'a Vec<FusedOutcome>>) -> Result<Vec<ModelItem>, SectionError> {
    fusion_items(log, Arm::Unassisted).map_err(SectionError::from_err)?;
    let outputs = log.model_output_map();
    let truth = log.truth_map();
    let keys: Vec<(&str, &str)> = match fused {
        Some(rows) => rows.iter().map(|o| (o.case_id.as_str(), o.reader_id.as_str())).collect(),
        None => log
            .assessments
            .iter()
            .filter(|a| a.arm == Arm::Unassisted)
            .map(|a| (a.case_id.as_str(), a.reader_id.as_str()))
            .collect(),
    };
    Ok(keys
        .into_iter()
        .map(|(case_id, _)| ModelItem { p_model: outputs[case_id].p_model, truth: truth[case_id] })
        .collect())
}

fn pooled_cell(cases: &[ScoredCase], supported: bool, cfg: &BootstrapConfig, n_readers: usize) -> Result<FactorialCell, SectionError> {
    let report = metric_report(cases, cfg).map_err(SectionError::from_err)?;
    Ok(FactorialCell {
        agent: "model",
        supported,
        unit: "pooled_reviews",
        n_readers,
        n_reviews: cases.len(),
        point: Metric::ALL.iter().map(|&m| (m, MeanValue(report.point.get(m)))).collect(),
        ci: report.ci,
    })
}

fn metrics_section(inp: &Inputs<'_>) -> MetricsReport {
    let log = inp.log;
    let mut errors = Errors::new();
    let humans = log.human_readers();
    let study = StudyOverview {
        n_cases: log.cases.len(),
        n_positive: log.cases.iter().filter(|c| c.ground_truth).count(),
        n_human_readers: humans.len(),
        n_assessments: log.assessments.len(),
        has_model_outputs: !log.model_outputs.is_empty(),
    };

    let comparison = record(&mut errors, "human_support", arm_comparison(log, None, &inp.cfg));
    let human_cell = |arm: Arm| {
        comparison.as_ref().map(|c| {
            let s = if arm == Arm::Unassisted { &c.unassisted } else { &c.assisted };
            FactorialCell {
                agent: "human",
                supported: arm == Arm::Assisted,
                unit: "reader_mean",
                n_readers: s.readers.len(),
                n_reviews: s.readers.iter().map(|r| r.n_cases).sum(),
                point: s.mean.clone(),
                ci: s.ci.clone(),
            }
        })
    };
    let human_support_test = comparison.as_ref().and_then(|c| {
        let pairs: Vec<(f64, f64)> = c
            .unassisted
            .readers
            .iter()
            .zip(&c.assisted.readers)
            .filter_map(|(u, a)| Some((u.point.balanced_accuracy?, a.point.balanced_accuracy?)))
            .collect();
        let (u, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        record(&mut errors, "human_support_test", t_test(&u, &a, true))
    });

    let n_readers = humans.len();
    let model_alone = match &inp.model_items {
        Ok(items) => {
            let cases: Vec<ScoredCase> =
                items.iter().map(|i| ScoredCase { prediction: decision(i.p_model), truth: i.truth }).collect();
            keep(&mut errors, "model_alone", pooled_cell(&cases, false, &inp.cfg, n_readers))
        }
        Err(e) => {
            errors.insert("model_alone".into(), e.clone());
            None
        }
    };
    let (model_with_human_input, model_support) = match (&inp.fused, &inp.model_items) {
        (Ok(fused), Ok(items)) => {
            let cases: Vec<ScoredCase> =
                fused.iter().map(|o| ScoredCase { prediction: o.decision, truth: inp.truth[o.case_id.as_str()] }).collect();
            let cell = keep(&mut errors, "model_with_human_input", pooled_cell(&cases, true, &inp.cfg, n_readers));
            (cell, Some(model_support(fused, items, &inp.truth, &mut errors)))
        }
        (Err(e), _) | (_, Err(e)) => {
            errors.insert("fusion".into(), e.clone());
            (None, None)
        }
    };
    MetricsReport {
        study,
        factorial: Factorial {
            human_unassisted: human_cell(Arm::Unassisted),
            human_assisted: human_cell(Arm::Assisted),
            model_alone,
            model_with_human_input,
        },
        human_support: comparison.clone(),
        human_support_test,
        model_support,
        throughput: throughput_section(log, &mut errors),
        curves: BTreeMap::new(),
        errors,
    }
}

fn model_support(fused: &[FusedOutcome], items: &[ModelItem], truth: &BTreeMap<&str, bool>, errors: &mut Errors) -> ModelSupport {
    let (mut model_only, mut fused_only) = (0u64, 0u64);
    let mut model_preds = Vec::with_capacity(items.len());
    let mut truths = Vec::with_capacity(items.len());
    for (o, i) in fused.iter().zip(items) {
        let t = truth[o.case_id.as_str()];
        let m = decision(i.p_model) == t;
        let f = o.decision == t;
        model_only += u64::from(m && !f);
        fused_only += u64::from(f && !m);
        model_preds.push(decision(i.p_model));
        truths.push(t);
    }
    let fused_preds: Vec<bool> = fused.iter().map(|o| o.decision).collect();
    let ba = |p: &[bool]| {
        tandem_core::metrics::confusion(p, &truths).ok().and_then(|c| c.metric(Metric::BalancedAccuracy).ok())
    };
    let delta = ba(&fused_preds).zip(ba(&model_preds)).map(|(f, m)| f - m);
    ModelSupport {
        n_reviews: fused.len(),
        balanced_accuracy_delta: delta,
        model_only_correct: model_only,
        fused_only_correct: fused_only,
        human_consulted_fraction: fused.iter().filter(|o| o.human_consulted).count() as f64 / fused.len() as f64,
        mcnemar: record(errors, "model_support_mcnemar", mcnemar(model_only, fused_only)),
    }
}

fn throughput_section(log: &StudyLog, errors: &mut Errors) -> Option<ThroughputSection> {
    let times = |arm: Arm| -> Vec<f64> {
        log.assessments.iter().filter(|a| a.arm == arm).map(|a| a.response_time_s).collect()
    };
    let (tu, ta) = (times(Arm::Unassisted), times(Arm::Assisted));
    let unassisted = record(errors, "throughput", throughput_summary(&tu))?;
    let assisted = record(errors, "throughput", throughput_summary(&ta))?;
    let reader_means = |arm: Arm| -> Vec<f64> {
        log.human_readers()
            .iter()
            .map(|r| {
                let a = log.assessments_for(&r.reader_id, arm);
                a.iter().map(|x| x.response_time_s).sum::<f64>() / a.len().max(1) as f64
            })
            .collect()
    };
    Some(ThroughputSection {
        speedup: assisted.cases_per_hour / unassisted.cases_per_hour,
        variance_test: record(errors, "throughput_variance_test", levene(&[tu, ta])),
        reader_time_test: record(
            errors,
            "throughput_reader_time_test",
            t_test(&reader_means(Arm::Unassisted), &reader_means(Arm::Assisted), true),
        ),
        unassisted,
        assisted,
    })
}

fn curves_section(inp: &Inputs<'_>, out: &Path, metrics: &mut MetricsReport) -> Result<(), CliError> {
    let mut series: Vec<(&str, Vec<f64>, Vec<bool>)> = Vec::new();
    for (name, arm) in [("human_unassisted", Arm::Unassisted), ("human_assisted", Arm::Assisted)] {
        let reviews: Vec<_> = inp.log.assessments.iter().filter(|a| a.arm == arm).collect();
        let scores: Result<Vec<f64>, _> = reviews.iter().map(|a| human_probability(a.prediction, a.confidence)).collect();
        match scores {
            Ok(s) => series.push((name, s, reviews.iter().map(|a| inp.truth[a.case_id.as_str()]).collect())),
            Err(e) => {
                metrics.errors.insert(format!("curves_{name}"), SectionError::from_err(e));
            }
        }
    }
    if let Ok(items) = &inp.model_items {
        series.push(("model_alone", items.iter().map(|i| i.p_model).collect(), items.iter().map(|i| i.truth).collect()));
    }
    if let Ok(fused) = &inp.fused {
        series.push((
            "model_with_human_input",
            fused.iter().map(|o| o.p_fused).collect(),
            fused.iter().map(|o| inp.truth[o.case_id.as_str()]).collect(),
        ));
    }

    let mut roc_points: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
    let mut prc_points: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
    for (name, scores, truths) in &series {
        let mut area = CurveArea { auroc: None, average_precision: None };
        for (kind, curve) in [("roc", roc(scores, truths)), ("prc", prc(scores, truths))] {
            let curve: CurvePoints = match curve {
                Ok(c) => c,
                Err(e) => {
                    metrics.errors.insert(format!("curves_{name}_{kind}"), SectionError::from_err(e));
                    continue;
                }
            };
            let path = out.join("curves").join(format!("{name}_{kind}.csv"));
            let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            write_curve_csv(&curve, BufWriter::new(file)).map_err(|e| CliError::io(&path, e))?;
            let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.x, p.y)).collect();
            if kind == "roc" {
                area.auroc = Some(curve.area);
                roc_points.push((name, pts));
            } else {
                area.average_precision = Some(curve.area);
                prc_points.push((name, pts));
            }
        }
        metrics.curves.insert(name.to_string(), area);
    }
    let plot = |title: &str, x: &str, y: &str, pts: &[(&str, Vec<(f64, f64)>)], diagonal: bool| {
        let s: Vec<Series<'_>> = pts.iter().map(|(n, p)| Series { name: n, points: p }).collect();
        line_plot_svg(title, x, y, &s, diagonal)
    };
    write_bytes(
        &out.join("plots").join("roc.svg"),
        plot("ROC", "False positive rate", "True positive rate", &roc_points, true).as_bytes(),
    )?;
    write_bytes(&out.join("plots").join("prc.svg"), plot("Precision-recall", "Recall", "Precision", &prc_points, false).as_bytes())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn kappa_change(without: (&[bool], &[bool]), with: (&[bool], &[bool]), cfg: &BootstrapConfig) -> Result<KappaChange, SectionError> {
    if without.0.is_empty() {
        return Err(SectionError::new("empty_input", "no shared reviews"));
    }
    let test = kappa_difference_test(without, with, cfg).map_err(SectionError::from_err)?;
    Ok(KappaChange {
        n_items: without.0.len(),
        unassisted: finite(test.kappa_without),
        assisted: finite(test.kappa_with),
        delta: finite(test.delta),
        p_value: finite(test.p_value),
        resamples: test.resamples,
    })
}

fn agreement_section(inp: &Inputs<'_>) -> AgreementReport {
    let log = inp.log;
    let mut errors = Errors::new();
    let labels: BTreeMap<(&str, Arm, &str), bool> = log
        .assessments
        .iter()
        .map(|a| ((a.reader_id.as_str(), a.arm, a.case_id.as_str()), a.prediction))
        .collect();

    let mut human_pairs = Vec::new();
    let (mut ua, mut ub, mut aa, mut ab) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ((ra, rb), shared) in pairwise_overlap(log) {
        let mut arms: BTreeMap<Arm, (Vec<bool>, Vec<bool>)> = BTreeMap::new();
        for case in &shared {
            let get = |r: &str, arm: Arm| labels.get(&(r, arm, case.as_str())).copied();
            if let (Some(a1), Some(b1), Some(a2), Some(b2)) =
                (get(&ra, Arm::Unassisted), get(&rb, Arm::Unassisted), get(&ra, Arm::Assisted), get(&rb, Arm::Assisted))
            {
                ua.push(a1);
                ub.push(b1);
                aa.push(a2);
                ab.push(b2);
            }
            for &arm in Arm::ALL {
                if let (Some(x), Some(y)) = (get(&ra, arm), get(&rb, arm)) {
                    let e = arms.entry(arm).or_default();
                    e.0.push(x);
                    e.1.push(y);
                }
            }
        }
        let kappa = |arm: Arm| arms.get(&arm).and_then(|(x, y)| cohens_kappa(x, y).ok()).and_then(finite);
        human_pairs.push(PairKappa {
            n_shared: shared.len(),
            unassisted: kappa(Arm::Unassisted),
            assisted: kappa(Arm::Assisted),
            reader_a: ra,
            reader_b: rb,
        });
    }
    let human_pooled = keep(&mut errors, "human_pooled", kappa_change((&ua, &ub), (&aa, &ab), &inp.kappa_cfg));

    let model_human = match &inp.model_items {
        Ok(_) => {
            let outputs = log.model_output_map();
            let (mut model, mut hu, mut ha) = (Vec::new(), Vec::new(), Vec::new());
            for a in log.assessments.iter().filter(|a| a.arm == Arm::Unassisted) {
                if let Some(&assisted) = labels.get(&(a.reader_id.as_str(), Arm::Assisted, a.case_id.as_str())) {
                    model.push(decision(outputs[a.case_id.as_str()].p_model));
                    hu.push(a.prediction);
                    ha.push(assisted);
                }
            }
            keep(&mut errors, "model_human", kappa_change((&model, &hu), (&model, &ha), &inp.kappa_cfg))
        }
        Err(e) => {
            errors.insert("model_human".into(), e.clone());
            None
        }
    };
    AgreementReport { human_pairs, human_pooled, model_human, errors }
}

fn metacognition_section(inp: &Inputs<'_>) -> MetacognitionReport {
    let log = inp.log;
    let mut errors = Errors::new();
    let mut summaries = Vec::new();
    let mut pooled: BTreeMap<Arm, Vec<Response>> = BTreeMap::new();
    for r in log.human_readers() {
        for &arm in Arm::ALL {
            let resp = reader_responses(log, &r.reader_id, arm);
            summaries.push(calibration_summary(&r.reader_id, arm, &resp, None));
            pooled.entry(arm).or_default().extend(resp);
        }
    }
    let model_id = log.model_reader().map_or("MODEL", |m| m.reader_id.as_str());
    match &inp.model_items {
        Ok(items) => {
            let resp: Vec<Response> = items
                .iter()
                .map(|i| Response { confidence: confidence_10(i.p_model), correct: decision(i.p_model) == i.truth })
                .collect();
            summaries.push(calibration_summary(model_id, Arm::Unassisted, &resp, None));
        }
        Err(e) => {
            errors.insert("model".into(), e.clone());
        }
    }
    if let Ok(fused) = &inp.fused {
        let resp: Vec<Response> = fused
            .iter()
            .map(|o| Response { confidence: o.confidence_10, correct: o.decision == inp.truth[o.case_id.as_str()] })
            .collect();
        summaries.push(calibration_summary(model_id, Arm::Assisted, &resp, None));
    }

    let mut pooled_fit = BTreeMap::new();
    for (arm, resp) in &pooled {
        if let Some(fit) = record(&mut errors, &format!("pooled_fit_{arm}"), pooled_calibration_fit(resp)) {
            pooled_fit.insert(*arm, fit);
        }
    }

    let by_agent: BTreeMap<(&str, Arm), &CalibrationSummary> =
        summaries.iter().map(|s| ((s.agent_id.as_str(), s.arm), s)).collect();
    let mut agents: Vec<&str> = summaries.iter().map(|s| s.agent_id.as_str()).collect();
    agents.dedup();
    let deltas: Vec<AgentDelta> = agents
        .iter()
        .filter_map(|&id| {
            let u = by_agent.get(&(id, Arm::Unassisted))?;
            let a = by_agent.get(&(id, Arm::Assisted))?;
            let d = |f: fn(&CalibrationSummary) -> Option<f64>| f(a).zip(f(u)).map(|(x, y)| x - y);
            Some(AgentDelta {
                agent_id: id.to_string(),
                self_awareness: d(|s| s.self_awareness),
                calibration_difference: d(|s| s.calibration_difference),
                confidence_bias: d(|s| s.confidence_bias),
            })
        })
        .collect();

    let mut delta_tests = BTreeMap::new();
    let human_ids: BTreeSet<&str> = log.human_readers().iter().map(|r| r.reader_id.as_str()).collect();
    type Quantity = fn(&CalibrationSummary) -> Option<f64>;
    let quantities: [(&str, Quantity); 3] = [
        ("self_awareness", |s| s.self_awareness),
        ("calibration_difference", |s| s.calibration_difference),
        ("confidence_bias", |s| s.confidence_bias),
    ];
    for (name, f) in quantities {
        let (u, a): (Vec<f64>, Vec<f64>) = human_ids
            .iter()
            .filter_map(|&id| Some((f(by_agent.get(&(id, Arm::Unassisted))?)?, f(by_agent.get(&(id, Arm::Assisted))?)?)))
            .unzip();
        if let Some(t) = record(&mut errors, &format!("delta_test_{name}"), t_test(&u, &a, true)) {
            delta_tests.insert(name.to_string(), t);
        }
    }

    let quadrant = record(&mut errors, "quadrant", quadrant_analysis(&summaries));
    MetacognitionReport { summaries, deltas, delta_tests, pooled_fit, quadrant, errors }
}

fn economics_section(inp: &Inputs<'_>, schedule: Option<Result<PaySchedule, SectionError>>) -> EconomicsReport {
    let mut errors = Errors::new();
    let agents = record(&mut errors, "agents", agent_performance(inp.log)).unwrap_or_default();
    let schedule = match schedule {
        Some(Ok(s)) => Some(s),
        Some(Err(e)) => {
            errors.insert("pay_schedule".into(), e);
            None
        }
        None => None,
    };
    let model = match (&inp.model_items, &inp.fused) {
        (Ok(items), Ok(fused)) => {
            let n = items.len() as f64;
            let m = fused.len() as f64;
            Some(ModelPerformance {
                base_accuracy: items.iter().filter(|i| decision(i.p_model) == i.truth).count() as f64 / n,
                base_confidence: items.iter().map(|i| confidence_10(i.p_model)).sum::<f64>() / n,
                supported_accuracy: fused.iter().filter(|o| o.decision == inp.truth[o.case_id.as_str()]).count() as f64 / m,
                supported_confidence: fused.iter().map(|o| o.confidence_10).sum::<f64>() / m,
            })
        }
        (Err(e), _) | (_, Err(e)) => {
            errors.insert("model".into(), e.clone());
            None
        }
    };
    let value = if agents.is_empty() {
        None
    } else {
        record(&mut errors, "fits", experience_fits(&agents)).and_then(|fits| {
            match support_leverage(inp.log, &fits, schedule.as_ref(), model.as_ref()) {
                Ok(v) => Some(v),
                Err(e) if model.is_some() => {
                    errors.insert("model_value".into(), SectionError::from_err(e));
                    record(&mut errors, "value", support_leverage(inp.log, &fits, schedule.as_ref(), None))
                }
                Err(e) => record(&mut errors, "value", Err::<ValueReport, _>(e)),
            }
        })
    };
    EconomicsReport { agents, model, value, errors }
}
