use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use tandem_core::fusion::{fuse_log, nested_cv_optimize, FusionConfig, NestedCvReport};
use tandem_core::sim::{preset, simulate, StudySpec};
use tandem_core::study_data::{load_study, load_study_dir, overlap_sizes, write_study, StudyPaths, STUDY_META_FILE};
use tandem_core::{Arm, FusionParams, StudyLog};

use crate::fused_csv::{write_fused, FUSED_OUTCOMES_FILE};
use crate::manifest::{RunContext, RunManifest};
use crate::{create_dir, read_text, write_bytes, write_json, CliError, Envelope};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const NESTED_CV_FILE: &str = "nested_cv.json";
pub const INGEST_FILE: &str = "ingest.json";
pub const REPORT_FILE: &str = "report.md";

pub enum SimulateSource {
    Preset(String),
    SpecFile(PathBuf),
}

/// Simulate a study and write its CSV bundle, `study.json` and `manifest.json`.
pub fn cmd_simulate(source: &SimulateSource, out: &Path, ctx: &RunContext) -> Result<StudyLog, CliError> {
    let (spec, input) = match source {
        SimulateSource::Preset(name) => (preset(name)?, None),
        SimulateSource::SpecFile(path) => {
            let spec = StudySpec::from_json(&read_text(path)?).map_err(|e| CliError::json(path, &e))?;
            (spec, Some(path))
        }
    };
    let mut manifest = RunManifest::start("simulate", &spec, vec![ctx.seed], ctx.clock);
    if let Some(p) = input {
        manifest.add_input(p)?;
    }
    let log = simulate(&spec, ctx.seed)?;
    write_study(&log, out)?;
    manifest.finish(ctx.clock);
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(log)
}

/// Where `ingest` reads from: a study directory or four explicit files.
pub enum IngestInputs {
    Dir(PathBuf),
    Files(StudyPaths),
}

#[derive(Debug, Clone, Serialize)]
struct OverlapSummary {
    pairs: usize,
    min: usize,
    median: f64,
    max: usize,
}

#[derive(Debug, Clone, Serialize)]
struct IngestSummary {
    n_cases: usize,
    n_positive: usize,
    n_human_readers: usize,
    n_model_outputs: usize,
    assessments_per_arm: BTreeMap<Arm, usize>,
    reviews_per_reader: BTreeMap<String, usize>,
    reader_overlap: Option<OverlapSummary>,
}

/// Validate a study and write it back in canonical form with a summary.
pub fn cmd_ingest(inputs: &IngestInputs, out: &Path, ctx: &RunContext) -> Result<StudyLog, CliError> {
    let (paths, meta) = match inputs {
        IngestInputs::Dir(d) => (StudyPaths::in_dir(d), Some(d.join(STUDY_META_FILE))),
        IngestInputs::Files(p) => (p.clone(), None),
    };
    let mut manifest = RunManifest::start("ingest", &"ingest", vec![], ctx.clock);
    for p in [&paths.cases, &paths.readers, &paths.assessments, &paths.model_outputs] {
        manifest.add_input(p)?;
    }
    if let Some(m) = &meta {
        manifest.add_input(m)?;
    }
    let log = match inputs {
        IngestInputs::Dir(d) => load_study_dir(d)?,
        IngestInputs::Files(p) => load_study(&p.cases, &p.assessments, &p.model_outputs, &p.readers)?,
    };
    manifest.seeds.push(log.seed);
    write_study(&log, out)?;

    let mut sizes = overlap_sizes(&log);
    sizes.sort_unstable();
    let reader_overlap = (!sizes.is_empty()).then(|| {
        let mid = sizes.len() / 2;
        let median =
            if sizes.len() % 2 == 1 { sizes[mid] as f64 } else { (sizes[mid - 1] + sizes[mid]) as f64 / 2.0 };
        OverlapSummary { pairs: sizes.len(), min: sizes[0], median, max: sizes[sizes.len() - 1] }
    });
    let mut per_arm: BTreeMap<Arm, usize> = Arm::ALL.iter().map(|&a| (a, 0)).collect();
    let mut per_reader: BTreeMap<String, usize> = BTreeMap::new();
    for a in &log.assessments {
        *per_arm.get_mut(&a.arm).expect("every arm present") += 1;
        *per_reader.entry(a.reader_id.clone()).or_default() += 1;
    }
    let summary = IngestSummary {
        n_cases: log.cases.len(),
        n_positive: log.cases.iter().filter(|c| c.ground_truth).count(),
        n_human_readers: log.human_readers().len(),
        n_model_outputs: log.model_outputs.len(),
        assessments_per_arm: per_arm,
        reviews_per_reader: per_reader,
        reader_overlap,
    };
    manifest.finish(ctx.clock);
    write_json(&out.join(INGEST_FILE), &Envelope { manifest: &manifest, body: &summary })?;
    Ok(log)
}

#[derive(Serialize)]
struct OptimizeBody<'a> {
    /// Most frequently selected configuration; fused outcomes use it.
    deployed: FusionParams,
    nested_cv: &'a NestedCvReport,
}

/// The configuration selected in the most outer folds; ties go to the
/// earliest grid entry.
pub fn deployed_params(report: &NestedCvReport) -> Option<FusionParams> {
    let mut counts = vec![0usize; report.grid.len()];
    for f in &report.folds {
        counts[f.selected_index] += 1;
    }
    let best = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (*best.1 > 0).then(|| report.grid[best.0])
}

/// Nested-CV tuning of the fusion rule. Writes `nested_cv.json` and the
/// fused outcomes of the deployed configuration.
pub fn cmd_optimize(study_dir: &Path, config: Option<&Path>, out: &Path, ctx: &RunContext) -> Result<NestedCvReport, CliError> {
    let cfg = match config {
        Some(p) => serde_json::from_str::<FusionConfig>(&read_text(p)?).map_err(|e| CliError::json(p, &e))?,
        None => FusionConfig::default(),
    };
    let mut manifest = RunManifest::start("optimize", &cfg, cfg.seeds.clone(), ctx.clock);
    let paths = StudyPaths::in_dir(study_dir);
    for p in [&paths.cases, &paths.readers, &paths.assessments, &paths.model_outputs, &study_dir.join(STUDY_META_FILE)] {
        manifest.add_input(p)?;
    }
    if let Some(p) = config {
        manifest.add_input(p)?;
    }
    let log = load_study_dir(study_dir)?;
    let report = nested_cv_optimize(&log, &cfg)?;
    let deployed = deployed_params(&report).ok_or(tandem_core::fusion::FusionError::EmptyGrid)?;
    let fused = fuse_log(&log, &deployed, cfg.human_source)?;

    create_dir(out)?;
    write_fused(&out.join(FUSED_OUTCOMES_FILE), &fused)?;
    manifest.finish(ctx.clock);
    write_json(&out.join(NESTED_CV_FILE), &Envelope { manifest: &manifest, body: &OptimizeBody { deployed, nested_cv: &report } })?;
    Ok(report)
}

fn load_json(path: &Path) -> Result<Option<Value>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    serde_json::from_str(&read_text(path)?).map(Some).map_err(|e| CliError::json(path, &e))
}

fn num(v: &Value) -> String {
    v.as_f64().map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

/// Summarise an analysis directory as Markdown in `report.md`. The tuning
/// summary comes from `nested_cv`, defaulting to `nested_cv.json` inside the
/// analysis directory when present.
pub fn cmd_report(analysis_dir: &Path, nested_cv: Option<&Path>, out: &Path) -> Result<String, CliError> {
    let metrics = load_json(&analysis_dir.join("metrics.json"))?
        .ok_or_else(|| CliError::io(&analysis_dir.join("metrics.json"), "file not found"))?;
    let agreement = load_json(&analysis_dir.join("agreement.json"))?;
    let meta = load_json(&analysis_dir.join("metacognition.json"))?;
    let econ = load_json(&analysis_dir.join("economics.json"))?;
    let cv = match nested_cv {
        Some(p) if !p.exists() => return Err(CliError::io(p, "file not found")),
        Some(p) => load_json(p)?,
        None => load_json(&analysis_dir.join(NESTED_CV_FILE))?,
    };

    let mut md = String::from("# Reader study report\n\n");
    let s = &metrics["study"];
    let _ = writeln!(
        md,
        "{} cases ({} positive), {} human readers, {} assessments.\n",
        s["n_cases"], s["n_positive"], s["n_human_readers"], s["n_assessments"]
    );
    md.push_str("## Balanced accuracy by agent and support\n\n| cell | unit | BA | 95% CI |\n|---|---|---|---|\n");
    for cell in ["human_unassisted", "human_assisted", "model_alone", "model_with_human_input"] {
        let c = &metrics["factorial"][cell];
        if c.is_null() {
            let _ = writeln!(md, "| {cell} | | n/a | |");
            continue;
        }
        let ci = &c["ci"]["balanced_accuracy"];
        let _ = writeln!(
            md,
            "| {cell} | {} | {} | {} to {} |",
            c["unit"].as_str().unwrap_or(""),
            num(&c["point"]["balanced_accuracy"]),
            num(&ci["low"]),
            num(&ci["high"])
        );
    }
    let t = &metrics["throughput"];
    if !t.is_null() {
        let _ = writeln!(
            md,
            "\n## Throughput\n\nUnassisted {} cases/hour, assisted {} cases/hour (ratio {}).",
            num(&t["unassisted"]["cases_per_hour"]),
            num(&t["assisted"]["cases_per_hour"]),
            num(&t["speedup"])
        );
    }
    if let Some(a) = agreement {
        let p = &a["human_pooled"];
        if !p.is_null() {
            let _ = writeln!(
                md,
                "\n## Agreement\n\nPooled inter-reader kappa {} unassisted, {} assisted (p = {}).",
                num(&p["unassisted"]),
                num(&p["assisted"]),
                num(&p["p_value"])
            );
        }
    }
    if let Some(m) = meta {
        for (arm, fit) in m["pooled_fit"].as_object().into_iter().flatten() {
            let _ = writeln!(md, "\nPooled calibration slope ({arm}): {}.", num(&fit["slope"]));
        }
        if let Some(counts) = m["quadrant"]["counts"].as_object() {
            md.push_str("\n## Self-awareness quadrants\n\n");
            for (arm, c) in counts {
                let _ = writeln!(md, "- {arm}: {} in the ideal quadrant", c["ideal"]);
            }
        }
    }
    if let Some(e) = econ {
        let l = &e["value"]["leveraged_years"];
        if !l.is_null() {
            let _ = writeln!(
                md,
                "\n## Experience leverage\n\nMedian leveraged years {} (IQR {} to {}).",
                num(&l["median"]),
                num(&l["q25"]),
                num(&l["q75"])
            );
        }
    }
    if let Some(cv) = cv {
        let r = &cv["nested_cv"];
        let _ = writeln!(
            md,
            "\n## Fusion tuning\n\nFused BA {} against model alone {}; fused better in {} seeds.",
            num(&r["fused"]["mean"]),
            num(&r["model_alone"]["mean"]),
            r["seeds_fused_better"]
        );
    }
    let errors: Vec<String> = metrics["errors"].as_object().into_iter().flatten().map(|(k, v)| format!("- {k}: {}", v["code"])).collect();
    if !errors.is_empty() {
        let _ = writeln!(md, "\n## Sections not computed\n\n{}", errors.join("\n"));
    }
    create_dir(out)?;
    write_bytes(&out.join(REPORT_FILE), md.as_bytes())?;
    Ok(md)
}
