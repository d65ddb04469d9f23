use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    check_likert, check_nonneg, check_positive, check_unit, Assessment, CaseRecord, CrossoverOrder,
    ModelCaseOutput, ReaderKind, ReaderProfile, StudyError, StudyLog, ValidationOptions,
};

pub const CASES_HEADER: [&str; 7] =
    ["case_id", "site", "pathology", "ground_truth", "lesion_volume_cm3", "age_years", "sex"];
pub const READERS_HEADER: [&str; 3] = ["reader_id", "kind", "years_experience"];
pub const MODEL_OUTPUTS_HEADER: [&str; 3] = ["case_id", "p_model", "dice_vs_truth"];
pub const ASSESSMENTS_HEADER: [&str; 7] = [
    "reader_id",
    "case_id",
    "arm",
    "prediction",
    "confidence",
    "image_quality",
    "response_time_s",
];

/// Optional sidecar carrying the generator seed and crossover metadata.
pub const STUDY_META_FILE: &str = "study.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StudyMeta {
    seed: u64,
    #[serde(default)]
    crossover_order: CrossoverOrder,
}

/// File locations of one study bundle.
#[derive(Debug, Clone)]
pub struct StudyPaths {
    pub cases: PathBuf,
    pub assessments: PathBuf,
    pub model_outputs: PathBuf,
    pub readers: PathBuf,
}

impl StudyPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            cases: dir.join("cases.csv"),
            assessments: dir.join("assessments.csv"),
            model_outputs: dir.join("model_outputs.csv"),
            readers: dir.join("readers.csv"),
        }
    }
}

/// Load and validate a study from its four CSV files.
pub fn load_study(cases: &Path, assessments: &Path, model_outputs: &Path, readers: &Path) -> Result<StudyLog, StudyError> {
    let log = StudyLog {
        cases: read_cases(cases)?,
        readers: read_readers(readers)?,
        model_outputs: Vec::new(),
        assessments: Vec::new(),
        seed: 0,
        crossover_order: CrossoverOrder::Unspecified,
    };
    finish_load(log, assessments, Some(model_outputs), ValidationOptions::default())
}

/// Load a study directory. A missing `model_outputs.csv` is tolerated (the
/// returned log then has no model outputs); `study.json`, when present,
/// supplies the seed and crossover metadata.
pub fn load_study_dir(dir: &Path) -> Result<StudyLog, StudyError> {
    let paths = StudyPaths::in_dir(dir);
    let mut log = StudyLog {
        cases: read_cases(&paths.cases)?,
        readers: read_readers(&paths.readers)?,
        ..StudyLog::default()
    };
    let meta_path = dir.join(STUDY_META_FILE);
    if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
        let meta: StudyMeta = serde_json::from_str(&text).map_err(|e| StudyError::MalformedRow {
            file: meta_path.display().to_string(),
            line: e.line() as u64,
            column: format!("col {}", e.column()),
            message: e.to_string(),
        })?;
        log.seed = meta.seed;
        log.crossover_order = meta.crossover_order;
    }
    let outputs = paths.model_outputs.exists().then_some(paths.model_outputs.as_path());
    let opts = ValidationOptions { require_model_outputs: outputs.is_some() };
    finish_load(log, &paths.assessments, outputs, opts)
}

fn finish_load(
    mut log: StudyLog,
    assessments: &Path,
    model_outputs: Option<&Path>,
    opts: ValidationOptions,
) -> Result<StudyLog, StudyError> {
    let case_ids: BTreeSet<String> = log.cases.iter().map(|c| c.case_id.clone()).collect();
    let reader_kinds: BTreeMap<String, ReaderKind> =
        log.readers.iter().map(|r| (r.reader_id.clone(), r.kind)).collect();
    if let Some(p) = model_outputs {
        log.model_outputs = read_model_outputs(p, &case_ids)?;
    }
    log.assessments = read_assessments(assessments, &case_ids, &reader_kinds)?;
    log.validate(opts)?;
    Ok(log)
}

/// Write the four CSVs plus `study.json` into `dir` (created if needed).
/// `model_outputs.csv` is omitted when the log has no model outputs.
pub fn write_study(log: &StudyLog, dir: &Path) -> Result<(), StudyError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let paths = StudyPaths::in_dir(dir);

    write_csv(&paths.cases, &CASES_HEADER, log.cases.iter().map(|c| {
        vec![
            c.case_id.clone(),
            c.site.to_string(),
            c.pathology.to_string(),
            bool_text(c.ground_truth),
            opt_num(c.lesion_volume_cm3),
            opt_num(c.age_years),
            c.sex.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }))?;
    write_csv(&paths.readers, &READERS_HEADER, log.readers.iter().map(|r| {
        vec![r.reader_id.clone(), r.kind.to_string(), opt_num(r.years_experience)]
    }))?;
    if !log.model_outputs.is_empty() {
        write_csv(&paths.model_outputs, &MODEL_OUTPUTS_HEADER, log.model_outputs.iter().map(|m| {
            vec![m.case_id.clone(), m.p_model.to_string(), opt_num(m.dice_vs_truth)]
        }))?;
    }
    write_csv(&paths.assessments, &ASSESSMENTS_HEADER, log.assessments.iter().map(|a| {
        vec![
            a.reader_id.clone(),
            a.case_id.clone(),
            a.arm.to_string(),
            bool_text(a.prediction),
            a.confidence.to_string(),
            opt_num(a.image_quality),
            a.response_time_s.to_string(),
        ]
    }))?;

    let meta = StudyMeta { seed: log.seed, crossover_order: log.crossover_order };
    let meta_path = dir.join(STUDY_META_FILE);
    let mut f = File::create(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    writeln!(f, "{text}").map_err(|e| io_err(&meta_path, e))?;
    Ok(())
}

fn bool_text(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_err(path: &Path, source: std::io::Error) -> StudyError {
    StudyError::Io { path: path.display().to_string(), source }
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), StudyError>
where
    I: Iterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_io_err(path, e))?;
    w.write_record(header).map_err(|e| csv_io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn csv_io_err(path: &Path, e: csv::Error) -> StudyError {
    StudyError::Io { path: path.display().to_string(), source: std::io::Error::other(e.to_string()) }
}

/// A parsed CSV table: header column index plus records with line numbers.
struct Table {
    file: String,
    columns: BTreeMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Table, StudyError> {
        let file = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_io_err(path, e))?;
        let headers = rdr
            .headers()
            .map_err(|e| StudyError::MalformedRow { file: file.clone(), line: 1, column: String::new(), message: e.to_string() })?
            .clone();
        let columns: BTreeMap<String, usize> =
            headers.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
        for &col in required {
            if !columns.contains_key(col) {
                return Err(StudyError::MalformedRow {
                    file,
                    line: 1,
                    column: col.into(),
                    message: "required column missing from header".into(),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                StudyError::MalformedRow { file: file.clone(), line, column: String::new(), message: e.to_string() }
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table { file, columns, rows })
    }

    fn raw<'r>(&self, rec: &'r csv::StringRecord, col: &str) -> &'r str {
        rec.get(self.columns[col]).unwrap_or("").trim()
    }

    fn malformed(&self, line: u64, col: &str, message: impl Into<String>) -> StudyError {
        StudyError::MalformedRow { file: self.file.clone(), line, column: col.into(), message: message.into() }
    }

    fn text(&self, line: u64, rec: &csv::StringRecord, col: &str) -> Result<String, StudyError> {
        let v = self.raw(rec, col);
        if v.is_empty() {
            return Err(self.malformed(line, col, "empty required field"));
        }
        Ok(v.to_string())
    }

    fn parse<T: FromStr>(&self, line: u64, rec: &csv::StringRecord, col: &str) -> Result<T, StudyError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw(rec, col);
        if v.is_empty() {
            return Err(self.malformed(line, col, "empty required field"));
        }
        v.parse::<T>().map_err(|e| self.malformed(line, col, format!("`{v}`: {e}")))
    }

    fn opt<T: FromStr>(&self, line: u64, rec: &csv::StringRecord, col: &str) -> Result<Option<T>, StudyError>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(rec, col).is_empty() {
            Ok(None)
        } else {
            self.parse(line, rec, col).map(Some)
        }
    }

    fn boolean(&self, line: u64, rec: &csv::StringRecord, col: &str) -> Result<bool, StudyError> {
        match self.raw(rec, col) {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.malformed(line, col, format!("`{other}` is not a 0/1 boolean"))),
        }
    }
}

fn read_cases(path: &Path) -> Result<Vec<CaseRecord>, StudyError> {
    let t = Table::read(path, &CASES_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let case = CaseRecord {
            case_id: t.text(line, rec, "case_id")?,
            site: t.parse(line, rec, "site")?,
            pathology: t.parse(line, rec, "pathology")?,
            ground_truth: t.boolean(line, rec, "ground_truth")?,
            lesion_volume_cm3: t.opt(line, rec, "lesion_volume_cm3")?,
            age_years: t.opt(line, rec, "age_years")?,
            sex: t.opt(line, rec, "sex")?,
        };
        if let Some(v) = case.lesion_volume_cm3 {
            check_nonneg(&t.file, Some(line), "lesion_volume_cm3", v)?;
        }
        if let Some(v) = case.age_years {
            check_nonneg(&t.file, Some(line), "age_years", v)?;
        }
        if !seen.insert(case.case_id.clone()) {
            return Err(StudyError::DuplicateKey { file: t.file.clone(), line: Some(line), key: case.case_id });
        }
        out.push(case);
    }
    Ok(out)
}

fn read_readers(path: &Path) -> Result<Vec<ReaderProfile>, StudyError> {
    let t = Table::read(path, &READERS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let r = ReaderProfile {
            reader_id: t.text(line, rec, "reader_id")?,
            kind: t.parse(line, rec, "kind")?,
            years_experience: t.opt(line, rec, "years_experience")?,
        };
        if let Some(y) = r.years_experience {
            check_nonneg(&t.file, Some(line), "years_experience", y)?;
        }
        if !seen.insert(r.reader_id.clone()) {
            return Err(StudyError::DuplicateKey { file: t.file.clone(), line: Some(line), key: r.reader_id });
        }
        out.push(r);
    }
    Ok(out)
}

fn read_model_outputs(path: &Path, case_ids: &BTreeSet<String>) -> Result<Vec<ModelCaseOutput>, StudyError> {
    let t = Table::read(path, &MODEL_OUTPUTS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let m = ModelCaseOutput {
            case_id: t.text(line, rec, "case_id")?,
            p_model: t.parse(line, rec, "p_model")?,
            dice_vs_truth: t.opt(line, rec, "dice_vs_truth")?,
        };
        check_unit(&t.file, Some(line), "p_model", m.p_model)?;
        if let Some(d) = m.dice_vs_truth {
            check_unit(&t.file, Some(line), "dice_vs_truth", d)?;
        }
        if !case_ids.contains(&m.case_id) {
            return Err(StudyError::DanglingReference { file: t.file.clone(), line: Some(line), kind: "case", id: m.case_id });
        }
        if !seen.insert(m.case_id.clone()) {
            return Err(StudyError::DuplicateKey { file: t.file.clone(), line: Some(line), key: m.case_id });
        }
        out.push(m);
    }
    Ok(out)
}

fn read_assessments(
    path: &Path,
    case_ids: &BTreeSet<String>,
    readers: &BTreeMap<String, ReaderKind>,
) -> Result<Vec<Assessment>, StudyError> {
    let t = Table::read(path, &ASSESSMENTS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let a = Assessment {
            reader_id: t.text(line, rec, "reader_id")?,
            case_id: t.text(line, rec, "case_id")?,
            arm: t.parse(line, rec, "arm")?,
            prediction: t.boolean(line, rec, "prediction")?,
            confidence: t.parse(line, rec, "confidence")?,
            image_quality: t.opt(line, rec, "image_quality")?,
            response_time_s: t.parse(line, rec, "response_time_s")?,
        };
        check_likert(&t.file, Some(line), "confidence", a.confidence)?;
        if let Some(q) = a.image_quality {
            check_likert(&t.file, Some(line), "image_quality", q)?;
        }
        check_positive(&t.file, Some(line), "response_time_s", a.response_time_s)?;
        if !readers.contains_key(&a.reader_id) {
            return Err(StudyError::DanglingReference { file: t.file.clone(), line: Some(line), kind: "reader", id: a.reader_id });
        }
        if !case_ids.contains(&a.case_id) {
            return Err(StudyError::DanglingReference { file: t.file.clone(), line: Some(line), kind: "case", id: a.case_id });
        }
        if !seen.insert((a.reader_id.clone(), a.case_id.clone(), a.arm)) {
            return Err(StudyError::DuplicateKey {
                file: t.file.clone(),
                line: Some(line),
                key: format!("{}/{}/{}", a.reader_id, a.case_id, a.arm),
            });
        }
        out.push(a);
    }
    Ok(out)
}
