//! Reader-study data model, CSV ingestion and crossover design utilities.
//!
//! A [`StudyLog`] binds the case cohort, the readers (humans plus exactly one
//! model), the model's per-case outputs and every human review. Once
//! validated it is never mutated, so it can be shared freely across threads.

mod csv_io;
mod design;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_study, load_study_dir, write_study, StudyPaths, STUDY_META_FILE};
pub use design::{assign_cases, detection_from_dice, overlap_sizes, pairwise_overlap, DICE_DETECTION_THRESHOLD};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed value in column `{column}`: {message}")]
    MalformedRow {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{}dangling reference to unknown {kind} `{id}`", location(.file, .line))]
    DanglingReference {
        file: String,
        line: Option<u64>,
        kind: &'static str,
        id: String,
    },
    #[error("{}duplicate key `{key}`", location(.file, .line))]
    DuplicateKey {
        file: String,
        line: Option<u64>,
        key: String,
    },
    #[error("{}{field} = {value} outside {bounds}", location(.file, .line))]
    RangeViolation {
        file: String,
        line: Option<u64>,
        field: &'static str,
        value: f64,
        bounds: &'static str,
    },
    #[error("study invariant violated: {0}")]
    InvariantViolation(String),
    #[error("case `{0}` has no model output")]
    MissingModelOutput(String),
    #[error("insufficient pool: need {needed} {stratum} cases, have {available}")]
    InsufficientPool {
        stratum: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("per-reader allocation {0} is odd; it must split evenly between classes")]
    OddAllocation(usize),
}

fn location(file: &str, line: &Option<u64>) -> String {
    match line {
        Some(l) => format!("{file}:{l}: "),
        None if file.is_empty() => String::new(),
        None => format!("{file}: "),
    }
}

macro_rules! text_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

text_enum!(Site {
    Uk => "UK",
    Usa => "USA",
    Nl => "NL",
    Ssa => "SSA",
    Synth => "SYNTH",
});

text_enum!(Pathology {
    PresurgicalGlioma => "presurgical_glioma",
    PostopGlioma => "postop_glioma",
    Meningioma => "meningioma",
    Metastasis => "metastasis",
    PaediatricGlioma => "paediatric_glioma",
    Synthetic => "synthetic",
});

text_enum!(Sex { M => "M", F => "F" });

text_enum!(ReaderKind {
    Human => "human",
    Model => "model",
});

text_enum!(
    /// Study condition: without or with support from the other agent.
    Arm {
        Unassisted => "unassisted",
        Assisted => "assisted",
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub site: Site,
    pub pathology: Pathology,
    /// Enhancing disease present.
    pub ground_truth: bool,
    pub lesion_volume_cm3: Option<f64>,
    pub age_years: Option<f64>,
    pub sex: Option<Sex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderProfile {
    pub reader_id: String,
    pub kind: ReaderKind,
    /// Present iff `kind == Human`.
    pub years_experience: Option<f64>,
}

/// One human review of one case in one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub reader_id: String,
    pub case_id: String,
    pub arm: Arm,
    pub prediction: bool,
    /// Likert confidence in [1, 10].
    pub confidence: f64,
    pub image_quality: Option<f64>,
    pub response_time_s: f64,
}

impl Assessment {
    pub fn is_correct(&self, truth: bool) -> bool {
        self.prediction == truth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCaseOutput {
    pub case_id: String,
    /// Scalar summary of the segmentation probability map, in [0, 1].
    pub p_model: f64,
    pub dice_vs_truth: Option<f64>,
}

/// Crossover ordering metadata. Recorded, never enforced on ingested logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverOrder {
    UnassistedFirst,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyLog {
    pub cases: Vec<CaseRecord>,
    pub readers: Vec<ReaderProfile>,
    pub model_outputs: Vec<ModelCaseOutput>,
    pub assessments: Vec<Assessment>,
    pub seed: u64,
    pub crossover_order: CrossoverOrder,
}

/// Which optional invariants [`StudyLog::validate`] enforces.
#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    /// Every case reviewed by a human must have a model output.
    pub require_model_outputs: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { require_model_outputs: true }
    }
}

pub(crate) fn check_unit(file: &str, line: Option<u64>, field: &'static str, v: f64) -> Result<(), StudyError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(StudyError::RangeViolation { file: file.into(), line, field, value: v, bounds: "[0, 1]" })
    }
}

pub(crate) fn check_likert(file: &str, line: Option<u64>, field: &'static str, v: f64) -> Result<(), StudyError> {
    if (1.0..=10.0).contains(&v) {
        Ok(())
    } else {
        Err(StudyError::RangeViolation { file: file.into(), line, field, value: v, bounds: "[1, 10]" })
    }
}

pub(crate) fn check_nonneg(file: &str, line: Option<u64>, field: &'static str, v: f64) -> Result<(), StudyError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(StudyError::RangeViolation { file: file.into(), line, field, value: v, bounds: "[0, ∞)" })
    }
}

pub(crate) fn check_positive(file: &str, line: Option<u64>, field: &'static str, v: f64) -> Result<(), StudyError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(StudyError::RangeViolation { file: file.into(), line, field, value: v, bounds: "(0, ∞)" })
    }
}

impl StudyLog {
    /// Check every invariant of the data model.
    pub fn validate(&self, opts: ValidationOptions) -> Result<(), StudyError> {
        let mut case_ids = BTreeSet::new();
        for c in &self.cases {
            if !case_ids.insert(c.case_id.as_str()) {
                return Err(StudyError::DuplicateKey { file: "cases".into(), line: None, key: c.case_id.clone() });
            }
            if let Some(v) = c.lesion_volume_cm3 {
                check_nonneg("cases", None, "lesion_volume_cm3", v)?;
            }
            if let Some(v) = c.age_years {
                check_nonneg("cases", None, "age_years", v)?;
            }
        }

        let mut reader_kinds = BTreeMap::new();
        for r in &self.readers {
            if reader_kinds.insert(r.reader_id.as_str(), r.kind).is_some() {
                return Err(StudyError::DuplicateKey { file: "readers".into(), line: None, key: r.reader_id.clone() });
            }
            match (r.kind, r.years_experience) {
                (ReaderKind::Human, Some(y)) => check_nonneg("readers", None, "years_experience", y)?,
                (ReaderKind::Human, None) => {
                    return Err(StudyError::InvariantViolation(format!(
                        "human reader `{}` has no years_experience",
                        r.reader_id
                    )))
                }
                (ReaderKind::Model, Some(_)) => {
                    return Err(StudyError::InvariantViolation(format!(
                        "model reader `{}` must not carry years_experience",
                        r.reader_id
                    )))
                }
                (ReaderKind::Model, None) => {}
            }
        }
        let n_models = self.readers.iter().filter(|r| r.kind == ReaderKind::Model).count();
        if n_models != 1 {
            return Err(StudyError::InvariantViolation(format!(
                "expected exactly one model reader, found {n_models}"
            )));
        }

        let mut output_ids = BTreeSet::new();
        for m in &self.model_outputs {
            if !case_ids.contains(m.case_id.as_str()) {
                return Err(StudyError::DanglingReference {
                    file: "model_outputs".into(),
                    line: None,
                    kind: "case",
                    id: m.case_id.clone(),
                });
            }
            if !output_ids.insert(m.case_id.as_str()) {
                return Err(StudyError::DuplicateKey { file: "model_outputs".into(), line: None, key: m.case_id.clone() });
            }
            check_unit("model_outputs", None, "p_model", m.p_model)?;
            if let Some(d) = m.dice_vs_truth {
                check_unit("model_outputs", None, "dice_vs_truth", d)?;
            }
        }

        let mut keys = BTreeSet::new();
        let mut arm_sets: BTreeMap<(&str, Arm), BTreeSet<&str>> = BTreeMap::new();
        for a in &self.assessments {
            match reader_kinds.get(a.reader_id.as_str()) {
                None => {
                    return Err(StudyError::DanglingReference {
                        file: "assessments".into(),
                        line: None,
                        kind: "reader",
                        id: a.reader_id.clone(),
                    })
                }
                Some(ReaderKind::Model) => {
                    return Err(StudyError::InvariantViolation(format!(
                        "assessment rows are human reviews; `{}` is the model reader",
                        a.reader_id
                    )))
                }
                Some(ReaderKind::Human) => {}
            }
            if !case_ids.contains(a.case_id.as_str()) {
                return Err(StudyError::DanglingReference {
                    file: "assessments".into(),
                    line: None,
                    kind: "case",
                    id: a.case_id.clone(),
                });
            }
            if !keys.insert((a.reader_id.as_str(), a.case_id.as_str(), a.arm)) {
                return Err(StudyError::DuplicateKey {
                    file: "assessments".into(),
                    line: None,
                    key: format!("{}/{}/{}", a.reader_id, a.case_id, a.arm),
                });
            }
            check_likert("assessments", None, "confidence", a.confidence)?;
            if let Some(q) = a.image_quality {
                check_likert("assessments", None, "image_quality", q)?;
            }
            check_positive("assessments", None, "response_time_s", a.response_time_s)?;
            if opts.require_model_outputs && !output_ids.contains(a.case_id.as_str()) {
                return Err(StudyError::MissingModelOutput(a.case_id.clone()));
            }
            arm_sets.entry((a.reader_id.as_str(), a.arm)).or_default().insert(a.case_id.as_str());
        }

        for r in self.readers.iter().filter(|r| r.kind == ReaderKind::Human) {
            let empty = BTreeSet::new();
            let un = arm_sets.get(&(r.reader_id.as_str(), Arm::Unassisted)).unwrap_or(&empty);
            let asx = arm_sets.get(&(r.reader_id.as_str(), Arm::Assisted)).unwrap_or(&empty);
            if un != asx {
                return Err(StudyError::InvariantViolation(format!(
                    "reader `{}` reviewed different case sets across arms ({} vs {})",
                    r.reader_id,
                    un.len(),
                    asx.len()
                )));
            }
        }
        Ok(())
    }

    pub fn case_map(&self) -> BTreeMap<&str, &CaseRecord> {
        self.cases.iter().map(|c| (c.case_id.as_str(), c)).collect()
    }

    pub fn truth_map(&self) -> BTreeMap<&str, bool> {
        self.cases.iter().map(|c| (c.case_id.as_str(), c.ground_truth)).collect()
    }

    pub fn model_output_map(&self) -> BTreeMap<&str, &ModelCaseOutput> {
        self.model_outputs.iter().map(|m| (m.case_id.as_str(), m)).collect()
    }

    pub fn model_reader(&self) -> Option<&ReaderProfile> {
        self.readers.iter().find(|r| r.kind == ReaderKind::Model)
    }

    /// Human readers in id order.
    pub fn human_readers(&self) -> Vec<&ReaderProfile> {
        let mut v: Vec<_> = self.readers.iter().filter(|r| r.kind == ReaderKind::Human).collect();
        v.sort_by(|a, b| a.reader_id.cmp(&b.reader_id));
        v
    }

    /// One reader's assessments in one arm, ordered by case id.
    pub fn assessments_for(&self, reader_id: &str, arm: Arm) -> Vec<&Assessment> {
        let mut v: Vec<_> = self
            .assessments
            .iter()
            .filter(|a| a.reader_id == reader_id && a.arm == arm)
            .collect();
        v.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        v
    }

    /// Case ids reviewed by a reader in either arm.
    pub fn reader_case_set(&self, reader_id: &str) -> BTreeSet<&str> {
        self.assessments
            .iter()
            .filter(|a| a.reader_id == reader_id)
            .map(|a| a.case_id.as_str())
            .collect()
    }
}
