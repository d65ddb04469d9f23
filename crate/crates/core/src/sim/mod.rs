//! Synthetic cohorts and reader studies.
//!
//! Each human agent answers every assigned case twice, once per arm. The
//! unassisted call is correct with probability `base_sensitivity` (enhancing
//! cases) or `base_specificity` (others); in the assisted arm both rise by
//! `assisted_gain_slope · years_experience`. Confidence is
//! `round(clip(base + gain·correct + arm_gain + N(0, sd), 1, 10))` and
//! response times are lognormal, scaled down in the assisted arm. Model
//! probabilities come from one Beta distribution per class.

mod oracle;
mod presets;

use rand::Rng;
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::rng;
use crate::study_data::{
    assign_cases, Arm, Assessment, CaseRecord, CrossoverOrder, ModelCaseOutput, Pathology, ReaderKind, ReaderProfile, Sex, Site,
    StudyError, StudyLog,
};

pub use oracle::{brute_force_oracles, OracleBundle, OracleFixture, DEFAULT_ORACLE_MAX_N};
pub use presets::{noise_humans, paper_like, preset, skilled_humans, PRESET_NAMES};

const COHORT_STREAM: u64 = 0xC0_4087;
const AGENT_STREAM: u64 = 0xA6_E475;
const MODEL_STREAM: u64 = 0x30_DE15;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("fixture has {n} cases; the oracle enumerates at most {max}")]
    TooLarge { n: usize, max: usize },
}

fn invalid<T>(msg: String) -> Result<T, SimError> {
    Err(SimError::InvalidSpec(msg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalSpec {
    /// Parameters giving the requested arithmetic mean.
    pub fn with_mean(mean: f64, sigma: f64) -> Self {
        Self { mu: mean.ln() - sigma * sigma / 2.0, sigma }
    }
}

fn default_base_confidence() -> f64 {
    5.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub agent_id: String,
    pub years_experience: f64,
    pub base_sensitivity: f64,
    pub base_specificity: f64,
    /// Assisted-arm increase in sensitivity and specificity per year.
    pub assisted_gain_slope: f64,
    #[serde(default = "default_base_confidence")]
    pub base_confidence: f64,
    pub confidence_gain_correct: f64,
    /// Additive confidence shift in the assisted arm.
    #[serde(default)]
    pub assisted_confidence_gain: f64,
    pub confidence_noise_sd: f64,
    pub time_lognormal: LogNormalSpec,
    pub assisted_time_scale: f64,
}

impl AgentSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let id = &self.agent_id;
        for (name, p) in [("base_sensitivity", self.base_sensitivity), ("base_specificity", self.base_specificity)] {
            if !(p > 0.0 && p < 1.0) {
                return invalid(format!("{id}: {name} = {p} outside (0, 1)"));
            }
        }
        if !(self.years_experience >= 0.0) {
            return invalid(format!("{id}: years_experience must be non-negative"));
        }
        if !(self.assisted_time_scale > 0.0 && self.assisted_time_scale <= 1.0) {
            return invalid(format!("{id}: assisted_time_scale = {} outside (0, 1]", self.assisted_time_scale));
        }
        if !(self.confidence_noise_sd >= 0.0) || !(self.time_lognormal.sigma >= 0.0) {
            return invalid(format!("{id}: standard deviations must be non-negative"));
        }
        let finite = [
            self.assisted_gain_slope,
            self.base_confidence,
            self.confidence_gain_correct,
            self.assisted_confidence_gain,
            self.time_lognormal.mu,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return invalid(format!("{id}: non-finite parameter"));
        }
        Ok(())
    }

    fn assisted(&self, p: f64) -> f64 {
        (p + self.assisted_gain_slope * self.years_experience).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSpec {
    pub alpha: f64,
    pub beta: f64,
}

/// Model probability of enhancement given each ground-truth class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub positive: BetaSpec,
    pub negative: BetaSpec,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { positive: BetaSpec { alpha: 2.6, beta: 1.0 }, negative: BetaSpec { alpha: 1.0, beta: 2.6 } }
    }
}

impl ModelSpec {
    fn distributions(&self) -> Result<(Beta<f64>, Beta<f64>), SimError> {
        let make = |b: BetaSpec| {
            Beta::new(b.alpha, b.beta).map_err(|e| SimError::InvalidSpec(format!("beta({}, {}): {e}", b.alpha, b.beta)))
        };
        Ok((make(self.positive)?, make(self.negative)?))
    }
}

/// Cohort composition. Weights are relative and need not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub n_cases: usize,
    pub prevalence: f64,
    pub pathology_weights: BTreeMap<Pathology, f64>,
    pub site_weights: BTreeMap<Site, f64>,
    /// Fraction of cases with a recorded age.
    #[serde(default)]
    pub age_available: f64,
    /// Fraction of cases with a recorded sex.
    #[serde(default)]
    pub sex_available: f64,
}

impl CohortSpec {
    pub fn new(n_cases: usize, prevalence: f64) -> Self {
        Self {
            n_cases,
            prevalence,
            pathology_weights: [
                (Pathology::PresurgicalGlioma, 753.0),
                (Pathology::PostopGlioma, 155.0),
                (Pathology::Meningioma, 100.0),
                (Pathology::Metastasis, 70.0),
                (Pathology::PaediatricGlioma, 31.0),
            ]
            .into(),
            site_weights: [(Site::Uk, 397.0), (Site::Usa, 614.0), (Site::Nl, 82.0), (Site::Ssa, 16.0)].into(),
            age_available: 0.471,
            sex_available: 0.517,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_cases < 2 {
            return invalid(format!("n_cases must be at least 2, got {}", self.n_cases));
        }
        if !(0.0..=1.0).contains(&self.prevalence) {
            return invalid(format!("prevalence {} outside [0, 1]", self.prevalence));
        }
        let pathology: Vec<f64> = self.pathology_weights.values().copied().collect();
        let site: Vec<f64> = self.site_weights.values().copied().collect();
        for (what, w) in [("pathology", pathology), ("site", site)] {
            if w.is_empty() || w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || w.iter().sum::<f64>() <= 0.0 {
                return invalid(format!("{what} weights must be non-negative with a positive sum"));
            }
        }
        for (what, f) in [("age_available", self.age_available), ("sex_available", self.sex_available)] {
            if !(0.0..=1.0).contains(&f) {
                return invalid(format!("{what} {f} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Everything `simulate` needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub cohort: CohortSpec,
    pub cases_per_reader: usize,
    pub agents: Vec<AgentSpec>,
    pub model: ModelSpec,
    #[serde(default = "default_model_id")]
    pub model_reader_id: String,
}

fn default_model_id() -> String {
    "MODEL".into()
}

impl StudySpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Split `n` into integer counts proportional to `weights` by largest
/// remainders; earlier keys win ties.
fn quotas<K: Copy>(n: usize, weights: &[(K, f64)]) -> Vec<(K, usize)> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let raw: Vec<f64> = weights.iter().map(|(_, w)| w / total * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    weights.iter().map(|(k, _)| *k).zip(counts).collect()
}

fn shuffled_labels<K: Copy>(n: usize, weights: &BTreeMap<K, f64>, rng: &mut rng::StreamRng) -> Vec<K> {
    let w: Vec<(K, f64)> = weights.iter().map(|(k, v)| (*k, *v)).collect();
    let mut labels: Vec<K> = quotas(n, &w).into_iter().flat_map(|(k, c)| std::iter::repeat_n(k, c)).collect();
    labels.shuffle(rng);
    labels
}

/// Cohort with the default composition.
pub fn generate_cohort(n_cases: usize, prevalence: f64, rng_seed: u64) -> Result<Vec<CaseRecord>, SimError> {
    generate_cohort_with(&CohortSpec::new(n_cases, prevalence), rng_seed)
}

/// Cohort with exact composition quotas: `round(n · prevalence)` enhancing
/// cases and pathology/site counts by largest remainders, shuffled.
pub fn generate_cohort_with(spec: &CohortSpec, rng_seed: u64) -> Result<Vec<CaseRecord>, SimError> {
    spec.validate()?;
    let n = spec.n_cases;
    let mut rng = rng::stream(rng_seed, COHORT_STREAM);
    let n_pos = (n as f64 * spec.prevalence).round() as usize;
    let mut truth: Vec<bool> = (0..n).map(|i| i < n_pos).collect();
    truth.shuffle(&mut rng);
    let pathologies = shuffled_labels(n, &spec.pathology_weights, &mut rng);
    let sites = shuffled_labels(n, &spec.site_weights, &mut rng);
    let age: Normal<f64> = Normal::new(55.2, 16.6).expect("valid normal");
    let volume = LogNormal::new(1.0, 1.0).expect("valid lognormal");
    let width = n.to_string().len().max(4);
    Ok((0..n)
        .map(|i| {
            let ground_truth = truth[i];
            let lesion_volume_cm3 = ground_truth.then(|| round3(volume.sample(&mut rng)));
            let age_years = rng.random_bool(spec.age_available).then(|| age.sample(&mut rng).clamp(18.0, 95.0).round());
            let sex = rng
                .random_bool(spec.sex_available)
                .then(|| if rng.random_bool(300.0 / 573.0) { Sex::M } else { Sex::F });
            CaseRecord {
                case_id: format!("C{:0width$}", i + 1),
                site: sites[i],
                pathology: pathologies[i],
                ground_truth,
                lesion_volume_cm3,
                age_years,
                sex,
            }
        })
        .collect())
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn respond(
    agent: &AgentSpec,
    case: &CaseRecord,
    arm: Arm,
    rng: &mut rng::StreamRng,
    noise: &Normal<f64>,
    time: &LogNormal<f64>,
) -> Assessment {
    let base = if case.ground_truth { agent.base_sensitivity } else { agent.base_specificity };
    let (p_correct, arm_gain, scale) = match arm {
        Arm::Unassisted => (base, 0.0, 1.0),
        Arm::Assisted => (agent.assisted(base), agent.assisted_confidence_gain, agent.assisted_time_scale),
    };
    let correct = rng.random_bool(p_correct);
    let raw = agent.base_confidence
        + if correct { agent.confidence_gain_correct } else { 0.0 }
        + arm_gain
        + noise.sample(rng);
    Assessment {
        reader_id: agent.agent_id.clone(),
        case_id: case.case_id.clone(),
        arm,
        prediction: correct == case.ground_truth,
        confidence: raw.clamp(1.0, 10.0).round(),
        image_quality: None,
        response_time_s: round2(time.sample(rng) * scale).max(0.01),
    }
}

/// Simulate a crossover reader study over `cohort`.
///
/// Agents are processed in parallel, each from its own stream keyed by its
/// id; output is ordered by agent then case id, unassisted before assisted.
pub fn generate_study(
    cohort: &[CaseRecord],
    agents: &[AgentSpec],
    model: &ModelSpec,
    cases_per_reader: usize,
    model_reader_id: &str,
    rng_seed: u64,
) -> Result<StudyLog, SimError> {
    for a in agents {
        a.validate()?;
    }
    let mut ids: Vec<&str> = agents.iter().map(|a| a.agent_id.as_str()).collect();
    ids.push(model_reader_id);
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return invalid("agent ids must be unique and differ from the model id".into());
    }
    let (beta_pos, beta_neg) = model.distributions()?;
    let allocation = assign_cases(cohort, agents.len(), cases_per_reader, rng_seed)?;
    let by_id: BTreeMap<&str, &CaseRecord> = cohort.iter().map(|c| (c.case_id.as_str(), c)).collect();

    let per_agent: Vec<Vec<Assessment>> = agents
        .par_iter()
        .zip(allocation.par_iter())
        .map(|(agent, cases)| -> Result<Vec<Assessment>, SimError> {
            let mut rng = rng::substream(rng_seed, AGENT_STREAM, rng::stable_hash(&agent.agent_id));
            let noise = Normal::new(0.0, agent.confidence_noise_sd).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
            let time = LogNormal::new(agent.time_lognormal.mu, agent.time_lognormal.sigma)
                .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
            let mut sorted: Vec<&str> = cases.iter().map(String::as_str).collect();
            sorted.sort_unstable();
            let mut out = Vec::with_capacity(2 * sorted.len());
            for id in sorted {
                let case = by_id[id];
                out.push(respond(agent, case, Arm::Unassisted, &mut rng, &noise, &time));
                out.push(respond(agent, case, Arm::Assisted, &mut rng, &noise, &time));
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    let mut model_rng = rng::stream(rng_seed, MODEL_STREAM);
    let model_outputs = cohort
        .iter()
        .map(|c| {
            let p = if c.ground_truth { beta_pos.sample(&mut model_rng) } else { beta_neg.sample(&mut model_rng) };
            ModelCaseOutput { case_id: c.case_id.clone(), p_model: p, dice_vs_truth: None }
        })
        .collect();

    let mut readers: Vec<ReaderProfile> = agents
        .iter()
        .map(|a| ReaderProfile {
            reader_id: a.agent_id.clone(),
            kind: ReaderKind::Human,
            years_experience: Some(a.years_experience),
        })
        .collect();
    readers.push(ReaderProfile { reader_id: model_reader_id.to_string(), kind: ReaderKind::Model, years_experience: None });
    readers.sort_by(|a, b| a.reader_id.cmp(&b.reader_id));

    let mut assessments: Vec<Assessment> = per_agent.into_iter().flatten().collect();
    assessments.sort_by(|a, b| (&a.reader_id, a.arm, &a.case_id).cmp(&(&b.reader_id, b.arm, &b.case_id)));

    Ok(StudyLog {
        cases: cohort.to_vec(),
        readers,
        model_outputs,
        assessments,
        seed: rng_seed,
        crossover_order: CrossoverOrder::UnassistedFirst,
    })
}

/// Cohort plus study from one spec and seed.
pub fn simulate(spec: &StudySpec, rng_seed: u64) -> Result<StudyLog, SimError> {
    let cohort = generate_cohort_with(&spec.cohort, rng_seed)?;
    generate_study(&cohort, &spec.agents, &spec.model, spec.cases_per_reader, &spec.model_reader_id, rng_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study_data::ValidationOptions;

    #[test]
    fn quotas_match_reported_composition() {
        let q = quotas(1109, &[('a', 753.0), ('b', 155.0), ('c', 100.0), ('d', 70.0), ('e', 31.0)]);
        assert_eq!(q.iter().map(|x| x.1).collect::<Vec<_>>(), vec![753, 155, 100, 70, 31]);
        let q = quotas(10, &[('a', 1.0), ('b', 1.0), ('c', 1.0)]);
        assert_eq!(q.iter().map(|x| x.1).collect::<Vec<_>>(), vec![4, 3, 3]);
    }

    #[test]
    fn cohort_properties() {
        let c = generate_cohort(1109, 0.5, 3).unwrap();
        assert_eq!(c.len(), 1109);
        let glioma = c.iter().filter(|x| x.pathology == Pathology::PresurgicalGlioma).count();
        assert_eq!(glioma, 753);
        assert_eq!(c.iter().filter(|x| x.ground_truth).count(), 555);
        assert_eq!(c, generate_cohort(1109, 0.5, 3).unwrap());
        assert!(generate_cohort(20, 1.0, 1).unwrap().iter().all(|x| x.ground_truth));
        assert!(generate_cohort(1, 0.5, 1).is_err());
    }

    #[test]
    fn paper_like_study_is_valid() {
        let log = simulate(&paper_like(), 11).unwrap();
        log.validate(ValidationOptions { require_model_outputs: true }).unwrap();
        assert_eq!(log.assessments.len(), 2200);
        assert_eq!(log.human_readers().len(), 11);
    }

    #[test]
    fn sensitivity_converges() {
        let mut spec = skilled_humans();
        spec.cohort = CohortSpec::new(20_000, 0.5);
        spec.cases_per_reader = 20_000;
        spec.agents.truncate(1);
        spec.agents[0].base_sensitivity = 0.73;
        let log = simulate(&spec, 5).unwrap();
        let truth = log.truth_map();
        let id = &spec.agents[0].agent_id;
        let pos: Vec<bool> = log
            .assessments_for(id, Arm::Unassisted)
            .into_iter()
            .filter(|a| truth[a.case_id.as_str()])
            .map(|a| a.prediction)
            .collect();
        let sens = pos.iter().filter(|&&p| p).count() as f64 / pos.len() as f64;
        assert_eq!(pos.len(), 10_000);
        assert!((sens - 0.73).abs() < 0.02, "sensitivity {sens}");
    }
}
