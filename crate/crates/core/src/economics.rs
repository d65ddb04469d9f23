//! Experience regressions and their conversion into equivalent experience and
//! salary value.
//!
//! Unassisted accuracy and confidence are regressed on years of experience.
//! A support-induced change in either metric is then read off the fitted line
//! as a number of years, and those years are priced with a pay schedule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{mean, quantile};
use crate::report::{finite_or_null, opt_finite_or_null};
use crate::stats::distributions::{student_t_quantile, student_t_two_sided};
use crate::study_data::{Arm, StudyLog};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EconomicsError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("x has zero variance")]
    ZeroVarianceX,
    #[error("{0} slope is not positive")]
    NonPositiveSlope(&'static str),
    #[error("pay schedule has no bands")]
    EmptySchedule,
    #[error("invalid pay schedule: {0}")]
    InvalidSchedule(String),
    #[error("years must be non-negative, got {0}")]
    NegativeYears(f64),
    #[error("reader `{0}` lacks years of experience or reviews in both arms")]
    IncompleteAgent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub beta0: f64,
    pub beta1: f64,
    pub r2: f64,
    pub p_slope: f64,
    /// `n · ln(RSS / n) + 4`; −∞ (null in JSON) for an exact fit.
    #[serde(serialize_with = "finite_or_null")]
    pub aic: f64,
    pub n: usize,
    /// 95% t interval for the slope.
    pub beta1_ci: (f64, f64),
    pub x_min: f64,
    pub x_max: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.beta0 + self.beta1 * x
    }
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_ols(x: &[f64], y: &[f64]) -> Result<RegressionFit, EconomicsError> {
    if x.len() != y.len() {
        return Err(EconomicsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(EconomicsError::TooFewPoints(n));
    }
    let (xbar, ybar) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(EconomicsError::ZeroVarianceX);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
    let syy: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let beta1 = sxy / sxx;
    let beta0 = ybar - beta1 * xbar;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - beta0 - beta1 * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 0.0 } else { (1.0 - rss / syy).clamp(0.0, 1.0) };
    let df = (n - 2) as f64;
    let se = (rss / df / sxx).sqrt();
    let p_slope = if se > 0.0 {
        student_t_two_sided(beta1 / se, df)
    } else if beta1 == 0.0 {
        1.0
    } else {
        0.0
    };
    let half = student_t_quantile(0.975, df) * se;
    let nf = n as f64;
    Ok(RegressionFit {
        beta0,
        beta1,
        r2,
        p_slope,
        aic: nf * (rss / nf).ln() + 4.0,
        n,
        beta1_ci: (beta1 - half, beta1 + half),
        x_min: x.iter().copied().fold(f64::INFINITY, f64::min),
        x_max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalentExperience {
    pub years: f64,
    pub years_from_accuracy: f64,
    pub years_from_confidence: f64,
    /// Outside the experience range either regression was fitted on.
    pub extrapolated: bool,
}

fn check_slopes(fit_acc: &RegressionFit, fit_conf: &RegressionFit) -> Result<(), EconomicsError> {
    if !(fit_acc.beta1 > 0.0) {
        return Err(EconomicsError::NonPositiveSlope("accuracy"));
    }
    if !(fit_conf.beta1 > 0.0) {
        return Err(EconomicsError::NonPositiveSlope("confidence"));
    }
    Ok(())
}

fn extrapolated(years: f64, fits: [&RegressionFit; 2]) -> bool {
    fits.iter().any(|f| years < f.x_min || years > f.x_max)
}

/// Years at which the fitted lines predict the supported metrics, averaged
/// over accuracy and confidence.
pub fn equivalent_experience(
    fit_acc: &RegressionFit,
    fit_conf: &RegressionFit,
    supported_accuracy: f64,
    supported_confidence: f64,
) -> Result<EquivalentExperience, EconomicsError> {
    check_slopes(fit_acc, fit_conf)?;
    let ya = (supported_accuracy - fit_acc.beta0) / fit_acc.beta1;
    let yc = (supported_confidence - fit_conf.beta0) / fit_conf.beta1;
    let years = (ya + yc) / 2.0;
    Ok(EquivalentExperience {
        years,
        years_from_accuracy: ya,
        years_from_confidence: yc,
        extrapolated: extrapolated(years, [fit_acc, fit_conf]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayBand {
    pub years_from: u32,
    pub annual: f64,
}

/// Annual salary as a step function of years of experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaySchedule {
    pub currency: String,
    pub bands: Vec<PayBand>,
}

impl PaySchedule {
    pub fn flat(currency: &str, annual: f64) -> Self {
        Self { currency: currency.into(), bands: vec![PayBand { years_from: 0, annual }] }
    }

    pub fn from_json(text: &str) -> Result<Self, EconomicsError> {
        let s: Self = serde_json::from_str(text).map_err(|e| EconomicsError::InvalidSchedule(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EconomicsError> {
        let first = self.bands.first().ok_or(EconomicsError::EmptySchedule)?;
        if first.years_from != 0 {
            return Err(EconomicsError::InvalidSchedule("first band must start at year 0".into()));
        }
        if self.bands.windows(2).any(|w| w[1].years_from <= w[0].years_from) {
            return Err(EconomicsError::InvalidSchedule("years_from must be strictly increasing".into()));
        }
        if let Some(b) = self.bands.iter().find(|b| !(b.annual > 0.0 && b.annual.is_finite())) {
            return Err(EconomicsError::InvalidSchedule(format!("salary {} is not positive", b.annual)));
        }
        Ok(())
    }
}

/// Salary earned over the first `years` of a career, pro rata in the final
/// partial year.
pub fn cumulative_value(years: f64, schedule: &PaySchedule) -> Result<f64, EconomicsError> {
    schedule.validate()?;
    if !(years >= 0.0) {
        return Err(EconomicsError::NegativeYears(years));
    }
    let mut total = 0.0;
    for (i, band) in schedule.bands.iter().enumerate() {
        let start = f64::from(band.years_from);
        if years <= start {
            break;
        }
        let end = schedule.bands.get(i + 1).map_or(f64::INFINITY, |b| f64::from(b.years_from));
        total += (years.min(end) - start) * band.annual;
    }
    Ok(total)
}

/// Per-agent accuracy and mean confidence in each arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentPerformance {
    pub agent_id: String,
    pub years: f64,
    pub unassisted_accuracy: f64,
    pub unassisted_confidence: f64,
    pub assisted_accuracy: f64,
    pub assisted_confidence: f64,
}

/// The model's own accuracy and confidence, alone and with human input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelPerformance {
    pub base_accuracy: f64,
    pub base_confidence: f64,
    pub supported_accuracy: f64,
    pub supported_confidence: f64,
}

fn arm_summary(log: &StudyLog, reader: &str, arm: Arm) -> Option<(f64, f64)> {
    let truth = log.truth_map();
    let a = log.assessments_for(reader, arm);
    if a.is_empty() {
        return None;
    }
    let n = a.len() as f64;
    let acc = a.iter().filter(|x| x.is_correct(truth[x.case_id.as_str()])).count() as f64 / n;
    let conf = a.iter().map(|x| x.confidence).sum::<f64>() / n;
    Some((acc, conf))
}

/// Accuracy and confidence of every human reader, ordered by reader id.
pub fn agent_performance(log: &StudyLog) -> Result<Vec<AgentPerformance>, EconomicsError> {
    log.human_readers()
        .into_iter()
        .map(|r| {
            let id = r.reader_id.as_str();
            let incomplete = || EconomicsError::IncompleteAgent(id.to_string());
            let years = r.years_experience.ok_or_else(incomplete)?;
            let (ua, uc) = arm_summary(log, id, Arm::Unassisted).ok_or_else(incomplete)?;
            let (aa, ac) = arm_summary(log, id, Arm::Assisted).ok_or_else(incomplete)?;
            Ok(AgentPerformance {
                agent_id: id.to_string(),
                years,
                unassisted_accuracy: ua,
                unassisted_confidence: uc,
                assisted_accuracy: aa,
                assisted_confidence: ac,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperienceFits {
    pub accuracy: RegressionFit,
    pub confidence: RegressionFit,
}

/// Regress unassisted accuracy and confidence on years of experience.
pub fn experience_fits(agents: &[AgentPerformance]) -> Result<ExperienceFits, EconomicsError> {
    let years: Vec<f64> = agents.iter().map(|a| a.years).collect();
    let acc: Vec<f64> = agents.iter().map(|a| a.unassisted_accuracy).collect();
    let conf: Vec<f64> = agents.iter().map(|a| a.unassisted_confidence).collect();
    Ok(ExperienceFits { accuracy: fit_ols(&years, &acc)?, confidence: fit_ols(&years, &conf)? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentValue {
    pub agent_id: String,
    pub actual_years: f64,
    pub equivalent_years_with_support: f64,
    pub leveraged_years: f64,
    pub extrapolated: bool,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub cumulative_value: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub leveraged_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| Self {
            median: quantile(values, 0.5),
            q25: quantile(values, 0.25),
            q75: quantile(values, 0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelValue {
    pub base: EquivalentExperience,
    pub supported: EquivalentExperience,
    pub leveraged_years: f64,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub base_value: Option<f64>,
    #[serde(serialize_with = "opt_finite_or_null")]
    pub supported_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport {
    pub fits: ExperienceFits,
    pub agents: Vec<AgentValue>,
    pub leveraged_years: Option<Spread>,
    pub leveraged_value: Option<Spread>,
    pub cumulative_value: Option<Spread>,
    pub model: Option<ModelValue>,
    pub currency: Option<String>,
    /// Set when monetary fields are null.
    pub value_note: Option<String>,
}

fn value_at(years: f64, schedule: Option<&PaySchedule>) -> Result<Option<f64>, EconomicsError> {
    schedule.map(|s| cumulative_value(years.max(0.0), s)).transpose()
}

/// Leverage per agent: each agent's within-agent change in accuracy and
/// confidence converted to years through the fitted slopes and averaged, so
/// identical arms give zero leverage. The model is placed on the human lines
/// by absolute inversion, alone and with human input.
pub fn support_leverage(
    log: &StudyLog,
    fits: &ExperienceFits,
    schedule: Option<&PaySchedule>,
    model: Option<&ModelPerformance>,
) -> Result<ValueReport, EconomicsError> {
    check_slopes(&fits.accuracy, &fits.confidence)?;
    if let Some(s) = schedule {
        s.validate()?;
    }
    let agents = agent_performance(log)?;
    let values: Vec<AgentValue> = agents
        .iter()
        .map(|a| {
            let gain = ((a.assisted_accuracy - a.unassisted_accuracy) / fits.accuracy.beta1
                + (a.assisted_confidence - a.unassisted_confidence) / fits.confidence.beta1)
                / 2.0;
            let equivalent = a.years + gain;
            let base = value_at(a.years, schedule)?;
            let supported = value_at(equivalent, schedule)?;
            Ok(AgentValue {
                agent_id: a.agent_id.clone(),
                actual_years: a.years,
                equivalent_years_with_support: equivalent,
                leveraged_years: gain,
                extrapolated: extrapolated(equivalent, [&fits.accuracy, &fits.confidence]),
                cumulative_value: base,
                leveraged_value: base.zip(supported).map(|(b, s)| s - b),
            })
        })
        .collect::<Result<_, EconomicsError>>()?;

    let model = model
        .map(|m| -> Result<ModelValue, EconomicsError> {
            let base = equivalent_experience(&fits.accuracy, &fits.confidence, m.base_accuracy, m.base_confidence)?;
            let supported =
                equivalent_experience(&fits.accuracy, &fits.confidence, m.supported_accuracy, m.supported_confidence)?;
            Ok(ModelValue {
                leveraged_years: supported.years - base.years,
                base_value: value_at(base.years, schedule)?,
                supported_value: value_at(supported.years, schedule)?,
                base,
                supported,
            })
        })
        .transpose()?;

    let collect = |f: fn(&AgentValue) -> Option<f64>| Spread::of(&values.iter().filter_map(f).collect::<Vec<_>>());
    Ok(ValueReport {
        fits: *fits,
        leveraged_years: collect(|v| Some(v.leveraged_years)),
        leveraged_value: collect(|v| v.leveraged_value),
        cumulative_value: collect(|v| v.cumulative_value),
        agents: values,
        model,
        currency: schedule.map(|s| s.currency.clone()),
        value_note: schedule.is_none().then(|| "no pay schedule supplied".to_string()),
    })
}
