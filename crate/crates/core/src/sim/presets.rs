use super::{AgentSpec, CohortSpec, LogNormalSpec, ModelSpec, SimError, StudySpec};

pub const PRESET_NAMES: [&str; 3] = ["paper_like", "skilled_humans", "noise_humans"];

fn years(i: usize) -> f64 {
    5.0 + 1.5 * i as f64
}

fn agent(i: usize, skill: impl Fn(f64) -> f64) -> AgentSpec {
    let y = years(i);
    AgentSpec {
        agent_id: format!("R{:02}", i + 1),
        years_experience: y,
        base_sensitivity: skill(y),
        base_specificity: skill(y),
        assisted_gain_slope: 0.0,
        base_confidence: 5.5,
        confidence_gain_correct: 0.0,
        assisted_confidence_gain: 0.0,
        confidence_noise_sd: 1.0,
        time_lognormal: LogNormalSpec::with_mean(45.6, 0.4),
        assisted_time_scale: 1.0,
    }
}

fn study(agents: Vec<AgentSpec>) -> StudySpec {
    StudySpec {
        cohort: CohortSpec::new(1109, 0.5),
        cases_per_reader: 100,
        agents,
        model: ModelSpec::default(),
        model_reader_id: "MODEL".into(),
    }
}

/// Eleven readers with 5–20 years of experience. Unassisted accuracy and
/// confidence rise with experience; support adds accuracy in proportion to
/// experience, raises confidence and shortens reading time.
pub fn paper_like() -> StudySpec {
    study(
        (0..11)
            .map(|i| AgentSpec {
                assisted_gain_slope: 0.004,
                base_confidence: 4.8 + 0.08 * years(i),
                confidence_gain_correct: 0.7,
                assisted_confidence_gain: 0.6,
                confidence_noise_sd: 1.2,
                assisted_time_scale: 30.6 / 45.6,
                ..agent(i, |y| 0.64 + 0.005 * y)
            })
            .collect(),
    )
}

/// Accurate readers whose confidence tracks their correctness closely.
pub fn skilled_humans() -> StudySpec {
    study(
        (0..11)
            .map(|i| AgentSpec {
                assisted_gain_slope: 0.002,
                base_confidence: 4.0,
                confidence_gain_correct: 3.0,
                confidence_noise_sd: 1.0,
                ..agent(i, |y| 0.80 + 0.005 * y)
            })
            .collect(),
    )
}

/// Readers at chance with confidence unrelated to correctness.
pub fn noise_humans() -> StudySpec {
    study(
        (0..11)
            .map(|i| AgentSpec { confidence_noise_sd: 2.0, ..agent(i, |_| 0.5) })
            .collect(),
    )
}

pub fn preset(name: &str) -> Result<StudySpec, SimError> {
    match name {
        "paper_like" => Ok(paper_like()),
        "skilled_humans" => Ok(skilled_humans()),
        "noise_humans" => Ok(noise_humans()),
        other => Err(SimError::InvalidSpec(format!("unknown preset `{other}`; expected one of {PRESET_NAMES:?}"))),
    }
}
