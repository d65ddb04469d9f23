use tandem_core::economics::{agent_performance, experience_fits, support_leverage, PaySchedule};
use tandem_core::sim::{paper_like, simulate, AgentSpec, CohortSpec, StudySpec};
use tandem_core::Arm;

/// Agents whose unassisted accuracy is `acc0 + acc_slope · years` and whose
/// mean confidence is `conf0 + conf_slope · years`; support adds a constant
/// `acc_gain` and `conf_gain` to every agent.
fn linear_cohort(years: &[f64], acc0: f64, acc_slope: f64, acc_gain: f64, conf_gain: f64, cases: usize) -> StudySpec {
    let mut spec = paper_like();
    spec.cohort = CohortSpec::new(2 * cases, 0.5);
    spec.cases_per_reader = cases;
    let template = spec.agents[0].clone();
    spec.agents = years
        .iter()
        .enumerate()
        .map(|(i, &y)| AgentSpec {
            agent_id: format!("A{i:02}"),
            years_experience: y,
            base_sensitivity: acc0 + acc_slope * y,
            base_specificity: acc0 + acc_slope * y,
            assisted_gain_slope: acc_gain / y,
            base_confidence: 3.0 + 0.1 * y,
            confidence_gain_correct: 0.0,
            assisted_confidence_gain: conf_gain,
            confidence_noise_sd: 1.0,
            ..template.clone()
        })
        .collect();
    spec
}

#[test]
fn slope_recovered_within_its_interval() {
    let years: Vec<f64> = (0..11).map(|i| 5.0 + 1.5 * f64::from(i)).collect();
    let spec = linear_cohort(&years, 0.55, 0.01, 0.0, 0.0, 200);
    let covered = (0..100)
        .filter(|&seed| {
            let log = simulate(&spec, seed).unwrap();
            let fits = experience_fits(&agent_performance(&log).unwrap()).unwrap();
            let (lo, hi) = fits.accuracy.beta1_ci;
            lo <= 0.01 && 0.01 <= hi
        })
        .count();
    assert!(covered >= 90, "covered {covered} of 100");
}

#[test]
fn identical_arms_leverage_nothing() {
    let mut log = simulate(&paper_like(), 8).unwrap();
    let unassisted: Vec<_> = log.assessments.iter().filter(|a| a.arm == Arm::Unassisted).cloned().collect();
    log.assessments = unassisted
        .iter()
        .cloned()
        .chain(unassisted.iter().cloned().map(|mut a| {
            a.arm = Arm::Assisted;
            a
        }))
        .collect();
    let fits = experience_fits(&agent_performance(&log).unwrap()).unwrap();
    let schedule = PaySchedule::flat("GBP", 100_000.0);
    let report = support_leverage(&log, &fits, Some(&schedule), None).unwrap();
    assert!(report.agents.iter().all(|a| a.leveraged_years == 0.0 && a.leveraged_value == Some(0.0)));
    assert_eq!(report.leveraged_years.unwrap().median, 0.0);
}

#[test]
fn constant_gain_reads_as_six_years() {
    let years: Vec<f64> = (0..21).map(|i| 1.0 + f64::from(i)).collect();
    // +0.03 accuracy at 0.005 per year and +0.6 confidence at 0.1 per year.
    let spec = linear_cohort(&years, 0.6, 0.005, 0.03, 0.6, 1000);
    let log = simulate(&spec, 17).unwrap();
    let fits = experience_fits(&agent_performance(&log).unwrap()).unwrap();
    let report = support_leverage(&log, &fits, None, None).unwrap();
    let median = report.leveraged_years.unwrap().median;
    assert!((median - 6.0).abs() <= 1.0, "median leverage {median}");
    assert!(report.leveraged_value.is_none());
    assert!(report.value_note.is_some());
}
