use std::fs;

use proptest::prelude::*;
use tandem_core::sim::{paper_like, simulate, CohortSpec};
use tandem_core::study_data::{load_study_dir, write_study, ValidationOptions};

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_study(&simulate(&paper_like(), 42).unwrap(), a.path()).unwrap();
    write_study(&simulate(&paper_like(), 42).unwrap(), b.path()).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
    let c = tempfile::tempdir().unwrap();
    write_study(&simulate(&paper_like(), 43).unwrap(), c.path()).unwrap();
    assert_ne!(fa, dir_bytes(c.path()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_logs_round_trip(seed in any::<u64>(), n_agents in 2usize..6, per_reader in 2usize..12, prevalence in 0.3f64..0.7) {
        let mut spec = paper_like();
        spec.cohort = CohortSpec::new(60, prevalence);
        spec.agents.truncate(n_agents);
        spec.cases_per_reader = per_reader * 2;
        let log = simulate(&spec, seed).unwrap();
        log.validate(ValidationOptions { require_model_outputs: true }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_study(&log, dir.path()).unwrap();
        let back = load_study_dir(dir.path()).unwrap();
        prop_assert_eq!(&back, &log);
        let again = tempfile::tempdir().unwrap();
        write_study(&back, again.path()).unwrap();
        prop_assert_eq!(dir_bytes(dir.path()), dir_bytes(again.path()));
    }
}
