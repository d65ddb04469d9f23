use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};

use super::{CaseRecord, ReaderKind, StudyError, StudyLog};
use crate::rng;

const ASSIGN_STREAM: u64 = 0xA551_6E00;

/// Dice overlap above which a lesion counts as detected (strict).
pub const DICE_DETECTION_THRESHOLD: f64 = 0.3;

/// Allocate `per_reader` cases to each of `n_readers` readers, half with
/// enhancing disease and half without.
///
/// Sampling is without replacement within a reader and independent across
/// readers, so cases can be shared. Reader `r` draws from its own RNG stream,
/// which makes the allocation independent of evaluation order.
pub fn assign_cases(
    pool: &[CaseRecord],
    n_readers: usize,
    per_reader: usize,
    rng_seed: u64,
) -> Result<Vec<Vec<String>>, StudyError> {
    if per_reader % 2 == 1 {
        return Err(StudyError::OddAllocation(per_reader));
    }
    let half = per_reader / 2;
    let positives: Vec<&CaseRecord> = pool.iter().filter(|c| c.ground_truth).collect();
    let negatives: Vec<&CaseRecord> = pool.iter().filter(|c| !c.ground_truth).collect();
    if positives.len() < half {
        return Err(StudyError::InsufficientPool { stratum: "enhancing", needed: half, available: positives.len() });
    }
    if negatives.len() < half {
        return Err(StudyError::InsufficientPool { stratum: "non-enhancing", needed: half, available: negatives.len() });
    }

    Ok((0..n_readers)
        .map(|r| {
            let mut rng = rng::substream(rng_seed, ASSIGN_STREAM, r as u64);
            let mut ids: Vec<String> = index::sample(&mut rng, positives.len(), half)
                .into_iter()
                .map(|i| positives[i].case_id.clone())
                .chain(
                    index::sample(&mut rng, negatives.len(), half)
                        .into_iter()
                        .map(|i| negatives[i].case_id.clone()),
                )
                .collect();
            ids.shuffle(&mut rng);
            ids
        })
        .collect())
}

/// Shared case sets between reader pairs.
///
/// Human pairs map to the intersection of their case sets (keys ordered
/// lexicographically). The model is paired with every human over that
/// human's full set, keyed `(model_id, human_id)`.
pub fn pairwise_overlap(log: &StudyLog) -> BTreeMap<(String, String), BTreeSet<String>> {
    let humans = log.human_readers();
    let sets: Vec<BTreeSet<&str>> = humans.iter().map(|h| log.reader_case_set(&h.reader_id)).collect();
    let mut out = BTreeMap::new();
    for i in 0..humans.len() {
        for j in (i + 1)..humans.len() {
            let shared = sets[i].intersection(&sets[j]).map(|s| s.to_string()).collect();
            out.insert((humans[i].reader_id.clone(), humans[j].reader_id.clone()), shared);
        }
    }
    if let Some(model) = log.readers.iter().find(|r| r.kind == ReaderKind::Model) {
        for (h, set) in humans.iter().zip(&sets) {
            out.insert(
                (model.reader_id.clone(), h.reader_id.clone()),
                set.iter().map(|s| s.to_string()).collect(),
            );
        }
    }
    out
}

/// Sizes of the human–human overlaps only.
pub fn overlap_sizes(log: &StudyLog) -> Vec<usize> {
    let model_id = log.model_reader().map(|m| m.reader_id.clone());
    pairwise_overlap(log)
        .into_iter()
        .filter(|((a, _), _)| Some(a) != model_id.as_ref())
        .map(|(_, s)| s.len())
        .collect()
}

/// Binary detection from a Dice coefficient: true iff `dice > 0.3`.
pub fn detection_from_dice(dice: f64) -> Result<bool, StudyError> {
    if !(0.0..=1.0).contains(&dice) {
        return Err(StudyError::RangeViolation {
            file: String::new(),
            line: None,
            field: "dice",
            value: dice,
            bounds: "[0, 1]",
        });
    }
    Ok(dice > DICE_DETECTION_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study_data::{Pathology, Site};

    fn pool(pos: usize, neg: usize) -> Vec<CaseRecord> {
        (0..pos + neg)
            .map(|i| CaseRecord {
                case_id: format!("C{i:04}"),
                site: Site::Synth,
                pathology: Pathology::Synthetic,
                ground_truth: i < pos,
                lesion_volume_cm3: None,
                age_years: None,
                sex: None,
            })
            .collect()
    }

    #[test]
    fn paper_scale_allocation_is_balanced() {
        let p = pool(555, 554);
        let truth: BTreeMap<_, _> = p.iter().map(|c| (c.case_id.clone(), c.ground_truth)).collect();
        let alloc = assign_cases(&p, 11, 100, 42).unwrap();
        assert_eq!(alloc.len(), 11);
        for list in &alloc {
            assert_eq!(list.len(), 100);
            let unique: BTreeSet<_> = list.iter().collect();
            assert_eq!(unique.len(), 100);
            assert_eq!(list.iter().filter(|id| truth[*id]).count(), 50);
        }
    }

    #[test]
    fn forced_allocation() {
        let p = pool(1, 1);
        let alloc = assign_cases(&p, 1, 2, 9).unwrap();
        let set: BTreeSet<_> = alloc[0].iter().cloned().collect();
        assert_eq!(set, ["C0000".to_string(), "C0001".to_string()].into_iter().collect());
    }

    #[test]
    fn allocation_errors() {
        assert!(matches!(
            assign_cases(&pool(40, 200), 1, 100, 0),
            Err(StudyError::InsufficientPool { stratum: "enhancing", needed: 50, available: 40 })
        ));
        assert!(matches!(assign_cases(&pool(40, 40), 1, 3, 0), Err(StudyError::OddAllocation(3))));
    }

    #[test]
    fn allocation_is_seed_deterministic() {
        let p = pool(300, 300);
        assert_eq!(assign_cases(&p, 5, 40, 3).unwrap(), assign_cases(&p, 5, 40, 3).unwrap());
        assert_ne!(assign_cases(&p, 5, 40, 3).unwrap(), assign_cases(&p, 5, 40, 4).unwrap());
    }

    #[test]
    fn dice_threshold_is_strict() {
        assert!(detection_from_dice(0.31).unwrap());
        assert!(!detection_from_dice(0.3).unwrap());
        assert!(!detection_from_dice(0.0).unwrap());
        assert!(detection_from_dice(1.2).is_err());
        assert!(detection_from_dice(-0.1).is_err());
    }
}
