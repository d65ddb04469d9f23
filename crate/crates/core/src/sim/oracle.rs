//! Direct-enumeration reference implementations for small fixtures.
//!
//! Nothing here calls into the metrics, metacognition or numeric modules.

use serde::Serialize;

use super::SimError;

pub const DEFAULT_ORACLE_MAX_N: usize = 20;

/// A small labelled fixture: one rater's calls, scores and confidences plus a
/// second rater for agreement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleFixture {
    pub truth: Vec<bool>,
    pub prediction: Vec<bool>,
    pub other_rater: Vec<bool>,
    pub score: Vec<f64>,
    pub confidence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleBundle {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub kappa: Option<f64>,
    pub auroc: Option<f64>,
    pub average_precision: Option<f64>,
    pub calibration_difference: Option<f64>,
    pub confidence_bias: Option<f64>,
    pub self_awareness: Option<f64>,
}

fn frac(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn avg(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    // Insertion sort keeps this independent of the library sort helpers.
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Recompute every metric on `fixture` by enumeration. Fails when the fixture
/// has more than `max_n` cases.
pub fn brute_force_oracles(fixture: &OracleFixture, max_n: usize) -> Result<OracleBundle, SimError> {
    let n = fixture.truth.len();
    if n > max_n {
        return Err(SimError::TooLarge { n, max: max_n });
    }
    let lens = [fixture.prediction.len(), fixture.other_rater.len(), fixture.score.len(), fixture.confidence.len()];
    if lens.iter().any(|&l| l != n) {
        return Err(SimError::InvalidSpec("fixture vectors differ in length".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        match (fixture.prediction[i], fixture.truth[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let sensitivity = frac(tp, tp + fn_);
    let specificity = frac(tn, tn + fp);

    // Agreement between the rater and the second rater.
    let kappa = (n > 0).then(|| {
        let nf = n as f64;
        let agree = (0..n).filter(|&i| fixture.prediction[i] == fixture.other_rater[i]).count() as f64 / nf;
        let pa = fixture.prediction.iter().filter(|&&p| p).count() as f64 / nf;
        let pb = fixture.other_rater.iter().filter(|&&p| p).count() as f64 / nf;
        let chance = pa * pb + (1.0 - pa) * (1.0 - pb);
        if chance == 1.0 { 1.0 } else { (agree - chance) / (1.0 - chance) }
    });

    // AUROC over every positive-negative pair.
    let pos: Vec<f64> = (0..n).filter(|&i| fixture.truth[i]).map(|i| fixture.score[i]).collect();
    let neg: Vec<f64> = (0..n).filter(|&i| !fixture.truth[i]).map(|i| fixture.score[i]).collect();
    let auroc = (!pos.is_empty() && !neg.is_empty()).then(|| {
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        wins / (pos.len() * neg.len()) as f64
    });

    // Average precision: step through each distinct score from the top.
    let average_precision = (!pos.is_empty()).then(|| {
        let mut thresholds: Vec<f64> = Vec::new();
        for &s in &fixture.score {
            if !thresholds.contains(&s) {
                thresholds.push(s);
            }
        }
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for t in thresholds {
            let called: Vec<usize> = (0..n).filter(|&i| fixture.score[i] >= t).collect();
            let hits = called.iter().filter(|&&i| fixture.truth[i]).count() as f64;
            let recall = hits / pos.len() as f64;
            ap += hits / called.len() as f64 * (recall - prev_recall);
            prev_recall = recall;
        }
        ap
    });

    let correct: Vec<bool> = (0..n).map(|i| fixture.prediction[i] == fixture.truth[i]).collect();
    let conf = &fixture.confidence;

    let calibration_difference = (n >= 4).then(|| {
        if conf.iter().all(|&c| c == conf[0]) {
            return Some(0.0);
        }
        let (p25, p75) = (percentile(conf, 0.25), percentile(conf, 0.75));
        let rate = |keep: &dyn Fn(f64) -> bool| {
            let idx: Vec<usize> = (0..n).filter(|&i| keep(conf[i])).collect();
            frac(idx.iter().filter(|&&i| correct[i]).count() as u64, idx.len() as u64)
        };
        Some(rate(&|c| c >= p75)? - rate(&|c| c <= p25)?)
    });

    let right: Vec<f64> = (0..n).filter(|&i| correct[i]).map(|i| conf[i]).collect();
    let wrong: Vec<f64> = (0..n).filter(|&i| !correct[i]).map(|i| conf[i]).collect();
    let confidence_bias = avg(&right).zip(avg(&wrong)).map(|(a, b)| a - b);

    let indicator: Vec<f64> = correct.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    let self_awareness = if n >= 2 { pearson(conf, &indicator) } else { None };

    Ok(OracleBundle {
        tp,
        fp,
        tn,
        fn_,
        sensitivity,
        specificity,
        precision: frac(tp, tp + fp),
        f1: frac(2 * tp, 2 * tp + fp + fn_),
        accuracy: frac(tp + tn, n as u64),
        balanced_accuracy: sensitivity.zip(specificity).map(|(a, b)| (a + b) / 2.0),
        kappa,
        auroc,
        average_precision,
        calibration_difference: calibration_difference.flatten(),
        confidence_bias,
        self_awareness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_large_fixtures() {
        let f = OracleFixture {
            truth: vec![true; 21],
            prediction: vec![true; 21],
            other_rater: vec![true; 21],
            score: vec![0.5; 21],
            confidence: vec![5.0; 21],
        };
        assert!(matches!(brute_force_oracles(&f, 20), Err(SimError::TooLarge { n: 21, max: 20 })));
    }

    #[test]
    fn hand_counted_fixture() {
        let f = OracleFixture {
            truth: vec![true, false, true, false],
            prediction: vec![true, true, false, false],
            other_rater: vec![true, true, false, false],
            score: vec![0.9, 0.7, 0.4, 0.2],
            confidence: vec![9.0, 2.0, 2.0, 9.0],
        };
        let o = brute_force_oracles(&f, 20).unwrap();
        assert_eq!((o.tp, o.fp, o.tn, o.fn_), (1, 1, 1, 1));
        assert_eq!(o.auroc, Some(0.75));
        assert_eq!(o.kappa, Some(1.0));
        assert_eq!(o.calibration_difference, Some(1.0));
    }
}
