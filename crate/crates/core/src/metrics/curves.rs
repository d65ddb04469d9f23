use std::io::Write;

use serde::Serialize;

use super::{check_lengths, MetricsError};
use crate::numeric::{cmp_f64, midranks};
use crate::report::opt_finite_or_null;

/// One point of a threshold sweep. The leading anchor point has no threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    #[serde(serialize_with = "opt_finite_or_null")]
    pub threshold: Option<f64>,
    pub x: f64,
    pub y: f64,
}

/// A swept curve plus its scalar area (AUROC or average precision).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoints {
    pub points: Vec<CurvePoint>,
    pub area: f64,
}

/// Distinct-score groups in descending score order: (score, positives, negatives).
fn descending_groups(scores: &[f64], truths: &[bool]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp_f64(&scores[b], &scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let (pos, neg) = if truths[i] { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += pos;
                g.2 += neg;
            }
            _ => groups.push((scores[i], pos, neg)),
        }
    }
    groups
}

/// AUROC by the Mann–Whitney rank formulation; tied pairs count ½.
pub fn auroc_rank(scores: &[f64], truths: &[bool]) -> Result<f64, MetricsError> {
    check_lengths(scores.len(), truths.len())?;
    let n_pos = truths.iter().filter(|&&t| t).count();
    let n_neg = truths.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::OneClassOnly);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(truths).filter(|(_, &t)| t).map(|(r, _)| r).sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC curve (x = FPR, y = TPR) by descending-threshold sweep. The area is
/// the rank-based AUROC.
pub fn roc(scores: &[f64], truths: &[bool]) -> Result<CurvePoints, MetricsError> {
    let area = auroc_rank(scores, truths)?;
    let n_pos = truths.iter().filter(|&&t| t).count() as f64;
    let n_neg = truths.len() as f64 - n_pos;
    let mut points = vec![CurvePoint { threshold: None, x: 0.0, y: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (score, pos, neg) in descending_groups(scores, truths) {
        tp += pos;
        fp += neg;
        points.push(CurvePoint { threshold: Some(score), x: fp as f64 / n_neg, y: tp as f64 / n_pos });
    }
    Ok(CurvePoints { points, area })
}

/// Trapezoidal area under a curve's (x, y) points.
pub fn trapezoid_area(points: &[CurvePoint]) -> f64 {
    points.windows(2).map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) / 2.0).sum()
}

/// Precision–recall curve (x = recall, y = precision). The area is average
/// precision: Σ precision · Δrecall over descending thresholds.
pub fn prc(scores: &[f64], truths: &[bool]) -> Result<CurvePoints, MetricsError> {
    check_lengths(scores.len(), truths.len())?;
    let n_pos = truths.iter().filter(|&&t| t).count();
    if n_pos == 0 {
        return Err(MetricsError::NoPositives);
    }
    let n_pos = n_pos as f64;
    let mut points = vec![CurvePoint { threshold: None, x: 0.0, y: 1.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for (score, pos, neg) in descending_groups(scores, truths) {
        tp += pos;
        fp += neg;
        let recall = tp as f64 / n_pos;
        let precision = tp as f64 / (tp + fp) as f64;
        area += precision * (recall - prev_recall);
        prev_recall = recall;
        points.push(CurvePoint { threshold: Some(score), x: recall, y: precision });
    }
    Ok(CurvePoints { points, area })
}

/// Write a curve as CSV with header `threshold,x,y`; the anchor point has an
/// empty threshold field.
pub fn write_curve_csv<W: Write>(curve: &CurvePoints, mut out: W) -> std::io::Result<()> {
    writeln!(out, "threshold,x,y")?;
    for p in &curve.points {
        let t = p.threshold.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{t},{},{}", p.x, p.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_separation() {
        let s = [0.9, 0.8, 0.3, 0.1];
        let t = [true, true, false, false];
        assert_eq!(roc(&s, &t).unwrap().area, 1.0);
        assert_eq!(prc(&s, &t).unwrap().area, 1.0);
    }

    #[test]
    fn all_ties() {
        let s = [0.5; 5];
        let t = [true, false, false, true, false];
        assert_eq!(roc(&s, &t).unwrap().area, 0.5);
        assert!((prc(&s, &t).unwrap().area - 0.4).abs() < 1e-15);
    }

    #[test]
    fn four_case_example() {
        let s = [0.9, 0.7, 0.4, 0.2];
        let t = [true, false, true, false];
        assert_eq!(roc(&s, &t).unwrap().area, 0.75);
        let ap = prc(&s, &t).unwrap().area;
        assert!((ap - (0.5 + 2.0 / 3.0 * 0.5)).abs() < 1e-15);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn errors() {
        assert_eq!(roc(&[0.1, 0.2], &[true, true]), Err(MetricsError::OneClassOnly));
        assert_eq!(prc(&[0.1, 0.2], &[false, false]), Err(MetricsError::NoPositives));
    }

    #[test]
    fn csv_layout() {
        let c = roc(&[0.9, 0.1], &[true, false]).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&c, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "threshold,x,y\n,0,0\n0.9,0,1\n0.1,1,1\n");
    }

    fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (prop::collection::vec(0.0f64..1.0, n), prop::collection::vec(any::<bool>(), n))
        })
        .prop_filter("both classes", |(_, t)| t.iter().any(|&x| x) && t.iter().any(|&x| !x))
    }

    proptest! {
        #[test]
        fn rank_area_equals_trapezoid((s, t) in labelled()) {
            let c = roc(&s, &t).unwrap();
            prop_assert!((c.area - trapezoid_area(&c.points)).abs() < 1e-12);
            prop_assert!(c.points.windows(2).all(|w| w[0].x <= w[1].x));
            prop_assert!((0.0..=1.0).contains(&c.area));
        }

        #[test]
        fn auroc_invariant_under_monotone_transform((s, t) in labelled()) {
            let a = auroc_rank(&s, &t).unwrap();
            let transformed: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
            prop_assert_eq!(a, auroc_rank(&transformed, &t).unwrap());
        }
    }
}
