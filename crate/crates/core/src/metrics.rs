//! Precision, recall and F1 of a selected feature set against the truth.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn membership(set: &[usize], universe: usize, what: &str) -> Result<Vec<bool>> {
    let mut m = vec![false; universe];
    for &i in set {
        if i >= universe {
            return invalid(format!("{what} feature {i} outside a universe of {universe}"));
        }
        m[i] = true;
    }
    Ok(m)
}

/// Confusion counts of `selected` against `truth`, both indices into `0..universe`
/// (duplicates are ignored).
pub fn confusion(selected: &[usize], truth: &[usize], universe: usize) -> Result<ConfusionCounts> {
    let s = membership(selected, universe, "selected")?;
    let t = membership(truth, universe, "true")?;
    Ok(confusion_masks(&s, &t))
}

/// Confusion counts from two indicator vectors of equal length.
pub fn confusion_masks(selected: &[bool], truth: &[bool]) -> ConfusionCounts {
    assert_eq!(selected.len(), truth.len(), "indicator vectors differ in length");
    let mut c = ConfusionCounts::default();
    for (&s, &t) in selected.iter().zip(truth) {
        match (s, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// Precision is 1 for an empty selection when nothing was missed and 0 otherwise;
/// recall is 1 when there is nothing to find; F1 is 0 when precision and recall are.
pub fn precision_recall_f1(c: &ConfusionCounts) -> Performance {
    let precision = if c.tp + c.fp == 0 {
        if c.fn_ == 0 { 1.0 } else { 0.0 }
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Performance { precision, recall, f1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn basic_cases() {
        let c = confusion(&[1, 2, 3], &[1, 2, 3], 10).unwrap();
        assert_eq!((c.fp, c.fn_, c.tp, c.tn), (0, 0, 3, 7));
        let c = confusion(&[], &(0..10).collect::<Vec<_>>(), 20).unwrap();
        assert_eq!((c.tp, c.fn_), (0, 10));
        assert!(confusion(&[10], &[], 10).is_err());
    }

    #[test]
    fn conventions() {
        let p = precision_recall_f1(&ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 0 });
        assert_abs_diff_eq!(p.f1, 2.0 / 3.0, epsilon = 1e-15);
        let vacuous = precision_recall_f1(&ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 5 });
        assert_eq!((vacuous.precision, vacuous.recall, vacuous.f1), (1.0, 1.0, 1.0));
        let missed = precision_recall_f1(&ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 5 });
        assert_eq!((missed.precision, missed.recall, missed.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn forty_seven_nine_two() {
        let p = precision_recall_f1(&ConfusionCounts { tp: 47, fp: 9, fn_: 2, tn: 0 });
        assert_abs_diff_eq!(p.precision, 47.0 / 56.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.recall, 47.0 / 49.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.f1, 0.895, epsilon = 5e-4);
    }

    fn sets() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
        (1usize..40).prop_flat_map(|u| {
            (prop::collection::vec(0..u, 0..u), prop::collection::vec(0..u, 0..u), Just(u))
        })
    }

    proptest! {
        #[test]
        fn matches_membership_loop((s, t, u) in sets()) {
            let c = confusion(&s, &t, u).unwrap();
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for i in 0..u {
                let (a, b) = (s.contains(&i), t.contains(&i));
                tp += (a && b) as usize;
                fp += (a && !b) as usize;
                fn_ += (!a && b) as usize;
            }
            prop_assert_eq!((c.tp, c.fp, c.fn_, c.tp + c.fp + c.fn_ + c.tn), (tp, fp, fn_, u));
        }

        #[test]
        fn f1_properties((s, t, u) in sets()) {
            let c = confusion(&s, &t, u).unwrap();
            let f = precision_recall_f1(&c).f1;
            prop_assert!((0.0..=1.0).contains(&f));
            if c.tp > 0 {
                prop_assert_eq!(f == 1.0, c.fp == 0 && c.fn_ == 0);
            }
            let swapped = confusion(&t, &s, u).unwrap();
            prop_assert_eq!((swapped.fp, swapped.fn_), (c.fn_, c.fp));
            prop_assert!((precision_recall_f1(&swapped).f1 - f).abs() < 1e-12);
            if let Some(&extra) = t.iter().find(|i| !s.contains(i)) {
                let mut more = s.clone();
                more.push(extra);
                prop_assert!(precision_recall_f1(&confusion(&more, &t, u).unwrap()).f1 >= f - 1e-12);
            }
        }
    }
}
