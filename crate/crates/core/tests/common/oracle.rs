//! Scoring written from the metric definitions alone, for cross-checking
//! the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

/// One scored item: an opaque key plus whatever must match exactly.
pub type Item = (String, BTreeSet<String>);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tally {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Largest one-to-one matching of predictions to gold by trying every
/// assignment. Exponential; keep inputs small.
pub fn exhaustive(pred: &[Item], gold: &[Item]) -> Tally {
    fn best(i: usize, pred: &[Item], gold: &[Item], used: &mut Vec<bool>) -> usize {
        if i == pred.len() {
            return 0;
        }
        let mut top = best(i + 1, pred, gold, used);
        for j in 0..gold.len() {
            if !used[j] && pred[i] == gold[j] {
                used[j] = true;
                top = top.max(1 + best(i + 1, pred, gold, used));
                used[j] = false;
            }
        }
        top
    }
    let tp = best(0, pred, gold, &mut vec![false; gold.len()]);
    Tally {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}

/// Quadratic scan: each prediction claims the first equal unclaimed gold
/// item. Same answer as [`exhaustive`] since matching is by equality.
pub fn scan(pred: &[Item], gold: &[Item]) -> Tally {
    let mut claimed = vec![false; gold.len()];
    let mut tp = 0;
    for p in pred {
        if let Some(j) = (0..gold.len()).find(|&j| !claimed[j] && gold[j] == *p) {
            claimed[j] = true;
            tp += 1;
        }
    }
    Tally {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}

/// F1 as 2TP / (2TP + FP + FN).
pub fn f1(t: Tally) -> f64 {
    let den = 2 * t.tp + t.fp + t.fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * t.tp as f64 / den as f64
    }
}

pub fn recall(t: Tally) -> f64 {
    t.tp as f64 / (t.tp + t.fn_) as f64
}
