use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mann-Whitney AUC: probability that a positive outscores a negative, ties counting one half.
pub fn auc_two_sample(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass);
    }
    if positives.iter().chain(negatives).any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let mut all: Vec<(f64, bool)> =
        positives.iter().map(|&s| (s, true)).chain(negatives.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of mid-ranks of positives, doubled to stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let pos_in_group = all[i..j].iter().filter(|e| e.1).count() as u128;
        // ranks i+1..=j, mid-rank (i+1+j)/2
        twice_rank_sum += pos_in_group * (i as u128 + 1 + j as u128);
        i = j;
    }
    let n1 = positives.len() as u128;
    let n0 = negatives.len() as u128;
    let twice_u = twice_rank_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2 * n1 * n0) as f64)
}

/// ROC AUC of `scores` against binary `labels`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (&s, &y) in scores.iter().zip(labels) {
        if y != 0 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    auc_two_sample(&pos, &neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// R actually used after clamping.
    pub r: usize,
    pub clamped: bool,
}

/// Precision and recall of the top `r` sentences by score, ties broken by earlier index.
///
/// `r` above the sentence count is clamped and flagged. Recall is 0 when the
/// truth set has no positives.
pub fn precision_recall_at_r(scores: &[f64], truth: &[u8], r: usize) -> Result<PrecisionRecall> {
    if scores.len() != truth.len() {
        return Err(Error::InvalidInput(format!("{} scores for {} truth labels", scores.len(), truth.len())));
    }
    if r == 0 {
        return Err(Error::InvalidInput("R must be at least 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::Empty("no sentences to rank"));
    }
    let clamped = r > scores.len();
    let r = r.min(scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let hits = order[..r].iter().filter(|&&i| truth[i] != 0).count();
    let positives = truth.iter().filter(|&&y| y != 0).count();
    Ok(PrecisionRecall {
        precision: hits as f64 / r as f64,
        recall: if positives == 0 { 0.0 } else { hits as f64 / positives as f64 },
        r,
        clamped,
    })
}
