//! Ranking metrics over scored candidates.

use crate::error::{Error, Result};

fn check_finite(scores: &[f64], what: &str) -> Result<()> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} contain a non-finite score")));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from exact integer counts, so the result does
/// not depend on the evaluation order.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidArgument("auc needs at least one positive and one negative".into()));
    }
    check_finite(pos, "positives")?;
    check_finite(neg, "negatives")?;
    let mut sorted = neg.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut greater, mut equal) = (0u128, 0u128);
    for &s in pos {
        let below = sorted.partition_point(|&v| v < s);
        let not_above = sorted.partition_point(|&v| v <= s);
        greater += below as u128;
        equal += (not_above - below) as u128;
    }
    Ok(auc_from_counts(greater, equal, pos.len(), neg.len()))
}

/// `(2·greater + equal) / (2·|pos|·|neg|)`.
pub fn auc_from_counts(greater: u128, equal: u128, p: usize, q: usize) -> f64 {
    (2 * greater + equal) as f64 / (2 * p as u128 * q as u128) as f64
}

/// Indices sorted by descending score; ties in ascending index order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Indices sorted by ascending score; ties in ascending index order.
pub fn rank_ascending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order
}

/// Mean of precision@k over the ranks k of the positives, for items already
/// in rank order.
pub fn average_precision_ranked(labels_in_rank_order: impl IntoIterator<Item = bool>) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0.0);
    for (k, is_pos) in labels_in_rank_order.into_iter().enumerate() {
        if is_pos {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::InvalidArgument("average precision needs at least one positive".into()));
    }
    Ok(total / hits as f64)
}

/// AP over the descending score ranking; ties broken by ascending index.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    check_finite(scores, "scores")?;
    average_precision_ranked(rank_descending(scores).into_iter().map(|i| labels[i]))
}

/// Fraction of the first `l` ranked items that are in the probe set.
pub fn precision_at_l(ranked_in_probe: &[bool], l: usize) -> Result<f64> {
    if l == 0 || l > ranked_in_probe.len() {
        return Err(Error::InvalidArgument(format!(
            "L must be in 1..={}, got {l}",
            ranked_in_probe.len()
        )));
    }
    let hits = ranked_in_probe[..l].iter().filter(|&&b| b).count();
    Ok(hits as f64 / l as f64)
}
