//! Ranking metrics, the missing/spurious reconstruction protocol and the
//! CN / RA / LP heuristics.

mod baselines;
mod metrics;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::graph::{pair_count, pair_index, Edge, Graph, PerturbationResult};
use crate::tensor::DenseMatrix;

pub use baselines::{baseline_scores, BaselineKind, DEFAULT_LP_EPSILON};
pub use metrics::{
    auc, auc_from_counts, average_precision, average_precision_ranked, precision_at_l, rank_ascending,
    rank_descending,
};

/// One score per unordered pair `i < j`, stored in pair-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPairs {
    n: usize,
    scores: Vec<f64>,
}

impl ScoredPairs {
    pub fn new(n: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != pair_count(n) {
            return Err(Error::InvalidArgument(format!(
                "{} scores for {} pairs",
                scores.len(),
                pair_count(n)
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("pair scores must be finite".into()));
        }
        Ok(Self { n, scores })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, e: Edge) -> f64 {
        self.scores[pair_index(self.n, e)]
    }

    /// `((i, j), score)` in pair-index order.
    pub fn iter(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
            .zip(self.scores.iter().copied())
    }
}

/// Averages `s[i][j]` and `s[j][i]` for each pair `i < j`; drops the diagonal.
pub fn symmetrize_scores(s: &DenseMatrix) -> Result<ScoredPairs> {
    if !s.is_square() {
        return Err(Error::ShapeMismatch {
            op: "symmetrize_scores",
            left: s.shape(),
            right: (s.cols(), s.rows()),
        });
    }
    let n = s.rows();
    let mut scores = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in (i + 1)..n {
            scores.push(0.5 * (s.get(i, j) + s.get(j, i)));
        }
    }
    ScoredPairs::new(n, scores)
}

/// Metrics of one reconstruction. The spurious block is present when a
/// spurious test graph was evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub ap: f64,
    pub precision_missing: f64,
    pub l_missing: usize,
    pub auc_spurious: Option<f64>,
    pub ap_spurious: Option<f64>,
    pub precision_spurious: Option<f64>,
    pub l_spurious: Option<usize>,
}

impl MetricsReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Scores of the spurious test graph (observed graph plus injected edges).
#[derive(Clone, Copy, Debug)]
pub struct SpuriousCase<'a> {
    pub test: &'a PerturbationResult,
    pub scores: &'a ScoredPairs,
}

/// AUC, AP and precision@|positives| for a candidate list with 0/1 labels,
/// ranked by descending score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankingMetrics {
    pub auc: f64,
    pub ap: f64,
    pub precision: f64,
    pub l: usize,
}

/// Metrics for candidates given as `(score, is_positive)` in tie-break order.
pub fn ranking_metrics(candidates: &[(f64, bool)]) -> Result<RankingMetrics> {
    let pos: Vec<f64> = candidates.iter().filter(|c| c.1).map(|c| c.0).collect();
    let neg: Vec<f64> = candidates.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let auc = metrics::auc(&pos, &neg)?;
    let scores: Vec<f64> = candidates.iter().map(|c| c.0).collect();
    let in_probe: Vec<bool> = rank_descending(&scores).into_iter().map(|i| candidates[i].1).collect();
    let ap = average_precision_ranked(in_probe.iter().copied())?;
    let precision = precision_at_l(&in_probe, pos.len())?;
    Ok(RankingMetrics {
        auc,
        ap,
        precision,
        l: pos.len(),
    })
}

/// Missing links: candidates are pairs absent from `observed`, positives are
/// those present in `original`. Spurious links: the test graph's edges ranked
/// by ascending score, injected edges being the positives.
pub fn evaluate_reconstruction(
    observed_scores: &ScoredPairs,
    original: &Graph,
    observed: &Graph,
    spurious: Option<SpuriousCase<'_>>,
) -> Result<MetricsReport> {
    let n = observed.n();
    if original.n() != n || observed_scores.n() != n {
        return Err(Error::InvalidArgument("graphs and scores disagree on node count".into()));
    }
    let candidates: Vec<(f64, bool)> = observed_scores
        .iter()
        .filter(|(e, _)| !observed.edges().contains(e))
        .map(|(e, s)| (s, original.edges().contains(&e)))
        .collect();
    if !candidates.iter().any(|c| c.1) {
        return Err(Error::InvalidArgument("no missing links to evaluate".into()));
    }
    let missing = ranking_metrics(&candidates)?;

    let mut report = MetricsReport {
        auc: missing.auc,
        ap: missing.ap,
        precision_missing: missing.precision,
        l_missing: missing.l,
        auc_spurious: None,
        ap_spurious: None,
        precision_spurious: None,
        l_spurious: None,
    };
    if let Some(case) = spurious {
        if case.scores.n() != n || case.test.graph.n() != n {
            return Err(Error::InvalidArgument("spurious test graph disagrees on node count".into()));
        }
        if case.test.added.is_empty() {
            return Err(Error::InvalidArgument("spurious test graph has no injected edges".into()));
        }
        // negated scores turn the ascending ranking into a descending one;
        // edges are in pair order so ties still resolve by pair index
        let edges: Vec<(f64, bool)> = case
            .test
            .graph
            .edges()
            .iter()
            .map(|&e| (-case.scores.score(e), case.test.added.contains(&e)))
            .collect();
        let m = ranking_metrics(&edges)?;
        report.auc_spurious = Some(m.auc);
        report.ap_spurious = Some(m.ap);
        report.precision_spurious = Some(m.precision);
        report.l_spurious = Some(m.l);
    }
    Ok(report)
}

/// AUC and AP of a validation graph: its deleted edges should score high,
/// its added edges low.
pub fn edit_recovery_metrics(scores: &ScoredPairs, deleted: &BTreeSet<Edge>, added: &BTreeSet<Edge>) -> Result<(f64, f64)> {
    let candidates: Vec<(f64, bool)> = deleted
        .iter()
        .map(|&e| (e, true))
        .chain(added.iter().map(|&e| (e, false)))
        .collect::<std::collections::BTreeMap<_, _>>()
        .into_iter()
        .map(|(e, pos)| (scores.score(e), pos))
        .collect();
    let m = ranking_metrics(&candidates)?;
    Ok((m.auc, m.ap))
}

/// Missing-link AUC and AP on a perturbed copy of `reference`: the deleted
/// edges are the positives, pairs absent from both graphs the negatives.
/// Mirrors the test protocol, where only absent pairs are ranked.
pub fn deletion_recovery_metrics(
    scores: &ScoredPairs,
    perturbed: &Graph,
    reference: &Graph,
    deleted: &BTreeSet<Edge>,
) -> Result<(f64, f64)> {
    if perturbed.n() != scores.n() || reference.n() != scores.n() {
        return Err(Error::InvalidArgument("graphs and scores disagree on node count".into()));
    }
    let candidates: Vec<(f64, bool)> = scores
        .iter()
        .filter_map(|(e, s)| {
            if deleted.contains(&e) {
                Some((s, true))
            } else if perturbed.edges().contains(&e) || reference.edges().contains(&e) {
                None
            } else {
                Some((s, false))
            }
        })
        .collect();
    let m = ranking_metrics(&candidates)?;
    Ok((m.auc, m.ap))
}

/// Writes every pair as `i,j,score,rank,in_probe`, sorted by descending score
/// (rank 1 first).
pub fn write_ranked_csv(path: impl AsRef<Path>, scores: &ScoredPairs, probe: &BTreeSet<Edge>) -> Result<()> {
    let pairs: Vec<(Edge, f64)> = scores.iter().collect();
    let order = rank_descending(scores.scores());
    let mut out = String::with_capacity(32 * order.len() + 32);
    out.push_str("i,j,score,rank,in_probe\n");
    for (rank, idx) in order.into_iter().enumerate() {
        let ((i, j), s) = pairs[idx];
        let flag = u8::from(probe.contains(&(i, j)));
        writeln!(out, "{i},{j},{s},{},{flag}", rank + 1).unwrap();
    }
    atomic_write(path.as_ref(), out.as_bytes())
}
