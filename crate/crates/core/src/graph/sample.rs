use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Edge, Graph};
use crate::error::{Error, Result};

/// Perturbed copy of a source graph and the edits that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerturbationResult {
    pub graph: Graph,
    pub deleted: BTreeSet<Edge>,
    pub added: BTreeSet<Edge>,
}

/// Mixes a base seed with a stream tag and an index (SplitMix64 finalizer),
/// giving independent-looking seeds for related sampling steps.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Partial Fisher–Yates: after the call the first `k` slots of `items` hold a
/// uniform sample without replacement, in draw order.
fn partial_shuffle<T>(items: &mut [T], k: usize, rng: &mut impl Rng) {
    debug_assert!(k <= items.len());
    for i in 0..k {
        let j = rng.gen_range(i..items.len());
        items.swap(i, j);
    }
}

/// Draws `k` items, taking them from `preferred` first and topping up from
/// `fallback` only when `preferred` is too small. Returns the sample and how
/// many came from `fallback`.
fn sample_preferring(
    mut preferred: Vec<Edge>,
    mut fallback: Vec<Edge>,
    k: usize,
    rng: &mut impl Rng,
) -> (BTreeSet<Edge>, usize) {
    if k <= preferred.len() {
        partial_shuffle(&mut preferred, k, rng);
        return (preferred[..k].iter().copied().collect(), 0);
    }
    let extra = k - preferred.len();
    partial_shuffle(&mut fallback, extra, rng);
    let mut out: BTreeSet<Edge> = preferred.into_iter().collect();
    out.extend(fallback[..extra].iter().copied());
    (out, extra)
}

fn fraction_count(fraction: f64, m: usize) -> usize {
    (fraction * m as f64).round() as usize
}

/// Keeps a uniform random sample of `round(keep_fraction · |E|)` edges.
pub fn split_observed(g: &Graph, keep_fraction: f64, seed: u64) -> Result<Graph> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let k = fraction_count(keep_fraction, g.num_edges());
    if k == 0 {
        return Err(Error::InvalidGraph("observed graph would have no edges".into()));
    }
    let mut edges: Vec<Edge> = g.edges().iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    partial_shuffle(&mut edges, k, &mut rng);
    Ok(Graph::from_set(g.n(), edges[..k].iter().copied().collect()))
}

/// Random edge deletion and insertion. Deleted edges are drawn without
/// replacement from the existing edges, added ones from the non-edges; both
/// counts are fractions of the existing edge count.
pub fn perturb(g: &Graph, del_fraction: f64, add_fraction: f64, seed: u64) -> Result<PerturbationResult> {
    perturb_avoiding(g, del_fraction, add_fraction, &BTreeSet::new(), &BTreeSet::new(), seed).map(|(r, _)| r)
}

/// Like [`perturb`], but deletions avoid `avoid_del` and additions avoid
/// `avoid_add` whenever enough other candidates exist. The second return
/// value counts the edits that had to fall back onto avoided pairs.
pub fn perturb_avoiding(
    g: &Graph,
    del_fraction: f64,
    add_fraction: f64,
    avoid_del: &BTreeSet<Edge>,
    avoid_add: &BTreeSet<Edge>,
    seed: u64,
) -> Result<(PerturbationResult, usize)> {
    for (name, f) in [("delete", del_fraction), ("add", add_fraction)] {
        if !(0.0..1.0).contains(&f) && f != 1.0 {
            return Err(Error::InvalidArgument(format!("{name} fraction must be in [0, 1], got {f}")));
        }
    }
    let m = g.num_edges();
    let n_del = fraction_count(del_fraction, m);
    let n_add = fraction_count(add_fraction, m);
    let non_edges = if n_add > 0 { g.non_edges() } else { Vec::new() };
    if n_add > non_edges.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot add {n_add} edges: only {} non-edges available",
            non_edges.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (del_pref, del_fb): (Vec<Edge>, Vec<Edge>) = g.edges().iter().partition(|e| !avoid_del.contains(e));
    let (deleted, overlap_del) = sample_preferring(del_pref, del_fb, n_del, &mut rng);
    let (add_pref, add_fb): (Vec<Edge>, Vec<Edge>) = non_edges.into_iter().partition(|e| !avoid_add.contains(e));
    let (added, overlap_add) = sample_preferring(add_pref, add_fb, n_add, &mut rng);

    let edges: BTreeSet<Edge> = g
        .edges()
        .difference(&deleted)
        .copied()
        .chain(added.iter().copied())
        .collect();
    Ok((
        PerturbationResult {
            graph: Graph::from_set(g.n(), edges),
            deleted,
            added,
        },
        overlap_del + overlap_add,
    ))
}

/// Adds `round(fraction · |E_observed|)` fake edges to `observed`, drawn from
/// pairs that are edges of neither graph, so every injected edge is truly
/// spurious with respect to `original`.
pub fn inject_spurious(observed: &Graph, original: &Graph, fraction: f64, seed: u64) -> Result<PerturbationResult> {
    if observed.n() != original.n() {
        return Err(Error::InvalidArgument("observed and original node counts differ".into()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("spurious fraction must be in [0, 1], got {fraction}")));
    }
    let k = fraction_count(fraction, observed.num_edges());
    let mut candidates: Vec<Edge> = original
        .non_edges()
        .into_iter()
        .filter(|e| !observed.edges().contains(e))
        .collect();
    if k > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot inject {k} spurious edges: only {} candidates",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    partial_shuffle(&mut candidates, k, &mut rng);
    let added: BTreeSet<Edge> = candidates[..k].iter().copied().collect();
    let edges = observed.edges().union(&added).copied().collect();
    Ok(PerturbationResult {
        graph: Graph::from_set(observed.n(), edges),
        deleted: BTreeSet::new(),
        added,
    })
}
