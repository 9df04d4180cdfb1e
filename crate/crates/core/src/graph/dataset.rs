use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sample::{derive_seed, perturb, perturb_avoiding, split_observed, PerturbationResult};
use super::{load_edge_list, write_edge_list, Edge, Graph};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

const SPLIT_STREAM: u64 = 0;
const AUGMENT_STREAM: u64 = 1;

/// How a dataset is derived from an original graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub keep_fraction: f64,
    /// Number of augmented graphs.
    pub t: usize,
    pub del_fraction: f64,
    pub add_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            keep_fraction: 0.9,
            t: 100,
            del_fraction: 0.1,
            add_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Observed graph, ground truth and augmented training/validation graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub original: Graph,
    /// Input at test time, and the label of every augmented graph.
    pub observed: Graph,
    pub train: Vec<PerturbationResult>,
    pub val: Vec<PerturbationResult>,
    /// Links of the original graph absent from the observed graph.
    pub missing: BTreeSet<Edge>,
    /// Links of the observed graph absent from the original graph. Empty when
    /// the observed graph is a subsample.
    pub spurious: BTreeSet<Edge>,
    /// Validation edits that could not avoid pairs already edited in training.
    pub val_overlap: usize,
    pub spec: DatasetSpec,
}

/// Number of validation graphs among `t` augmented graphs (10%, at least one).
pub fn validation_count(t: usize) -> usize {
    ((t as f64 * 0.1).round() as usize).clamp(1, t.saturating_sub(1).max(1))
}

/// The observed graph [`build_dataset`] derives from `seed`.
pub fn observed_split(original: &Graph, keep_fraction: f64, seed: u64) -> Result<Graph> {
    split_observed(original, keep_fraction, derive_seed(seed, SPLIT_STREAM, 0))
}

/// Splits `original` into an observed graph, then perturbs the observed graph
/// `t` times. The last 10% of the augmented graphs form the validation set;
/// their deletions and additions are drawn from pairs no training graph has
/// touched, as long as enough such pairs remain.
pub fn build_dataset(original: &Graph, spec: &DatasetSpec) -> Result<Dataset> {
    if spec.t < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 augmented graphs, got {}", spec.t)));
    }
    let observed = observed_split(original, spec.keep_fraction, spec.seed)?;
    let n_val = validation_count(spec.t);
    let n_train = spec.t - n_val;

    let mut train = Vec::with_capacity(n_train);
    let mut touched_del = BTreeSet::new();
    let mut touched_add = BTreeSet::new();
    for i in 0..n_train {
        let r = perturb(
            &observed,
            spec.del_fraction,
            spec.add_fraction,
            derive_seed(spec.seed, AUGMENT_STREAM, i as u64),
        )?;
        touched_del.extend(r.deleted.iter().copied());
        touched_add.extend(r.added.iter().copied());
        train.push(r);
    }
    let mut val = Vec::with_capacity(n_val);
    let mut val_overlap = 0;
    for i in n_train..spec.t {
        let (r, overlap) = perturb_avoiding(
            &observed,
            spec.del_fraction,
            spec.add_fraction,
            &touched_del,
            &touched_add,
            derive_seed(spec.seed, AUGMENT_STREAM, i as u64),
        )?;
        val_overlap += overlap;
        val.push(r);
    }
    if val_overlap > 0 {
        log::warn!("{val_overlap} validation edits overlap training edits (candidate pool exhausted)");
    }

    let missing = original.edges().difference(observed.edges()).copied().collect();
    let spurious = observed.edges().difference(original.edges()).copied().collect();
    Ok(Dataset {
        original: original.clone(),
        observed,
        train,
        val,
        missing,
        spurious,
        val_overlap,
        spec: spec.clone(),
    })
}

/// On-disk description of a dataset. Paths are relative to the manifest's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub original: PathBuf,
    pub observed: PathBuf,
    pub train: Vec<PathBuf>,
    pub val: Vec<PathBuf>,
    pub spec: DatasetSpec,
    pub val_overlap: usize,
    /// Observed graph plus injected fake edges, for spurious-link evaluation.
    #[serde(default)]
    pub spurious_test: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), serde_json::to_string_pretty(self)?.as_bytes())
    }
}

fn rebuild(observed: &Graph, graph: Graph) -> PerturbationResult {
    PerturbationResult {
        deleted: observed.edges().difference(graph.edges()).copied().collect(),
        added: graph.edges().difference(observed.edges()).copied().collect(),
        graph,
    }
}

impl Dataset {
    /// Writes every graph as an edge list under `dir` plus `manifest.json`.
    pub fn write(&self, dir: impl AsRef<Path>, spurious_test: Option<&Graph>) -> Result<DatasetManifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir.join("augmented"))?;
        write_edge_list(&self.original, dir.join("original.edges"))?;
        write_edge_list(&self.observed, dir.join("observed.edges"))?;
        let write_set = |prefix: &str, set: &[PerturbationResult]| -> Result<Vec<PathBuf>> {
            set.iter()
                .enumerate()
                .map(|(i, r)| {
                    let rel = PathBuf::from("augmented").join(format!("{prefix}_{i:03}.edges"));
                    write_edge_list(&r.graph, dir.join(&rel))?;
                    Ok(rel)
                })
                .collect()
        };
        let train = write_set("train", &self.train)?;
        let val = write_set("val", &self.val)?;
        let spurious_test = match spurious_test {
            Some(g) => {
                write_edge_list(g, dir.join("spurious_test.edges"))?;
                Some(PathBuf::from("spurious_test.edges"))
            }
            None => None,
        };
        let manifest = DatasetManifest {
            original: "original.edges".into(),
            observed: "observed.edges".into(),
            train,
            val,
            spec: self.spec.clone(),
            val_overlap: self.val_overlap,
            spurious_test,
        };
        manifest.save(dir.join("manifest.json"))?;
        Ok(manifest)
    }

    /// Loads a dataset written by [`Dataset::write`]. Returns the spurious
    /// test graph too when the manifest lists one.
    pub fn read(manifest_path: impl AsRef<Path>) -> Result<(Self, Option<Graph>)> {
        let manifest_path = manifest_path.as_ref();
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let m = DatasetManifest::load(manifest_path)?;
        let load = |p: &Path| load_edge_list(base.join(p));
        let original = load(&m.original)?;
        let observed = load(&m.observed)?;
        let graphs = |paths: &[PathBuf]| -> Result<Vec<PerturbationResult>> {
            paths.iter().map(|p| Ok(rebuild(&observed, load(p)?))).collect()
        };
        let train = graphs(&m.train)?;
        let val = graphs(&m.val)?;
        let spurious_test = m.spurious_test.as_deref().map(load).transpose()?;
        for g in train.iter().chain(&val).map(|r| &r.graph).chain(&spurious_test).chain([&original]) {
            if g.n() != observed.n() {
                return Err(Error::InvalidGraph("dataset graphs disagree on node count".into()));
            }
        }
        let missing = original.edges().difference(observed.edges()).copied().collect();
        let spurious = observed.edges().difference(original.edges()).copied().collect();
        Ok((
            Self {
                original,
                observed,
                train,
                val,
                missing,
                spurious,
                val_overlap: m.val_overlap,
                spec: m.spec,
            },
            spurious_test,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(k: usize) -> Graph {
        let id = |r: usize, c: usize| r * k + c;
        let mut edges = Vec::new();
        for r in 0..k {
            for c in 0..k {
                if c + 1 < k {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < k {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Graph::new(k * k, edges).unwrap()
    }

    #[test]
    fn ten_graphs_split_nine_one() {
        let spec = DatasetSpec {
            t: 10,
            ..DatasetSpec::default()
        };
        let ds = build_dataset(&grid(8), &spec).unwrap();
        assert_eq!(ds.train.len(), 9);
        assert_eq!(ds.val.len(), 1);
        assert_eq!(validation_count(100), 10);
        assert_eq!(validation_count(2), 1);
    }

    #[test]
    fn deterministic_and_consistent() {
        let g = grid(7);
        let spec = DatasetSpec {
            t: 6,
            seed: 17,
            ..DatasetSpec::default()
        };
        let a = build_dataset(&g, &spec).unwrap();
        assert_eq!(a, build_dataset(&g, &spec).unwrap());
        assert!(a.missing.is_disjoint(a.observed.edges()));
        assert!(a.spurious.is_empty());
        assert_eq!(a.missing.len(), g.num_edges() - a.observed.num_edges());
        for r in a.train.iter().chain(&a.val) {
            assert_eq!(r.graph.n(), g.n());
        }
    }

    #[test]
    fn validation_edits_avoid_training_edits() {
        let spec = DatasetSpec {
            t: 5,
            seed: 3,
            ..DatasetSpec::default()
        };
        let ds = build_dataset(&grid(10), &spec).unwrap();
        assert_eq!(ds.val_overlap, 0);
        let train_del: BTreeSet<_> = ds.train.iter().flat_map(|r| r.deleted.iter().copied()).collect();
        let train_add: BTreeSet<_> = ds.train.iter().flat_map(|r| r.added.iter().copied()).collect();
        for v in &ds.val {
            assert!(v.deleted.is_disjoint(&train_del));
            assert!(v.added.is_disjoint(&train_add));
        }
    }

    #[test]
    fn too_few_graphs() {
        let spec = DatasetSpec {
            t: 1,
            ..DatasetSpec::default()
        };
        assert!(build_dataset(&grid(4), &spec).is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec {
            t: 4,
            seed: 5,
            ..DatasetSpec::default()
        };
        let ds = build_dataset(&grid(6), &spec).unwrap();
        let manifest = ds.write(dir.path(), Some(&ds.original)).unwrap();
        assert_eq!(manifest.train.len(), 3);
        let (back, spurious) = Dataset::read(dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, ds);
        assert_eq!(spurious.unwrap(), ds.original);
    }
}
