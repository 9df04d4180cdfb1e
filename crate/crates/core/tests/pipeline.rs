use graphlp::eval::{evaluate_reconstruction, symmetrize_scores, SpuriousCase};
use graphlp::graph::{build_dataset, inject_spurious, Dataset, DatasetSpec, Graph};
use graphlp::model::{load_checkpoint, predict, save_checkpoint};
use graphlp::training::{train, TrainConfig};

/// Eight 5-cliques on a ring: dense local structure with a clear signal.
fn cliques() -> Graph {
    let mut edges = Vec::new();
    for c in 0..8 {
        let base = c * 5;
        for i in 0..5 {
            for j in (i + 1)..5 {
                edges.push((base + i, base + j));
            }
        }
        edges.push((base + 4, (base + 5) % 40));
    }
    Graph::new(40, edges).unwrap()
}

#[test]
fn dataset_train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build_dataset(
        &cliques(),
        &DatasetSpec {
            t: 10,
            seed: 5,
            ..DatasetSpec::default()
        },
    )
    .unwrap();
    let spurious = inject_spurious(&ds.observed, &ds.original, 0.1, 9).unwrap();
    let manifest = ds.write(dir.path(), Some(&spurious.graph)).unwrap();
    assert_eq!(manifest.train.len() + manifest.val.len(), 10);
    let (back, test_graph) = Dataset::read(dir.path().join("manifest.json")).unwrap();
    assert_eq!(back, ds);
    assert_eq!(test_graph.as_ref(), Some(&spurious.graph));

    let cfg = TrainConfig {
        epochs: 40,
        hidden: 16,
        layers: 2,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let out = train(&ds, &cfg).unwrap();
    let ckpt = dir.path().join("model.ckpt");
    save_checkpoint(&out.params, &ckpt).unwrap();
    assert_eq!(load_checkpoint(&ckpt).unwrap(), out.params);

    let scores = symmetrize_scores(&predict(&ds.observed.to_adjacency(), &out.params).unwrap()).unwrap();
    let test_scores = symmetrize_scores(&predict(&spurious.graph.to_adjacency(), &out.params).unwrap()).unwrap();
    let report = evaluate_reconstruction(
        &scores,
        &ds.original,
        &ds.observed,
        Some(SpuriousCase {
            test: &spurious,
            scores: &test_scores,
        }),
    )
    .unwrap();
    // within-clique missing links are easy to recover
    assert!(report.auc > 0.8, "missing-link AUC {}", report.auc);
    assert!(report.auc_spurious.unwrap() > 0.8, "spurious AUC {:?}", report.auc_spurious);
    assert_eq!(report.l_missing, ds.missing.len());
}
