use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use graphlp::graph::{build_dataset, derive_seed, inject_spurious};
use graphlp::model::save_checkpoint;
use graphlp::training::{train_with_progress, TrainHistory};

use super::eval::{evaluate_with, model_scorer, write_reports};
use super::{create_dir, read_graph, SPURIOUS_STREAM};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::record::{sha256_file, ExperimentRecord, Timings, CODE_VERSION};

#[derive(Clone, Debug)]
pub struct TrainOutputs {
    pub dir: PathBuf,
    pub record: ExperimentRecord,
    pub history: TrainHistory,
}

/// Builds the dataset, trains, evaluates the selected checkpoint and writes
/// `dataset/`, `model.ckpt`, `history.csv`, `metrics.json`,
/// `ranked_missing.csv` and `record.json` under the output directory.
pub fn cmd_train(cfg: &RunConfig) -> CliResult<TrainOutputs> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = cfg.output_dir();
    create_dir(&dir)?;

    let original = read_graph(&cfg.dataset, Some(&dir))?;
    let dataset = build_dataset(&original, &cfg.dataset_spec())?;
    let spurious_test = if cfg.spurious_fraction > 0.0 {
        let r = inject_spurious(
            &dataset.observed,
            &dataset.original,
            cfg.spurious_fraction,
            derive_seed(cfg.seed, SPURIOUS_STREAM, 0),
        )?;
        (!r.added.is_empty()).then_some(r.graph)
    } else {
        None
    };
    dataset.write(dir.join("dataset"), spurious_test.as_ref())?;
    let dataset_secs = start.elapsed().as_secs_f64();
    log::info!(
        "{}: n={} observed={} missing={} train={} val={}",
        cfg.name(),
        dataset.observed.n(),
        dataset.observed.num_edges(),
        dataset.missing.len(),
        dataset.train.len(),
        dataset.val.len()
    );

    let t_train = Instant::now();
    let outcome = train_with_progress(&dataset, &cfg.train_config(), |_, _| {})?;
    let train_secs = t_train.elapsed().as_secs_f64();
    save_checkpoint(&outcome.params, dir.join("model.ckpt"))?;
    outcome.history.write_csv(dir.join("history.csv"))?;

    let t_eval = Instant::now();
    let (scores, metrics) = evaluate_with(&dataset, spurious_test.as_ref(), model_scorer(&outcome.params))?;
    write_reports(&dir, &scores, &dataset, &metrics)?;
    let eval_secs = t_eval.elapsed().as_secs_f64();
    log::info!(
        "best epoch {}: auc {:.4} ap {:.4} precision {:.4}",
        outcome.best_epoch,
        metrics.auc,
        metrics.ap,
        metrics.precision_missing
    );

    let mut checksums = BTreeMap::new();
    checksums.insert(cfg.dataset.display().to_string(), sha256_file(&cfg.dataset)?);
    for rel in ["dataset/observed.edges", "model.ckpt", "history.csv", "metrics.json"] {
        checksums.insert(rel.to_owned(), sha256_file(&dir.join(rel))?);
    }
    let record = ExperimentRecord {
        version: CODE_VERSION.to_owned(),
        config: cfg.clone(),
        checksums,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.history.records.len(),
        metrics,
        timings: Timings {
            dataset_secs,
            train_secs,
            eval_secs,
            total_secs: start.elapsed().as_secs_f64(),
        },
    };
    record.save(&dir.join("record.json"))?;
    Ok(TrainOutputs {
        dir,
        record,
        history: outcome.history,
    })
}
