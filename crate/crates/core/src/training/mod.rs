//! Adam, the training loop and its per-epoch history.

mod adam;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{deletion_recovery_metrics, edit_recovery_metrics, symmetrize_scores};
use crate::fsutil::atomic_write;
use crate::graph::{derive_seed, Dataset};
use crate::model::{forward, predict, ModelConfig, ModelParams};
use crate::tensor::{GradientMap, Tape, Var};

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

const INIT_STREAM: u64 = 10;
const SHUFFLE_STREAM: u64 = 11;
const DROPOUT_STREAM: u64 = 12;

/// Optimisation and model hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub lambda: f64,
    pub layers: usize,
    pub hidden: usize,
    /// Samples per optimizer step.
    pub batch: usize,
    pub seed: u64,
    /// ReLU after each propagation layer.
    pub relu: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0005,
            weight_decay: 0.0,
            epochs: 200,
            dropout_rate: 0.2,
            lambda: 0.13,
            layers: 3,
            hidden: 64,
            batch: 1,
            seed: 0,
            relu: false,
        }
    }
}

impl TrainConfig {
    /// Defaults for a named dataset; unknown names get the common settings.
    pub fn preset(dataset: &str) -> Self {
        let mut c = Self::default();
        match dataset.to_ascii_lowercase().replace(['.', '-', '_'], "").as_str() {
            "ns" => c.learning_rate = 0.0012,
            "ecoli" | "yeast" => c.epochs = 300,
            "router" => c.dropout_rate = 0.5,
            _ => {}
        }
        c
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            layers: self.layers,
            hidden: self.hidden,
            lambda: self.lambda,
            dropout_rate: self.dropout_rate,
            relu: self.relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch must be at least 1".into()));
        }
        self.model_config().validate()
    }
}

/// Fresh parameters and a zeroed optimizer state for an `n`-node graph.
pub fn init_params(n: usize, config: &TrainConfig) -> Result<(ModelParams, AdamState)> {
    let params = ModelParams::init(n, &config.model_config(), derive_seed(config.seed, INIT_STREAM, 0))?;
    let state = AdamState::new(&params);
    Ok((params, state))
}

/// Mean binary cross-entropy of `scores` against `labels`.
pub fn bce_loss(tape: &mut Tape, scores: Var, labels: &crate::tensor::DenseMatrix) -> Result<Var> {
    tape.bce(scores, labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Deleted edges ranked against pairs absent from both the validation
    /// graph and the observed graph.
    pub val_auc: f64,
    pub val_ap: f64,
    /// Deleted edges ranked against added edges.
    pub val_edit_auc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_auc,val_ap,val_edit_auc\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.train_loss, r.val_loss, r.val_auc, r.val_ap, r.val_edit_auc
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), self.to_csv().as_bytes())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the best validation AUC.
    pub params: ModelParams,
    pub history: TrainHistory,
    /// 1-based.
    pub best_epoch: usize,
}

/// Validation metrics averaged over the validation graphs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationStats {
    pub loss: f64,
    pub auc: f64,
    pub ap: f64,
    pub edit_auc: f64,
}

pub fn validate(dataset: &Dataset, params: &ModelParams) -> Result<ValidationStats> {
    if dataset.val.is_empty() {
        return Err(Error::InvalidArgument("dataset has no validation graphs".into()));
    }
    let labels = dataset.observed.to_adjacency();
    let mut acc = ValidationStats {
        loss: 0.0,
        auc: 0.0,
        ap: 0.0,
        edit_auc: 0.0,
    };
    for v in &dataset.val {
        let raw = predict(&v.graph.to_adjacency(), params)?;
        acc.loss += crate::tensor::bce_value(&raw, &labels);
        let scores = symmetrize_scores(&raw)?;
        let (auc, ap) = deletion_recovery_metrics(&scores, &v.graph, &dataset.observed, &v.deleted)?;
        acc.auc += auc;
        acc.ap += ap;
        acc.edit_auc += edit_recovery_metrics(&scores, &v.deleted, &v.added)?.0;
    }
    let k = dataset.val.len() as f64;
    Ok(ValidationStats {
        loss: acc.loss / k,
        auc: acc.auc / k,
        ap: acc.ap / k,
        edit_auc: acc.edit_auc / k,
    })
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { .. } | Error::NotPositiveDefinite { .. } | Error::NotSymmetric(_) => {
            Error::Diverged { epoch, loss: f64::NAN }
        }
        other => other,
    }
}

/// Trains on every augmented training graph, labelled with the observed
/// adjacency, and keeps the parameters of the best validation epoch
/// (ties: higher AP, then lower validation loss, then earlier epoch).
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(dataset, config, |_, _| {})
}

pub fn train_with_progress(
    dataset: &Dataset,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord, &ModelParams),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::InvalidArgument("dataset has no training graphs".into()));
    }
    let n = dataset.observed.n();
    let labels = dataset.observed.to_adjacency();
    let (mut params, mut state) = init_params(n, config)?;
    let mut history = TrainHistory::default();
    let mut best: Option<(ModelParams, EpochRecord)> = None;
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();

    for epoch in 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SHUFFLE_STREAM, epoch as u64));
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut pending: Option<GradientMap> = None;
        let mut in_batch = 0usize;
        for (k, &idx) in order.iter().enumerate() {
            let a = dataset.train[idx].graph.to_adjacency();
            let seed = derive_seed(config.seed, DROPOUT_STREAM, (epoch * order.len() + k) as u64);
            let mut tape = Tape::new();
            let out = forward(&mut tape, &a, &params, true, seed).map_err(|e| diverged(epoch, e))?;
            let loss = bce_loss(&mut tape, out.scores, &labels)?;
            let value = tape.value(loss).get(0, 0);
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, loss: value });
            }
            total_loss += value;
            let grads = tape.backward(loss).map_err(|e| diverged(epoch, e))?;
            match &mut pending {
                Some(acc) => acc.accumulate(grads)?,
                None => pending = Some(grads),
            }
            in_batch += 1;
            if in_batch == config.batch || k + 1 == order.len() {
                let mut g = pending.take().unwrap();
                g.scale(1.0 / in_batch as f64);
                adam_step(&mut params, &g, &mut state, config.learning_rate, config.weight_decay)?;
                in_batch = 0;
            }
        }
        let val = validate(dataset, &params).map_err(|e| diverged(epoch, e))?;
        let record = EpochRecord {
            epoch,
            train_loss: total_loss / order.len() as f64,
            val_loss: val.loss,
            val_auc: val.auc,
            val_ap: val.ap,
            val_edit_auc: val.edit_auc,
        };
        if !(record.train_loss.is_finite() && val.loss.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: record.train_loss,
            });
        }
        log::info!(
            "epoch {epoch:>4}  loss {:.6}  val_loss {:.6}  val_auc {:.4}  val_ap {:.4}",
            record.train_loss,
            val.loss,
            val.auc,
            val.ap
        );
        progress(&record, &params);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                (record.val_auc, record.val_ap, -record.val_loss) > (b.val_auc, b.val_ap, -b.val_loss)
            }
        };
        if better {
            best = Some((params.clone(), record.clone()));
        }
        history.records.push(record);
    }
    let (params, record) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch: record.epoch,
    })
}
