//! Run configuration: a flat JSON document layered over the dataset preset.

use std::path::{Path, PathBuf};

use graphlp::graph::DatasetSpec;
use graphlp::training::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{io_error, CliError, CliResult};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "GRAPHLP_OUTPUT_ROOT";

/// Every knob of one split → augment → train → evaluate run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Edge list of the original graph.
    pub dataset: PathBuf,
    /// Selects the hyperparameter preset; defaults to the file stem.
    pub dataset_name: Option<String>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub keep_fraction: f64,
    pub del_fraction: f64,
    pub add_fraction: f64,
    pub t: usize,
    /// Fake edges injected into the observed graph for spurious-link evaluation.
    pub spurious_fraction: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub lambda: f64,
    pub layers: usize,
    pub hidden: usize,
    pub batch: usize,
    pub relu: bool,
}

impl RunConfig {
    /// Defaults for `dataset`, with the preset picked by `name`.
    pub fn preset(dataset: PathBuf, name: Option<String>) -> Self {
        let key = name.clone().unwrap_or_else(|| stem(&dataset));
        let train = TrainConfig::preset(&key);
        let data = DatasetSpec::default();
        Self {
            dataset,
            dataset_name: name,
            output: None,
            seed: train.seed,
            keep_fraction: data.keep_fraction,
            del_fraction: data.del_fraction,
            add_fraction: data.add_fraction,
            t: data.t,
            spurious_fraction: 0.1,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            epochs: train.epochs,
            dropout_rate: train.dropout_rate,
            lambda: train.lambda,
            layers: train.layers,
            hidden: train.hidden,
            batch: train.batch,
            relu: train.relu,
        }
    }

    /// Merges `overrides` over the JSON document at `file` (if any), then over
    /// the preset the result names. Unknown keys are rejected.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> CliResult<Self> {
        let mut doc = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                match serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))? {
                    Value::Object(map) => map,
                    _ => return Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
                }
            }
            None => Map::new(),
        };
        for (k, v) in overrides {
            doc.insert(k.clone(), v.clone());
        }
        let dataset = match doc.get("dataset") {
            Some(Value::String(s)) => PathBuf::from(s),
            Some(_) => return Err(CliError::Config("'dataset' must be a path string".into())),
            None => return Err(CliError::Config("no dataset given (set 'dataset' or pass --dataset)".into())),
        };
        let name = match doc.get("dataset_name") {
            Some(Value::String(s)) => Some(s.clone()),
            _ => None,
        };
        let Value::Object(mut merged) = serde_json::to_value(Self::preset(dataset, name))? else {
            unreachable!("RunConfig serializes to an object")
        };
        merged.extend(doc);
        let cfg: Self = serde_json::from_value(Value::Object(merged))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !self.dataset.is_file() {
            return Err(CliError::Data(format!("dataset {} does not exist", self.dataset.display())));
        }
        let unit = |name: &str, v: f64, allow_zero: bool| {
            let ok = v.is_finite() && v <= 1.0 && (v > 0.0 || (allow_zero && v == 0.0));
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} must be in {}, got {v}", if allow_zero { "[0, 1]" } else { "(0, 1]" })))
            }
        };
        unit("keep_fraction", self.keep_fraction, false)?;
        unit("del_fraction", self.del_fraction, true)?;
        unit("add_fraction", self.add_fraction, true)?;
        unit("spurious_fraction", self.spurious_fraction, true)?;
        if self.t < 2 {
            return Err(CliError::Config(format!("t must be at least 2, got {}", self.t)));
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            dropout_rate: self.dropout_rate,
            lambda: self.lambda,
            layers: self.layers,
            hidden: self.hidden,
            batch: self.batch,
            seed: self.seed,
            relu: self.relu,
        }
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            keep_fraction: self.keep_fraction,
            t: self.t,
            del_fraction: self.del_fraction,
            add_fraction: self.add_fraction,
            seed: self.seed,
        }
    }

    pub fn name(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| stem(&self.dataset))
    }

    /// `output`, or `<root>/<name>-seed<seed>` under the output root.
    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| {
            let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| "runs".into());
            root.join(format!("{}-seed{}", self.name(), self.seed))
        })
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Parses `key=value`; the value is read as JSON when possible and as a bare
/// string otherwise.
pub fn parse_override(s: &str) -> CliResult<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected key=value, got '{s}'")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned()));
    Ok((k.trim().to_owned(), value))
}
