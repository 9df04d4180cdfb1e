use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use graphlp::fsutil::atomic_write;
use rayon::prelude::*;

use super::{cmd_train, create_dir};
use crate::config::RunConfig;
use crate::error::{io_error, CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Lambda,
    Depth,
}

impl FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(Self::Lambda),
            "depth" | "layers" => Ok(Self::Depth),
            other => Err(CliError::Config(format!("unknown sweep parameter '{other}' (expected lambda or depth)"))),
        }
    }
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            Self::Lambda => "lambda",
            Self::Depth => "depth",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) -> CliResult<()> {
        match self {
            Self::Lambda => cfg.lambda = value,
            Self::Depth => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(CliError::Config(format!("depth must be a positive integer, got {value}")));
                }
                cfg.layers = value as usize;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub auc: f64,
    pub ap: f64,
    pub precision: f64,
    pub best_epoch: usize,
}

/// Trains one model per value, at most `jobs` at a time, each in its own
/// subdirectory of `out`, and writes `summary.csv` in input order.
pub fn cmd_sweep(param: SweepParam, values: &[f64], base: &RunConfig, jobs: usize, out: &Path) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            param.apply(&mut cfg, v)?;
            cfg.output = Some(out.join(format!("{}_{v}", param.name())));
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<CliResult<Vec<_>>>()?;
    create_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let rows = pool.install(|| {
        configs
            .par_iter()
            .zip(values)
            .map(|(cfg, &value)| {
                let run = cmd_train(cfg)?;
                let m = &run.record.metrics;
                Ok(SweepRow {
                    value,
                    auc: m.auc,
                    ap: m.ap,
                    precision: m.precision_missing,
                    best_epoch: run.record.best_epoch,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut csv = format!("{},auc,ap,precision,best_epoch\n", param.name());
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.value, r.auc, r.ap, r.precision, r.best_epoch).unwrap();
    }
    let path = out.join("summary.csv");
    atomic_write(&path, csv.as_bytes()).map_err(|e| io_error(&path, e))?;
    Ok(rows)
}
