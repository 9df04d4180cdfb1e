use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphlp::eval::BaselineKind;
use graphlp_cli::commands::{cmd_baseline, cmd_eval, cmd_split, cmd_sweep, cmd_train, SweepParam};
use graphlp_cli::config::parse_override;
use graphlp_cli::{CliError, CliResult, RunConfig};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "graphlp", version, about = "Missing and spurious link prediction with a generative graph network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split an edge list into an observed graph and the held-out links.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        keep: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the augmented dataset, train, and evaluate the best checkpoint.
    Train(RunArgs),
    /// Evaluate a checkpoint on a dataset manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a dataset manifest with a local heuristic (cn, ra or lp).
    Baseline {
        #[arg(long)]
        kind: BaselineKind,
        /// Weight of 3-hop paths for lp.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per value of lambda or depth.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; missing keys fall back to the dataset preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Override any configuration key, e.g. `--set t=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut overrides = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<CliResult<Vec<_>>>()?;
        if let Some(p) = &self.dataset {
            overrides.push(("dataset".into(), Value::String(p.display().to_string())));
        }
        if let Some(p) = &self.output {
            overrides.push(("output".into(), Value::String(p.display().to_string())));
        }
        if let Some(s) = self.seed {
            overrides.push(("seed".into(), s.into()));
        }
        if let Some(e) = self.epochs {
            overrides.push(("epochs".into(), e.into()));
        }
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn print_json(value: &impl serde::Serialize) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Split { input, keep, seed, out } => {
            let s = cmd_split(&input, keep, seed, &out)?;
            println!("observed {} edges, holdout {} edges -> {}", s.observed_edges, s.holdout_edges, out.display());
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let run = cmd_train(&cfg)?;
            print_json(&run.record.metrics)?;
            eprintln!("wrote {}", run.dir.display());
        }
        Command::Eval { checkpoint, manifest, out } => print_json(&cmd_eval(&checkpoint, &manifest, &out)?.report)?,
        Command::Baseline {
            kind,
            epsilon,
            manifest,
            out,
        } => {
            let kind = match (kind, epsilon) {
                (BaselineKind::Lp { .. }, Some(epsilon)) => BaselineKind::Lp { epsilon },
                (_, Some(_)) => return Err(CliError::Config("--epsilon only applies to lp".into())),
                (k, None) => k,
            };
            print_json(&cmd_baseline(kind, &manifest, &out)?)?;
        }
        Command::Sweep {
            param,
            values,
            jobs,
            out,
            run,
        } => {
            let rows = cmd_sweep(param, &values, &run.resolve()?, jobs, &out)?;
            for r in rows {
                println!("{} auc {:.4} ap {:.4} precision {:.4}", r.value, r.auc, r.ap, r.precision);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
