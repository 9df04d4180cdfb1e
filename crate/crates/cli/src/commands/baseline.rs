use std::path::Path;

use graphlp::eval::{baseline_scores, write_ranked_csv, BaselineKind, MetricsReport};
use graphlp::graph::Dataset;

use super::create_dir;
use super::eval::evaluate_with;
use crate::error::CliResult;

/// Runs a heuristic on the dataset's observed graph; writes
/// `metrics_<kind>.json` and `ranked_<kind>.csv` under `out`.
pub fn cmd_baseline(kind: BaselineKind, manifest: &Path, out: &Path) -> CliResult<MetricsReport> {
    let (dataset, spurious_test) = Dataset::read(manifest)?;
    create_dir(out)?;
    let (scores, report) = evaluate_with(&dataset, spurious_test.as_ref(), |g| Ok(baseline_scores(kind, g)?))?;
    report.save(out.join(format!("metrics_{kind}.json")))?;
    write_ranked_csv(out.join(format!("ranked_{kind}.csv")), &scores, &dataset.missing)?;
    Ok(report)
}
