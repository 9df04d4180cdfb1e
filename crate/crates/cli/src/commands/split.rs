use std::path::Path;

use graphlp::graph::{observed_split, write_edge_list, Graph};

use super::{create_dir, read_graph};
use crate::error::CliResult;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSummary {
    pub observed_edges: usize,
    pub holdout_edges: usize,
}

/// Writes `observed.edges` and `holdout.edges` (the missing-link ground
/// truth) under `out`. The split matches the one `train` derives from the
/// same seed.
pub fn cmd_split(input: &Path, keep_fraction: f64, seed: u64, out: &Path) -> CliResult<SplitSummary> {
    create_dir(out)?;
    let original = read_graph(input, Some(out))?;
    let observed = observed_split(&original, keep_fraction, seed)?;
    let holdout = Graph::new(original.n(), original.edges().difference(observed.edges()).copied())?;
    write_edge_list(&observed, out.join("observed.edges"))?;
    write_edge_list(&holdout, out.join("holdout.edges"))?;
    Ok(SplitSummary {
        observed_edges: observed.num_edges(),
        holdout_edges: holdout.num_edges(),
    })
}
