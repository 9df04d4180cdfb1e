mod baseline;
mod eval;
mod split;
mod sweep;
mod train;

use std::path::Path;

use graphlp::graph::{ingest_edge_list, load_edge_list, write_node_map, Graph};

use crate::error::{CliError, CliResult};

pub use baseline::cmd_baseline;
pub use eval::{cmd_eval, EvalOutputs};
pub use split::{cmd_split, SplitSummary};
pub use sweep::{cmd_sweep, SweepParam, SweepRow};
pub use train::{cmd_train, TrainOutputs};

/// Graph seed stream for the spurious-link test graph; the dataset itself
/// uses streams 0 and 1.
pub const SPURIOUS_STREAM: u64 = 2;

/// Reads an edge list of dense integer ids, falling back to label remapping.
/// A remapped graph gets an `id<TAB>label` sidecar in `sidecar_dir`.
pub fn read_graph(path: &Path, sidecar_dir: Option<&Path>) -> CliResult<Graph> {
    match load_edge_list(path) {
        Ok(g) => Ok(g),
        Err(graphlp::Error::Parse { .. }) => {
            let (g, labels) = ingest_edge_list(path)?;
            log::info!("{}: remapped {} node labels to dense ids", path.display(), labels.len());
            if let Some(dir) = sidecar_dir {
                std::fs::create_dir_all(dir).map_err(|e| crate::error::io_error(dir, e))?;
                write_node_map(&labels, dir.join("node_map.tsv"))?;
            }
            Ok(g)
        }
        Err(graphlp::Error::Io(e)) => Err(crate::error::io_error(path, e)),
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}
