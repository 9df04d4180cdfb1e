use std::path::Path;

use graphlp::eval::{evaluate_reconstruction, symmetrize_scores, write_ranked_csv, MetricsReport, ScoredPairs, SpuriousCase};
use graphlp::graph::{Dataset, Graph, PerturbationResult};
use graphlp::model::{load_checkpoint, predict, ModelParams};

use super::create_dir;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct EvalOutputs {
    pub report: MetricsReport,
}

/// Scores the observed graph (and the spurious test graph, if any) with
/// `score` and evaluates both protocols.
pub(crate) fn evaluate_with(
    dataset: &Dataset,
    spurious_test: Option<&Graph>,
    score: impl Fn(&Graph) -> CliResult<ScoredPairs>,
) -> CliResult<(ScoredPairs, MetricsReport)> {
    let observed_scores = score(&dataset.observed)?;
    let report = match spurious_test {
        Some(g) => {
            let test = PerturbationResult {
                graph: g.clone(),
                deleted: dataset.observed.edges().difference(g.edges()).copied().collect(),
                added: g.edges().difference(dataset.observed.edges()).copied().collect(),
            };
            let test_scores = score(g)?;
            evaluate_reconstruction(
                &observed_scores,
                &dataset.original,
                &dataset.observed,
                Some(SpuriousCase {
                    test: &test,
                    scores: &test_scores,
                }),
            )?
        }
        None => evaluate_reconstruction(&observed_scores, &dataset.original, &dataset.observed, None)?,
    };
    Ok((observed_scores, report))
}

pub(crate) fn model_scorer(params: &ModelParams) -> impl Fn(&Graph) -> CliResult<ScoredPairs> + '_ {
    move |g| Ok(symmetrize_scores(&predict(&g.to_adjacency(), params)?)?)
}

/// Writes `metrics.json` and `ranked_missing.csv` under `out`.
pub(crate) fn write_reports(out: &Path, scores: &ScoredPairs, dataset: &Dataset, report: &MetricsReport) -> CliResult<()> {
    report.save(out.join("metrics.json"))?;
    write_ranked_csv(out.join("ranked_missing.csv"), scores, &dataset.missing)?;
    Ok(())
}

/// Evaluates a checkpoint on the dataset described by `manifest`.
pub fn cmd_eval(checkpoint: &Path, manifest: &Path, out: &Path) -> CliResult<EvalOutputs> {
    let params = load_checkpoint(checkpoint)?;
    let (dataset, spurious_test) = Dataset::read(manifest)?;
    if params.n != dataset.observed.n() {
        return Err(CliError::Data(format!(
            "checkpoint is for {} nodes but the dataset has {}",
            params.n,
            dataset.observed.n()
        )));
    }
    create_dir(out)?;
    let (scores, report) = evaluate_with(&dataset, spurious_test.as_ref(), model_scorer(&params))?;
    write_reports(out, &scores, &dataset, &report)?;
    Ok(EvalOutputs { report })
}
