//! Local similarity heuristics, computed with dense matrix products.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{symmetrize_scores, ScoredPairs};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{gemm, DenseMatrix};

pub const DEFAULT_LP_EPSILON: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineKind {
    /// Common neighbours, `A²`.
    Cn,
    /// Resource allocation, `A D⁻¹ A`.
    Ra,
    /// Local path index, `A² + ε A³`.
    Lp { epsilon: f64 },
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cn" => Ok(Self::Cn),
            "ra" => Ok(Self::Ra),
            "lp" => Ok(Self::Lp {
                epsilon: DEFAULT_LP_EPSILON,
            }),
            other => Err(Error::InvalidArgument(format!("unknown baseline '{other}' (expected cn, ra or lp)"))),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cn => f.write_str("cn"),
            Self::Ra => f.write_str("ra"),
            Self::Lp { .. } => f.write_str("lp"),
        }
    }
}

pub fn baseline_scores(kind: BaselineKind, g: &Graph) -> Result<ScoredPairs> {
    let a = g.to_adjacency();
    let a2 = gemm(&a, false, &a, false, 1.0)?;
    let m = match kind {
        BaselineKind::Cn => a2,
        BaselineKind::Ra => {
            let deg = g.degrees();
            // isolated nodes are never common neighbours, so their column is zero anyway
            let weighted = DenseMatrix::from_fn(g.n(), g.n(), |i, j| {
                if deg[j] == 0 {
                    0.0
                } else {
                    a.get(i, j) / deg[j] as f64
                }
            });
            gemm(&weighted, false, &a, false, 1.0)?
        }
        BaselineKind::Lp { epsilon } => {
            if !(epsilon.is_finite() && epsilon >= 0.0) {
                return Err(Error::InvalidArgument(format!("LP epsilon must be non-negative, got {epsilon}")));
            }
            let a3 = gemm(&a2, false, &a, false, 1.0)?;
            a2.add(&a3.scale(epsilon))?
        }
    };
    symmetrize_scores(&m)
}
