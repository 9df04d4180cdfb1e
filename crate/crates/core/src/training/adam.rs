use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::{DenseMatrix, GradientMap, ParamId};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates, one per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = || {
            params
                .tensors()
                .iter()
                .map(|t| DenseMatrix::zeros(t.rows(), t.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Weight decay is added to the gradient as
/// `weight_decay · θ`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &GradientMap,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    let tensors = params.tensors_mut();
    if state.m.len() != tensors.len() {
        return Err(Error::InvalidArgument("optimizer state does not match parameters".into()));
    }
    // validate everything before mutating anything
    for (i, t) in tensors.iter().enumerate() {
        let g = grads.get(ParamId(i)).ok_or(Error::MissingGradient(i))?;
        if g.shape() != t.shape() || state.m[i].shape() != t.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                left: t.shape(),
                right: g.shape(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, theta) in tensors.into_iter().enumerate() {
        let g = grads.get(ParamId(i)).unwrap().data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (k, p) in theta.data_mut().iter_mut().enumerate() {
            let gk = g[k] + weight_decay * *p;
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}
