//! The reconstruction network: collaborative inference, high-order
//! connectivity, layered propagation and the pair-wise fusion MLP.

mod checkpoint;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, ParamId, Tape, Var};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Shape and scalar hyperparameters of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    pub lambda: f64,
    pub dropout_rate: f64,
    /// Apply ReLU after each propagation layer.
    pub relu: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden: 64,
            lambda: 0.13,
            dropout_rate: 0.2,
            relu: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidArgument("layers must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("hidden width must be at least 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Width of the per-pair feature vector fed to the MLP.
    pub fn feature_width(&self) -> usize {
        2 * (self.layers + 1)
    }
}

/// Trainable state. Parameter ids follow [`ModelParams::tensors`] order:
/// `W⁽⁰⁾ … W⁽ᴸ⁻¹⁾, w1, b1, w2, b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub n: usize,
    pub layer_weights: Vec<DenseMatrix>,
    pub mlp_w1: DenseMatrix,
    pub mlp_b1: DenseMatrix,
    pub mlp_w2: DenseMatrix,
    pub mlp_b2: DenseMatrix,
}

/// Symmetric uniform noise in `[-bound, bound]`.
fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

impl ModelParams {
    /// Layer weights start at `I` plus uniform noise in `±0.01`; MLP weights
    /// are uniform in `±1/√fan_in`; biases are zero.
    pub fn init(n: usize, config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer_weights = (0..config.layers)
            .map(|_| {
                let mut w = uniform(n, n, 0.01, &mut rng);
                for i in 0..n {
                    w.set(i, i, w.get(i, i) + 1.0);
                }
                w
            })
            .collect();
        let f = config.feature_width();
        let h = config.hidden;
        Ok(Self {
            config: config.clone(),
            n,
            layer_weights,
            mlp_w1: uniform(f, h, 1.0 / (f as f64).sqrt(), &mut rng),
            mlp_b1: DenseMatrix::zeros(1, h),
            mlp_w2: uniform(h, 1, 1.0 / (h as f64).sqrt(), &mut rng),
            mlp_b2: DenseMatrix::zeros(1, 1),
        })
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut out: Vec<&DenseMatrix> = self.layer_weights.iter().collect();
        out.extend([&self.mlp_w1, &self.mlp_b1, &self.mlp_w2, &self.mlp_b2]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out: Vec<&mut DenseMatrix> = self.layer_weights.iter_mut().collect();
        out.extend([&mut self.mlp_w1, &mut self.mlp_b1, &mut self.mlp_w2, &mut self.mlp_b2]);
        out
    }

    pub fn num_tensors(&self) -> usize {
        self.layer_weights.len() + 4
    }

    /// Checks the invariants tying shapes to `n` and the config.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let c = &self.config;
        let bad = |what: &str| Err(Error::InvalidArgument(format!("inconsistent parameter shapes: {what}")));
        if self.layer_weights.len() != c.layers {
            return bad("layer count");
        }
        if self.layer_weights.iter().any(|w| w.shape() != (self.n, self.n)) {
            return bad("layer weight");
        }
        if self.mlp_w1.shape() != (c.feature_width(), c.hidden)
            || self.mlp_b1.shape() != (1, c.hidden)
            || self.mlp_w2.shape() != (c.hidden, 1)
            || self.mlp_b2.shape() != (1, 1)
        {
            return bad("mlp");
        }
        Ok(())
    }

    /// Records every tensor as a trainable leaf.
    pub fn register(&self, tape: &mut Tape) -> Result<ParamVars> {
        let mut vars = self
            .tensors()
            .into_iter()
            .enumerate()
            .map(|(i, t)| tape.param(ParamId(i), t.clone()))
            .collect::<Result<Vec<_>>>()?;
        let b2 = vars.pop().unwrap();
        let w2 = vars.pop().unwrap();
        let b1 = vars.pop().unwrap();
        let w1 = vars.pop().unwrap();
        Ok(ParamVars {
            layer_weights: vars,
            w1,
            b1,
            w2,
            b2,
        })
    }
}

/// Tape handles for the parameters of one forward pass.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub layer_weights: Vec<Var>,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂` the row sums of `A + I`.
pub fn normalized_adjacency(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / (a.row(i).iter().sum::<f64>() + 1.0).sqrt()).collect();
    DenseMatrix::from_fn(n, n, |i, j| {
        let aij = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
        aij * inv_sqrt[i] * inv_sqrt[j]
    })
}

/// `λ h (λ hᵀh + I)⁻¹ hᵀh`.
pub fn collaborative_inference(tape: &mut Tape, h: Var, lambda: f64) -> Result<Var> {
    let (r, c) = tape.shape(h);
    if r != c {
        return Err(Error::ShapeMismatch {
            op: "collaborative_inference",
            left: (r, c),
            right: (c, r),
        });
    }
    let gram = tape.matmul_t(h, true, h, false)?;
    let scaled = tape.scale(gram, lambda)?;
    let eye = tape.constant(DenseMatrix::identity(c))?;
    let system = tape.add(scaled, eye)?;
    let inv = tape.spd_inverse(system)?;
    let left = tape.matmul(h, inv)?;
    let prod = tape.matmul(left, gram)?;
    tape.scale(prod, lambda)
}

/// `anorm · ci`.
pub fn high_order_connectivity(tape: &mut Tape, anorm: Var, ci: Var) -> Result<Var> {
    tape.matmul(anorm, ci)
}

fn layer(tape: &mut Tape, anorm: Var, h: Var, w: Var, lambda: f64, relu: bool) -> Result<(Var, Var, Var)> {
    let ci = collaborative_inference(tape, h, lambda)?;
    let hcc = high_order_connectivity(tape, anorm, ci)?;
    let mut next = tape.matmul(hcc, w)?;
    if relu {
        next = tape.relu(next)?;
    }
    Ok((ci, hcc, next))
}

/// One propagation step `anorm · CI(h) · w`, optionally followed by ReLU.
pub fn propagate(tape: &mut Tape, anorm: Var, h: Var, w: Var, lambda: f64, relu: bool) -> Result<Var> {
    layer(tape, anorm, h, w, lambda, relu).map(|(_, _, next)| next)
}

/// Per-pair features `[CI(H⁽ˡ⁾)ᵢⱼ, HCC(H⁽ˡ⁾)ᵢⱼ]` for every layer, passed
/// through `sigmoid(dropout(relu(F·w1 + b1))·w2 + b2)` and reshaped to `n × n`.
pub fn fuse(
    tape: &mut Tape,
    ci: &[Var],
    hcc: &[Var],
    vars: &ParamVars,
    dropout_rate: f64,
    dropout_seed: u64,
    training: bool,
) -> Result<Var> {
    if ci.is_empty() || ci.len() != hcc.len() {
        return Err(Error::InvalidArgument(format!(
            "fuse needs matching non-empty feature lists, got {} and {}",
            ci.len(),
            hcc.len()
        )));
    }
    let (n, m) = tape.shape(ci[0]);
    let mut columns = Vec::with_capacity(2 * ci.len());
    for (&c, &h) in ci.iter().zip(hcc) {
        for v in [c, h] {
            if tape.shape(v) != (n, m) {
                return Err(Error::ShapeMismatch {
                    op: "fuse",
                    left: (n, m),
                    right: tape.shape(v),
                });
            }
            columns.push(tape.reshape(v, n * m, 1)?);
        }
    }
    let features = tape.concat_columns(&columns)?;
    let a1 = tape.hidden_layer(features, vars.w1, vars.b1, dropout_rate, dropout_seed, training)?;
    let z2 = tape.matmul(a1, vars.w2)?;
    let z2 = tape.add_bias(z2, vars.b2)?;
    let out = tape.sigmoid(z2)?;
    tape.reshape(out, n, m)
}

/// Tape handles produced by [`forward`].
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub ci: Vec<Var>,
    pub hcc: Vec<Var>,
    pub scores: Var,
    pub params: ParamVars,
}

/// Values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardArtifacts {
    pub ci_outputs: Vec<DenseMatrix>,
    pub hcc_outputs: Vec<DenseMatrix>,
    pub scores: DenseMatrix,
}

impl ForwardVars {
    pub fn artifacts(&self, tape: &Tape) -> ForwardArtifacts {
        ForwardArtifacts {
            ci_outputs: self.ci.iter().map(|&v| tape.value(v).clone()).collect(),
            hcc_outputs: self.hcc.iter().map(|&v| tape.value(v).clone()).collect(),
            scores: tape.value(self.scores).clone(),
        }
    }
}

/// Records the full network on `tape` for input adjacency `a`.
pub fn forward(
    tape: &mut Tape,
    a: &DenseMatrix,
    params: &ModelParams,
    training: bool,
    dropout_seed: u64,
) -> Result<ForwardVars> {
    if a.shape() != (params.n, params.n) {
        return Err(Error::ShapeMismatch {
            op: "forward",
            left: a.shape(),
            right: (params.n, params.n),
        });
    }
    let cfg = &params.config;
    let vars = params.register(tape)?;
    let anorm = tape.constant(normalized_adjacency(a))?;
    let mut h = tape.constant(a.clone())?;
    let mut ci = Vec::with_capacity(cfg.layers + 1);
    let mut hcc = Vec::with_capacity(cfg.layers + 1);
    for &w in &vars.layer_weights {
        let (c, hc, next) = layer(tape, anorm, h, w, cfg.lambda, cfg.relu)?;
        ci.push(c);
        hcc.push(hc);
        h = next;
    }
    let c = collaborative_inference(tape, h, cfg.lambda)?;
    ci.push(c);
    hcc.push(high_order_connectivity(tape, anorm, c)?);
    let scores = fuse(tape, &ci, &hcc, &vars, cfg.dropout_rate, dropout_seed, training)?;
    Ok(ForwardVars {
        ci,
        hcc,
        scores,
        params: vars,
    })
}

/// Inference-mode link probabilities for adjacency `a`.
pub fn predict(a: &DenseMatrix, params: &ModelParams) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let out = forward(&mut tape, a, params, false, 0)?;
    Ok(tape.value(out.scores).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::finite_diff_check;

    fn ci_value(h: &DenseMatrix, lambda: f64) -> DenseMatrix {
        let mut tape = Tape::new();
        let v = tape.constant(h.clone()).unwrap();
        let out = collaborative_inference(&mut tape, v, lambda).unwrap();
        tape.value(out).clone()
    }

    fn small_config(layers: usize, hidden: usize) -> ModelConfig {
        ModelConfig {
            layers,
            hidden,
            dropout_rate: 0.0,
            ..ModelConfig::default()
        }
    }

    fn ring_adjacency(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| if (i + 1) % n == j || (j + 1) % n == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn ci_zero_and_swap() {
        assert_eq!(ci_value(&DenseMatrix::zeros(3, 3), 0.13), DenseMatrix::zeros(3, 3));
        let h = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let out = ci_value(&h, 0.13);
        // h² = I, so CI(h) = λ/(1+λ) · h
        let expected = h.scale(0.13 / 1.13);
        assert!(out.max_abs_diff(&expected).unwrap() < 1e-15);
        assert!((out.get(0, 1) - 0.115044).abs() < 1e-6);
    }

    #[test]
    fn normalized_adjacency_examples() {
        assert_eq!(normalized_adjacency(&DenseMatrix::zeros(3, 3)), DenseMatrix::identity(3));
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let an = normalized_adjacency(&a);
        assert!(an.max_abs_diff(&DenseMatrix::filled(2, 2, 0.5)).unwrap() < 1e-15);
        let ring = normalized_adjacency(&ring_adjacency(7));
        for i in 0..7 {
            assert!((ring.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hcc_single_edge() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let mut tape = Tape::new();
        let an = tape.constant(normalized_adjacency(&a)).unwrap();
        let h = tape.constant(a).unwrap();
        let ci = collaborative_inference(&mut tape, h, 0.13).unwrap();
        let hcc = high_order_connectivity(&mut tape, an, ci).unwrap();
        let expected = DenseMatrix::filled(2, 2, 0.13 / (2.0 * 1.13));
        assert!(tape.value(hcc).max_abs_diff(&expected).unwrap() < 1e-15);
        assert!((expected.get(0, 0) - 0.057522).abs() < 1e-6);
    }

    #[test]
    fn propagate_with_identity_weight_is_hcc() {
        let a = ring_adjacency(5);
        let mut tape = Tape::new();
        let an = tape.constant(normalized_adjacency(&a)).unwrap();
        let h = tape.constant(a).unwrap();
        let w = tape.constant(DenseMatrix::identity(5)).unwrap();
        let ci = collaborative_inference(&mut tape, h, 0.13).unwrap();
        let hcc = high_order_connectivity(&mut tape, an, ci).unwrap();
        let next = propagate(&mut tape, an, h, w, 0.13, false).unwrap();
        assert_eq!(tape.value(next), tape.value(hcc));
        let zero = tape.constant(DenseMatrix::zeros(5, 5)).unwrap();
        let next = propagate(&mut tape, an, zero, w, 0.13, false).unwrap();
        assert_eq!(tape.value(next), &DenseMatrix::zeros(5, 5));
    }

    #[test]
    fn propagate_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let a = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let an = normalized_adjacency(&ring_adjacency(n));
        let w0 = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let err = finite_diff_check(
            |tape: &mut Tape, p: &[Var]| {
                let an = tape.constant(an.clone())?;
                let h = tape.constant(a.clone())?;
                let next = propagate(tape, an, h, p[0], 0.13, false)?;
                tape.sum(next)
            },
            &[w0],
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn fuse_zero_features_gives_half() {
        let cfg = small_config(1, 4);
        let mut params = ModelParams::init(3, &cfg, 1).unwrap();
        params.mlp_w1 = DenseMatrix::zeros(4, 4);
        let mut tape = Tape::new();
        let vars = params.register(&mut tape).unwrap();
        let z = tape.constant(DenseMatrix::zeros(3, 3)).unwrap();
        let out = fuse(&mut tape, &[z, z], &[z, z], &vars, 0.0, 0, true).unwrap();
        assert_eq!(tape.value(out), &DenseMatrix::filled(3, 3, 0.5));
    }

    #[test]
    fn init_shapes_and_determinism() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(10, &cfg, 7).unwrap();
        assert_eq!(p.layer_weights.len(), 3);
        assert_eq!(p.mlp_w1.shape(), (8, 64));
        assert_eq!(p.num_tensors(), 7);
        p.validate().unwrap();
        assert_eq!(p, ModelParams::init(10, &cfg, 7).unwrap());
        for w in &p.layer_weights {
            assert!(w.max_abs_diff(&DenseMatrix::identity(10)).unwrap() <= 0.01);
        }
        assert!(ModelParams::init(1, &cfg, 7).is_err());
    }

    #[test]
    fn forward_scores_and_determinism() {
        let a = ring_adjacency(9);
        let p = ModelParams::init(9, &ModelConfig::default(), 3).unwrap();
        let s1 = predict(&a, &p).unwrap();
        assert_eq!(s1, predict(&a, &p).unwrap());
        assert_eq!(s1.shape(), (9, 9));
        assert!(s1.data().iter().all(|&x| x > 0.0 && x < 1.0));
        let mut tape = Tape::new();
        let fv = forward(&mut tape, &a, &p, false, 0).unwrap();
        let art = fv.artifacts(&tape);
        assert_eq!(art.ci_outputs.len(), 4);
        assert_eq!(art.hcc_outputs.len(), 4);
        assert!(art.ci_outputs[0].max_asymmetry() < 1e-9);
    }

    #[test]
    fn forward_rejects_wrong_size() {
        let p = ModelParams::init(4, &small_config(1, 2), 0).unwrap();
        assert!(predict(&DenseMatrix::zeros(5, 5), &p).is_err());
    }
}
