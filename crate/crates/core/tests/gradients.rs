use graphlp::graph::Graph;
use graphlp::model::{forward, predict, ModelConfig, ModelParams};
use graphlp::tensor::gradcheck::{analytic_gradients, relative_error};
use graphlp::tensor::{finite_diff_check, DenseMatrix, ParamId, Tape, Var};
use graphlp::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const TOLERANCE: f64 = 1e-5;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    proptest::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn pair(max: usize) -> impl Strategy<Value = (DenseMatrix, DenseMatrix, DenseMatrix)> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(|(r, k, c)| (matrix(r, k), matrix(k, c), matrix(r, c)))
}

/// Contracts `x` with a fixed weight matrix so every output entry matters.
fn weighted_sum(t: &mut Tape, x: Var, weights: &DenseMatrix) -> Result<Var> {
    let w = t.constant(weights.clone())?;
    let (r, c) = t.shape(x);
    let flat = t.reshape(x, 1, r * c)?;
    let wf = t.reshape(w, r * c, 1)?;
    t.matmul(flat, wf)
}

fn check(f: impl Fn(&mut Tape, &[Var]) -> Result<Var>, params: &[DenseMatrix]) -> f64 {
    finite_diff_check(f, params, STEP).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_vjp((a, b, w) in pair(5)) {
        let err = check(|t, v| { let p = t.matmul(v[0], v[1])?; weighted_sum(t, p, &w) }, &[a, b]);
        prop_assert!(err < TOLERANCE, "{err}");
    }

    #[test]
    fn transposed_matmul_vjp((a, b, w) in pair(5), ta in any::<bool>(), tb in any::<bool>()) {
        let a = if ta { a.transpose() } else { a };
        let b = if tb { b.transpose() } else { b };
        let err = check(|t, v| { let p = t.matmul_t(v[0], ta, v[1], tb)?; weighted_sum(t, p, &w) }, &[a, b]);
        prop_assert!(err < TOLERANCE, "{err}");
    }

    #[test]
    fn spd_inverse_vjp(h in (1usize..6).prop_flat_map(|n| matrix(n, n)), w in matrix(6, 6)) {
        let n = h.rows();
        let w = DenseMatrix::from_fn(n, n, |i, j| w.get(i, j));
        // parameterised through hᵀh + I so every perturbation stays SPD
        let err = check(|t, v| {
            let g = t.matmul_t(v[0], true, v[0], false)?;
            let eye = t.constant(DenseMatrix::identity(n))?;
            let m = t.add(g, eye)?;
            let inv = t.spd_inverse(m)?;
            weighted_sum(t, inv, &w)
        }, &[h]);
        prop_assert!(err < TOLERANCE, "{err}");
    }

    #[test]
    fn elementwise_vjps((a, b, w) in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c), matrix(r, c))), s in -2.0f64..2.0) {
        let err = check(|t, v| { let x = t.add(v[0], v[1])?; weighted_sum(t, x, &w) }, &[a.clone(), b.clone()]);
        prop_assert!(err < TOLERANCE, "add {err}");
        let err = check(|t, v| { let x = t.sub(v[0], v[1])?; weighted_sum(t, x, &w) }, &[a.clone(), b.clone()]);
        prop_assert!(err < TOLERANCE, "sub {err}");
        let err = check(|t, v| { let x = t.scale(v[0], s)?; weighted_sum(t, x, &w) }, &[a.clone()]);
        prop_assert!(err < TOLERANCE, "scale {err}");
        let err = check(|t, v| { let x = t.sigmoid(v[0])?; weighted_sum(t, x, &w) }, &[a.clone().scale(3.0)]);
        prop_assert!(err < TOLERANCE, "sigmoid {err}");
        // keep relu inputs away from the kink
        let away = a.map(|x| if x.abs() < 0.05 { x + 0.1 } else { x });
        let err = check(|t, v| { let x = t.relu(v[0])?; weighted_sum(t, x, &w) }, &[away]);
        prop_assert!(err < TOLERANCE, "relu {err}");
        let err = check(|t, v| { let x = t.sum(v[0])?; t.scale(x, s) }, &[a]);
        prop_assert!(err < TOLERANCE, "sum {err}");
    }

    #[test]
    fn shape_ops_vjp((a, b) in (1usize..5, 1usize..4, 1usize..4).prop_flat_map(|(r, c1, c2)| (matrix(r, c1), matrix(r, c2))), bias in matrix(1, 4)) {
        let (r, c1, c2) = (a.rows(), a.cols(), b.cols());
        let w = DenseMatrix::from_fn(r, c1 + c2, |i, j| 0.5 + ((i * 7 + j * 3) % 5) as f64);
        let err = check(|t, v| { let x = t.concat_columns(&[v[0], v[1]])?; weighted_sum(t, x, &w) }, &[a.clone(), b]);
        prop_assert!(err < TOLERANCE, "concat {err}");
        let bias = DenseMatrix::from_fn(1, c1, |_, j| bias.get(0, j));
        let wb = DenseMatrix::from_fn(r, c1, |i, j| (i + 2 * j) as f64 + 0.5);
        let err = check(|t, v| { let x = t.add_bias(v[0], v[1])?; weighted_sum(t, x, &wb) }, &[a.clone(), bias]);
        prop_assert!(err < TOLERANCE, "add_bias {err}");
        let wr = DenseMatrix::from_fn(c1, r, |i, j| (3 * i + j) as f64 + 0.5);
        let err = check(|t, v| { let x = t.reshape(v[0], c1, r)?; weighted_sum(t, x, &wr) }, &[a]);
        prop_assert!(err < TOLERANCE, "reshape {err}");
    }

    #[test]
    fn hidden_layer_vjp(x in matrix(6, 3), wt in matrix(3, 4), bias in matrix(1, 4), out_w in matrix(6, 4)) {
        let err = check(|t, v| { let h = t.hidden_layer(v[0], v[1], v[2], 0.3, 9, false)?; weighted_sum(t, h, &out_w) }, &[x, wt, bias]);
        prop_assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn bce_gradient_closed_form(o in proptest::collection::vec(0.01f64..0.99, 1..12), seed in any::<u64>()) {
        let k = o.len();
        let labels = DenseMatrix::from_fn(1, k, |_, j| ((seed >> j) & 1) as f64);
        let scores = DenseMatrix::new(1, k, o.clone()).unwrap();
        let g = analytic_gradients(&|t: &mut Tape, v: &[Var]| t.bce(v[0], &labels), &[scores]).unwrap();
        for j in 0..k {
            let y = labels.get(0, j);
            let expected = (o[j] - y) / (o[j] * (1.0 - o[j])) / k as f64;
            prop_assert!(relative_error(g[0].get(0, j), expected) < 1e-12);
        }
    }
}

fn bce_oracle(scores: &DenseMatrix, labels: &DenseMatrix) -> f64 {
    let eps = 1e-12;
    let total: f64 = scores
        .data()
        .iter()
        .zip(labels.data())
        .map(|(&o, &y)| {
            let o = o.clamp(eps, 1.0 - eps);
            -(y * o.ln() + (1.0 - y) * (1.0 - o).ln())
        })
        .sum();
    total / scores.len() as f64
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 8;
    let pairs = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)));
    // dense enough that no parameter's gradient sinks to the finite-difference noise floor
    let input = Graph::new(n, pairs.clone().filter(|_| rng.gen_bool(0.6))).unwrap();
    let target = Graph::new(n, pairs.filter(|_| rng.gen_bool(0.4))).unwrap();
    let cfg = ModelConfig {
        layers: 2,
        hidden: 8,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    };
    let mut params = ModelParams::init(n, &cfg, 3).unwrap();
    // move off the near-identity initialisation so every block is exercised
    for t in params.tensors_mut() {
        for x in t.data_mut() {
            *x += rng.gen_range(-1.0..1.0);
        }
    }
    let a = input.to_adjacency();
    let labels = target.to_adjacency();

    let mut tape = Tape::new();
    let out = forward(&mut tape, &a, &params, true, 0).unwrap();
    let loss = tape.bce(out.scores, &labels).unwrap();
    let grads = tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for p in 0..params.num_tensors() {
        let analytic = grads.get(ParamId(p)).unwrap().clone();
        for k in 0..analytic.len() {
            let mut probe = params.clone();
            let orig = probe.tensors()[p].data()[k];
            probe.tensors_mut()[p].data_mut()[k] = orig + STEP;
            let plus = bce_oracle(&predict(&a, &probe).unwrap(), &labels);
            probe.tensors_mut()[p].data_mut()[k] = orig - STEP;
            let minus = bce_oracle(&predict(&a, &probe).unwrap(), &labels);
            let numeric = (plus - minus) / (2.0 * STEP);
            let e = relative_error(analytic.data()[k], numeric);
            worst = worst.max(e);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}
