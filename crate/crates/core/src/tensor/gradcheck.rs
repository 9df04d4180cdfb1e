//! Central finite-difference oracle for tape gradients.

use super::matrix::DenseMatrix;
use super::tape::{ParamId, Tape, Var};
use crate::error::Result;

/// Builds a scalar on a fresh tape from parameter handles (registered as
/// `ParamId(0..)` in order).
pub trait ScalarFn: Fn(&mut Tape, &[Var]) -> Result<Var> {}
impl<F: Fn(&mut Tape, &[Var]) -> Result<Var>> ScalarFn for F {}

fn evaluate(f: &impl ScalarFn, params: &[DenseMatrix]) -> Result<(Tape, Var)> {
    let mut tape = Tape::new();
    let vars = params
        .iter()
        .enumerate()
        .map(|(i, p)| tape.param(ParamId(i), p.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &vars)?;
    Ok((tape, out))
}

/// Analytic gradients of `f` at `params`, one matrix per parameter.
pub fn analytic_gradients(f: &impl ScalarFn, params: &[DenseMatrix]) -> Result<Vec<DenseMatrix>> {
    let (tape, out) = evaluate(f, params)?;
    let grads = tape.backward(out)?;
    Ok((0..params.len())
        .map(|i| grads.get(ParamId(i)).cloned().expect("every leaf has a gradient"))
        .collect())
}

/// Central-difference gradients with step `h`.
pub fn numeric_gradients(f: &impl ScalarFn, params: &[DenseMatrix], h: f64) -> Result<Vec<DenseMatrix>> {
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let (r, c) = params[p].shape();
        let mut g = DenseMatrix::zeros(r, c);
        for k in 0..params[p].len() {
            let orig = work[p].data()[k];
            work[p].data_mut()[k] = orig + h;
            let (t, v) = evaluate(f, &work)?;
            let plus = t.value(v).get(0, 0);
            work[p].data_mut()[k] = orig - h;
            let (t, v) = evaluate(f, &work)?;
            let minus = t.value(v).get(0, 0);
            work[p].data_mut()[k] = orig;
            g.data_mut()[k] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// `|a − n| / max(1e-12, |a| + |n|)` for one gradient entry.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12)
}

/// Largest relative error between tape and finite-difference gradients over
/// every parameter entry. `f` must be deterministic.
pub fn finite_diff_check(f: impl ScalarFn, params: &[DenseMatrix], h: f64) -> Result<f64> {
    let analytic = analytic_gradients(&f, params)?;
    let numeric = numeric_gradients(&f, params, h)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()).map(|(x, y)| relative_error(*x, *y)))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_has_zero_error() {
        let p = DenseMatrix::from_fn(3, 2, |i, j| i as f64 - j as f64);
        let err = finite_diff_check(|t: &mut Tape, v: &[Var]| t.sum(v[0]), &[p], 1e-6).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 0.5) - 1.0 / 3.0).abs() < 1e-15);
    }
}
