//! Tape-based reverse-mode differentiation over [`DenseMatrix`] values.
//!
//! Every operation evaluates eagerly, appends a node holding its output and
//! the information its vector-Jacobian product needs, and returns a [`Var`]
//! handle. Nodes are only ever appended, so operands always precede their
//! consumers and [`Tape::backward`] can sweep the list once in reverse.
//!
//! A tape is single use: `backward` consumes it and frees each node as soon
//! as its adjoint has been propagated.

use std::collections::BTreeMap;

use rand::RngCore;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, gemm_into, DenseMatrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Identifier of a trainable leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Clamp applied to probabilities inside [`Tape::bce`].
pub const BCE_EPSILON: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    SpdInverse(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    AddBias { x: Var, bias: Var },
    Sigmoid(Var),
    Relu(Var),
    Dropout { x: Var, mask: DenseMatrix },
    /// `dropout(relu(x·w + bias))`; `scale` is the survivor scale.
    HiddenLayer { x: Var, w: Var, bias: Var, scale: f64 },
    ConcatColumns(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    Bce { scores: Var, labels: DenseMatrix },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::MatMul { .. } => "matmul",
            Op::SpdInverse(_) => "spd_inverse",
            Op::Add(..) => "add",
            Op::Sub(..) => "subtract",
            Op::Scale(..) => "scalar_mul",
            Op::AddBias { .. } => "add_bias",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::Dropout { .. } => "dropout",
            Op::HiddenLayer { .. } => "hidden_layer",
            Op::ConcatColumns(_) => "concat_columns",
            Op::Reshape(_) => "reshape",
            Op::Sum(_) => "sum",
            Op::Bce { .. } => "bce",
        }
    }

    fn operands(&self) -> Vec<Var> {
        match self {
            Op::Constant | Op::Param(_) => vec![],
            Op::MatMul { a, b, .. } => vec![*a, *b],
            Op::Add(a, b) | Op::Sub(a, b) => vec![*a, *b],
            Op::AddBias { x, bias } => vec![*x, *bias],
            Op::SpdInverse(x)
            | Op::Scale(x, _)
            | Op::Sigmoid(x)
            | Op::Relu(x)
            | Op::Reshape(x)
            | Op::Sum(x) => vec![*x],
            Op::Dropout { x, .. } => vec![*x],
            Op::HiddenLayer { x, w, bias, .. } => vec![*x, *w, *bias],
            Op::Bce { scores, .. } => vec![*scores],
            Op::ConcatColumns(parts) => parts.clone(),
        }
    }
}

#[derive(Debug)]
struct Node {
    value: DenseMatrix,
    op: Op,
    needs_grad: bool,
}

/// Gradients of a scalar loss with respect to every parameter leaf.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientMap(BTreeMap<ParamId, DenseMatrix>);

impl GradientMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the gradient of `id`, replacing any previous entry.
    pub fn insert(&mut self, id: ParamId, grad: DenseMatrix) {
        self.0.insert(id, grad);
    }

    pub fn get(&self, id: ParamId) -> Option<&DenseMatrix> {
        self.0.get(&id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &DenseMatrix)> {
        self.0.iter().map(|(k, v)| (*k, v))
    }

    fn add_entry(&mut self, id: ParamId, grad: DenseMatrix) -> Result<()> {
        match self.0.get_mut(&id) {
            Some(acc) => acc.add_assign(&grad),
            None => {
                self.0.insert(id, grad);
                Ok(())
            }
        }
    }

    /// Entrywise sum with another map (union of keys).
    pub fn accumulate(&mut self, other: GradientMap) -> Result<()> {
        for (id, g) in other.0 {
            self.add_entry(id, g)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.0.values_mut().for_each(|g| g.scale_in_place(s));
    }
}

/// Append-only record of matrix operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        let needs_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            other => other.operands().iter().any(|v| self.needs_grad(*v)),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: DenseMatrix) -> Result<Var> {
        self.push(value, Op::Constant)
    }

    /// Records a trainable leaf. Registering the same id twice sums the
    /// gradients of both uses.
    pub fn param(&mut self, id: ParamId, value: DenseMatrix) -> Result<Var> {
        self.push(value, Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, false)
    }

    /// `op(a) · op(b)`, where `op` transposes when the flag is set.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var> {
        let value = gemm(self.value(a), ta, self.value(b), tb, 1.0)?;
        self.push(value, Op::MatMul { a, b, ta, tb })
    }

    pub fn spd_inverse(&mut self, m: Var) -> Result<Var> {
        let value = self.value(m).spd_inverse()?;
        self.push(value, Op::SpdInverse(m))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        self.push(value, Op::Sub(a, b))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let value = self.value(x).scale(s);
        self.push(value, Op::Scale(x, s))
    }

    /// Adds a `1 × c` bias row to every row of an `r × c` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                left: xv.shape(),
                right: bv.shape(),
            });
        }
        let mut value = xv.clone();
        let b = bv.data();
        for row in value.data_mut().chunks_mut(b.len()) {
            row.iter_mut().zip(b).for_each(|(v, bj)| *v += bj);
        }
        self.push(value, Op::AddBias { x, bias })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(sigmoid);
        self.push(value, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x))
    }

    /// Inverted dropout. Outside training, or with `rate == 0`, this is the
    /// identity and records nothing.
    pub fn dropout(&mut self, x: Var, rate: f64, seed: u64, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let (r, c) = self.shape(x);
        let mut mask = DenseMatrix::ones(r, c);
        relu_dropout_in_place(mask.data_mut(), false, rate, seed);
        let value = self.value(x).hadamard(&mask)?;
        self.push(value, Op::Dropout { x, mask })
    }

    /// Fused `dropout(relu(x·w + bias))` with a `1 × c` bias row. Equal in
    /// value and gradient to the unfused ops, but keeps a single `r × c`
    /// buffer alive instead of four.
    pub fn hidden_layer(&mut self, x: Var, w: Var, bias: Var, rate: f64, seed: u64, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(bias));
        let cols = wv.cols();
        if bv.shape() != (1, cols) {
            return Err(Error::ShapeMismatch {
                op: "hidden_layer",
                left: wv.shape(),
                right: bv.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(xv.rows(), cols);
        let b = bv.data();
        for row in out.data_mut().chunks_mut(cols) {
            row.copy_from_slice(b);
        }
        gemm_into(xv, false, wv, false, 1.0, 1.0, &mut out)?;
        let rate = if training { rate } else { 0.0 };
        relu_dropout_in_place(out.data_mut(), true, rate, seed);
        let scale = 1.0 / (1.0 - rate);
        self.push(out, Op::HiddenLayer { x, w, bias, scale })
    }

    /// Horizontal concatenation of parts sharing a row count.
    pub fn concat_columns(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat_columns needs at least one part".into()))?;
        let rows = self.shape(*first).0;
        for p in parts {
            if self.shape(*p).0 != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_columns",
                    left: self.shape(*first),
                    right: self.shape(*p),
                });
            }
        }
        let total: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(i));
            }
        }
        let value = DenseMatrix::new(rows, total, data)?;
        self.push(value, Op::ConcatColumns(parts.to_vec()))
    }

    /// Row-major reshape; the element order is unchanged.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(x).clone().reshaped(rows, cols)?;
        self.push(value, Op::Reshape(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = DenseMatrix::filled(1, 1, self.value(x).sum());
        self.push(value, Op::Sum(x))
    }

    /// Mean binary cross-entropy of probabilities against 0/1 labels, with
    /// probabilities clamped to `[ε, 1 − ε]`.
    pub fn bce(&mut self, scores: Var, labels: &DenseMatrix) -> Result<Var> {
        let s = self.value(scores);
        if s.shape() != labels.shape() {
            return Err(Error::ShapeMismatch {
                op: "bce",
                left: s.shape(),
                right: labels.shape(),
            });
        }
        let loss = bce_value(s, labels);
        self.push(
            DenseMatrix::filled(1, 1, loss),
            Op::Bce {
                scores,
                labels: labels.clone(),
            },
        )
    }

    /// Reverse sweep from a `1 × 1` loss node.
    pub fn backward(self, loss: Var) -> Result<GradientMap> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut nodes = self.nodes;
        nodes.truncate(loss.0 + 1);
        let mut adjoints: Vec<Option<DenseMatrix>> = Vec::with_capacity(nodes.len());
        adjoints.resize_with(nodes.len(), || None);
        adjoints[loss.0] = Some(DenseMatrix::ones(1, 1));

        let mut grads = GradientMap::new();
        // Collect leaves up front so unreachable parameters get zero gradients.
        let leaves: Vec<(ParamId, (usize, usize))> = nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Param(id) => Some((id, n.value.shape())),
                _ => None,
            })
            .collect();

        while let Some(node) = nodes.pop() {
            let Some(g) = adjoints.pop().flatten() else {
                continue;
            };
            if !node.needs_grad {
                continue;
            }
            let val = |v: Var| &nodes[v.0].value;
            let ng = |v: Var| nodes[v.0].needs_grad;

            match node.op {
                Op::Constant => {}
                Op::Param(id) => grads.add_entry(id, g)?,
                Op::MatMul { a, b, ta, tb } => {
                    // C = op(A) op(B); dop(A) = G op(B)ᵀ, dop(B) = op(A)ᵀ G
                    if ng(a) {
                        let da = if ta {
                            gemm(val(b), tb, &g, true, 1.0)?
                        } else {
                            gemm(&g, false, val(b), !tb, 1.0)?
                        };
                        send(a, da, &mut adjoints)?;
                    }
                    if ng(b) {
                        let db = if tb {
                            gemm(&g, true, val(a), ta, 1.0)?
                        } else {
                            gemm(val(a), !ta, &g, false, 1.0)?
                        };
                        send(b, db, &mut adjoints)?;
                    }
                }
                Op::SpdInverse(m) => {
                    // Y = sym(M)⁻¹ ⇒ dM = −Y sym(G) Y
                    let inv = &node.value;
                    let gs = g.symmetrized();
                    let t = gemm(inv, false, &gs, false, 1.0)?;
                    let dm = gemm(&t, false, inv, false, -1.0)?;
                    send(m, dm, &mut adjoints)?;
                }
                Op::Add(a, b) => {
                    if ng(a) && ng(b) {
                        send(a, g.clone(), &mut adjoints)?;
                        send(b, g, &mut adjoints)?;
                    } else if ng(a) {
                        send(a, g, &mut adjoints)?;
                    } else {
                        send(b, g, &mut adjoints)?;
                    }
                }
                Op::Sub(a, b) => {
                    if ng(b) {
                        send(b, g.scale(-1.0), &mut adjoints)?;
                    }
                    if ng(a) {
                        send(a, g, &mut adjoints)?;
                    }
                }
                Op::Scale(x, s) => send(x, g.scale(s), &mut adjoints)?,
                Op::AddBias { x, bias } => {
                    if ng(bias) {
                        let cols = g.cols();
                        let mut db = vec![0.0; cols];
                        for row in g.data().chunks(cols) {
                            db.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                        }
                        send(bias, DenseMatrix::new(1, cols, db)?, &mut adjoints)?;
                    }
                    if ng(x) {
                        send(x, g, &mut adjoints)?;
                    }
                }
                Op::Sigmoid(x) => {
                    let d = g.zip_map(&node.value, "sigmoid", |gi, y| gi * y * (1.0 - y))?;
                    send(x, d, &mut adjoints)?;
                }
                Op::Relu(x) => {
                    let d = g.zip_map(val(x), "relu", |gi, xi| if xi > 0.0 { gi } else { 0.0 })?;
                    send(x, d, &mut adjoints)?;
                }
                Op::Dropout { x, mask } => send(x, g.hadamard(&mask)?, &mut adjoints)?,
                Op::HiddenLayer { x, w, bias, scale } => {
                    // out > 0 exactly where the unit is active and kept
                    let mut dz = g;
                    for (d, &o) in dz.data_mut().iter_mut().zip(node.value.data()) {
                        *d = if o > 0.0 { *d * scale } else { 0.0 };
                    }
                    if ng(bias) {
                        let cols = dz.cols();
                        let mut db = vec![0.0; cols];
                        for row in dz.data().chunks(cols) {
                            db.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                        }
                        send(bias, DenseMatrix::new(1, cols, db)?, &mut adjoints)?;
                    }
                    if ng(w) {
                        send(w, gemm(val(x), true, &dz, false, 1.0)?, &mut adjoints)?;
                    }
                    if ng(x) {
                        send(x, gemm(&dz, false, val(w), true, 1.0)?, &mut adjoints)?;
                    }
                }
                Op::ConcatColumns(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for p in parts {
                        let c = val(p).cols();
                        if ng(p) {
                            let mut d = Vec::with_capacity(rows * c);
                            for i in 0..rows {
                                d.extend_from_slice(&g.row(i)[offset..offset + c]);
                            }
                            send(p, DenseMatrix::new(rows, c, d)?, &mut adjoints)?;
                        }
                        offset += c;
                    }
                }
                Op::Reshape(x) => {
                    let (r, c) = val(x).shape();
                    send(x, g.reshaped(r, c)?, &mut adjoints)?;
                }
                Op::Sum(x) => {
                    let (r, c) = val(x).shape();
                    send(x, DenseMatrix::filled(r, c, g.get(0, 0)), &mut adjoints)?;
                }
                Op::Bce { scores, labels } => {
                    let upstream = g.get(0, 0);
                    let n = labels.len() as f64;
                    let d = val(scores).zip_map(&labels, "bce", |o, y| {
                        let o = o.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
                        upstream * (o - y) / (o * (1.0 - o)) / n
                    })?;
                    send(scores, d, &mut adjoints)?;
                }
            }
        }

        for (id, (r, c)) in leaves {
            if grads.get(id).is_none() {
                grads.0.insert(id, DenseMatrix::zeros(r, c));
            }
        }
        Ok(grads)
    }

    /// JSON listing of the recorded nodes, for debugging.
    pub fn dump_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let operands: Vec<usize> = n.op.operands().iter().map(|v| v.0).collect();
                let mut entry = serde_json::json!({
                    "id": i,
                    "op": n.op.name(),
                    "operands": operands,
                    "shape": [n.value.rows(), n.value.cols()],
                    "needs_grad": n.needs_grad,
                });
                if let Op::Param(id) = n.op {
                    entry["param"] = serde_json::json!(id.0);
                }
                entry
            })
            .collect();
        serde_json::json!({ "nodes": nodes })
    }
}

/// In place: optional ReLU, then inverted dropout. Each element is dropped
/// with probability `rate` (resolution 2⁻³²); survivors are scaled by
/// `1/(1 − rate)`. Draws come two per 64-bit output of a seeded
/// Xoshiro256++ stream, in element order.
fn relu_dropout_in_place(data: &mut [f64], relu: bool, rate: f64, seed: u64) {
    let floor = if relu { 0.0 } else { f64::NEG_INFINITY };
    if rate == 0.0 {
        data.iter_mut().for_each(|v| *v = v.max(floor));
        return;
    }
    let threshold = (rate * 4294967296.0) as u64;
    let scale = 1.0 / (1.0 - rate);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for pair in data.chunks_mut(2) {
        let bits = rng.next_u64();
        for (k, v) in pair.iter_mut().enumerate() {
            let draw = (bits >> (32 * k)) & 0xFFFF_FFFF;
            let factor = ((draw >= threshold) as u8) as f64 * scale;
            *v = v.max(floor) * factor;
        }
    }
}

fn send(v: Var, d: DenseMatrix, adjoints: &mut [Option<DenseMatrix>]) -> Result<()> {
    match &mut adjoints[v.0] {
        Some(acc) => acc.add_assign(&d),
        slot @ None => {
            *slot = Some(d);
            Ok(())
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn bce_value(scores: &DenseMatrix, labels: &DenseMatrix) -> f64 {
    let total: f64 = scores
        .data()
        .iter()
        .zip(labels.data())
        .map(|(o, y)| {
            let o = o.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            y * o.ln() + (1.0 - y) * (1.0 - o).ln()
        })
        .sum();
    -total / scores.len() as f64
}
