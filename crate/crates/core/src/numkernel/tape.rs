//! Reverse-mode differentiation over a recorded list of primitive applications.
//!
//! Values are computed eagerly while the tape is built, so a model forward pass
//! is just a sequence of builder calls. The recorded operations can be replayed
//! against new leaf bindings with [`Tape::eval`], and differentiated with
//! [`Tape::grad`]. Nodes are appended in evaluation order, so the node list is
//! always topologically sorted.

use std::collections::HashMap;

use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Lower bound on the product of norms in cosine similarity.
pub const COSINE_EPS: f64 = 1e-12;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Clone, Debug)]
enum Op {
    /// Named leaf that must be bound on replay.
    Input(String),
    /// Named leaf whose recorded value is the default on replay.
    Param(String),
    Const,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// `[m,n] + [1,n]`, broadcast over rows.
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    MulConst(NodeId, Tensor),
    AddConst(NodeId, Tensor),
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    LayerNormRows {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    },
    Gelu(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Log(NodeId),
    Exp(NodeId),
    Gather(NodeId, Vec<usize>),
    MaskedMeanRows(NodeId, Vec<bool>),
    CosineSim(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
    ConcatCols(Vec<NodeId>),
    Sum(NodeId),
    Mean(NodeId),
    LogSumExp(NodeId),
    BceWithLogits(NodeId, Tensor),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Param(_) => "param",
            Op::Const => "const",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::MulConst(..) => "mul_const",
            Op::AddConst(..) => "add_const",
            Op::Transpose(_) => "transpose",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::LayerNormRows { .. } => "layer_norm_rows",
            Op::Gelu(_) => "gelu",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Log(_) => "log",
            Op::Exp(_) => "exp",
            Op::Gather(..) => "gather",
            Op::MaskedMeanRows(..) => "masked_mean_rows",
            Op::CosineSim(..) => "cosine_sim",
            Op::SliceCols(..) => "slice_cols",
            Op::ConcatCols(_) => "concat_cols",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::LogSumExp(_) => "logsumexp",
            Op::BceWithLogits(..) => "bce_with_logits",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded computation. See the module docs.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    outputs: Vec<(String, NodeId)>,
}

/// Gradients of one scalar output with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `node`; a zero tensor when the node does not influence the output.
    pub fn wrt(&self, node: NodeId) -> Tensor {
        match &self.grads[node] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[node]),
        }
    }

    pub fn take(&mut self, node: NodeId) -> Tensor {
        self.grads[node]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[node]))
    }
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::raw(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::raw(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

struct LayerNormStats {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm_stats(x: &Tensor, eps: f64) -> LayerNormStats {
    let (r, c) = (x.shape()[0], x.shape()[1]);
    let mut xhat = vec![0.0; r * c];
    let mut inv_std = vec![0.0; r];
    for i in 0..r {
        let row = x.row_slice(i);
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[i] = is;
        for j in 0..c {
            xhat[i * c + j] = (row[j] - mean) * is;
        }
    }
    LayerNormStats { xhat, inv_std }
}

fn cosine_parts(a: &[f64], b: &[f64]) -> (f64, f64, f64, f64, bool) {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    let d = (na2 * nb2).sqrt();
    if d < COSINE_EPS {
        (dot, na2, nb2, COSINE_EPS, true)
    } else {
        (dot, na2, nb2, d, false)
    }
}

/// Cosine similarity with the same guard the tape uses.
///
/// The denominator is `sqrt(|a|^2 |b|^2)`, which makes the similarity of a
/// nonzero vector with itself exactly 1.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (dot, _, _, d, _) = cosine_parts(a, b);
    dot / d
}

fn compute(op: &Op, v: &[Node]) -> Result<Tensor> {
    let val = |id: NodeId| &v[id].value;
    let out = match op {
        Op::Input(_) | Op::Param(_) | Op::Const => unreachable!("leaves are not computed"),
        Op::MatMul(a, b) => {
            let (m, k) = val(*a).dims2()?;
            let (k2, n) = val(*b).dims2()?;
            if k != k2 {
                return Err(Error::shape("matmul", format!("[{m},{k}] x [{k2},{n}]")));
            }
            Tensor::raw(vec![m, n], matmul(val(*a).data(), val(*b).data(), m, k, n))
        }
        Op::Add(a, b) => {
            check_same("add", val(*a), val(*b))?;
            zip(val(*a), val(*b), |x, y| x + y)
        }
        Op::Sub(a, b) => {
            check_same("sub", val(*a), val(*b))?;
            zip(val(*a), val(*b), |x, y| x - y)
        }
        Op::Mul(a, b) => {
            check_same("mul", val(*a), val(*b))?;
            zip(val(*a), val(*b), |x, y| x * y)
        }
        Op::AddRow(a, b) => {
            let (m, n) = val(*a).dims2()?;
            let (one, n2) = val(*b).dims2()?;
            if one != 1 || n != n2 {
                return Err(Error::shape("add_row", format!("[{m},{n}] + [{one},{n2}]")));
            }
            let bias = val(*b).data();
            let mut out = val(*a).data().to_vec();
            for row in out.chunks_mut(n) {
                for (o, bv) in row.iter_mut().zip(bias) {
                    *o += bv;
                }
            }
            Tensor::raw(vec![m, n], out)
        }
        Op::Scale(a, s) => map(val(*a), |x| x * s),
        Op::MulConst(a, c) => {
            check_same("mul_const", val(*a), c)?;
            zip(val(*a), c, |x, y| x * y)
        }
        Op::AddConst(a, c) => {
            check_same("add_const", val(*a), c)?;
            zip(val(*a), c, |x, y| x + y)
        }
        Op::Transpose(a) => {
            let (m, n) = val(*a).dims2()?;
            let d = val(*a).data();
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    out[j * m + i] = d[i * n + j];
                }
            }
            Tensor::raw(vec![n, m], out)
        }
        Op::SoftmaxRows(a) => {
            let (m, n) = val(*a).dims2()?;
            let mut out = val(*a).data().to_vec();
            for row in out.chunks_mut(n) {
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for x in row.iter_mut() {
                    *x = (*x - mx).exp();
                    s += *x;
                }
                for x in row.iter_mut() {
                    *x /= s;
                }
            }
            Tensor::raw(vec![m, n], out)
        }
        Op::LayerNormRows { x, gamma, beta, eps } => {
            let (m, n) = val(*x).dims2()?;
            let g = val(*gamma);
            let b = val(*beta);
            if g.shape() != [1, n] || b.shape() != [1, n] {
                return Err(Error::shape(
                    "layer_norm_rows",
                    format!("input [{m},{n}], gamma {:?}, beta {:?}", g.shape(), b.shape()),
                ));
            }
            let st = layer_norm_stats(val(*x), *eps);
            let mut out = st.xhat;
            for row in out.chunks_mut(n) {
                for ((r, &gj), &bj) in row.iter_mut().zip(g.data()).zip(b.data()) {
                    *r = *r * gj + bj;
                }
            }
            Tensor::raw(vec![m, n], out)
        }
        Op::Gelu(a) => map(val(*a), gelu),
        Op::Relu(a) => map(val(*a), |x| x.max(0.0)),
        Op::Sigmoid(a) => map(val(*a), sigmoid),
        Op::Log(a) => map(val(*a), f64::ln),
        Op::Exp(a) => map(val(*a), f64::exp),
        Op::Gather(t, idx) => {
            let (rows, n) = val(*t).dims2()?;
            if idx.is_empty() {
                return Err(Error::shape("gather", "empty index list"));
            }
            let mut out = Vec::with_capacity(idx.len() * n);
            for &i in idx {
                if i >= rows {
                    return Err(Error::shape("gather", format!("row {i} out of {rows}")));
                }
                out.extend_from_slice(val(*t).row_slice(i));
            }
            Tensor::raw(vec![idx.len(), n], out)
        }
        Op::MaskedMeanRows(a, mask) => {
            let (m, n) = val(*a).dims2()?;
            if mask.len() != m {
                return Err(Error::shape(
                    "masked_mean_rows",
                    format!("{m} rows, mask {}", mask.len()),
                ));
            }
            let count = mask.iter().filter(|&&k| k).count();
            if count == 0 {
                return Err(Error::shape("masked_mean_rows", "mask selects no rows"));
            }
            let mut out = vec![0.0; n];
            for (i, &keep) in mask.iter().enumerate() {
                if keep {
                    for (o, x) in out.iter_mut().zip(val(*a).row_slice(i)) {
                        *o += x;
                    }
                }
            }
            for o in &mut out {
                *o /= count as f64;
            }
            Tensor::raw(vec![1, n], out)
        }
        Op::CosineSim(a, b) => {
            check_same("cosine_sim", val(*a), val(*b))?;
            Tensor::scalar(cosine_similarity(val(*a).data(), val(*b).data()))
        }
        Op::SliceCols(a, start, len) => {
            let (m, n) = val(*a).dims2()?;
            if *len == 0 || start + len > n {
                return Err(Error::shape(
                    "slice_cols",
                    format!("[{start}, {start}+{len}) of {n} columns"),
                ));
            }
            let mut out = Vec::with_capacity(m * len);
            for i in 0..m {
                out.extend_from_slice(&val(*a).row_slice(i)[*start..start + len]);
            }
            Tensor::raw(vec![m, *len], out)
        }
        Op::ConcatCols(parts) => {
            if parts.is_empty() {
                return Err(Error::shape("concat_cols", "no parts"));
            }
            let m = val(parts[0]).dims2()?.0;
            let mut widths = Vec::with_capacity(parts.len());
            for &p in parts {
                let (r, c) = val(p).dims2()?;
                if r != m {
                    return Err(Error::shape("concat_cols", format!("row counts {m} and {r}")));
                }
                widths.push(c);
            }
            let total: usize = widths.iter().sum();
            let mut out = Vec::with_capacity(m * total);
            for i in 0..m {
                for &p in parts {
                    out.extend_from_slice(val(p).row_slice(i));
                }
            }
            Tensor::raw(vec![m, total], out)
        }
        Op::Sum(a) => Tensor::scalar(val(*a).data().iter().sum()),
        Op::Mean(a) => Tensor::scalar(val(*a).data().iter().sum::<f64>() / val(*a).len() as f64),
        Op::LogSumExp(a) => {
            let d = val(*a).data();
            let mx = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = d.iter().map(|x| (x - mx).exp()).sum();
            Tensor::scalar(mx + s.ln())
        }
        Op::BceWithLogits(a, targets) => {
            check_same("bce_with_logits", val(*a), targets)?;
            let n = targets.len() as f64;
            let s: f64 = val(*a)
                .data()
                .iter()
                .zip(targets.data())
                .map(|(&z, &y)| softplus(z) - y * z)
                .sum();
            Tensor::scalar(s / n)
        }
    };
    Ok(out)
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    fn leaf(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let value = compute(&op, &self.nodes)?;
        let id = self.nodes.len();
        if !value.is_finite() {
            return Err(Error::NonFinite {
                node: id,
                op: op.name(),
            });
        }
        self.nodes.push(Node { op, value });
        Ok(id)
    }

    pub fn input(&mut self, name: impl Into<String>, value: Tensor) -> NodeId {
        self.leaf(Op::Input(name.into()), value)
    }

    pub fn param(&mut self, name: impl Into<String>, value: Tensor) -> NodeId {
        self.leaf(Op::Param(name.into()), value)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(Op::Const, value)
    }

    /// Names a node so [`Tape::eval`] reports it.
    pub fn mark_output(&mut self, name: impl Into<String>, id: NodeId) {
        self.outputs.push((name.into(), id));
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMul(a, b))
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add(a, b))
    }
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        self.push(Op::AddRow(a, bias))
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Sub(a, b))
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul(a, b))
    }
    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        self.push(Op::Scale(a, s))
    }
    pub fn mul_const(&mut self, a: NodeId, c: Tensor) -> Result<NodeId> {
        self.push(Op::MulConst(a, c))
    }
    pub fn add_const(&mut self, a: NodeId, c: Tensor) -> Result<NodeId> {
        self.push(Op::AddConst(a, c))
    }
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Transpose(a))
    }
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::SoftmaxRows(a))
    }
    pub fn layer_norm_rows(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        self.push(Op::LayerNormRows { x, gamma, beta, eps })
    }
    pub fn gelu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Gelu(a))
    }
    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Relu(a))
    }
    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Sigmoid(a))
    }
    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Log(a))
    }
    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Exp(a))
    }
    /// Rows of `table` selected by `rows` (embedding lookup).
    pub fn gather(&mut self, table: NodeId, rows: Vec<usize>) -> Result<NodeId> {
        self.push(Op::Gather(table, rows))
    }
    /// Mean over the rows where `mask` is true, as a `[1, n]` row.
    pub fn masked_mean_rows(&mut self, a: NodeId, mask: Vec<bool>) -> Result<NodeId> {
        self.push(Op::MaskedMeanRows(a, mask))
    }
    pub fn cosine_sim(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::CosineSim(a, b))
    }
    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.push(Op::SliceCols(a, start, len))
    }
    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        self.push(Op::ConcatCols(parts))
    }
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Sum(a))
    }
    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Mean(a))
    }
    pub fn logsumexp(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::LogSumExp(a))
    }
    /// Mean binary cross-entropy of `sigmoid(logits)` against `targets`.
    pub fn bce_with_logits(&mut self, logits: NodeId, targets: Tensor) -> Result<NodeId> {
        self.push(Op::BceWithLogits(logits, targets))
    }

    /// Replays the recorded computation with new leaf values.
    ///
    /// Every `Input` leaf must be bound; `Param` leaves fall back to their
    /// recorded values. Returns the nodes named with [`Tape::mark_output`].
    pub fn eval(&self, bindings: &HashMap<String, Tensor>) -> Result<HashMap<String, Tensor>> {
        let mut replay: Vec<Node> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let value = match &node.op {
                Op::Input(name) => {
                    let v = bindings
                        .get(name)
                        .ok_or_else(|| Error::invalid(format!("input `{name}` is not bound")))?;
                    if v.shape() != node.value.shape() {
                        return Err(Error::shape(
                            "input",
                            format!(
                                "`{name}` recorded as {:?}, bound to {:?}",
                                node.value.shape(),
                                v.shape()
                            ),
                        ));
                    }
                    v.clone()
                }
                Op::Param(name) => match bindings.get(name) {
                    Some(v) if v.shape() != node.value.shape() => {
                        return Err(Error::shape(
                            "param",
                            format!(
                                "`{name}` recorded as {:?}, bound to {:?}",
                                node.value.shape(),
                                v.shape()
                            ),
                        ))
                    }
                    Some(v) => v.clone(),
                    None => node.value.clone(),
                },
                Op::Const => node.value.clone(),
                op => {
                    let v = compute(op, &replay)?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            node: id,
                            op: op.name(),
                        });
                    }
                    v
                }
            };
            replay.push(Node { op: Op::Const, value });
        }
        Ok(self
            .outputs
            .iter()
            .map(|(name, id)| (name.clone(), replay[*id].value.clone()))
            .collect())
    }

    /// Gradients of the scalar node `output` with respect to every node.
    pub fn grad(&self, output: NodeId) -> Result<Gradients> {
        let out = &self.nodes[output].value;
        if out.len() != 1 {
            return Err(Error::shape(
                "grad",
                format!("output must be scalar, got {:?}", out.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output] = Some(Tensor::filled(out.shape(), 1.0));
        for id in (0..=output).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.backward_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    /// Gradients for every named leaf, keyed by name.
    pub fn grad_named(&self, output: NodeId) -> Result<HashMap<String, Tensor>> {
        let g = self.grad(output)?;
        Ok(self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match &n.op {
                Op::Input(name) | Op::Param(name) => Some((name.clone(), g.wrt(id))),
                _ => None,
            })
            .collect())
    }

    fn backward_node(&self, id: NodeId, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let val = |i: NodeId| &self.nodes[i].value;
        match &node.op {
            Op::Input(_) | Op::Param(_) | Op::Const => {}
            Op::MatMul(a, b) => {
                let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                let n = val(*b).shape()[1];
                let ga = matmul_nt(g.data(), val(*b).data(), m, n, k);
                let gb = matmul_tn(val(*a).data(), g.data(), m, k, n);
                accumulate(&mut grads[*a], Tensor::raw(vec![m, k], ga));
                accumulate(&mut grads[*b], Tensor::raw(vec![k, n], gb));
            }
            Op::Add(a, b) => {
                accumulate(&mut grads[*a], g.clone());
                accumulate(&mut grads[*b], g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(&mut grads[*a], g.clone());
                accumulate(&mut grads[*b], map(g, |x| -x));
            }
            Op::Mul(a, b) => {
                accumulate(&mut grads[*a], zip(g, val(*b), |x, y| x * y));
                accumulate(&mut grads[*b], zip(g, val(*a), |x, y| x * y));
            }
            Op::AddRow(a, b) => {
                let n = g.shape()[1];
                let mut gb = vec![0.0; n];
                for row in g.data().chunks(n) {
                    for (o, x) in gb.iter_mut().zip(row) {
                        *o += x;
                    }
                }
                accumulate(&mut grads[*a], g.clone());
                accumulate(&mut grads[*b], Tensor::raw(vec![1, n], gb));
            }
            Op::Scale(a, s) => accumulate(&mut grads[*a], map(g, |x| x * s)),
            Op::MulConst(a, c) => accumulate(&mut grads[*a], zip(g, c, |x, y| x * y)),
            Op::AddConst(a, _) => accumulate(&mut grads[*a], g.clone()),
            Op::Transpose(a) => {
                let (m, n) = (g.shape()[0], g.shape()[1]);
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        out[j * m + i] = g.data()[i * n + j];
                    }
                }
                accumulate(&mut grads[*a], Tensor::raw(vec![n, m], out));
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let n = y.shape()[1];
                let mut out = vec![0.0; y.len()];
                for ((orow, yrow), grow) in out.chunks_mut(n).zip(y.data().chunks(n)).zip(g.data().chunks(n)) {
                    let dot: f64 = yrow.iter().zip(grow).map(|(p, q)| p * q).sum();
                    for j in 0..n {
                        orow[j] = yrow[j] * (grow[j] - dot);
                    }
                }
                accumulate(&mut grads[*a], Tensor::raw(y.shape().to_vec(), out));
            }
            Op::LayerNormRows { x, gamma, beta, eps } => {
                let xv = val(*x);
                let (m, n) = (xv.shape()[0], xv.shape()[1]);
                let st = layer_norm_stats(xv, *eps);
                let gam = val(*gamma).data();
                let mut dgamma = vec![0.0; n];
                let mut dbeta = vec![0.0; n];
                let mut dx = vec![0.0; m * n];
                for i in 0..m {
                    let grow = &g.data()[i * n..(i + 1) * n];
                    let xh = &st.xhat[i * n..(i + 1) * n];
                    let mut dxhat = vec![0.0; n];
                    for j in 0..n {
                        dgamma[j] += grow[j] * xh[j];
                        dbeta[j] += grow[j];
                        dxhat[j] = grow[j] * gam[j];
                    }
                    let mean_d = dxhat.iter().sum::<f64>() / n as f64;
                    let mean_dx = dxhat.iter().zip(xh).map(|(p, q)| p * q).sum::<f64>() / n as f64;
                    for j in 0..n {
                        dx[i * n + j] = st.inv_std[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
                    }
                }
                accumulate(&mut grads[*x], Tensor::raw(vec![m, n], dx));
                accumulate(&mut grads[*gamma], Tensor::raw(vec![1, n], dgamma));
                accumulate(&mut grads[*beta], Tensor::raw(vec![1, n], dbeta));
            }
            Op::Gelu(a) => accumulate(&mut grads[*a], zip(g, val(*a), |q, x| q * gelu_grad(x))),
            Op::Relu(a) => accumulate(&mut grads[*a], zip(g, val(*a), |q, x| if x > 0.0 { q } else { 0.0 })),
            Op::Sigmoid(a) => accumulate(&mut grads[*a], zip(g, &node.value, |q, s| q * s * (1.0 - s))),
            Op::Log(a) => accumulate(&mut grads[*a], zip(g, val(*a), |q, x| q / x)),
            Op::Exp(a) => accumulate(&mut grads[*a], zip(g, &node.value, |q, e| q * e)),
            Op::Gather(t, idx) => {
                let tv = val(*t);
                let n = tv.shape()[1];
                let mut out = vec![0.0; tv.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for j in 0..n {
                        out[i * n + j] += g.data()[r * n + j];
                    }
                }
                accumulate(&mut grads[*t], Tensor::raw(tv.shape().to_vec(), out));
            }
            Op::MaskedMeanRows(a, mask) => {
                let av = val(*a);
                let n = av.shape()[1];
                let count = mask.iter().filter(|&&k| k).count() as f64;
                let mut out = vec![0.0; av.len()];
                for (i, &keep) in mask.iter().enumerate() {
                    if keep {
                        for j in 0..n {
                            out[i * n + j] = g.data()[j] / count;
                        }
                    }
                }
                accumulate(&mut grads[*a], Tensor::raw(av.shape().to_vec(), out));
            }
            Op::CosineSim(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (dot, na2, nb2, d, clamped) = cosine_parts(av.data(), bv.data());
                let q = g.item();
                let (ga, gb): (Vec<f64>, Vec<f64>) = if clamped {
                    (
                        bv.data().iter().map(|y| q * y / d).collect(),
                        av.data().iter().map(|x| q * x / d).collect(),
                    )
                } else {
                    (
                        av.data()
                            .iter()
                            .zip(bv.data())
                            .map(|(x, y)| q * (y / d - dot * x / (na2 * d)))
                            .collect(),
                        av.data()
                            .iter()
                            .zip(bv.data())
                            .map(|(x, y)| q * (x / d - dot * y / (nb2 * d)))
                            .collect(),
                    )
                };
                accumulate(&mut grads[*a], Tensor::raw(av.shape().to_vec(), ga));
                accumulate(&mut grads[*b], Tensor::raw(bv.shape().to_vec(), gb));
            }
            Op::SliceCols(a, start, len) => {
                let av = val(*a);
                let (m, n) = (av.shape()[0], av.shape()[1]);
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    out[i * n + start..i * n + start + len].copy_from_slice(&g.data()[i * len..(i + 1) * len]);
                }
                accumulate(&mut grads[*a], Tensor::raw(vec![m, n], out));
            }
            Op::ConcatCols(parts) => {
                let m = g.shape()[0];
                let total = g.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let w = val(p).shape()[1];
                    let mut out = Vec::with_capacity(m * w);
                    for i in 0..m {
                        out.extend_from_slice(&g.data()[i * total + offset..i * total + offset + w]);
                    }
                    accumulate(&mut grads[p], Tensor::raw(vec![m, w], out));
                    offset += w;
                }
            }
            Op::Sum(a) => accumulate(&mut grads[*a], Tensor::filled(val(*a).shape(), g.item())),
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                accumulate(&mut grads[*a], Tensor::filled(val(*a).shape(), g.item() / n));
            }
            Op::LogSumExp(a) => {
                let lse = node.value.item();
                let q = g.item();
                accumulate(&mut grads[*a], map(val(*a), |x| q * (x - lse).exp()));
            }
            Op::BceWithLogits(a, targets) => {
                let n = targets.len() as f64;
                let q = g.item();
                accumulate(&mut grads[*a], zip(val(*a), targets, |z, y| q * (sigmoid(z) - y) / n));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_graph_replays_inputs() {
        let mut tape = Tape::new();
        let x = tape.input("x", t(1, 3, &[1.0, 2.0, 3.0]));
        tape.mark_output("y", x);
        let mut b = HashMap::new();
        b.insert("x".to_string(), t(1, 3, &[1.0, 2.0, 3.0]));
        assert_eq!(tape.eval(&b).unwrap()["y"].data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.input("x", t(1, 2, &[0.0, 0.0]));
        let y = tape.softmax_rows(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn matmul_by_ones_sums_rows() {
        let mut tape = Tape::new();
        let a = tape.input("a", t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = tape.input("b", t(2, 1, &[1.0, 1.0]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn square_derivative_at_three() {
        let mut tape = Tape::new();
        let x = tape.input("x", Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.grad(y).unwrap();
        assert_eq!(g.wrt(x).item(), 6.0);
    }

    #[test]
    fn disconnected_input_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.input("x", t(1, 2, &[1.0, 2.0]));
        let c = tape.constant(Tensor::scalar(5.0));
        let y = tape.scale(c, 2.0).unwrap();
        let g = tape.grad_named(y).unwrap();
        assert_eq!(g["x"].data(), &[0.0, 0.0]);
        let _ = x;
    }

    #[test]
    fn grad_rejects_non_scalar_output() {
        let mut tape = Tape::new();
        let x = tape.input("x", t(1, 2, &[1.0, 2.0]));
        assert!(matches!(tape.grad(x), Err(Error::Shape { .. })));
    }

    #[test]
    fn shape_errors_name_the_primitive() {
        let mut tape = Tape::new();
        let a = tape.input("a", t(2, 3, &[0.0; 6]));
        let b = tape.input("b", t(2, 3, &[0.0; 6]));
        match tape.matmul(a, b) {
            Err(Error::Shape { op, detail }) => {
                assert_eq!(op, "matmul");
                assert!(detail.contains("[2,3] x [2,3]"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_intermediate_names_the_node() {
        let mut tape = Tape::new();
        let x = tape.input("x", t(1, 1, &[0.0]));
        match tape.log(x) {
            Err(Error::NonFinite { node, op }) => {
                assert_eq!(node, 1);
                assert_eq!(op, "log");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eval_requires_bound_inputs_and_reports_replay_errors() {
        let mut tape = Tape::new();
        let x = tape.input("x", t(1, 1, &[2.0]));
        let y = tape.log(x).unwrap();
        tape.mark_output("y", y);
        assert!(tape.eval(&HashMap::new()).is_err());
        let mut b = HashMap::new();
        b.insert("x".to_string(), t(1, 1, &[-1.0]));
        assert!(matches!(tape.eval(&b), Err(Error::NonFinite { node: 1, .. })));
    }

    #[test]
    fn self_cosine_is_exactly_one() {
        for v in [vec![1e-3, 2.0, -7.5], vec![3.0, 4.0], vec![1e8, -1e-8, 0.5]] {
            assert_eq!(cosine_similarity(&v, &v), 1.0);
        }
    }
}
