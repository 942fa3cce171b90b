//! Define-by-run tape for reverse-mode differentiation.
//!
//! Every op appends a node holding its forward value. `backward` walks the
//! tape once in reverse insertion order, which is a valid reverse topological
//! order because inputs always precede the nodes that consume them.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::tensor::{rows_cols, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Vec<f64>),
    AddConst(Var),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    Exp(Var),
    Ln(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    GatherRows { x: Var, rows: Vec<usize> },
    GatherCols { x: Var, index: Vec<usize> },
    Slice { x: Var, row0: usize, col0: usize },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    SumLastAxis(Var),
    Dot(Var, Var),
    BceWithLogits { z: Var, targets: Vec<f64> },
    SumSquares(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// Compute graph recorded while running a forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `C (+)= op(A) · op(B)` where `op(A)` is `m × k` and `op(B)` is `k × n`.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are checked above against the stated dimensions and
    // strides, so every access stays within the three buffers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf after `backward`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Resets every accumulated leaf gradient to zero.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                node.value.zero_grad();
            }
        }
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Free leaf that receives a gradient.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf bound to a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let mut value = store.tensor(id).clone();
        value.set_grad(None);
        let v = self.push(value, Op::Leaf, true);
        self.nodes[v.0].param = Some(id);
        self.params.insert(id, v);
        v
    }

    pub(crate) fn param_leaves(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.nodes.iter().filter_map(|n| n.param.map(|id| (id, &n.value)))
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad, param: None });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, left: sa.to_vec(), right: sb.to_vec() });
        }
        Ok(())
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let t = &self.nodes[x.0].value;
        let data = t.data().iter().map(|&v| f(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data).unwrap();
        let rg = self.rg(&[x]);
        self.push(out, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(ta.shape().to_vec(), data).unwrap();
        let rg = self.rg(&[a, b]);
        self.push(out, op, rg)
    }

    fn matrix_dims(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::Shape { op, left: s.to_vec(), right: vec![0, 0] });
        }
        Ok((s[0], s[1]))
    }

    /// `a · b` for `a: [m, k]`, `b: [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let name = if trans_b { "matmul_t" } else { "matmul" };
        let (m, k) = self.matrix_dims(name, a)?;
        let (br, bc) = self.matrix_dims(name, b)?;
        let (kb, n) = if trans_b { (bc, br) } else { (br, bc) };
        if k != kb {
            return Err(Error::Shape { op: name, left: self.shape(a).to_vec(), right: self.shape(b).to_vec() });
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), trans_b, &mut out, false);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul { a, b, trans_b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.binary(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.binary(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.binary(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// Adds a vector `b: [n]` to every row of `a: [.., n]`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, cols) = rows_cols(self.shape(a));
        if self.value(b).numel() != cols {
            return Err(Error::Shape { op: "add_row", left: self.shape(a).to_vec(), right: self.shape(b).to_vec() });
        }
        let bias = self.value(b).data();
        let data = self.value(a).data().iter().enumerate().map(|(i, &x)| x + bias[i % cols]).collect();
        let out = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::AddRow(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.unary(x, Op::Scale(x, s), |v| v * s)
    }

    /// Elementwise product with a constant tensor (e.g. a dropout mask).
    pub fn mul_const(&mut self, x: Var, factor: Vec<f64>) -> Result<Var> {
        if factor.len() != self.value(x).numel() {
            return Err(Error::Shape { op: "mul_const", left: self.shape(x).to_vec(), right: vec![factor.len()] });
        }
        let data = self.value(x).data().iter().zip(&factor).map(|(a, b)| a * b).collect();
        let out = Tensor::new(self.shape(x).to_vec(), data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::MulConst(x, factor), rg))
    }

    /// Elementwise sum with a constant tensor (e.g. an additive attention mask).
    pub fn add_const(&mut self, x: Var, bias: &[f64]) -> Result<Var> {
        if bias.len() != self.value(x).numel() {
            return Err(Error::Shape { op: "add_const", left: self.shape(x).to_vec(), right: vec![bias.len()] });
        }
        let data = self.value(x).data().iter().zip(bias).map(|(a, b)| a + b).collect();
        let out = Tensor::new(self.shape(x).to_vec(), data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::AddConst(x), rg))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Gelu(x), |v| 0.5 * v * (1.0 + (GELU_C * (v + GELU_A * v * v * v)).tanh()))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    /// Natural log; every input must be strictly positive.
    pub fn ln(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data().iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::Domain { op: "ln", detail: format!("non-positive input {bad}") });
        }
        Ok(self.unary(x, Op::Ln(x), f64::ln))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (rows, cols) = t.rows_cols();
        let mut out = t.data().to_vec();
        for r in 0..rows {
            let row = &mut out[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        let out = Tensor::new(t.shape().to_vec(), out).unwrap();
        let rg = self.rg(&[x]);
        self.push(out, Op::Softmax(x), rg)
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (rows, cols) = t.rows_cols();
        let mut out = t.data().to_vec();
        for r in 0..rows {
            let row = &mut out[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let out = Tensor::new(t.shape().to_vec(), out).unwrap();
        let rg = self.rg(&[x]);
        self.push(out, Op::LogSoftmax(x), rg)
    }

    /// Layer normalization over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (rows, cols) = rows_cols(self.shape(x));
        for p in [gamma, beta] {
            if self.value(p).numel() != cols {
                return Err(Error::Shape {
                    op: "layer_norm",
                    left: self.shape(x).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
        }
        let xd = self.value(x).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; rows * cols];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &xd[r * cols..(r + 1) * cols];
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let rs = 1.0 / (var + eps).sqrt();
            rstd[r] = rs;
            for c in 0..cols {
                let h = (row[c] - mean) * rs;
                xhat[r * cols + c] = h;
                out[r * cols + c] = h * g[c] + b[c];
            }
        }
        let out = Tensor::new(self.shape(x).to_vec(), out)?;
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, xhat, rstd }, rg))
    }

    /// Embedding lookup: rows of `table` selected by `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.gather_rows(table, ids)
    }

    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let (nrows, cols) = rows_cols(self.shape(x));
        if rows.is_empty() {
            return Err(Error::Contract("gather_rows with no rows".into()));
        }
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if r >= nrows {
                return Err(Error::Index { what: "gather_rows", index: r, bound: nrows });
            }
            out.extend_from_slice(&xd[r * cols..(r + 1) * cols]);
        }
        let out = Tensor::new(vec![rows.len(), cols], out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::GatherRows { x, rows: rows.to_vec() }, rg))
    }

    /// Per-row column gather: `out[r][c] = x[r][index[r * k + c]]`, output `[rows, k]`.
    pub fn gather_cols(&mut self, x: Var, index: &[usize], k: usize) -> Result<Var> {
        let (rows, cols) = rows_cols(self.shape(x));
        if k == 0 || index.len() != rows * k {
            return Err(Error::Shape { op: "gather_cols", left: self.shape(x).to_vec(), right: vec![index.len(), k] });
        }
        if let Some(&bad) = index.iter().find(|&&c| c >= cols) {
            return Err(Error::Index { what: "gather_cols", index: bad, bound: cols });
        }
        let xd = self.value(x).data();
        let out = index.iter().enumerate().map(|(i, &c)| xd[(i / k) * cols + c]).collect();
        let out = Tensor::new(vec![rows, k], out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::GatherCols { x, index: index.to_vec() }, rg))
    }

    /// Rectangular block `[row0, row0 + nrows) × [col0, col0 + ncols)`.
    pub fn slice(&mut self, x: Var, row0: usize, nrows: usize, col0: usize, ncols: usize) -> Result<Var> {
        let (rows, cols) = rows_cols(self.shape(x));
        if nrows == 0 || ncols == 0 || row0 + nrows > rows || col0 + ncols > cols {
            return Err(Error::Shape {
                op: "slice",
                left: self.shape(x).to_vec(),
                right: vec![row0 + nrows, col0 + ncols],
            });
        }
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(nrows * ncols);
        for r in row0..row0 + nrows {
            out.extend_from_slice(&xd[r * cols + col0..r * cols + col0 + ncols]);
        }
        let out = Tensor::new(vec![nrows, ncols], out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Slice { x, row0, col0 }, rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        let (_, cols) = rows_cols(self.shape(first));
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = rows_cols(self.shape(p));
            if c != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    left: self.shape(first).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::new(vec![rows, cols], out)?;
        let rg = self.rg(parts);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::Contract("concat_cols of nothing".into()))?;
        let (rows, _) = rows_cols(self.shape(first));
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = rows_cols(self.shape(p));
            if r != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    left: self.shape(first).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let out = Tensor::new(vec![rows, total], out)?;
        let rg = self.rg(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let out = Tensor::new(shape.to_vec(), t.data().to_vec()).map_err(|_| Error::Shape {
            op: "reshape",
            left: t.shape().to_vec(),
            right: shape.to_vec(),
        })?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Sum over the last axis: `[rows, cols] -> [rows]`.
    pub fn sum_last_axis(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (rows, cols) = t.rows_cols();
        let out = (0..rows).map(|r| t.data()[r * cols..(r + 1) * cols].iter().sum()).collect();
        let rg = self.rg(&[x]);
        self.push(Tensor::vector(out).unwrap(), Op::SumLastAxis(x), rg)
    }

    /// Inner product of two equally sized tensors, as a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).numel() != self.value(b).numel() {
            return Err(Error::Shape { op: "dot", left: self.shape(a).to_vec(), right: self.shape(b).to_vec() });
        }
        let s = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b), rg))
    }

    /// Elementwise binary cross-entropy of `sigmoid(z)` against `targets`,
    /// computed in the overflow-free form `max(z,0) - t z + ln(1 + e^{-|z|})`.
    pub fn bce_with_logits(&mut self, z: Var, targets: &[f64]) -> Result<Var> {
        if targets.len() != self.value(z).numel() {
            return Err(Error::Shape {
                op: "bce_with_logits",
                left: self.shape(z).to_vec(),
                right: vec![targets.len()],
            });
        }
        let data = self
            .value(z)
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &t)| z.max(0.0) - t * z + (-z.abs()).exp().ln_1p())
            .collect();
        let out = Tensor::new(self.shape(z).to_vec(), data)?;
        let rg = self.rg(&[z]);
        Ok(self.push(out, Op::BceWithLogits { z, targets: targets.to_vec() }, rg))
    }

    /// `Σ‖x‖²` over all listed tensors.
    pub fn sum_squares(&mut self, xs: &[Var]) -> Var {
        let s = xs.iter().flat_map(|&x| self.value(x).data().iter()).map(|v| v * v).sum();
        let rg = self.rg(xs);
        self.push(Tensor::scalar(s), Op::SumSquares(xs.to_vec()), rg)
    }

    /// Reverse pass from a scalar `loss`. Leaf gradients are accumulated, so
    /// two calls without `zero_grad` double them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!("backward needs a scalar loss, got shape {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        let mut leaf_grads = Vec::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.backprop_node(i, g, &mut grads, &mut leaf_grads);
        }
        for (i, g) in leaf_grads {
            self.nodes[i].value.accumulate_grad(&g);
        }
        Ok(())
    }

    fn backprop_node(
        &self,
        i: usize,
        g: Vec<f64>,
        grads: &mut [Option<Vec<f64>>],
        leaf_grads: &mut Vec<(usize, Vec<f64>)>,
    ) {
        let node = &self.nodes[i];
        let y = node.value.data();
        let nodes = &self.nodes;
        let xval = |v: Var| nodes[v.0].value.data();

        match &node.op {
            Op::Leaf => leaf_grads.push((i, g)),
            Op::MatMul { a, b, trans_b } => {
                let (m, k) = rows_cols(nodes[a.0].value.shape());
                let n = rows_cols(node.value.shape()).1;
                let (ad, bd) = (xval(*a), xval(*b));
                if let Some(ga) = slot(nodes, grads, *a) {
                    // dA = dC · op(B)ᵀ
                    gemm(m, n, k, &g, false, bd, !*trans_b, ga, true);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    if *trans_b {
                        // B is [n,k]: dB = dCᵀ · A
                        gemm(n, m, k, &g, true, ad, false, gb, true);
                    } else {
                        // B is [k,n]: dB = Aᵀ · dC
                        gemm(k, m, n, ad, true, &g, false, gb, true);
                    }
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, &g);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    add_into(gb, &g);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, &g);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    gb.iter_mut().zip(&g).for_each(|(x, d)| *x -= d);
                }
            }
            Op::AddRow(a, b) => {
                if let Some(ga) = slot(nodes, grads, *a) {
                    add_into(ga, &g);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    let cols = gb.len();
                    g.iter().enumerate().for_each(|(j, d)| gb[j % cols] += d);
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (xval(*a), xval(*b));
                if let Some(ga) = slot(nodes, grads, *a) {
                    for j in 0..g.len() {
                        ga[j] += g[j] * bd[j];
                    }
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    for j in 0..g.len() {
                        gb[j] += g[j] * ad[j];
                    }
                }
            }
            Op::Scale(x, s) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    gx.iter_mut().zip(&g).for_each(|(a, d)| *a += d * s);
                }
            }
            Op::MulConst(x, f) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    for j in 0..g.len() {
                        gx[j] += g[j] * f[j];
                    }
                }
            }
            Op::AddConst(x) | Op::Reshape(x) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    add_into(gx, &g);
                }
            }
            Op::Sigmoid(x) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    for j in 0..g.len() {
                        gx[j] += g[j] * y[j] * (1.0 - y[j]);
                    }
                }
            }
            Op::Tanh(x) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    for j in 0..g.len() {
                        gx[j] += g[j] * (1.0 - y[j] * y[j]);
                    }
                }
            }
            Op::Gelu(x) => {
                let xd = xval(*x);
                if let Some(gx) = slot(nodes, grads, *x) {
                    for j in 0..g.len() {
                        let v = xd[j];
                        let t = (GELU_C * (v + GELU_A * v * v * v)).tanh();
                        let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
                        gx[j] += g[j] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
                    }
                }
            }
            Op::Exp(x) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    for j in 0..g.len() {
                        gx[j] += g[j] * y[j];
                    }
                }
            }
            Op::Ln(x) => {
                let xd = xval(*x);
                if let Some(gx) = slot(nodes, grads, *x) {
                    for j in 0..g.len() {
                        gx[j] += g[j] / xd[j];
                    }
                }
            }
            Op::Softmax(x) => {
                let (rows, cols) = node.value.rows_cols();
                if let Some(gx) = slot(nodes, grads, *x) {
                    for r in 0..rows {
                        let s = r * cols..(r + 1) * cols;
                        let dot: f64 = g[s.clone()].iter().zip(&y[s.clone()]).map(|(a, b)| a * b).sum();
                        for j in s {
                            gx[j] += y[j] * (g[j] - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax(x) => {
                let (rows, cols) = node.value.rows_cols();
                if let Some(gx) = slot(nodes, grads, *x) {
                    for r in 0..rows {
                        let s = r * cols..(r + 1) * cols;
                        let total: f64 = g[s.clone()].iter().sum();
                        for j in s {
                            gx[j] += g[j] - y[j].exp() * total;
                        }
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let (rows, cols) = node.value.rows_cols();
                let gm = xval(*gamma);
                if let Some(gg) = slot(nodes, grads, *gamma) {
                    for j in 0..g.len() {
                        gg[j % cols] += g[j] * xhat[j];
                    }
                }
                if let Some(gb) = slot(nodes, grads, *beta) {
                    for j in 0..g.len() {
                        gb[j % cols] += g[j];
                    }
                }
                if let Some(gx) = slot(nodes, grads, *x) {
                    let mut dxhat = vec![0.0; cols];
                    for r in 0..rows {
                        let base = r * cols;
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for c in 0..cols {
                            let d = g[base + c] * gm[c];
                            dxhat[c] = d;
                            mean_d += d;
                            mean_dx += d * xhat[base + c];
                        }
                        mean_d /= cols as f64;
                        mean_dx /= cols as f64;
                        for c in 0..cols {
                            gx[base + c] += rstd[r] * (dxhat[c] - mean_d - xhat[base + c] * mean_dx);
                        }
                    }
                }
            }
            Op::GatherRows { x, rows } => {
                let cols = rows_cols(node.value.shape()).1;
                if let Some(gx) = slot(nodes, grads, *x) {
                    for (k, &r) in rows.iter().enumerate() {
                        add_into(&mut gx[r * cols..(r + 1) * cols], &g[k * cols..(k + 1) * cols]);
                    }
                }
            }
            Op::GatherCols { x, index } => {
                let k = rows_cols(node.value.shape()).1;
                let cols = rows_cols(nodes[x.0].value.shape()).1;
                if let Some(gx) = slot(nodes, grads, *x) {
                    for (j, &c) in index.iter().enumerate() {
                        gx[(j / k) * cols + c] += g[j];
                    }
                }
            }
            Op::Slice { x, row0, col0 } => {
                let (nr, nc) = rows_cols(node.value.shape());
                let cols = rows_cols(nodes[x.0].value.shape()).1;
                if let Some(gx) = slot(nodes, grads, *x) {
                    for r in 0..nr {
                        let dst = (row0 + r) * cols + col0;
                        add_into(&mut gx[dst..dst + nc], &g[r * nc..(r + 1) * nc]);
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = nodes[p.0].value.numel();
                    if let Some(gp) = slot(nodes, grads, p) {
                        add_into(gp, &g[off..off + n]);
                    }
                    off += n;
                }
            }
            Op::ConcatCols(parts) => {
                let (rows, total) = node.value.rows_cols();
                let mut col0 = 0;
                for &p in parts {
                    let w = rows_cols(nodes[p.0].value.shape()).1;
                    if let Some(gp) = slot(nodes, grads, p) {
                        for r in 0..rows {
                            add_into(&mut gp[r * w..(r + 1) * w], &g[r * total + col0..r * total + col0 + w]);
                        }
                    }
                    col0 += w;
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    gx.iter_mut().for_each(|a| *a += g[0]);
                }
            }
            Op::Mean(x) => {
                if let Some(gx) = slot(nodes, grads, *x) {
                    let d = g[0] / gx.len() as f64;
                    gx.iter_mut().for_each(|a| *a += d);
                }
            }
            Op::SumLastAxis(x) => {
                let cols = rows_cols(nodes[x.0].value.shape()).1;
                if let Some(gx) = slot(nodes, grads, *x) {
                    for (j, a) in gx.iter_mut().enumerate() {
                        *a += g[j / cols];
                    }
                }
            }
            Op::Dot(a, b) => {
                let (ad, bd) = (xval(*a), xval(*b));
                if let Some(ga) = slot(nodes, grads, *a) {
                    ga.iter_mut().zip(bd).for_each(|(x, v)| *x += g[0] * v);
                }
                if let Some(gb) = slot(nodes, grads, *b) {
                    gb.iter_mut().zip(ad).for_each(|(x, v)| *x += g[0] * v);
                }
            }
            Op::BceWithLogits { z, targets } => {
                let zd = xval(*z);
                if let Some(gz) = slot(nodes, grads, *z) {
                    for j in 0..g.len() {
                        gz[j] += g[j] * (sigmoid(zd[j]) - targets[j]);
                    }
                }
            }
            Op::SumSquares(xs) => {
                for &x in xs {
                    let xd = xval(x);
                    if let Some(gx) = slot(nodes, grads, x) {
                        gx.iter_mut().zip(xd).for_each(|(a, v)| *a += 2.0 * v * g[0]);
                    }
                }
            }
        }
    }
}

/// Lazily allocated gradient slot for an input; `None` if it needs no grad.
fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let n = nodes[v.0].value.numel();
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}
