//! Reverse-mode differentiation over a linear record of primitive ops.
//!
//! A [`Tape`] owns every intermediate value of one forward pass. Ops append
//! nodes and return [`Var`] handles; [`Tape::backward`] walks the record in
//! reverse and accumulates gradients on leaves. Parameter leaves remember the
//! name they were loaded from so a [`ParameterStore`] can collect their
//! gradients afterwards.

use std::rc::Rc;

use super::kernels;
use super::{ParameterStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Tanh,
    Relu,
    Sigmoid,
    Exp,
    Log,
    Neg,
    Scale(f32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Neg(Var),
    Scale(Var, f32),
    Reduce {
        x: Var,
        mean: bool,
        outer: usize,
        extent: usize,
        inner: usize,
    },
    SumAll(Var),
    MeanAll(Var),
    GatherRows {
        x: Var,
        indices: Vec<usize>,
    },
    ConcatRows(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
        end: usize,
    },
    Aggregate {
        x: Var,
        edges: Rc<[(usize, usize)]>,
        inv_degree: Option<Vec<f32>>,
    },
    LogSoftmax(Var),
    PickCols {
        x: Var,
        cols: Vec<usize>,
    },
    Clamp {
        x: Var,
        lo: f32,
        hi: f32,
    },
    Minimum(Var, Var),
    Maximum(Var, Var),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f32>,
    op: Op,
    requires_grad: bool,
    param: Option<String>,
    grad: Option<Vec<f32>>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Categorical distribution quantities derived from logits along the last axis.
#[derive(Debug, Clone, Copy)]
pub struct SoftmaxOutputs {
    pub probs: Var,
    pub log_probs: Var,
    /// One entry per row (a scalar for rank-1 logits).
    pub entropy: Var,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn acc(adj: &mut [Option<Vec<f32>>], v: Var, len: usize) -> &mut Vec<f32> {
    adj[v.0].get_or_insert_with(|| vec![0.0; len])
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

    /// Drops every recorded node.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f32>, op: Op, name: &'static str) -> Result<Var> {
        debug_assert_eq!(numel(&shape), value.len());
        if !kernels::all_finite(&value) {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::Minimum(a, b)
            | Op::Maximum(a, b) => self.rg(*a) || self.rg(*b),
            Op::Tanh(x)
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Exp(x)
            | Op::Log(x)
            | Op::Neg(x)
            | Op::Scale(x, _)
            | Op::SumAll(x)
            | Op::MeanAll(x)
            | Op::LogSoftmax(x)
            | Op::Reshape(x) => self.rg(*x),
            Op::Reduce { x, .. }
            | Op::GatherRows { x, .. }
            | Op::SliceCols { x, .. }
            | Op::Aggregate { x, .. }
            | Op::PickCols { x, .. }
            | Op::Clamp { x, .. } => self.rg(*x),
            Op::ConcatRows(xs) => xs.iter().any(|x| self.rg(*x)),
        };
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
            param: None,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    // ── leaves ──────────────────────────────────────────────────────────

    /// Records a leaf. Gradients are tracked when the tensor requires them.
    pub fn leaf(&mut self, tensor: &Tensor) -> Result<Var> {
        let v = self.push(tensor.shape().to_vec(), tensor.data().to_vec(), Op::Leaf, "leaf")?;
        if tensor.requires_grad() {
            let n = &mut self.nodes[v.0];
            n.requires_grad = true;
            n.grad = Some(vec![0.0; n.value.len()]);
        }
        Ok(v)
    }

    pub fn constant(&mut self, shape: impl Into<Vec<usize>>, data: Vec<f32>) -> Result<Var> {
        let shape = shape.into();
        if numel(&shape) != data.len() {
            return Err(Error::dim("constant", format!("shape {:?} vs {} values", shape, data.len())));
        }
        self.push(shape, data, Op::Leaf, "constant")
    }

    /// Loads a named parameter from the store as a gradient-tracking leaf.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var> {
        let t = store.get(name)?;
        let v = self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, "param")?;
        let n = &mut self.nodes[v.0];
        n.requires_grad = true;
        n.grad = Some(vec![0.0; n.value.len()]);
        n.param = Some(name.to_string());
        Ok(v)
    }

    pub fn value(&self, v: Var) -> &[f32] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn scalar_value(&self, v: Var) -> f32 {
        self.node(v).value[0]
    }

    /// Accumulated gradient of a leaf, if it tracks one.
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.node(v).grad.as_deref()
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape is consistent")
    }

    /// `(name, gradient)` for every parameter leaf on the tape.
    pub fn param_grads(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.nodes.iter().filter_map(|n| match (&n.param, &n.grad) {
            (Some(name), Some(g)) => Some((name.as_str(), g.as_slice())),
            _ => None,
        })
    }

    // ── linear algebra ──────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::dim("matmul", format!("{:?} · {:?}", sa, sb)));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        kernels::matmul(self.value(a), self.value(b), &mut out, m, k, n);
        self.push(vec![m, n], out, Op::MatMul(a, b), "matmul")
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sx.len() != 2 || sb.len() != 1 || sx[1] != sb[0] {
            return Err(Error::dim("add_row", format!("{:?} + {:?}", sx, sb)));
        }
        let n = sb[0];
        let b = self.value(bias);
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(n.max(1)) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let shape = sx.to_vec();
        self.push(shape, out, Op::AddRow(x, bias), "add_row")
    }

    // ── elementwise ─────────────────────────────────────────────────────

    pub fn elementwise(&mut self, op: Elementwise, inputs: &[Var]) -> Result<Var> {
        let arity = match op {
            Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::Contract(format!("{:?} takes {} operand(s), got {}", op, arity, inputs.len())));
        }
        match op {
            Elementwise::Add => self.add(inputs[0], inputs[1]),
            Elementwise::Sub => self.sub(inputs[0], inputs[1]),
            Elementwise::Mul => self.mul(inputs[0], inputs[1]),
            Elementwise::Tanh => self.tanh(inputs[0]),
            Elementwise::Relu => self.relu(inputs[0]),
            Elementwise::Sigmoid => self.sigmoid(inputs[0]),
            Elementwise::Exp => self.exp(inputs[0]),
            Elementwise::Log => self.log(inputs[0]),
            Elementwise::Neg => self.neg(inputs[0]),
            Elementwise::Scale(c) => self.scale(inputs[0], c),
        }
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f32, f32) -> f32,
        op: Op,
    ) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(name, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, out, op, name)
    }

    fn unary(&mut self, x: Var, name: &'static str, f: impl Fn(f32) -> f32, op: Op) -> Result<Var> {
        let out = self.value(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(shape, out, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "minimum", |x, y| if x <= y { x } else { y }, Op::Minimum(a, b))
    }

    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "maximum", |x, y| if x >= y { x } else { y }, Op::Maximum(a, b))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "tanh", f32::tanh, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "relu", |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "sigmoid", kernels::sigmoid, Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "exp", f32::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).iter().find(|&&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive input {}", bad),
            });
        }
        self.unary(x, "log", f32::ln, Op::Log(x))
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "neg", |v| -v, Op::Neg(x))
    }

    pub fn scale(&mut self, x: Var, c: f32) -> Result<Var> {
        self.unary(x, "scale", |v| v * c, Op::Scale(x, c))
    }

    pub fn clamp(&mut self, x: Var, lo: f32, hi: f32) -> Result<Var> {
        if lo > hi {
            return Err(Error::Contract(format!("clamp bounds {} > {}", lo, hi)));
        }
        self.unary(x, "clamp", |v| v.clamp(lo, hi), Op::Clamp { x, lo, hi })
    }

    // ── reductions and reshaping ────────────────────────────────────────

    /// Reduces along `axis`. Reducing an axis of extent zero yields zeros.
    pub fn reduce(&mut self, op: Reduction, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::dim("reduce", format!("axis {} for rank {}", axis, shape.len())));
        }
        let outer: usize = shape[..axis].iter().product();
        let extent = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mean = op == Reduction::Mean;
        let src = self.value(x);
        let mut out = vec![0.0f32; outer * inner];
        for o in 0..outer {
            for e in 0..extent {
                let base = (o * extent + e) * inner;
                for i in 0..inner {
                    out[o * inner + i] += src[base + i];
                }
            }
        }
        if mean && extent > 0 {
            let inv = 1.0 / extent as f32;
            out.iter_mut().for_each(|v| *v *= inv);
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        self.push(
            out_shape,
            out,
            Op::Reduce {
                x,
                mean,
                outer,
                extent,
                inner,
            },
            "reduce",
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: f32 = self.value(x).iter().sum();
        self.push(Vec::new(), vec![s], Op::SumAll(x), "sum")
    }

    /// Mean of every element; zero for an empty tensor.
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        let s: f32 = self.value(x).iter().sum();
        let m = if n == 0 { 0.0 } else { s / n as f32 };
        self.push(Vec::new(), vec![m], Op::MeanAll(x), "mean")
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let shape = shape.into();
        if numel(&shape) != self.value(x).len() {
            return Err(Error::dim("reshape", format!("{:?} -> {:?}", self.shape(x), shape)));
        }
        let v = self.value(x).to_vec();
        self.push(shape, v, Op::Reshape(x), "reshape")
    }

    fn row_len(&self, x: Var) -> Result<(usize, usize)> {
        let s = self.shape(x);
        if s.is_empty() {
            return Err(Error::dim("rows", "rank-0 tensor has no rows"));
        }
        Ok((s[0], s[1..].iter().product()))
    }

    /// Stacks the selected rows; duplicates are allowed.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let (rows, width) = self.row_len(x)?;
        let src = self.value(x);
        let mut out = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            if i >= rows {
                return Err(Error::Index {
                    op: "gather_rows",
                    index: i,
                    extent: rows,
                });
            }
            out.extend_from_slice(&src[i * width..(i + 1) * width]);
        }
        let mut shape = self.shape(x).to_vec();
        shape[0] = indices.len();
        self.push(
            shape,
            out,
            Op::GatherRows {
                x,
                indices: indices.to_vec(),
            },
            "gather_rows",
        )
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        let tail = self.shape(first)[1..].to_vec();
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[1..] != tail[..] {
                return Err(Error::dim("concat_rows", format!("{:?} vs trailing {:?}", s, tail)));
            }
            rows += s[0];
            out.extend_from_slice(self.value(p));
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        self.push(shape, out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || start > end || end > s[1] {
            return Err(Error::dim("slice_cols", format!("{:?}[:, {}..{}]", s, start, end)));
        }
        let (m, n) = (s[0], s[1]);
        let src = self.value(x);
        let mut out = Vec::with_capacity(m * (end - start));
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + end]);
        }
        self.push(vec![m, end - start], out, Op::SliceCols { x, start, end }, "slice_cols")
    }

    /// Neighborhood aggregation: row `dst` of the result reduces rows `src`
    /// over all edges `(src, dst)`. Rows without incoming edges are zero.
    pub fn aggregate(
        &mut self,
        x: Var,
        edges: Rc<[(usize, usize)]>,
        out_rows: usize,
        op: Reduction,
    ) -> Result<Var> {
        let (rows, width) = self.row_len(x)?;
        let src = self.value(x);
        let mut out = vec![0.0f32; out_rows * width];
        let mut degree = vec![0usize; out_rows];
        for &(s, d) in edges.iter() {
            if s >= rows {
                return Err(Error::Index {
                    op: "aggregate",
                    index: s,
                    extent: rows,
                });
            }
            if d >= out_rows {
                return Err(Error::Index {
                    op: "aggregate",
                    index: d,
                    extent: out_rows,
                });
            }
            degree[d] += 1;
            let (o, i) = (&mut out[d * width..(d + 1) * width], &src[s * width..(s + 1) * width]);
            for (a, &b) in o.iter_mut().zip(i) {
                *a += b;
            }
        }
        let inv_degree = (op == Reduction::Mean).then(|| {
            degree
                .iter()
                .map(|&k| if k == 0 { 0.0 } else { 1.0 / k as f32 })
                .collect::<Vec<_>>()
        });
        if let Some(inv) = &inv_degree {
            for (row, &s) in out.chunks_mut(width.max(1)).zip(inv) {
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
        let mut shape = self.shape(x).to_vec();
        shape[0] = out_rows;
        self.push(shape, out, Op::Aggregate { x, edges, inv_degree }, "aggregate")
    }

    /// Log-softmax along the last axis.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let width = *s.last().ok_or_else(|| Error::dim("log_softmax", "rank-0 input"))?;
        let mut out = vec![0.0; self.value(x).len()];
        if width > 0 {
            for (o, i) in out.chunks_mut(width).zip(self.value(x).chunks(width)) {
                kernels::log_softmax_row(i, o);
            }
        }
        self.push(s, out, Op::LogSoftmax(x), "log_softmax")
    }

    /// Picks `x[i, cols[i]]` from each row of an `m×n` matrix.
    pub fn pick_cols(&mut self, x: Var, cols: &[usize]) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 || s[0] != cols.len() {
            return Err(Error::dim("pick_cols", format!("{:?} with {} picks", s, cols.len())));
        }
        let n = s[1];
        let mut out = Vec::with_capacity(cols.len());
        for (i, &c) in cols.iter().enumerate() {
            if c >= n {
                return Err(Error::Index {
                    op: "pick_cols",
                    index: c,
                    extent: n,
                });
            }
            out.push(self.value(x)[i * n + c]);
        }
        self.push(
            vec![cols.len()],
            out,
            Op::PickCols {
                x,
                cols: cols.to_vec(),
            },
            "pick_cols",
        )
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Accumulates `∂loss/∂leaf` into every gradient-tracking leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.node(loss).value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f32>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            if matches!(self.nodes[idx].op, Op::Leaf) {
                if let Some(acc_grad) = self.nodes[idx].grad.as_mut() {
                    for (a, b) in acc_grad.iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                continue;
            }
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
                    let (m, k, n) = (sa[0], sa[1], sb[1]);
                    if self.rg(*a) {
                        let bv = &self.nodes[b.0].value;
                        kernels::matmul_nt_acc(&g, bv, acc(&mut adj, *a, m * k), m, k, n);
                    }
                    if self.rg(*b) {
                        let av = &self.nodes[a.0].value;
                        kernels::matmul_tn_acc(av, &g, acc(&mut adj, *b, k * n), m, k, n);
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    if self.rg(*a) {
                        let d = acc(&mut adj, *a, g.len());
                        d.iter_mut().zip(&g).for_each(|(x, &gv)| *x += gv);
                    }
                    if self.rg(*b) {
                        let d = acc(&mut adj, *b, g.len());
                        d.iter_mut().zip(&g).for_each(|(x, &gv)| *x += sign * gv);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        let bv = &self.nodes[b.0].value;
                        let d = acc(&mut adj, *a, g.len());
                        for i in 0..g.len() {
                            d[i] += g[i] * bv[i];
                        }
                    }
                    if self.rg(*b) {
                        let av = &self.nodes[a.0].value;
                        let d = acc(&mut adj, *b, g.len());
                        for i in 0..g.len() {
                            d[i] += g[i] * av[i];
                        }
                    }
                }
                Op::AddRow(x, bias) => {
                    if self.rg(*x) {
                        let d = acc(&mut adj, *x, g.len());
                        d.iter_mut().zip(&g).for_each(|(a, &gv)| *a += gv);
                    }
                    if self.rg(*bias) {
                        let n = self.nodes[bias.0].value.len();
                        let d = acc(&mut adj, *bias, n);
                        if n > 0 {
                            for row in g.chunks(n) {
                                d.iter_mut().zip(row).for_each(|(a, &gv)| *a += gv);
                            }
                        }
                    }
                }
                Op::Tanh(x) => {
                    let d = acc(&mut adj, *x, g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Sigmoid(x) => {
                    let d = acc(&mut adj, *x, g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Exp(x) => {
                    let d = acc(&mut adj, *x, g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] * y[i];
                    }
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    let d = acc(&mut adj, *x, g.len());
                    for i in 0..g.len() {
                        if xv[i] > 0.0 {
                            d[i] += g[i];
                        }
                    }
                }
                Op::Log(x) => {
                    let xv = &self.nodes[x.0].value;
                    let d = acc(&mut adj, *x, g.len());
                    for i in 0..g.len() {
                        d[i] += g[i] / xv[i];
                    }
                }
                Op::Neg(x) => {
                    let d = acc(&mut adj, *x, g.len());
                    d.iter_mut().zip(&g).for_each(|(a, &gv)| *a -= gv);
                }
                Op::Scale(x, c) => {
                    let d = acc(&mut adj, *x, g.len());
                    d.iter_mut().zip(&g).for_each(|(a, &gv)| *a += c * gv);
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = &self.nodes[x.0].value;
                    let d = acc(&mut adj, *x, g.len());
                    for i in 0..g.len() {
                        if xv[i] >= *lo && xv[i] <= *hi {
                            d[i] += g[i];
                        }
                    }
                }
                Op::Minimum(a, b) | Op::Maximum(a, b) => {
                    let is_min = matches!(node.op, Op::Minimum(..));
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let pick_a: Vec<bool> = av
                        .iter()
                        .zip(bv)
                        .map(|(&x, &y)| if is_min { x <= y } else { x >= y })
                        .collect();
                    if self.rg(*a) {
                        let d = acc(&mut adj, *a, g.len());
                        for i in 0..g.len() {
                            if pick_a[i] {
                                d[i] += g[i];
                            }
                        }
                    }
                    if self.rg(*b) {
                        let d = acc(&mut adj, *b, g.len());
                        for i in 0..g.len() {
                            if !pick_a[i] {
                                d[i] += g[i];
                            }
                        }
                    }
                }
                Op::Reduce {
                    x,
                    mean,
                    outer,
                    extent,
                    inner,
                } => {
                    let (outer, extent, inner) = (*outer, *extent, *inner);
                    let scale = if *mean && extent > 0 { 1.0 / extent as f32 } else { 1.0 };
                    let d = acc(&mut adj, *x, outer * extent * inner);
                    for o in 0..outer {
                        for e in 0..extent {
                            let base = (o * extent + e) * inner;
                            for i in 0..inner {
                                d[base + i] += scale * g[o * inner + i];
                            }
                        }
                    }
                }
                Op::SumAll(x) | Op::MeanAll(x) => {
                    let n = self.nodes[x.0].value.len();
                    let s = if matches!(node.op, Op::MeanAll(_)) && n > 0 {
                        g[0] / n as f32
                    } else {
                        g[0]
                    };
                    let d = acc(&mut adj, *x, n);
                    d.iter_mut().for_each(|v| *v += s);
                }
                Op::Reshape(x) => {
                    let d = acc(&mut adj, *x, g.len());
                    d.iter_mut().zip(&g).for_each(|(a, &gv)| *a += gv);
                }
                Op::GatherRows { x, indices } => {
                    let n = self.nodes[x.0].value.len();
                    let width = if indices.is_empty() { 0 } else { g.len() / indices.len() };
                    let d = acc(&mut adj, *x, n);
                    for (k, &i) in indices.iter().enumerate() {
                        let (dst, src) = (&mut d[i * width..(i + 1) * width], &g[k * width..(k + 1) * width]);
                        dst.iter_mut().zip(src).for_each(|(a, &gv)| *a += gv);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        if self.rg(*p) {
                            let d = acc(&mut adj, *p, n);
                            d.iter_mut()
                                .zip(&g[offset..offset + n])
                                .for_each(|(a, &gv)| *a += gv);
                        }
                        offset += n;
                    }
                }
                Op::SliceCols { x, start, end } => {
                    let s = &self.nodes[x.0].shape;
                    let (m, n) = (s[0], s[1]);
                    let w = end - start;
                    let d = acc(&mut adj, *x, m * n);
                    for i in 0..m {
                        let dst = &mut d[i * n + start..i * n + end];
                        dst.iter_mut()
                            .zip(&g[i * w..(i + 1) * w])
                            .for_each(|(a, &gv)| *a += gv);
                    }
                }
                Op::Aggregate { x, edges, inv_degree } => {
                    let n = self.nodes[x.0].value.len();
                    let rows = self.nodes[x.0].shape[0];
                    let width = n.checked_div(rows).unwrap_or(0);
                    let d = acc(&mut adj, *x, n);
                    for &(s, t) in edges.iter() {
                        let scale = inv_degree.as_ref().map_or(1.0, |inv| inv[t]);
                        let (dst, src) = (&mut d[s * width..(s + 1) * width], &g[t * width..(t + 1) * width]);
                        dst.iter_mut().zip(src).for_each(|(a, &gv)| *a += scale * gv);
                    }
                }
                Op::LogSoftmax(x) => {
                    let width = *node.shape.last().unwrap_or(&0);
                    let d = acc(&mut adj, *x, g.len());
                    if width > 0 {
                        for ((drow, grow), yrow) in d.chunks_mut(width).zip(g.chunks(width)).zip(y.chunks(width)) {
                            let gsum: f32 = grow.iter().sum();
                            for j in 0..width {
                                drow[j] += grow[j] - yrow[j].exp() * gsum;
                            }
                        }
                    }
                }
                Op::PickCols { x, cols } => {
                    let n = self.nodes[x.0].shape[1];
                    let total = self.nodes[x.0].value.len();
                    let d = acc(&mut adj, *x, total);
                    for (i, &c) in cols.iter().enumerate() {
                        d[i * n + c] += g[i];
                    }
                }
            }
        }
        Ok(())
    }
}

/// Probabilities, log-probabilities and entropy of the categorical
/// distribution defined by `logits` along its last axis.
pub fn softmax_logits_ops(tape: &mut Tape, logits: Var) -> Result<SoftmaxOutputs> {
    let rank = tape.shape(logits).len();
    if rank == 0 || rank > 2 {
        return Err(Error::dim("softmax_logits_ops", format!("rank {}", rank)));
    }
    let log_probs = tape.log_softmax(logits)?;
    let probs = tape.exp(log_probs)?;
    let plogp = tape.mul(probs, log_probs)?;
    let summed = tape.reduce(Reduction::Sum, plogp, rank - 1)?;
    let entropy = tape.neg(summed)?;
    Ok(SoftmaxOutputs {
        probs,
        log_probs,
        entropy,
    })
}
