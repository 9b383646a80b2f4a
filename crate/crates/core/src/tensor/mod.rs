//! Dense double-precision tensors and a reverse-mode differentiation tape.
//!
//! A [`Graph`] is built fresh for every forward pass. Trainable
//! parameters live in a [`ParamStore`] outside the graph; they enter a
//! graph through [`Graph::param`] and their gradients flow back through
//! [`Graph::accumulate_param_grads`]. Nodes are appended in evaluation
//! order, so the node list is already a topological order and backward is
//! a single reverse sweep.

mod gru;
mod optim;
mod params;

pub use gru::{BiGru, BiGruOutput, GruParams};
pub use optim::{clip_grad_norm, Adam, AdamConfig};
pub use params::{glorot_limit, ParamId, ParamStore};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) && !data.is_empty() {
            return Err(Error::InvalidTensor(format!("zero-sized dim in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Dot(Var, Var),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Slice(Var, usize),
    Row(Var, usize),
    Transpose(Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softmax(Var),
    LogSigmoid(Var),
    Sqrt(Var),
    NormalizeSum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Tape of primitive operations.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape.clone(),
        right: b.shape.clone(),
    }
}

fn add_into(dst: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    dst.get_or_insert_with(|| vec![0.0; len])
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward root with respect to `v`, if any
    /// flowed to it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// A constant input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A free input whose gradient is tracked (used for gradient checks).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Bring a stored parameter into the graph. Repeated calls return the
    /// same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param, true);
        self.params.push((id, v));
        v
    }

    /// Matrix product with 1-D operands treated as row (left) or column
    /// (right) vectors: `[m,k]x[k,n]`, `[m,k]x[k]`, `[k]x[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, k) = match av.ndim() {
            1 => (1, av.shape[0]),
            2 => (av.shape[0], av.shape[1]),
            _ => return Err(mismatch("matmul", av, bv)),
        };
        let (k2, n) = match bv.ndim() {
            1 => (bv.shape[0], 1),
            2 => (bv.shape[0], bv.shape[1]),
            _ => return Err(mismatch("matmul", av, bv)),
        };
        if k != k2 || (av.ndim() == 1 && bv.ndim() == 1) {
            return Err(mismatch("matmul", av, bv));
        }
        let mut out = vec![0.0; m * n];
        let (ad, bd) = (av.data(), bv.data());
        if n == 1 {
            for i in 0..m {
                let row = &ad[i * k..(i + 1) * k];
                out[i] = row.iter().zip(bd).map(|(x, y)| x * y).sum();
            }
        } else {
            for i in 0..m {
                let orow = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let a_ip = ad[i * k + p];
                    if a_ip == 0.0 {
                        continue;
                    }
                    let brow = &bd[p * n..(p + 1) * n];
                    for (o, b) in orow.iter_mut().zip(brow) {
                        *o += a_ip * b;
                    }
                }
            }
        }
        let shape = match (av.ndim(), bv.ndim()) {
            (2, 2) => vec![m, n],
            (2, 1) => vec![m],
            _ => vec![n],
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor { shape, data: out }, Op::MatMul(a, b), rg))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.shape != bv.shape {
            return Err(mismatch(name, av, bv));
        }
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor {
            shape: av.shape.clone(),
            data,
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let av = &self.nodes[a.0].value;
        let t = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().map(|&x| f(x)).collect(),
        };
        let rg = self.rg(a);
        self.push(t, op, rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, log_sigmoid, Op::LogSigmoid(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, f64::sqrt, Op::Sqrt(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.ndim() != 1 || av.shape != bv.shape {
            return Err(mismatch("dot", av, bv));
        }
        let d = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).sum();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(d), Op::Dot(a, b), rg))
    }

    /// Concatenate 1-D tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptySequence("concat"));
        }
        let mut data = Vec::new();
        for &p in parts {
            let v = &self.nodes[p.0].value;
            if v.ndim() != 1 {
                return Err(mismatch("concat", v, &self.nodes[parts[0].0].value));
            }
            data.extend_from_slice(&v.data);
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), rg))
    }

    /// Stack equal-length 1-D tensors into a `[T, d]` matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(Error::EmptySequence("stack"));
        };
        let d = self.nodes[first.0].value.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            let v = &self.nodes[r.0].value;
            if v.ndim() != 1 || v.len() != d {
                return Err(mismatch("stack", &self.nodes[first.0].value, v));
            }
            data.extend_from_slice(&v.data);
        }
        let rg = rows.iter().any(|&r| self.rg(r));
        let t = Tensor {
            shape: vec![rows.len(), d],
            data,
        };
        Ok(self.push(t, Op::Stack(rows.to_vec()), rg))
    }

    /// Contiguous sub-vector `a[start..start+len]` of a 1-D tensor.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.ndim() != 1 || start + len > av.len() || len == 0 {
            return Err(Error::ShapeMismatch {
                op: "slice",
                left: av.shape.clone(),
                right: vec![start, len],
            });
        }
        let t = Tensor::vector(av.data[start..start + len].to_vec());
        let rg = self.rg(a);
        Ok(self.push(t, Op::Slice(a, start), rg))
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.ndim() != 2 || i >= av.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "row",
                left: av.shape.clone(),
                right: vec![i],
            });
        }
        let t = Tensor::vector(av.row(i).to_vec());
        let rg = self.rg(a);
        Ok(self.push(t, Op::Row(a, i), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.ndim() != 2 {
            return Err(Error::ShapeMismatch {
                op: "transpose",
                left: av.shape.clone(),
                right: vec![],
            });
        }
        let (r, c) = (av.shape[0], av.shape[1]);
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = av.data[i * c + j];
            }
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor {
                shape: vec![c, r],
                data,
            },
            Op::Transpose(a),
            rg,
        ))
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.data.iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Mean of all elements, as a one-element tensor.
    pub fn mean(&mut self, a: Var) -> Var {
        let v = &self.nodes[a.0].value;
        let m = v.data.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    /// Column means of a `[T, d]` matrix.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.ndim() != 2 {
            return Err(Error::ShapeMismatch {
                op: "mean_rows",
                left: av.shape.clone(),
                right: vec![],
            });
        }
        let (t, d) = (av.shape[0], av.shape[1]);
        let mut out = vec![0.0; d];
        for i in 0..t {
            for (o, x) in out.iter_mut().zip(av.row(i)) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= t as f64;
        }
        let rg = self.rg(a);
        Ok(self.push(Tensor::vector(out), Op::MeanRows(a), rg))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.ndim() != 1 {
            return Err(Error::ShapeMismatch {
                op: "softmax",
                left: av.shape.clone(),
                right: vec![],
            });
        }
        let max = av.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut data: Vec<f64> = av.data.iter().map(|&x| (x - max).exp()).collect();
        let s: f64 = data.iter().sum();
        for d in &mut data {
            *d /= s;
        }
        let rg = self.rg(a);
        Ok(self.push(Tensor::vector(data), Op::Softmax(a), rg))
    }

    /// `a / sum(a)` for a 1-D tensor; fails when the sum is within 1e-9
    /// of zero.
    pub fn normalize_sum(&mut self, a: Var) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        let s: f64 = av.data.iter().sum();
        if s.abs() < 1e-9 {
            return Err(Error::DegenerateNormalizer(s));
        }
        let t = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().map(|x| x / s).collect(),
        };
        let rg = self.rg(a);
        Ok(self.push(t, Op::NormalizeSum(a), rg))
    }

    /// Reverse sweep from a one-element `root`. Any gradients left from a
    /// previous sweep are cleared first.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                left: self.nodes[root.0].value.shape.clone(),
                right: vec![1],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (node, g) in self.nodes.iter_mut().zip(grads.into_iter().chain(std::iter::repeat(None))) {
            node.grad = if node.requires_grad { g } else { None };
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let want = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k) = if av.ndim() == 1 { (1, av.shape[0]) } else { (av.shape[0], av.shape[1]) };
                let n = if bv.ndim() == 1 { 1 } else { bv.shape[1] };
                if want(*a) {
                    // dA = dC B^T
                    let ga = add_into(&mut grads[a.0], m * k);
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bv.data[p * n..(p + 1) * n];
                            let s: f64 = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                            ga[r * k + p] += s;
                        }
                    }
                }
                if want(*b) {
                    // dB = A^T dC
                    let gb = add_into(&mut grads[b.0], k * n);
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let a_rp = av.data[r * k + p];
                            if a_rp == 0.0 {
                                continue;
                            }
                            for (dst, x) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *dst += a_rp * x;
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if want(*a) {
                    let ga = add_into(&mut grads[a.0], g.len());
                    for (d, x) in ga.iter_mut().zip(g) {
                        *d += x;
                    }
                }
                if want(*b) {
                    let gb = add_into(&mut grads[b.0], g.len());
                    for (d, x) in gb.iter_mut().zip(g) {
                        *d += sign * x;
                    }
                }
            }
            Op::Mul(a, b) => {
                if want(*a) {
                    let bv = &val(*b).data;
                    let ga = add_into(&mut grads[a.0], g.len());
                    for ((d, x), y) in ga.iter_mut().zip(g).zip(bv) {
                        *d += x * y;
                    }
                }
                if want(*b) {
                    let av = &val(*a).data;
                    let gb = add_into(&mut grads[b.0], g.len());
                    for ((d, x), y) in gb.iter_mut().zip(g).zip(av) {
                        *d += x * y;
                    }
                }
            }
            Op::Scale(a, c) => {
                let ga = add_into(&mut grads[a.0], g.len());
                for (d, x) in ga.iter_mut().zip(g) {
                    *d += c * x;
                }
            }
            Op::Dot(a, b) => {
                if want(*a) {
                    let bv = &val(*b).data;
                    let ga = add_into(&mut grads[a.0], bv.len());
                    for (d, y) in ga.iter_mut().zip(bv) {
                        *d += g[0] * y;
                    }
                }
                if want(*b) {
                    let av = &val(*a).data;
                    let gb = add_into(&mut grads[b.0], av.len());
                    for (d, y) in gb.iter_mut().zip(av) {
                        *d += g[0] * y;
                    }
                }
            }
            Op::Concat(parts) | Op::Stack(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = val(*p).len();
                    if want(*p) {
                        let gp = add_into(&mut grads[p.0], len);
                        for (d, x) in gp.iter_mut().zip(&g[off..off + len]) {
                            *d += x;
                        }
                    }
                    off += len;
                }
            }
            Op::Slice(a, start) => {
                let len = val(*a).len();
                let ga = add_into(&mut grads[a.0], len);
                for (d, x) in ga[*start..*start + g.len()].iter_mut().zip(g) {
                    *d += x;
                }
            }
            Op::Row(a, r) => {
                let av = val(*a);
                let c = av.cols();
                let ga = add_into(&mut grads[a.0], av.len());
                for (d, x) in ga[r * c..(r + 1) * c].iter_mut().zip(g) {
                    *d += x;
                }
            }
            Op::Transpose(a) => {
                let av = val(*a);
                let (r, c) = (av.shape[0], av.shape[1]);
                let ga = add_into(&mut grads[a.0], r * c);
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] += g[j * r + i];
                    }
                }
            }
            Op::Sum(a) => {
                let len = val(*a).len();
                let ga = add_into(&mut grads[a.0], len);
                for d in ga.iter_mut() {
                    *d += g[0];
                }
            }
            Op::Mean(a) => {
                let len = val(*a).len();
                let ga = add_into(&mut grads[a.0], len);
                let s = g[0] / len as f64;
                for d in ga.iter_mut() {
                    *d += s;
                }
            }
            Op::MeanRows(a) => {
                let av = val(*a);
                let (t, d) = (av.shape[0], av.shape[1]);
                let ga = add_into(&mut grads[a.0], t * d);
                for r in 0..t {
                    for (dst, x) in ga[r * d..(r + 1) * d].iter_mut().zip(g) {
                        *dst += x / t as f64;
                    }
                }
            }
            Op::Sigmoid(a) => {
                let ga = add_into(&mut grads[a.0], g.len());
                for ((d, x), y) in ga.iter_mut().zip(g).zip(&out.data) {
                    *d += x * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let ga = add_into(&mut grads[a.0], g.len());
                for ((d, x), y) in ga.iter_mut().zip(g).zip(&out.data) {
                    *d += x * (1.0 - y * y);
                }
            }
            Op::Relu(a) => {
                let av = &val(*a).data;
                let ga = add_into(&mut grads[a.0], g.len());
                for ((d, x), inp) in ga.iter_mut().zip(g).zip(av) {
                    if *inp > 0.0 {
                        *d += x;
                    }
                }
            }
            Op::Softmax(a) => {
                let y = &out.data;
                let dot: f64 = g.iter().zip(y).map(|(x, y)| x * y).sum();
                let ga = add_into(&mut grads[a.0], g.len());
                for ((d, x), yi) in ga.iter_mut().zip(g).zip(y) {
                    *d += yi * (x - dot);
                }
            }
            Op::LogSigmoid(a) => {
                let av = &val(*a).data;
                let ga = add_into(&mut grads[a.0], g.len());
                for ((d, x), inp) in ga.iter_mut().zip(g).zip(av) {
                    *d += x * sigmoid(-inp);
                }
            }
            Op::Sqrt(a) => {
                let ga = add_into(&mut grads[a.0], g.len());
                for ((d, x), y) in ga.iter_mut().zip(g).zip(&out.data) {
                    // subgradient 0 at the origin
                    if *y > 0.0 {
                        *d += x * 0.5 / y;
                    }
                }
            }
            Op::NormalizeSum(a) => {
                let s: f64 = val(*a).data.iter().sum();
                let y = &out.data;
                let dot: f64 = g.iter().zip(y).map(|(x, y)| x * y).sum();
                let ga = add_into(&mut grads[a.0], g.len());
                for (d, x) in ga.iter_mut().zip(g) {
                    *d += (x - dot) / s;
                }
            }
        }
    }

    /// Add the gradients of all parameter nodes into the store.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for &(id, v) in &self.params {
            if let Some(g) = &self.nodes[v.0].grad {
                for (d, x) in store.grad_mut(id).iter_mut().zip(g) {
                    *d += x;
                }
            }
        }
    }
}

/// Plain-value helpers shared by modules that do not need a tape.
pub mod ops {
    pub fn sigmoid(x: f64) -> f64 {
        super::sigmoid(x)
    }

    pub fn log_sigmoid(x: f64) -> f64 {
        super::log_sigmoid(x)
    }

    pub fn softmax(xs: &[f64]) -> Vec<f64> {
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
        let s: f64 = out.iter().sum();
        for o in &mut out {
            *o /= s;
        }
        out
    }

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    /// Cosine similarity; 0 when either vector is zero.
    pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let d = norm(a) * norm(b);
        if d == 0.0 {
            0.0
        } else {
            dot(a, b) / d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![0.0; 3]));
        let y = g.softmax(x).unwrap();
        for &v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(0.0));
        let y = g.sigmoid(x);
        assert_eq!(g.value(y).item(), 0.5);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
    }

    #[test]
    fn matmul_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let x = g.constant(Tensor::vector(vec![1., 0., -1.]));
        let y = g.matmul(a, x).unwrap();
        assert_eq!(g.value(y).data(), &[-2.0, -2.0]);
        let r = g.constant(Tensor::vector(vec![1., 1.]));
        let z = g.matmul(r, a).unwrap();
        assert_eq!(g.value(z).data(), &[5.0, 7.0, 9.0]);
        let err = g.matmul(a, r).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2]"), "{msg}");
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::vector(vec![1.0; 3]));
        let b = g.constant(Tensor::vector(vec![1.0; 4]));
        match g.add(a, b) {
            Err(Error::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![3]);
                assert_eq!(right, vec![4]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn backward_twice_gives_same_gradient() {
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(vec![0.3, -0.2]));
        let y = g.mul(x, x).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        let first = g.grad(x).unwrap().to_vec();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), first.as_slice());
        assert_eq!(first, vec![0.6, -0.4]);
    }

    #[test]
    fn normalize_sum_rejects_zero_total() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![1.0, -1.0]));
        assert!(matches!(g.normalize_sum(x), Err(Error::DegenerateNormalizer(_))));
    }
}
