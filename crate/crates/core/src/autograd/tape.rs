//! Tape-based reverse-mode automatic differentiation over 2-D tensors.
//!
//! Every operation appends a node holding its output value and the ids of
//! its inputs. Because inputs always precede outputs, walking the node list
//! backwards from the loss is a valid reverse topological order and visits
//! each node once.
//!
//! Numerical guards: `exp` clamps its input at [`EXP_CLAMP`] and `log` clamps
//! its input below at [`LOG_FLOOR`]; the clamped region has zero gradient.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Inputs to `exp` above this are clamped.
pub const EXP_CLAMP: f64 = 80.0;
/// Inputs to `log` below this are clamped.
pub const LOG_FLOOR: f64 = 1e-30;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// `m x n` plus a broadcast `1 x n` row.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, T, T),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Abs(Var),
    /// Mean over rows of `-log softmax(logits)[target]`; keeps the softmax.
    SoftmaxCrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<T> },
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    /// Row gather from a table (embedding lookup).
    Gather(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    /// `n x 1` column to `n x n` matrix of `v[j] - v[k]`.
    PairwiseDiff(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar with respect to every node of the tape.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<[usize; 2]>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `v`; zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }

    /// Moves the gradient for `v` out, leaving nothing behind.
    pub fn take(&mut self, v: Var) -> Tensor<T> {
        self.grads[v.0].take().unwrap_or_else(|| {
            let [r, c] = self.shapes[v.0];
            Tensor::zeros(r, c)
        })
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, shape: [usize; 2], f: impl FnOnce(&mut [T])) {
    let g = slot.get_or_insert_with(|| Tensor::zeros(shape[0], shape[1]));
    f(g.data_mut());
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    fn zip(&mut self, a: Var, b: Var, what: &str, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        x.same_shape(y, what)?;
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let value = Tensor::new(x.rows(), x.cols(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |p, q| p * q, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(Error::Shape(format!(
                "add_row: {}x{} plus {}x{}",
                x.rows(),
                x.cols(),
                r.rows(),
                r.cols()
            )));
        }
        let cols = x.cols();
        let data = x.data().iter().enumerate().map(|(i, &p)| p + r.data()[i % cols]).collect();
        let value = Tensor::new(x.rows(), cols, data)?;
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(value, Op::AddRow(a, row), rg))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: T, shift: T) -> Var {
        let value = self.value(a).map(|x| scale * x + shift);
        let rg = self.rg(a);
        self.push(value, Op::Affine(a, scale, shift), rg)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.affine(a, s, T::zero())
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(a).map(f);
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let cap = T::of(EXP_CLAMP);
        self.unary(a, move |x| x.min(cap).exp(), Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let floor = T::of(LOG_FLOOR);
        self.unary(a, move |x| x.max(floor).ln(), Op::Log(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.abs(), Op::Abs(a))
    }

    /// Mean over rows of the softmax cross-entropy against integer targets.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        let (m, c) = (x.rows(), x.cols());
        if targets.len() != m {
            return Err(Error::Shape(format!("{} targets for {m} rows", targets.len())));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::Shape(format!("target class {t} out of {c}")));
        }
        let mut probs = vec![T::zero(); m * c];
        let mut loss = T::zero();
        for r in 0..m {
            let row = x.row(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for (p, &v) in probs[r * c..(r + 1) * c].iter_mut().zip(row) {
                *p = (v - max).exp();
                z += *p;
            }
            probs[r * c..(r + 1) * c].iter_mut().for_each(|p| *p /= z);
            loss += z.ln() + max - row[targets[r]];
        }
        let value = Tensor::scalar(loss / T::of_usize(m));
        let rg = self.rg(logits);
        Ok(self.push(value, Op::SoftmaxCrossEntropy { logits, targets: targets.to_vec(), probs }, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self
            .value(*parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?)
            .rows();
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::Shape("concat_cols: row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(rows, cols, data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.value(a);
        if start >= end || end > x.cols() {
            return Err(Error::Shape(format!("slice {start}..{end} of {} columns", x.cols())));
        }
        let mut data = Vec::with_capacity(x.rows() * (end - start));
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row(r)[start..end]);
        }
        let value = Tensor::new(x.rows(), end - start, data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::SliceCols(a, start), rg))
    }

    /// Rows of `table` selected by `indices`.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if let Some(&i) = indices.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::Shape(format!("row {i} of a {}-row table", t.rows())));
        }
        let mut data = Vec::with_capacity(indices.len() * t.cols());
        for &i in indices {
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor::new(indices.len(), t.cols(), data)?;
        let rg = self.rg(table);
        Ok(self.push(value, Op::Gather(table, indices.to_vec()), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let value = Tensor::scalar(x.sum() / T::of_usize(x.len()));
        let rg = self.rg(a);
        self.push(value, Op::Mean(a), rg)
    }

    pub fn pairwise_diff(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.cols() != 1 {
            return Err(Error::Shape(format!("pairwise_diff needs a column, got {}x{}", x.rows(), x.cols())));
        }
        let n = x.rows();
        let v = x.data();
        let value = Tensor::from_fn(n, n, |j, k| v[j] - v[k]);
        let rg = self.rg(a);
        Ok(self.push(value, Op::PairwiseDiff(a), rg))
    }

    /// Back-propagates from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            let [r, c] = self.shape(loss);
            return Err(Error::Shape(format!("loss must be scalar, got {r}x{c}")));
        }
        let shapes: Vec<[usize; 2]> = self.nodes.iter().map(|n| n.value.shape()).collect();
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &shapes, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, shapes: &[[usize; 2]], grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if self.rg(*a) {
                    // dA += dC * B^T
                    accumulate(&mut grads[a.0], shapes[a.0], |ga| {
                        T::gemm(m, n, k, T::one(), gd, n, 1, bv.data(), 1, n, T::one(), ga)
                    });
                }
                if self.rg(*b) {
                    // dB += A^T * dC
                    accumulate(&mut grads[b.0], shapes[b.0], |gb| {
                        T::gemm(k, m, n, T::one(), av.data(), 1, k, gd, n, 1, T::one(), gb)
                    });
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.rg(*v) {
                        accumulate(&mut grads[v.0], shapes[v.0], |d| {
                            d.iter_mut().zip(gd).for_each(|(d, &g)| *d += g)
                        });
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.rg(*a) {
                    accumulate(&mut grads[a.0], shapes[a.0], |d| d.iter_mut().zip(gd).for_each(|(d, &g)| *d += g));
                }
                if self.rg(*b) {
                    accumulate(&mut grads[b.0], shapes[b.0], |d| d.iter_mut().zip(gd).for_each(|(d, &g)| *d -= g));
                }
            }
            Op::AddRow(a, row) => {
                if self.rg(*a) {
                    accumulate(&mut grads[a.0], shapes[a.0], |d| d.iter_mut().zip(gd).for_each(|(d, &g)| *d += g));
                }
                if self.rg(*row) {
                    let cols = y.cols();
                    accumulate(&mut grads[row.0], shapes[row.0], |d| {
                        for (i, &g) in gd.iter().enumerate() {
                            d[i % cols] += g;
                        }
                    });
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if self.rg(*a) {
                    accumulate(&mut grads[a.0], shapes[a.0], |d| {
                        for i in 0..d.len() {
                            d[i] += gd[i] * bv[i];
                        }
                    });
                }
                if self.rg(*b) {
                    accumulate(&mut grads[b.0], shapes[b.0], |d| {
                        for i in 0..d.len() {
                            d[i] += gd[i] * av[i];
                        }
                    });
                }
            }
            Op::Affine(a, scale, _) => {
                let s = *scale;
                accumulate(&mut grads[a.0], shapes[a.0], |d| d.iter_mut().zip(gd).for_each(|(d, &g)| *d += s * g));
            }
            Op::Tanh(a) => {
                let yv = y.data();
                accumulate(&mut grads[a.0], shapes[a.0], |d| {
                    for i in 0..d.len() {
                        d[i] += gd[i] * (T::one() - yv[i] * yv[i]);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let yv = y.data();
                accumulate(&mut grads[a.0], shapes[a.0], |d| {
                    for i in 0..d.len() {
                        d[i] += gd[i] * yv[i] * (T::one() - yv[i]);
                    }
                });
            }
            Op::Exp(a) => {
                let (xv, yv) = (self.value(*a).data(), y.data());
                let cap = T::of(EXP_CLAMP);
                accumulate(&mut grads[a.0], shapes[a.0], |d| {
                    for i in 0..d.len() {
                        if xv[i] < cap {
                            d[i] += gd[i] * yv[i];
                        }
                    }
                });
            }
            Op::Log(a) => {
                let xv = self.value(*a).data();
                let floor = T::of(LOG_FLOOR);
                accumulate(&mut grads[a.0], shapes[a.0], |d| {
                    for i in 0..d.len() {
                        if xv[i] > floor {
                            d[i] += gd[i] / xv[i];
                        }
                    }
                });
            }
            Op::Abs(a) => {
                let xv = self.value(*a).data();
                accumulate(&mut grads[a.0], shapes[a.0], |d| {
                    for i in 0..d.len() {
                        let s = if xv[i] > T::zero() {
                            T::one()
                        } else if xv[i] < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        d[i] += gd[i] * s;
                    }
                });
            }
            Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                let [m, c] = shapes[logits.0];
                let scale = gd[0] / T::of_usize(m);
                accumulate(&mut grads[logits.0], shapes[logits.0], |d| {
                    for r in 0..m {
                        for k in 0..c {
                            d[r * c + k] += scale * probs[r * c + k];
                        }
                        d[r * c + targets[r]] -= scale;
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let cols = y.cols();
                let mut offset = 0;
                for p in parts {
                    let [rows, pc] = shapes[p.0];
                    if self.rg(*p) {
                        accumulate(&mut grads[p.0], shapes[p.0], |d| {
                            for r in 0..rows {
                                for c in 0..pc {
                                    d[r * pc + c] += gd[r * cols + offset + c];
                                }
                            }
                        });
                    }
                    offset += pc;
                }
            }
            Op::SliceCols(a, start) => {
                let [rows, cols] = shapes[a.0];
                let w = y.cols();
                accumulate(&mut grads[a.0], shapes[a.0], |d| {
                    for r in 0..rows {
                        let dst = &mut d[r * cols + start..r * cols + start + w];
                        dst.iter_mut().zip(&gd[r * w..(r + 1) * w]).for_each(|(d, &g)| *d += g);
                    }
                });
            }
            Op::Gather(table, indices) => {
                let cols = shapes[table.0][1];
                accumulate(&mut grads[table.0], shapes[table.0], |d| {
                    for (r, &i) in indices.iter().enumerate() {
                        for c in 0..cols {
                            d[i * cols + c] += gd[r * cols + c];
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let g0 = gd[0];
                accumulate(&mut grads[a.0], shapes[a.0], |d| d.iter_mut().for_each(|d| *d += g0));
            }
            Op::Mean(a) => {
                let [r, c] = shapes[a.0];
                let g0 = gd[0] / T::of_usize(r * c);
                accumulate(&mut grads[a.0], shapes[a.0], |d| d.iter_mut().for_each(|d| *d += g0));
            }
            Op::PairwiseDiff(a) => {
                let n = shapes[a.0][0];
                accumulate(&mut grads[a.0], shapes[a.0], |d| {
                    for j in 0..n {
                        for k in 0..n {
                            let g = gd[j * n + k];
                            d[j] += g;
                            d[k] -= g;
                        }
                    }
                });
            }
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
