//! Reverse-mode autodiff on an append-only tape.
//!
//! Every operation records one node holding its operands' ids and its forward
//! value. Node ids grow monotonically, so the recording order is already a
//! topological order and [`Tape::backward`] is a single reverse sweep that
//! visits each node exactly once. Replaying the same forward program therefore
//! produces bit-identical values and gradients.
//!
//! Shape misuse is a programming error and panics with both shapes in the
//! message; recoverable errors (I/O, malformed corpora) never originate here.

use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Probability floor used by [`Tape::cross_entropy`].
pub const CROSS_ENTROPY_FLOOR: f64 = 1e-12;

/// Handle to a tape node. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<S: Scalar> {
    Constant,
    Param,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    ConcatRows(usize, usize),
    StackColumns(Vec<usize>),
    SelectColumns { src: usize, indices: Vec<usize> },
    SelectElements { src: usize, indices: Vec<usize> },
    Reshape(usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Softmax(usize),
    CrossEntropy { probs: usize, gold: usize },
    Conv1d { input: usize, filters: usize, pad_left: usize },
    MaxPoolTime { src: usize, argmax: Vec<usize> },
    Sum(usize),
    Scale { src: usize, factor: S },
}

#[derive(Debug)]
struct Node<S: Scalar> {
    op: Op<S>,
    value: Tensor<S>,
}

/// Recording of one forward computation plus, after [`Tape::backward`], the
/// gradient of the loss with respect to every node.
#[derive(Debug)]
pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
    grads: Vec<Option<Tensor<S>>>,
    param_nodes: Vec<(usize, usize)>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), param_nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Gradient of the loss w.r.t. `v`; `None` if `v` did not influence the
    /// loss or `backward` has not run.
    pub fn grad(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// `(node, slot)` pairs for every leaf recorded via [`Tape::param`].
    pub fn param_nodes(&self) -> &[(usize, usize)] {
        &self.param_nodes
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(Op::Constant, value)
    }

    /// Leaf carrying a parameter value; `slot` identifies the parameter in
    /// whatever store the caller keeps, so gradients can be routed back.
    pub fn param(&mut self, value: Tensor<S>, slot: usize) -> Var {
        let v = self.push(Op::Param, value);
        self.param_nodes.push((v.0, slot));
        v
    }

    fn binary_elementwise(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(S, S) -> S,
        op: Op<S>,
    ) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(
            ta.shape(),
            tb.shape(),
            "{name}: shape mismatch {:?} vs {:?}",
            ta.shape(),
            tb.shape()
        );
        let data = ta
            .data()
            .iter()
            .zip(tb.data().iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data);
        self.push(op, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "add", |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "sub", |x, y| x - y, Op::Sub(a.0, b.0))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "mul", |x, y| x * y, Op::Mul(a.0, b.0))
    }

    /// Sum of several same-shape variables.
    pub fn add_n(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "add_n: empty operand list");
        let mut acc = vars[0];
        for &v in &vars[1..] {
            acc = self.add(acc, v);
        }
        acc
    }

    /// Arithmetic mean of several same-shape variables.
    pub fn mean_n(&mut self, vars: &[Var]) -> Var {
        let total = self.add_n(vars);
        self.scale(total, S::one() / S::from_usize_c(vars.len()))
    }

    /// `[m,k] x [k,n] -> [m,n]` or `[m,k] x [k] -> [m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.ndim(), 2, "matmul: lhs must be 2-d, got {:?}", ta.shape());
        let value = match tb.ndim() {
            2 => {
                assert_eq!(
                    ta.cols(),
                    tb.rows(),
                    "matmul: inner dims differ, {:?} x {:?}",
                    ta.shape(),
                    tb.shape()
                );
                mm_nn(ta, tb)
            }
            1 => {
                assert_eq!(
                    ta.cols(),
                    tb.numel(),
                    "matmul: inner dims differ, {:?} x {:?}",
                    ta.shape(),
                    tb.shape()
                );
                matvec(ta, tb)
            }
            _ => panic!("matmul: rhs must be 1-d or 2-d, got {:?}", tb.shape()),
        };
        self.push(Op::MatMul(a.0, b.0), value)
    }

    /// Concatenate two vectors: `[m] ++ [n] -> [m+n]`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.ndim(), 1, "concat_rows: lhs must be 1-d, got {:?}", ta.shape());
        assert_eq!(tb.ndim(), 1, "concat_rows: rhs must be 1-d, got {:?}", tb.shape());
        let mut data = Vec::with_capacity(ta.numel() + tb.numel());
        data.extend_from_slice(ta.data());
        data.extend_from_slice(tb.data());
        self.push(Op::ConcatRows(a.0, b.0), Tensor::vector(data))
    }

    /// Lay equal-length vectors side by side: `T x [d] -> [d, T]`.
    /// The same `Var` may appear more than once; its gradient accumulates.
    pub fn stack_columns(&mut self, columns: &[Var]) -> Var {
        assert!(!columns.is_empty(), "stack_columns: empty column list");
        let d = self.nodes[columns[0].0].value.numel();
        for &c in columns {
            let t = &self.nodes[c.0].value;
            assert_eq!(t.ndim(), 1, "stack_columns: column must be 1-d, got {:?}", t.shape());
            assert_eq!(
                t.numel(),
                d,
                "stack_columns: column lengths differ, {} vs {}",
                d,
                t.numel()
            );
        }
        let cols = columns.len();
        let mut out = Tensor::zeros(&[d, cols]);
        for (j, &c) in columns.iter().enumerate() {
            let src = self.nodes[c.0].value.data();
            for i in 0..d {
                out.set2(i, j, src[i]);
            }
        }
        self.push(Op::StackColumns(columns.iter().map(|v| v.0).collect()), out)
    }

    /// Gather columns of a `[d, n]` matrix: result is `[d, indices.len()]`.
    /// Repeated indices are allowed; gradients scatter-add into `src`.
    pub fn select_columns(&mut self, src: Var, indices: &[usize]) -> Var {
        let t = &self.nodes[src.0].value;
        assert_eq!(t.ndim(), 2, "select_columns: src must be 2-d, got {:?}", t.shape());
        assert!(!indices.is_empty(), "select_columns: empty index list");
        let (d, n) = (t.rows(), t.cols());
        for &ix in indices {
            assert!(ix < n, "select_columns: index {ix} out of range for {n} columns");
        }
        let mut out = Tensor::zeros(&[d, indices.len()]);
        for (j, &ix) in indices.iter().enumerate() {
            for i in 0..d {
                out.set2(i, j, t.at2(i, ix));
            }
        }
        self.push(Op::SelectColumns { src: src.0, indices: indices.to_vec() }, out)
    }

    /// Gather elements of a vector: result is `[indices.len()]`.
    /// Repeated indices are allowed; gradients scatter-add into `src`.
    pub fn select_elements(&mut self, src: Var, indices: &[usize]) -> Var {
        let t = &self.nodes[src.0].value;
        assert_eq!(t.ndim(), 1, "select_elements: src must be 1-d, got {:?}", t.shape());
        assert!(!indices.is_empty(), "select_elements: empty index list");
        let n = t.numel();
        for &ix in indices {
            assert!(ix < n, "select_elements: index {ix} out of range for length {n}");
        }
        let data = indices.iter().map(|&ix| t.data()[ix]).collect();
        self.push(
            Op::SelectElements { src: src.0, indices: indices.to_vec() },
            Tensor::vector(data),
        )
    }

    /// Reinterpret the data under a new shape with the same element count.
    /// Gradients pass through untouched.
    pub fn reshape(&mut self, src: Var, shape: &[usize]) -> Var {
        let t = &self.nodes[src.0].value;
        let numel: usize = shape.iter().product();
        assert_eq!(
            t.numel(),
            numel,
            "reshape: {:?} has {} elements, target {:?} wants {}",
            t.shape(),
            t.numel(),
            shape,
            numel
        );
        let value = Tensor::new(shape.to_vec(), t.data().to_vec());
        self.push(Op::Reshape(src.0), value)
    }

    fn unary_elementwise(&mut self, x: Var, f: impl Fn(S) -> S, op: Op<S>) -> Var {
        let value = self.nodes[x.0].value.map(f);
        self.push(op, value)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary_elementwise(x, |v| S::one() / (S::one() + (-v).exp()), Op::Sigmoid(x.0))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary_elementwise(x, |v| v.tanh(), Op::Tanh(x.0))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary_elementwise(
            x,
            |v| if v > S::zero() { v } else { S::zero() },
            Op::Relu(x.0),
        )
    }

    /// Numerically stable softmax of a vector (max subtracted before exp).
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = &self.nodes[x.0].value;
        assert_eq!(t.ndim(), 1, "softmax: input must be 1-d, got {:?}", t.shape());
        assert!(t.numel() > 0, "softmax: empty input");
        let m = t.data().iter().fold(t.data()[0], |m, &v| if v > m { v } else { m });
        let exps: Vec<S> = t.data().iter().map(|&v| (v - m).exp()).collect();
        let z = exps.iter().fold(S::zero(), |a, &e| a + e);
        let value = Tensor::vector(exps.into_iter().map(|e| e / z).collect());
        self.push(Op::Softmax(x.0), value)
    }

    /// `-ln(max(probs[gold], 1e-12))` as a scalar node.
    pub fn cross_entropy(&mut self, probs: Var, gold: usize) -> Var {
        let t = &self.nodes[probs.0].value;
        assert_eq!(t.ndim(), 1, "cross_entropy: probs must be 1-d, got {:?}", t.shape());
        assert!(
            gold < t.numel(),
            "cross_entropy: gold index {gold} out of range for {} classes",
            t.numel()
        );
        let floor = S::c(CROSS_ENTROPY_FLOOR);
        let p = t.data()[gold];
        let clamped = if p > floor { p } else { floor };
        let value = Tensor::scalar(-clamped.ln());
        self.push(Op::CrossEntropy { probs: probs.0, gold }, value)
    }

    /// 1-d convolution over the time axis with "same" zero padding.
    ///
    /// `input` is `[c, t]` (one channel per row), `filters` is `[f, c, w]`.
    /// Output is `[f, t]`. Padding splits the `w - 1` implicit zeros as
    /// `floor((w-1)/2)` on the left and the remainder on the right.
    pub fn conv1d(&mut self, input: Var, filters: Var) -> Var {
        let (tx, tf) = (&self.nodes[input.0].value, &self.nodes[filters.0].value);
        assert_eq!(tx.ndim(), 2, "conv1d: input must be 2-d, got {:?}", tx.shape());
        assert_eq!(tf.ndim(), 3, "conv1d: filters must be 3-d, got {:?}", tf.shape());
        let (c, t) = (tx.shape()[0], tx.shape()[1]);
        let (nf, fc, w) = (tf.shape()[0], tf.shape()[1], tf.shape()[2]);
        assert_eq!(
            fc, c,
            "conv1d: channel mismatch, input {:?} vs filters {:?}",
            tx.shape(),
            tf.shape()
        );
        assert!(w >= 1, "conv1d: filter width must be >= 1");
        let pad_left = (w - 1) / 2;
        let mut out = Tensor::zeros(&[nf, t]);
        // Accumulate one shifted row per (filter, channel, offset): the input
        // column at output step s is s + k - pad_left, clipped to [0, t).
        let (xd, fd) = (tx.data(), tf.data());
        for f in 0..nf {
            let out_row = &mut out.data_mut()[f * t..(f + 1) * t];
            for ch in 0..c {
                let x_row = &xd[ch * t..(ch + 1) * t];
                let f_base = (f * c + ch) * w;
                for k in 0..w {
                    let fv = fd[f_base + k];
                    if fv == S::zero() {
                        continue;
                    }
                    let shift = k as isize - pad_left as isize;
                    let lo = (-shift).max(0) as usize;
                    let hi = (t as isize - shift).clamp(0, t as isize) as usize;
                    if lo >= hi {
                        continue;
                    }
                    let src = ((lo as isize) + shift) as usize;
                    axpy(fv, &x_row[src..src + (hi - lo)], &mut out_row[lo..hi]);
                }
            }
        }
        self.push(Op::Conv1d { input: input.0, filters: filters.0, pad_left }, out)
    }

    /// Max over the time axis of a `[d, t]` matrix, yielding `[d]`.
    /// Ties resolve to the earliest time step.
    pub fn maxpool_time(&mut self, x: Var) -> Var {
        let t = &self.nodes[x.0].value;
        assert_eq!(t.ndim(), 2, "maxpool_time: input must be 2-d, got {:?}", t.shape());
        let (d, steps) = (t.rows(), t.cols());
        assert!(steps >= 1, "maxpool_time: empty time axis");
        let mut vals = Vec::with_capacity(d);
        let mut argmax = Vec::with_capacity(d);
        for i in 0..d {
            let mut best = t.at2(i, 0);
            let mut best_j = 0;
            for j in 1..steps {
                let v = t.at2(i, j);
                if v > best {
                    best = v;
                    best_j = j;
                }
            }
            vals.push(best);
            argmax.push(best_j);
        }
        self.push(Op::MaxPoolTime { src: x.0, argmax }, Tensor::vector(vals))
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.nodes[x.0].value.data().iter().fold(S::zero(), |a, &v| a + v);
        self.push(Op::Sum(x.0), Tensor::scalar(total))
    }

    /// Multiply every element by a compile-time constant factor.
    pub fn scale(&mut self, x: Var, factor: S) -> Var {
        let value = self.nodes[x.0].value.map(|v| v * factor);
        self.push(Op::Scale { src: x.0, factor }, value)
    }

    /// Reverse sweep from a scalar `loss`. Seeds `d loss / d loss = 1` and
    /// visits nodes in strictly decreasing id order, so every node's gradient
    /// is complete before it is propagated to its operands.
    pub fn backward(&mut self, loss: Var) {
        let lt = &self.nodes[loss.0].value;
        assert!(
            lt.numel() == 1,
            "backward: loss must be scalar, got shape {:?}",
            lt.shape()
        );
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(Tensor::scalar(S::one()));

        for id in (0..self.nodes.len()).rev() {
            let g = match &self.grads[id] {
                Some(t) => t.clone(),
                None => continue,
            };
            let op = self.nodes[id].op.clone();
            match op {
                Op::Constant | Op::Param => {}
                Op::Add(a, b) => {
                    self.accumulate(a, &g);
                    self.accumulate(b, &g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(a, &g);
                    let neg = g.map(|v| -v);
                    self.accumulate(b, &neg);
                }
                Op::Mul(a, b) => {
                    let da = elementwise(&g, &self.nodes[b].value, |gv, bv| gv * bv);
                    let db = elementwise(&g, &self.nodes[a].value, |gv, av| gv * av);
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::MatMul(a, b) => {
                    let ta = self.nodes[a].value.clone();
                    let tb = self.nodes[b].value.clone();
                    if tb.ndim() == 2 {
                        let da = mm_nt(&g, &tb);
                        let db = mm_tn(&ta, &g);
                        self.accumulate(a, &da);
                        self.accumulate(b, &db);
                    } else {
                        let da = outer(&g, &tb);
                        let db = tmatvec(&ta, &g);
                        self.accumulate(a, &da);
                        self.accumulate(b, &db);
                    }
                }
                Op::ConcatRows(a, b) => {
                    let na = self.nodes[a].value.numel();
                    let da = Tensor::vector(g.data()[..na].to_vec());
                    let db = Tensor::vector(g.data()[na..].to_vec());
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::StackColumns(cols) => {
                    let d = g.rows();
                    for (j, &c) in cols.iter().enumerate() {
                        let col = Tensor::vector((0..d).map(|i| g.at2(i, j)).collect());
                        self.accumulate(c, &col);
                    }
                }
                Op::SelectColumns { src, indices } => {
                    let shape = self.nodes[src].value.shape().to_vec();
                    let slot = self.slot(src, &shape);
                    let d = shape[0];
                    for (j, &ix) in indices.iter().enumerate() {
                        for i in 0..d {
                            let v = slot.at2(i, ix) + g.at2(i, j);
                            slot.set2(i, ix, v);
                        }
                    }
                }
                Op::SelectElements { src, indices } => {
                    let shape = self.nodes[src].value.shape().to_vec();
                    let slot = self.slot(src, &shape);
                    for (j, &ix) in indices.iter().enumerate() {
                        slot.data_mut()[ix] += g.data()[j];
                    }
                }
                Op::Reshape(src) => {
                    let shape = self.nodes[src].value.shape().to_vec();
                    let back = Tensor::new(shape, g.data().to_vec());
                    self.accumulate(src, &back);
                }
                Op::Sigmoid(x) => {
                    let y = &self.nodes[id].value;
                    let dx = elementwise(&g, y, |gv, yv| gv * yv * (S::one() - yv));
                    self.accumulate(x, &dx);
                }
                Op::Tanh(x) => {
                    let y = &self.nodes[id].value;
                    let dx = elementwise(&g, y, |gv, yv| gv * (S::one() - yv * yv));
                    self.accumulate(x, &dx);
                }
                Op::Relu(x) => {
                    let input = &self.nodes[x].value;
                    let dx = elementwise(&g, input, |gv, xv| {
                        if xv > S::zero() {
                            gv
                        } else {
                            S::zero()
                        }
                    });
                    self.accumulate(x, &dx);
                }
                Op::Softmax(x) => {
                    // dx_j = y_j * (g_j - sum_k g_k y_k)
                    let y = self.nodes[id].value.clone();
                    let dot = g
                        .data()
                        .iter()
                        .zip(y.data().iter())
                        .fold(S::zero(), |a, (&gv, &yv)| a + gv * yv);
                    let dx = elementwise(&g, &y, |gv, yv| yv * (gv - dot));
                    self.accumulate(x, &dx);
                }
                Op::CrossEntropy { probs, gold } => {
                    let p = self.nodes[probs].value.data()[gold];
                    let floor = S::c(CROSS_ENTROPY_FLOOR);
                    let n = self.nodes[probs].value.numel();
                    let mut dp = Tensor::zeros(&[n]);
                    // Below the floor the loss is the constant -ln(floor).
                    if p > floor {
                        dp.data_mut()[gold] = -g.item() / p;
                    }
                    self.accumulate(probs, &dp);
                }
                Op::Conv1d { input, filters, pad_left } => {
                    let tx = self.nodes[input].value.clone();
                    let tf = self.nodes[filters].value.clone();
                    let (c, t) = (tx.shape()[0], tx.shape()[1]);
                    let (nf, w) = (tf.shape()[0], tf.shape()[2]);

                    let in_shape = tx.shape().to_vec();
                    let dx = self.slot(input, &in_shape);
                    for f in 0..nf {
                        for s in 0..t {
                            let gv = g.at2(f, s);
                            if gv == S::zero() {
                                continue;
                            }
                            for ch in 0..c {
                                for k in 0..w {
                                    let pos = s + k;
                                    if pos < pad_left || pos - pad_left >= t {
                                        continue;
                                    }
                                    let fv = tf.data()[(f * c + ch) * w + k];
                                    let i = ch * t + (pos - pad_left);
                                    dx.data_mut()[i] += gv * fv;
                                }
                            }
                        }
                    }

                    let f_shape = tf.shape().to_vec();
                    let df = self.slot(filters, &f_shape);
                    for f in 0..nf {
                        for s in 0..t {
                            let gv = g.at2(f, s);
                            if gv == S::zero() {
                                continue;
                            }
                            for ch in 0..c {
                                for k in 0..w {
                                    let pos = s + k;
                                    if pos < pad_left || pos - pad_left >= t {
                                        continue;
                                    }
                                    let x = tx.at2(ch, pos - pad_left);
                                    df.data_mut()[(f * c + ch) * w + k] += gv * x;
                                }
                            }
                        }
                    }
                }
                Op::MaxPoolTime { src, argmax } => {
                    let shape = self.nodes[src].value.shape().to_vec();
                    let slot = self.slot(src, &shape);
                    for (i, &j) in argmax.iter().enumerate() {
                        let v = slot.at2(i, j) + g.data()[i];
                        slot.set2(i, j, v);
                    }
                }
                Op::Sum(x) => {
                    let shape = self.nodes[x].value.shape().to_vec();
                    let dx = Tensor::filled(&shape, g.item());
                    self.accumulate(x, &dx);
                }
                Op::Scale { src, factor } => {
                    let dx = g.map(|v| v * factor);
                    self.accumulate(src, &dx);
                }
            }
        }
    }

    /// Zero-initialized gradient slot for node `id`.
    fn slot(&mut self, id: usize, shape: &[usize]) -> &mut Tensor<S> {
        if self.grads[id].is_none() {
            self.grads[id] = Some(Tensor::zeros(shape));
        }
        self.grads[id].as_mut().unwrap()
    }

    fn accumulate(&mut self, id: usize, delta: &Tensor<S>) {
        let shape = delta.shape().to_vec();
        let slot = self.slot(id, &shape);
        for (dst, &src) in slot.data_mut().iter_mut().zip(delta.data().iter()) {
            *dst += src;
        }
    }
}

fn elementwise<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    f: impl Fn(S, S) -> S,
) -> Tensor<S> {
    debug_assert_eq!(a.shape(), b.shape());
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data().iter()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

/// Dot product with four independent accumulators: breaks the FMA latency
/// chain, which is worth ~4x on long rows. Summation order differs from a
/// plain left fold by O(eps) only.
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut c0 = S::zero();
    let mut c1 = S::zero();
    let mut c2 = S::zero();
    let mut c3 = S::zero();
    let mut ia = a.chunks_exact(4);
    let mut ib = b.chunks_exact(4);
    for (ca, cb) in (&mut ia).zip(&mut ib) {
        c0 += ca[0] * cb[0];
        c1 += ca[1] * cb[1];
        c2 += ca[2] * cb[2];
        c3 += ca[3] * cb[3];
    }
    let mut acc = (c0 + c1) + (c2 + c3);
    for (&x, &y) in ia.remainder().iter().zip(ib.remainder()) {
        acc += x * y;
    }
    acc
}

/// `out += s * x`, elementwise over equal-length slices.
fn axpy<S: Scalar>(s: S, x: &[S], out: &mut [S]) {
    debug_assert_eq!(x.len(), out.len());
    for (o, &v) in out.iter_mut().zip(x.iter()) {
        *o += s * v;
    }
}

/// `A[m,k] * B[k,n] -> [m,n]`
fn mm_nn<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let (ad, bd) = (a.data(), b.data());
    let mut out = Tensor::zeros(&[m, n]);
    for i in 0..m {
        let out_row = &mut out.data_mut()[i * n..(i + 1) * n];
        for (p, &av) in ad[i * k..(i + 1) * k].iter().enumerate() {
            if av == S::zero() {
                continue;
            }
            axpy(av, &bd[p * n..(p + 1) * n], out_row);
        }
    }
    out
}

/// `A[m,k] * B[n,k]^T -> [m,n]`
fn mm_nt<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    debug_assert_eq!(k, b.cols());
    let (ad, bd) = (a.data(), b.data());
    let mut out = Tensor::zeros(&[m, n]);
    for i in 0..m {
        let a_row = &ad[i * k..(i + 1) * k];
        let out_row = &mut out.data_mut()[i * n..(i + 1) * n];
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = dot(a_row, &bd[j * k..(j + 1) * k]);
        }
    }
    out
}

/// `A[k,m]^T * B[k,n] -> [m,n]`
fn mm_tn<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    let (k, m, n) = (a.rows(), a.cols(), b.cols());
    debug_assert_eq!(k, b.rows());
    let (ad, bd) = (a.data(), b.data());
    let mut out = Tensor::zeros(&[m, n]);
    for p in 0..k {
        let b_row = &bd[p * n..(p + 1) * n];
        for (i, &av) in ad[p * m..(p + 1) * m].iter().enumerate() {
            if av == S::zero() {
                continue;
            }
            axpy(av, b_row, &mut out.data_mut()[i * n..(i + 1) * n]);
        }
    }
    out
}

/// `A[m,k] * x[k] -> [m]`
fn matvec<S: Scalar>(a: &Tensor<S>, x: &Tensor<S>) -> Tensor<S> {
    let (m, k) = (a.rows(), a.cols());
    let (ad, xs) = (a.data(), x.data());
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        out.push(dot(&ad[i * k..(i + 1) * k], xs));
    }
    Tensor::vector(out)
}

/// `A[m,k]^T * g[m] -> [k]`
fn tmatvec<S: Scalar>(a: &Tensor<S>, g: &Tensor<S>) -> Tensor<S> {
    let (m, k) = (a.rows(), a.cols());
    let (ad, gs) = (a.data(), g.data());
    let mut out = vec![S::zero(); k];
    for i in 0..m {
        let gv = gs[i];
        if gv == S::zero() {
            continue;
        }
        axpy(gv, &ad[i * k..(i + 1) * k], &mut out);
    }
    Tensor::vector(out)
}

/// `u[m] * v[k]^T -> [m,k]`
fn outer<S: Scalar>(u: &Tensor<S>, v: &Tensor<S>) -> Tensor<S> {
    let (m, k) = (u.numel(), v.numel());
    let (ud, vd) = (u.data(), v.data());
    let mut out = Tensor::zeros(&[m, k]);
    for (i, &uv) in ud.iter().enumerate() {
        for (o, &vv) in out.data_mut()[i * k..(i + 1) * k].iter_mut().zip(vd.iter()) {
            *o = uv * vv;
        }
    }
    out
}
