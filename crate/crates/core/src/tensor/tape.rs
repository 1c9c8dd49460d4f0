use super::{gelu_grad, kernels, sigmoid, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Gelu(Var),
    Softplus(Var),
    Ln(Var),
    Softmax(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

/// Dynamic reverse-mode tape, built per forward pass and consumed by
/// [`Tape::backward`].
///
/// Nodes are appended in evaluation order, so parents always precede their
/// children and a single reverse sweep visits every node once.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every leaf of the tape.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::Shape {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        })
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

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Registers a differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Registers a value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMul(a, b), t))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_t(self.value(b))?;
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMulT(a, b), t))
    }

    fn zip(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape(name, x, y)?;
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&p, &q)| f(p, q))
            .collect();
        let value = Tensor::new(x.shape(), data)?;
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, op, t))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |p, q| p * q, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("div", a, b, |p, q| p / q, Op::Div(a, b))
    }

    /// Adds a `1×n` row vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if !x.is_matrix() || r.shape() != [1, x.cols()] {
            return Err(Error::Shape {
                op: "add_row",
                lhs: x.shape().to_vec(),
                rhs: r.shape().to_vec(),
            });
        }
        let n = x.cols();
        let mut data = x.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (d, &b) in chunk.iter_mut().zip(r.data()) {
                *d += b;
            }
        }
        let value = Tensor::new(x.shape(), data)?;
        let t = self.tracked(a) || self.tracked(row);
        Ok(self.push(value, Op::AddRow(a, row), t))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).map(f);
        let t = self.tracked(a);
        self.push(value, op, t)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, super::relu, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(a, super::gelu, Op::Gelu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, super::softplus, Op::Softplus(a))
    }

    /// Natural log; non-positive inputs yield `-inf`/NaN.
    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Ln(a))
    }

    pub fn softmax_rows(&mut self, a: Var, key_mask: Option<&[bool]>) -> Result<Var> {
        let value = self.value(a).softmax_rows(key_mask)?;
        let t = self.tracked(a);
        Ok(self.push(value, Op::Softmax(a), t))
    }

    /// Columns `start..start + width` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let x = self.value(a);
        if !x.is_matrix() || start + width > x.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: x.shape().to_vec(),
                rhs: vec![start, width],
            });
        }
        let (m, n) = (x.rows(), x.cols());
        let mut data = Vec::with_capacity(m * width);
        for i in 0..m {
            data.extend_from_slice(&x.data()[i * n + start..i * n + start + width]);
        }
        let value = Tensor::matrix(m, width, data)?;
        let t = self.tracked(a);
        Ok(self.push(value, Op::SliceCols(a, start), t))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat_cols of nothing".into()))?;
        let m = self.value(*first).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let x = self.value(p);
            if !x.is_matrix() || x.rows() != m {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: self.value(*first).shape().to_vec(),
                    rhs: x.shape().to_vec(),
                });
            }
            widths.push(x.cols());
        }
        let n: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let value = Tensor::matrix(m, n, data)?;
        let t = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), t))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let value = self.value(a).select_rows(rows)?;
        let t = self.tracked(a);
        Ok(self.push(value, Op::SelectRows(a, rows.to_vec()), t))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let t = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Sum(a), t)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = x.data().iter().sum::<f64>() / x.len() as f64;
        let t = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Mean(a), t)
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape.
    /// Which side of zero every relu input lies on, in tape order. Two
    /// evaluations with equal patterns lie in the same linear piece of every
    /// relu.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Op::Relu(a) = node.op {
                out.extend(self.nodes[a.0].value.data().iter().map(|&x| x > 0.0));
            }
        }
        out
    }

    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked || matches!(node.op, Op::Leaf | Op::Constant) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
        }

        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match (&node.op, g) {
                (Op::Leaf, Some(g)) => Some(
                    Tensor::new(node.value.shape(), g).expect("gradient shape matches its leaf"),
                ),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.tracked(v) {
            return None;
        }
        let len = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let y = node.value.data();
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if let Some(ga) = self.acc(grads, *a) {
                    // dA = dC · Bᵀ
                    kernels::matmul_nt(g, bv.data(), ga, m, n, k);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    // dB = Aᵀ · dC
                    kernels::matmul_tn(av.data(), g, gb, m, k, n);
                }
            }
            Op::MatMulT(a, b) => {
                // C = A · Bᵀ with A: m×k, B: n×k
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.rows());
                if let Some(ga) = self.acc(grads, *a) {
                    // dA = dC · B
                    kernels::matmul_nn(g, bv.data(), ga, m, n, k);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    // dB = dCᵀ · A
                    kernels::matmul_tn(g, av.data(), gb, m, n, k);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.acc(grads, v) {
                        gv.iter_mut().zip(g).for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(d, s)| *d += s);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    gb.iter_mut().zip(g).for_each(|(d, s)| *d -= s);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
            }
            Op::Div(a, b) => {
                let bv = self.value(*b).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] += g[i] / bv[i];
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    // d(a/b)/db = -(a/b)/b
                    for i in 0..g.len() {
                        gb[i] -= g[i] * y[i] / bv[i];
                    }
                }
            }
            Op::AddRow(a, row) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(d, s)| *d += s);
                }
                if let Some(gr) = self.acc(grads, *row) {
                    let n = gr.len();
                    for chunk in g.chunks(n) {
                        gr.iter_mut().zip(chunk).for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(d, s)| *d += s * c);
                }
            }
            Op::AddScalar(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(d, s)| *d += s);
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..g.len() {
                        if x[i] > 0.0 {
                            ga[i] += g[i];
                        }
                    }
                }
            }
            Op::Gelu(a) => {
                let x = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] += g[i] * gelu_grad(x[i]);
                    }
                }
            }
            Op::Softplus(a) => {
                let x = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] += g[i] * sigmoid(x[i]);
                    }
                }
            }
            Op::Ln(a) => {
                let x = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] += g[i] / x[i];
                    }
                }
            }
            Op::Softmax(a) => {
                let n = node.value.cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for (r, (yr, gr)) in y.chunks(n).zip(g.chunks(n)).enumerate() {
                        let inner = kernels::dot(yr, gr);
                        let out = &mut ga[r * n..(r + 1) * n];
                        for j in 0..n {
                            out[j] += yr[j] * (gr[j] - inner);
                        }
                    }
                }
            }
            Op::SliceCols(a, start) => {
                let n = self.value(*a).cols();
                let w = node.value.cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for (i, gr) in g.chunks(w).enumerate() {
                        let dst = &mut ga[i * n + start..i * n + start + w];
                        dst.iter_mut().zip(gr).for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let n = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if let Some(gp) = self.acc(grads, p) {
                        for (i, gr) in g.chunks(n).enumerate() {
                            let dst = &mut gp[i * w..(i + 1) * w];
                            dst.iter_mut()
                                .zip(&gr[offset..offset + w])
                                .for_each(|(d, s)| *d += s);
                        }
                    }
                    offset += w;
                }
            }
            Op::SelectRows(a, rows) => {
                let n = node.value.cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for (gr, &r) in g.chunks(n).zip(rows) {
                        let dst = &mut ga[r * n..(r + 1) * n];
                        dst.iter_mut().zip(gr).for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    let s = g[0] / ga.len() as f64;
                    ga.iter_mut().for_each(|d| *d += s);
                }
            }
        }
    }
}
