//! Reverse-mode differentiation over matrix-valued primitives.
//!
//! A [`Tape`] records every primitive in the order it is applied, so node
//! inputs always precede the node itself. [`Tape::backward`] walks the record
//! in reverse and accumulates adjoints for every trainable leaf. Forward values
//! are computed with the same kernels as the free functions in
//! [`super::matrix`], which makes [`Tape::replay`] bit-exact.

use crate::error::{HecvlError, Result};

use super::matrix::{self, check_same_shape, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    SoftmaxRows(Var, f64),
    L2Normalize(Var),
    MeanPoolGroups(Var, Vec<usize>),
    Log(Var),
    Exp(Var),
    GatherRows(Var, Vec<usize>),
    PickPerRow(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    trainable: bool,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of the trainable leaves, indexed by leaf handle.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for a trainable leaf. Leaves that do not influence the loss get
    /// an all-zero matrix of the leaf's shape.
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Matrix> {
        self.grads.get_mut(var.0).and_then(Option::take)
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Registers a trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, true)
    }

    /// Registers a non-trainable input.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Matrix, trainable: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            trainable,
            requires_grad: trainable,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let requires_grad = inputs(&op).iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            trainable: false,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matrix::matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matrix::matmul_nt(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMulNt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = forward_add(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds the `1 × n` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let value = forward_add_row(self.value(a), self.value(bias))?;
        Ok(self.push(value, Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|v| v * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var, tau: f64) -> Result<Var> {
        let value = matrix::softmax_rows(self.value(a), tau)?;
        Ok(self.push(value, Op::SoftmaxRows(a, tau)))
    }

    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let value = matrix::l2_normalize_rows(self.value(a))?;
        Ok(self.push(value, Op::L2Normalize(a)))
    }

    /// Mean over all rows, giving a `1 × cols` node.
    pub fn mean_pool(&mut self, a: Var) -> Result<Var> {
        let rows = self.value(a).rows();
        if rows == 0 {
            return Err(HecvlError::EmptyAggregation);
        }
        self.mean_pool_groups(a, vec![rows])
    }

    /// Mean over consecutive row groups of the given sizes.
    pub fn mean_pool_groups(&mut self, a: Var, sizes: Vec<usize>) -> Result<Var> {
        let value = matrix::mean_pool_groups(self.value(a), &sizes)?;
        Ok(self.push(value, Op::MeanPoolGroups(a, sizes)))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::ln);
        if !value.is_finite() {
            return Err(HecvlError::NonFinite {
                context: "log of non-positive value".into(),
            });
        }
        Ok(self.push(value, Op::Log(a)))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::exp);
        if !value.is_finite() {
            return Err(HecvlError::NonFinite {
                context: "exp overflow".into(),
            });
        }
        Ok(self.push(value, Op::Exp(a)))
    }

    /// Selects rows of `a` by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, indices: Vec<usize>) -> Result<Var> {
        let value = forward_gather_rows(self.value(a), &indices)?;
        Ok(self.push(value, Op::GatherRows(a, indices)))
    }

    /// Picks `a[i, cols[i]]` for every row, giving an `n × 1` node.
    pub fn pick_per_row(&mut self, a: Var, cols: Vec<usize>) -> Result<Var> {
        let value = forward_pick(self.value(a), &cols)?;
        Ok(self.push(value, Op::PickPerRow(a, cols)))
    }

    pub fn concat_rows(&mut self, parts: Vec<Var>) -> Result<Var> {
        let value = forward_concat(&parts.iter().map(|&p| self.value(p)).collect::<Vec<_>>())?;
        Ok(self.push(value, Op::ConcatRows(parts)))
    }

    /// Sum of all entries as a `1 × 1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    /// Recomputes every non-leaf node from the leaves.
    pub fn replay(&self) -> Result<Vec<Matrix>> {
        let mut values: Vec<Matrix> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = |x: &Var| &values[x.0];
            let value = match &node.op {
                Op::Leaf => node.value.clone(),
                Op::MatMul(a, b) => matrix::matmul(v(a), v(b))?,
                Op::MatMulNt(a, b) => matrix::matmul_nt(v(a), v(b))?,
                Op::Add(a, b) => forward_add(v(a), v(b))?,
                Op::AddRow(a, b) => forward_add_row(v(a), v(b))?,
                Op::Scale(a, f) => v(a).map(|x| x * f),
                Op::Relu(a) => v(a).map(|x| x.max(0.0)),
                Op::SoftmaxRows(a, tau) => matrix::softmax_rows(v(a), *tau)?,
                Op::L2Normalize(a) => matrix::l2_normalize_rows(v(a))?,
                Op::MeanPoolGroups(a, sizes) => matrix::mean_pool_groups(v(a), sizes)?,
                Op::Log(a) => v(a).map(f64::ln),
                Op::Exp(a) => v(a).map(f64::exp),
                Op::GatherRows(a, idx) => forward_gather_rows(v(a), idx)?,
                Op::PickPerRow(a, cols) => forward_pick(v(a), cols)?,
                Op::ConcatRows(parts) => {
                    forward_concat(&parts.iter().map(|p| &values[p.0]).collect::<Vec<_>>())?
                }
                Op::Sum(a) => Matrix::scalar(v(a).sum()),
            };
            values.push(value);
        }
        Ok(values)
    }

    /// Back-propagates from a scalar node and returns gradients for every
    /// trainable leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let out = self.value(loss);
        if out.shape() != (1, 1) {
            return Err(HecvlError::Contract(format!(
                "backward needs a scalar loss node, got {}x{}",
                out.rows(),
                out.cols()
            )));
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            if matches!(node.op, Op::Leaf) {
                adj[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut adj)?;
        }

        let grads = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                n.trainable.then(|| {
                    adj[i]
                        .take()
                        .unwrap_or_else(|| Matrix::zeros(n.value.rows(), n.value.cols()))
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Matrix, adj: &mut [Option<Matrix>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    accumulate(adj, *a, matrix::matmul_nt(g, self.value(*b))?)?;
                }
                if self.wants(*b) {
                    accumulate(adj, *b, matrix::matmul_tn(self.value(*a), g)?)?;
                }
            }
            Op::MatMulNt(a, b) => {
                if self.wants(*a) {
                    accumulate(adj, *a, matrix::matmul(g, self.value(*b))?)?;
                }
                if self.wants(*b) {
                    accumulate(adj, *b, matrix::matmul_tn(g, self.value(*a))?)?;
                }
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    accumulate(adj, *a, g.clone())?;
                }
                if self.wants(*b) {
                    accumulate(adj, *b, g.clone())?;
                }
            }
            Op::AddRow(a, bias) => {
                if self.wants(*a) {
                    accumulate(adj, *a, g.clone())?;
                }
                if self.wants(*bias) {
                    let mut col_sums = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (s, v) in col_sums.data_mut().iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                    accumulate(adj, *bias, col_sums)?;
                }
            }
            Op::Scale(a, f) => accumulate(adj, *a, g.map(|x| x * f))?,
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut d = g.clone();
                for (dv, xv) in d.data_mut().iter_mut().zip(x.data()) {
                    if *xv <= 0.0 {
                        *dv = 0.0;
                    }
                }
                accumulate(adj, *a, d)?;
            }
            Op::SoftmaxRows(a, tau) => {
                let y = &node.value;
                let mut d = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let inner = matrix::dot(yr, gr);
                    for ((dv, yv), gv) in d.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *dv = yv * (gv - inner) / tau;
                    }
                }
                accumulate(adj, *a, d)?;
            }
            Op::L2Normalize(a) => {
                let x = self.value(*a);
                let y = &node.value;
                let mut d = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let n = matrix::norm(x.row(r));
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let inner = matrix::dot(yr, gr);
                    for ((dv, yv), gv) in d.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *dv = (gv - yv * inner) / n;
                    }
                }
                accumulate(adj, *a, d)?;
            }
            Op::MeanPoolGroups(a, sizes) => {
                let x = self.value(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                let mut start = 0;
                for (gi, &size) in sizes.iter().enumerate() {
                    let inv = 1.0 / size as f64;
                    for r in start..start + size {
                        for (dv, gv) in d.row_mut(r).iter_mut().zip(g.row(gi)) {
                            *dv = gv * inv;
                        }
                    }
                    start += size;
                }
                accumulate(adj, *a, d)?;
            }
            Op::Log(a) => {
                let x = self.value(*a);
                let mut d = g.clone();
                for (dv, xv) in d.data_mut().iter_mut().zip(x.data()) {
                    *dv /= xv;
                }
                accumulate(adj, *a, d)?;
            }
            Op::Exp(a) => {
                let mut d = g.clone();
                for (dv, yv) in d.data_mut().iter_mut().zip(node.value.data()) {
                    *dv *= yv;
                }
                accumulate(adj, *a, d)?;
            }
            Op::GatherRows(a, idx) => {
                let x = self.value(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for (r, &src) in idx.iter().enumerate() {
                    for (dv, gv) in d.row_mut(src).iter_mut().zip(g.row(r)) {
                        *dv += gv;
                    }
                }
                accumulate(adj, *a, d)?;
            }
            Op::PickPerRow(a, cols) => {
                let x = self.value(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for (r, &c) in cols.iter().enumerate() {
                    d.set(r, c, g.get(r, 0));
                }
                accumulate(adj, *a, d)?;
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let rows = self.value(*p).rows();
                    if self.wants(*p) {
                        let data = g.data()[start * g.cols()..(start + rows) * g.cols()].to_vec();
                        accumulate(adj, *p, Matrix::from_vec(rows, g.cols(), data)?)?;
                    }
                    start += rows;
                }
            }
            Op::Sum(a) => {
                let x = self.value(*a);
                accumulate(adj, *a, Matrix::filled(x.rows(), x.cols(), g.get(0, 0)))?;
            }
        }
        Ok(())
    }
}

fn inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) | Op::MatMulNt(a, b) | Op::Add(a, b) | Op::AddRow(a, b) => vec![*a, *b],
        Op::Scale(a, _)
        | Op::Relu(a)
        | Op::SoftmaxRows(a, _)
        | Op::L2Normalize(a)
        | Op::MeanPoolGroups(a, _)
        | Op::Log(a)
        | Op::Exp(a)
        | Op::GatherRows(a, _)
        | Op::PickPerRow(a, _)
        | Op::Sum(a) => vec![*a],
        Op::ConcatRows(parts) => parts.clone(),
    }
}

fn accumulate(adj: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
    match &mut adj[v.0] {
        Some(existing) => existing.axpy(1.0, &g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn forward_add(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_same_shape("add", a, b)?;
    let mut out = a.clone();
    for (o, v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += v;
    }
    Ok(out)
}

fn forward_add_row(a: &Matrix, bias: &Matrix) -> Result<Matrix> {
    if bias.rows() != 1 || bias.cols() != a.cols() {
        return Err(HecvlError::Shape {
            op: "add_row",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: bias.rows(),
            right_cols: bias.cols(),
        });
    }
    let mut out = a.clone();
    for r in 0..out.rows() {
        for (o, b) in out.row_mut(r).iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    Ok(out)
}

fn forward_gather_rows(a: &Matrix, indices: &[usize]) -> Result<Matrix> {
    let mut data = Vec::with_capacity(indices.len() * a.cols());
    for &i in indices {
        if i >= a.rows() {
            return Err(HecvlError::Contract(format!(
                "gather index {i} out of range for {} rows",
                a.rows()
            )));
        }
        data.extend_from_slice(a.row(i));
    }
    Matrix::from_vec(indices.len(), a.cols(), data)
}

fn forward_pick(a: &Matrix, cols: &[usize]) -> Result<Matrix> {
    if cols.len() != a.rows() || cols.iter().any(|&c| c >= a.cols()) {
        return Err(HecvlError::Contract(format!(
            "pick_per_row needs one in-range column per row ({} rows, {} cols)",
            a.rows(),
            a.cols()
        )));
    }
    let data = cols.iter().enumerate().map(|(r, &c)| a.get(r, c)).collect();
    Matrix::from_vec(a.rows(), 1, data)
}

fn forward_concat(parts: &[&Matrix]) -> Result<Matrix> {
    let Some(first) = parts.first() else {
        return Err(HecvlError::EmptyAggregation);
    };
    let cols = first.cols();
    let mut rows = 0;
    let mut data = Vec::new();
    for p in parts {
        if p.cols() != cols {
            return Err(HecvlError::Shape {
                op: "concat_rows",
                left_rows: first.rows(),
                left_cols: cols,
                right_rows: p.rows(),
                right_cols: p.cols(),
            });
        }
        rows += p.rows();
        data.extend_from_slice(p.data());
    }
    Matrix::from_vec(rows, cols, data)
}
