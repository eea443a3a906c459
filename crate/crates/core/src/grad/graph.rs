//! Tape-style reverse-mode graph over dense 2-D arrays.
//!
//! Every value is an `n × m` array; scalars are `1 × 1`. Nodes are appended in
//! evaluation order, so the node list is already a topological order and the
//! backward sweep is a single reverse pass.

use ndarray::{s, Array2, Axis, Zip};

use crate::{Error, Result};

pub type Tensor = Array2<f64>;

/// Handle to a node inside one [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation that produced a node.
#[derive(Debug, Clone)]
pub enum Op {
    /// Trainable leaf; receives a gradient.
    Param,
    /// Fixed input; never receives a gradient.
    Constant,
    MatMul,
    /// `n × k` plus a `1 × k` row broadcast over rows.
    AddRow,
    Add,
    Sub,
    Mul,
    Scale(f64),
    Offset(f64),
    Relu,
    Ln,
    Square,
    Sum,
    Mean,
    /// Per-column unbiased variance, `n × d -> 1 × d`.
    ColumnVariance,
    ConcatRows,
    /// Mean softmax cross-entropy against integer labels.
    CrossEntropy { labels: Vec<usize>, probs: Tensor },
    /// Squared derivative of mean cross-entropy w.r.t. a scalar logit multiplier at 1.
    IrmPenalty { labels: Vec<usize>, probs: Tensor, slope: f64 },
}

impl Op {
    pub fn tag(&self) -> &'static str {
        match self {
            Op::Param => "param",
            Op::Constant => "constant",
            Op::MatMul => "matmul",
            Op::AddRow => "add_row",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Offset(_) => "offset",
            Op::Relu => "relu",
            Op::Ln => "ln",
            Op::Square => "square",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::ColumnVariance => "column_variance",
            Op::ConcatRows => "concat_rows",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::IrmPenalty { .. } => "irm_penalty",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    value: Tensor,
    grad: Tensor,
    op: Op,
    parents: Vec<Var>,
    needs_grad: bool,
}

impl GraphNode {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn op(&self) -> &Op {
        &self.op
    }

    pub fn parents(&self) -> &[Var] {
        &self.parents
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<GraphNode>,
}

fn shape(t: &Tensor) -> (usize, usize) {
    t.dim()
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

    pub fn node(&self, v: Var) -> &GraphNode {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn grad(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].grad
    }

    fn push(&mut self, value: Tensor, op: Op, parents: Vec<Var>) -> Var {
        let needs_grad = match op {
            Op::Param => true,
            Op::Constant => false,
            _ => parents.iter().any(|p| self.nodes[p.0].needs_grad),
        };
        let grad = Tensor::zeros(value.dim());
        self.nodes.push(GraphNode { value, grad, op, parents, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Param, Vec::new())
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, Vec::new())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        if sa.1 != sb.0 {
            return Err(Error::ShapeMismatch { op: "matmul", left: sa, right: sb });
        }
        let v = self.value(a).dot(self.value(b));
        Ok(self.push(v, Op::MatMul, vec![a, b]))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (shape(self.value(a)), shape(self.value(row)));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(Error::ShapeMismatch { op: "add_row", left: sa, right: sr });
        }
        let v = self.value(a) + self.value(row);
        Ok(self.push(v, Op::AddRow, vec![a, row]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        if sa != sb {
            return Err(Error::ShapeMismatch { op, left: sa, right: sb });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        Ok(self.push(v, Op::Add, vec![a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        Ok(self.push(v, Op::Sub, vec![a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        Ok(self.push(v, Op::Mul, vec![a, b]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(c), vec![a])
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, Op::Offset(c), vec![a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { 0.0 });
        self.push(v, Op::Relu, vec![a])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::ln);
        self.push(v, Op::Ln, vec![a])
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(v, Op::Square, vec![a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum, vec![a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let v = Tensor::from_elem((1, 1), t.sum() / t.len() as f64);
        self.push(v, Op::Mean, vec![a])
    }

    pub fn column_variance(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let n = t.nrows();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "column variance needs at least 2 rows, got {n}"
            )));
        }
        let mean = t.mean_axis(Axis(0)).expect("non-empty rows");
        let centered = t - &mean;
        let v = (centered.mapv(|x| x * x).sum_axis(Axis(0)) / (n - 1) as f64).insert_axis(Axis(0));
        Ok(self.push(v, Op::ColumnVariance, vec![a]))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat_rows needs at least one input".into()))?;
        let cols = self.value(first).ncols();
        for &p in parts {
            let sp = shape(self.value(p));
            if sp.1 != cols {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    left: shape(self.value(first)),
                    right: sp,
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("column counts checked");
        Ok(self.push(v, Op::ConcatRows, parts.to_vec()))
    }

    /// Mean softmax cross-entropy of `logits` (n × k) against `labels`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let z = self.value(logits);
        check_labels(z, labels)?;
        let probs = softmax_rows(z);
        let n = z.nrows() as f64;
        let mut total = 0.0;
        for (row, &y) in z.rows().into_iter().zip(labels) {
            total += log_sum_exp(row.iter().copied()) - row[y];
        }
        let v = Tensor::from_elem((1, 1), total / n);
        Ok(self.push(v, Op::CrossEntropy { labels: labels.to_vec(), probs }, vec![logits]))
    }

    /// `(mean_n (softmax(z_n) - onehot(y_n)) · z_n)^2`, the squared slope of the mean
    /// cross-entropy along a scalar multiplier on all logits, taken at multiplier 1.
    pub fn irm_penalty(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let z = self.value(logits);
        check_labels(z, labels)?;
        let probs = softmax_rows(z);
        let n = z.nrows() as f64;
        let mut slope = 0.0;
        for ((zr, pr), &y) in z.rows().into_iter().zip(probs.rows()).zip(labels) {
            let dot: f64 = zr.iter().zip(pr.iter()).map(|(a, b)| a * b).sum();
            slope += dot - zr[y];
        }
        slope /= n;
        let v = Tensor::from_elem((1, 1), slope * slope);
        Ok(self.push(
            v,
            Op::IrmPenalty { labels: labels.to_vec(), probs, slope },
            vec![logits],
        ))
    }

    /// Populate `grad` on every node that depends on a parameter, for scalar `output`.
    ///
    /// Gradients from any previous sweep are cleared first, so the same graph can
    /// be differentiated more than once.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let s = shape(self.value(output));
        if s != (1, 1) {
            return Err(Error::NonScalarOutput(s));
        }
        for node in &mut self.nodes {
            node.grad.fill(0.0);
        }
        self.nodes[output.0].grad[[0, 0]] = 1.0;

        for i in (0..=output.0).rev() {
            if !self.nodes[i].needs_grad || self.nodes[i].parents.is_empty() {
                continue;
            }
            // Nodes only reference earlier indices, so split the list to borrow the
            // current node immutably while writing into its parents.
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            let g = &node.grad;
            let pv = |k: usize| &before[node.parents[k].0].value;
            match &node.op {
                Op::Param | Op::Constant => {}
                Op::MatMul => {
                    let (a, b) = (node.parents[0].0, node.parents[1].0);
                    let ga = if before[a].needs_grad { Some(g.dot(&pv(1).t())) } else { None };
                    let gb = if before[b].needs_grad { Some(pv(0).t().dot(g)) } else { None };
                    if let Some(ga) = ga {
                        before[a].grad += &ga;
                    }
                    if let Some(gb) = gb {
                        before[b].grad += &gb;
                    }
                }
                Op::AddRow => {
                    let (a, r) = (node.parents[0].0, node.parents[1].0);
                    if before[a].needs_grad {
                        before[a].grad += g;
                    }
                    if before[r].needs_grad {
                        let col = g.sum_axis(Axis(0));
                        let mut row = before[r].grad.row_mut(0);
                        row += &col;
                    }
                }
                Op::Add | Op::Sub => {
                    let sign = if matches!(node.op, Op::Sub) { -1.0 } else { 1.0 };
                    let (a, b) = (node.parents[0].0, node.parents[1].0);
                    if before[a].needs_grad {
                        before[a].grad += g;
                    }
                    if before[b].needs_grad {
                        before[b].grad.scaled_add(sign, g);
                    }
                }
                Op::Mul => {
                    let (a, b) = (node.parents[0].0, node.parents[1].0);
                    let ga = if before[a].needs_grad { Some(g * pv(1)) } else { None };
                    let gb = if before[b].needs_grad { Some(g * pv(0)) } else { None };
                    if let Some(ga) = ga {
                        before[a].grad += &ga;
                    }
                    if let Some(gb) = gb {
                        before[b].grad += &gb;
                    }
                }
                Op::Scale(c) => {
                    let a = node.parents[0].0;
                    before[a].grad.scaled_add(*c, g);
                }
                Op::Offset(_) => {
                    let a = node.parents[0].0;
                    before[a].grad += g;
                }
                Op::Relu => {
                    let a = node.parents[0].0;
                    let parent = &mut before[a];
                    Zip::from(&mut parent.grad).and(&parent.value).and(g).for_each(|pg, &x, &gi| {
                        if x > 0.0 {
                            *pg += gi;
                        }
                    });
                }
                Op::Ln => {
                    let a = node.parents[0].0;
                    let parent = &mut before[a];
                    Zip::from(&mut parent.grad)
                        .and(&parent.value)
                        .and(g)
                        .for_each(|pg, &x, &gi| *pg += gi / x);
                }
                Op::Square => {
                    let a = node.parents[0].0;
                    let parent = &mut before[a];
                    Zip::from(&mut parent.grad)
                        .and(&parent.value)
                        .and(g)
                        .for_each(|pg, &x, &gi| *pg += 2.0 * x * gi);
                }
                Op::Sum => {
                    let a = node.parents[0].0;
                    let gi = g[[0, 0]];
                    before[a].grad.mapv_inplace(|x| x + gi);
                }
                Op::Mean => {
                    let a = node.parents[0].0;
                    let gi = g[[0, 0]] / before[a].value.len() as f64;
                    before[a].grad.mapv_inplace(|x| x + gi);
                }
                Op::ColumnVariance => {
                    let a = node.parents[0].0;
                    let parent = &mut before[a];
                    let n = parent.value.nrows();
                    let mean = parent.value.mean_axis(Axis(0)).expect("non-empty rows");
                    let scale = 2.0 / (n - 1) as f64;
                    for (mut grow, vrow) in parent.grad.rows_mut().into_iter().zip(parent.value.rows()) {
                        for j in 0..vrow.len() {
                            grow[j] += g[[0, j]] * scale * (vrow[j] - mean[j]);
                        }
                    }
                }
                Op::ConcatRows => {
                    let mut start = 0;
                    for p in &node.parents {
                        let rows = before[p.0].value.nrows();
                        if before[p.0].needs_grad {
                            let block = g.slice(s![start..start + rows, ..]);
                            before[p.0].grad += &block;
                        }
                        start += rows;
                    }
                }
                Op::CrossEntropy { labels, probs } => {
                    let a = node.parents[0].0;
                    let scale = g[[0, 0]] / labels.len() as f64;
                    let parent = &mut before[a];
                    for ((mut grow, prow), &y) in
                        parent.grad.rows_mut().into_iter().zip(probs.rows()).zip(labels)
                    {
                        for j in 0..prow.len() {
                            let target = if j == y { 1.0 } else { 0.0 };
                            grow[j] += scale * (prow[j] - target);
                        }
                    }
                }
                Op::IrmPenalty { labels, probs, slope } => {
                    // d/dz_n [(p_n - y_n)·z_n] = (p_n - y_n) + p_n ⊙ z_n - p_n (p_n·z_n)
                    let a = node.parents[0].0;
                    let scale = g[[0, 0]] * 2.0 * slope / labels.len() as f64;
                    let parent = &mut before[a];
                    for (((mut grow, zrow), prow), &y) in parent
                        .grad
                        .rows_mut()
                        .into_iter()
                        .zip(parent.value.rows())
                        .zip(probs.rows())
                        .zip(labels)
                    {
                        let pz: f64 = zrow.iter().zip(prow.iter()).map(|(z, p)| z * p).sum();
                        for j in 0..prow.len() {
                            let target = if j == y { 1.0 } else { 0.0 };
                            grow[j] += scale * (prow[j] - target + prow[j] * zrow[j] - prow[j] * pz);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_labels(z: &Tensor, labels: &[usize]) -> Result<()> {
    if z.nrows() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "labels",
            left: z.dim(),
            right: (labels.len(), 1),
        });
    }
    if z.nrows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let k = z.ncols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::LabelOutOfRange { label: bad, classes: k });
    }
    Ok(())
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Tensor) -> Tensor {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - m).exp());
        let total = row.sum();
        row.mapv_inplace(|x| x / total);
    }
    out
}
