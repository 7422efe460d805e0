use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamSet, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Recorded primitive application. Inputs always precede outputs, so the
/// node list is topologically ordered by construction and the backward pass
/// is a single reverse sweep.
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    /// `[L, n] + [1, n]`, the bias broadcast over rows.
    AddRowBroadcast(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f32),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    /// Softmax over all elements, treated as one vector.
    Softmax(Var),
    /// Natural log with the argument floored at `f32::MIN_POSITIVE`.
    Ln(Var),
    Sum(Var),
    MeanRows(Var),
    ConcatCols(Var, Var),
    StackRows(Vec<Var>),
    Reshape(Var),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Record of one forward computation: an append-only arena of tensors plus
/// the operations that produced them.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_cache: BTreeMap<ParamId, Var>,
}

fn matmul_kernel<T>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T>
where
    T: Copy + Default + std::ops::Mul<Output = T> + std::ops::AddAssign,
{
    let mut c = vec![T::default(); m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// Numerically stable logistic function: never exponentiates a positive
/// argument.
fn sigmoid_f32(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_f32(xs: &[f32]) -> Vec<f32> {
    let max = xs.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mut out: Vec<f32> = xs.iter().map(|&x| (x - max).exp()).collect();
    let sum: f32 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    out
}

fn softmax_f64(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    out
}

const LN_FLOOR: f32 = f32::MIN_POSITIVE;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Binds a parameter as a leaf, copying its current value. Repeated
    /// bindings of the same parameter within one tape return the same node,
    /// so gradient contributions from every use accumulate there.
    pub fn param(&mut self, ps: &ParamSet, id: ParamId) -> Var {
        if let Some(&v) = self.param_cache.get(&id) {
            return v;
        }
        let mut value = ps.get(id).clone();
        value.zero_grad();
        let v = self.push(Op::Param(id), value);
        self.param_cache.insert(id, v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn data(&self, v: Var) -> &[f32] {
        self.nodes[v.0].value.data()
    }

    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.nodes[v.0].value.grad()
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad()
    }

    fn result(&mut self, op: Op, shape: Vec<usize>, data: Vec<f32>, requires: bool) -> Result<Var> {
        let mut t = Tensor::new(shape, data)?;
        if requires {
            t = t.with_requires_grad();
        }
        Ok(self.push(op, t))
    }

    /// `[m, k] × [k, n] → [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions disagree: [{m}, {k}] × [{k2}, {n}]"
            )));
        }
        let data = matmul_kernel(self.data(a), self.data(b), m, k, n);
        let req = self.requires(a) || self.requires(b);
        self.result(Op::MatMul(a, b), vec![m, n], data, req)
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!(
                "add shapes disagree: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a) || self.requires(b);
        self.result(Op::Add(a, b), shape, data, req)
    }

    /// Adds a `[1, n]` bias to every row of an `[L, n]` matrix.
    pub fn add_row_broadcast(&mut self, m: Var, bias: Var) -> Result<Var> {
        let (rows, n) = self.value(m).dims2()?;
        let (br, bn) = self.value(bias).dims2()?;
        if br != 1 || bn != n {
            return Err(Error::Shape(format!(
                "row broadcast needs bias [1, {n}], got [{br}, {bn}]"
            )));
        }
        let b = self.data(bias).to_vec();
        let data = self
            .data(m)
            .chunks(n)
            .flat_map(|row| row.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>())
            .collect();
        let req = self.requires(m) || self.requires(bias);
        self.result(Op::AddRowBroadcast(m, bias), vec![rows, n], data, req)
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!(
                "mul shapes disagree: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a) || self.requires(b);
        self.result(Op::Mul(a, b), shape, data, req)
    }

    pub fn one_minus(&mut self, x: Var) -> Result<Var> {
        let data = self.data(x).iter().map(|v| 1.0 - v).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.result(Op::OneMinus(x), shape, data, req)
    }

    pub fn scale(&mut self, x: Var, c: f32) -> Result<Var> {
        let data = self.data(x).iter().map(|v| v * c).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.result(Op::Scale(x, c), shape, data, req)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let data = self.data(x).iter().map(|&v| sigmoid_f32(v)).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.result(Op::Sigmoid(x), shape, data, req)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let data = self.data(x).iter().map(|v| v.tanh()).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.result(Op::Tanh(x), shape, data, req)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let data = self.data(x).iter().map(|v| v.max(0.0)).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.result(Op::Relu(x), shape, data, req)
    }

    /// Softmax over all elements with max-subtraction. Output keeps the
    /// input shape; entries are positive and sum to 1.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let data = softmax_f32(self.data(x));
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.result(Op::Softmax(x), shape, data, req)
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        let data = self.data(x).iter().map(|v| v.max(LN_FLOOR).ln()).collect();
        let shape = self.value(x).shape().to_vec();
        let req = self.requires(x);
        self.result(Op::Ln(x), shape, data, req)
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: f32 = self.data(x).iter().sum();
        let req = self.requires(x);
        self.result(Op::Sum(x), vec![1], vec![s], req)
    }

    /// Column-wise mean of an `[L, n]` matrix, shape `[1, n]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (rows, n) = self.value(x).dims2()?;
        let mut data = vec![0.0; n];
        for row in self.data(x).chunks(n) {
            for (d, v) in data.iter_mut().zip(row) {
                *d += v;
            }
        }
        for d in &mut data {
            *d /= rows as f32;
        }
        let req = self.requires(x);
        self.result(Op::MeanRows(x), vec![1, n], data, req)
    }

    /// Concatenates `[L, m]` and `[L, n]` into `[L, m + n]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (la, m) = self.value(a).dims2()?;
        let (lb, n) = self.value(b).dims2()?;
        if la != lb {
            return Err(Error::Shape(format!(
                "concat_cols row counts disagree: {la} vs {lb}"
            )));
        }
        let mut data = Vec::with_capacity(la * (m + n));
        for (ra, rb) in self.data(a).chunks(m).zip(self.data(b).chunks(n)) {
            data.extend_from_slice(ra);
            data.extend_from_slice(rb);
        }
        let req = self.requires(a) || self.requires(b);
        self.result(Op::ConcatCols(a, b), vec![la, m + n], data, req)
    }

    /// Stacks `L` row vectors of shape `[1, n]` into `[L, n]`.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Shape("stack_rows of zero rows".into()));
        }
        let (_, n) = self.value(rows[0]).dims2()?;
        let mut data = Vec::with_capacity(rows.len() * n);
        let mut req = false;
        for &r in rows {
            let (rr, rn) = self.value(r).dims2()?;
            if rr != 1 || rn != n {
                return Err(Error::Shape(format!(
                    "stack_rows expects [1, {n}] rows, got [{rr}, {rn}]"
                )));
            }
            data.extend_from_slice(self.data(r));
            req |= self.requires(r);
        }
        self.result(Op::StackRows(rows.to_vec()), vec![rows.len(), n], data, req)
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() {
            return Err(Error::Shape(format!(
                "reshape {:?} -> {shape:?} changes element count",
                self.value(x).shape()
            )));
        }
        let data = self.data(x).to_vec();
        let req = self.requires(x);
        self.result(Op::Reshape(x), shape, data, req)
    }

    fn accumulate(&mut self, v: Var, g: &[f32]) {
        if self.nodes[v.0].value.requires_grad() {
            self.nodes[v.0].value.accumulate_grad(g);
        }
    }

    /// Reverse sweep from a scalar loss. d(loss)/d(node) lands in the grad
    /// slot of every node with `requires_grad`, accumulating into whatever
    /// is already there.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.accumulate(loss, &[1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].value.requires_grad() {
                continue;
            }
            let Some(g) = self.nodes[i].value.grad().map(<[f32]>::to_vec) else {
                continue;
            };
            match self.nodes[i].op.clone() {
                Op::Leaf | Op::Param(_) => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(a).dims2().unwrap();
                    let n = self.value(b).dims2().unwrap().1;
                    if self.requires(a) {
                        // dA[i,p] = sum_j G[i,j] * B[p,j]
                        let bd = self.data(b);
                        let mut da = vec![0.0; m * k];
                        for r in 0..m {
                            let grow = &g[r * n..(r + 1) * n];
                            let drow = &mut da[r * k..(r + 1) * k];
                            for p in 0..k {
                                let brow = &bd[p * n..(p + 1) * n];
                                let mut s = 0.0;
                                for (gv, bv) in grow.iter().zip(brow) {
                                    s += gv * bv;
                                }
                                drow[p] = s;
                            }
                        }
                        self.accumulate(a, &da);
                    }
                    if self.requires(b) {
                        // dB[p,j] = sum_i A[i,p] * G[i,j]
                        let ad = self.data(a);
                        let mut db = vec![0.0; k * n];
                        for r in 0..m {
                            let arow = &ad[r * k..(r + 1) * k];
                            let grow = &g[r * n..(r + 1) * n];
                            for (p, &av) in arow.iter().enumerate() {
                                let drow = &mut db[p * n..(p + 1) * n];
                                for (dv, gv) in drow.iter_mut().zip(grow) {
                                    *dv += av * gv;
                                }
                            }
                        }
                        self.accumulate(b, &db);
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(a, &g);
                    self.accumulate(b, &g);
                }
                Op::AddRowBroadcast(m_var, bias) => {
                    self.accumulate(m_var, &g);
                    if self.requires(bias) {
                        let n = self.value(bias).numel();
                        let mut db = vec![0.0; n];
                        for row in g.chunks(n) {
                            for (d, v) in db.iter_mut().zip(row) {
                                *d += v;
                            }
                        }
                        self.accumulate(bias, &db);
                    }
                }
                Op::Mul(a, b) => {
                    if self.requires(a) {
                        let da: Vec<f32> =
                            g.iter().zip(self.data(b)).map(|(gv, bv)| gv * bv).collect();
                        self.accumulate(a, &da);
                    }
                    if self.requires(b) {
                        let db: Vec<f32> =
                            g.iter().zip(self.data(a)).map(|(gv, av)| gv * av).collect();
                        self.accumulate(b, &db);
                    }
                }
                Op::OneMinus(x) => {
                    let dx: Vec<f32> = g.iter().map(|gv| -gv).collect();
                    self.accumulate(x, &dx);
                }
                Op::Scale(x, c) => {
                    let dx: Vec<f32> = g.iter().map(|gv| gv * c).collect();
                    self.accumulate(x, &dx);
                }
                Op::Sigmoid(x) => {
                    let out = self.data(Var(i));
                    let dx: Vec<f32> = g
                        .iter()
                        .zip(out)
                        .map(|(gv, s)| gv * s * (1.0 - s))
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::Tanh(x) => {
                    let out = self.data(Var(i));
                    let dx: Vec<f32> = g.iter().zip(out).map(|(gv, t)| gv * (1.0 - t * t)).collect();
                    self.accumulate(x, &dx);
                }
                Op::Relu(x) => {
                    let inp = self.data(x);
                    let dx: Vec<f32> = g
                        .iter()
                        .zip(inp)
                        .map(|(gv, v)| if *v > 0.0 { *gv } else { 0.0 })
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::Softmax(x) => {
                    let out = self.data(Var(i));
                    let dot: f32 = g.iter().zip(out).map(|(gv, s)| gv * s).sum();
                    let dx: Vec<f32> = g
                        .iter()
                        .zip(out)
                        .map(|(gv, s)| s * (gv - dot))
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::Ln(x) => {
                    let inp = self.data(x);
                    let dx: Vec<f32> = g
                        .iter()
                        .zip(inp)
                        .map(|(gv, v)| if *v > LN_FLOOR { gv / v } else { 0.0 })
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::Sum(x) => {
                    let dx = vec![g[0]; self.value(x).numel()];
                    self.accumulate(x, &dx);
                }
                Op::MeanRows(x) => {
                    let (rows, n) = self.value(x).dims2().unwrap();
                    let mut dx = Vec::with_capacity(rows * n);
                    for _ in 0..rows {
                        dx.extend(g.iter().map(|gv| gv / rows as f32));
                    }
                    self.accumulate(x, &dx);
                }
                Op::ConcatCols(a, b) => {
                    let (rows, m) = self.value(a).dims2().unwrap();
                    let n = self.value(b).dims2().unwrap().1;
                    let mut da = Vec::with_capacity(rows * m);
                    let mut db = Vec::with_capacity(rows * n);
                    for row in g.chunks(m + n) {
                        da.extend_from_slice(&row[..m]);
                        db.extend_from_slice(&row[m..]);
                    }
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::StackRows(rows) => {
                    let n = g.len() / rows.len();
                    for (t, &r) in rows.iter().enumerate() {
                        self.accumulate(r, &g[t * n..(t + 1) * n]);
                    }
                }
                Op::Reshape(x) => {
                    self.accumulate(x, &g);
                }
            }
        }
        Ok(())
    }

    /// Adds the gradients of every bound parameter into the [`ParamSet`].
    pub fn accumulate_param_grads(&self, ps: &mut ParamSet) {
        for node in &self.nodes {
            if let Op::Param(id) = node.op {
                if let Some(g) = node.value.grad() {
                    ps.accumulate_grad(id, g);
                }
            }
        }
    }

    /// Ids and gradient slices of every parameter bound to this tape.
    pub fn param_grads(&self) -> Vec<(ParamId, &[f32])> {
        self.nodes
            .iter()
            .filter_map(|node| match node.op {
                Op::Param(id) => node.value.grad().map(|g| (id, g)),
                _ => None,
            })
            .collect()
    }

    /// The tape node a parameter is bound to, if it was used.
    pub fn param_var(&self, id: ParamId) -> Option<Var> {
        self.param_cache.get(&id).copied()
    }

    /// Re-executes the recorded operations in double precision, with
    /// selected leaf coordinates overridden, and returns the value of
    /// `target`. Replay follows the recorded graph exactly, which is what
    /// the finite-difference checker needs.
    pub fn replay_f64(&self, target: Var, overrides: &[(Var, usize, f64)]) -> f64 {
        let mut vals: Vec<Vec<f64>> = Vec::with_capacity(target.0 + 1);
        for i in 0..=target.0 {
            let node = &self.nodes[i];
            let mut v: Vec<f64> = match &node.op {
                Op::Leaf | Op::Param(_) => {
                    node.value.data().iter().map(|&x| x as f64).collect()
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(*a).dims2().unwrap();
                    let n = self.value(*b).dims2().unwrap().1;
                    matmul_kernel(&vals[a.0], &vals[b.0], m, k, n)
                }
                Op::Add(a, b) => vals[a.0]
                    .iter()
                    .zip(&vals[b.0])
                    .map(|(x, y)| x + y)
                    .collect(),
                Op::AddRowBroadcast(m_var, bias) => {
                    let n = self.value(*bias).numel();
                    vals[m_var.0]
                        .chunks(n)
                        .flat_map(|row| {
                            row.iter()
                                .zip(&vals[bias.0])
                                .map(|(x, y)| x + y)
                                .collect::<Vec<_>>()
                        })
                        .collect()
                }
                Op::Mul(a, b) => vals[a.0]
                    .iter()
                    .zip(&vals[b.0])
                    .map(|(x, y)| x * y)
                    .collect(),
                Op::OneMinus(x) => vals[x.0].iter().map(|v| 1.0 - v).collect(),
                Op::Scale(x, c) => vals[x.0].iter().map(|v| v * *c as f64).collect(),
                Op::Sigmoid(x) => vals[x.0].iter().map(|&v| sigmoid_f64(v)).collect(),
                Op::Tanh(x) => vals[x.0].iter().map(|v| v.tanh()).collect(),
                Op::Relu(x) => vals[x.0].iter().map(|v| v.max(0.0)).collect(),
                Op::Softmax(x) => softmax_f64(&vals[x.0]),
                Op::Ln(x) => vals[x.0]
                    .iter()
                    .map(|v| v.max(LN_FLOOR as f64).ln())
                    .collect(),
                Op::Sum(x) => vec![vals[x.0].iter().sum()],
                Op::MeanRows(x) => {
                    let (rows, n) = self.value(*x).dims2().unwrap();
                    let mut out = vec![0.0; n];
                    for row in vals[x.0].chunks(n) {
                        for (o, v) in out.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    for o in &mut out {
                        *o /= rows as f64;
                    }
                    out
                }
                Op::ConcatCols(a, b) => {
                    let m = self.value(*a).dims2().unwrap().1;
                    let n = self.value(*b).dims2().unwrap().1;
                    let mut out = Vec::with_capacity(vals[a.0].len() + vals[b.0].len());
                    for (ra, rb) in vals[a.0].chunks(m).zip(vals[b.0].chunks(n)) {
                        out.extend_from_slice(ra);
                        out.extend_from_slice(rb);
                    }
                    out
                }
                Op::StackRows(rows) => {
                    let mut out = Vec::new();
                    for r in rows {
                        out.extend_from_slice(&vals[r.0]);
                    }
                    out
                }
                Op::Reshape(x) => vals[x.0].clone(),
            };
            for &(var, coord, val) in overrides {
                if var.0 == i {
                    v[coord] = val;
                }
            }
            vals.push(v);
        }
        vals[target.0][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_grad(t: &Tape, v: Var) -> Vec<f32> {
        t.grad(v).unwrap().to_vec()
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let i2 = t.leaf(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let a = t.leaf(Tensor::matrix(2, 2, vec![3.0, -1.0, 2.5, 7.0]).unwrap());
        let c = t.matmul(i2, a).unwrap();
        assert_eq!(t.data(c), &[3.0, -1.0, 2.5, 7.0]);
    }

    #[test]
    fn matmul_forced_case() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = t.leaf(Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.data(c), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let b = t.leaf(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let err = t.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn sigmoid_tanh_relu_fixed_points() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(vec![0.0, -3.0]).unwrap());
        let s = t.sigmoid(x).unwrap();
        let th = t.tanh(x).unwrap();
        let r = t.relu(x).unwrap();
        assert_eq!(t.data(s)[0], 0.5);
        assert_eq!(t.data(th)[0], 0.0);
        assert_eq!(t.data(r)[1], 0.0);
    }

    #[test]
    fn sigmoid_large_inputs_stable() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(vec![200.0, -200.0]).unwrap());
        let s = t.sigmoid(x).unwrap();
        // Reference values from an exact evaluation: saturates without
        // overflowing.
        assert!((t.data(s)[0] - 1.0).abs() < 1e-6);
        assert!(t.data(s)[1] >= 0.0 && t.data(s)[1] < 1e-6);
        assert!(t.data(s).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_basics() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(vec![0.0, 0.0]).unwrap());
        let s = t.softmax(x).unwrap();
        assert_eq!(t.data(s), &[0.5, 0.5]);

        let y = t.leaf(Tensor::row(vec![1.0f32.ln(), 3.0f32.ln()]).unwrap());
        let sy = t.softmax(y).unwrap();
        assert!((t.data(sy)[0] - 0.25).abs() < 1e-6);
        assert!((t.data(sy)[1] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut t = Tape::new();
        let v = vec![0.3, -1.2, 2.0, 0.0];
        let x = t.leaf(Tensor::row(v.clone()).unwrap());
        let xs = t.softmax(x).unwrap();
        let shifted = t.leaf(Tensor::row(v.iter().map(|a| a + 7.5).collect()).unwrap());
        let ss = t.softmax(shifted).unwrap();
        for (a, b) in t.data(xs).iter().zip(t.data(ss)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn backward_sum_gives_ones() {
        let mut t = Tape::new();
        let x = t.leaf(
            Tensor::row(vec![1.0, -2.0, 5.0])
                .unwrap()
                .with_requires_grad(),
        );
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert_eq!(leaf_grad(&t, x), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_square_gives_two_x() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(3.0).with_requires_grad());
        let sq = t.mul(x, x).unwrap();
        t.backward(sq).unwrap();
        assert_eq!(leaf_grad(&t, x), vec![6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(vec![1.0, 2.0]).unwrap().with_requires_grad());
        let err = t.backward(x).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn shared_param_grads_accumulate() {
        let mut ps = ParamSet::new();
        let w = ps
            .add("w", Tensor::scalar(2.0).with_requires_grad())
            .unwrap();
        let mut t = Tape::new();
        let v1 = t.param(&ps, w);
        let v2 = t.param(&ps, w);
        assert_eq!(v1, v2);
        // loss = w * w + w  =>  dloss/dw = 2w + 1 = 5
        let sq = t.mul(v1, v2).unwrap();
        let loss0 = t.add(sq, v1).unwrap();
        let loss = t.sum(loss0).unwrap();
        t.backward(loss).unwrap();
        t.accumulate_param_grads(&mut ps);
        assert_eq!(ps.get(w).grad().unwrap(), &[5.0]);
    }

    #[test]
    fn replay_matches_f32_forward() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(vec![0.5, -1.5]).unwrap().with_requires_grad());
        let s = t.sigmoid(x).unwrap();
        let sm = t.softmax(s).unwrap();
        let l = t.ln(sm).unwrap();
        let loss = t.sum(l).unwrap();
        let replayed = t.replay_f64(loss, &[]);
        assert!((replayed - t.data(loss)[0] as f64).abs() < 1e-6);
    }
}
