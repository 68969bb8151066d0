//! Tape-based reverse-mode autodiff over dense row-major f64 matrices.
//!
//! A [`Graph`] borrows a [`ParamStore`], records every op as a node, and
//! [`Graph::backward`] walks the tape once in reverse. Parameters are bound
//! lazily (`g.param(id)`) and cached, so a parameter used many times is one
//! leaf with one accumulated gradient.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::arc_length_plan;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec shape mismatch");
        Mat { rows, cols, data }
    }

    pub fn scalar(x: f64) -> Self {
        Mat { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn col(xs: &[f64]) -> Self {
        Mat { rows: xs.len(), cols: 1, data: xs.to_vec() }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, o: &Mat) -> bool {
        self.rows == o.rows && self.cols == o.cols
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    fn add_assign(&mut self, o: &Mat) {
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a += b;
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// `a (n x k) * b (k x m)`.
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "matmul shape mismatch");
    let mut out = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let o = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let x = a.data[i * a.cols + k];
            if x == 0.0 {
                continue;
            }
            let br = &b.data[k * b.cols..(k + 1) * b.cols];
            for (oj, bj) in o.iter_mut().zip(br) {
                *oj += x * bj;
            }
        }
    }
    out
}

/// `a * b^T`.
fn matmul_nt(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = ar.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `a^T * b`.
fn matmul_tn(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let br = b.row(k);
        for i in 0..a.cols {
            let x = a.data[k * a.cols + i];
            if x == 0.0 {
                continue;
            }
            let o = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (oj, bj) in o.iter_mut().zip(br) {
                *oj += x * bj;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Mat>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, m: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter name {name}");
        self.names.push(name);
        self.tensors.push(m);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Total number of trainable scalars.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> &[Mat] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Mat] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(|s| s.as_str()).zip(&self.tensors)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GradError {
    NotScalar { rows: usize, cols: usize },
    ForeignVar,
}

impl fmt::Display for GradError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradError::NotScalar { rows, cols } => write!(f, "backward needs a 1x1 loss, got {rows}x{cols}"),
            GradError::ForeignVar => write!(f, "variable does not belong to this graph"),
        }
    }
}

impl core::error::Error for GradError {}

enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    AddScalarVar(Var, Var),
    MulScalarVar(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Recip(Var),
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    Softplus(Var),
    Sin(Var),
    Cos(Var),
    SoftmaxRows(Var),
    LayerNormRows(Var, Vec<f64>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    ReverseRows(Var),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    CumsumRows(Var),
    Chamfer(Var, Vec<Mat>, Vec<(Vec<usize>, Vec<usize>)>),
    Resample(Var, Vec<(usize, f64)>, Vec<f64>),
    Rope(Var, Var),
}

struct Node {
    value: Mat,
    op: Op,
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    bound: Vec<Option<Var>>,
}

/// Gradients aligned with the store's parameters; unused ones are zero.
pub type Grads = Vec<Mat>;

const LN_EPS: f64 = 1e-5;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

const INV_SQRT2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * INV_SQRT2))
}

fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * INV_SQRT2)) + x * INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest-neighbour indices both ways and the chamfer value.
pub(crate) fn chamfer_match(p: &Mat, q: &Mat) -> (f64, Vec<usize>, Vec<usize>) {
    let (n, m) = (p.rows, q.rows);
    let mut best_p = vec![f64::INFINITY; n];
    let mut arg_p = vec![0usize; n];
    let mut best_q = vec![f64::INFINITY; m];
    let mut arg_q = vec![0usize; m];
    for i in 0..n {
        let pi = p.row(i);
        for j in 0..m {
            let d = sq_dist(pi, q.row(j));
            if d < best_p[i] {
                best_p[i] = d;
                arg_p[i] = j;
            }
            if d < best_q[j] {
                best_q[j] = d;
                arg_q[j] = i;
            }
        }
    }
    let v = best_p.iter().sum::<f64>() / (2.0 * n as f64) + best_q.iter().sum::<f64>() / (2.0 * m as f64);
    (v, arg_p, arg_q)
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph { store, nodes: Vec::new(), bound: vec![None; store.len()] }
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        debug_assert!(value.data.iter().all(|x| x.is_finite()), "non-finite value on tape");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.push(self.store.get(id).clone(), Op::Param(id.0));
        self.bound[id.0] = Some(v);
        v
    }

    fn v(&self, a: Var) -> &Mat {
        &self.nodes[a.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let m = matmul(self.v(a), self.v(b));
        self.push(m, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let m = self.v(a).transpose();
        self.push(m, Op::Transpose(a))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (x, y) = (self.v(a), self.v(b));
        assert!(x.same_shape(y), "elementwise shape mismatch {}x{} vs {}x{}", x.rows, x.cols, y.rows, y.cols);
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect();
        let m = Mat::from_vec(x.rows, x.cols, data);
        self.push(m, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn row_op(&mut self, a: Var, r: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (x, row) = (self.v(a), self.v(r));
        assert!(row.rows == 1 && row.cols == x.cols, "row broadcast shape mismatch");
        let mut m = x.clone();
        for i in 0..m.rows {
            for j in 0..m.cols {
                m.data[i * m.cols + j] = f(m.data[i * m.cols + j], row.data[j]);
            }
        }
        self.push(m, op)
    }

    /// `a + 1 r` for a 1 x cols row `r`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        self.row_op(a, r, |x, y| x + y, Op::AddRow(a, r))
    }

    /// Each row of `a` times `r` elementwise.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Var {
        self.row_op(a, r, |x, y| x * y, Op::MulRow(a, r))
    }

    pub fn add_scalar_var(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.v(s).len(), 1);
        let k = self.v(s).data[0];
        let m = self.v(a).map(|x| x + k);
        self.push(m, Op::AddScalarVar(a, s))
    }

    pub fn mul_scalar_var(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.v(s).len(), 1);
        let k = self.v(s).data[0];
        let m = self.v(a).map(|x| x * k);
        self.push(m, Op::MulScalarVar(a, s))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let m = self.v(a).map(|x| x * c);
        self.push(m, Op::Scale(a, c))
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let m = self.v(a).map(|x| x + c);
        self.push(m, Op::Offset(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let m = self.v(a).map(|x| 1.0 / x);
        self.push(m, Op::Recip(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let m = self.v(a).map(libm::tanh);
        self.push(m, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let m = self.v(a).map(sigmoid);
        self.push(m, Op::Sigmoid(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let m = self.v(a).map(gelu);
        self.push(m, Op::Gelu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let m = self.v(a).map(softplus);
        self.push(m, Op::Softplus(a))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let m = self.v(a).map(libm::sin);
        self.push(m, Op::Sin(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let m = self.v(a).map(libm::cos);
        self.push(m, Op::Cos(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut m = self.v(a).clone();
        for i in 0..m.rows {
            let row = &mut m.data[i * m.cols..(i + 1) * m.cols];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in row.iter_mut() {
                *x = libm::exp(*x - mx);
                s += *x;
            }
            row.iter_mut().for_each(|x| *x /= s);
        }
        self.push(m, Op::SoftmaxRows(a))
    }

    /// Per-row standardization (no affine part; compose with `mul_row` /
    /// `add_row` for gain and bias).
    pub fn layer_norm_rows(&mut self, a: Var) -> Var {
        let mut m = self.v(a).clone();
        let mut rstd = Vec::with_capacity(m.rows);
        let c = m.cols as f64;
        for i in 0..m.rows {
            let row = &mut m.data[i * m.cols..(i + 1) * m.cols];
            let mu = row.iter().sum::<f64>() / c;
            let var = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / c;
            let r = 1.0 / libm::sqrt(var + LN_EPS);
            row.iter_mut().for_each(|x| *x = (*x - mu) * r);
            rstd.push(r);
        }
        self.push(m, Op::LayerNormRows(a, rstd))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let x = self.v(a);
        assert!(start <= end && end <= x.rows);
        let m = Mat::from_vec(end - start, x.cols, x.data[start * x.cols..end * x.cols].to_vec());
        self.push(m, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let x = self.v(a);
        assert!(start <= end && end <= x.cols);
        let mut data = Vec::with_capacity(x.rows * (end - start));
        for i in 0..x.rows {
            data.extend_from_slice(&x.data[i * x.cols + start..i * x.cols + end]);
        }
        let m = Mat::from_vec(x.rows, end - start, data);
        self.push(m, Op::SliceCols(a, start))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.v(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let x = self.v(p);
            assert_eq!(x.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&x.data);
            rows += x.rows;
        }
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.v(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.v(p).cols).sum();
        let mut m = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let x = self.v(p);
            assert_eq!(x.rows, rows, "concat_cols row mismatch");
            for i in 0..rows {
                m.data[i * cols + off..i * cols + off + x.cols].copy_from_slice(x.row(i));
            }
            off += x.cols;
        }
        self.push(m, Op::ConcatCols(parts.to_vec()))
    }

    pub fn reverse_rows(&mut self, a: Var) -> Var {
        let x = self.v(a);
        let data = x.data.chunks_exact(x.cols.max(1)).rev().flatten().copied().collect();
        let m = Mat::from_vec(x.rows, x.cols, data);
        self.push(m, Op::ReverseRows(a))
    }

    /// Row-major reinterpretation.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.v(a);
        assert_eq!(x.len(), rows * cols, "reshape size mismatch");
        let m = Mat::from_vec(rows, cols, x.data.clone());
        self.push(m, Op::Reshape(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.v(a).data.iter().sum();
        self.push(Mat::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.v(a);
        let s = x.data.iter().sum::<f64>() / x.len() as f64;
        self.push(Mat::scalar(s), Op::Mean(a))
    }

    /// Inclusive running sum down each column.
    pub fn cumsum_rows(&mut self, a: Var) -> Var {
        let mut m = self.v(a).clone();
        for i in 1..m.rows {
            for j in 0..m.cols {
                m.data[i * m.cols + j] += m.data[(i - 1) * m.cols + j];
            }
        }
        self.push(m, Op::CumsumRows(a))
    }

    /// Mean chamfer distance between the rows of `pred` and each constant
    /// target cloud. Gradient flows to `pred` only.
    pub fn chamfer(&mut self, pred: Var, targets: &[Mat]) -> Var {
        assert!(!targets.is_empty());
        let p = self.v(pred);
        let mut total = 0.0;
        let mut args = Vec::with_capacity(targets.len());
        for t in targets {
            assert_eq!(t.cols, p.cols, "chamfer dimension mismatch");
            let (v, ap, aq) = chamfer_match(p, t);
            total += v;
            args.push((ap, aq));
        }
        let m = Mat::scalar(total / targets.len() as f64);
        self.push(m, Op::Chamfer(pred, targets.to_vec(), args))
    }

    /// Arc-length-uniform resampling of the rows of `a` (a polyline) to `n`
    /// rows, differentiable through the arc-length positions.
    pub fn resample(&mut self, a: Var, n: usize) -> Var {
        let x = self.v(a);
        let (plan, lens) = arc_length_plan(&x.data, x.cols, n);
        let m = Mat::from_vec(n, x.cols, crate::geometry::apply_plan(&x.data, x.cols, &plan));
        self.push(m, Op::Resample(a, plan, lens))
    }

    /// Rotate coordinate pairs `(2j, 2j+1)` of row `i` by `angles[i][j]`.
    pub fn rope(&mut self, x: Var, angles: Var) -> Var {
        let (xv, th) = (self.v(x), self.v(angles));
        assert!(xv.cols % 2 == 0 && th.cols * 2 == xv.cols && th.rows == xv.rows, "rope shape mismatch");
        let mut m = xv.clone();
        for i in 0..xv.rows {
            for j in 0..th.cols {
                let (c, s) = (libm::cos(th.at(i, j)), libm::sin(th.at(i, j)));
                let (a, b) = (xv.at(i, 2 * j), xv.at(i, 2 * j + 1));
                m.data[i * m.cols + 2 * j] = a * c - b * s;
                m.data[i * m.cols + 2 * j + 1] = a * s + b * c;
            }
        }
        self.push(m, Op::Rope(x, angles))
    }

    /// Reverse sweep from a 1x1 `loss`. Returns one gradient per parameter in
    /// the store (zeros for parameters this graph never touched).
    pub fn backward(&self, loss: Var) -> Result<Grads, GradError> {
        if loss.0 >= self.nodes.len() {
            return Err(GradError::ForeignVar);
        }
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(GradError::NotScalar { rows: lv.rows, cols: lv.cols });
        }
        let mut grads: Vec<Option<Mat>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Mat::scalar(1.0));
        let mut out: Grads = self.store.tensors().iter().map(|t| Mat::zeros(t.rows, t.cols)).collect();

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(x) => x.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => out[*p].add_assign(&g),
                Op::MatMul(a, b) => {
                    let ga = matmul_nt(&g, self.v(*b));
                    let gb = matmul_tn(self.v(*a), &g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|x| -x));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (x, z) = (self.v(*a), self.v(*b));
                    let ga = Mat::from_vec(g.rows, g.cols, g.data.iter().zip(&z.data).map(|(p, q)| p * q).collect());
                    let gb = Mat::from_vec(g.rows, g.cols, g.data.iter().zip(&x.data).map(|(p, q)| p * q).collect());
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, r) => {
                    let mut gr = Mat::zeros(1, g.cols);
                    for i in 0..g.rows {
                        for j in 0..g.cols {
                            gr.data[j] += g.data[i * g.cols + j];
                        }
                    }
                    acc(&mut grads, *r, gr);
                    acc(&mut grads, *a, g);
                }
                Op::MulRow(a, r) => {
                    let (x, row) = (self.v(*a), self.v(*r));
                    let mut gr = Mat::zeros(1, g.cols);
                    let mut ga = g.clone();
                    for i in 0..g.rows {
                        for j in 0..g.cols {
                            let k = i * g.cols + j;
                            gr.data[j] += g.data[k] * x.data[k];
                            ga.data[k] *= row.data[j];
                        }
                    }
                    acc(&mut grads, *r, gr);
                    acc(&mut grads, *a, ga);
                }
                Op::AddScalarVar(a, s) => {
                    let gs = g.data.iter().sum();
                    acc(&mut grads, *s, Mat::scalar(gs));
                    acc(&mut grads, *a, g);
                }
                Op::MulScalarVar(a, s) => {
                    let x = self.v(*a);
                    let k = self.v(*s).data[0];
                    let gs = g.data.iter().zip(&x.data).map(|(p, q)| p * q).sum();
                    acc(&mut grads, *s, Mat::scalar(gs));
                    acc(&mut grads, *a, g.map(|v| v * k));
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g.map(|v| v * c)),
                Op::Offset(a) => acc(&mut grads, *a, g),
                Op::Recip(_) | Op::Tanh(_) | Op::Sigmoid(_) | Op::Sin(_) | Op::Cos(_) | Op::Gelu(_) | Op::Softplus(_) => {
                    let (a, x) = match &node.op {
                        Op::Recip(a) | Op::Tanh(a) | Op::Sigmoid(a) | Op::Sin(a) | Op::Cos(a) | Op::Gelu(a) | Op::Softplus(a) => {
                            (*a, self.v(*a))
                        }
                        _ => unreachable!(),
                    };
                    let d: Vec<f64> = match &node.op {
                        Op::Recip(_) => y.data.iter().map(|v| -v * v).collect(),
                        Op::Tanh(_) => y.data.iter().map(|v| 1.0 - v * v).collect(),
                        Op::Sigmoid(_) => y.data.iter().map(|v| v * (1.0 - v)).collect(),
                        Op::Sin(_) => x.data.iter().map(|&v| libm::cos(v)).collect(),
                        Op::Cos(_) => x.data.iter().map(|&v| -libm::sin(v)).collect(),
                        Op::Gelu(_) => x.data.iter().map(|&v| gelu_grad(v)).collect(),
                        _ => x.data.iter().map(|&v| sigmoid(v)).collect(),
                    };
                    let ga = Mat::from_vec(g.rows, g.cols, g.data.iter().zip(&d).map(|(p, q)| p * q).collect());
                    acc(&mut grads, a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let mut ga = g.clone();
                    for i in 0..g.rows {
                        let yr = y.row(i);
                        let gr = g.row(i);
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..g.cols {
                            ga.data[i * g.cols + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNormRows(a, rstd) => {
                    let mut ga = g.clone();
                    let c = g.cols as f64;
                    for i in 0..g.rows {
                        let yr = y.row(i);
                        let gr = g.row(i);
                        let mg = gr.iter().sum::<f64>() / c;
                        let mgy = gr.iter().zip(yr).map(|(p, q)| p * q).sum::<f64>() / c;
                        for j in 0..g.cols {
                            ga.data[i * g.cols + j] = rstd[i] * (gr[j] - mg - yr[j] * mgy);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start) => {
                    let x = self.v(*a);
                    let mut ga = Mat::zeros(x.rows, x.cols);
                    ga.data[start * x.cols..start * x.cols + g.len()].copy_from_slice(&g.data);
                    acc(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start) => {
                    let x = self.v(*a);
                    let mut ga = Mat::zeros(x.rows, x.cols);
                    for i in 0..g.rows {
                        ga.data[i * x.cols + start..i * x.cols + start + g.cols].copy_from_slice(g.row(i));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let x = self.v(p);
                        let n = x.len();
                        acc(&mut grads, p, Mat::from_vec(x.rows, x.cols, g.data[off..off + n].to_vec()));
                        off += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let x = self.v(p);
                        let mut gp = Mat::zeros(x.rows, x.cols);
                        for i in 0..x.rows {
                            gp.data[i * x.cols..(i + 1) * x.cols]
                                .copy_from_slice(&g.data[i * g.cols + off..i * g.cols + off + x.cols]);
                        }
                        acc(&mut grads, p, gp);
                        off += x.cols;
                    }
                }
                Op::ReverseRows(a) => {
                    let data = g.data.chunks_exact(g.cols.max(1)).rev().flatten().copied().collect();
                    acc(&mut grads, *a, Mat::from_vec(g.rows, g.cols, data));
                }
                Op::Reshape(a) => {
                    let x = self.v(*a);
                    acc(&mut grads, *a, Mat::from_vec(x.rows, x.cols, g.data));
                }
                Op::Sum(a) => {
                    let x = self.v(*a);
                    acc(&mut grads, *a, Mat::from_vec(x.rows, x.cols, vec![g.data[0]; x.len()]));
                }
                Op::Mean(a) => {
                    let x = self.v(*a);
                    let k = g.data[0] / x.len() as f64;
                    acc(&mut grads, *a, Mat::from_vec(x.rows, x.cols, vec![k; x.len()]));
                }
                Op::CumsumRows(a) => {
                    let mut ga = g.clone();
                    for i in (0..g.rows.saturating_sub(1)).rev() {
                        for j in 0..g.cols {
                            ga.data[i * g.cols + j] += ga.data[(i + 1) * g.cols + j];
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Chamfer(a, targets, args) => {
                    let p = self.v(*a);
                    let mut ga = Mat::zeros(p.rows, p.cols);
                    let w = g.data[0] / targets.len() as f64;
                    for (t, (ap, aq)) in targets.iter().zip(args) {
                        let (n, m) = (p.rows as f64, t.rows as f64);
                        for i in 0..p.rows {
                            let q = t.row(ap[i]);
                            for c in 0..p.cols {
                                ga.data[i * p.cols + c] += w * (p.at(i, c) - q[c]) / n;
                            }
                        }
                        for j in 0..t.rows {
                            let i = aq[j];
                            for c in 0..p.cols {
                                ga.data[i * p.cols + c] += w * (p.at(i, c) - t.at(j, c)) / m;
                            }
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Resample(a, plan, lens) => {
                    let x = self.v(*a);
                    let d = x.cols;
                    let mut ga = Mat::zeros(x.rows, d);
                    let n = plan.len();
                    let total: f64 = lens.iter().sum();
                    let mut g_len = vec![0.0; lens.len()];
                    let mut common = 0.0;
                    let mut below = vec![0.0; lens.len() + 1];
                    for (j, &(k, alpha)) in plan.iter().enumerate() {
                        let mut c_j = 0.0;
                        for c in 0..d {
                            let gj = g.at(j, c);
                            ga.data[k * d + c] += (1.0 - alpha) * gj;
                            ga.data[(k + 1) * d + c] += alpha * gj;
                            c_j += gj * (x.at(k + 1, c) - x.at(k, c));
                        }
                        if total == 0.0 || j == 0 || j == n - 1 || lens[k] == 0.0 {
                            continue;
                        }
                        let r = j as f64 / (n - 1) as f64;
                        common += c_j * r / lens[k];
                        below[k] += c_j / lens[k];
                        g_len[k] -= c_j * alpha / lens[k];
                    }
                    // Subtract contributions of every target whose segment lies after m.
                    let mut suffix = 0.0;
                    for m in (0..lens.len()).rev() {
                        g_len[m] += common - suffix;
                        suffix += below[m];
                    }
                    for (m, &l) in lens.iter().enumerate() {
                        if l == 0.0 || g_len[m] == 0.0 {
                            continue;
                        }
                        for c in 0..d {
                            let u = (x.at(m + 1, c) - x.at(m, c)) / l;
                            ga.data[(m + 1) * d + c] += g_len[m] * u;
                            ga.data[m * d + c] -= g_len[m] * u;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Rope(xv, th) => {
                    let (xm, tm) = (self.v(*xv), self.v(*th));
                    let mut gx = Mat::zeros(xm.rows, xm.cols);
                    let mut gt = Mat::zeros(tm.rows, tm.cols);
                    for i in 0..xm.rows {
                        for j in 0..tm.cols {
                            let (c, s) = (libm::cos(tm.at(i, j)), libm::sin(tm.at(i, j)));
                            let (g0, g1) = (g.at(i, 2 * j), g.at(i, 2 * j + 1));
                            let (y0, y1) = (y.at(i, 2 * j), y.at(i, 2 * j + 1));
                            gx.data[i * xm.cols + 2 * j] = g0 * c + g1 * s;
                            gx.data[i * xm.cols + 2 * j + 1] = -g0 * s + g1 * c;
                            gt.data[i * tm.cols + j] = -g0 * y1 + g1 * y0;
                        }
                    }
                    acc(&mut grads, *xv, gx);
                    acc(&mut grads, *th, gt);
                }
            }
        }
        Ok(out)
    }
}

/// Central finite-difference gradient check.
pub mod check {
    use super::*;
    use crate::rng::Rng;

    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct CheckReport {
        pub max_rel_err: f64,
        pub checked: usize,
    }

    /// Compare `backward` against central differences with step `eps` on up
    /// to `per_tensor` randomly chosen entries of every parameter tensor.
    /// Relative error is `|a - n| / max(|a|, |n|, floor)`.
    pub fn gradcheck<F>(store: &ParamStore, f: F, eps: f64, floor: f64, per_tensor: usize, rng: &mut Rng) -> CheckReport
    where
        F: Fn(&mut Graph<'_>) -> Var,
    {
        let analytic = {
            let mut g = Graph::new(store);
            let l = f(&mut g);
            g.backward(l).expect("scalar loss")
        };
        let eval = |s: &ParamStore| {
            let mut g = Graph::new(s);
            let l = f(&mut g);
            g.scalar_value(l)
        };
        let mut work = store.clone();
        let mut worst = 0.0f64;
        let mut checked = 0;
        for t in 0..store.len() {
            let n = store.tensors()[t].len();
            let idx: Vec<usize> = if n <= per_tensor { (0..n).collect() } else { (0..per_tensor).map(|_| rng.below(n)).collect() };
            for i in idx {
                let orig = work.tensors()[t].data[i];
                work.tensors_mut()[t].data[i] = orig + eps;
                let up = eval(&work);
                work.tensors_mut()[t].data[i] = orig - eps;
                let dn = eval(&work);
                work.tensors_mut()[t].data[i] = orig;
                let num = (up - dn) / (2.0 * eps);
                let a = analytic[t].data[i];
                let rel = libm::fabs(a - num) / libm::fabs(a).max(libm::fabs(num)).max(floor);
                worst = worst.max(rel);
                checked += 1;
            }
        }
        CheckReport { max_rel_err: worst, checked }
    }
}
