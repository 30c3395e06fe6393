//! Dense `f64` tensors and a tape-based reverse-mode autodiff engine.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles. Nodes are
//! appended in evaluation order, so walking the tape backwards is a valid
//! topological order for the chain rule. Tapes are cheap to build and are thrown
//! away after each backward pass.

use std::fmt;
use std::rc::Rc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} elements")]
    BadLength { shape: Vec<usize>, len: usize },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("backward requires a scalar output, got shape {0:?}")]
    NonScalar(Vec<usize>),
}

pub type Result<T> = std::result::Result<T, TensorError>;

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major dense tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .field("requires_grad", &self.requires_grad)
            .finish()
    }
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(TensorError::BadLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel(shape)],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a matrix from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::Invalid {
                op: "from_rows",
                msg: "ragged rows".into(),
            });
        }
        let data = rows.iter().flatten().copied().collect();
        Tensor::new(data, &[rows.len(), cols])
    }

    pub fn with_requires_grad(mut self, flag: bool) -> Self {
        self.requires_grad = flag;
        self
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

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(TensorError::BadLength {
                shape: self.shape.clone(),
                len: grad.len(),
            });
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.data.len() {
            return Err(TensorError::BadLength {
                shape: shape.to_vec(),
                len: self.data.len(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Element `(i, j)` of a matrix.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let c = self.shape[1];
        self.data[i * c + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let c = self.cols();
        (0..self.rows()).map(|i| self.data[i * c + j]).collect()
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = Tensor::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        mm_nn(&self.data, &other.data, &mut out, m, k, n);
        Tensor::new(out, &[m, n])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
            requires_grad: false,
            grad: None,
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "zip_map",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            requires_grad: false,
            grad: None,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `max |self - other|`, or infinity on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

// ---------------------------------------------------------------------------
// dense kernels

/// `out[m,n] += a[m,k] * b[k,n]`
pub(crate) fn mm_nn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    // four output rows at a time so each row of `b` is loaded once per block
    let mut i = 0;
    while i + 4 <= m {
        let (o0, rest) = out[i * n..(i + 4) * n].split_at_mut(n);
        let (o1, rest) = rest.split_at_mut(n);
        let (o2, o3) = rest.split_at_mut(n);
        for p in 0..k {
            let (a0, a1, a2, a3) = (a[i * k + p], a[(i + 1) * k + p], a[(i + 2) * k + p], a[(i + 3) * k + p]);
            if a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                let bv = brow[j];
                o0[j] += a0 * bv;
                o1[j] += a1 * bv;
                o2[j] += a2 * bv;
                o3[j] += a3 * bv;
            }
        }
        i += 4;
    }
    for i in i..m {
        let orow = &mut out[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m,k] += g[m,n] * b[k,n]^T`
fn mm_nt(g: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        let orow = &mut out[i * k..(i + 1) * k];
        let mut p = 0;
        while p + 4 <= k {
            let (b0, b1, b2, b3) = (
                &b[p * n..(p + 1) * n],
                &b[(p + 1) * n..(p + 2) * n],
                &b[(p + 2) * n..(p + 3) * n],
                &b[(p + 3) * n..(p + 4) * n],
            );
            let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..n {
                let x = grow[j];
                s0 += x * b0[j];
                s1 += x * b1[j];
                s2 += x * b2[j];
                s3 += x * b3[j];
            }
            orow[p] += s0;
            orow[p + 1] += s1;
            orow[p + 2] += s2;
            orow[p + 3] += s3;
            p += 4;
        }
        for p in p..k {
            let brow = &b[p * n..(p + 1) * n];
            orow[p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// Whether `src` broadcasts against `out` by plain repetition, i.e. it equals
/// a suffix of `out`.
fn is_suffix(out: &[usize], src: &[usize]) -> bool {
    src.len() <= out.len() && out[out.len() - src.len()..] == *src
}

/// `out[k,n] += a[m,k]^T * g[m,n]`
fn mm_tn(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let r = a.len().max(b.len());
    let mut out = vec![0; r];
    for i in 0..r {
        let da = if i + a.len() >= r { a[i + a.len() - r] } else { 1 };
        let db = if i + b.len() >= r { b[i + b.len() - r] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For each flat index of `out`, the flat index into a tensor of shape `src`
/// broadcast against it.
fn broadcast_map(out: &[usize], src: &[usize]) -> Vec<usize> {
    let r = out.len();
    let src_strides = strides(src);
    let mut eff = vec![0; r];
    for (i, e) in eff.iter_mut().enumerate() {
        if i + src.len() >= r {
            let j = i + src.len() - r;
            if src[j] != 1 {
                *e = src_strides[j];
            }
        }
    }
    let total = numel(out);
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; r];
    let mut off = 0usize;
    for _ in 0..total {
        map.push(off);
        for d in (0..r).rev() {
            idx[d] += 1;
            off += eff[d];
            if idx[d] < out[d] {
                break;
            }
            off -= eff[d] * idx[d];
            idx[d] = 0;
        }
    }
    map
}

// ---------------------------------------------------------------------------
// sparse constant operand

/// Constant sparse matrix in CSR form, used for graph aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut trip = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                trip.push((self.indices[p], r, self.values[p]));
            }
        }
        Csr::from_triplets(self.cols, self.rows, trip)
    }

    /// `out[rows, f] += self * x[cols, f]`
    fn spmm_into(&self, x: &[f64], f: usize, out: &mut [f64]) {
        for r in 0..self.rows {
            let orow = &mut out[r * f..(r + 1) * f];
            for p in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[p];
                let v = self.values[p];
                for (o, &xv) in orow.iter_mut().zip(&x[c * f..(c + 1) * f]) {
                    *o += v * xv;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// tape

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    BatchMatMul(Var, Var),
    Abs(Var),
    Relu(Var),
    Square(Var),
    Tanh(Var),
    Sum(Var),
    Mean(Var),
    SumAxis(Var, usize),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    Slice(Var, usize, usize),
    GatherRows(Var, Rc<Vec<usize>>),
    PairMul(Var, Rc<Vec<(usize, usize)>>),
    PairDot(Var, Rc<Vec<(usize, usize)>>),
    SpMM(Rc<Csr>, Var),
    BceWithLogits(Var, Rc<Vec<f64>>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `v`, or zeros of `len` when `v` did not influence the output.
    pub fn get_or_zeros(&self, v: Var, len: usize) -> Vec<f64> {
        self.get(v).map_or_else(|| vec![0.0; len], |g| g.to_vec())
    }
}

/// Records operations for reverse-mode differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    min_kink: f64,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            min_kink: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest `|x|` fed to `abs` or `relu` so far. Finite-difference checks
    /// are only meaningful when this exceeds the step size.
    pub fn min_kink_distance(&self) -> f64 {
        self.min_kink
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    fn data(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value.data
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records `t` as a leaf; gradients are tracked iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad;
        let value = Tensor {
            shape: t.shape,
            data: t.data,
            requires_grad: rg,
            grad: None,
        };
        self.push(value, Op::Leaf, rg)
    }

    /// Leaf that always tracks gradients.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(true))
    }

    /// Leaf that never tracks gradients.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_requires_grad(false))
    }

    fn raw(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let ng = self.ng(a) || self.ng(b);
        if sa == sb {
            let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
            return Ok((Self::raw(sa.to_vec(), data), ng));
        }
        let out = broadcast_shape(sa, sb).ok_or_else(|| TensorError::ShapeMismatch {
            op,
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        })?;
        if out == sa && is_suffix(sa, sb) && !sb.is_empty() {
            let (da, db) = (self.data(a), self.data(b));
            let w = db.len();
            let mut data = Vec::with_capacity(da.len());
            for chunk in da.chunks(w) {
                data.extend(chunk.iter().zip(db).map(|(&x, &y)| f(x, y)));
            }
            return Ok((Self::raw(out, data), ng));
        }
        let ma = broadcast_map(&out, sa);
        let mb = broadcast_map(&out, sb);
        let (da, db) = (self.data(a), self.data(b));
        let data = ma.iter().zip(&mb).map(|(&i, &j)| f(da[i], db[j])).collect();
        Ok((Self::raw(out, data), ng))
    }

    /// Elementwise sum with trailing-axis broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ng) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ng) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), ng))
    }

    /// Elementwise (Hadamard) product with trailing-axis broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, ng) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), ng))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let v = self.value(a);
        let t = Self::raw(v.shape.clone(), v.data.iter().map(|&x| f(x)).collect());
        let ng = self.ng(a);
        self.push(t, op, ng)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    fn note_kinks(&mut self, a: Var) {
        let m = self.data(a).iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        self.min_kink = self.min_kink.min(m);
    }

    /// Elementwise `|x|`; the subgradient at 0 is 0.
    pub fn abs(&mut self, a: Var) -> Var {
        self.note_kinks(a);
        self.unary(a, Op::Abs(a), f64::abs)
    }

    /// Elementwise `max(x, 0)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        self.note_kinks(a);
        self.unary(a, Op::Relu(a), |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        mm_nn(self.data(a), self.data(b), &mut out, m, k, n);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Self::raw(vec![m, n], out), Op::MatMul(a, b), ng))
    }

    /// `[B,m,k] x [B,k,n] -> [B,m,n]`
    pub fn batch_matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(TensorError::ShapeMismatch {
                op: "batch_matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![0.0; bs * m * n];
        let (da, db) = (self.data(a), self.data(b));
        for t in 0..bs {
            mm_nn(
                &da[t * m * k..(t + 1) * m * k],
                &db[t * k * n..(t + 1) * k * n],
                &mut out[t * m * n..(t + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Self::raw(vec![bs, m, n], out), Op::BatchMatMul(a, b), ng))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().sum();
        let ng = self.ng(a);
        self.push(Self::raw(vec![], vec![s]), Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let d = self.data(a);
        let s = d.iter().sum::<f64>() / d.len().max(1) as f64;
        let ng = self.ng(a);
        self.push(Self::raw(vec![], vec![s]), Op::Mean(a), ng)
    }

    /// Sums out `axis`, removing it from the shape.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(TensorError::Invalid {
                op: "sum_axis",
                msg: format!("axis {axis} out of range for {shape:?}"),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let d = self.data(a);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let src = &d[(o * len + l) * inner..(o * len + l + 1) * inner];
                for (x, &y) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *x += y;
                }
            }
        }
        let mut oshape = shape.clone();
        oshape.remove(axis);
        let ng = self.ng(a);
        Ok(self.push(Self::raw(oshape, out), Op::SumAxis(a, axis), ng))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let len = self.data(a).len();
        if numel(shape) != len {
            return Err(TensorError::BadLength {
                shape: shape.to_vec(),
                len,
            });
        }
        let t = Self::raw(shape.to_vec(), self.data(a).to_vec());
        let ng = self.ng(a);
        Ok(self.push(t, Op::Reshape(a), ng))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let mut seen = vec![false; shape.len()];
        if axes.len() != shape.len()
            || axes
                .iter()
                .any(|&x| x >= shape.len() || std::mem::replace(&mut seen[x], true))
        {
            return Err(TensorError::Invalid {
                op: "permute",
                msg: format!("bad axes {axes:?} for {shape:?}"),
            });
        }
        let out = permute_data(self.data(a), &shape, axes);
        let oshape: Vec<usize> = axes.iter().map(|&x| shape[x]).collect();
        let ng = self.ng(a);
        Ok(self.push(Self::raw(oshape, out), Op::Permute(a, axes.to_vec()), ng))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.permute(a, &[1, 0])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or_else(|| TensorError::Invalid {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(TensorError::Invalid {
                op: "concat",
                msg: format!("axis {axis} out of range for {base:?}"),
            });
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let ok = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !ok {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let w = self.shape(p)[axis] * inner;
                out.extend_from_slice(&self.data(p)[o * w..(o + 1) * w]);
            }
        }
        let mut oshape = base;
        oshape[axis] = total;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Self::raw(oshape, out), Op::Concat(parts.to_vec(), axis), ng))
    }

    /// Keeps `start..end` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || start > end || end > shape[axis] {
            return Err(TensorError::Invalid {
                op: "slice",
                msg: format!("range {start}..{end} on axis {axis} of {shape:?}"),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let d = self.data(a);
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * shape[axis] * inner;
            out.extend_from_slice(&d[base + start * inner..base + end * inner]);
        }
        let mut oshape = shape;
        oshape[axis] = end - start;
        let ng = self.ng(a);
        Ok(self.push(Self::raw(oshape, out), Op::Slice(a, start, axis), ng))
    }

    /// Selects rows (entries along axis 0) by index; repeats are allowed.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let rows = *shape.first().ok_or_else(|| TensorError::Invalid {
            op: "gather_rows",
            msg: "scalar input".into(),
        })?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(TensorError::Invalid {
                op: "gather_rows",
                msg: format!("row {bad} out of range {rows}"),
            });
        }
        let w: usize = shape[1..].iter().product();
        let d = self.data(a);
        let mut out = Vec::with_capacity(idx.len() * w);
        for &i in idx.iter() {
            out.extend_from_slice(&d[i * w..(i + 1) * w]);
        }
        let mut oshape = shape;
        oshape[0] = idx.len();
        let ng = self.ng(a);
        Ok(self.push(Self::raw(oshape, out), Op::GatherRows(a, idx), ng))
    }

    fn check_pairs(&self, op: &'static str, z: Var, pairs: &[(usize, usize)]) -> Result<(usize, usize)> {
        let shape = self.shape(z);
        if shape.len() != 2 {
            return Err(TensorError::Invalid {
                op,
                msg: format!("expected [n, d], got {shape:?}"),
            });
        }
        let (n, d) = (shape[0], shape[1]);
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
            return Err(TensorError::Invalid {
                op,
                msg: format!("pair ({i}, {j}) out of range {n}"),
            });
        }
        Ok((n, d))
    }

    /// Rows `z[i] * z[j]` for each pair, shape `[P, d]`, without materializing
    /// the gathered rows.
    pub fn pair_mul(&mut self, z: Var, pairs: Rc<Vec<(usize, usize)>>) -> Result<Var> {
        let (_, d) = self.check_pairs("pair_mul", z, &pairs)?;
        let zd = self.data(z);
        let mut out = Vec::with_capacity(pairs.len() * d);
        for &(i, j) in pairs.iter() {
            out.extend(
                zd[i * d..(i + 1) * d]
                    .iter()
                    .zip(&zd[j * d..(j + 1) * d])
                    .map(|(a, b)| a * b),
            );
        }
        let ng = self.ng(z);
        Ok(self.push(Self::raw(vec![pairs.len(), d], out), Op::PairMul(z, pairs), ng))
    }

    /// Dot products `z[i] . z[j]` for each pair, shape `[P]`.
    pub fn pair_dot(&mut self, z: Var, pairs: Rc<Vec<(usize, usize)>>) -> Result<Var> {
        let (_, d) = self.check_pairs("pair_dot", z, &pairs)?;
        let zd = self.data(z);
        let out = pairs
            .iter()
            .map(|&(i, j)| {
                zd[i * d..(i + 1) * d]
                    .iter()
                    .zip(&zd[j * d..(j + 1) * d])
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let ng = self.ng(z);
        Ok(self.push(Self::raw(vec![pairs.len()], out), Op::PairDot(z, pairs), ng))
    }

    /// Constant sparse matrix times a dense `[cols, f]` operand.
    pub fn spmm(&mut self, m: Rc<Csr>, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 || shape[0] != m.cols {
            return Err(TensorError::ShapeMismatch {
                op: "spmm",
                lhs: vec![m.rows, m.cols],
                rhs: shape,
            });
        }
        let f = shape[1];
        let mut out = vec![0.0; m.rows * f];
        m.spmm_into(self.data(x), f, &mut out);
        let ng = self.ng(x);
        Ok(self.push(Self::raw(vec![m.rows, f], out), Op::SpMM(m, x), ng))
    }

    /// Mean binary cross-entropy of `logits` against 0/1 `targets`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Rc<Vec<f64>>) -> Result<Var> {
        let d = self.data(logits);
        if d.len() != targets.len() {
            return Err(TensorError::ShapeMismatch {
                op: "bce_with_logits",
                lhs: self.shape(logits).to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let n = d.len().max(1) as f64;
        let loss = d
            .iter()
            .zip(targets.iter())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        let ng = self.ng(logits);
        Ok(self.push(Self::raw(vec![], vec![loss]), Op::BceWithLogits(logits, targets), ng))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let t = self.constant(target.clone());
        let d = self.sub(pred, t)?;
        let sq = self.square(d);
        Ok(self.mean(sq))
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, out: Var) -> Result<Grads> {
        let oshape = self.shape(out);
        if numel(oshape) != 1 {
            return Err(TensorError::NonScalar(oshape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(vec![1.0]);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        // only leaves keep gradients
        for (i, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) || !node.needs_grad {
                grads[i] = None;
            }
        }
        Ok(Grads { grads })
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.ng(v) {
            return;
        }
        let slot = &mut grads[v.0];
        let buf = slot.get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.data.len()]);
        f(buf);
    }

    fn acc_broadcast(&self, grads: &mut [Option<Vec<f64>>], v: Var, out_shape: &[usize], g: &[f64], sign: f64) {
        let vs = self.shape(v).to_vec();
        if vs == out_shape {
            self.acc(grads, v, |b| {
                for (x, &y) in b.iter_mut().zip(g) {
                    *x += sign * y;
                }
            });
        } else if is_suffix(out_shape, &vs) && !vs.is_empty() {
            self.acc(grads, v, |b| {
                let w = b.len();
                for chunk in g.chunks(w) {
                    for (x, &y) in b.iter_mut().zip(chunk) {
                        *x += sign * y;
                    }
                }
            });
        } else {
            let map = broadcast_map(out_shape, &vs);
            self.acc(grads, v, |b| {
                for (&j, &y) in map.iter().zip(g) {
                    b[j] += sign * y;
                }
            });
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let oshape = &node.value.shape;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.acc_broadcast(grads, *a, oshape, g, 1.0);
                self.acc_broadcast(grads, *b, oshape, g, 1.0);
            }
            Op::Sub(a, b) => {
                self.acc_broadcast(grads, *a, oshape, g, 1.0);
                self.acc_broadcast(grads, *b, oshape, g, -1.0);
            }
            Op::Mul(a, b) => {
                for (x, y) in [(*a, *b), (*b, *a)] {
                    if !self.ng(x) {
                        continue;
                    }
                    let ys = self.shape(y);
                    let yd = self.data(y);
                    let prod: Vec<f64> = if ys == oshape.as_slice() {
                        g.iter().zip(yd).map(|(&p, &q)| p * q).collect()
                    } else if is_suffix(oshape, ys) && !ys.is_empty() {
                        g.chunks(yd.len())
                            .flat_map(|c| c.iter().zip(yd).map(|(&p, &q)| p * q))
                            .collect()
                    } else {
                        let map = broadcast_map(oshape, ys);
                        g.iter().zip(&map).map(|(&p, &j)| p * yd[j]).collect()
                    };
                    self.acc_broadcast(grads, x, oshape, &prod, 1.0);
                }
            }
            Op::Neg(a) => self.acc(grads, *a, |b| {
                for (x, &y) in b.iter_mut().zip(g) {
                    *x -= y;
                }
            }),
            Op::Scale(a, c) => self.acc(grads, *a, |b| {
                for (x, &y) in b.iter_mut().zip(g) {
                    *x += c * y;
                }
            }),
            Op::AddScalar(a) => self.acc(grads, *a, |b| {
                for (x, &y) in b.iter_mut().zip(g) {
                    *x += y;
                }
            }),
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (da, db) = (self.data(*a), self.data(*b));
                self.acc(grads, *a, |buf| mm_nt(g, db, buf, m, k, n));
                self.acc(grads, *b, |buf| mm_tn(da, g, buf, m, k, n));
            }
            Op::BatchMatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                let (da, db) = (self.data(*a), self.data(*b));
                self.acc(grads, *a, |buf| {
                    for t in 0..bs {
                        mm_nt(
                            &g[t * m * n..(t + 1) * m * n],
                            &db[t * k * n..(t + 1) * k * n],
                            &mut buf[t * m * k..(t + 1) * m * k],
                            m,
                            k,
                            n,
                        );
                    }
                });
                self.acc(grads, *b, |buf| {
                    for t in 0..bs {
                        mm_tn(
                            &da[t * m * k..(t + 1) * m * k],
                            &g[t * m * n..(t + 1) * m * n],
                            &mut buf[t * k * n..(t + 1) * k * n],
                            m,
                            k,
                            n,
                        );
                    }
                });
            }
            Op::Abs(a) => {
                let d = self.data(*a);
                self.acc(grads, *a, |b| {
                    for ((x, &y), &v) in b.iter_mut().zip(g).zip(d) {
                        if v > 0.0 {
                            *x += y;
                        } else if v < 0.0 {
                            *x -= y;
                        }
                    }
                });
            }
            Op::Relu(a) => {
                let d = self.data(*a);
                self.acc(grads, *a, |b| {
                    for ((x, &y), &v) in b.iter_mut().zip(g).zip(d) {
                        if v > 0.0 {
                            *x += y;
                        }
                    }
                });
            }
            Op::Square(a) => {
                let d = self.data(*a);
                self.acc(grads, *a, |b| {
                    for ((x, &y), &v) in b.iter_mut().zip(g).zip(d) {
                        *x += 2.0 * v * y;
                    }
                });
            }
            Op::Tanh(a) => {
                let out = &node.value.data;
                self.acc(grads, *a, |b| {
                    for ((x, &y), &t) in b.iter_mut().zip(g).zip(out) {
                        *x += (1.0 - t * t) * y;
                    }
                });
            }
            Op::Sum(a) => self.acc(grads, *a, |b| {
                for x in b.iter_mut() {
                    *x += g[0];
                }
            }),
            Op::Mean(a) => {
                let n = self.data(*a).len().max(1) as f64;
                self.acc(grads, *a, |b| {
                    for x in b.iter_mut() {
                        *x += g[0] / n;
                    }
                });
            }
            Op::SumAxis(a, axis) => {
                let shape = self.shape(*a);
                let outer: usize = shape[..*axis].iter().product();
                let len = shape[*axis];
                let inner: usize = shape[axis + 1..].iter().product();
                self.acc(grads, *a, |b| {
                    for o in 0..outer {
                        let src = &g[o * inner..(o + 1) * inner];
                        for l in 0..len {
                            let dst = &mut b[(o * len + l) * inner..(o * len + l + 1) * inner];
                            for (x, &y) in dst.iter_mut().zip(src) {
                                *x += y;
                            }
                        }
                    }
                });
            }
            Op::Reshape(a) => self.acc(grads, *a, |b| {
                for (x, &y) in b.iter_mut().zip(g) {
                    *x += y;
                }
            }),
            Op::Permute(a, axes) => {
                let mut inv = vec![0; axes.len()];
                for (i, &x) in axes.iter().enumerate() {
                    inv[x] = i;
                }
                let back = permute_data(g, oshape, &inv);
                self.acc(grads, *a, |b| {
                    for (x, &y) in b.iter_mut().zip(&back) {
                        *x += y;
                    }
                });
            }
            Op::Concat(parts, axis) => {
                let outer: usize = oshape[..*axis].iter().product();
                let inner: usize = oshape[axis + 1..].iter().product();
                let row = oshape[*axis] * inner;
                let mut off = 0;
                for &p in parts {
                    let w = self.shape(p)[*axis] * inner;
                    self.acc(grads, p, |b| {
                        for o in 0..outer {
                            let src = &g[o * row + off..o * row + off + w];
                            for (x, &y) in b[o * w..(o + 1) * w].iter_mut().zip(src) {
                                *x += y;
                            }
                        }
                    });
                    off += w;
                }
            }
            Op::Slice(a, start, axis) => {
                let shape = self.shape(*a);
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let w = oshape[*axis] * inner;
                let full = shape[*axis] * inner;
                self.acc(grads, *a, |b| {
                    for o in 0..outer {
                        let dst = &mut b[o * full + start * inner..o * full + start * inner + w];
                        for (x, &y) in dst.iter_mut().zip(&g[o * w..(o + 1) * w]) {
                            *x += y;
                        }
                    }
                });
            }
            Op::GatherRows(a, idx) => {
                let w: usize = oshape[1..].iter().product();
                self.acc(grads, *a, |b| {
                    for (r, &i) in idx.iter().enumerate() {
                        for (x, &y) in b[i * w..(i + 1) * w].iter_mut().zip(&g[r * w..(r + 1) * w]) {
                            *x += y;
                        }
                    }
                });
            }
            Op::PairMul(z, pairs) => {
                let zd = self.data(*z);
                let d = oshape[1];
                self.acc(grads, *z, |b| {
                    for (r, &(i, j)) in pairs.iter().enumerate() {
                        let gr = &g[r * d..(r + 1) * d];
                        for c in 0..d {
                            let (zi, zj) = (zd[i * d + c], zd[j * d + c]);
                            b[i * d + c] += gr[c] * zj;
                            b[j * d + c] += gr[c] * zi;
                        }
                    }
                });
            }
            Op::PairDot(z, pairs) => {
                let zd = self.data(*z);
                let d = self.shape(*z)[1];
                self.acc(grads, *z, |b| {
                    for (r, &(i, j)) in pairs.iter().enumerate() {
                        let gr = g[r];
                        for c in 0..d {
                            let (zi, zj) = (zd[i * d + c], zd[j * d + c]);
                            b[i * d + c] += gr * zj;
                            b[j * d + c] += gr * zi;
                        }
                    }
                });
            }
            Op::SpMM(m, x) => {
                let f = oshape[1];
                let mt = m.transpose();
                self.acc(grads, *x, |b| mt.spmm_into(g, f, b));
            }
            Op::BceWithLogits(z, y) => {
                let d = self.data(*z);
                let n = d.len().max(1) as f64;
                self.acc(grads, *z, |b| {
                    for ((x, &zv), &yv) in b.iter_mut().zip(d).zip(y.iter()) {
                        *x += g[0] * (sigmoid(zv) - yv) / n;
                    }
                });
            }
        }
    }
}

/// Keeps large tensor buffers on the heap instead of fresh `mmap`s, which
/// otherwise page-fault on every allocation. Call once at startup; a no-op
/// off glibc.
pub fn tune_allocator() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    unsafe {
        // SAFETY: mallopt only adjusts allocator thresholds.
        libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn permute_data(d: &[f64], shape: &[usize], axes: &[usize]) -> Vec<f64> {
    let r = shape.len();
    let in_strides = strides(shape);
    let oshape: Vec<usize> = axes.iter().map(|&x| shape[x]).collect();
    let eff: Vec<usize> = axes.iter().map(|&x| in_strides[x]).collect();
    let total = d.len();
    let mut out = Vec::with_capacity(total);
    if r == 0 {
        return d.to_vec();
    }
    let mut idx = vec![0usize; r];
    let mut off = 0usize;
    for _ in 0..total {
        out.push(d[off]);
        for k in (0..r).rev() {
            idx[k] += 1;
            off += eff[k];
            if idx[k] < oshape[k] {
                break;
            }
            off -= eff[k] * idx[k];
            idx[k] = 0;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// gradient checking

/// Max relative error between autodiff and central differences over every
/// coordinate of every input, `|ad - fd| / max(|ad|, |fd|, floor)`.
///
/// `floor = GRAD_NOISE_FLOOR * (1 + |f(x)|)` keeps roundoff in `fd` from
/// dominating coordinates whose true derivative is zero, e.g. by symmetry.
///
/// `f` must map its inputs to a scalar. Callers are responsible for staying
/// away from `abs`/`relu` kinks; see [`Tape::min_kink_distance`].
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let floor = GRAD_NOISE_FLOOR * (1.0 + tape.value(out).data[0].abs());
    let grads = tape.backward(out)?;
    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|x| t.constant(x.clone())).collect();
        let o = f(&mut t, &vs)?;
        Ok(t.value(o).data[0])
    };
    let mut worst: f64 = 0.0;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (vi, v) in vars.iter().enumerate() {
        let ad = grads.get_or_zeros(*v, inputs[vi].len());
        for (c, &a) in ad.iter().enumerate() {
            let orig = work[vi].data[c];
            work[vi].data[c] = orig + h;
            let fp = eval(&work)?;
            work[vi].data[c] = orig - h;
            let fm = eval(&work)?;
            work[vi].data[c] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let err = (a - fd).abs() / fd.abs().max(a.abs()).max(floor);
            if err.is_nan() {
                return Ok(f64::NAN);
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Smallest derivative scale, relative to `1 + |f|`, treated as nonzero by
/// the gradient checks.
pub const GRAD_NOISE_FLOOR: f64 = 1e-6;

/// Single-input form of [`grad_check_many`].
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_many(|t, v| f(t, v[0]), std::slice::from_ref(x), h)
}

// ---------------------------------------------------------------------------
// Adam

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(TensorError::ShapeMismatch {
            op: "adam_step",
            lhs: vec![params.len()],
            rhs: vec![grads.len(), state.m.len()],
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + state.eps);
    }
    Ok(())
}
