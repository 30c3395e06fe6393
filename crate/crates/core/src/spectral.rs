//! Symmetric eigendecomposition, graph Laplacians and PCA frames.
//!
//! Two independent solvers live here:
//!
//! * [`sym_eig`]: cyclic Jacobi on the full matrix. Slow (`O(n^3)` per sweep) but
//!   simple and very accurate; used for small matrices and covariance frames.
//! * [`lowest_eigenpairs`]: Householder tridiagonalisation, Sturm-sequence
//!   bisection for the wanted eigenvalues and inverse iteration for their vectors,
//!   with reorthogonalisation inside eigenvalue clusters. Used for the first few
//!   Laplacian eigenvectors of graphs with thousands of nodes.
//!
//! Neither solver canonicalises eigenvector signs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::tensor::Tensor;

/// Relative tolerance for deciding that eigenvalues are distinct.
pub const DISTINCT_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix must be square, got shape {0:?}")]
    NotSquare(Vec<usize>),
    #[error("eigensolver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("requested {k} eigenpairs of an {n}x{n} matrix")]
    TooMany { k: usize, n: usize },
    #[error("covariance eigenvalues are not distinct (min gap {gap:e}, threshold {threshold:e})")]
    DegenerateCovariance { gap: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigSource {
    Adjacency,
    Laplacian,
    NormalizedLaplacian,
    Covariance,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `L = D - A`
    #[default]
    Unnormalized,
    /// `L = I - D^{-1/2} A D^{-1/2}`, with `D^{-1/2}` taken as 0 on isolated nodes.
    Normalized,
}

/// Orthonormal eigenvectors as the columns of `vectors`, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigBasis {
    pub vectors: Tensor,
    pub values: Vec<f64>,
    pub all_distinct: bool,
    pub source: EigSource,
}

impl EigBasis {
    fn new(vectors: Tensor, values: Vec<f64>, source: EigSource) -> Self {
        let all_distinct = values_distinct(&values);
        EigBasis {
            vectors,
            values,
            all_distinct,
            source,
        }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// Smallest gap between consecutive eigenvalues (infinite for `k < 2`).
    pub fn min_gap(&self) -> f64 {
        min_gap(&self.values)
    }
}

fn min_gap(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Whether consecutive sorted eigenvalues differ by more than `DISTINCT_TOL * max(|λ|, 1)`.
pub fn values_distinct(values: &[f64]) -> bool {
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    min_gap(values) > DISTINCT_TOL * scale
}

fn check_symmetric(a: &Tensor) -> Result<usize, SpectralError> {
    let s = a.shape();
    if s.len() != 2 || s[0] != s[1] {
        return Err(SpectralError::NotSquare(s.to_vec()));
    }
    let n = s[0];
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((a.at(i, j) - a.at(j, i)).abs());
        }
    }
    if asym >= 1e-8 {
        return Err(SpectralError::NotSymmetric(asym));
    }
    Ok(n)
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(a: &Tensor) -> Result<EigBasis, SpectralError> {
    let n = check_symmetric(a)?;
    let (values, vectors) = jacobi(a.data(), n)?;
    Ok(sorted_basis(values, vectors, n, EigSource::Matrix))
}

fn sorted_basis(values: Vec<f64>, vectors: Vec<f64>, n: usize, source: EigSource) -> EigBasis {
    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut v = Tensor::zeros(&[n, k]);
    for (c, &src) in order.iter().enumerate() {
        for r in 0..n {
            v.set(r, c, vectors[r * k + src]);
        }
    }
    let vals = order.iter().map(|&i| values[i]).collect();
    EigBasis::new(v, vals, source)
}

/// Returns eigenvalues and the row-major `n x n` eigenvector matrix (columns).
fn jacobi(input: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>), SpectralError> {
    let mut a = input.to_vec();
    // symmetrise exactly
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= 1e-17 * frob || off == 0.0 {
            let vals = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // skip rotations that cannot change the diagonal at working precision
                if sweep > 3 && apq.abs() * 1e18 < app.abs().min(aqq.abs()) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(SpectralError::NoConvergence(JACOBI_MAX_SWEEPS))
}

// ---------------------------------------------------------------------------
// tridiagonal route

struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Householder vectors `v_j` (acting on indices `j+1..n`) and their `beta`.
    reflectors: Vec<(Vec<f64>, f64)>,
}

fn tridiagonalize(input: &[f64], n: usize) -> Tridiagonal {
    let mut a = input.to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];
    for j in 0..n.saturating_sub(1) {
        diag[j] = a[j * n + j];
        let m = n - j - 1;
        let x: Vec<f64> = a[j * n + j + 1..(j + 1) * n].to_vec();
        let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if m == 1 || norm == 0.0 {
            off[j] = x[0];
            if m > 1 {
                reflectors.push((vec![0.0; m], 0.0));
            }
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        let beta = 2.0 / vv;
        off[j] = alpha;
        // p = beta * B v over the trailing block B = a[j+1.., j+1..]
        let b0 = j + 1;
        for (r, pr) in p[..m].iter_mut().enumerate() {
            let row = &a[(b0 + r) * n + b0..(b0 + r) * n + n];
            let mut s = 0.0;
            for (x, y) in row.iter().zip(&v) {
                s += x * y;
            }
            *pr = beta * s;
        }
        let pv: f64 = p[..m].iter().zip(&v).map(|(x, y)| x * y).sum();
        let kk = 0.5 * beta * pv;
        let w: Vec<f64> = p[..m].iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();
        for r in 0..m {
            let (vr, wr) = (v[r], w[r]);
            let row = &mut a[(b0 + r) * n + b0..(b0 + r) * n + n];
            for ((x, &vc), &wc) in row.iter_mut().zip(&v).zip(&w) {
                *x -= vr * wc + wr * vc;
            }
        }
        reflectors.push((v, beta));
    }
    if n > 0 {
        diag[n - 1] = a[n * n - 1];
    }
    Tridiagonal { diag, off, reflectors }
}

impl Tridiagonal {
    fn n(&self) -> usize {
        self.diag.len()
    }

    fn norm_bound(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                let l = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + l + r
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly less than `x` (Sturm sequence).
    fn count_below(&self, x: f64, pivmin: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `idx`-th smallest eigenvalue by bisection.
    fn eigenvalue(&self, idx: usize, norm: f64) -> f64 {
        let pivmin = f64::MIN_POSITIVE.max(norm * f64::EPSILON * f64::EPSILON);
        let (mut lo, mut hi) = (-norm - 1.0, norm + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid, pivmin) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * (lo.abs().max(hi.abs())) + pivmin {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T - shift I) y = rhs` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, shift: f64, tiny: f64, rhs: &mut [f64]) -> Vec<f64> {
        let n = self.n();
        let mut d: Vec<f64> = self.diag.iter().map(|x| x - shift).collect();
        let mut u1: Vec<f64> = self.off.clone();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut sub: Vec<f64> = self.off.clone();
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= sub[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let l = sub[i] / d[i];
                d[i + 1] -= l * u1[i];
                rhs[i + 1] -= l * rhs[i];
                sub[i] = 0.0;
            } else {
                let l = d[i] / sub[i];
                let (di1, ui1) = (d[i + 1], u1[i + 1]);
                d[i] = sub[i];
                let old_u1 = u1[i];
                u1[i] = di1;
                u2[i] = ui1;
                d[i + 1] = old_u1 - l * di1;
                u1[i + 1] = -l * ui1;
                rhs.swap(i, i + 1);
                rhs[i + 1] -= l * rhs[i];
            }
        }
        let mut y = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * y[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * y[i + 2];
            }
            let piv = if d[i] == 0.0 { tiny } else { d[i] };
            y[i] = s / piv;
        }
        y
    }

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * y[i];
                if i > 0 {
                    s += self.off[i - 1] * y[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * y[i + 1];
                }
                s
            })
            .collect()
    }

    /// Maps a tridiagonal eigenvector back to the original basis.
    fn back_transform(&self, y: &mut [f64]) {
        for (j, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let seg = &mut y[j + 1..];
            let dot: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum();
            let f = beta * dot;
            for (a, b) in seg.iter_mut().zip(v) {
                *a -= f * b;
            }
        }
    }
}

fn normalize(y: &mut [f64]) -> f64 {
    let nrm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for x in y.iter_mut() {
            *x /= nrm;
        }
    }
    nrm
}

/// The `k` smallest eigenpairs of a symmetric matrix.
pub fn lowest_eigenpairs(a: &Tensor, k: usize) -> Result<EigBasis, SpectralError> {
    let n = check_symmetric(a)?;
    if k > n {
        return Err(SpectralError::TooMany { k, n });
    }
    if n <= 2 {
        let full = sym_eig(a)?;
        return Ok(truncate(full, k));
    }
    let tri = tridiagonalize(a.data(), n);
    let norm = tri.norm_bound().max(f64::MIN_POSITIVE);
    let values: Vec<f64> = (0..k).map(|i| tri.eigenvalue(i, norm)).collect();
    let cluster_tol = 1e-3 * norm;
    let tiny = f64::EPSILON * norm;
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut cluster_start = 0;
    for (i, &lam) in values.iter().enumerate() {
        if i > 0 && lam - values[i - 1] > cluster_tol {
            cluster_start = i;
        }
        // deterministic pseudo-random start vector
        let mut y: Vec<f64> = (0..n)
            .map(|t| {
                let h = ((t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64 + 7))
                    .wrapping_mul(0xBF58_476D_1CE4_E5B9);
                (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut y);
        let mut converged = false;
        for _ in 0..20 {
            let mut rhs = y.clone();
            let mut z = tri.shifted_solve(lam, tiny, &mut rhs);
            for prev in &vecs[cluster_start..i] {
                let d: f64 = z.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (a, b) in z.iter_mut().zip(prev) {
                    *a -= d * b;
                }
            }
            if normalize(&mut z) == 0.0 {
                return Err(SpectralError::NoConvergence(i));
            }
            let tz = tri.apply(&z);
            let resid = tz
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - lam * b).powi(2))
                .sum::<f64>()
                .sqrt();
            y = z;
            if resid <= 1e-12 * norm {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpectralError::NoConvergence(20));
        }
        vecs.push(y);
    }
    let mut v = Tensor::zeros(&[n, k]);
    for (c, y) in vecs.iter_mut().enumerate() {
        tri.back_transform(y);
        for (r, &yr) in y.iter().enumerate().take(n) {
            v.set(r, c, yr);
        }
    }
    Ok(EigBasis::new(v, values, EigSource::Matrix))
}

fn truncate(full: EigBasis, k: usize) -> EigBasis {
    let n = full.vectors.rows();
    let mut v = Tensor::zeros(&[n, k]);
    for r in 0..n {
        for c in 0..k {
            v.set(r, c, full.vectors.at(r, c));
        }
    }
    EigBasis::new(v, full.values[..k].to_vec(), full.source)
}

// ---------------------------------------------------------------------------
// graphs

pub fn laplacian(g: &Graph, kind: LaplacianKind) -> Tensor {
    let n = g.node_count();
    let deg = g.degrees();
    let mut l = Tensor::zeros(&[n, n]);
    match kind {
        LaplacianKind::Unnormalized => {
            for (i, &d) in deg.iter().enumerate() {
                l.set(i, i, d as f64);
            }
            for (i, j) in g.edges() {
                l.set(i, j, -1.0);
                l.set(j, i, -1.0);
            }
        }
        LaplacianKind::Normalized => {
            let inv: Vec<f64> = deg
                .iter()
                .map(|&d| if d > 0 { 1.0 / (d as f64).sqrt() } else { 0.0 })
                .collect();
            for i in 0..n {
                l.set(i, i, 1.0);
            }
            for (i, j) in g.edges() {
                let w = -inv[i] * inv[j];
                l.set(i, j, w);
                l.set(j, i, w);
            }
        }
    }
    l
}

/// First `k` eigenpairs (smallest eigenvalues) of the graph Laplacian.
pub fn laplacian_eigvecs(g: &Graph, k: usize, kind: LaplacianKind) -> Result<EigBasis, SpectralError> {
    let n = g.node_count();
    if k > n {
        return Err(SpectralError::TooMany { k, n });
    }
    let l = laplacian(g, kind);
    let mut basis = lowest_eigenpairs(&l, k)?;
    basis.source = match kind {
        LaplacianKind::Unnormalized => EigSource::Laplacian,
        LaplacianKind::Normalized => EigSource::NormalizedLaplacian,
    };
    Ok(basis)
}

pub fn adjacency_eig(g: &Graph) -> Result<EigBasis, SpectralError> {
    let mut b = sym_eig(&g.adjacency())?;
    b.source = EigSource::Adjacency;
    Ok(b)
}

// ---------------------------------------------------------------------------
// PCA frames

/// Orthogonal frame of principal directions, ordered by descending variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub rotation: Tensor,
    pub variances: Vec<f64>,
}

/// `(X - 1 mean^T)^T (X - 1 mean^T)` for `X` of shape `n x k`.
pub fn covariance(x: &Tensor) -> Tensor {
    let (n, k) = (x.rows(), x.cols());
    let mut mean = vec![0.0; k];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut c = Tensor::zeros(&[k, k]);
    for i in 0..n {
        let row = x.row(i);
        for a in 0..k {
            let da = row[a] - mean[a];
            for b in a..k {
                let v = c.at(a, b) + da * (row[b] - mean[b]);
                c.set(a, b, v);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            let v = c.at(b, a);
            c.set(a, b, v);
        }
    }
    c
}

/// Principal-component frame of a point cloud `X` (`n x k`).
///
/// Fails with [`SpectralError::DegenerateCovariance`] when two covariance
/// eigenvalues are within `DISTINCT_TOL * trace` of each other, since the frame
/// is then not determined up to signs.
pub fn pca_frame(x: &Tensor) -> Result<Frame, SpectralError> {
    let c = covariance(x);
    let k = c.rows();
    let trace: f64 = (0..k).map(|i| c.at(i, i)).sum();
    let basis = sym_eig(&c)?;
    let gap = basis.min_gap();
    let threshold = DISTINCT_TOL * trace;
    if k > 1 && !(gap > threshold) {
        return Err(SpectralError::DegenerateCovariance { gap, threshold });
    }
    let mut r = Tensor::zeros(&[k, k]);
    for c in 0..k {
        for row in 0..k {
            r.set(row, c, basis.vectors.at(row, k - 1 - c));
        }
    }
    let variances = basis.values.iter().rev().copied().collect();
    Ok(Frame { rotation: r, variances })
}

/// `max |V^T V - I|`.
pub fn orthonormality_error(v: &Tensor) -> f64 {
    let g = v.transpose().matmul(v).expect("compatible");
    let k = g.rows();
    let mut e: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            e = e.max((g.at(i, j) - target).abs());
        }
    }
    e
}
