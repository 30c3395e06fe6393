//! Group elements, their actions on tensors, and randomized equivariance checks.

use std::fmt::Display;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Rng64};
use crate::tensor::Tensor;

pub const DEFAULT_TOL: f64 = 1e-6;

/// Largest `k` for which all `2^k` sign vectors are enumerated.
pub const EXHAUSTIVE_MAX_K: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymmetryError {
    #[error("{what}: expected size {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid group element: {0}")]
    InvalidElement(String),
    #[error("map failed on sample {sample}: {msg}")]
    Eval { sample: usize, msg: String },
    #[error("exhaustive check needs k <= {max}, got {k}")]
    TooLarge { k: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, SymmetryError>;

#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    SignVector(Vec<f64>),
    Permutation(Vec<usize>),
    OrthogonalMatrix(Tensor),
}

/// Which axis a group element acts on: `Rows` is the first axis, `Columns` the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Rows,
    Columns,
    Axis(usize),
}

impl Side {
    fn axis(self, ndim: usize) -> usize {
        match self {
            Side::Rows => 0,
            Side::Columns => ndim.saturating_sub(1),
            Side::Axis(a) => a,
        }
    }
}

impl GroupElement {
    pub fn signs(s: Vec<f64>) -> Result<Self> {
        if let Some(bad) = s.iter().find(|&&x| x != 1.0 && x != -1.0) {
            return Err(SymmetryError::InvalidElement(format!("sign entry {bad}")));
        }
        Ok(GroupElement::SignVector(s))
    }

    pub fn permutation(p: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; p.len()];
        for &i in &p {
            if i >= p.len() || seen[i] {
                return Err(SymmetryError::InvalidElement(format!("{p:?} is not a bijection")));
            }
            seen[i] = true;
        }
        Ok(GroupElement::Permutation(p))
    }

    pub fn orthogonal(q: Tensor) -> Result<Self> {
        let s = q.shape();
        if s.len() != 2 || s[0] != s[1] {
            return Err(SymmetryError::InvalidElement(format!("shape {s:?} is not square")));
        }
        let err = crate::spectral::orthonormality_error(&q);
        if !(err < 1e-8) {
            return Err(SymmetryError::InvalidElement(format!("|QtQ - I| = {err:e}")));
        }
        Ok(GroupElement::OrthogonalMatrix(q))
    }

    pub fn size(&self) -> usize {
        match self {
            GroupElement::SignVector(s) => s.len(),
            GroupElement::Permutation(p) => p.len(),
            GroupElement::OrthogonalMatrix(q) => q.rows(),
        }
    }

    pub fn identity_like(&self) -> GroupElement {
        let k = self.size();
        match self {
            GroupElement::SignVector(_) => GroupElement::SignVector(vec![1.0; k]),
            GroupElement::Permutation(_) => GroupElement::Permutation((0..k).collect()),
            GroupElement::OrthogonalMatrix(_) => GroupElement::OrthogonalMatrix(Tensor::eye(k)),
        }
    }

    /// The element that acts as "`second` first, then `self`" on `side`, so that
    /// `act(v, a.compose(b, side), side) == act(act(v, b, side), a, side)`.
    pub fn compose(&self, second: &GroupElement, side: Side) -> Result<GroupElement> {
        if self.size() != second.size() {
            return Err(SymmetryError::DimensionMismatch {
                what: "compose",
                expected: self.size(),
                got: second.size(),
            });
        }
        match (self, second) {
            (GroupElement::SignVector(a), GroupElement::SignVector(b)) => {
                Ok(GroupElement::SignVector(a.iter().zip(b).map(|(x, y)| x * y).collect()))
            }
            (GroupElement::Permutation(a), GroupElement::Permutation(b)) => {
                Ok(GroupElement::Permutation(a.iter().map(|&i| b[i]).collect()))
            }
            (GroupElement::OrthogonalMatrix(a), GroupElement::OrthogonalMatrix(b)) => {
                // rows: A (B V); any other axis multiplies from the right: (V B) A
                let q = match side {
                    Side::Rows => a.matmul(b),
                    _ => b.matmul(a),
                };
                Ok(GroupElement::OrthogonalMatrix(q.expect("square")))
            }
            _ => Err(SymmetryError::InvalidElement(
                "cannot compose different element types".into(),
            )),
        }
    }
}

/// Applies `g` along one axis of `v`.
///
/// * signs multiply the slices along the axis (columns: `V diag(s)`);
/// * a permutation `p` reorders slices so that slice `i` of the output is slice
///   `p[i]` of the input (rows: `PV` with `P[i, p[i]] = 1`);
/// * an orthogonal `Q` mixes slices as `V Q` for columns and `Q V` for rows.
pub fn act(v: &Tensor, g: &GroupElement, side: Side) -> Result<Tensor> {
    let shape = v.shape().to_vec();
    let axis = side.axis(shape.len());
    if axis >= shape.len() {
        return Err(SymmetryError::DimensionMismatch {
            what: "axis",
            expected: shape.len(),
            got: axis,
        });
    }
    let k = shape[axis];
    if g.size() != k {
        return Err(SymmetryError::DimensionMismatch {
            what: "group element",
            expected: k,
            got: g.size(),
        });
    }
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let src = v.data();
    let mut out = vec![0.0; src.len()];
    let idx = |o: usize, a: usize, i: usize| (o * k + a) * inner + i;
    for o in 0..outer {
        for i in 0..inner {
            match g {
                GroupElement::SignVector(s) => {
                    for a in 0..k {
                        out[idx(o, a, i)] = s[a] * src[idx(o, a, i)];
                    }
                }
                GroupElement::Permutation(p) => {
                    for a in 0..k {
                        out[idx(o, a, i)] = src[idx(o, p[a], i)];
                    }
                }
                GroupElement::OrthogonalMatrix(q) => {
                    let rows_side = matches!(side, Side::Rows);
                    for a in 0..k {
                        let mut acc = 0.0;
                        for b in 0..k {
                            let coef = if rows_side { q.at(a, b) } else { q.at(b, a) };
                            acc += coef * src[idx(o, b, i)];
                        }
                        out[idx(o, a, i)] = acc;
                    }
                }
            }
        }
    }
    Ok(Tensor::new(out, &shape).expect("same shape"))
}

pub fn random_signs(k: usize, rng: &mut impl Rng) -> GroupElement {
    GroupElement::SignVector((0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> GroupElement {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    GroupElement::Permutation(p)
}

/// Haar-distributed orthogonal matrix: Gram-Schmidt on a Gaussian matrix,
/// which is QR with a positive diagonal in `R`.
pub fn random_orthogonal(k: usize, rng: &mut impl Rng) -> GroupElement {
    loop {
        let g = rng::gaussian_tensor(&[k, k], rng);
        let mut cols: Vec<Vec<f64>> = (0..k).map(|j| g.column(j)).collect();
        let mut ok = true;
        for j in 0..k {
            for _ in 0..2 {
                for p in 0..j {
                    let d: f64 = cols[j].iter().zip(&cols[p]).map(|(a, b)| a * b).sum();
                    let prev = cols[p].clone();
                    for (a, b) in cols[j].iter_mut().zip(&prev) {
                        *a -= d * b;
                    }
                }
            }
            let nrm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm < 1e-10 {
                ok = false;
                break;
            }
            for a in cols[j].iter_mut() {
                *a /= nrm;
            }
        }
        if !ok {
            continue;
        }
        let mut q = Tensor::zeros(&[k, k]);
        for (j, c) in cols.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                q.set(i, j, x);
            }
        }
        return GroupElement::OrthogonalMatrix(q);
    }
}

/// All `2^k` sign vectors, in binary counting order starting at all `+1`.
pub fn all_sign_vectors(k: usize) -> Result<Vec<GroupElement>> {
    if k > EXHAUSTIVE_MAX_K {
        return Err(SymmetryError::TooLarge {
            k,
            max: EXHAUSTIVE_MAX_K,
        });
    }
    Ok((0..1usize << k)
        .map(|mask| GroupElement::SignVector((0..k).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub max_violation: f64,
    pub samples: usize,
    pub passed: bool,
    pub tolerance: f64,
}

impl SymmetryReport {
    fn from_max(max_violation: f64, samples: usize, tolerance: f64) -> Self {
        SymmetryReport {
            max_violation,
            samples,
            passed: max_violation < tolerance,
            tolerance,
        }
    }
}

/// How the group acts on the inputs and outputs of a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Actions {
    pub input: Side,
    /// `None` checks invariance.
    pub output: Option<Side>,
}

impl Actions {
    pub const SIGN_COLUMNS: Actions = Actions {
        input: Side::Columns,
        output: Some(Side::Columns),
    };
    pub const SIGN_INVARIANT: Actions = Actions {
        input: Side::Columns,
        output: None,
    };
    pub const ROWS: Actions = Actions {
        input: Side::Rows,
        output: Some(Side::Rows),
    };
}

/// `|f(g x) - g f(x)|_inf / (1 + |f(x)|_inf)` for one input and element.
pub fn violation<F, E>(f: &F, x: &Tensor, g: &GroupElement, actions: Actions) -> std::result::Result<f64, String>
where
    F: Fn(&Tensor) -> std::result::Result<Tensor, E>,
    E: Display,
{
    let fx = f(x).map_err(|e| e.to_string())?;
    let gx = act(x, g, actions.input).map_err(|e| e.to_string())?;
    let fgx = f(&gx).map_err(|e| e.to_string())?;
    let target = match actions.output {
        Some(side) => act(&fx, g, side).map_err(|e| e.to_string())?,
        None => fx.clone(),
    };
    if fgx.shape() != target.shape() {
        return Err(format!(
            "output shapes differ: {:?} vs {:?}",
            fgx.shape(),
            target.shape()
        ));
    }
    Ok(fgx.max_abs_diff(&target) / (1.0 + fx.max_abs()))
}

/// Randomized check of `f(g x) = g f(x)` (or `f(g x) = f(x)` for invariance).
///
/// Sample `i` draws its input and group element from substream `i` of `seed`.
pub fn check_equivariance<F, E, S, G>(
    f: F,
    mut sample_input: S,
    mut sample_group: G,
    actions: Actions,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<SymmetryReport>
where
    F: Fn(&Tensor) -> std::result::Result<Tensor, E>,
    E: Display,
    S: FnMut(&mut Rng64) -> Tensor,
    G: FnMut(&Tensor, &mut Rng64) -> GroupElement,
{
    let mut worst: f64 = 0.0;
    for sample in 0..n_samples {
        let mut r = rng::substream(seed, sample as u64);
        let x = sample_input(&mut r);
        let g = sample_group(&x, &mut r);
        let v = violation(&f, &x, &g, actions).map_err(|msg| SymmetryError::Eval { sample, msg })?;
        worst = worst.max(v);
    }
    Ok(SymmetryReport::from_max(worst, n_samples, tol))
}

/// Checks every sign vector on the column axis of each input.
pub fn check_signs_exhaustive<F, E>(f: F, inputs: &[Tensor], invariant: bool, tol: f64) -> Result<SymmetryReport>
where
    F: Fn(&Tensor) -> std::result::Result<Tensor, E>,
    E: Display,
{
    let actions = if invariant {
        Actions::SIGN_INVARIANT
    } else {
        Actions::SIGN_COLUMNS
    };
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for (i, x) in inputs.iter().enumerate() {
        let k = *x.shape().last().unwrap_or(&0);
        for g in all_sign_vectors(k)? {
            let v = violation(&f, x, &g, actions).map_err(|msg| SymmetryError::Eval { sample: i, msg })?;
            worst = worst.max(v);
            samples += 1;
        }
    }
    Ok(SymmetryReport::from_max(worst, samples, tol))
}
