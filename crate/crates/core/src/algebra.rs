//! Sign-equivariant linear maps and polynomials, and dimension counts of
//! fixed spaces of tensor representations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::tensor::Tensor;

/// Largest enumeration the brute-force counter will attempt.
pub const BRUTEFORCE_LIMIT: u128 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("exponent {exponents:?} has odd parity and is not sign invariant")]
    OddParity { exponents: Vec<u32> },
    #[error("enumeration of {size} tuples exceeds {limit}; use the closed-form count instead")]
    TooLarge { size: u128, limit: u128 },
    #[error("integer overflow computing dimension for k={k}, order={order}")]
    Overflow { k: u32, order: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

// ---------------------------------------------------------------------------
// columnwise linear maps

/// `X -> [W_1 x_1, ..., W_k x_k]`, the general sign-equivariant linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnwiseLinear {
    blocks: Vec<Tensor>,
}

impl ColumnwiseLinear {
    pub fn new(blocks: Vec<Tensor>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(AlgebraError::InvalidArgument("at least one block required".into()));
        };
        let shape = first.shape().to_vec();
        if shape.len() != 2 {
            return Err(AlgebraError::ShapeMismatch(format!("block shape {shape:?}")));
        }
        if let Some(b) = blocks.iter().find(|b| b.shape() != shape.as_slice()) {
            return Err(AlgebraError::ShapeMismatch(format!(
                "blocks {:?} and {:?} differ",
                shape,
                b.shape()
            )));
        }
        Ok(ColumnwiseLinear { blocks })
    }

    pub fn identity(n: usize, k: usize) -> Self {
        ColumnwiseLinear {
            blocks: vec![Tensor::eye(n); k],
        }
    }

    pub fn random(n_out: usize, n_in: usize, k: usize, rng: &mut impl Rng) -> Self {
        ColumnwiseLinear {
            blocks: (0..k).map(|_| rng::gaussian_tensor(&[n_out, n_in], rng)).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn in_dim(&self) -> usize {
        self.blocks[0].cols()
    }

    pub fn out_dim(&self) -> usize {
        self.blocks[0].rows()
    }

    pub fn blocks(&self) -> &[Tensor] {
        &self.blocks
    }

    /// Column `j` of the output is `W_j x_j`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        if s.len() != 2 || s[0] != self.in_dim() || s[1] != self.k() {
            return Err(AlgebraError::ShapeMismatch(format!(
                "input {:?} for blocks {}x{} with k={}",
                s,
                self.out_dim(),
                self.in_dim(),
                self.k()
            )));
        }
        let (n_out, k) = (self.out_dim(), self.k());
        let mut out = Tensor::zeros(&[n_out, k]);
        for (j, w) in self.blocks.iter().enumerate() {
            for r in 0..n_out {
                let acc: f64 = w.row(r).iter().enumerate().map(|(i, a)| a * x.at(i, j)).sum();
                out.set(r, j, acc);
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// polynomials

/// Monomial exponents over the flattened input; coefficient per output entry.
pub type Monomials = BTreeMap<Vec<u32>, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Arity {
    /// `R^k -> R^m`
    Vector { k: usize, m: usize },
    /// `R^{n x k} -> R^{n_out x k}`
    Matrix { n: usize, k: usize, n_out: usize },
}

impl Arity {
    fn input_len(self) -> usize {
        match self {
            Arity::Vector { k, .. } => k,
            Arity::Matrix { n, k, .. } => n * k,
        }
    }

    fn output_shape(self) -> Vec<usize> {
        match self {
            Arity::Vector { m, .. } => vec![m],
            Arity::Matrix { k, n_out, .. } => vec![n_out, k],
        }
    }

    fn input_shape(self) -> Vec<usize> {
        match self {
            Arity::Vector { k, .. } => vec![k],
            Arity::Matrix { n, k, .. } => vec![n, k],
        }
    }
}

/// Polynomial invariant to sign flips of input columns.
///
/// Vector form: every exponent is even. Matrix form: the exponents in each
/// input column sum to an even number.
#[derive(Debug, Clone, PartialEq)]
pub struct SignInvPoly {
    arity: Arity,
    outputs: Vec<Monomials>,
}

impl SignInvPoly {
    pub fn new(arity: Arity, outputs: Vec<Monomials>) -> Result<Self> {
        let want: usize = arity.output_shape().iter().product();
        if outputs.len() != want {
            return Err(AlgebraError::ShapeMismatch(format!(
                "{} output tables for {:?}",
                outputs.len(),
                arity
            )));
        }
        for table in &outputs {
            for exps in table.keys() {
                if exps.len() != arity.input_len() {
                    return Err(AlgebraError::ShapeMismatch(format!(
                        "exponent vector of length {} for input of length {}",
                        exps.len(),
                        arity.input_len()
                    )));
                }
                if !even_parity(arity, exps) {
                    return Err(AlgebraError::OddParity {
                        exponents: exps.clone(),
                    });
                }
            }
        }
        Ok(SignInvPoly { arity, outputs })
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn outputs(&self) -> &[Monomials] {
        &self.outputs
    }

    pub fn n_terms(&self) -> usize {
        self.outputs.iter().map(|t| t.len()).sum()
    }

    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape() != self.arity.input_shape().as_slice() {
            return Err(AlgebraError::ShapeMismatch(format!(
                "input {:?}, expected {:?}",
                x.shape(),
                self.arity.input_shape()
            )));
        }
        let data = x.data();
        let out: Vec<f64> = self
            .outputs
            .iter()
            .map(|table| table.iter().map(|(exps, c)| c * monomial(data, exps)).sum())
            .collect();
        Ok(Tensor::new(out, &self.arity.output_shape()).expect("output shape"))
    }
}

fn even_parity(arity: Arity, exps: &[u32]) -> bool {
    match arity {
        Arity::Vector { .. } => exps.iter().all(|e| e % 2 == 0),
        Arity::Matrix { n, k, .. } => (0..k).all(|j| (0..n).map(|i| exps[i * k + j]).sum::<u32>() % 2 == 0),
    }
}

fn monomial(x: &[f64], exps: &[u32]) -> f64 {
    x.iter()
        .zip(exps)
        .filter(|(_, &e)| e > 0)
        .map(|(v, &e)| v.powi(e as i32))
        .product()
}

/// Sign-equivariant polynomial.
#[derive(Debug, Clone, PartialEq)]
pub enum SignEqPoly {
    /// `p(v) = v * p_inv(v)` with `p_inv: R^k -> R^k`.
    Vector { p_inv: SignInvPoly },
    /// `p(V) = W2((W1 V) * p_inv(V))`.
    Matrix {
        w1: ColumnwiseLinear,
        p_inv: SignInvPoly,
        w2: ColumnwiseLinear,
    },
}

impl SignEqPoly {
    pub fn vector(p_inv: SignInvPoly) -> Result<Self> {
        match p_inv.arity {
            Arity::Vector { k, m } if k == m => Ok(SignEqPoly::Vector { p_inv }),
            a => Err(AlgebraError::ShapeMismatch(format!(
                "vector form needs R^k -> R^k, got {a:?}"
            ))),
        }
    }

    pub fn matrix(w1: ColumnwiseLinear, p_inv: SignInvPoly, w2: ColumnwiseLinear) -> Result<Self> {
        let Arity::Matrix { n, k, n_out: h } = p_inv.arity else {
            return Err(AlgebraError::ShapeMismatch(
                "matrix form needs a matrix invariant".into(),
            ));
        };
        if w1.in_dim() != n || w1.out_dim() != h || w2.in_dim() != h || w1.k() != k || w2.k() != k {
            return Err(AlgebraError::ShapeMismatch(format!(
                "W1 {}x{}, p_inv {n}x{k}->{h}x{k}, W2 {}x{} (k {} / {})",
                w1.out_dim(),
                w1.in_dim(),
                w2.out_dim(),
                w2.in_dim(),
                w1.k(),
                w2.k()
            )));
        }
        Ok(SignEqPoly::Matrix { w1, p_inv, w2 })
    }

    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            SignEqPoly::Vector { p_inv } => {
                let inv = p_inv.eval(x)?;
                Ok(x.zip_map(&inv, |a, b| a * b).expect("same shape"))
            }
            SignEqPoly::Matrix { w1, p_inv, w2 } => {
                let inv = p_inv.eval(x)?;
                let lin = w1.apply(x)?;
                let prod = lin.zip_map(&inv, |a, b| a * b).expect("same shape");
                w2.apply(&prod)
            }
        }
    }

    pub fn p_inv(&self) -> &SignInvPoly {
        match self {
            SignEqPoly::Vector { p_inv } | SignEqPoly::Matrix { p_inv, .. } => p_inv,
        }
    }
}

pub fn eval_poly_inv(p: &SignInvPoly, x: &Tensor) -> Result<Tensor> {
    p.eval(x)
}

pub fn eval_poly(p: &SignEqPoly, x: &Tensor) -> Result<Tensor> {
    p.eval(x)
}

/// Random vector-form sign-equivariant polynomial `v * p_inv(v)` on `R^k`.
///
/// Each output of `p_inv` gets `n_terms` monomials with even exponents and
/// total degree at most `max_degree`, with standard normal coefficients.
pub fn sample_signeq_poly(k: usize, max_degree: u32, n_terms: usize, seed: u64) -> SignEqPoly {
    let mut r = rng::seeded(seed);
    let outputs = (0..k)
        .map(|_| {
            let mut table = Monomials::new();
            for _ in 0..n_terms {
                let half = r.random_range(0..=max_degree / 2);
                let mut exps = vec![0u32; k];
                for _ in 0..half {
                    exps[r.random_range(0..k)] += 2;
                }
                *table.entry(exps).or_insert(0.0) += rng::normal(&mut r);
            }
            table
        })
        .collect();
    let p_inv = SignInvPoly::new(Arity::Vector { k, m: k }, outputs).expect("even exponents");
    SignEqPoly::vector(p_inv).expect("square arity")
}

// ---------------------------------------------------------------------------
// dimension counting

fn binomial(n: u32, r: u32) -> i128 {
    let mut c: i128 = 1;
    for i in 0..r.min(n - r) {
        c = c * (n - i) as i128 / (i + 1) as i128;
    }
    c
}

/// Dimension of the space of sign-equivariant linear maps between the
/// order-`m1` and order-`m2` tensor powers of the sign representation of
/// `{-1, 1}^k`: `2^-k * sum_s (s_1 + ... + s_k)^(m1 + m2)`, in exact arithmetic.
pub fn fixed_dim_formula(k: u32, m1: u32, m2: u32) -> Result<u128> {
    if !(1..=30).contains(&k) {
        return Err(AlgebraError::InvalidArgument(format!("k must be in 1..=30, got {k}")));
    }
    let order = m1 + m2;
    if order % 2 == 1 {
        return Ok(0);
    }
    let overflow = || AlgebraError::Overflow { k, order };
    let mut total: i128 = 0;
    for j in 0..=k {
        let base = k as i128 - 2 * j as i128;
        let p = base.checked_pow(order).ok_or_else(overflow)?;
        let term = binomial(k, j).checked_mul(p).ok_or_else(overflow)?;
        total = total.checked_add(term).ok_or_else(overflow)?;
    }
    debug_assert!(total >= 0 && total % (1i128 << k) == 0);
    Ok((total >> k) as u128)
}

/// Counts tuples in `[k]^(m1 + m2)` in which every value occurs an even number
/// of times, by explicit enumeration.
pub fn fixed_dim_bruteforce(k: u32, m1: u32, m2: u32) -> Result<u128> {
    if k == 0 || k > 64 {
        return Err(AlgebraError::InvalidArgument(format!("k must be in 1..=64, got {k}")));
    }
    let order = m1 + m2;
    let size = (k as u128).checked_pow(order).unwrap_or(u128::MAX);
    if size > BRUTEFORCE_LIMIT {
        return Err(AlgebraError::TooLarge {
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    fn walk(depth: u32, parity: u64, k: u32) -> u128 {
        if depth == 0 {
            return (parity == 0) as u128;
        }
        (0..k).map(|v| walk(depth - 1, parity ^ (1 << v), k)).sum()
    }
    Ok(walk(order, 0, k))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimRow {
    pub k: u32,
    pub formula: u128,
    pub bruteforce: Option<u128>,
    pub cubic: i128,
}

impl DimRow {
    pub fn consistent(&self) -> bool {
        self.bruteforce.is_none_or(|b| b == self.formula) && self.cubic == self.formula as i128
    }
}

pub fn cubic(k: u32) -> i128 {
    let k = k as i128;
    15 * k * k * k - 30 * k * k + 16 * k
}

/// Dimensions of the equivariant maps between third-order tensor
/// representations, for `k = 1..=k_max`.
pub fn dim_table(k_max: u32) -> Result<Vec<DimRow>> {
    if k_max > 20 {
        return Err(AlgebraError::InvalidArgument(format!(
            "k_max must be at most 20, got {k_max}"
        )));
    }
    (1..=k_max)
        .map(|k| {
            let bruteforce = match fixed_dim_bruteforce(k, 3, 3) {
                Ok(v) => Some(v),
                Err(AlgebraError::TooLarge { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(DimRow {
                k,
                formula: fixed_dim_formula(k, 3, 3)?,
                bruteforce,
                cubic: cubic(k),
            })
        })
        .collect()
}

pub fn dim_table_csv(rows: &[DimRow]) -> String {
    let mut s = String::from("k,formula,bruteforce,cubic\n");
    for r in rows {
        let bf = r.bruteforce.map(|b| b.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{},{}", r.k, r.formula, bf, r.cubic).expect("write to string");
    }
    s
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn matrix_rank(rows: usize, cols: usize, mut a: Vec<f64>, tol: f64) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let (piv, best) = (rank..rows)
            .map(|r| (r, a[r * cols + c].abs()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            continue;
        }
        for j in 0..cols {
            a.swap(rank * cols + j, piv * cols + j);
        }
        for r in rank + 1..rows {
            let f = a[r * cols + c] / a[rank * cols + c];
            if f != 0.0 {
                for j in c..cols {
                    a[r * cols + j] -= f * a[rank * cols + j];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Dimension of the space of linear maps `L: R^{n x k} -> R^{n_out x k}` with
/// `L(XS) = L(X)S` for every sign matrix `S`, found as the nullspace of the
/// stacked constraints over all `2^k` sign matrices.
pub fn equivariant_linear_dim(n: usize, n_out: usize, k: usize) -> Result<usize> {
    if k > crate::symmetry::EXHAUSTIVE_MAX_K {
        return Err(AlgebraError::InvalidArgument(format!("k={k} too large to enumerate")));
    }
    let (din, dout) = (n * k, n_out * k);
    let unknowns = din * dout;
    // L is dout x din, unknown index (o, i) -> o * din + i. The constraint
    // L D_in(S) - D_out(S) L = 0 is diagonal in the unknowns.
    let mut rows: Vec<f64> = Vec::new();
    let mut n_rows = 0;
    for mask in 0..1usize << k {
        let s = |col: usize| if mask >> col & 1 == 1 { -1.0 } else { 1.0 };
        for o in 0..dout {
            for i in 0..din {
                let coef = s(i % k) - s(o % k);
                if coef != 0.0 {
                    let mut row = vec![0.0; unknowns];
                    row[o * din + i] = coef;
                    rows.extend(row);
                    n_rows += 1;
                }
            }
        }
    }
    Ok(unknowns - matrix_rank(n_rows, unknowns, rows, 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{check_signs_exhaustive, DEFAULT_TOL};

    fn table(entries: &[(&[u32], f64)]) -> Monomials {
        entries.iter().map(|(e, c)| (e.to_vec(), *c)).collect()
    }

    #[test]
    fn columnwise_examples() {
        let x = Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let id = ColumnwiseLinear::identity(1, 2);
        assert_eq!(id.apply(&x).unwrap(), x);
        let w = ColumnwiseLinear::new(vec![Tensor::full(&[1, 1], 2.0), Tensor::full(&[1, 1], 3.0)]).unwrap();
        assert_eq!(w.apply(&x).unwrap().data(), &[2.0, 3.0]);
        assert!(w.apply(&Tensor::zeros(&[2, 2])).is_err());
        assert!(ColumnwiseLinear::new(vec![Tensor::zeros(&[1, 2]), Tensor::zeros(&[2, 1])]).is_err());
    }

    #[test]
    fn columnwise_exactly_equivariant() {
        let mut r = rng::seeded(0);
        let w = ColumnwiseLinear::random(3, 4, 5, &mut r);
        let xs: Vec<Tensor> = (0..5).map(|_| rng::gaussian_tensor(&[4, 5], &mut r)).collect();
        let rep = check_signs_exhaustive(|x: &Tensor| w.apply(x), &xs, false, DEFAULT_TOL).unwrap();
        assert_eq!(rep.max_violation, 0.0);
    }

    #[test]
    fn invariant_poly_examples() {
        let p = SignInvPoly::new(Arity::Vector { k: 2, m: 1 }, vec![table(&[(&[2, 2], 1.0)])]).unwrap();
        for v in [[1.0, 2.0], [-1.0, 2.0], [1.0, -2.0]] {
            assert_eq!(p.eval(&Tensor::new(v.to_vec(), &[2]).unwrap()).unwrap().data(), &[4.0]);
        }
        let err = SignInvPoly::new(Arity::Vector { k: 2, m: 1 }, vec![table(&[(&[1, 2], 1.0)])]);
        assert!(matches!(err, Err(AlgebraError::OddParity { .. })));
        // matrix form: column sums even, individual exponents may be odd
        let arity = Arity::Matrix { n: 2, k: 1, n_out: 1 };
        assert!(SignInvPoly::new(arity, vec![table(&[(&[1, 1], 1.0)])]).is_ok());
        assert!(SignInvPoly::new(arity, vec![table(&[(&[1, 0], 1.0)])]).is_err());
    }

    #[test]
    fn equivariant_poly_example() {
        let q = table(&[(&[2, 0], 1.0), (&[0, 2], 1.0)]);
        let p_inv = SignInvPoly::new(Arity::Vector { k: 2, m: 2 }, vec![q.clone(), q]).unwrap();
        let p = SignEqPoly::vector(p_inv).unwrap();
        let out = eval_poly(&p, &Tensor::new(vec![1.0, 1.0], &[2]).unwrap()).unwrap();
        assert_eq!(out.data(), &[2.0, 2.0]);
    }

    #[test]
    fn sampled_poly_is_exactly_equivariant() {
        for seed in 0..10 {
            let p = sample_signeq_poly(4, 4, 6, seed);
            let mut r = rng::seeded(seed);
            let xs: Vec<Tensor> = (0..4).map(|_| rng::gaussian_tensor(&[1, 4], &mut r)).collect();
            let f = |x: &Tensor| {
                p.eval(&x.clone().reshaped(&[4]).unwrap())
                    .map(|t| t.reshaped(&[1, 4]).unwrap())
            };
            let rep = check_signs_exhaustive(f, &xs, false, DEFAULT_TOL).unwrap();
            assert_eq!(rep.max_violation, 0.0);
        }
    }

    #[test]
    fn sampling_edge_cases() {
        assert_eq!(sample_signeq_poly(3, 4, 5, 7), sample_signeq_poly(3, 4, 5, 7));
        let zero = sample_signeq_poly(3, 4, 0, 1);
        let x = Tensor::new(vec![1.0, -2.0, 3.0], &[3]).unwrap();
        assert_eq!(zero.eval(&x).unwrap().data(), &[0.0, 0.0, 0.0]);
        let diag = sample_signeq_poly(3, 0, 2, 1);
        assert!(diag
            .p_inv()
            .outputs()
            .iter()
            .flat_map(|t| t.keys())
            .all(|e| e.iter().all(|&x| x == 0)));
        let y = diag.eval(&x).unwrap();
        let c: Vec<f64> = diag.p_inv().outputs().iter().map(|t| t.values().sum()).collect();
        for (i, ci) in c.iter().enumerate() {
            assert_eq!(y.data()[i], x.data()[i] * ci);
        }
    }

    #[test]
    fn matrix_poly_is_exactly_equivariant() {
        let mut r = rng::seeded(3);
        let (n, k, h, n_out) = (3, 4, 2, 2);
        let mut outputs = Vec::new();
        for _ in 0..h * k {
            let mut t = Monomials::new();
            for _ in 0..3 {
                let mut e = vec![0u32; n * k];
                for j in 0..k {
                    // odd exponents paired inside each column
                    if r.random::<bool>() {
                        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
                        e[a * k + j] += 1;
                        e[b * k + j] += 1;
                    }
                }
                t.insert(e, rng::normal(&mut r));
            }
            outputs.push(t);
        }
        let p_inv = SignInvPoly::new(Arity::Matrix { n, k, n_out: h }, outputs).unwrap();
        let p = SignEqPoly::matrix(
            ColumnwiseLinear::random(h, n, k, &mut r),
            p_inv,
            ColumnwiseLinear::random(n_out, h, k, &mut r),
        )
        .unwrap();
        let xs: Vec<Tensor> = (0..4).map(|_| rng::gaussian_tensor(&[n, k], &mut r)).collect();
        let rep = check_signs_exhaustive(|x: &Tensor| p.eval(x), &xs, false, DEFAULT_TOL).unwrap();
        assert_eq!(rep.max_violation, 0.0);
        let inv = check_signs_exhaustive(|x: &Tensor| p.p_inv().eval(x), &xs, true, DEFAULT_TOL).unwrap();
        assert_eq!(inv.max_violation, 0.0);
    }

    #[test]
    fn dimension_formula_vs_bruteforce() {
        for k in 1..=3 {
            for m1 in 0..=6 {
                for m2 in 0..=6 - m1 {
                    assert_eq!(
                        fixed_dim_formula(k, m1, m2).unwrap(),
                        fixed_dim_bruteforce(k, m1, m2).unwrap(),
                        "k={k} m1={m1} m2={m2}"
                    );
                }
            }
        }
        assert_eq!(fixed_dim_bruteforce(2, 3, 3).unwrap(), 32);
        assert_eq!(fixed_dim_bruteforce(3, 3, 3).unwrap(), 183);
        assert_eq!(fixed_dim_formula(5, 1, 2).unwrap(), 0);
        assert_eq!(fixed_dim_bruteforce(5, 1, 2).unwrap(), 0);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            fixed_dim_bruteforce(20, 4, 4),
            Err(AlgebraError::TooLarge { .. })
        ));
        assert!(fixed_dim_formula(0, 1, 1).is_err());
        assert!(fixed_dim_formula(31, 1, 1).is_err());
        assert!(matches!(
            fixed_dim_formula(30, 40, 40),
            Err(AlgebraError::Overflow { .. })
        ));
        assert!(dim_table(21).is_err());
    }

    #[test]
    fn first_order_maps_are_diagonal() {
        // equivariant maps R^k -> R^k are exactly the diagonal ones
        for k in 1..=6 {
            assert_eq!(fixed_dim_formula(k, 1, 1).unwrap(), k as u128);
        }
    }

    #[test]
    fn csv_layout() {
        let rows = dim_table(2).unwrap();
        assert_eq!(
            dim_table_csv(&rows),
            "k,formula,bruteforce,cubic\n1,1,1,1\n2,32,32,32\n"
        );
    }

    #[test]
    fn linear_constraint_nullspace() {
        for n in 1..=3 {
            for n_out in 1..=3 {
                for k in 1..=3 {
                    assert_eq!(equivariant_linear_dim(n, n_out, k).unwrap(), k * n * n_out);
                }
            }
        }
    }

    #[test]
    fn rank_of_small_matrices() {
        assert_eq!(matrix_rank(2, 2, vec![1.0, 2.0, 2.0, 4.0], 1e-12), 1);
        assert_eq!(matrix_rank(3, 3, Tensor::eye(3).into_data(), 1e-12), 3);
        assert_eq!(matrix_rank(2, 3, vec![0.0; 6], 1e-12), 0);
    }
}
