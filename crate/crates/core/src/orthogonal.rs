//! Orthogonally equivariant models from sign-equivariant ones.
//!
//! Given a point cloud `X` (`n x k`) with PCA frame `R_X`, canonicalization
//! computes `h(X R_X) R_X^T` with one call to a sign-equivariant `h`. Frame
//! averaging instead averages `base(X R_X S) S R_X^T` over all `2^k` sign
//! matrices `S` and works for any `base`.
//!
//! Inputs are not centered before multiplying by the frame; centering only
//! enters through the covariance that defines `R_X`. Translating `X` therefore
//! leaves the frame unchanged but not the model output.

use std::cell::Cell;
use std::fmt::Display;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{pca_frame, Frame, SpectralError};
use crate::symmetry::{act, all_sign_vectors, GroupElement, Side};
use crate::tensor::Tensor;

/// Largest `k` accepted by frame averaging.
pub const FRAME_AVERAGE_MAX_K: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WrapError {
    #[error(transparent)]
    Frame(#[from] SpectralError),
    #[error("frame averaging over 2^{k} sign choices is too expensive (k > {max}); use canonicalize mode")]
    TooLarge { k: usize, max: usize },
    #[error("inner model failed: {0}")]
    Inner(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, WrapError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapMode {
    #[default]
    Canonicalize,
    FrameAverage,
}

/// An inner model `R^{n x k} -> R^{m x k}` together with a count of its calls.
pub struct WrappedModel<F> {
    inner: F,
    pub mode: WrapMode,
    calls: Cell<u64>,
}

impl<F, E> WrappedModel<F>
where
    F: Fn(&Tensor) -> std::result::Result<Tensor, E>,
    E: Display,
{
    pub fn new(inner: F, mode: WrapMode) -> Self {
        WrappedModel {
            inner,
            mode,
            calls: Cell::new(0),
        }
    }

    /// Total inner forward passes so far.
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn reset_calls(&self) {
        self.calls.set(0);
    }

    fn call(&self, x: &Tensor) -> Result<Tensor> {
        self.calls.set(self.calls.get() + 1);
        (self.inner)(x).map_err(|e| WrapError::Inner(e.to_string()))
    }

    /// Uses the PCA frame of `x` itself.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let frame = pca_frame(x)?;
        self.forward_with_frame(x, &frame.rotation)
    }

    /// Applies the model with an explicit frame `r` (`k x k`), e.g. a frame
    /// computed from a larger point set than `x`.
    pub fn forward_with_frame(&self, x: &Tensor, r: &Tensor) -> Result<Tensor> {
        let k = r.rows();
        if x.shape().len() != 2 || x.cols() != k || r.cols() != k {
            return Err(WrapError::Shape(format!(
                "input {:?} with frame {:?}",
                x.shape(),
                r.shape()
            )));
        }
        let xr = x.matmul(r).expect("checked shapes");
        let rt = r.transpose();
        match self.mode {
            WrapMode::Canonicalize => {
                let y = self.call(&xr)?;
                check_out(&y, k)?;
                Ok(y.matmul(&rt).expect("checked shapes"))
            }
            WrapMode::FrameAverage => {
                if k > FRAME_AVERAGE_MAX_K {
                    return Err(WrapError::TooLarge {
                        k,
                        max: FRAME_AVERAGE_MAX_K,
                    });
                }
                let signs = all_sign_vectors(k).map_err(|e| WrapError::Shape(e.to_string()))?;
                let mut acc: Option<Tensor> = None;
                for s in &signs {
                    let xs = act(&xr, s, Side::Columns).expect("matching k");
                    let y = self.call(&xs)?;
                    check_out(&y, k)?;
                    let ys = act(&y, s, Side::Columns).expect("matching k");
                    acc = Some(match acc {
                        None => ys,
                        Some(a) => a
                            .zip_map(&ys, |p, q| p + q)
                            .map_err(|e| WrapError::Shape(e.to_string()))?,
                    });
                }
                let scale = 1.0 / signs.len() as f64;
                let mean = acc.expect("at least one sign vector").map(|v| v * scale);
                Ok(mean.matmul(&rt).expect("checked shapes"))
            }
        }
    }
}

fn check_out(y: &Tensor, k: usize) -> Result<()> {
    if y.shape().len() != 2 || y.cols() != k {
        return Err(WrapError::Shape(format!(
            "inner output {:?} must have {k} columns",
            y.shape()
        )));
    }
    Ok(())
}

/// `h(X R_X) R_X^T` for a sign-equivariant `h`.
pub fn orth_equiv_forward<F, E>(h: F, x: &Tensor) -> Result<Tensor>
where
    F: Fn(&Tensor) -> std::result::Result<Tensor, E>,
    E: Display,
{
    WrappedModel::new(h, WrapMode::Canonicalize).forward(x)
}

/// `2^-k sum_S base(X R_X S) S R_X^T` for an arbitrary `base`.
pub fn frame_average_forward<F, E>(base: F, x: &Tensor) -> Result<Tensor>
where
    F: Fn(&Tensor) -> std::result::Result<Tensor, E>,
    E: Display,
{
    WrappedModel::new(base, WrapMode::FrameAverage).forward(x)
}

/// `R_X S` for a sign vector `s`.
pub fn flip_frame(frame: &Frame, s: &GroupElement) -> Tensor {
    act(&frame.rotation, s, Side::Columns).expect("sign vector matches frame")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::symmetry::{check_equivariance, random_orthogonal, Actions, DEFAULT_TOL};
    use std::convert::Infallible;

    fn cloud(n: usize, k: usize, r: &mut rng::Rng64) -> Tensor {
        // distinct, well-separated variances per axis, then a random rotation
        let mut x = rng::gaussian_tensor(&[n, k], r);
        for i in 0..n {
            for j in 0..k {
                let v = x.at(i, j) * (1.0 + j as f64);
                x.set(i, j, v);
            }
        }
        let GroupElement::OrthogonalMatrix(q) = random_orthogonal(k, r) else {
            unreachable!()
        };
        x.matmul(&q).unwrap()
    }

    /// Odd in every column: `x * tanh(x^2 C)` with a fixed mixing `C`.
    fn sign_eq_h(x: &Tensor) -> std::result::Result<Tensor, Infallible> {
        let k = x.cols();
        let mut out = x.clone();
        for i in 0..x.rows() {
            let row = x.row(i).to_vec();
            for j in 0..k {
                let s: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(l, v)| v * v * (1.0 + (l * j) as f64 * 0.1))
                    .sum();
                out.set(i, j, row[j] * (0.3 * s).tanh() + row[j]);
            }
        }
        Ok(out)
    }

    /// Not sign-equivariant: adds a bias and a column-mixing term.
    fn plain_base(x: &Tensor) -> std::result::Result<Tensor, Infallible> {
        let k = x.cols();
        let mut out = x.clone();
        for i in 0..x.rows() {
            for j in 0..k {
                let v = x.at(i, j) + 0.5 * x.at(i, (j + 1) % k).powi(2) + 0.1 * j as f64;
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    #[test]
    fn identity_inner_returns_input() {
        let x = cloud(10, 3, &mut rng::seeded(0));
        let id = |x: &Tensor| Ok::<_, Infallible>(x.clone());
        assert!(orth_equiv_forward(id, &x).unwrap().max_abs_diff(&x) < 1e-12);
        assert!(frame_average_forward(id, &x).unwrap().max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn call_counts() {
        let x = cloud(10, 3, &mut rng::seeded(1));
        let w = WrappedModel::new(sign_eq_h, WrapMode::Canonicalize);
        w.forward(&x).unwrap();
        assert_eq!(w.calls(), 1);
        let fa = WrappedModel::new(sign_eq_h, WrapMode::FrameAverage);
        fa.forward(&x).unwrap();
        assert_eq!(fa.calls(), 8);
        fa.forward(&x).unwrap();
        assert_eq!(fa.calls(), 16);
    }

    #[test]
    fn frame_average_collapses_for_sign_equivariant_base() {
        let x = cloud(12, 4, &mut rng::seeded(2));
        let a = orth_equiv_forward(sign_eq_h, &x).unwrap();
        let b = frame_average_forward(sign_eq_h, &x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn independent_of_frame_signs() {
        let x = cloud(12, 5, &mut rng::seeded(3));
        let frame = pca_frame(&x).unwrap();
        let w = WrappedModel::new(sign_eq_h, WrapMode::Canonicalize);
        let base = w.forward_with_frame(&x, &frame.rotation).unwrap();
        for s in all_sign_vectors(5).unwrap() {
            let out = w.forward_with_frame(&x, &flip_frame(&frame, &s)).unwrap();
            assert!(out.max_abs_diff(&base) < 1e-10);
        }
    }

    #[test]
    fn both_modes_orthogonally_equivariant() {
        for mode in [WrapMode::Canonicalize, WrapMode::FrameAverage] {
            let inner: fn(&Tensor) -> std::result::Result<Tensor, Infallible> = match mode {
                WrapMode::Canonicalize => sign_eq_h,
                WrapMode::FrameAverage => plain_base,
            };
            let w = WrappedModel::new(inner, mode);
            let rep = check_equivariance(
                |x: &Tensor| w.forward(x),
                |r| cloud(10, 4, r),
                |_, r| random_orthogonal(4, r),
                Actions::SIGN_COLUMNS,
                100,
                DEFAULT_TOL,
                4,
            )
            .unwrap();
            assert!(rep.max_violation < 1e-8, "{mode:?}: {}", rep.max_violation);
        }
    }

    #[test]
    fn canonicalizing_a_plain_base_is_not_equivariant() {
        let w = WrappedModel::new(plain_base, WrapMode::Canonicalize);
        let rep = check_equivariance(
            |x: &Tensor| w.forward(x),
            |r| cloud(10, 3, r),
            |_, r| random_orthogonal(3, r),
            Actions::SIGN_COLUMNS,
            50,
            DEFAULT_TOL,
            5,
        )
        .unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn errors() {
        let x = Tensor::from_rows(&[vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]]).unwrap();
        let id = |x: &Tensor| Ok::<_, Infallible>(x.clone());
        assert!(matches!(orth_equiv_forward(id, &x), Err(WrapError::Frame(_))));
        let big = Tensor::eye(17);
        let fa = WrappedModel::new(id, WrapMode::FrameAverage);
        assert!(matches!(
            fa.forward_with_frame(&big, &Tensor::eye(17)),
            Err(WrapError::TooLarge { .. })
        ));
        assert_eq!(fa.calls(), 0);
    }
}
