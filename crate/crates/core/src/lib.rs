//! Sign-equivariant networks on eigenvectors.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense `f64` tensors, tape-based reverse-mode autodiff, Adam.
//! * [`spectral`]: symmetric eigensolvers, graph Laplacians, PCA frames.
//! * [`symmetry`]: sign/permutation/orthogonal group actions and equivariance checkers.
//! * [`algebra`]: sign-equivariant linear maps, invariant and equivariant polynomials,
//!   dimension counting for equivariant maps between tensor representations.
//! * [`models`]: MLPs, `v ⊙ MLP(|v|)`, SignNet, columnwise-linear layers, DSS layers, decoders.
//! * [`orthogonal`]: orthogonally equivariant models from PCA frames, frame averaging.
//! * [`graph`]: random graph generators, edge splits, edge-list IO.
//! * [`experiments`]: link prediction, n-body and polynomial-fitting studies.
//! * [`suite`]: the property suite behind `signeq check`.
//! * [`cli`]: the `signeq` command line.

// `!(x > t)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod cli;
pub mod experiments;
pub mod graph;
pub mod models;
pub mod orthogonal;
pub mod rng;
pub mod spectral;
pub mod suite;
pub mod symmetry;
pub mod tensor;

pub use tensor::{Tape, Tensor, Var};
