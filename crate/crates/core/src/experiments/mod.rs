//! Training studies: link prediction, n-body simulation and polynomial fitting.

pub mod linkpred;
pub mod metrics;
pub mod nbody;
pub mod polyfit;

use thiserror::Error;

use crate::graph::GraphError;
use crate::models::ModelError;
use crate::orthogonal::WrapError;
use crate::spectral::SpectralError;
use crate::symmetry::SymmetryError;
use crate::tensor::TensorError;

pub use linkpred::{run_linkpred, run_linkpred_models, LinkModel, LinkPredConfig};
pub use metrics::{auc, median_epoch_time, ResultsRecord, CSV_HEADER};
pub use nbody::{gen_nbody, run_nbody, NBodyConfig, NBodyModel};
pub use polyfit::{fit_poly, run_poly_fit, PolyFitConfig, PolyModel};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Wrap(#[from] WrapError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error("metric: {0}")]
    Metric(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{what} stayed degenerate after {attempts} attempts")]
    Degenerate { what: String, attempts: usize },
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
