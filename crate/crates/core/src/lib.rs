//! Superlinear integral equations `u = K(u^q dsigma) + f` on finite
//! quasi-metric spaces: Picard solvers with certificates, solvability
//! criteria, capacities and a one-dimensional Dirichlet model.

pub mod capacity;
pub mod criteria;
pub mod dirichlet;
pub mod error;
pub mod kernel;
pub mod optimize;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
pub use kernel::{make_kernel, KernelFamily, KernelModel, KernelOptions};
pub use space::{AtomicMeasure, ConjugatePair, KappaPolicy, Point, QuasiMetricSpace};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
