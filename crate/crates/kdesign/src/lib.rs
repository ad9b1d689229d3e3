//! Space-filling designs and Bayesian quadrature rules built by minimizing
//! kernel discrepancy.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod bounds;
pub mod candidates;
pub mod error;
pub mod herding;
pub mod io;
pub mod kernel;
pub mod kl;
pub mod linalg;
pub mod manifest;
pub mod measure;
pub mod metrics;
pub mod multi;
pub mod points;
pub mod potential;
pub mod quadrature;
pub mod refine;
pub mod sequential;
pub mod sobol;

pub use error::{Error, Result};
pub use kernel::{Definiteness, Kernel, ReducedKernel};
pub use measure::DiscreteSignedMeasure;
pub use points::PointSet;
pub use potential::{MeasureSpec, PotentialProvider, UniformForm};
