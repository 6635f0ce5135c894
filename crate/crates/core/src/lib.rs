//! Harmonic Bergman spaces on homogeneous trees.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`, which the experiments use throughout.

// `!(x > 0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod cz;
pub mod error;
pub mod experiments;
pub mod harmonic;
pub mod kernel;
pub mod measure;
pub mod operators;
pub mod scalar;
pub mod series;
pub mod tree;

pub use error::{Result, TreeError};
pub use scalar::Scalar;
pub use tree::{GromovBall, Region, Tree, Vertex};

pub type Measure = measure::RadialMeasure<f64>;
pub type ExpMeasure = measure::ExpMeasure<f64>;
pub type Kernel = kernel::KernelEvaluator<f64>;
pub type Function = harmonic::DenseFunction<f64>;
pub type Expansion = harmonic::HarmonicExpansion<f64>;
pub type Operator = operators::Toeplitz<f64>;
pub type Params = operators::OperatorParams<f64>;
pub type Decomposition = cz::CzDecomposition<f64>;
