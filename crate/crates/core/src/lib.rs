//! Singular-value statistics of coupled and correlated products of complex
//! Gaussian matrices: special functions, contour quadrature, samplers,
//! Gram matrices, finite-N kernels and their hard-edge limits.
//!
//! `specfun` and `quadrature` are generic over [`Real`]; the matrix-level
//! modules work in `f64`.

pub mod ensembles;
pub mod error;
pub mod gram;
pub mod kernels;
pub mod limits;
pub mod linalg;
pub mod quadrature;
pub mod specfun;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};

/// Scalar type accepted by the generic layers.
pub trait Real: Float + FloatConst + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }
}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + std::fmt::Debug + Send + Sync + 'static
{}

pub type C64 = num_complex::Complex<f64>;
pub type Contour64 = quadrature::Contour<f64>;
pub type ContourPair64 = quadrature::ContourPair<f64>;
pub type QuadratureResult64 = quadrature::QuadratureResult<f64>;
