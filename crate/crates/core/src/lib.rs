//! Spectra of non-Hermitian random matrices and their Wasserstein distance to
//! the circular law.
//!
//! All numerical routines are generic over a [`Real`] scalar (`f32` or `f64`).
//! The aliases at the crate root fix the scalar to `f64`, which is what the
//! command line tools use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod analytics;
pub mod ensembles;
pub mod error;
pub mod matrix;
pub mod multiscale;
pub mod quadrature;
pub mod scalar;
pub mod spectra;
pub mod transport;

pub use ensembles::{derive_seed, Ensemble, MatrixEnsemble, SpectralSample};
pub use error::{Error, Result};
pub use scalar::{Complex, Real};

pub type C64 = Complex<f64>;
pub type Sample = SpectralSample<f64>;
pub type Sample32 = SpectralSample<f32>;
pub type Matrix = matrix::CMatrix<f64>;
pub type Spectrum = spectra::SpectrumResult<f64>;
pub type Transport = transport::TransportResult<f64>;
pub type Dual = transport::DualState<f64>;
