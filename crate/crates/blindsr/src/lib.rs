//! Blind super-resolution of sparse spike trains from arbitrary bandlimited
//! Fourier samples.
//!
//! The signal is a stream of K Dirac spikes convolved with an unknown point
//! spread function that lives in a known L-dimensional subspace. Measurements
//! are samples of the product spectrum at M arbitrary (not necessarily
//! uniform) frequencies inside a band [0, B_max]. Recovery lifts the unknowns
//! to a rank-1 matrix Z = x hᵀ and minimizes an atomic norm whose
//! semidefinite description is parametrized by prolate spheroidal wave
//! functions, which is what makes arbitrary (off-grid) frequencies tractable.
//!
//! Module map:
//! - [`pswf`]: prolate basis construction, truncation order selection, the
//!   interpolation matrix Φ and kernel sample vectors.
//! - [`signal`]: instance generation (spikes, sampling schemes, PSF
//!   subspaces), the measurement operator, noise, serialization.
//! - [`conic`]: a small conic-program layer (sparse data + cone list) and the
//!   interior-point backend behind it.
//! - [`sdp`]: assembly of the lifted atomic-norm SDP and solution extraction.
//! - [`localize`]: spike recovery from the Toeplitz moment matrix
//!   (matrix pencil + nonnegative least squares), spike matching.
//! - [`demix`]: rank-1 factorization of the recovered lift, amplitude and PSF
//!   recovery.
//! - [`baseline`]: the uniform-grid comparator SDP.
//! - [`experiments`]: Monte-Carlo harness, metrics, CSV/JSON emission.

// Force the openblas link even though we only reach LAPACK through the
// `lapack` bindings crate.
extern crate openblas_src as _;

pub mod baseline;
pub mod conic;
pub mod demix;
pub mod experiments;
pub mod la;
pub mod localize;
pub mod pswf;
pub mod sdp;
pub mod signal;

use thiserror::Error;

pub type Complex = num_complex::Complex64;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("config: {0}")]
    Config(String),
    /// Clustered pencil eigenvalues make mass recovery unreliable; the
    /// partial localization is attached for diagnosis.
    #[error("degenerate spectrum: {msg}")]
    DegenerateSpectrum { msg: String, partial: Box<crate::localize::LocalizationResult> },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
