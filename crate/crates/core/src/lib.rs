//! Secrecy-rate maximization for an extremely large RIS serving a near-field
//! legitimate user in the presence of an eavesdropper.
//!
//! The crate is split along the processing chain:
//!
//! - [`geometry`]: array responses, spherical-wave and planar-wave receiver
//!   channels, Rician BS→RIS channel synthesis.
//! - [`secrecy`]: cascaded channels, rates, secrecy rate and constraint checks.
//! - [`qcqp`]: a small dense log-barrier interior-point solver for the convex
//!   quadratically constrained subproblems.
//! - [`precoder`]: WMMSE + SCA design of the information and jamming beamformers.
//! - [`ris`]: ADMM design of the reflection vector (continuous or b-bit phases).
//! - [`ao`]: alternating optimization driver and complexity diagnostics.
//! - [`harness`]: scenario files, seeded Monte Carlo sweeps, CSV/SVG output.

pub mod ao;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod precoder;
pub mod qcqp;
pub mod ris;
pub mod secrecy;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

/// Imaginary unit.
pub const J: C64 = C64::new(0.0, 1.0);

/// Squared Euclidean norm of a complex vector.
#[inline]
pub(crate) fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`.
#[inline]
pub(crate) fn inner(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
