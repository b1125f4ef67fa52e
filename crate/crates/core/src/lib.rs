//! Numerical laboratory for the advection-diffusion equation
//! `∂ₜu + div(u b) = Δu` on the flat torus `𝕋ᵈ = ℝᵈ/ℤᵈ`, `d ∈ {1, 2, 3}`.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`], [`field`], [`norms`], [`io`]: uniform torus grids, sampled
//!   fields, Lebesgue/Sobolev norms and the binary field container.
//! * [`spectral`]: Fourier transforms, exact spectral derivatives, Leray
//!   projection and two-thirds dealiasing.
//! * [`mollifier`]: unit-mass smoothing kernels and spectral convolution.
//! * [`library`]: catalog of divergence-free velocity fields with
//!   integrability metadata.
//! * [`solver`]: integrating-factor Runge-Kutta time stepping with energy,
//!   `Lᵠ` and convex-entropy diagnostics.
//! * [`commutator`]: the transport/mollification commutator and its
//!   convergence studies in `L¹` and `L²H⁻¹`.
//! * [`regime`]: the well-posedness map over exponent space.
//!
//! With the default `parallel` feature, inner loops (FFT line batches,
//! reductions, sweeps) run on the rayon pool. Without it every loop runs
//! sequentially and produces bit-identical results.

pub mod commutator;
pub mod error;
pub mod exponent;
pub mod field;
pub mod grid;
pub mod io;
pub mod library;
pub mod mollifier;
pub mod norms;
pub mod par;
pub mod quadrature;
pub mod regime;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use exponent::Exponent;
pub use field::{ScalarField, VectorField};
pub use grid::{geodesic_distance, TorusGrid};
pub use mollifier::{Mollifier, Profile};
pub use norms::{h_norm, lp_norm};
pub use spectral::SpectralField;
