//! Abrikosov vortex lattices for the two-dimensional Ginzburg-Landau equations.
//!
//! The crate works on a single lattice cell with magnetic (quasi-periodic)
//! boundary conditions. The order parameter is expanded in Landau levels of
//! the constant-field magnetic Laplacian; the periodic potential perturbation
//! is handled with FFTs on the same logical grid. On top of that sit the
//! Lyapunov-Schmidt reduction that produces the bifurcating branch out of the
//! normal state, the Abrikosov parameter and its critical points over the
//! modular fundamental domain, and the constructive gauge fixing of lattice
//! states.
//!
//! Module map:
//!
//! * [`lattice`]: shape normalization, cell geometry, rescaling.
//! * [`landau`]: theta-function null space, ladder operators, Landau basis.
//! * [`glcore`]: energy, residuals, induced potential, the map `F(lambda, psi)`.
//! * [`abrikosov`]: `beta(tau)`, `kappa_c`, critical points, `E_b(tau)`.
//! * [`bifurcation`]: reduction, branch construction, expansion fits.
//! * [`gauge`]: symmetries and gauge fixing.
//! * [`io`]: CSV/JSON snapshots.

pub mod abrikosov;
pub mod bifurcation;
pub mod error;
pub mod gauge;
pub mod glcore;
pub mod io;
pub mod landau;
pub mod lattice;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
