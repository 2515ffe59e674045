//! Quantum-noise simulator for a closed-loop optomechanical plaquette: one
//! driven optical cavity coupled to two degenerate mechanical resonators that
//! are themselves coupled through a complex rate carrying a synthetic loop
//! phase.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`]: physical inputs, unit conversion and derived quantities.
//! - [`classical`]: self-consistent mean-field sideband amplitudes.
//! - [`drift`]: the periodic 6×6 quadrature drift matrix and noise matrices.
//! - [`steadystate`]: stationary covariances (residue formula and Lyapunov).
//! - [`floquet`]: covariance harmonics under amplitude modulation.
//! - [`spectral`]: eigenvalue loci, exceptional points and surfaces.
//! - [`oracle`]: brute-force time-domain propagation used as ground truth.
//! - [`observables`]: phonon numbers, squeezing and the figure recipes.

pub mod classical;
pub mod drift;
mod error;
pub mod floquet;
pub mod linalg;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod spectral;
pub mod steadystate;

pub use error::{Error, Result};

pub use classical::{solve_classical, ClassicalSteadyState};
pub use drift::{build_drift, build_noise, linearize, DriftHarmonics, Linearization, NoiseMatrices};
pub use params::{derive, thermal_occupancy, DerivedParams, SystemParams};
