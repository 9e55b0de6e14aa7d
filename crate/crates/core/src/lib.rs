//! Equilibrium parametric amplification in Raman-cavity hybrids.
//!
//! A cavity mode `a` couples quadratically to a Raman-active mode `b`
//! (`H_int = g (a + a†)² (b + b†)`), with a quartic cavity nonlinearity `g₄`.
//! When the renormalised cavity frequency sits at half the Raman frequency the
//! vacuum fluctuations of the cavity parametrically drive the Raman mode.
//!
//! The crate provides:
//!
//! * [`model`]: parameter and state types and the Langevin drift;
//! * [`noise`] and [`dynamics`]: noise increments, tanh ramps and the
//!   stochastic Heun integrator for single truncated-Wigner trajectories;
//! * [`ensemble`]: Wigner sampling, trajectory-parallel averaging and the
//!   steady-state fluctuation observables;
//! * [`spectroscopy`]: simulated stimulated-Raman spectra and peak analysis;
//! * [`gaussian`]: closed-form and self-consistent Gaussian theory;
//! * [`material`]: coupling estimates from material and cavity parameters.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod gaussian;
pub mod material;
pub mod model;
pub mod noise;
pub mod spectroscopy;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ModelParams, ProbeParams, ScheduleParams, SystemState};
