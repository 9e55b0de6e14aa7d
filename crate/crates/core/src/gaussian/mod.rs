//! Gaussian (Wick-decoupled) theory of the Raman-cavity system.
//!
//! * closed forms: renormalised cavity frequency, squeezing force, Rabi
//!   splitting, stability threshold;
//! * frequency-resolved fluctuations `n(ω)`, `f(ω)`, perturbatively and from
//!   the self-consistent fixed point;
//! * the linearised dynamics of the Raman coordinate coupled to the cavity
//!   second moments, giving the polariton branches.

mod grid;
mod polariton;
mod spectral;

pub use grid::FrequencyGrid;
pub use polariton::{
    equilibrium_shift, linearized_matrix, linearized_modes, polariton_frequencies, PolaritonBranches,
};
pub use spectral::{
    perturbative_fluctuations, selfconsistent_fluctuations, squeezing_force, GaussianSolution,
    SolverOptions,
};

use crate::model::ModelParams;

/// `ω̄_c = ω_c − 12g²/ω_R + 3g₄`.
pub fn renormalized_cavity_freq(model: &ModelParams) -> f64 {
    model.omega_c - 12.0 * model.g * model.g / model.omega_r + 3.0 * model.g4
}

/// Bare cavity frequency that puts `ω̄_c` at `ω_R/2`.
pub fn resonant_omega_c(g: f64, g4: f64, omega_r: f64) -> f64 {
    omega_r / 2.0 + 12.0 * g * g / omega_r - 3.0 * g4
}

/// Perturbative `⟨x̂²⟩ = 1/(2ω_c)`.
pub fn perturbative_x2(model: &ModelParams) -> f64 {
    1.0 / (2.0 * model.omega_c)
}

/// Rabi half-splitting `δ = √(2⟨x̂²⟩ω_R)·(1 − 27g₄⟨x̂²⟩³/2)·g`, with
/// `⟨x̂²⟩` defaulting to [`perturbative_x2`].
pub fn rabi_splitting(model: &ModelParams, x2: Option<f64>) -> f64 {
    let x2 = x2.unwrap_or_else(|| perturbative_x2(model));
    (2.0 * x2 * model.omega_r).sqrt() * (1.0 - 27.0 * model.g4 * x2.powi(3) / 2.0) * model.g
}
