//! Frozen configurations for `rcs reproduce`.

use clap::ValueEnum;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Spectra for renormalised cavity frequencies across the resonance.
    #[value(name = "fig2a")]
    Fig2a,
    /// Spectra on resonance for increasing coupling.
    #[value(name = "fig2b")]
    Fig2b,
    /// Fluctuation and shift maps over cavity frequency and coupling.
    #[value(name = "fig3")]
    Fig3,
    /// Quantum-noise and thermal spectra including the anti-Stokes side.
    #[value(name = "figS1")]
    FigS1,
    /// Fluctuation maps with stronger nonlinearity and with stronger damping.
    #[value(name = "figS2")]
    FigS2,
    /// Fluctuation maps at three temperatures.
    #[value(name = "figS3")]
    FigS3,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Fig2a => "fig2a",
            Target::Fig2b => "fig2b",
            Target::Fig3 => "fig3",
            Target::FigS1 => "figS1",
            Target::FigS2 => "figS2",
            Target::FigS3 => "figS3",
        }
    }

    /// Overrides on top of the defaults (probe `g_sE_p⁰ = 0.04`, `ω_p = 5`,
    /// `g = 0.04`, `g₄ = κ = γ = κ_s = 0.01`).
    pub fn preset(self) -> Value {
        let map_axes = json!([
            { "param": "model.omega_c", "min": 0.3, "max": 0.7, "count": 41 },
            { "param": "model.g", "min": 0.0, "max": 0.05, "count": 11 }
        ]);
        match self {
            Target::Fig2a => json!({
                "experiment": "spectrum",
                "n_traj": 15000,
                "sweep": { "axes": [{ "param": "omega_c_bar", "min": 0.4, "max": 0.6, "count": 9 }] },
            }),
            Target::Fig2b => json!({
                "experiment": "spectrum",
                "n_traj": 15000,
                "omega_c_bar": 0.5,
                "sweep": { "axes": [{ "param": "model.g", "min": 0.005, "max": 0.045, "count": 9 }] },
            }),
            Target::Fig3 => json!({
                "experiment": "sweep2d",
                "n_traj": 15000,
                "sweep": { "axes": map_axes },
            }),
            Target::FigS1 => json!({
                "experiment": "spectrum",
                "n_traj": 15000,
                "spectrum": { "shift_min": -1.3, "shift_max": 1.3, "points": 131 },
                "sweep": {
                    "variants": [{ "model.temperature": 0.0 }, { "model.temperature": 2.5 }],
                    "axes": [{ "param": "omega_c_bar", "min": 0.4, "max": 0.6, "count": 5 }],
                },
            }),
            Target::FigS2 => json!({
                "experiment": "sweep2d",
                "n_traj": 15000,
                "sweep": {
                    "variants": [{ "model.g4": 0.04 }, { "model.kappa": 0.06, "model.gamma": 0.06 }],
                    "axes": map_axes,
                },
            }),
            Target::FigS3 => json!({
                "experiment": "sweep2d",
                "n_traj": 15000,
                "sweep": {
                    "variants": [
                        { "model.temperature": 0.0 },
                        { "model.temperature": 0.3 },
                        { "model.temperature": 0.5 }
                    ],
                    "axes": map_axes,
                },
            }),
        }
    }
}
