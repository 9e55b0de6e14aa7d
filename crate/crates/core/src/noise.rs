//! Bath noise increments and per-trajectory random streams.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{ModelParams, ProbeParams};

/// Strengths of the three baths.
///
/// The cavity noise obeys `⟨ξ_a*(t)ξ_a(t')⟩ = κ·coth_c·δ(t − t')`. The Raman
/// noise is real and enters only the momentum-like `ḃ_i` equation; because
/// the damping `−γ b_i` acts on that single quadrature, its strength is
/// `γ·coth_R/2`, which is what keeps the undriven Raman mode at the thermal
/// Wigner width `coth_R/4` per quadrature. The scattered-photon bath is
/// always at zero temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kappa: f64,
    pub gamma: f64,
    pub kappa_s: f64,
    pub coth_c: f64,
    #[serde(rename = "coth_R")]
    pub coth_r: f64,
}

impl NoiseSpec {
    pub fn new(model: &ModelParams, probe: Option<&ProbeParams>) -> Self {
        NoiseSpec {
            kappa: model.kappa,
            gamma: model.gamma,
            kappa_s: probe.map_or(0.0, |p| p.kappa_s),
            coth_c: model.coth_cavity(),
            coth_r: model.coth_raman(),
        }
    }

    /// Standard deviations of the increments over a step `dt`.
    pub fn amplitudes(&self, dt: f64) -> NoiseAmplitudes {
        NoiseAmplitudes {
            a: (self.kappa * self.coth_c * dt / 2.0).sqrt(),
            b: (self.gamma * self.coth_r * dt / 2.0).sqrt(),
            s: (self.kappa_s * dt / 2.0).sqrt(),
        }
    }
}

/// Per-component standard deviations for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseAmplitudes {
    /// Each of `Re dW_a`, `Im dW_a`.
    pub a: f64,
    /// `dW_b`.
    pub b: f64,
    /// Each of `Re dW_s`, `Im dW_s`.
    pub s: f64,
}

impl NoiseAmplitudes {
    /// Increments laid out like the state vector: `[Re dW_a, Im dW_a, 0,
    /// dW_b, Re dW_s, Im dW_s]`. With `SCATTERED = false` the scattered
    /// increments are neither drawn nor applied.
    #[inline(always)]
    pub(crate) fn draw<const SCATTERED: bool, R: Rng>(&self, rng: &mut R) -> [f64; 6] {
        let ar: f64 = rng.sample(StandardNormal);
        let ai: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        if SCATTERED {
            let sr: f64 = rng.sample(StandardNormal);
            let si: f64 = rng.sample(StandardNormal);
            [self.a * ar, self.a * ai, 0.0, self.b * b, self.s * sr, self.s * si]
        } else {
            [self.a * ar, self.a * ai, 0.0, self.b * b, 0.0, 0.0]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseIncrements {
    pub dw_a: Complex64,
    pub dw_b: f64,
    pub dw_s: Complex64,
}

/// Draws one step's worth of bath increments.
pub fn sample_noise_increments<R: Rng>(dt: f64, noise: &NoiseSpec, rng: &mut R) -> NoiseIncrements {
    let w = noise.amplitudes(dt).draw::<true, _>(rng);
    NoiseIncrements {
        dw_a: Complex64::new(w[0], w[1]),
        dw_b: w[3],
        dw_s: Complex64::new(w[4], w[5]),
    }
}

/// Identifies one trajectory's random stream.
///
/// Each stream is a ChaCha8 keystream keyed by the master seed, with the
/// trajectory index selecting the 64-bit stream id, so distinct indices never
/// overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub trajectory_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        RngStream {
            master_seed,
            trajectory_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trajectory_index);
        rng
    }
}

/// Derives an independent master seed for sub-experiment `index`
/// (for example one detector frequency of a spectrum).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
