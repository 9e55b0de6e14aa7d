//! Parameters, state and deterministic equations of motion.
//!
//! Units: ħ = 1 and the Raman frequency sets the scale, so with the default
//! `omega_r = 1` every frequency, coupling and rate is in units of ω_R, times
//! are in units of 1/ω_R and temperatures in units of ħω_R/k_B.
//!
//! The semiclassical fields are the complex amplitudes `a` (cavity), `b`
//! (Raman mode) and `a_s` (scattered photon). In real components the drift is
//!
//! ```text
//! ȧ     = −iω_c a − i[2g·x·B + g₄·x³] − κa            x = a + a*, B = b + b*
//! ḃ_r   = ω_R b_i
//! ḃ_i   = −ω_R b_r − g x² − 2 g_sE_p(t) a_s,r − γ b_i
//! ȧ_s,r = ω_s a_s,i − κ_s a_s,r
//! ȧ_s,i = −ω_s a_s,r − 2 g_sE_p(t) b_r − κ_s a_s,i
//! ```
//!
//! with `E_p(t) = E_p⁰(t)·sin(ω_p t)`, and both `g(t)` and `E_p⁰(t)` switched
//! on with tanh ramps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Any state component above this magnitude marks the trajectory as divergent.
pub const DEFAULT_OVERFLOW_THRESHOLD: f64 = 1.0e6;

/// Step size in units of the fastest period: `dt = STEP_FRACTION · 2π/ω_max`.
pub const STEP_FRACTION: f64 = 0.002;

/// Largest allowed `dt · ω_max`.
pub const MAX_STEP_PHASE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub omega_c: f64,
    #[serde(rename = "omega_R")]
    pub omega_r: f64,
    pub g: f64,
    pub g4: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub temperature: f64,
}

impl Default for ModelParams {
    /// Reference parameter set tuned onto the renormalised resonance
    /// `ω_c − 12g²/ω_R + 3g₄ = ω_R/2`.
    fn default() -> Self {
        let (g, g4) = (0.04, 0.01);
        ModelParams {
            omega_c: 0.5 + 12.0 * g * g - 3.0 * g4,
            omega_r: 1.0,
            g,
            g4,
            kappa: 0.01,
            gamma: 0.01,
            temperature: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        positive("omega_c", self.omega_c)?;
        positive("omega_R", self.omega_r)?;
        non_negative("g", self.g)?;
        non_negative("g4", self.g4)?;
        non_negative("kappa", self.kappa)?;
        non_negative("gamma", self.gamma)?;
        non_negative("temperature", self.temperature)?;
        Ok(())
    }

    pub fn stability_threshold(&self) -> f64 {
        stability_threshold(self.g4, self.omega_r)
    }

    /// `g < √(g₄ω_R)/2`, strictly; the uncoupled harmonic model is stable.
    pub fn is_stable(&self) -> bool {
        self.g == 0.0 || self.g < self.stability_threshold()
    }

    /// Within 5% of the stability threshold (or beyond it).
    pub fn near_instability(&self) -> bool {
        self.g > 0.0 && self.g >= 0.95 * self.stability_threshold()
    }

    /// `coth(ω_c/2T)`, exactly 1 at T = 0.
    pub fn coth_cavity(&self) -> f64 {
        thermal_factor(self.omega_c, self.temperature)
    }

    /// `coth(ω_R/2T)`, exactly 1 at T = 0.
    pub fn coth_raman(&self) -> f64 {
        thermal_factor(self.omega_r, self.temperature)
    }

    /// Uncoupled reference `⟨Q̂²⟩₀ = coth(ω_R/2T)/(2ω_R)`.
    pub fn raman_reference_q2(&self) -> f64 {
        self.coth_raman() / (2.0 * self.omega_r)
    }

    /// Uncoupled reference `⟨x̂²⟩₀ = coth(ω_c/2T)/(2ω_c)`.
    pub fn cavity_reference_x2(&self) -> f64 {
        self.coth_cavity() / (2.0 * self.omega_c)
    }
}

/// `coth(ω/2T)` with the T → 0 limit taken exactly.
pub fn thermal_factor(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 1.0;
    }
    let x = omega / (2.0 * temperature);
    if x > 20.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

/// Largest stable Raman-cavity coupling, `√(g₄ω_R)/2`.
pub fn stability_threshold(g4: f64, omega_r: f64) -> f64 {
    (g4 * omega_r).sqrt() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    /// Probe drive strength `g_s·E_p⁰`.
    #[serde(rename = "gs_Ep0")]
    pub gs_ep0: f64,
    pub omega_p: f64,
    /// Detector (scattered-photon) frequency.
    pub omega_s: f64,
    pub kappa_s: f64,
}

impl Default for ProbeParams {
    /// Reference probe, detector parked on the Stokes line.
    fn default() -> Self {
        ProbeParams {
            gs_ep0: 0.04,
            omega_p: 5.0,
            omega_s: 4.0,
            kappa_s: 0.01,
        }
    }
}

impl ProbeParams {
    pub fn validate(&self) -> Result<()> {
        non_negative("gs_Ep0", self.gs_ep0)?;
        positive("omega_p", self.omega_p)?;
        positive("omega_s", self.omega_s)?;
        non_negative("kappa_s", self.kappa_s)?;
        Ok(())
    }

    /// Diagnostic only: the weak-probe picture needs `g_s E_p⁰ ≲ g`.
    pub fn weak_probe_warning(&self, model: &ModelParams) -> Option<String> {
        (self.gs_ep0 > model.g).then(|| {
            format!(
                "probe strength gs_Ep0 = {} exceeds the coupling g = {}; weak-probe picture questionable",
                self.gs_ep0, model.g
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    /// Centre of the coupling ramp.
    pub t0: f64,
    /// Probe turn-on time; also the steady-state measurement time.
    pub tp: f64,
    /// Spectrum measurement time.
    pub tstar: f64,
    /// Ramp width.
    pub tau: f64,
    /// Integrator step while every mode in play is resolved.
    pub dt: f64,
}

impl ScheduleParams {
    /// Timing constants `ω_R t₀ = 10`, `ω_R t_p = 100`, `ω_R t* = 250`,
    /// `τ = 1/ω_R` with the given step.
    pub fn standard(omega_r: f64, dt: f64) -> Self {
        ScheduleParams {
            t0: 10.0 / omega_r,
            tp: 100.0 / omega_r,
            tstar: 250.0 / omega_r,
            tau: 1.0 / omega_r,
            dt,
        }
    }

    /// Standard timings with the default step for the given dynamics.
    pub fn standard_for(model: &ModelParams, probe: Option<&ProbeParams>) -> Self {
        Self::standard(model.omega_r, default_dt(max_frequency(model, probe)))
    }

    pub fn validate(&self, omega_max: f64) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0 < self.tp && self.tp < self.tstar) {
            return Err(Error::invalid(
                "schedule",
                format!(
                    "need 0 < t0 < tp < tstar, got t0={} tp={} tstar={}",
                    self.t0, self.tp, self.tstar
                ),
            ));
        }
        positive("tau", self.tau)?;
        positive("dt", self.dt)?;
        if self.dt * omega_max >= MAX_STEP_PHASE {
            return Err(Error::invalid(
                "dt",
                format!(
                    "dt·ω_max = {:.4} must stay below {MAX_STEP_PHASE}",
                    self.dt * omega_max
                ),
            ));
        }
        Ok(())
    }
}

/// Fastest frequency of the dynamics: `max(ω_p, ω_s, 2ω_c, ω_R)`.
pub fn max_frequency(model: &ModelParams, probe: Option<&ProbeParams>) -> f64 {
    let slow = (2.0 * model.omega_c).max(model.omega_r);
    match probe {
        Some(p) => slow.max(p.omega_p).max(p.omega_s),
        None => slow,
    }
}

pub fn default_dt(omega_max: f64) -> f64 {
    STEP_FRACTION * std::f64::consts::TAU / omega_max
}

/// One stochastic trajectory's amplitudes at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemState {
    pub a: Complex64,
    pub b: Complex64,
    pub a_s: Complex64,
    pub t: f64,
}

impl SystemState {
    pub(crate) fn to_array(self) -> [f64; 6] {
        [
            self.a.re, self.a.im, self.b.re, self.b.im, self.a_s.re, self.a_s.im,
        ]
    }

    pub(crate) fn from_array(y: &[f64; 6], t: f64) -> Self {
        SystemState {
            a: Complex64::new(y[0], y[1]),
            b: Complex64::new(y[2], y[3]),
            a_s: Complex64::new(y[4], y[5]),
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn max_component(&self) -> f64 {
        max_abs(&self.to_array())
    }

    /// Non-finite or any component beyond `threshold`.
    pub fn is_divergent(&self, threshold: f64) -> bool {
        !(self.max_component() <= threshold)
    }
}

/// Time derivative of a [`SystemState`]; `db.re`/`db.im` are `ḃ_r`/`ḃ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Derivative {
    pub da: Complex64,
    pub db: Complex64,
    pub da_s: Complex64,
}

/// Time-independent coefficients of the drift, packed for the hot loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DriftCoefficients {
    pub omega_c: f64,
    pub omega_r: f64,
    pub g4: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub omega_s: f64,
    pub kappa_s: f64,
}

impl DriftCoefficients {
    pub fn new(model: &ModelParams, probe: Option<&ProbeParams>) -> Self {
        DriftCoefficients {
            omega_c: model.omega_c,
            omega_r: model.omega_r,
            g4: model.g4,
            kappa: model.kappa,
            gamma: model.gamma,
            omega_s: probe.map_or(0.0, |p| p.omega_s),
            kappa_s: probe.map_or(0.0, |p| p.kappa_s),
        }
    }

    /// Drift with the instantaneous coupling `g` and probe term `gs·E_p(t)`.
    /// With `SCATTERED = false` the scattered mode is held fixed.
    #[inline(always)]
    pub fn eval<const SCATTERED: bool>(&self, y: &[f64; 6], g: f64, gs_ep: f64) -> [f64; 6] {
        let x = 2.0 * y[0];
        let big_b = 2.0 * y[2];
        let x2 = x * x;
        let force = 2.0 * g * x * big_b + self.g4 * x2 * x;
        let da_r = self.omega_c * y[1] - self.kappa * y[0];
        let da_i = -self.omega_c * y[0] - force - self.kappa * y[1];
        let db_r = self.omega_r * y[3];
        if SCATTERED {
            let db_i = -self.omega_r * y[2] - g * x2 - 2.0 * gs_ep * y[4] - self.gamma * y[3];
            let ds_r = self.omega_s * y[5] - self.kappa_s * y[4];
            let ds_i = -self.omega_s * y[4] - 2.0 * gs_ep * y[2] - self.kappa_s * y[5];
            [da_r, da_i, db_r, db_i, ds_r, ds_i]
        } else {
            let db_i = -self.omega_r * y[2] - g * x2 - self.gamma * y[3];
            [da_r, da_i, db_r, db_i, 0.0, 0.0]
        }
    }
}

/// Deterministic drift of the Langevin system at `state.t`.
///
/// The coupling and probe strength follow their ramps (see
/// [`crate::dynamics::ramp_value`]); `probe = None` disables the probe and
/// freezes the scattered mode.
pub fn drift(
    state: &SystemState,
    model: &ModelParams,
    probe: Option<&ProbeParams>,
    schedule: &ScheduleParams,
) -> Derivative {
    let coeffs = DriftCoefficients::new(model, probe);
    let g = crate::dynamics::ramp_value(state.t, schedule.t0, schedule.tau, model.g);
    let y = state.to_array();
    let d = match probe {
        Some(p) => {
            let gs_ep = crate::dynamics::probe_field(state.t, p, schedule);
            coeffs.eval::<true>(&y, g, gs_ep)
        }
        None => coeffs.eval::<false>(&y, g, 0.0),
    };
    Derivative {
        da: Complex64::new(d[0], d[1]),
        db: Complex64::new(d[2], d[3]),
        da_s: Complex64::new(d[4], d[5]),
    }
}

#[inline]
pub(crate) fn max_abs(y: &[f64; 6]) -> f64 {
    let mut m = 0.0_f64;
    for v in y {
        // NaN must survive so that non-finite states count as divergent
        if v.is_nan() {
            return f64::NAN;
        }
        m = m.max(v.abs());
    }
    m
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be ≥ 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_threshold_values() {
        assert!((stability_threshold(0.01, 1.0) - 0.05).abs() < 1e-15);
        assert_eq!(stability_threshold(0.0, 1.0), 0.0);
        assert!((stability_threshold(0.04, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn stability_flag_is_strict() {
        let mut m = ModelParams::default();
        m.g4 = 0.04;
        m.g = 0.1;
        assert!(!m.is_stable());
        m.g = 0.0999;
        assert!(m.is_stable());
        m.g4 = 0.0;
        m.g = 0.0;
        assert!(m.is_stable());
        assert!(!m.near_instability());
        m.g = 1e-6;
        assert!(!m.is_stable());
        assert!(m.near_instability());
    }

    #[test]
    fn thermal_factor_limits() {
        assert_eq!(thermal_factor(1.0, 0.0), 1.0);
        assert_eq!(thermal_factor(1.0, 1e-6), 1.0);
        let coth = thermal_factor(1.0, 2.5);
        assert!((coth - 1.0 / 0.2_f64.tanh()).abs() < 1e-14);
        assert!((coth - 5.0665).abs() < 1e-4);
    }

    fn quiet_model() -> ModelParams {
        ModelParams {
            omega_c: 0.7,
            omega_r: 1.0,
            g: 0.0,
            g4: 0.0,
            kappa: 0.0,
            gamma: 0.0,
            temperature: 0.0,
        }
    }

    #[test]
    fn free_cavity_rotates() {
        let m = quiet_model();
        let s = SystemState {
            a: Complex64::new(1.0, 0.0),
            t: 50.0,
            ..Default::default()
        };
        let sched = ScheduleParams::standard(1.0, 1e-3);
        let d = drift(&s, &m, None, &sched);
        let expected = -Complex64::i() * m.omega_c * s.a;
        assert!((d.da - expected).norm() < 1e-15);
    }

    #[test]
    fn raman_force_from_cavity_intensity() {
        let mut m = quiet_model();
        m.g = 0.03;
        let x0 = 0.8;
        let s = SystemState {
            a: Complex64::new(x0, 0.0),
            t: 1e4,
            ..Default::default()
        };
        let sched = ScheduleParams::standard(1.0, 1e-3);
        let d = drift(&s, &m, None, &sched);
        // ramp is saturated at t = 1e4
        assert!((d.db.im - (-m.g * (2.0 * x0).powi(2))).abs() < 1e-14);
        assert_eq!(d.db.re, 0.0);
    }

    #[test]
    fn b_r_drift_has_no_damping() {
        let mut m = ModelParams::default();
        m.gamma = 0.7;
        let s = SystemState {
            a: Complex64::new(0.3, -0.2),
            b: Complex64::new(1.1, 0.4),
            a_s: Complex64::new(0.2, 0.9),
            t: 120.0,
        };
        let p = ProbeParams::default();
        let sched = ScheduleParams::standard(1.0, 1e-3);
        let d = drift(&s, &m, Some(&p), &sched);
        assert_eq!(d.db.re, m.omega_r * s.b.im);
    }

    #[test]
    fn drift_is_bitwise_deterministic() {
        let m = ModelParams::default();
        let p = ProbeParams::default();
        let sched = ScheduleParams::standard(1.0, 1e-3);
        let s = SystemState {
            a: Complex64::new(0.31, -0.27),
            b: Complex64::new(-0.12, 0.44),
            a_s: Complex64::new(0.05, 0.6),
            t: 137.25,
        };
        let d1 = drift(&s, &m, Some(&p), &sched);
        let d2 = drift(&s, &m, Some(&p), &sched);
        assert_eq!(d1.da.re.to_bits(), d2.da.re.to_bits());
        assert_eq!(d1.db.im.to_bits(), d2.db.im.to_bits());
        assert_eq!(d1.da_s.im.to_bits(), d2.da_s.im.to_bits());
    }

    #[test]
    fn schedule_validation() {
        let m = ModelParams::default();
        let p = ProbeParams::default();
        let w = max_frequency(&m, Some(&p));
        assert_eq!(w, 5.0);
        let s = ScheduleParams::standard_for(&m, Some(&p));
        s.validate(w).unwrap();
        let mut bad = s;
        bad.dt = 0.05;
        assert!(bad.validate(w).is_err());
        let mut bad = s;
        bad.tp = bad.tstar + 1.0;
        assert!(bad.validate(w).is_err());
    }

    #[test]
    fn divergence_detection() {
        let mut s = SystemState::default();
        assert!(!s.is_divergent(DEFAULT_OVERFLOW_THRESHOLD));
        s.b = Complex64::new(0.0, 2e6);
        assert!(s.is_divergent(DEFAULT_OVERFLOW_THRESHOLD));
        s.b = Complex64::new(f64::NAN, 0.0);
        assert!(s.is_divergent(DEFAULT_OVERFLOW_THRESHOLD));
    }
}
