//! Single-trajectory time stepping: tanh ramps, the stochastic Heun step and
//! the precomputed time grid shared by every trajectory of an ensemble.
//!
//! When a probe is present the run is split in two. Until shortly before the
//! probe ramp (`t_p − 12τ`, where the ramp is below 10⁻¹⁰ of its final value)
//! the scattered mode is decoupled, so it is held fixed and the step only has
//! to resolve the cavity and Raman frequencies. At the switch the scattered
//! mode is advanced over the elapsed time with the exact solution of its
//! free Ornstein-Uhlenbeck dynamics, and the full system is then stepped with
//! the fine `dt`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{
    max_abs, max_frequency, DriftCoefficients, ModelParams, ProbeParams, ScheduleParams, SystemState,
};
use crate::noise::{NoiseAmplitudes, NoiseIncrements, NoiseSpec};

/// Number of ramp widths before `t_p` at which the scattered mode starts
/// being integrated.
pub const PROBE_LEAD_WIDTHS: f64 = 12.0;

/// `final_value · (tanh((t − t_on)/τ) + 1)/2`.
pub fn ramp_value(t: f64, t_on: f64, tau: f64, final_value: f64) -> f64 {
    final_value * (((t - t_on) / tau).tanh() + 1.0) / 2.0
}

/// Instantaneous probe term `g_s·E_p(t) = g_s·E_p⁰(t)·sin(ω_p t)`.
pub fn probe_field(t: f64, probe: &ProbeParams, schedule: &ScheduleParams) -> f64 {
    ramp_value(t, schedule.tp, schedule.tau, probe.gs_ep0) * (probe.omega_p * t).sin()
}

/// Advances `state` by one stochastic Heun step of length `dt`.
///
/// The noise increment is drawn once and used in both the predictor and the
/// corrector. Fails with [`Error::DivergedTrajectory`] if any component of the
/// new state exceeds `overflow_threshold` or is not finite.
pub fn step<R: Rng>(
    state: &SystemState,
    dt: f64,
    model: &ModelParams,
    probe: Option<&ProbeParams>,
    schedule: &ScheduleParams,
    overflow_threshold: f64,
    rng: &mut R,
) -> Result<SystemState> {
    let amps = NoiseSpec::new(model, probe).amplitudes(dt);
    let w = match probe {
        Some(_) => amps.draw::<true, _>(rng),
        None => amps.draw::<false, _>(rng),
    };
    step_inner(state, dt, model, probe, schedule, overflow_threshold, &w)
}

/// As [`step`] with given bath increments (for instance sums of finer
/// increments, to compare step sizes along one Brownian path). Without a
/// probe the scattered increments are ignored.
pub fn step_with_increments(
    state: &SystemState,
    dt: f64,
    model: &ModelParams,
    probe: Option<&ProbeParams>,
    schedule: &ScheduleParams,
    overflow_threshold: f64,
    dw: &NoiseIncrements,
) -> Result<SystemState> {
    let (sr, si) = match probe {
        Some(_) => (dw.dw_s.re, dw.dw_s.im),
        None => (0.0, 0.0),
    };
    let w = [dw.dw_a.re, dw.dw_a.im, 0.0, dw.dw_b, sr, si];
    step_inner(state, dt, model, probe, schedule, overflow_threshold, &w)
}

fn step_inner(
    state: &SystemState,
    dt: f64,
    model: &ModelParams,
    probe: Option<&ProbeParams>,
    schedule: &ScheduleParams,
    overflow_threshold: f64,
    w: &[f64; 6],
) -> Result<SystemState> {
    let coeffs = DriftCoefficients::new(model, probe);
    let (t0, t1) = (state.t, state.t + dt);
    let g0 = ramp_value(t0, schedule.t0, schedule.tau, model.g);
    let g1 = ramp_value(t1, schedule.t0, schedule.tau, model.g);
    let mut y = state.to_array();
    match probe {
        Some(p) => {
            let e0 = probe_field(t0, p, schedule);
            let e1 = probe_field(t1, p, schedule);
            heun::<true>(&mut y, &coeffs, w, dt, (g0, e0), (g1, e1));
        }
        None => heun::<false>(&mut y, &coeffs, w, dt, (g0, 0.0), (g1, 0.0)),
    }
    check(&y, t1, overflow_threshold)?;
    Ok(SystemState::from_array(&y, t1))
}

#[inline(always)]
fn heun<const S: bool>(
    y: &mut [f64; 6],
    coeffs: &DriftCoefficients,
    w: &[f64; 6],
    h: f64,
    (g0, e0): (f64, f64),
    (g1, e1): (f64, f64),
) {
    let f0 = coeffs.eval::<S>(y, g0, e0);
    let mut p = [0.0; 6];
    for k in 0..6 {
        p[k] = y[k] + h * f0[k] + w[k];
    }
    let f1 = coeffs.eval::<S>(&p, g1, e1);
    for k in 0..6 {
        y[k] += 0.5 * h * (f0[k] + f1[k]) + w[k];
    }
}

#[inline(always)]
fn check(y: &[f64; 6], t: f64, threshold: f64) -> Result<()> {
    let m = max_abs(y);
    if m <= threshold {
        Ok(())
    } else {
        Err(Error::DivergedTrajectory { t, magnitude: m })
    }
}

/// A run of equally spaced nodes `first..=last` with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub first: usize,
    pub last: usize,
    pub dt: f64,
    /// Whether the scattered mode is integrated in this segment.
    pub scattered: bool,
}

/// Node times and the ramped coefficients `g(t)`, `g_s E_p(t)` at every node.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    times: Vec<f64>,
    g: Vec<f64>,
    ep: Vec<f64>,
    segments: Vec<Segment>,
}

impl TimeGrid {
    /// Grid from `t = 0` to `t_end`.
    ///
    /// Without a probe there is one segment with step `schedule.dt` and the
    /// scattered mode is frozen. With a probe the warm-up segment uses the
    /// step scaled by the ratio of the fastest frequency with and without the
    /// probe.
    pub fn new(
        model: &ModelParams,
        probe: Option<&ProbeParams>,
        schedule: &ScheduleParams,
        t_end: f64,
    ) -> Self {
        let mut bounds: Vec<(f64, f64, f64, bool)> = Vec::new();
        match probe {
            Some(p) => {
                let t_switch = schedule.tp - PROBE_LEAD_WIDTHS * schedule.tau;
                let coarse =
                    schedule.dt * max_frequency(model, Some(p)) / max_frequency(model, None);
                if t_switch <= 0.0 {
                    bounds.push((0.0, t_end, schedule.dt, true));
                } else if t_end <= t_switch {
                    bounds.push((0.0, t_end, coarse, false));
                } else {
                    bounds.push((0.0, t_switch, coarse, false));
                    bounds.push((t_switch, t_end, schedule.dt, true));
                }
            }
            None => bounds.push((0.0, t_end, schedule.dt, false)),
        }

        let mut times = vec![0.0];
        let mut segments = Vec::new();
        for (start, end, dt_nominal, scattered) in bounds {
            let n = ((end - start) / dt_nominal).round().max(1.0) as usize;
            let h = (end - start) / n as f64;
            let first = times.len() - 1;
            times.extend((1..=n).map(|k| if k == n { end } else { start + k as f64 * h }));
            segments.push(Segment {
                first,
                last: first + n,
                dt: h,
                scattered,
            });
        }

        let g = times
            .iter()
            .map(|&t| ramp_value(t, schedule.t0, schedule.tau, model.g))
            .collect();
        let ep = match probe {
            Some(p) => times.iter().map(|&t| probe_field(t, p, schedule)).collect(),
            None => vec![0.0; times.len()],
        };
        TimeGrid {
            times,
            g,
            ep,
            segments,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the node nearest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 {
            0
        } else if i >= self.times.len() {
            self.times.len() - 1
        } else if t - self.times[i - 1] <= self.times[i] - t {
            i - 1
        } else {
            i
        }
    }

    /// First node from which the scattered mode is live, if ever.
    pub fn scattered_from(&self) -> Option<usize> {
        self.segments.iter().find(|s| s.scattered).map(|s| s.first)
    }
}

/// Everything a trajectory needs besides its random stream and initial state.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: TimeGrid,
    coeffs: DriftCoefficients,
    amps: Vec<NoiseAmplitudes>,
    kappa_s: f64,
    omega_s: f64,
    overflow_threshold: f64,
}

impl Propagator {
    pub fn new(
        model: &ModelParams,
        probe: Option<&ProbeParams>,
        schedule: &ScheduleParams,
        t_end: f64,
        overflow_threshold: f64,
    ) -> Self {
        let grid = TimeGrid::new(model, probe, schedule, t_end);
        let spec = NoiseSpec::new(model, probe);
        let amps = grid.segments.iter().map(|s| spec.amplitudes(s.dt)).collect();
        Propagator {
            coeffs: DriftCoefficients::new(model, probe),
            amps,
            kappa_s: probe.map_or(0.0, |p| p.kappa_s),
            omega_s: probe.map_or(0.0, |p| p.omega_s),
            overflow_threshold,
            grid,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Integrates `y` (ordered `[a_r, a_i, b_r, b_i, a_s,r, a_s,i]`) across
    /// the whole grid, calling `observe(node, &y)` at every node including
    /// node 0.
    pub fn run<R: Rng, O: FnMut(usize, &[f64; 6])>(
        &self,
        y: &mut [f64; 6],
        rng: &mut R,
        mut observe: O,
    ) -> Result<()> {
        observe(0, y);
        let mut frozen_since = Some(0.0);
        for (seg, amps) in self.grid.segments.iter().zip(&self.amps) {
            if seg.scattered {
                if let Some(t_f) = frozen_since.take() {
                    self.release_scattered(y, self.grid.times[seg.first] - t_f, rng);
                }
                self.run_segment::<true, _, _>(seg, amps, y, rng, &mut observe)?;
            } else {
                self.run_segment::<false, _, _>(seg, amps, y, rng, &mut observe)?;
            }
        }
        Ok(())
    }

    /// Exact free evolution of the decoupled scattered mode over `elapsed`:
    /// `a_s → a_s e^{−(κ_s + iω_s)t}` plus bath noise of variance
    /// `(1 − e^{−2κ_s t})/4` per quadrature.
    fn release_scattered<R: Rng>(&self, y: &mut [f64; 6], elapsed: f64, rng: &mut R) {
        let decay = (-self.kappa_s * elapsed).exp();
        let (s, c) = (self.omega_s * elapsed).sin_cos();
        let (re, im) = (y[4], y[5]);
        let sd = ((1.0 - decay * decay) / 4.0).sqrt();
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        y[4] = decay * (re * c + im * s) + sd * n1;
        y[5] = decay * (im * c - re * s) + sd * n2;
    }

    #[inline(always)]
    fn run_segment<const S: bool, R: Rng, O: FnMut(usize, &[f64; 6])>(
        &self,
        seg: &Segment,
        amps: &NoiseAmplitudes,
        y: &mut [f64; 6],
        rng: &mut R,
        observe: &mut O,
    ) -> Result<()> {
        let g = &self.grid.g[seg.first..=seg.last];
        let ep = &self.grid.ep[seg.first..=seg.last];
        let h = seg.dt;
        for k in 0..seg.last - seg.first {
            let w = amps.draw::<S, _>(rng);
            heun::<S>(y, &self.coeffs, &w, h, (g[k], ep[k]), (g[k + 1], ep[k + 1]));
            let node = seg.first + k + 1;
            check(y, self.grid.times[node], self.overflow_threshold)?;
            observe(node, y);
        }
        Ok(())
    }
}
