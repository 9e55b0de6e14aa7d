//! Wigner sampling, trajectory-parallel ensembles and steady-state
//! fluctuation observables.
//!
//! Trajectories run on the ambient rayon pool. Each trajectory draws from
//! its own [`RngStream`] and the per-trajectory results are reduced in
//! trajectory order with [`pairwise_sum`](crate::stats::pairwise_sum), so an
//! ensemble is bit-identical for any number of workers.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::model::{
    max_frequency, ModelParams, ProbeParams, ScheduleParams, SystemState, DEFAULT_OVERFLOW_THRESHOLD,
};
use crate::noise::RngStream;
use crate::stats::Summary;

/// Trajectory count used for publication-quality runs.
pub const DEFAULT_N_TRAJ: usize = 15_000;

/// Start of the steady-state averaging window as a fraction of `t_p`.
pub const STEADY_WINDOW_START: f64 = 0.8;

/// Draws a state from the (thermal) Wigner distribution of the uncoupled
/// modes: every quadrature is an independent zero-mean Gaussian with
/// standard deviation `√coth(ω/2T)/2` for `a` and `b`, and `1/2` for `a_s`.
pub fn sample_initial_state<R: Rng>(model: &ModelParams, rng: &mut R) -> SystemState {
    let sa = model.coth_cavity().sqrt() / 2.0;
    let sb = model.coth_raman().sqrt() / 2.0;
    let mut y = [0.0; 6];
    for (k, v) in y.iter_mut().enumerate() {
        let sd = match k {
            0 | 1 => sa,
            2 | 3 => sb,
            _ => 0.5,
        };
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
    SystemState::from_array(&y, 0.0)
}

/// Per-trajectory quantities that can be recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `|a|²` (symmetrically ordered, so 1/2 in vacuum).
    CavityIntensity,
    /// `⟨Q̂²⟩` estimator `(2/ω_R)·b_r²`.
    RamanQ2,
    /// `⟨x̂²⟩` estimator `(2 Re a)²/(2ω_c)`.
    CavityX2,
    /// `⟨Q̂⟩` estimator `√(2/ω_R)·b_r`.
    RamanQ,
    ARe,
    AIm,
    BRe,
    BIm,
    /// `n_s = |a_s|²`.
    ScatteredIntensity,
}

impl Observable {
    #[inline]
    fn eval(self, y: &[f64; 6], model: &ModelParams) -> f64 {
        match self {
            Observable::CavityIntensity => y[0] * y[0] + y[1] * y[1],
            Observable::RamanQ2 => 2.0 * y[2] * y[2] / model.omega_r,
            Observable::CavityX2 => 4.0 * y[0] * y[0] / (2.0 * model.omega_c),
            Observable::RamanQ => (2.0 / model.omega_r).sqrt() * y[2],
            Observable::ARe => y[0],
            Observable::AIm => y[1],
            Observable::BRe => y[2],
            Observable::BIm => y[3],
            Observable::ScatteredIntensity => y[4] * y[4] + y[5] * y[5],
        }
    }
}

/// When an observable is sampled along each trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordTime {
    /// Value at the grid node nearest to `t`.
    Instant(f64),
    /// Trapezoidal time average over `[start, end]`.
    Window { start: f64, end: f64 },
}

impl RecordTime {
    fn end(&self) -> f64 {
        match *self {
            RecordTime::Instant(t) => t,
            RecordTime::Window { end, .. } => end,
        }
    }

    fn start(&self) -> f64 {
        match *self {
            RecordTime::Instant(t) => t,
            RecordTime::Window { start, .. } => start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub observable: Observable,
    pub time: RecordTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub master_seed: u64,
    pub model: ModelParams,
    /// `None` runs without the probe; the scattered mode is then inert.
    pub probe: Option<ProbeParams>,
    pub schedule: ScheduleParams,
    pub record: Vec<Record>,
    pub overflow_threshold: f64,
}

impl EnsembleConfig {
    /// Standard timings and the default step for the given dynamics.
    pub fn new(model: ModelParams, probe: Option<ProbeParams>, n_traj: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            n_traj,
            master_seed,
            schedule: ScheduleParams::standard_for(&model, probe.as_ref()),
            model,
            probe,
            record: Vec::new(),
            overflow_threshold: DEFAULT_OVERFLOW_THRESHOLD,
        }
    }

    pub fn record(mut self, observable: Observable, time: RecordTime) -> Self {
        self.record.push(Record { observable, time });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(p) = &self.probe {
            p.validate()?;
        }
        self.schedule
            .validate(max_frequency(&self.model, self.probe.as_ref()))?;
        if self.n_traj == 0 {
            return Err(Error::invalid("n_traj", "must be at least 1"));
        }
        if !(self.overflow_threshold > 0.0) {
            return Err(Error::invalid("overflow_threshold", "must be > 0"));
        }
        if self.record.is_empty() {
            return Err(Error::invalid("record", "no observables requested"));
        }
        let scattered_from = self
            .probe
            .as_ref()
            .map(|_| self.schedule.tp - crate::dynamics::PROBE_LEAD_WIDTHS * self.schedule.tau);
        for r in &self.record {
            let (start, end) = (r.time.start(), r.time.end());
            if !(0.0 <= start && start <= end && end <= self.schedule.tstar) {
                return Err(Error::invalid(
                    "record",
                    format!("times [{start}, {end}] must lie in [0, tstar = {}]", self.schedule.tstar),
                ));
            }
            if r.observable == Observable::ScatteredIntensity {
                match scattered_from {
                    None => {
                        return Err(Error::invalid("record", "scattered intensity needs a probe"))
                    }
                    Some(ts) if start < ts => {
                        return Err(Error::invalid(
                            "record",
                            format!("scattered intensity is only tracked from t = {ts}"),
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub record: Record,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// One entry per requested record, in request order.
    pub records: Vec<RecordSummary>,
    pub n_traj: usize,
    pub n_valid: usize,
    pub n_diverged: usize,
    /// Earliest time at which any trajectory diverged.
    pub first_divergence_time: Option<f64>,
    /// Wall-clock duration; the only field that is not reproducible.
    pub wall_time_s: f64,
}

impl EnsembleResult {
    /// Summary of the first record of `observable`.
    pub fn get(&self, observable: Observable) -> Option<&Summary> {
        self.records
            .iter()
            .find(|r| r.record.observable == observable)
            .map(|r| &r.summary)
    }

    pub fn diverged_fraction(&self) -> f64 {
        self.n_diverged as f64 / self.n_traj as f64
    }
}

struct Plan {
    observable: Observable,
    first: usize,
    last: usize,
}

/// Runs `config.n_traj` independent trajectories and averages the recorded
/// observables over the trajectories that stayed bounded.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let started = Instant::now();
    let t_end = config
        .record
        .iter()
        .map(|r| r.time.end())
        .fold(0.0, f64::max);
    let prop = Propagator::new(
        &config.model,
        config.probe.as_ref(),
        &config.schedule,
        t_end.max(config.schedule.dt),
        config.overflow_threshold,
    );
    let grid = prop.grid();
    let times = grid.times();
    let plans: Vec<Plan> = config
        .record
        .iter()
        .map(|r| Plan {
            observable: r.observable,
            first: grid.nearest_node(r.time.start()),
            last: grid.nearest_node(r.time.end()),
        })
        .collect();
    let model = &config.model;

    let outcomes: Vec<Result<Vec<f64>>> = (0..config.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(config.master_seed, i as u64).rng();
            let mut y = sample_initial_state(model, &mut rng).to_array();
            let mut acc = vec![(0.0_f64, 0.0_f64); plans.len()];
            prop.run(&mut y, &mut rng, |node, y| {
                for (p, (sum, prev)) in plans.iter().zip(acc.iter_mut()) {
                    if node < p.first || node > p.last {
                        continue;
                    }
                    let v = p.observable.eval(y, model);
                    if node > p.first {
                        *sum += 0.5 * (*prev + v) * (times[node] - times[node - 1]);
                    }
                    *prev = v;
                }
            })?;
            Ok(plans
                .iter()
                .zip(&acc)
                .map(|(p, &(sum, last))| {
                    if p.last == p.first {
                        last
                    } else {
                        sum / (times[p.last] - times[p.first])
                    }
                })
                .collect())
        })
        .collect();

    let mut valid: Vec<&Vec<f64>> = Vec::with_capacity(outcomes.len());
    let mut first_divergence_time: Option<f64> = None;
    for o in &outcomes {
        match o {
            Ok(v) => valid.push(v),
            Err(Error::DivergedTrajectory { t, .. }) => {
                first_divergence_time = Some(first_divergence_time.map_or(*t, |f| f.min(*t)));
            }
            Err(e) => return Err(e.clone()),
        }
    }
    if valid.is_empty() {
        return Err(Error::AllTrajectoriesDiverged {
            n_traj: config.n_traj,
        });
    }
    let records = config
        .record
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let column: Vec<f64> = valid.iter().map(|v| v[k]).collect();
            RecordSummary {
                record: *r,
                summary: Summary::of(&column),
            }
        })
        .collect();
    Ok(EnsembleResult {
        records,
        n_traj: config.n_traj,
        n_valid: valid.len(),
        n_diverged: config.n_traj - valid.len(),
        first_divergence_time,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// How the steady state is read off each trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Time average over `[0.8·t_p, t_p]`.
    #[default]
    Window,
    /// Single-time value at `t_p`.
    Instant,
}

impl MeasurementMode {
    pub fn record_time(self, tp: f64) -> RecordTime {
        match self {
            MeasurementMode::Window => RecordTime::Window {
                start: STEADY_WINDOW_START * tp,
                end: tp,
            },
            MeasurementMode::Instant => RecordTime::Instant(tp),
        }
    }
}

/// A probe-free ensemble run for the steady-state fluctuation observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyRequest {
    pub model: ModelParams,
    pub schedule: ScheduleParams,
    pub n_traj: usize,
    pub master_seed: u64,
    pub mode: MeasurementMode,
    pub overflow_threshold: f64,
}

impl SteadyRequest {
    pub fn new(model: ModelParams, n_traj: usize, master_seed: u64) -> Self {
        SteadyRequest {
            schedule: ScheduleParams::standard_for(&model, None),
            model,
            n_traj,
            master_seed,
            mode: MeasurementMode::Window,
            overflow_threshold: DEFAULT_OVERFLOW_THRESHOLD,
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        let t = self.mode.record_time(self.schedule.tp);
        EnsembleConfig {
            n_traj: self.n_traj,
            master_seed: self.master_seed,
            model: self.model,
            probe: None,
            schedule: self.schedule,
            record: Vec::new(),
            overflow_threshold: self.overflow_threshold,
        }
        .record(Observable::RamanQ2, t)
        .record(Observable::CavityX2, t)
        .record(Observable::RamanQ, t)
        .record(Observable::CavityIntensity, t)
    }
}

/// Emitted when trajectories run away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub g: f64,
    pub g_max: f64,
    pub n_diverged: usize,
    pub n_traj: usize,
    pub diverged_fraction: f64,
    pub first_divergence_time: Option<f64>,
}

impl InstabilityReport {
    /// More than half of the ensemble diverged.
    pub fn is_unstable(&self) -> bool {
        self.diverged_fraction > 0.5
    }
}

impl std::fmt::Display for InstabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} of {} trajectories diverged ({:.1}%) at g = {} (stability threshold {:.6})",
            self.n_diverged,
            self.n_traj,
            100.0 * self.diverged_fraction,
            self.g,
            self.g_max
        )?;
        if let Some(t) = self.first_divergence_time {
            write!(f, ", first at t = {t:.3}")?;
        }
        Ok(())
    }
}

/// Relative fluctuation changes against the uncoupled reference state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyObservables {
    /// `⟨Q̂²⟩/⟨Q̂²⟩₀ − 1`.
    #[serde(rename = "deltaQ2")]
    pub delta_q2: f64,
    /// `⟨x̂²⟩/⟨x̂²⟩₀ − 1`.
    #[serde(rename = "deltax2")]
    pub delta_x2: f64,
    /// `⟨Q̂⟩` in units of `1/√ω_R`.
    #[serde(rename = "Q_over_Q0")]
    pub q_over_q0: f64,
    #[serde(rename = "deltaQ2_stderr")]
    pub delta_q2_stderr: f64,
    #[serde(rename = "deltax2_stderr")]
    pub delta_x2_stderr: f64,
    #[serde(rename = "Q_over_Q0_stderr")]
    pub q_over_q0_stderr: f64,
    #[serde(rename = "Q2")]
    pub q2: Summary,
    pub x2: Summary,
    /// `⟨|a|²⟩`, symmetrically ordered.
    pub cavity_intensity: Summary,
    pub n_valid: usize,
    pub n_diverged: usize,
    /// `g` within 5% of the stability threshold: divergent trajectories were
    /// dropped, which biases the averages.
    pub near_instability: bool,
    pub instability: Option<InstabilityReport>,
}

pub fn steady_observables(req: &SteadyRequest) -> Result<SteadyObservables> {
    let res = run_ensemble(&req.ensemble_config())?;
    let model = &req.model;
    let q2 = res.records[0].summary;
    let x2 = res.records[1].summary;
    let q = res.records[2].summary;
    let intensity = res.records[3].summary;
    let q2_ref = model.raman_reference_q2();
    let x2_ref = model.cavity_reference_x2();
    let q_unit = 1.0 / model.omega_r.sqrt();
    let instability = (res.n_diverged > 0 || !model.is_stable()).then(|| InstabilityReport {
        g: model.g,
        g_max: model.stability_threshold(),
        n_diverged: res.n_diverged,
        n_traj: res.n_traj,
        diverged_fraction: res.diverged_fraction(),
        first_divergence_time: res.first_divergence_time,
    });
    Ok(SteadyObservables {
        delta_q2: q2.mean / q2_ref - 1.0,
        delta_x2: x2.mean / x2_ref - 1.0,
        q_over_q0: q.mean / q_unit,
        delta_q2_stderr: q2.stderr / q2_ref,
        delta_x2_stderr: x2.stderr / x2_ref,
        q_over_q0_stderr: q.stderr / q_unit,
        q2,
        x2,
        cavity_intensity: intensity,
        n_valid: res.n_valid,
        n_diverged: res.n_diverged,
        near_instability: model.near_instability(),
        instability,
    })
}

/// Temperature `T'` at which the uncoupled Raman mode would have the given
/// `⟨Q̂²⟩`, from inverting `⟨Q̂²⟩ = coth(ω_R/2T')/(2ω_R)`. Returns 0 for
/// values at or below the vacuum level.
pub fn effective_raman_temperature(q2: f64, omega_r: f64) -> f64 {
    let coth = 2.0 * omega_r * q2;
    if coth <= 1.0 {
        return 0.0;
    }
    // coth(x) = c  ⇔  x = atanh(1/c)
    omega_r / (2.0 * (1.0 / coth).atanh())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_wigner_width() {
        let m = ModelParams::default();
        let mut rng = RngStream::new(5, 0).rng();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_initial_state(&m, &mut rng).a.re).collect();
        let s = Summary::of(&xs);
        assert!((s.variance.sqrt() - 0.5).abs() < 0.005);
    }

    #[test]
    fn thermal_wigner_width() {
        let m = ModelParams {
            temperature: 0.5,
            ..ModelParams::default()
        };
        let mut rng = RngStream::new(5, 1).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| sample_initial_state(&m, &mut rng).b.re).collect();
        let expected = (1.0 / 1.0_f64.tanh()).sqrt() / 2.0;
        assert!((expected - 0.572_939).abs() < 1e-6);
        assert!((Summary::of(&xs).variance.sqrt() / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_temperature_limit_is_exact() {
        let cold = ModelParams {
            temperature: 1e-9,
            ..ModelParams::default()
        };
        let zero = ModelParams::default();
        let s1 = sample_initial_state(&cold, &mut RngStream::new(1, 1).rng());
        let s2 = sample_initial_state(&zero, &mut RngStream::new(1, 1).rng());
        assert_eq!(s1, s2);
    }

    #[test]
    fn temperature_inversion_round_trip() {
        for t in [0.3, 0.5, 1.0, 2.5] {
            let q2 = crate::model::thermal_factor(1.0, t) / 2.0;
            assert!((effective_raman_temperature(q2, 1.0) - t).abs() < 1e-10);
        }
        assert_eq!(effective_raman_temperature(0.4, 1.0), 0.0);
    }

    #[test]
    fn config_validation() {
        let base = EnsembleConfig::new(ModelParams::default(), None, 10, 0);
        assert!(base.validate().is_err());
        let ok = base.clone().record(Observable::CavityIntensity, RecordTime::Instant(50.0));
        ok.validate().unwrap();
        let bad = base.clone().record(Observable::ScatteredIntensity, RecordTime::Instant(200.0));
        assert!(bad.validate().is_err());
        let late = base.record(Observable::RamanQ2, RecordTime::Instant(1e4));
        assert!(late.validate().is_err());
    }
}
