//! Experiment runners.

use std::path::PathBuf;

use rcs_core::ensemble::{steady_observables, SteadyRequest};
use rcs_core::gaussian::{
    perturbative_fluctuations, perturbative_x2, polariton_frequencies, renormalized_cavity_freq,
    selfconsistent_fluctuations, FrequencyGrid, GaussianSolution,
};
use rcs_core::material::{cavity_field_noise, coupling_from_material, Geometry, UNCERTAINTY_DECADES};
use rcs_core::spectroscopy::{
    default_min_prominence, default_omega_s_grid, find_peaks, omega_s_grid_for_shifts,
    rabi_splitting_from_spectrum, raman_spectrum_with_progress, SpectrumMeasurement, SpectrumRequest,
    DEFAULT_GRID_POINTS, DEFAULT_SHIFT_RANGE,
};
use rcs_core::{Error, ModelParams, ProbeParams};
use serde_json::{json, Value};

use crate::config::{Experiment, GaussianSolver, RunConfig, SpectrumConfig, X0Source};
use crate::error::CliError;
use crate::output::{write_outputs, Cell, Table};
use crate::plan::{points, Point};

pub const SPECTRUM_COLUMNS: &[&str] = &[
    "omega_s",
    "raman_shift",
    "n_s_mean",
    "n_s_stderr",
    "omega_c",
    "omega_c_bar",
    "g",
    "g4",
    "kappa",
    "gamma",
    "temperature",
];

pub const STEADY_COLUMNS: &[&str] = &[
    "omega_c",
    "g",
    "deltaQ2",
    "deltax2",
    "Q_over_Q0",
    "deltaQ2_stderr",
    "deltax2_stderr",
    "Q_over_Q0_stderr",
    "n_diverged",
    "omega_c_bar",
    "g4",
    "kappa",
    "gamma",
    "temperature",
    "cavity_intensity",
    "cavity_intensity_stderr",
    "n_valid",
];

pub const POLARITON_COLUMNS: &[&str] = &[
    "omega_c",
    "omega_minus",
    "omega_plus",
    "omega_c_bar",
    "g",
    "g4",
    "x0sq",
    "delta",
    "stable",
];

pub const GAUSSIAN_COLUMNS: &[&str] = &["omega", "n", "f_re", "f_im"];

pub const COUPLING_COLUMNS: &[&str] = &[
    "g_over_omega_R",
    "g_lower",
    "g_upper",
    "omega_R_hz",
    "omega_c_hz",
    "E0_V_per_m",
];

/// Table, sidecar results, and diagnostics of points that failed
/// numerically without aborting the run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub results: Value,
    pub failures: Vec<String>,
}

pub type Progress<'a> = &'a mut (dyn FnMut(&str) + Send);

/// Runs the experiment on the current thread pool.
pub fn run(cfg: &RunConfig, progress: Progress) -> Result<Outcome, CliError> {
    match cfg.experiment {
        Experiment::Spectrum => spectrum(cfg, progress),
        Experiment::Steady | Experiment::Sweep2d => steady(cfg, progress),
        Experiment::Polariton => polariton(cfg, progress),
        Experiment::Gaussian => gaussian(cfg, progress),
        Experiment::Coupling => coupling(cfg),
    }
}

/// Output path, defaulting to `<experiment>.csv`.
pub fn out_path(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(cfg.out.clone().unwrap_or_else(|| format!("{}.csv", cfg.experiment.name())))
}

/// Worker count: config or `--workers`, then `RCS_WORKERS`, then the
/// available parallelism.
pub fn worker_count(cfg: &RunConfig) -> Result<usize, CliError> {
    if let Some(w) = cfg.workers {
        return Ok(w);
    }
    match std::env::var("RCS_WORKERS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::config("RCS_WORKERS", format!("expected a positive integer, got `{s}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs on a dedicated pool and writes the CSV and sidecar. Points that
/// failed numerically are still written; the run then reports exit 3.
pub fn execute(cfg: &RunConfig, progress: Progress) -> Result<Outcome, CliError> {
    let workers = worker_count(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config("workers", e.to_string()))?;
    progress(&format!("{}: {workers} worker(s)", cfg.experiment.name()));
    let outcome = pool.install(|| run(cfg, progress))?;
    let out = out_path(cfg);
    write_outputs(&out, cfg, &outcome.table, outcome.results.clone())?;
    progress(&format!("wrote {} ({} rows)", out.display(), outcome.table.rows.len()));
    if !outcome.failures.is_empty() {
        return Err(CliError::Numerical(outcome.failures.join("; ")));
    }
    Ok(outcome)
}

/// Schedule keys get their section prefix.
fn core_err(e: Error) -> CliError {
    let section = match &e {
        Error::InvalidParameter { name, .. }
            if ["t0", "tp", "tstar", "tau", "dt", "schedule"].contains(name) =>
        {
            "schedule"
        }
        _ => "",
    };
    CliError::from_core(section, e)
}

fn assignments(p: &Point) -> Value {
    p.assignments
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn model_cells(m: &ModelParams) -> [Cell; 4] {
    [m.g4.into(), m.kappa.into(), m.gamma.into(), m.temperature.into()]
}

pub fn spectrum_grid(s: &SpectrumConfig, model: &ModelParams, probe: &ProbeParams) -> Vec<f64> {
    let (lo, hi) = DEFAULT_SHIFT_RANGE;
    if s.points.is_none() && s.shift_min == lo && s.shift_max == hi {
        default_omega_s_grid(model, probe)
    } else {
        let wr = model.omega_r;
        omega_s_grid_for_shifts(
            probe.omega_p,
            s.shift_min * wr,
            s.shift_max * wr,
            s.points.unwrap_or(DEFAULT_GRID_POINTS),
        )
    }
}

/// The spectrum request of one sweep point.
pub fn spectrum_request(cfg: &RunConfig, p: &Point, seed: u64) -> SpectrumRequest {
    let probe = p.probe.params(p.probe.omega_p - p.model.omega_r);
    let grid = spectrum_grid(&cfg.spectrum, &p.model, &probe);
    let mut req = SpectrumRequest::new(p.model, probe, cfg.n_traj, seed).with_grid(grid);
    req.schedule = p.schedule.apply(req.schedule);
    req.measurement = match cfg.spectrum.window {
        Some(width) => SpectrumMeasurement::Window { width },
        None => SpectrumMeasurement::Instant,
    };
    req.overflow_threshold = cfg.overflow_threshold;
    req
}

fn spectrum(cfg: &RunConfig, progress: Progress) -> Result<Outcome, CliError> {
    let pts = points(cfg)?;
    let n_pts = pts.len();
    let mut table = Table::new(SPECTRUM_COLUMNS);
    let mut results = Vec::with_capacity(n_pts);
    for p in &pts {
        let req = spectrum_request(cfg, p, p.seed(cfg, n_pts));
        if let Some(w) = req.probe.weak_probe_warning(&p.model) {
            progress(&format!("warning: {w}"));
        }
        let label = format!("point {}/{}", p.index + 1, n_pts);
        let spec = raman_spectrum_with_progress(&req, |i, n| progress(&format!("{label}: omega_s {i}/{n}")))
            .map_err(core_err)?;
        let m = &p.model;
        let bar = renormalized_cavity_freq(m);
        for r in &spec.rows {
            let mut row = vec![
                r.omega_s.into(),
                r.raman_shift.into(),
                r.n_s_mean.into(),
                r.n_s_stderr.into(),
                m.omega_c.into(),
                bar.into(),
                m.g.into(),
            ];
            row.extend_from_slice(&model_cells(m));
            table.push(row);
        }
        let peaks = find_peaks(&spec, default_min_prominence(&spec)).ok();
        let two_delta = rabi_splitting_from_spectrum(spec.clone(), None).ok().map(|r| r.two_delta);
        results.push(json!({
            "assignments": assignments(p),
            "omega_c": m.omega_c,
            "omega_c_bar": bar,
            "g": m.g,
            "n_diverged": spec.n_diverged,
            "peaks": peaks.map(|s| s.peaks),
            "two_delta": two_delta,
        }));
    }
    Ok(Outcome {
        table,
        results: json!({ "points": results }),
        failures: Vec::new(),
    })
}

fn steady(cfg: &RunConfig, progress: Progress) -> Result<Outcome, CliError> {
    let pts = points(cfg)?;
    let n_pts = pts.len();
    let mut table = Table::new(STEADY_COLUMNS);
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for p in &pts {
        let m = p.model;
        let mut req = SteadyRequest::new(m, cfg.n_traj, p.seed(cfg, n_pts));
        req.schedule = p.schedule.apply(req.schedule);
        req.mode = cfg.steady.measurement;
        req.overflow_threshold = cfg.overflow_threshold;
        let bar = renormalized_cavity_freq(&m);
        let head = [Cell::from(m.omega_c), Cell::from(m.g)];
        let tail = |n_div: usize, ci: f64, ci_se: f64, n_valid: usize| {
            let mut t = vec![n_div.into(), bar.into()];
            t.extend_from_slice(&model_cells(&m));
            t.extend([Cell::from(ci), ci_se.into(), n_valid.into()]);
            t
        };
        match steady_observables(&req) {
            Ok(o) => {
                let mut row = head.to_vec();
                row.extend([
                    Cell::from(o.delta_q2),
                    o.delta_x2.into(),
                    o.q_over_q0.into(),
                    o.delta_q2_stderr.into(),
                    o.delta_x2_stderr.into(),
                    o.q_over_q0_stderr.into(),
                ]);
                row.extend(tail(o.n_diverged, o.cavity_intensity.mean, o.cavity_intensity.stderr, o.n_valid));
                table.push(row);
                if o.near_instability && m.is_stable() {
                    progress(&format!(
                        "warning: g = {} is within 5% of the stability threshold {:.6}; averages exclude divergent trajectories",
                        m.g,
                        m.stability_threshold()
                    ));
                }
                if let Some(r) = o.instability {
                    if !m.is_stable() || r.is_unstable() {
                        progress(&format!("instability: {r}"));
                    }
                    if r.is_unstable() {
                        failures.push(format!("instability: {r}"));
                    }
                    reports.push(json!({ "assignments": assignments(p), "report": r }));
                }
            }
            Err(Error::AllTrajectoriesDiverged { n_traj }) => {
                let msg = format!(
                    "instability: all {n_traj} trajectories diverged at g = {} (stability threshold {:.6})",
                    m.g,
                    m.stability_threshold()
                );
                progress(&msg);
                failures.push(msg);
                let mut row = head.to_vec();
                row.extend(std::iter::repeat(Cell::Float(f64::NAN)).take(6));
                row.extend(tail(n_traj, f64::NAN, f64::NAN, 0));
                table.push(row);
                reports.push(json!({
                    "assignments": assignments(p),
                    "report": {
                        "g": m.g,
                        "g_max": m.stability_threshold(),
                        "n_diverged": n_traj,
                        "n_traj": n_traj,
                        "diverged_fraction": 1.0,
                    },
                }));
            }
            Err(e) => return Err(core_err(e)),
        }
        progress(&format!("point {}/{} done", p.index + 1, n_pts));
    }
    Ok(Outcome {
        table,
        results: json!({ "instability": reports }),
        failures,
    })
}

fn solve_gaussian(cfg: &RunConfig, m: &ModelParams) -> Result<GaussianSolution, CliError> {
    let grid = FrequencyGrid::for_model(m).map_err(|e| CliError::from_core("model", e))?;
    match cfg.gaussian.solver {
        GaussianSolver::Perturbative => Ok(perturbative_fluctuations(m, &grid)),
        GaussianSolver::Selfconsistent => {
            selfconsistent_fluctuations(m, &grid, &cfg.gaussian.options()).map_err(|e| match e {
                Error::InvalidParameter { .. } => CliError::from_core("gaussian", e),
                other => CliError::Numerical(format!("{other} at omega_c = {}, g = {}", m.omega_c, m.g)),
            })
        }
    }
}

fn polariton(cfg: &RunConfig, progress: Progress) -> Result<Outcome, CliError> {
    let pts = points(cfg)?;
    let mut table = Table::new(POLARITON_COLUMNS);
    for p in &pts {
        let m = p.model;
        let x0sq = match cfg.polariton.x0sq {
            X0Source::Perturbative => perturbative_x2(&m),
            X0Source::Selfconsistent => solve_gaussian(cfg, &m)?.x2,
        };
        let b = polariton_frequencies(&m, x0sq);
        table.push(vec![
            m.omega_c.into(),
            b.omega_minus.into(),
            b.omega_plus.into(),
            renormalized_cavity_freq(&m).into(),
            m.g.into(),
            m.g4.into(),
            x0sq.into(),
            b.delta.into(),
            b.stable.into(),
        ]);
    }
    progress(&format!("{} polariton points", pts.len()));
    Ok(Outcome {
        table,
        results: Value::Null,
        failures: Vec::new(),
    })
}

fn gaussian(cfg: &RunConfig, progress: Progress) -> Result<Outcome, CliError> {
    let p = &points(cfg)?[0];
    let m = p.model;
    let sol = solve_gaussian(cfg, &m)?;
    progress(&format!(
        "gaussian: {} iteration(s), residual {:.3e}",
        sol.iterations, sol.residual
    ));
    let mut table = Table::new(GAUSSIAN_COLUMNS);
    for (k, (n, f)) in sol.n.iter().zip(&sol.f).enumerate() {
        table.push(vec![sol.grid.omega(k).into(), (*n).into(), f.re.into(), f.im.into()]);
    }
    let x2_ref = m.cavity_reference_x2();
    let results = json!({
        "solver": cfg.gaussian.solver,
        "omega_c_bar": sol.omega_c_bar,
        "Delta": [sol.delta.re, sol.delta.im],
        "quadrature": sol.quadrature,
        "x2": sol.x2,
        "deltax2": sol.x2 / x2_ref - 1.0,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "grid": sol.grid,
        "branches": sol.branches,
    });
    Ok(Outcome {
        table,
        results,
        failures: Vec::new(),
    })
}

fn coupling(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mat = &cfg.material;
    let est = coupling_from_material(mat).map_err(|e| CliError::from_core("material", e))?;
    // parametric resonance puts the cavity at half the Raman frequency
    let omega_c_hz = mat.omega_r_hz / 2.0;
    let e0 = match mat.geometry {
        Geometry::Volume => cavity_field_noise(std::f64::consts::TAU * omega_c_hz, mat.v_eff).unwrap_or(f64::NAN),
        Geometry::Area => f64::NAN,
    };
    let mut table = Table::new(COUPLING_COLUMNS);
    table.push(vec![
        est.value.into(),
        est.lower.into(),
        est.upper.into(),
        mat.omega_r_hz.into(),
        omega_c_hz.into(),
        e0.into(),
    ]);
    let results = json!({
        "estimate": est,
        "uncertainty_decades": UNCERTAINTY_DECADES,
        "E0_note": if mat.geometry == Geometry::Area {
            "E0 needs a mode volume; areas give only the coupling ratio"
        } else {
            "E0 at omega_c = omega_R/2"
        },
        "model_overrides": { "model.g": est.value * cfg.model.omega_r, "omega_c_bar": cfg.model.omega_r / 2.0 },
    });
    Ok(Outcome {
        table,
        results,
        failures: Vec::new(),
    })
}
