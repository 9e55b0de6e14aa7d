//! Run configuration: one JSON document in which every field is optional.
//!
//! A run is resolved in layers: built-in defaults, then the `--config` file
//! (a plain config or a previous run's `.meta.json` sidecar), then a frozen
//! `reproduce` preset, then `--set key=value` overrides, then the `--seed`,
//! `--workers` and `--out` flags. Unknown keys and type mismatches are
//! reported with their dotted path.

use std::path::Path;

use clap::ValueEnum;
use rcs_core::ensemble::MeasurementMode;
use rcs_core::gaussian::SolverOptions;
use rcs_core::material::{Geometry, MaterialParams};
use rcs_core::{ModelParams, ProbeParams, ScheduleParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spectrum,
    Steady,
    Sweep2d,
    Polariton,
    Gaussian,
    Coupling,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Steady => "steady",
            Experiment::Sweep2d => "sweep2d",
            Experiment::Polariton => "polariton",
            Experiment::Gaussian => "gaussian",
            Experiment::Coupling => "coupling",
        }
    }
}

/// Probe template; the detector frequency comes from the spectrum grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(rename = "gs_Ep0")]
    pub gs_ep0: f64,
    pub omega_p: f64,
    pub kappa_s: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        let p = ProbeParams::default();
        ProbeConfig {
            gs_ep0: p.gs_ep0,
            omega_p: p.omega_p,
            kappa_s: p.kappa_s,
        }
    }
}

impl ProbeConfig {
    pub fn params(&self, omega_s: f64) -> ProbeParams {
        ProbeParams {
            gs_ep0: self.gs_ep0,
            omega_p: self.omega_p,
            omega_s,
            kappa_s: self.kappa_s,
        }
    }
}

/// Timing overrides; `null` keeps the standard value for the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub t0: Option<f64>,
    pub tp: Option<f64>,
    pub tstar: Option<f64>,
    pub tau: Option<f64>,
    pub dt: Option<f64>,
}

impl ScheduleConfig {
    pub fn apply(&self, base: ScheduleParams) -> ScheduleParams {
        ScheduleParams {
            t0: self.t0.unwrap_or(base.t0),
            tp: self.tp.unwrap_or(base.tp),
            tstar: self.tstar.unwrap_or(base.tstar),
            tau: self.tau.unwrap_or(base.tau),
            dt: self.dt.unwrap_or(base.dt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    pub measurement: MeasurementMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Raman-shift range `ω_p − ω_s`, in units of `ω_R`.
    pub shift_min: f64,
    pub shift_max: f64,
    /// `null` with the default range selects the refined 80-point grid;
    /// otherwise the grid is uniform with this many points (80 if `null`).
    pub points: Option<usize>,
    /// Width of a trailing average ending at `t*`; `null` reads `n_s` at `t*`.
    pub window: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let (lo, hi) = rcs_core::spectroscopy::DEFAULT_SHIFT_RANGE;
        SpectrumConfig {
            shift_min: lo,
            shift_max: hi,
            points: None,
            window: None,
        }
    }
}

/// One swept parameter: `count` evenly spaced values over `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(param: &str, min: f64, max: f64, count: usize) -> Self {
        Axis {
            param: param.to_string(),
            min,
            max,
            count,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// Sweep points are the product of `variants` (each a set of dotted-key
/// overrides, outermost) with the `axes` (first axis next, last innermost).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variants: Vec<Map<String, Value>>,
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianSolver {
    Perturbative,
    #[default]
    Selfconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub solver: GaussianSolver,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        GaussianConfig {
            solver: GaussianSolver::default(),
            tol: o.tol,
            max_iter: o.max_iter,
            damping: o.damping,
        }
    }
}

impl GaussianConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
        }
    }
}

/// Source of the cavity width `x₀²` fed to the polariton closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum X0Source {
    /// `1/(2ω_c)`.
    #[default]
    Perturbative,
    /// `⟨x̂²⟩` of the self-consistent Gaussian solution at each point.
    Selfconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolaritonConfig {
    pub x0sq: X0Source,
}

/// Monolayer example: `R̃ = 1`, a 10 nm × 10 nm cell, and sample and cavity
/// footprints of 1 μm², with a 1 THz Raman line.
pub fn default_material() -> MaterialParams {
    MaterialParams {
        r_tilde: 1.0,
        v_cell: 1e-16,
        v_samp: 1e-12,
        v_eff: 1e-12,
        omega_r_hz: 1e12,
        geometry: Geometry::Area,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: ModelParams,
    /// When set, `model.omega_c` is replaced by the bare frequency whose
    /// renormalised value `ω_c − 12g²/ω_R + 3g₄` equals this target.
    pub omega_c_bar: Option<f64>,
    pub probe: ProbeConfig,
    pub schedule: ScheduleConfig,
    pub n_traj: usize,
    pub seed: u64,
    /// Thread count; never changes results.
    pub workers: Option<usize>,
    pub overflow_threshold: f64,
    pub out: Option<String>,
    pub steady: SteadyConfig,
    pub spectrum: SpectrumConfig,
    pub sweep: SweepConfig,
    pub gaussian: GaussianConfig,
    pub polariton: PolaritonConfig,
    pub material: MaterialParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Spectrum,
            model: ModelParams::default(),
            omega_c_bar: None,
            probe: ProbeConfig::default(),
            schedule: ScheduleConfig::default(),
            n_traj: 15000,
            seed: 0,
            workers: None,
            overflow_threshold: rcs_core::model::DEFAULT_OVERFLOW_THRESHOLD,
            out: None,
            steady: SteadyConfig::default(),
            spectrum: SpectrumConfig::default(),
            sweep: SweepConfig::default(),
            gaussian: GaussianConfig::default(),
            polariton: PolaritonConfig::default(),
            material: default_material(),
        }
    }
}

/// Axes used when a sweep experiment is given none.
pub fn default_axes(experiment: Experiment) -> Vec<Axis> {
    match experiment {
        Experiment::Sweep2d => vec![
            Axis::new("model.omega_c", 0.3, 0.7, 41),
            Axis::new("model.g", 0.0, 0.05, 11),
        ],
        Experiment::Polariton => vec![Axis::new("model.omega_c", 0.3, 0.7, 201)],
        _ => Vec::new(),
    }
}

/// Command-line layers applied on top of the defaults.
#[derive(Debug, Clone, Default)]
pub struct Layers {
    pub experiment: Option<Experiment>,
    pub config_file: Option<String>,
    pub preset: Option<Value>,
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
}

pub fn resolve(layers: &Layers) -> Result<RunConfig, CliError> {
    let mut doc = serde_json::to_value(RunConfig::default()).expect("default config serialises");
    if let Some(path) = &layers.config_file {
        merge(&mut doc, &read_config_file(Path::new(path))?, "")?;
    }
    if let Some(preset) = &layers.preset {
        merge(&mut doc, preset, "")?;
    }
    if let Some(e) = layers.experiment {
        doc["experiment"] = Value::String(e.name().into());
    }
    for s in &layers.sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::config(s.as_str(), "expected --set key=value"))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut doc, key.trim(), value)?;
    }
    if let Some(seed) = layers.seed {
        doc["seed"] = seed.into();
    }
    if let Some(w) = layers.workers {
        doc["workers"] = w.into();
    }
    if let Some(out) = &layers.out {
        doc["out"] = Value::String(out.clone());
    }
    let mut cfg = from_doc(doc)?;
    if cfg.sweep.axes.is_empty() {
        cfg.sweep.axes = default_axes(cfg.experiment);
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// A plain config, or the `config` member of a `.meta.json` sidecar.
fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(path.display().to_string(), format!("invalid JSON: {e}")))?;
    if doc.get("schema_version").is_some() {
        doc = doc
            .get_mut("config")
            .map(Value::take)
            .ok_or_else(|| CliError::config("config", "sidecar without a `config` member"))?;
    }
    if !doc.is_object() {
        return Err(CliError::config(path.display().to_string(), "config must be a JSON object"));
    }
    Ok(doc)
}

pub(crate) fn from_doc(doc: Value) -> Result<RunConfig, CliError> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(key, e.into_inner().to_string())
    })
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// JSON kinds must agree, except that a `null` default accepts anything.
fn check_kind(existing: &Value, new: &Value, key: &str) -> Result<(), CliError> {
    let same = matches!(
        (existing, new),
        (Value::Null, _)
            | (Value::Bool(_), Value::Bool(_))
            | (Value::Number(_), Value::Number(_))
            | (Value::String(_), Value::String(_))
            | (Value::Array(_), Value::Array(_))
            | (Value::Object(_), Value::Object(_))
    );
    if same || new.is_null() {
        Ok(())
    } else {
        Err(CliError::config(key, format!("expected {}, got {new}", kind(existing))))
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Deep merge of `over` into `base`; every key of `over` must exist in `base`.
fn merge(base: &mut Value, over: &Value, path: &str) -> Result<(), CliError> {
    let (Value::Object(b), Value::Object(o)) = (&mut *base, over) else {
        check_kind(base, over, path)?;
        *base = over.clone();
        return Ok(());
    };
    for (k, v) in o {
        let key = join(path, k);
        let slot = b
            .get_mut(k)
            .ok_or_else(|| CliError::config(key.as_str(), "unknown key"))?;
        merge(slot, v, &key)?;
    }
    Ok(())
}

/// Replaces the leaf at a dotted path, which must already exist.
pub fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    for part in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| CliError::config(key, "unknown key"))?;
    }
    if node.is_object() && !value.is_object() {
        return Err(CliError::config(key, "names a section, not a value"));
    }
    check_kind(node, &value, key)?;
    if node.is_object() {
        return merge(node, &value, key);
    }
    *node = value;
    Ok(())
}

/// Prefixes a sweep may vary.
const SWEEPABLE: [&str; 3] = ["model.", "probe.", "schedule."];

fn check_sweep_key(doc: &Value, key: &str, at: &str) -> Result<(), CliError> {
    if !(key == "omega_c_bar" || SWEEPABLE.iter().any(|p| key.starts_with(p))) {
        return Err(CliError::config(
            at,
            format!("`{key}` cannot be swept; use omega_c_bar or a model, probe or schedule key"),
        ));
    }
    let leaf = key
        .split('.')
        .try_fold(doc, |node, part| node.get(part))
        .ok_or_else(|| CliError::config(at, format!("unknown key `{key}`")))?;
    if !(leaf.is_number() || leaf.is_null()) {
        return Err(CliError::config(at, format!("`{key}` is not numeric")));
    }
    Ok(())
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.n_traj == 0 {
        return Err(CliError::config("n_traj", "must be at least 1"));
    }
    if cfg.workers == Some(0) {
        return Err(CliError::config("workers", "must be at least 1"));
    }
    if !(cfg.overflow_threshold > 0.0) {
        return Err(CliError::config("overflow_threshold", "must be positive"));
    }
    let s = &cfg.spectrum;
    if !(s.shift_min < s.shift_max) {
        return Err(CliError::config("spectrum.shift_max", "must exceed spectrum.shift_min"));
    }
    if matches!(s.points, Some(n) if n < 5) {
        return Err(CliError::config("spectrum.points", "peak analysis needs at least 5 points"));
    }
    if matches!(cfg.experiment, Experiment::Gaussian | Experiment::Coupling)
        && !(cfg.sweep.axes.is_empty() && cfg.sweep.variants.is_empty())
    {
        return Err(CliError::config(
            "sweep",
            format!("{} runs a single point; remove the sweep", cfg.experiment.name()),
        ));
    }
    let doc = serde_json::to_value(cfg).expect("config serialises");
    for (i, a) in cfg.sweep.axes.iter().enumerate() {
        let at = format!("sweep.axes[{i}]");
        check_sweep_key(&doc, &a.param, &format!("{at}.param"))?;
        if a.count == 0 {
            return Err(CliError::config(format!("{at}.count"), "must be at least 1"));
        }
        if !(a.min.is_finite() && a.max.is_finite()) {
            return Err(CliError::config(at, "bounds must be finite"));
        }
    }
    for (i, v) in cfg.sweep.variants.iter().enumerate() {
        for (k, val) in v {
            let at = format!("sweep.variants[{i}].{k}");
            check_sweep_key(&doc, k, &at)?;
            if !val.is_number() {
                return Err(CliError::config(at, "override must be a number"));
            }
        }
    }
    // Every sweep point must itself be a valid configuration.
    for p in crate::plan::points(cfg)? {
        p.model.validate().map_err(|e| CliError::from_core("model", e))?;
        if cfg.experiment == Experiment::Spectrum {
            p.probe
                .params(p.probe.omega_p)
                .validate()
                .map_err(|e| CliError::from_core("probe", e))?;
        }
    }
    if cfg.experiment == Experiment::Coupling {
        cfg.material
            .validate()
            .map_err(|e| CliError::from_core("material", e))?;
    }
    Ok(())
}
