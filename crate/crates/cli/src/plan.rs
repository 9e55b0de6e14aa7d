//! Expansion of a configuration into its sweep points.

use rcs_core::gaussian::resonant_omega_c;
use rcs_core::noise::derive_seed;
use rcs_core::ModelParams;
use serde_json::Value;

use crate::config::{from_doc, set_path, ProbeConfig, RunConfig, ScheduleConfig};
use crate::error::CliError;

/// One fully specified parameter set of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub index: usize,
    pub model: ModelParams,
    pub probe: ProbeConfig,
    pub schedule: ScheduleConfig,
    /// The overrides that define this point, in application order.
    pub assignments: Vec<(String, f64)>,
}

impl Point {
    /// Master seed of this point: the run seed itself for a single point,
    /// otherwise an independent seed derived from the point index.
    pub fn seed(&self, cfg: &RunConfig, n_points: usize) -> u64 {
        if n_points == 1 {
            cfg.seed
        } else {
            derive_seed(cfg.seed, self.index as u64)
        }
    }
}

/// Variants (outermost) × axes (last innermost), or the single base point.
pub fn points(cfg: &RunConfig) -> Result<Vec<Point>, CliError> {
    let base = serde_json::to_value(cfg).expect("config serialises");
    let variants: Vec<Vec<(String, f64)>> = if cfg.sweep.variants.is_empty() {
        vec![Vec::new()]
    } else {
        cfg.sweep
            .variants
            .iter()
            .map(|v| v.iter().map(|(k, x)| (k.clone(), x.as_f64().unwrap_or(f64::NAN))).collect())
            .collect()
    };
    let mut combos: Vec<Vec<(String, f64)>> = variants;
    for axis in &cfg.sweep.axes {
        let values = axis.values();
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.push((axis.param.clone(), v));
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .enumerate()
        .map(|(index, assignments)| point(&base, index, assignments))
        .collect()
}

fn point(base: &Value, index: usize, assignments: Vec<(String, f64)>) -> Result<Point, CliError> {
    let mut doc = base.clone();
    for (k, v) in &assignments {
        let num = serde_json::Number::from_f64(*v)
            .ok_or_else(|| CliError::config(k.as_str(), "sweep value must be finite"))?;
        set_path(&mut doc, k, Value::Number(num))?;
    }
    let cfg = from_doc(doc)?;
    let mut model = cfg.model;
    if let Some(target) = cfg.omega_c_bar {
        model.omega_c = target + resonant_omega_c(model.g, model.g4, model.omega_r) - model.omega_r / 2.0;
    }
    Ok(Point {
        index,
        model,
        probe: cfg.probe,
        schedule: cfg.schedule,
        assignments,
    })
}
