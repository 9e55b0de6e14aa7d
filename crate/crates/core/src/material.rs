//! Material and cavity parameters to the dimensionless Raman coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// The estimate is order-of-magnitude: outputs are quoted within a factor of
/// ten either way.
pub const UNCERTAINTY_DECADES: f64 = 1.0;

/// How the sample and cavity sizes are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Volumes in m³.
    #[default]
    Volume,
    /// Areas in m² of a 2-D sample; the common thickness cancels.
    Area,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Dimensionless Raman coupling `R̃`.
    #[serde(rename = "R_tilde")]
    pub r_tilde: f64,
    #[serde(rename = "V_cell")]
    pub v_cell: f64,
    #[serde(rename = "V_samp")]
    pub v_samp: f64,
    #[serde(rename = "V_eff")]
    pub v_eff: f64,
    /// Raman frequency in Hz, used only for dimensional outputs.
    #[serde(rename = "omega_R_hz")]
    pub omega_r_hz: f64,
    #[serde(default)]
    pub geometry: Geometry,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("V_cell", self.v_cell), ("V_samp", self.v_samp), ("V_eff", self.v_eff)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.v_samp < self.v_cell {
            return Err(Error::invalid("V_samp", "sample smaller than one unit cell"));
        }
        if !(self.r_tilde >= 0.0 && self.r_tilde.is_finite()) {
            return Err(Error::invalid("R_tilde", format!("must be ≥ 0, got {}", self.r_tilde)));
        }
        if !(self.omega_r_hz >= 0.0 && self.omega_r_hz.is_finite()) {
            return Err(Error::invalid("omega_R_hz", "must be ≥ 0"));
        }
        Ok(())
    }
}

/// Order-of-magnitude value with its uncertainty band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn new(value: f64) -> Self {
        let f = 10f64.powf(UNCERTAINTY_DECADES);
        Estimate {
            value,
            lower: value / f,
            upper: value * f,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// `g/ω_R = R̃·√(V_samp·V_cell)/(4V_eff)`, valid on parametric resonance.
pub fn coupling_from_material(mat: &MaterialParams) -> Result<Estimate> {
    mat.validate()?;
    Ok(Estimate::new(
        0.25 * mat.r_tilde * (mat.v_samp * mat.v_cell).sqrt() / mat.v_eff,
    ))
}

/// Vacuum field of one cavity photon, `E₀ = √(ħω_c/(ε₀V_eff))` in V/m, for
/// an angular frequency `omega_c` in rad/s and a mode volume in m³.
pub fn cavity_field_noise(omega_c: f64, v_eff: f64) -> Result<f64> {
    if !(omega_c > 0.0 && omega_c.is_finite()) {
        return Err(Error::invalid("omega_c", "must be positive"));
    }
    if !(v_eff > 0.0 && v_eff.is_finite()) {
        return Err(Error::invalid("V_eff", "must be positive"));
    }
    Ok((HBAR * omega_c / (EPSILON_0 * v_eff)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmd() -> MaterialParams {
        MaterialParams {
            r_tilde: 1.0,
            v_cell: 1e-8 * 1e-8,
            v_samp: 1e-12,
            v_eff: 1e-12,
            omega_r_hz: 1e12,
            geometry: Geometry::Area,
        }
    }

    #[test]
    fn tmd_estimate_is_percent_level() {
        let g = coupling_from_material(&tmd()).unwrap();
        assert!((g.value - 0.0025).abs() < 1e-15);
        assert!(g.contains(0.01));
        assert!((g.upper / g.lower - 100.0).abs() < 1e-9);
    }

    #[test]
    fn coupling_scalings() {
        let zero = MaterialParams { r_tilde: 0.0, ..tmd() };
        assert_eq!(coupling_from_material(&zero).unwrap().value, 0.0);
        let g1 = coupling_from_material(&tmd()).unwrap().value;
        let big = MaterialParams { v_eff: 2e-12, ..tmd() };
        assert!((coupling_from_material(&big).unwrap().value - g1 / 2.0).abs() < 1e-18);
    }

    #[test]
    fn invalid_volumes_rejected() {
        let bad = MaterialParams { v_samp: 1e-20, ..tmd() };
        assert!(coupling_from_material(&bad).is_err());
        let bad = MaterialParams { v_eff: 0.0, ..tmd() };
        assert!(coupling_from_material(&bad).is_err());
        assert!(cavity_field_noise(-1.0, 1.0).is_err());
    }

    #[test]
    fn vacuum_field_regression() {
        let w = 2.0 * std::f64::consts::PI * 0.5e12;
        let e0 = cavity_field_noise(w, 1e-18).unwrap();
        assert!((e0 / 6117.0024 - 1.0).abs() < 1e-7, "{e0}");
        assert!((cavity_field_noise(w, 4e-18).unwrap() - e0 / 2.0).abs() < 1e-9 * e0);
        assert!(cavity_field_noise(2.0 * w, 1e-18).unwrap() > e0);
    }
}
