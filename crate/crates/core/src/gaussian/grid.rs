use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Points per linewidth of the narrowest feature.
pub const POINTS_PER_LINEWIDTH: f64 = 8.0;
/// Half extent in units of the fastest bare frequency.
pub const EXTENT_FACTOR: f64 = 10.0;

/// Uniform grid `ω_k = (k − M)·h`, `k = 0..=2M`, symmetric about zero so that
/// `−ω_k` is the node `2M − k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub spacing: f64,
    /// `M`.
    pub half_points: usize,
}

impl FrequencyGrid {
    pub fn new(spacing: f64, half_extent: f64) -> Result<Self> {
        if !(spacing > 0.0 && half_extent >= spacing) {
            return Err(Error::invalid(
                "grid",
                format!("need 0 < spacing ≤ half extent, got {spacing}, {half_extent}"),
            ));
        }
        Ok(FrequencyGrid {
            spacing,
            half_points: (half_extent / spacing).ceil() as usize,
        })
    }

    /// Spacing `min(κ, γ)/8` (ignoring a vanishing γ), half extent
    /// `10·max(ω_R, 2ω_c)`.
    pub fn for_model(model: &ModelParams) -> Result<Self> {
        if !(model.kappa > 0.0) {
            return Err(Error::invalid("kappa", "the Gaussian theory needs κ > 0"));
        }
        let width = if model.gamma > 0.0 {
            model.kappa.min(model.gamma)
        } else {
            model.kappa
        };
        Self::new(
            width / POINTS_PER_LINEWIDTH,
            EXTENT_FACTOR * model.omega_r.max(2.0 * model.omega_c),
        )
    }

    pub fn len(&self) -> usize {
        2 * self.half_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_extent(&self) -> f64 {
        self.half_points as f64 * self.spacing
    }

    pub fn omega(&self, k: usize) -> f64 {
        (k as f64 - self.half_points as f64) * self.spacing
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.omega(k)).collect()
    }

    /// Index of `−ω_k`.
    pub fn mirror(&self, k: usize) -> usize {
        2 * self.half_points - k
    }

    /// Trapezoidal `∫ dω/2π · values`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let n = values.len();
        let inner = crate::stats::pairwise_sum(&values[1..n - 1]);
        (inner + 0.5 * (values[0] + values[n - 1])) * self.spacing / std::f64::consts::TAU
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_meets_resolution() {
        let m = ModelParams::default();
        let g = FrequencyGrid::for_model(&m).unwrap();
        assert!(g.spacing <= m.kappa / 8.0 + 1e-18);
        assert!(g.half_extent() >= 10.0 * m.omega_r.max(2.0 * m.omega_c));
        assert_eq!(g.len(), 16001);
        assert_eq!(g.omega(g.half_points), 0.0);
        assert_eq!(g.omega(g.mirror(17)), -g.omega(17));
    }

    #[test]
    fn lorentzian_normalisation() {
        let m = ModelParams::default();
        let g = FrequencyGrid::for_model(&m).unwrap();
        let n: Vec<f64> = g
            .omegas()
            .iter()
            .map(|w| m.kappa / (m.kappa.powi(2) + (w - m.omega_c).powi(2)))
            .collect();
        assert!((g.integrate(&n) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn rejects_undamped_cavity() {
        let m = ModelParams {
            kappa: 0.0,
            ..ModelParams::default()
        };
        assert!(FrequencyGrid::for_model(&m).is_err());
    }
}
