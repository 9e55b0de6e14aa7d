use nalgebra::{Matrix5, Schur, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;

/// Raman-cavity polariton branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonBranches {
    pub omega_minus: f64,
    pub omega_plus: f64,
    /// `(ω₊ − ω₋)/2`.
    pub delta: f64,
    /// False when a root `ω±²` is non-positive or the discriminant negative;
    /// the frequencies are then NaN.
    pub stable: bool,
}

/// Cavity-Raman coupling in the coordinate form of the Hamiltonian,
/// `c = 2gω_c√(2ω_R)`.
fn coupling(model: &ModelParams) -> f64 {
    2.0 * model.g * model.omega_c * (2.0 * model.omega_r).sqrt()
}

/// Stationary Raman shift and momentum fluctuations for given `x₀²`:
/// `Q₀ = −c·x₀²/ω_R²`, `p₀² = ω_c²x₀² − 2c²x₀⁴/ω_R² + 12g₄ω_c²x₀⁴`.
pub fn equilibrium_shift(model: &ModelParams, x0sq: f64) -> (f64, f64) {
    let c = coupling(model);
    let wr2 = model.omega_r * model.omega_r;
    let wc2 = model.omega_c * model.omega_c;
    let q0 = -c * x0sq / wr2;
    let p0sq = wc2 * x0sq - 2.0 * c * c * x0sq * x0sq / wr2 + 12.0 * model.g4 * wc2 * x0sq * x0sq;
    (q0, p0sq)
}

/// Closed-form polariton frequencies
/// `ω±² = [Wω_R + ω_R³ ± √(−16ω_c²ω_R³(−24g²x₀² + 18g₄x₀²ω_R + ω_R) + (Wω_R + ω_R³)²)]/(2ω_R)`
/// with `Wω_R = 4ω_c²ω_R + 72g₄ω_c²ω_Rx₀² − 64g²ω_c²x₀²`.
pub fn polariton_frequencies(model: &ModelParams, x0sq: f64) -> PolaritonBranches {
    let ModelParams {
        omega_c: wc,
        omega_r: wr,
        g,
        g4,
        ..
    } = *model;
    let wc2 = wc * wc;
    let s = 4.0 * wc2 * wr + wr.powi(3) + 72.0 * g4 * wc2 * wr * x0sq - 64.0 * g * g * wc2 * x0sq;
    let disc = -16.0 * wc2 * wr.powi(3) * (-24.0 * g * g * x0sq + 18.0 * g4 * x0sq * wr + wr) + s * s;
    let unstable = PolaritonBranches {
        omega_minus: f64::NAN,
        omega_plus: f64::NAN,
        delta: f64::NAN,
        stable: false,
    };
    if !(disc >= 0.0) {
        return unstable;
    }
    let root = disc.sqrt();
    let (lo, hi) = ((s - root) / (2.0 * wr), (s + root) / (2.0 * wr));
    if !(lo > 0.0 && hi > 0.0) {
        return unstable;
    }
    let (omega_minus, omega_plus) = (lo.sqrt(), hi.sqrt());
    PolaritonBranches {
        omega_minus,
        omega_plus,
        delta: (omega_plus - omega_minus) / 2.0,
        stable: true,
    }
}

/// Linearised equations for `(Q₁, P₁, x₁², {x,p}₁, p₁²)` about the Gaussian
/// equilibrium with cavity width `x₀²`.
pub fn linearized_matrix(model: &ModelParams, x0sq: f64) -> Matrix5<f64> {
    let ModelParams {
        omega_c: wc,
        omega_r: wr,
        g,
        g4,
        ..
    } = *model;
    let c = coupling(model);
    let wc2 = wc * wc;
    let (q0, _) = equilibrium_shift(model, x0sq);
    let mut m = Matrix5::zeros();
    m[(0, 1)] = 1.0;
    m[(1, 0)] = -wr * wr;
    m[(1, 2)] = -c;
    m[(2, 3)] = 1.0;
    m[(3, 0)] = -4.0 * c * x0sq;
    m[(3, 2)] = -2.0 * wc2 * (1.0 + (-16.0 * g * g / wr + 24.0 * g4) * x0sq);
    m[(3, 4)] = 2.0;
    m[(4, 3)] = -wc2 - 2.0 * c * q0 - 12.0 * g4 * wc2 * x0sq;
    m
}

/// Eigenvalues of [`linearized_matrix`], ordered by imaginary then real part.
///
/// The real Schur iteration can stall on the exactly decoupled sparsity
/// pattern, so the matrix is first conjugated by a Householder reflection;
/// if the QR sweeps still fail, another reflection is tried.
pub fn linearized_modes(model: &ModelParams, x0sq: f64) -> Vec<Complex64> {
    let m = linearized_matrix(model, x0sq);
    let mut ev: Vec<Complex64> = (1..=8)
        .find_map(|k| {
            let v = Vector5::from_fn(|i, _| 1.0 + ((i + 1) * k) as f64 * 0.37 % 1.0);
            let h = Matrix5::identity() - v * v.transpose() * (2.0 / v.norm_squared());
            Schur::try_new(h * m * h, f64::EPSILON, 10_000).map(|s| s.complex_eigenvalues())
        })
        .expect("Schur iteration failed for every reflection")
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(omega_c: f64, g: f64, g4: f64) -> ModelParams {
        ModelParams {
            omega_c,
            g,
            g4,
            ..ModelParams::default()
        }
    }

    #[test]
    fn decoupled_branches() {
        let b = polariton_frequencies(&model(0.4, 0.0, 0.0), 1.0 / 0.8);
        assert!(b.stable);
        assert!((b.omega_minus - 0.8).abs() < 1e-14);
        assert!((b.omega_plus - 1.0).abs() < 1e-14);
    }

    #[test]
    fn decoupled_modes() {
        let ev = linearized_modes(&model(0.4, 0.0, 0.0), 1.25);
        let expected = [-1.0, -0.8, 0.0, 0.8, 1.0];
        for (e, x) in ev.iter().zip(expected) {
            assert!(e.re.abs() < 1e-12, "{e}");
            assert!((e.im - x).abs() < 1e-12, "{e} vs {x}");
        }
    }

    #[test]
    fn equilibrium_shift_values() {
        let (q0, p0) = equilibrium_shift(&model(0.5, 0.0, 0.3), 0.7);
        assert_eq!(q0, 0.0);
        assert!((p0 - (0.25 * 0.7 + 12.0 * 0.3 * 0.25 * 0.49)).abs() < 1e-15);
        let m = model(0.5, 0.0, 0.0);
        assert!((equilibrium_shift(&m, 0.7).1 - 0.25 * 0.7).abs() < 1e-15);
        assert!(equilibrium_shift(&model(0.5, 0.04, 0.01), 1.0).0 < 0.0);
        // g = 0.01ω_R at x₀² = 1/(2ω_c): Q₀ = −√2·g/ω_R^{3/2}, i.e. about −0.014
        let q = equilibrium_shift(&model(0.5, 0.01, 0.01), 1.0).0;
        assert!((q + 0.01 * 2f64.sqrt()).abs() < 1e-15);
    }

    /// Oscillation frequencies of the 5×5 system: the positive imaginary parts.
    fn eigen_frequencies(m: &ModelParams, x0sq: f64) -> Vec<f64> {
        linearized_modes(m, x0sq)
            .into_iter()
            .filter(|e| e.im > 1e-9)
            .map(|e| e.im)
            .collect()
    }

    #[test]
    fn closed_form_matches_eigenvalues() {
        let m = model(0.4892, 0.04, 0.01);
        let x0sq = 1.0 / (2.0 * m.omega_c);
        let b = polariton_frequencies(&m, x0sq);
        let w = eigen_frequencies(&m, x0sq);
        assert_eq!(w.len(), 2);
        assert!((w[0] / b.omega_minus - 1.0).abs() < 1e-10);
        assert!((w[1] / b.omega_plus - 1.0).abs() < 1e-10);
        assert!(b.omega_plus > b.omega_minus);
    }

    #[test]
    fn avoided_crossing_along_sweep() {
        let (g, g4) = (0.04, 0.01);
        let gap = |wc: f64| {
            let m = model(wc, g, g4);
            let b = polariton_frequencies(&m, 1.0 / (2.0 * wc));
            b.omega_plus - b.omega_minus
        };
        let wcs: Vec<f64> = (0..=200).map(|i| 0.3 + 0.4 * i as f64 / 200.0).collect();
        let gaps: Vec<f64> = wcs.iter().map(|&w| gap(w)).collect();
        let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min > 0.05, "{min}");
        // the branches swap character: far below resonance ω₊ ≈ ω_R, far above ω₋ ≈ ω_R
        let lo = polariton_frequencies(&model(0.3, g, g4), 1.0 / 0.6);
        let hi = polariton_frequencies(&model(0.7, g, g4), 1.0 / 1.4);
        assert!((lo.omega_plus - 1.0).abs() < 0.05);
        assert!((hi.omega_minus - 1.0).abs() < 0.05);
    }

    /// `x₀²` at which the product of the squared roots vanishes.
    fn soft_mode_x0sq(m: &ModelParams) -> f64 {
        let wr = m.omega_r;
        // 4ω_c²ω_R² − 96g²ω_c²ω_R x₀² + 72g₄ω_c²ω_R² x₀² = 0
        4.0 * wr * wr / (96.0 * m.g * m.g * wr - 72.0 * m.g4 * wr * wr)
    }

    #[test]
    fn real_eigenvalue_beyond_soft_mode() {
        let m = model(0.5, 0.05, 0.001);
        let x_edge = soft_mode_x0sq(&m);
        assert!(x_edge > 0.0);
        let below = linearized_modes(&m, 0.99 * x_edge);
        let above = linearized_modes(&m, 1.01 * x_edge);
        assert!(below.iter().all(|e| e.re.abs() < 1e-9), "{below:?}");
        assert!(above.iter().any(|e| e.re > 1e-3 && e.im.abs() < 1e-9), "{above:?}");
        assert!(polariton_frequencies(&m, 0.99 * x_edge).stable);
        assert!(!polariton_frequencies(&m, 1.01 * x_edge).stable);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn closed_form_agrees_with_eigen_oracle(
            wc in 0.2f64..1.0,
            wr in 0.5f64..2.0,
            gf in 0.0f64..0.99,
            g4 in 0.001f64..0.1,
            xf in 0.5f64..2.0,
        ) {
            let g_max = (g4 * wr).sqrt() / 2.0;
            let m = ModelParams { omega_c: wc, omega_r: wr, g: gf * g_max, g4, ..ModelParams::default() };
            let x0sq = xf / (2.0 * wc);
            let b = polariton_frequencies(&m, x0sq);
            prop_assume!(b.stable);
            // keep the two branches distinct so that the eigenvalues are well conditioned
            prop_assume!(b.omega_plus - b.omega_minus > 1e-4);
            let w = eigen_frequencies(&m, x0sq);
            prop_assert_eq!(w.len(), 2);
            prop_assert!((w[0] / b.omega_minus - 1.0).abs() < 1e-8, "{} vs {}", w[0], b.omega_minus);
            prop_assert!((w[1] / b.omega_plus - 1.0).abs() < 1e-8, "{} vs {}", w[1], b.omega_plus);
        }
    }
}
