use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::grid::FrequencyGrid;
use super::polariton::{polariton_frequencies, PolaritonBranches};
use super::renormalized_cavity_freq;
use crate::error::{Error, Result};
use crate::model::ModelParams;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Leading-order squeezing force
/// `Δ(ω) = −4g²/ω_R + 3g₄ − 8g²ω_R/D(ω)` with
/// `D = ω_R² − (ω − ω_c)² − i(γ + 2κ)(ω − ω_c) + γκ + κ²`.
pub fn squeezing_force(model: &ModelParams, omega: f64) -> Complex64 {
    let ModelParams {
        omega_c,
        omega_r,
        g,
        g4,
        kappa,
        gamma,
        ..
    } = *model;
    let u = omega - omega_c;
    let d = Complex64::new(
        omega_r * omega_r - u * u + gamma * kappa + kappa * kappa,
        -(gamma + 2.0 * kappa) * u,
    );
    Complex64::from(-4.0 * g * g / omega_r + 3.0 * g4) - 8.0 * g * g * omega_r / d
}

/// Fixed-point iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Sup-norm tolerance on successive iterates of `n` and `f`.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new map value: `new = damping·map(old) + (1 − damping)·old`.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 500,
            damping: 0.5,
        }
    }
}

/// Cavity fluctuation spectra `⟨a*(ω)a(ω′)⟩ = 2πδ(ω − ω′)n(ω)`,
/// `⟨a(ω)a(ω′)⟩ = 2πδ(ω + ω′)f(ω)` on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSolution {
    pub grid: FrequencyGrid,
    pub n: Vec<f64>,
    pub f: Vec<Complex64>,
    /// Effective cavity frequency at the bare cavity frequency.
    pub omega_c_bar: f64,
    /// Squeezing force at `ω_c`.
    pub delta: Complex64,
    /// `∫dω/2π (2n + f + f*)`.
    pub quadrature: f64,
    /// `⟨x̂²⟩ = quadrature/(2ω_c)`.
    pub x2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    /// Polariton branches with `x₀² = x2`.
    pub branches: PolaritonBranches,
}

impl GaussianSolution {
    fn assemble(
        model: &ModelParams,
        grid: &FrequencyGrid,
        n: Vec<f64>,
        f: Vec<Complex64>,
        omega_c_bar: f64,
        delta: Complex64,
        iterations: usize,
        residual: f64,
    ) -> Self {
        let quadrature = grid.integrate(&symmetric_density(&n, &f));
        let x2 = quadrature / (2.0 * model.omega_c);
        GaussianSolution {
            grid: grid.clone(),
            n,
            f,
            omega_c_bar,
            delta,
            quadrature,
            x2,
            converged: true,
            iterations,
            residual,
            branches: polariton_frequencies(model, x2),
        }
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.grid.omegas()
    }
}

/// `S(ω) = 2n(ω) + f(ω) + f*(ω)`.
fn symmetric_density(n: &[f64], f: &[Complex64]) -> Vec<f64> {
    n.iter().zip(f).map(|(n, f)| 2.0 * n + 2.0 * f.re).collect()
}

/// Response of `a(ω)`, `a*(−ω)` to the noise, given `ω̄_c(±ω)` and `Δ(±ω)`.
/// Returns `(n(ω), f(ω))` for noise strength `κc = κ·coth_c`.
#[inline]
fn response(
    omega: f64,
    kappa: f64,
    kappa_c: f64,
    wbar_p: Complex64,
    wbar_m: Complex64,
    delta_p: Complex64,
    delta_m: Complex64,
) -> (f64, Complex64) {
    let a_p = Complex64::new(kappa, -omega) + I * wbar_p;
    let b_p = Complex64::new(kappa, -omega) - I * wbar_m;
    let a_m = Complex64::new(kappa, omega) + I * wbar_m;
    let b_m = Complex64::new(kappa, omega) - I * wbar_p;
    let det_p = a_p * b_p - delta_p * delta_m;
    let det_m = a_m * b_m - delta_m * delta_p;
    let n = kappa_c * (b_p.norm_sqr() + delta_p.norm_sqr()) / det_p.norm_sqr();
    let f = -I * kappa_c * (b_p * delta_m + delta_p * b_m) / (det_p * det_m);
    (n, f)
}

/// Fluctuations to linear order in `g²` and `g₄`: `n` is the Lorentzian at
/// `ω̄_c` and `f(ω)` the first-order response to `Δ(±ω)` from
/// [`squeezing_force`]. The free part carries the thermal factor `coth_c`;
/// the couplings are taken at zero temperature.
pub fn perturbative_fluctuations(model: &ModelParams, grid: &FrequencyGrid) -> GaussianSolution {
    let kappa = model.kappa;
    let kappa_c = kappa * model.coth_cavity();
    let wc = model.omega_c;
    let wbar = renormalized_cavity_freq(model);
    let omegas = grid.omegas();
    let a0 = |w: f64| Complex64::new(kappa, wc - w);
    let b0 = |w: f64| Complex64::new(kappa, -wc - w);
    let n = omegas
        .iter()
        .map(|&w| kappa_c / (kappa * kappa + (w - wbar).powi(2)))
        .collect();
    let f = omegas
        .iter()
        .map(|&w| {
            let (dp, dm) = (squeezing_force(model, w), squeezing_force(model, -w));
            -I * kappa_c * (dm / (a0(w) * a0(-w) * b0(-w)) + dp / (a0(w) * b0(w) * a0(-w)))
        })
        .collect();
    GaussianSolution::assemble(model, grid, n, f, wbar, squeezing_force(model, wc), 0, 0.0)
}

/// Linear convolution against a fixed kernel on the grid, via zero-padded FFT:
/// `out_j = Σ_m kernel_m · s_{j−m+M}` with `s` zero off the grid.
struct Convolver {
    len: usize,
    half: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Convolver {
    fn new(kernel: &[Complex64], half: usize) -> Self {
        let n = kernel.len();
        let len = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut kernel_hat = vec![Complex64::default(); len];
        kernel_hat[..n].copy_from_slice(kernel);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::default(); scratch_len];
        forward.process_with_scratch(&mut kernel_hat, &mut scratch);
        Convolver {
            len,
            half,
            forward,
            inverse,
            kernel_hat,
            buf: vec![Complex64::default(); len],
            scratch,
        }
    }

    fn apply(&mut self, s: &[f64], out: &mut [Complex64]) {
        let n = s.len();
        self.buf.fill(Complex64::default());
        for (b, &v) in self.buf.iter_mut().zip(s) {
            *b = Complex64::from(v);
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (b, k) in self.buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        let norm = 1.0 / self.len as f64;
        for (j, o) in out.iter_mut().enumerate().take(n) {
            *o = self.buf[j + self.half] * norm;
        }
    }
}

/// Trapezoid-weighted Raman response `h/2π · w_m · ω_R/(ω_R² − ω_m² − iγω_m)`.
fn raman_kernel(model: &ModelParams, grid: &FrequencyGrid) -> Vec<Complex64> {
    let (wr, gamma) = (model.omega_r, model.gamma);
    let h = grid.spacing / TAU;
    let last = grid.len() - 1;
    (0..grid.len())
        .map(|m| {
            let w = grid.omega(m);
            let weight = if m == 0 || m == last { 0.5 } else { 1.0 };
            h * weight * wr / Complex64::new(wr * wr - w * w, -gamma * w)
        })
        .collect()
}

/// Self-energy `Σ(ω) = (−4g²/ω_R + 3g₄)X − 8g²∫dω′/2π χ_R(ω′)S(ω − ω′)`,
/// shared by `ω̄_c(ω) = ω_c + Σ(ω)` and `Δ(ω) = Σ(ω)`.
struct SelfEnergy {
    local: f64,
    nonlocal: f64,
    conv: Convolver,
    density: Vec<f64>,
    convolved: Vec<Complex64>,
}

impl SelfEnergy {
    fn new(model: &ModelParams, grid: &FrequencyGrid) -> Self {
        let g2 = model.g * model.g;
        SelfEnergy {
            local: -4.0 * g2 / model.omega_r + 3.0 * model.g4,
            nonlocal: -8.0 * g2,
            conv: Convolver::new(&raman_kernel(model, grid), grid.half_points),
            density: vec![0.0; grid.len()],
            convolved: vec![Complex64::default(); grid.len()],
        }
    }

    fn evaluate(&mut self, grid: &FrequencyGrid, n: &[f64], f: &[Complex64], sigma: &mut [Complex64]) {
        for ((d, n), f) in self.density.iter_mut().zip(n).zip(f) {
            *d = 2.0 * n + 2.0 * f.re;
        }
        let x = grid.integrate(&self.density);
        self.conv.apply(&self.density, &mut self.convolved);
        for (s, c) in sigma.iter_mut().zip(&self.convolved) {
            *s = Complex64::from(self.local * x) + self.nonlocal * c;
        }
    }
}

/// Damped fixed point of the Gaussian self-consistency, started from
/// [`perturbative_fluctuations`].
pub fn selfconsistent_fluctuations(
    model: &ModelParams,
    grid: &FrequencyGrid,
    options: &SolverOptions,
) -> Result<GaussianSolution> {
    if !(options.tol > 0.0) || options.max_iter == 0 || !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::invalid(
            "solver",
            "need tol > 0, max_iter ≥ 1 and 0 < damping ≤ 1",
        ));
    }
    let start = perturbative_fluctuations(model, grid);
    let (mut n, mut f) = (start.n, start.f);
    let len = grid.len();
    let kappa = model.kappa;
    let kappa_c = kappa * model.coth_cavity();
    let mut se = SelfEnergy::new(model, grid);
    let mut sigma = vec![Complex64::default(); len];
    let mut residual = f64::INFINITY;
    for iter in 1..=options.max_iter {
        se.evaluate(grid, &n, &f, &mut sigma);
        residual = 0.0;
        for k in 0..len {
            let km = grid.mirror(k);
            let (sp, sm) = (sigma[k], sigma[km]);
            let (n_new, f_new) = response(
                grid.omega(k),
                kappa,
                kappa_c,
                model.omega_c + sp,
                model.omega_c + sm,
                sp,
                sm,
            );
            residual = residual
                .max((n_new - n[k]).abs())
                .max((f_new - f[k]).norm());
            let (dn, df) = (n_new - n[k], f_new - f[k]);
            n[k] += options.damping * dn;
            f[k] += options.damping * df;
        }
        if !residual.is_finite() {
            break;
        }
        if residual < options.tol {
            se.evaluate(grid, &n, &f, &mut sigma);
            let (wbar, delta) = at_cavity(model.omega_c, grid, &sigma);
            return Ok(GaussianSolution::assemble(
                model,
                grid,
                n,
                f,
                model.omega_c + wbar.re,
                delta,
                iter,
                residual,
            ));
        }
    }
    Err(Error::NotConverged {
        max_iter: options.max_iter,
        residual,
    })
}

/// Linear interpolation of `Σ` at `ω_c`; returns `(Σ, Σ)` as `(ω̄_c − ω_c, Δ)`.
fn at_cavity(omega_c: f64, grid: &FrequencyGrid, sigma: &[Complex64]) -> (Complex64, Complex64) {
    let pos = omega_c / grid.spacing + grid.half_points as f64;
    let k = (pos.floor() as usize).min(grid.len() - 2);
    let t = pos - k as f64;
    let s = sigma[k] * (1.0 - t) + sigma[k + 1] * t;
    (s, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::resonant_omega_c;

    fn model(omega_c: f64, g: f64, g4: f64) -> ModelParams {
        ModelParams {
            omega_c,
            g,
            g4,
            ..ModelParams::default()
        }
    }

    #[test]
    fn squeezing_force_limits() {
        assert_eq!(squeezing_force(&model(0.5, 0.0, 0.0), 0.3), Complex64::default());
        let m = ModelParams {
            kappa: 1e-9,
            gamma: 1e-9,
            ..model(0.5, 0.04, 0.01)
        };
        let d = squeezing_force(&m, m.omega_c);
        assert!((d.re - 0.0108).abs() < 1e-9, "{d}");
        assert!(d.im.abs() < 1e-9);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let grid = FrequencyGrid::new(0.1, 3.0).unwrap();
        let m = model(0.5, 0.04, 0.01);
        let kernel = raman_kernel(&m, &grid);
        let s: Vec<f64> = (0..grid.len())
            .map(|k| (-(grid.omega(k) - 0.4).powi(2)).exp() + 0.1 * (k % 3) as f64)
            .collect();
        let mut fast = vec![Complex64::default(); grid.len()];
        Convolver::new(&kernel, grid.half_points).apply(&s, &mut fast);
        let big_m = grid.half_points as isize;
        for j in 0..grid.len() {
            let mut direct = Complex64::default();
            for (mi, km) in kernel.iter().enumerate() {
                let idx = j as isize - mi as isize + big_m;
                if idx >= 0 && (idx as usize) < s.len() {
                    direct += km * s[idx as usize];
                }
            }
            assert!((direct - fast[j]).norm() < 1e-12, "{j}: {direct} vs {}", fast[j]);
        }
    }

    #[test]
    fn free_theory_is_vacuum_lorentzian() {
        let m = model(0.45, 0.0, 0.0);
        let grid = FrequencyGrid::for_model(&m).unwrap();
        let sol = perturbative_fluctuations(&m, &grid);
        assert!(sol.f.iter().all(|f| *f == Complex64::default()));
        assert!((grid.integrate(&sol.n) - 0.5).abs() < 1e-3);
        assert!((sol.x2 - 1.0 / (2.0 * m.omega_c)).abs() < 2e-3 / m.omega_c);
        assert!(sol.n.iter().all(|&n| n >= 0.0));
    }

    #[test]
    fn free_theory_thermal_normalisation() {
        let m = ModelParams {
            temperature: 0.7,
            ..model(0.45, 0.0, 0.0)
        };
        let grid = FrequencyGrid::for_model(&m).unwrap();
        let sol = perturbative_fluctuations(&m, &grid);
        let expected = (m.omega_c / (2.0 * m.temperature)).tanh().recip() / 2.0;
        assert!((grid.integrate(&sol.n) - expected).abs() < 1e-3 * expected);
    }

    #[test]
    fn perturbative_f_is_even() {
        let m = model(0.48, 0.04, 0.01);
        let grid = FrequencyGrid::for_model(&m).unwrap();
        let sol = perturbative_fluctuations(&m, &grid);
        for k in 0..grid.len() {
            let d = (sol.f[k] - sol.f[grid.mirror(k)]).norm();
            assert!(d <= 1e-12 * sol.f[k].norm().max(1e-300), "{k}");
        }
    }

    fn peak_abs_f(sol: &GaussianSolution) -> (f64, f64) {
        let (k, v) = sol
            .f
            .iter()
            .enumerate()
            .map(|(k, f)| (k, f.norm()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        (sol.grid.omega(k), v)
    }

    #[test]
    fn squeezing_amplified_at_resonance() {
        let (g, g4) = (0.04, 0.01);
        let on = model(resonant_omega_c(g, g4, 1.0), g, g4);
        let off = model(0.8, g, g4);
        let grid = FrequencyGrid::for_model(&off).unwrap();
        let s_on = perturbative_fluctuations(&on, &grid);
        let s_off = perturbative_fluctuations(&off, &grid);
        let (w_on, f_on) = peak_abs_f(&s_on);
        let (_, f_off) = peak_abs_f(&s_off);
        assert!(f_on > 3.0 * f_off, "{f_on} vs {f_off}");
        // the maximum sits on the cavity line at ±ω_c
        assert!((w_on.abs() - on.omega_c).abs() < on.kappa, "{w_on}");
    }

    #[test]
    fn selfconsistent_free_theory_in_one_step() {
        let m = model(0.45, 0.0, 0.0);
        let grid = FrequencyGrid::for_model(&m).unwrap();
        let sol = selfconsistent_fluctuations(&m, &grid, &SolverOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.f.iter().all(|f| f.norm() == 0.0));
        let exact: Vec<f64> = grid
            .omegas()
            .iter()
            .map(|w| m.kappa / (m.kappa.powi(2) + (w - m.omega_c).powi(2)))
            .collect();
        for (a, b) in sol.n.iter().zip(&exact) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
        assert_eq!(sol.omega_c_bar, m.omega_c);
    }

    #[test]
    fn selfconsistent_matches_perturbation_at_small_g() {
        let m = model(0.6, 0.005, 0.0);
        let grid = FrequencyGrid::for_model(&m).unwrap();
        let sc = selfconsistent_fluctuations(&m, &grid, &SolverOptions::default()).unwrap();
        let pt = perturbative_fluctuations(&m, &grid);
        assert!(sc.converged);
        let rel = (sc.x2 / pt.x2 - 1.0).abs();
        assert!(rel < 1e-3, "{} vs {}", sc.x2, pt.x2);
        assert!(sc.n.iter().all(|&n| n >= 0.0));
        assert!((sc.omega_c_bar - renormalized_cavity_freq(&m)).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_options() {
        let m = model(0.5, 0.01, 0.01);
        let grid = FrequencyGrid::new(0.01, 5.0).unwrap();
        let bad = SolverOptions {
            damping: 0.0,
            ..SolverOptions::default()
        };
        assert!(selfconsistent_fluctuations(&m, &grid, &bad).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let m = model(0.49, 0.04, 0.01);
        let grid = FrequencyGrid::for_model(&m).unwrap();
        let opts = SolverOptions {
            max_iter: 2,
            ..SolverOptions::default()
        };
        match selfconsistent_fluctuations(&m, &grid, &opts) {
            Err(Error::NotConverged { max_iter, residual }) => {
                assert_eq!(max_iter, 2);
                assert!(residual > opts.tol);
            }
            other => panic!("{other:?}"),
        }
    }
}
