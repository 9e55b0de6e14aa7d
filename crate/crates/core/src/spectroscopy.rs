//! Simulated stimulated-Raman spectra and peak analysis.
//!
//! A spectrum is a scan over detector frequencies: every `ω_s` is a separate
//! ensemble in which the probe is ramped on at `t_p` and the scattered-photon
//! number `n_s = |a_s|²` is read at `t*`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, EnsembleConfig, Observable, RecordTime};
use crate::error::{Error, Result};
use crate::model::{max_frequency, ModelParams, ProbeParams, ScheduleParams, DEFAULT_OVERFLOW_THRESHOLD};
use crate::noise::derive_seed;

/// Raman-shift range of the default detector grid, in units of `ω_R`.
pub const DEFAULT_SHIFT_RANGE: (f64, f64) = (0.7, 1.3);
pub const DEFAULT_GRID_POINTS: usize = 80;

/// How `n_s` is read off each trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMeasurement {
    /// Value at `t*`.
    #[default]
    Instant,
    /// Average over `[t* − width, t*]`.
    Window { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRequest {
    pub model: ModelParams,
    /// Probe settings; its `omega_s` is replaced by each grid value.
    pub probe: ProbeParams,
    /// Strictly increasing detector frequencies.
    pub omega_s: Vec<f64>,
    pub schedule: ScheduleParams,
    pub n_traj: usize,
    pub master_seed: u64,
    pub measurement: SpectrumMeasurement,
    pub overflow_threshold: f64,
}

impl SpectrumRequest {
    /// Default detector grid and the step needed by its highest frequency.
    pub fn new(model: ModelParams, probe: ProbeParams, n_traj: usize, master_seed: u64) -> Self {
        let omega_s = default_omega_s_grid(&model, &probe);
        SpectrumRequest {
            schedule: schedule_for_grid(&model, &probe, &omega_s),
            model,
            probe,
            omega_s,
            n_traj,
            master_seed,
            measurement: SpectrumMeasurement::Instant,
            overflow_threshold: DEFAULT_OVERFLOW_THRESHOLD,
        }
    }

    /// Replaces the grid and re-derives the default step for it.
    pub fn with_grid(mut self, omega_s: Vec<f64>) -> Self {
        self.schedule = schedule_for_grid(&self.model, &self.probe, &omega_s);
        self.omega_s = omega_s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_s.is_empty() {
            return Err(Error::invalid("omega_s", "empty detector grid"));
        }
        if !self.omega_s.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid("omega_s", "grid must be strictly increasing"));
        }
        if let SpectrumMeasurement::Window { width } = self.measurement {
            if !(width > 0.0 && width <= self.schedule.tstar - self.schedule.tp) {
                return Err(Error::invalid(
                    "measurement",
                    format!("window width {width} must lie in (0, tstar − tp]"),
                ));
            }
        }
        Ok(())
    }

    /// The ensemble run for grid point `index`.
    pub fn point_config(&self, index: usize) -> EnsembleConfig {
        let probe = ProbeParams {
            omega_s: self.omega_s[index],
            ..self.probe
        };
        let t = self.schedule.tstar;
        let time = match self.measurement {
            SpectrumMeasurement::Instant => RecordTime::Instant(t),
            SpectrumMeasurement::Window { width } => RecordTime::Window {
                start: t - width,
                end: t,
            },
        };
        EnsembleConfig {
            n_traj: self.n_traj,
            master_seed: derive_seed(self.master_seed, index as u64),
            model: self.model,
            probe: Some(probe),
            schedule: self.schedule,
            record: Vec::new(),
            overflow_threshold: self.overflow_threshold,
        }
        .record(Observable::ScatteredIntensity, time)
    }
}

/// Standard timings with a step that resolves the highest detector frequency.
pub fn schedule_for_grid(model: &ModelParams, probe: &ProbeParams, omega_s: &[f64]) -> ScheduleParams {
    let top = omega_s.iter().copied().fold(probe.omega_s, f64::max);
    let probe = ProbeParams {
        omega_s: top,
        ..*probe
    };
    ScheduleParams::standard(
        model.omega_r,
        crate::model::default_dt(max_frequency(model, Some(&probe))),
    )
}

/// 80 detector frequencies covering Raman shifts `[0.7, 1.3]·ω_R`: 60 evenly
/// spaced, plus 20 more within `±0.1·ω_R` of the bare Raman line where the
/// polariton branches split.
pub fn default_omega_s_grid(model: &ModelParams, probe: &ProbeParams) -> Vec<f64> {
    let (lo, hi) = DEFAULT_SHIFT_RANGE;
    let wr = model.omega_r;
    let mut shifts: Vec<f64> = linspace(lo * wr, hi * wr, 60);
    shifts.extend(linspace(0.9 * wr, 1.1 * wr, 22).into_iter().skip(1).take(20));
    let mut grid: Vec<f64> = shifts.iter().map(|s| probe.omega_p - s).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    grid
}

/// Evenly spaced detector frequencies for the Raman-shift interval
/// `[shift_lo, shift_hi]`, in increasing `ω_s`.
pub fn omega_s_grid_for_shifts(omega_p: f64, shift_lo: f64, shift_hi: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = linspace(shift_lo, shift_hi, n).iter().map(|s| omega_p - s).collect();
    g.reverse();
    g
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub omega_s: f64,
    /// `ω_p − ω_s`.
    pub raman_shift: f64,
    pub n_s_mean: f64,
    pub n_s_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Rows in increasing `ω_s`.
    pub rows: Vec<SpectrumRow>,
    pub n_diverged: usize,
}

impl Spectrum {
    /// `(raman_shift, n_s)` pairs in increasing Raman shift.
    pub fn by_shift(&self) -> (Vec<f64>, Vec<f64>) {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.raman_shift.total_cmp(&b.raman_shift));
        (
            rows.iter().map(|r| r.raman_shift).collect(),
            rows.iter().map(|r| r.n_s_mean).collect(),
        )
    }

    /// `(ω_s, n_s)` pairs in increasing detector frequency.
    pub fn by_omega_s(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.rows.iter().map(|r| r.omega_s).collect(),
            self.rows.iter().map(|r| r.n_s_mean).collect(),
        )
    }
}

/// Runs one ensemble per detector frequency, in grid order.
pub fn raman_spectrum(req: &SpectrumRequest) -> Result<Spectrum> {
    raman_spectrum_with_progress(req, |_, _| {})
}

/// As [`raman_spectrum`], calling `progress(done, total)` after each point.
pub fn raman_spectrum_with_progress<F: FnMut(usize, usize)>(
    req: &SpectrumRequest,
    mut progress: F,
) -> Result<Spectrum> {
    req.validate()?;
    let n = req.omega_s.len();
    let mut rows = Vec::with_capacity(n);
    let mut n_diverged = 0;
    for (i, &omega_s) in req.omega_s.iter().enumerate() {
        let res = run_ensemble(&req.point_config(i))?;
        let s = res.records[0].summary;
        n_diverged += res.n_diverged;
        rows.push(SpectrumRow {
            omega_s,
            raman_shift: req.probe.omega_p - omega_s,
            n_s_mean: s.mean,
            n_s_stderr: s.stderr,
        });
        progress(i + 1, n);
    }
    Ok(Spectrum { rows, n_diverged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Vertex of the parabola through the maximum and its neighbours.
    pub center: f64,
    pub height: f64,
    /// Full width at half height above the spectrum floor, from linearly
    /// interpolated crossings.
    pub fwhm: f64,
    pub prominence: f64,
    /// Grid index of the sampled maximum.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    /// Peaks in increasing `center`.
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    /// The most prominent peak.
    pub fn dominant(&self) -> &Peak {
        self.peaks
            .iter()
            .max_by(|a, b| a.prominence.total_cmp(&b.prominence))
            .expect("a PeakSet is never empty")
    }

    /// The `n` most prominent peaks, in increasing `center`.
    pub fn most_prominent(&self, n: usize) -> Vec<Peak> {
        let mut p = self.peaks.clone();
        p.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
        p.truncate(n);
        p.sort_by(|a, b| a.center.total_cmp(&b.center));
        p
    }

    /// Lower and upper polariton: the two most prominent peaks in frequency
    /// order.
    pub fn polaritons(&self) -> Option<(Peak, Peak)> {
        match self.most_prominent(2).as_slice() {
            [lrp, urp] => Some((*lrp, *urp)),
            _ => None,
        }
    }

    /// Prominence of the strongest peak over that of the runner-up
    /// (infinite with a single peak).
    pub fn dominance(&self) -> f64 {
        let mut p: Vec<f64> = self.peaks.iter().map(|p| p.prominence).collect();
        p.sort_by(|a, b| b.total_cmp(a));
        if p.len() < 2 {
            f64::INFINITY
        } else {
            p[0] / p[1]
        }
    }
}

/// Peaks of `n_s` against Raman shift.
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64) -> Result<PeakSet> {
    let (x, y) = spectrum.by_shift();
    find_peaks_xy(&x, &y, min_prominence)
}

/// Local maxima of `y(x)` whose topographic prominence is at least
/// `min_prominence`. `x` must be strictly increasing with at least 5 points.
pub fn find_peaks_xy(x: &[f64], y: &[f64], min_prominence: f64) -> Result<PeakSet> {
    if x.len() != y.len() {
        return Err(Error::invalid("spectrum", "x and y lengths differ"));
    }
    if x.len() < 5 {
        return Err(Error::invalid("spectrum", "need at least 5 points"));
    }
    if !x.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::invalid("spectrum", "x must be strictly increasing"));
    }
    let n = y.len();
    let floor = y.iter().copied().fold(f64::INFINITY, f64::min);
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if !(y[i] > y[i - 1]) {
            i += 1;
            continue;
        }
        // walk across a flat top
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 < n && y[j + 1] < y[i] {
            let k = (i + j) / 2;
            let prominence = prominence(y, k);
            if prominence >= min_prominence {
                peaks.push(describe_peak(x, y, k, prominence, floor));
            }
        }
        i = j + 1;
    }
    if peaks.is_empty() {
        return Err(Error::NoPeaksFound { min_prominence });
    }
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(PeakSet { peaks })
}

/// Height above the higher of the two lowest points separating `k` from
/// taller terrain (or the ends of the data).
fn prominence(y: &[f64], k: usize) -> f64 {
    let h = y[k];
    let mut left_min = h;
    for i in (0..k).rev() {
        if y[i] > h {
            break;
        }
        left_min = left_min.min(y[i]);
    }
    let mut right_min = h;
    for &v in &y[k + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Widths are taken halfway between the peak and the lowest point of the
/// data, so that a constant background (the vacuum level of `n_s`) does not
/// inflate them.
fn describe_peak(x: &[f64], y: &[f64], k: usize, prominence: f64, floor: f64) -> Peak {
    let (center, height) = parabolic_vertex(
        (x[k - 1], y[k - 1]),
        (x[k], y[k]),
        (x[k + 1], y[k + 1]),
    );
    let half = floor + (height - floor) / 2.0;
    let left = (0..k)
        .rev()
        .find(|&i| y[i] <= half)
        .map(|i| interpolate_crossing(x[i], y[i], x[i + 1], y[i + 1], half));
    let right = (k + 1..y.len())
        .find(|&i| y[i] <= half)
        .map(|i| interpolate_crossing(x[i - 1], y[i - 1], x[i], y[i], half));
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (center - l),
        (None, Some(r)) => 2.0 * (r - center),
        (None, None) => x[x.len() - 1] - x[0],
    };
    Peak {
        center,
        height,
        fwhm,
        prominence,
        index: k,
    }
}

/// Vertex of the parabola through three points; falls back to the middle
/// point when they are collinear.
fn parabolic_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return p1;
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d01 + a * (xv - x0));
    (xv, yv)
}

fn interpolate_crossing(xa: f64, ya: f64, xb: f64, yb: f64, level: f64) -> f64 {
    if ya == yb {
        return 0.5 * (xa + xb);
    }
    xa + (level - ya) * (xb - xa) / (yb - ya)
}

/// A prominence threshold that ignores Monte Carlo ripple: five times the
/// median standard error, but at least 5% of the spectrum's range.
pub fn default_min_prominence(spectrum: &Spectrum) -> f64 {
    let mut se: Vec<f64> = spectrum.rows.iter().map(|r| r.n_s_stderr).collect();
    se.sort_by(f64::total_cmp);
    let median = if se.is_empty() { 0.0 } else { se[se.len() / 2] };
    let (lo, hi) = spectrum
        .rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.n_s_mean), hi.max(r.n_s_mean))
        });
    (5.0 * median).max(0.05 * (hi - lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiSplitting {
    /// `ε_URP − ε_LRP` in Raman shift.
    pub two_delta: f64,
    pub lrp: Peak,
    pub urp: Peak,
    pub spectrum: Spectrum,
}

/// Runs the spectrum and measures the distance between the two dominant
/// peaks. The model should be tuned to the renormalised resonance
/// (see [`crate::gaussian::resonant_omega_c`]).
pub fn numerical_rabi_splitting(req: &SpectrumRequest, min_prominence: Option<f64>) -> Result<RabiSplitting> {
    let spectrum = raman_spectrum(req)?;
    rabi_splitting_from_spectrum(spectrum, min_prominence)
}

/// As [`numerical_rabi_splitting`] for an already computed spectrum.
pub fn rabi_splitting_from_spectrum(spectrum: Spectrum, min_prominence: Option<f64>) -> Result<RabiSplitting> {
    let threshold = min_prominence.unwrap_or_else(|| default_min_prominence(&spectrum));
    let peaks = find_peaks(&spectrum, threshold)?;
    let Some((lrp, urp)) = peaks.polaritons() else {
        let p = peaks.dominant();
        return Err(Error::PeakUnresolved {
            separation: 0.0,
            width: p.fwhm,
        });
    };
    let separation = urp.center - lrp.center;
    let width = lrp.fwhm.max(urp.fwhm);
    if separation < width {
        return Err(Error::PeakUnresolved { separation, width });
    }
    Ok(RabiSplitting {
        two_delta: separation,
        lrp,
        urp,
        spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentzian(x: f64, x0: f64, fwhm: f64, h: f64) -> f64 {
        let hw = fwhm / 2.0;
        h * hw * hw / ((x - x0).powi(2) + hw * hw)
    }

    #[test]
    fn single_lorentzian_recovered() {
        let x = linspace(0.7, 1.3, 61);
        let (x0, w) = (1.0137, 0.05);
        let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, x0, w, 2.0)).collect();
        let peaks = find_peaks_xy(&x, &y, 0.1).unwrap();
        assert_eq!(peaks.peaks.len(), 1);
        let p = peaks.peaks[0];
        let h = x[1] - x[0];
        assert!((p.center - x0).abs() < h / 4.0, "{} vs {x0}", p.center);
        assert!((p.fwhm / w - 1.0).abs() < 0.1, "{}", p.fwhm);
    }

    #[test]
    fn width_ignores_constant_background() {
        let x = linspace(0.7, 1.3, 61);
        let (x0, w) = (0.98, 0.06);
        let y: Vec<f64> = x.iter().map(|&v| 0.5 + lorentzian(v, x0, w, 1.0)).collect();
        let p = find_peaks_xy(&x, &y, 0.1).unwrap().peaks[0];
        assert!((p.fwhm / w - 1.0).abs() < 0.1, "{}", p.fwhm);
    }

    #[test]
    fn monotone_has_no_peak() {
        let x = linspace(0.0, 1.0, 20);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert!(matches!(
            find_peaks_xy(&x, &y, 0.0),
            Err(Error::NoPeaksFound { .. })
        ));
    }

    #[test]
    fn two_lorentzians_in_order() {
        let x = linspace(0.7, 1.3, 121);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| lorentzian(v, 0.95, 0.02, 1.0) + lorentzian(v, 1.06, 0.02, 0.6))
            .collect();
        let peaks = find_peaks_xy(&x, &y, 0.05).unwrap();
        let (l, u) = peaks.polaritons().unwrap();
        assert!((l.center - 0.95).abs() < 0.00125);
        assert!((u.center - 1.06).abs() < 0.00125);
        assert!(l.height > u.height);
    }

    #[test]
    fn prominence_filters_ripples() {
        let x = linspace(0.0, 1.0, 101);
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| lorentzian(v, 0.5, 0.1, 1.0) + if i % 2 == 0 { 0.01 } else { 0.0 })
            .collect();
        let peaks = find_peaks_xy(&x, &y, 0.1).unwrap();
        assert_eq!(peaks.peaks.len(), 1);
        assert!(peaks.dominance().is_infinite());
    }

    #[test]
    fn parabola_vertex_exact_for_quadratic() {
        let f = |x: f64| 3.0 - 2.0 * (x - 0.37).powi(2);
        let (xv, yv) = parabolic_vertex((0.2, f(0.2)), (0.35, f(0.35)), (0.55, f(0.55)));
        assert!((xv - 0.37).abs() < 1e-12);
        assert!((yv - 3.0).abs() < 1e-12);
    }

    #[test]
    fn default_grid_shape() {
        let m = ModelParams::default();
        let p = ProbeParams::default();
        let g = default_omega_s_grid(&m, &p);
        assert_eq!(g.len(), DEFAULT_GRID_POINTS);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g[0] - 3.7).abs() < 1e-12 && (g[79] - 4.3).abs() < 1e-12);
        let r = SpectrumRequest::new(m, p, 10, 0);
        r.validate().unwrap();
        assert!(r.schedule.dt * 5.0 < 0.1);
    }
}
