//! Equivalent channel kernels and joint fractional delay/Doppler path
//! extraction with serial interference cancellation (SIC).
//!
//! A path at real Doppler tap `k_i` and real delay tap `l_i` appears in the
//! CSF as `a · K_ν[Δk] · K_τ[Δl]`, where `K_ν = h_eq,ν / N` and
//! `K_τ = h_eq,τ / M` are the equivalent channel functions scaled to a unit
//! peak. Each SIC iteration locates the strongest residual cell, searches
//! the fractional offsets on a grid for the kernel that best explains the
//! residual, and subtracts the least-squares fit.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{Path, PathSet};
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::receiver::Csf;

/// Relative floor under which residual power is treated as numerical round-off.
const ROUNDOFF_FLOOR: f64 = 1e-12;

/// `Σ_{m<n} exp(-j2π m x / n)` in closed form, exact at the removable
/// singularities `x ≡ 0 (mod n)`.
fn dirichlet(x: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let e = x - nf * (x / nf).round();
    if e == 0.0 {
        return Complex64::new(nf, 0.0);
    }
    let magnitude = (PI * e).sin() / (PI * e / nf).sin();
    Complex64::from_polar(magnitude, -PI * e * (nf - 1.0) / nf)
}

/// Doppler-domain equivalent channel function
/// `h_eq,ν[Δk] = exp(-jπ(Δk - k_i)(N-1)/N) · sin(π(Δk - k_i)) / sin(π(Δk - k_i)/N)`.
pub fn eq_channel_doppler(delta_k: &[i64], k_i: f64, n: usize) -> Vec<Complex64> {
    delta_k.iter().map(|&dk| dirichlet(dk as f64 - k_i, n)).collect()
}

/// Delay-domain equivalent channel function, the conjugate-exponent twin of
/// [`eq_channel_doppler`] with `M` points.
pub fn eq_channel_delay(delta_l: &[i64], l_i: f64, m: usize) -> Vec<Complex64> {
    delta_l.iter().map(|&dl| dirichlet(dl as f64 - l_i, m).conj()).collect()
}

/// Stopping rule on the squared amplitude of the next candidate path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Linear power.
    Absolute(f64),
    /// Decibels above the CSF's noise-floor estimate.
    AboveNoiseFloorDb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Every point of the fractional grid.
    Exhaustive,
    /// A 0.1 grid, then the configured steps within one coarse step of its best point.
    CoarseToFine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Fractional delay step in taps.
    pub delay_step: f64,
    /// Fractional Doppler step in taps.
    pub doppler_step: f64,
    pub threshold: Threshold,
    pub max_paths: usize,
    pub search: SearchMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            delay_step: 0.1,
            doppler_step: 0.01,
            threshold: Threshold::AboveNoiseFloorDb(6.0),
            max_paths: 60,
            search: SearchMode::Exhaustive,
        }
    }
}

impl EstimatorConfig {
    pub fn new(delay_step: f64, doppler_step: f64) -> Result<Self> {
        let cfg = EstimatorConfig { delay_step, doppler_step, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, step) in [("delay", self.delay_step), ("Doppler", self.doppler_step)] {
            if !(step > 0.0 && step <= 0.5) {
                return Err(Error::InvalidArgument(format!("{name} step {step} must be in (0, 0.5]")));
            }
        }
        if self.max_paths == 0 {
            return Err(Error::InvalidArgument("max_paths must be >= 1".into()));
        }
        match self.threshold {
            Threshold::Absolute(p) if !(p.is_finite() && p >= 0.0) => {
                Err(Error::InvalidArgument(format!("absolute threshold {p} must be finite and >= 0")))
            }
            Threshold::AboveNoiseFloorDb(db) if !db.is_finite() => {
                Err(Error::InvalidArgument(format!("threshold {db} dB must be finite")))
            }
            _ => Ok(()),
        }
    }
}

/// One extracted path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    /// Linear magnitude.
    pub gain: f64,
    /// `-2π · doppler · delay`.
    pub phase: f64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    /// Signed Doppler tap and delay tap `(k_I, l_I)`.
    pub integer_taps: (i64, i64),
    /// `(k_F, l_F)`, each in `[-0.5, 0.5]`.
    pub fractional_taps: (f64, f64),
    /// Complex least-squares amplitude as measured in the CSF.
    pub amplitude: Complex64,
}

impl PathEstimate {
    /// Builds an estimate from real Doppler/delay taps and a measured amplitude.
    pub fn from_taps(cfg: &FrameConfig, doppler_taps: f64, delay_taps: f64, amplitude: Complex64) -> Self {
        let k_i = doppler_taps.round();
        let l_i = delay_taps.round();
        let doppler_hz = doppler_taps * cfg.doppler_resolution();
        let delay_s = delay_taps * cfg.delay_resolution();
        PathEstimate {
            gain: amplitude.norm(),
            phase: -2.0 * PI * doppler_hz * delay_s,
            delay_s,
            doppler_hz,
            integer_taps: (k_i as i64, l_i as i64),
            fractional_taps: (doppler_taps - k_i, delay_taps - l_i),
            amplitude,
        }
    }

    /// The estimate a perfect sounder would return for `path`.
    pub fn from_path(cfg: &FrameConfig, path: &Path) -> Self {
        Self::from_taps(
            cfg,
            path.doppler_hz / cfg.doppler_resolution(),
            path.delay_s / cfg.delay_resolution(),
            path.gain,
        )
    }

    pub fn power(&self) -> f64 {
        self.gain * self.gain
    }

    pub fn gain_db(&self) -> f64 {
        20.0 * self.gain.log10()
    }

    pub fn doppler_taps(&self) -> f64 {
        self.integer_taps.0 as f64 + self.fractional_taps.0
    }

    pub fn delay_taps(&self) -> f64 {
        self.integer_taps.1 as f64 + self.fractional_taps.1
    }
}

/// Grid points `-0.5 + i·step` up to `0.5`.
pub fn fractional_grid(step: f64) -> Vec<f64> {
    let count = (1.0 / step + 1e-9).floor() as usize;
    (0..=count).map(|i| -0.5 + i as f64 * step).collect()
}

/// Unit-peak kernels of a path at `(k, l)` taps on the CSF region.
struct Kernels {
    doppler: Vec<Complex64>,
    delay: Vec<Complex64>,
}

impl Kernels {
    fn new(cfg: &FrameConfig, doppler_taps: f64, delay_taps: f64) -> Self {
        let (n, m) = (cfg.n(), cfg.m());
        let half = (n / 2) as f64;
        let doppler = (0..n).map(|r| dirichlet(r as f64 - half - doppler_taps, n) / n as f64).collect();
        let delay = (0..=cfg.l_tau()).map(|d| dirichlet(d as f64 - delay_taps, m).conj() / m as f64).collect();
        Kernels { doppler, delay }
    }

    fn norm_sqr(v: &[Complex64]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Least-squares amplitudes and detection scores over a fractional grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSurface {
    pub k_i: i64,
    pub l_i: i64,
    /// Doppler fractional offsets (rows of the surface).
    pub doppler_offsets: Vec<f64>,
    /// Delay fractional offsets (columns of the surface).
    pub delay_offsets: Vec<f64>,
    /// `<K, ĥ> / ‖K‖²`, row-major.
    pub amplitude: Vec<Complex64>,
    /// `|<K, ĥ>| / ‖K‖`, row-major.
    pub score: Vec<f64>,
}

impl MatchedSurface {
    pub fn at(&self, i: usize, j: usize) -> (Complex64, f64) {
        let idx = i * self.delay_offsets.len() + j;
        (self.amplitude[idx], self.score[idx])
    }

    /// Highest score; scanning is in ascending offsets with strict
    /// improvement, so ties resolve toward `-0.5`.
    pub fn best(&self) -> (usize, usize) {
        let cols = self.delay_offsets.len();
        let mut best = (0, 0);
        let mut best_score = f64::NEG_INFINITY;
        for j in 0..cols {
            for i in 0..self.doppler_offsets.len() {
                let s = self.score[i * cols + j];
                if s > best_score {
                    best_score = s;
                    best = (i, j);
                }
            }
        }
        best
    }
}

fn surface(
    cfg: &FrameConfig,
    data: &[Complex64],
    k_i: i64,
    l_i: i64,
    doppler_offsets: &[f64],
    delay_offsets: &[f64],
) -> MatchedSurface {
    let cols = cfg.l_tau() + 1;
    let rows = cfg.n();
    let mut amplitude = vec![Complex64::new(0.0, 0.0); doppler_offsets.len() * delay_offsets.len()];
    let mut score = vec![0.0; amplitude.len()];
    let mut projected = vec![Complex64::new(0.0, 0.0); rows];
    let doppler_kernels: Vec<(Vec<Complex64>, f64)> = doppler_offsets
        .iter()
        .map(|kf| {
            let k = Kernels::new(cfg, k_i as f64 + kf, 0.0).doppler;
            let e = Kernels::norm_sqr(&k);
            (k, e)
        })
        .collect();
    for (j, lf) in delay_offsets.iter().enumerate() {
        let delay_kernel = Kernels::new(cfg, 0.0, l_i as f64 + lf).delay;
        let delay_energy = Kernels::norm_sqr(&delay_kernel);
        for (r, p) in projected.iter_mut().enumerate() {
            let row = &data[r * cols..(r + 1) * cols];
            *p = row.iter().zip(&delay_kernel).map(|(y, k)| y * k.conj()).sum();
        }
        for (i, (doppler_kernel, doppler_energy)) in doppler_kernels.iter().enumerate() {
            let inner: Complex64 = projected.iter().zip(doppler_kernel).map(|(v, k)| v * k.conj()).sum();
            let energy = doppler_energy * delay_energy;
            let idx = i * delay_offsets.len() + j;
            amplitude[idx] = inner / energy;
            score[idx] = inner.norm() / energy.sqrt();
        }
    }
    MatchedSurface {
        k_i,
        l_i,
        doppler_offsets: doppler_offsets.to_vec(),
        delay_offsets: delay_offsets.to_vec(),
        amplitude,
        score,
    }
}

/// Matched-filter surface around integer taps `(k_i, l_i)` over the full
/// fractional grids of `est_cfg`.
pub fn matched_filter_surface(csf: &Csf, k_i: i64, l_i: i64, est_cfg: &EstimatorConfig) -> Result<MatchedSurface> {
    est_cfg.validate()?;
    let cfg = csf.cfg();
    let half = (cfg.n() / 2) as i64;
    if !(-half..half).contains(&k_i) || !(0..=cfg.l_tau() as i64).contains(&l_i) {
        return Err(Error::InvalidArgument(format!("taps ({k_i}, {l_i}) outside the CSF")));
    }
    Ok(surface(
        cfg,
        csf.data(),
        k_i,
        l_i,
        &fractional_grid(est_cfg.doppler_step),
        &fractional_grid(est_cfg.delay_step),
    ))
}

/// Grid of `step` spacing within `radius` of `center`, clipped to `[-0.5, 0.5]`.
fn local_grid(center: f64, radius: f64, step: f64) -> Vec<f64> {
    let count = (2.0 * radius / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| center - radius + i as f64 * step)
        .filter(|v| (-0.5 - 1e-12..=0.5 + 1e-12).contains(v))
        .collect()
}

/// Best `(k_F, l_F, amplitude)` around `(k_i, l_i)`.
fn fractional_search(
    cfg: &FrameConfig,
    data: &[Complex64],
    k_i: i64,
    l_i: i64,
    est_cfg: &EstimatorConfig,
) -> (f64, f64, Complex64) {
    let pick = |s: &MatchedSurface| {
        let (i, j) = s.best();
        (s.doppler_offsets[i], s.delay_offsets[j], s.at(i, j).0)
    };
    let fine_k = fractional_grid(est_cfg.doppler_step);
    let fine_l = fractional_grid(est_cfg.delay_step);
    match est_cfg.search {
        SearchMode::Exhaustive => pick(&surface(cfg, data, k_i, l_i, &fine_k, &fine_l)),
        SearchMode::CoarseToFine => {
            let coarse_k = fractional_grid(est_cfg.doppler_step.max(0.1));
            let coarse_l = fractional_grid(est_cfg.delay_step.max(0.1));
            let (ck, cl, _) = pick(&surface(cfg, data, k_i, l_i, &coarse_k, &coarse_l));
            let ks = local_grid(ck, coarse_k[1] - coarse_k[0], est_cfg.doppler_step);
            let ls = local_grid(cl, coarse_l[1] - coarse_l[0], est_cfg.delay_step);
            pick(&surface(cfg, data, k_i, l_i, &ks, &ls))
        }
    }
}

/// Linear power threshold the estimator stops at for `csf`.
pub fn power_threshold(csf: &Csf, est_cfg: &EstimatorConfig) -> f64 {
    match est_cfg.threshold {
        Threshold::Absolute(p) => p,
        Threshold::AboveNoiseFloorDb(db) => {
            let peak = csf.peak().2.norm_sqr();
            csf.noise_floor_estimate().max(peak * ROUNDOFF_FLOOR) * 10f64.powf(db / 10.0)
        }
    }
}

/// Extracts paths from `csf` by repeated matched filtering and cancellation.
/// Returns the estimates in extraction order and the final residual.
pub fn estimate_paths_with_residual(csf: &Csf, est_cfg: &EstimatorConfig) -> Result<(Vec<PathEstimate>, Csf)> {
    est_cfg.validate()?;
    let cfg = *csf.cfg();
    let cols = cfg.l_tau() + 1;
    let threshold = power_threshold(csf, est_cfg);
    let mut residual = csf.clone();
    let mut estimates = Vec::new();
    while estimates.len() < est_cfg.max_paths {
        let (row, col, _) = residual.peak();
        let k_i = residual.doppler_tap(row);
        let l_i = col as i64;
        let (k_f, l_f, amplitude) = fractional_search(&cfg, residual.data(), k_i, l_i, est_cfg);
        if amplitude.norm_sqr() <= threshold {
            break;
        }
        let k = Kernels::new(&cfg, k_i as f64 + k_f, l_i as f64 + l_f);
        for (r, dk) in k.doppler.iter().enumerate() {
            let scaled = amplitude * dk;
            for (cell, dl) in residual.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(&k.delay) {
                *cell -= scaled * dl;
            }
        }
        let mut estimate = PathEstimate::from_taps(&cfg, k_i as f64 + k_f, l_i as f64 + l_f, amplitude);
        estimate.integer_taps = (k_i, l_i);
        estimate.fractional_taps = (k_f, l_f);
        estimates.push(estimate);
    }
    Ok((estimates, residual))
}

/// Joint fractional delay/Doppler path extraction.
pub fn estimate_paths(csf: &Csf, est_cfg: &EstimatorConfig) -> Result<Vec<PathEstimate>> {
    Ok(estimate_paths_with_residual(csf, est_cfg)?.0)
}

/// Noise-free CSF predicted by the kernel model for `(amplitude, doppler_taps, delay_taps)` components.
pub fn model_csf(cfg: &FrameConfig, components: &[(Complex64, f64, f64)], noise_floor: f64) -> Result<Csf> {
    let cols = cfg.l_tau() + 1;
    let mut data = vec![Complex64::new(0.0, 0.0); cfg.n() * cols];
    for &(amplitude, k, l) in components {
        let kernels = Kernels::new(cfg, k, l);
        for (r, dk) in kernels.doppler.iter().enumerate() {
            for (cell, dl) in data[r * cols..(r + 1) * cols].iter_mut().zip(&kernels.delay) {
                *cell += amplitude * dk * dl;
            }
        }
    }
    Csf::new(*cfg, data, noise_floor)
}

/// Accuracy of a set of estimates against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseReport {
    /// `Σ ‖(k̂, l̂) - (k, l)‖² / Σ ‖(k, l)‖²` over all truth paths, in taps.
    /// A truth path without a matched estimate counts as estimated at `(0, 0)`.
    pub index_nmse: f64,
    /// `Σ (|ĥ| - |h|)² / Σ |h|²` over all truth paths; a missed path has `ĥ = 0`.
    pub amplitude_nmse: f64,
    pub matched: usize,
    pub unmatched_truth: usize,
    pub unmatched_estimates: usize,
}

/// Pairs estimates with truth paths by nearest (Doppler, delay) tap
/// distance within a gate of one tap, closest pairs first.
pub fn match_paths(estimates: &[PathEstimate], truth: &PathSet, cfg: &FrameConfig) -> Vec<(usize, usize)> {
    let truth_taps: Vec<(f64, f64)> = truth
        .paths()
        .iter()
        .map(|p| (p.doppler_hz / cfg.doppler_resolution(), p.delay_s / cfg.delay_resolution()))
        .collect();
    let mut candidates = Vec::new();
    for (e, est) in estimates.iter().enumerate() {
        for (t, &(k, l)) in truth_taps.iter().enumerate() {
            let d2 = (est.doppler_taps() - k).powi(2) + (est.delay_taps() - l).powi(2);
            if d2 <= 1.0 {
                candidates.push((d2, e, t));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; estimates.len()];
    let mut used_t = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, e, t) in candidates {
        if !used_e[e] && !used_t[t] {
            used_e[e] = true;
            used_t[t] = true;
            pairs.push((e, t));
        }
    }
    pairs.sort_by_key(|&(_, t)| t);
    pairs
}

/// Index and amplitude NMSE of `estimates` against `truth`. Spurious
/// estimates do not enter the ratios and are only counted.
pub fn nmse(estimates: &[PathEstimate], truth: &PathSet, cfg: &FrameConfig) -> NmseReport {
    let pairs = match_paths(estimates, truth, cfg);
    let (mut index_err, mut index_ref, mut amp_err, mut amp_ref) = (0.0, 0.0, 0.0, 0.0);
    for (t, path) in truth.paths().iter().enumerate() {
        let k = path.doppler_hz / cfg.doppler_resolution();
        let l = path.delay_s / cfg.delay_resolution();
        let (k_hat, l_hat, gain_hat) = match pairs.iter().find(|&&(_, pt)| pt == t) {
            Some(&(e, _)) => (estimates[e].doppler_taps(), estimates[e].delay_taps(), estimates[e].gain),
            None => (0.0, 0.0, 0.0),
        };
        index_err += (k_hat - k).powi(2) + (l_hat - l).powi(2);
        index_ref += k * k + l * l;
        amp_err += (gain_hat - path.gain.norm()).powi(2);
        amp_ref += path.gain.norm_sqr();
    }
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else if den == 0.0 { f64::INFINITY } else { num / den };
    NmseReport {
        index_nmse: ratio(index_err, index_ref),
        amplitude_nmse: ratio(amp_err, amp_ref),
        matched: pairs.len(),
        unmatched_truth: truth.len() - pairs.len(),
        unmatched_estimates: estimates.len() - pairs.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_doppler(dk: f64, k_i: f64, n: usize) -> Complex64 {
        (0..n).map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 * (dk - k_i) / n as f64)).sum()
    }

    #[test]
    fn kernel_special_values() {
        assert_eq!(eq_channel_doppler(&[0], 0.0, 16)[0], Complex64::new(16.0, 0.0));
        assert!(eq_channel_doppler(&[3], 0.0, 16)[0].norm() < 1e-12);
        assert_eq!(eq_channel_delay(&[0], 0.0, 32)[0], Complex64::new(32.0, 0.0));
        assert!(eq_channel_delay(&[5], 2.0, 32)[0].norm() < 1e-12);
        // Removable singularity one period away.
        assert!((eq_channel_doppler(&[16], 0.0, 16)[0] - Complex64::new(16.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn kernels_match_direct_sums() {
        let direct: Complex64 = (0..16).map(|n| Complex64::from_polar(1.0, PI * n as f64 / 16.0)).sum();
        assert!((eq_channel_doppler(&[0], 0.5, 16)[0] - direct).norm() < 1e-12);
        let direct_delay: Complex64 =
            (0..16).map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 * (1.0 - 0.2) / 16.0)).sum();
        assert!((eq_channel_delay(&[1], 0.2, 16)[0] - direct_delay).norm() < 1e-12);
        for k_i in [-3.7, 0.01, 2.5, 9.999_999_999] {
            for dk in -20..20 {
                let got = eq_channel_doppler(&[dk], k_i, 16)[0];
                assert!((got - direct_doppler(dk as f64, k_i, 16)).norm() < 1e-9, "{dk} {k_i}");
            }
        }
    }

    #[test]
    fn kernel_parseval() {
        for k_i in [0.0, 0.3, -4.45, 7.5, 100.123] {
            let grid: Vec<i64> = (0..64).collect();
            let e: f64 = eq_channel_doppler(&grid, k_i, 64).iter().map(|v| v.norm_sqr()).sum();
            assert!((e - 64.0 * 64.0).abs() < 1e-9 * 4096.0);
            let grid: Vec<i64> = (0..128).collect();
            let e: f64 = eq_channel_delay(&grid, k_i, 128).iter().map(|v| v.norm_sqr()).sum();
            assert!((e - 128.0 * 128.0).abs() < 1e-9 * 16384.0);
        }
    }

    #[test]
    fn grid_points() {
        let g = fractional_grid(0.1);
        assert_eq!(g.len(), 11);
        assert!((g[0] + 0.5).abs() < 1e-15 && (g[10] - 0.5).abs() < 1e-12);
        assert_eq!(fractional_grid(0.01).len(), 101);
        assert_eq!(fractional_grid(0.3).len(), 4);
    }

    fn small_cfg() -> FrameConfig {
        FrameConfig::with_defaults(64, 32, 1e6).unwrap()
    }

    #[test]
    fn surface_peaks_at_integer_path() {
        let cfg = small_cfg();
        let g = Complex64::from_polar(0.7, 0.4);
        let csf = model_csf(&cfg, &[(g, 3.0, 5.0)], 0.0).unwrap();
        let est_cfg = EstimatorConfig::new(0.1, 0.1).unwrap();
        let s = matched_filter_surface(&csf, 3, 5, &est_cfg).unwrap();
        let (ci, cj) = (5, 5);
        assert!((s.at(ci, cj).0 - g).norm() < 1e-12);
        assert_eq!(s.best(), (ci, cj));
        for i in 0..s.doppler_offsets.len() {
            for j in 0..s.delay_offsets.len() {
                if (i, j) != (ci, cj) {
                    assert!(s.at(i, j).0.norm() < g.norm());
                }
            }
        }
        let scaled = matched_filter_surface(&csf.scaled(3.0), 3, 5, &est_cfg).unwrap();
        for (a, b) in scaled.amplitude.iter().zip(&s.amplitude) {
            assert!((a - b * 3.0).norm() < 1e-12);
        }
        assert!(matched_filter_surface(&csf, 16, 0, &est_cfg).is_err());
    }

    #[test]
    fn surface_argmax_nearest_grid_point() {
        let cfg = small_cfg();
        let csf = model_csf(&cfg, &[(Complex64::new(1.0, 0.0), -4.3, 6.0)], 0.0).unwrap();
        let s = matched_filter_surface(&csf, -4, 6, &EstimatorConfig::new(0.1, 0.1).unwrap()).unwrap();
        let (i, j) = s.best();
        assert!((s.doppler_offsets[i] + 0.3).abs() < 1e-9);
        assert!(s.delay_offsets[j].abs() < 1e-9);
    }

    #[test]
    fn single_integer_path_exact() {
        let cfg = small_cfg();
        let g = Complex64::from_polar(0.25, -2.0);
        let csf = model_csf(&cfg, &[(g, -7.0, 9.0)], 0.0).unwrap();
        let est = estimate_paths(&csf, &EstimatorConfig::default()).unwrap();
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].integer_taps, (-7, 9));
        assert_eq!(est[0].fractional_taps, (0.0, 0.0));
        assert!((est[0].gain - 0.25).abs() < 1e-6 * 0.25);
    }

    #[test]
    fn on_grid_fractional_path_consistency() {
        let cfg = small_cfg();
        let g = Complex64::from_polar(1.3, 0.9);
        let (k, l) = (5.0 - 0.4, 2.0 + 0.25);
        let csf = model_csf(&cfg, &[(g, k, l)], 0.0).unwrap();
        let est_cfg = EstimatorConfig::new(0.05, 0.1).unwrap();
        let est = estimate_paths(&csf, &est_cfg).unwrap();
        assert_eq!(est.len(), 1);
        let e = est[0];
        assert_eq!(e.integer_taps, (5, 2));
        assert!((e.fractional_taps.0 + 0.4).abs() < 1e-9 && (e.fractional_taps.1 - 0.25).abs() < 1e-9);
        assert!((e.amplitude - g).norm() < 1e-6 * g.norm());
        assert!((e.phase + 2.0 * PI * e.doppler_hz * e.delay_s).abs() == 0.0);
        let coarse = estimate_paths(&csf, &EstimatorConfig { search: SearchMode::CoarseToFine, ..est_cfg }).unwrap();
        assert_eq!(coarse.len(), 1);
        assert!((coarse[0].amplitude - g).norm() < 1e-6 * g.norm());
    }

    #[test]
    fn tie_resolves_to_lower_edge() {
        let grid = fractional_grid(0.5);
        let mut score = vec![0.0; 9];
        score[8] = 1.0;
        score[0] = 1.0;
        let s = MatchedSurface {
            k_i: 0,
            l_i: 0,
            doppler_offsets: grid.clone(),
            delay_offsets: grid,
            amplitude: vec![Complex64::new(0.0, 0.0); 9],
            score,
        };
        assert_eq!(s.best(), (0, 0));

        let cfg = small_cfg();
        let csf = model_csf(&cfg, &[(Complex64::new(1.0, 0.0), 2.5, 4.0)], 0.0).unwrap();
        let est = estimate_paths(&csf, &EstimatorConfig::new(0.5, 0.5).unwrap()).unwrap();
        assert!((est[0].doppler_taps() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn sic_reduces_residual_energy() {
        let cfg = small_cfg();
        let comps = [
            (Complex64::from_polar(1.0, 0.1), 1.23, 3.4),
            (Complex64::from_polar(0.5, 2.0), -6.61, 10.05),
            (Complex64::from_polar(0.3, -1.0), 9.5, 1.7),
        ];
        let csf = model_csf(&cfg, &comps, 0.0).unwrap();
        let mut energy = csf.energy();
        for max_paths in 1..=3 {
            let est_cfg = EstimatorConfig { max_paths, ..EstimatorConfig::new(0.05, 0.05).unwrap() };
            let (est, residual) = estimate_paths_with_residual(&csf, &est_cfg).unwrap();
            assert_eq!(est.len(), max_paths);
            assert!(residual.energy() < energy);
            energy = residual.energy();
        }
    }

    #[test]
    fn scaling_keeps_taps() {
        let cfg = small_cfg();
        let comps = [(Complex64::from_polar(1.0, 0.5), 3.27, 4.61), (Complex64::from_polar(0.4, 1.5), -8.1, 12.2)];
        let csf = model_csf(&cfg, &comps, 1e-6).unwrap();
        let est_cfg = EstimatorConfig { max_paths: 4, ..EstimatorConfig::new(0.1, 0.1).unwrap() };
        let base = estimate_paths(&csf, &est_cfg).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let scaled = estimate_paths(&csf.scaled(c), &est_cfg).unwrap();
            assert_eq!(scaled.len(), base.len());
            for (a, b) in scaled.iter().zip(&base) {
                assert_eq!(a.integer_taps, b.integer_taps);
                assert_eq!(a.fractional_taps, b.fractional_taps);
                assert!((a.gain - c * b.gain).abs() < 1e-9 * c * b.gain);
            }
        }
    }

    #[test]
    fn threshold_stops_extraction() {
        let cfg = small_cfg();
        let csf = model_csf(&cfg, &[(Complex64::new(0.01, 0.0), 0.0, 0.0)], 0.0).unwrap();
        let est = estimate_paths(&csf, &EstimatorConfig { threshold: Threshold::Absolute(1e-3), ..Default::default() })
            .unwrap();
        assert!(est.is_empty());
    }

    #[test]
    fn config_validation_and_serde() {
        assert!(EstimatorConfig::new(0.0, 0.1).is_err());
        assert!(EstimatorConfig::new(0.1, 0.6).is_err());
        assert!(EstimatorConfig { max_paths: 0, ..Default::default() }.validate().is_err());
        let cfg: EstimatorConfig =
            serde_json::from_str(r#"{"delay_step": 0.05, "threshold": {"absolute": 0.001}}"#).unwrap();
        assert_eq!(cfg.delay_step, 0.05);
        assert_eq!(cfg.doppler_step, 0.01);
        assert_eq!(cfg.threshold, Threshold::Absolute(0.001));
        let json = serde_json::to_string(&EstimatorConfig::default()).unwrap();
        assert_eq!(serde_json::from_str::<EstimatorConfig>(&json).unwrap(), EstimatorConfig::default());
    }

    #[test]
    fn nmse_formulas() {
        let cfg = small_cfg();
        let (dv, dt) = (cfg.doppler_resolution(), cfg.delay_resolution());
        let truth = PathSet::new(vec![Path::new(Complex64::new(1.0, 0.0), 8.0 * dt, 4.0 * dv).unwrap()]).unwrap();
        let perfect = [PathEstimate::from_path(&cfg, &truth.paths()[0])];
        let r = nmse(&perfect, &truth, &cfg);
        assert_eq!((r.index_nmse, r.amplitude_nmse, r.matched), (0.0, 0.0, 1));

        let off = [PathEstimate::from_taps(&cfg, 4.1, 8.0, Complex64::new(1.0, 0.0))];
        let r = nmse(&off, &truth, &cfg);
        assert!((r.index_nmse - 0.01 / 80.0).abs() < 1e-12);

        let far = [PathEstimate::from_taps(&cfg, 6.0, 8.0, Complex64::new(1.0, 0.0))];
        let r = nmse(&far, &truth, &cfg);
        assert_eq!((r.matched, r.unmatched_truth, r.unmatched_estimates), (0, 1, 1));
        assert_eq!((r.index_nmse, r.amplitude_nmse), (1.0, 1.0));
        assert_eq!(nmse(&[], &truth, &cfg).amplitude_nmse, 1.0);

        // A spurious extra estimate leaves the ratios untouched.
        let extra = [perfect[0], far[0]];
        let r = nmse(&extra, &truth, &cfg);
        assert_eq!((r.index_nmse, r.unmatched_estimates), (0.0, 1));
    }
}
