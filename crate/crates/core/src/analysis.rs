//! Channel statistics: PDP, DPSD, MPC count, K-factor and RMS spreads.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::PathEstimate;
use crate::ratio_db;
use crate::receiver::Csf;

/// Paths weaker than the strongest one by this many dB or more are not counted as MPCs.
pub const MPC_WINDOW_DB: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Delay,
    Doppler,
}

/// Power over a strictly increasing delay (s) or Doppler (Hz) axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub axis: Vec<f64>,
    pub power: Vec<f64>,
    pub kind: ProfileKind,
}

impl PowerProfile {
    pub fn new(axis: Vec<f64>, power: Vec<f64>, kind: ProfileKind) -> Result<Self> {
        if axis.len() != power.len() {
            return Err(Error::LengthMismatch(format!("{} axis points, {} powers", axis.len(), power.len())));
        }
        if axis.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less)) {
            return Err(Error::InvalidArgument("profile axis must be strictly increasing".into()));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument("profile powers must be finite and >= 0".into()));
        }
        Ok(PowerProfile { axis, power, kind })
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Axis value of the strongest bin.
    pub fn peak_axis(&self) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (&a, &p) in self.axis.iter().zip(&self.power) {
            match best {
                Some((_, bp)) if p <= bp => {}
                _ => best = Some((a, p)),
            }
        }
        best.map(|(a, _)| a)
    }
}

/// PDP of a CSF: total power of each delay column.
pub fn pdp_from_csf(csf: &Csf) -> PowerProfile {
    let cols = csf.cols();
    let mut power = vec![0.0; cols];
    for row in csf.data().chunks(cols) {
        for (p, v) in power.iter_mut().zip(row) {
            *p += v.norm_sqr();
        }
    }
    let axis = (0..cols).map(|d| csf.delay_s(d)).collect();
    PowerProfile { axis, power, kind: ProfileKind::Delay }
}

/// DPSD of a CSF: total power of each Doppler row, rows in ascending Doppler.
pub fn dpsd_from_csf(csf: &Csf) -> PowerProfile {
    let mut rows: Vec<(f64, f64)> = csf
        .data()
        .chunks(csf.cols())
        .enumerate()
        .map(|(r, row)| (csf.doppler_hz(r), row.iter().map(|v| v.norm_sqr()).sum()))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (axis, power) = rows.into_iter().unzip();
    PowerProfile { axis, power, kind: ProfileKind::Doppler }
}

fn binned(values: impl Iterator<Item = (f64, f64)>, bin: f64, kind: ProfileKind) -> Result<PowerProfile> {
    if !(bin.is_finite() && bin > 0.0) {
        return Err(Error::InvalidArgument(format!("bin width {bin} must be finite and > 0")));
    }
    let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
    let mut any = false;
    for (x, p) in values {
        any = true;
        *bins.entry((x / bin).round() as i64).or_default() += p;
    }
    if !any {
        return Err(Error::InvalidArgument("no paths to profile".into()));
    }
    let (axis, power) = bins.into_iter().map(|(i, p)| (i as f64 * bin, p)).unzip();
    Ok(PowerProfile { axis, power, kind })
}

/// PDP of extracted paths: impulses of power `|ĥ|²` binned at `bin_s`.
pub fn pdp_from_estimates(estimates: &[PathEstimate], bin_s: f64) -> Result<PowerProfile> {
    binned(estimates.iter().map(|e| (e.delay_s, e.power())), bin_s, ProfileKind::Delay)
}

/// DPSD of extracted paths: impulses of power `|ĥ|²` binned at `bin_hz`.
pub fn dpsd_from_estimates(estimates: &[PathEstimate], bin_hz: f64) -> Result<PowerProfile> {
    binned(estimates.iter().map(|e| (e.doppler_hz, e.power())), bin_hz, ProfileKind::Doppler)
}

/// Number of powers strictly above `max - 20 dB`.
pub fn count_mpcs_powers(powers: &[f64]) -> usize {
    let max = powers.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let max_db = 10.0 * max.log10();
    powers.iter().filter(|&&p| p > 0.0 && 10.0 * p.log10() > max_db - MPC_WINDOW_DB).count()
}

pub fn count_mpcs(estimates: &[PathEstimate]) -> usize {
    count_mpcs_powers(&estimates.iter().map(PathEstimate::power).collect::<Vec<_>>())
}

/// `10·log10(P_max / Σ P_others)`; `+∞` for a single path.
pub fn k_factor_powers(powers: &[f64]) -> Result<f64> {
    if powers.is_empty() {
        return Err(Error::InvalidArgument("K-factor of an empty path list".into()));
    }
    let (max_index, max) = powers
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, p)| if p > best.1 { (i, p) } else { best });
    let others: f64 = powers.iter().enumerate().filter(|(i, _)| *i != max_index).map(|(_, p)| p).sum();
    Ok(ratio_db(max, others))
}

pub fn k_factor(estimates: &[PathEstimate]) -> Result<f64> {
    k_factor_powers(&estimates.iter().map(PathEstimate::power).collect::<Vec<_>>())
}

fn rms_spread(profile: &PowerProfile, kind: ProfileKind) -> Result<f64> {
    if profile.kind != kind {
        return Err(Error::InvalidArgument(format!("expected a {kind:?} profile, got {:?}", profile.kind)));
    }
    let total = profile.total_power();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidArgument("profile has zero power".into()));
    }
    let mean = profile.axis.iter().zip(&profile.power).map(|(x, p)| x * p).sum::<f64>() / total;
    let var = profile.axis.iter().zip(&profile.power).map(|(x, p)| p * (x - mean).powi(2)).sum::<f64>() / total;
    Ok(var.max(0.0).sqrt())
}

/// Square root of the second central moment of a PDP.
pub fn rms_delay_spread(profile: &PowerProfile) -> Result<f64> {
    rms_spread(profile, ProfileKind::Delay)
}

/// Square root of the second central moment of a DPSD.
pub fn rms_doppler_spread(profile: &PowerProfile) -> Result<f64> {
    rms_spread(profile, ProfileKind::Doppler)
}

/// Per-frame statistics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStatistics {
    pub frame_index: usize,
    pub n_mpcs: usize,
    pub kf_db: f64,
    pub rms_ds_s: f64,
    pub rms_dps_hz: f64,
}

/// Statistics of one frame's estimates, with profiles binned at `delay_bin_s` / `doppler_bin_hz`.
pub fn frame_statistics(
    frame_index: usize,
    estimates: &[PathEstimate],
    delay_bin_s: f64,
    doppler_bin_hz: f64,
) -> Result<FrameStatistics> {
    Ok(FrameStatistics {
        frame_index,
        n_mpcs: count_mpcs(estimates),
        kf_db: k_factor(estimates)?,
        rms_ds_s: rms_delay_spread(&pdp_from_estimates(estimates, delay_bin_s)?)?,
        rms_dps_hz: rms_doppler_spread(&dpsd_from_estimates(estimates, doppler_bin_hz)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::model_csf;
    use crate::frame::FrameConfig;
    use num_complex::Complex64;

    fn db(p: f64) -> f64 {
        10f64.powf(p / 10.0)
    }

    #[test]
    fn mpc_counts() {
        assert_eq!(count_mpcs_powers(&[db(0.0), db(-5.0), db(-10.0)]), 3);
        assert_eq!(count_mpcs_powers(&[db(0.0), db(-19.9), db(-20.1)]), 2);
        assert_eq!(count_mpcs_powers(&[0.3]), 1);
        assert_eq!(count_mpcs_powers(&[]), 0);
    }

    #[test]
    fn k_factors() {
        assert!(k_factor_powers(&[1.0, 1.0]).unwrap().abs() < 1e-12);
        assert!(k_factor_powers(&[1.0, 0.5, 0.5]).unwrap().abs() < 1e-12);
        assert_eq!(k_factor_powers(&[2.0]).unwrap(), f64::INFINITY);
        assert!(k_factor_powers(&[]).is_err());
    }

    #[test]
    fn rms_spreads() {
        let single = PowerProfile::new(vec![3e-6], vec![2.0], ProfileKind::Delay).unwrap();
        assert_eq!(rms_delay_spread(&single).unwrap(), 0.0);
        let two = PowerProfile::new(vec![0.0, 1e-6], vec![1.0, 1.0], ProfileKind::Delay).unwrap();
        assert!((rms_delay_spread(&two).unwrap() - 0.5e-6).abs() < 1e-18);
        let dop = PowerProfile::new(vec![-100.0, 100.0], vec![1.0, 1.0], ProfileKind::Doppler).unwrap();
        assert!((rms_doppler_spread(&dop).unwrap() - 100.0).abs() < 1e-12);
        let taps = [0.0, 2e-6, 4e-6];
        let powers = [db(0.0), db(-5.0), db(-10.0)];
        let total: f64 = powers.iter().sum();
        let mean: f64 = taps.iter().zip(&powers).map(|(t, p)| t * p).sum::<f64>() / total;
        let second: f64 = taps.iter().zip(&powers).map(|(t, p)| t * t * p).sum::<f64>() / total;
        let three = PowerProfile::new(taps.to_vec(), powers.to_vec(), ProfileKind::Delay).unwrap();
        let ds = rms_delay_spread(&three).unwrap();
        assert!((ds - (second - mean * mean).sqrt()).abs() < 1e-18);
        assert!((ds - 1.2212e-6).abs() < 1e-10);
        assert!(rms_delay_spread(&dop).is_err());
        let empty = PowerProfile::new(vec![0.0], vec![0.0], ProfileKind::Delay).unwrap();
        assert!(rms_delay_spread(&empty).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(PowerProfile::new(vec![1.0, 1.0], vec![1.0, 1.0], ProfileKind::Delay).is_err());
        assert!(PowerProfile::new(vec![1.0], vec![-1.0], ProfileKind::Delay).is_err());
        assert!(PowerProfile::new(vec![1.0], vec![], ProfileKind::Delay).is_err());
    }

    #[test]
    fn csf_and_estimate_profiles_agree() {
        let cfg = FrameConfig::with_defaults(64, 32, 1e6).unwrap();
        let comps = [
            (Complex64::new(1.0, 0.0), 0.0, 0.0),
            (Complex64::from_polar(db(-5.0).sqrt(), 1.0), -3.0, 5.0),
            (Complex64::from_polar(db(-10.0).sqrt(), 2.0), 6.0, 11.0),
        ];
        let csf = model_csf(&cfg, &comps, 0.0).unwrap();
        let estimates: Vec<PathEstimate> =
            comps.iter().map(|&(a, k, l)| PathEstimate::from_taps(&cfg, k, l, a)).collect();
        let from_csf = pdp_from_csf(&csf);
        let from_est = pdp_from_estimates(&estimates, cfg.delay_resolution()).unwrap();
        for (t, p) in from_est.axis.iter().zip(&from_est.power) {
            let col = (t / cfg.delay_resolution()).round() as usize;
            assert!((10.0 * (from_csf.power[col] / p).log10()).abs() < 0.2);
        }
        let dpsd_csf = dpsd_from_csf(&csf);
        assert!((dpsd_csf.total_power() - csf.energy()).abs() < 1e-12);
        assert!((from_csf.total_power() - csf.energy()).abs() < 1e-12);
        assert!(dpsd_csf.axis.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_path_profiles() {
        let cfg = FrameConfig::with_defaults(64, 32, 1e6).unwrap();
        let est = [PathEstimate::from_taps(&cfg, 0.0, 0.0, Complex64::new(1.0, 0.0))];
        let pdp = pdp_from_estimates(&est, 1e-9).unwrap();
        assert_eq!((pdp.axis.clone(), pdp.power.clone()), (vec![0.0], vec![1.0]));
        let dpsd = dpsd_from_estimates(&est, 1.0).unwrap();
        assert_eq!((dpsd.axis, dpsd.power), (vec![0.0], vec![1.0]));
        assert!(pdp_from_estimates(&[], 1e-9).is_err());
        let stats = frame_statistics(7, &est, 1e-9, 1.0).unwrap();
        assert_eq!((stats.frame_index, stats.n_mpcs, stats.kf_db), (7, 1, f64::INFINITY));
    }
}
