//! Reference channel configurations and the seeded experiment runners built
//! on them. Every runner is a pure function of its arguments.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{frame_statistics, FrameStatistics};
use crate::channel::{add_awgn, add_noise, apply_cfo, apply_paths, pure_doppler_paths, rayleigh_tap_paths, Path, PathSet};
use crate::error::{Error, Result};
use crate::estimation::{estimate_paths, nmse, EstimatorConfig, PathEstimate};
use crate::frame::FrameConfig;
use crate::receiver::{
    default_search_window, default_sync_length, dynamic_range, extract_csf, find_frame_start, ofdm_reference_sounder,
    sliding_correlation, sync_gain, synchronize, Csf,
};
use crate::waveform::{build_pattern, modulate, papr, sounding_frame, IqBuffer, SoundingPattern};

/// Tap delays of the three-path pure-Doppler channel.
pub const PURE_DOPPLER_DELAYS_S: [f64; 3] = [0.0, 1.25e-6, 2.49e-6];
pub const PURE_DOPPLER_DOPPLERS_HZ: [f64; 3] = [0.0, -610.35, 1251.22];
pub const PURE_DOPPLER_POWERS_DB: [f64; 3] = [0.0, -5.0, -10.0];

/// Tap delays of the three-tap Rayleigh channel.
pub const RAYLEIGH_DELAYS_S: [f64; 3] = [0.0, 2e-6, 4e-6];
pub const RAYLEIGH_POWERS_DB: [f64; 3] = [0.0, -5.0, -10.0];
pub const RAYLEIGH_MAX_DOPPLERS_HZ: [f64; 3] = [953.67, 476.84, 238.42];
/// Sinusoids per Rayleigh tap.
pub const RAYLEIGH_SINUSOIDS: usize = 64;

/// (2048, 256) frame at 80 MHz.
pub fn pure_doppler_frame() -> FrameConfig {
    FrameConfig::with_defaults(2048, 256, 80e6).expect("valid reference frame")
}

pub fn pure_doppler_channel() -> PathSet {
    pure_doppler_paths(&PURE_DOPPLER_DELAYS_S, &PURE_DOPPLER_DOPPLERS_HZ, &PURE_DOPPLER_POWERS_DB)
        .expect("valid reference channel")
}

/// (4096, 2048) frame at 100 MHz.
pub fn rayleigh_frame() -> FrameConfig {
    FrameConfig::with_defaults(4096, 2048, 100e6).expect("valid reference frame")
}

pub fn rayleigh_channel(seed: u64) -> PathSet {
    rayleigh_tap_paths(&RAYLEIGH_DELAYS_S, &RAYLEIGH_POWERS_DB, &RAYLEIGH_MAX_DOPPLERS_HZ, RAYLEIGH_SINUSOIDS, seed)
        .expect("valid reference channel")
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn require_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaprRow {
    pub m: usize,
    pub n: usize,
    pub designed_db: f64,
    pub single_pilot_db: f64,
    pub full_pn_db: f64,
}

/// PAPR of the three layouts for each `M` with `N = M/2`.
pub fn papr_sweep(ms: &[usize], bandwidth_hz: f64) -> Result<Vec<PaprRow>> {
    ms.iter()
        .map(|&m| {
            let cfg = FrameConfig::with_defaults(m, m / 2, bandwidth_hz)?;
            let of = |p| -> Result<f64> { papr(&modulate(&build_pattern(&cfg, p)?)) };
            Ok(PaprRow {
                m,
                n: m / 2,
                designed_db: of(SoundingPattern::Designed)?,
                single_pilot_db: of(SoundingPattern::SinglePilot)?,
                full_pn_db: of(SoundingPattern::FullPn)?,
            })
        })
        .collect()
}

/// Isolated received burst: `offset` zeros, the frame, trailing zeros up to
/// the default search span, plus white noise at `snr_db` relative to the
/// frame's own mean power.
pub fn sync_burst(cfg: &FrameConfig, frame: &IqBuffer, offset: usize, snr_db: f64, seed: u64) -> Result<IqBuffer> {
    let span = default_sync_length(cfg) + default_search_window(cfg) - 1;
    if offset + frame.len() > span {
        return Err(Error::InvalidArgument(format!("offset {offset} leaves no room for the frame in {span} samples")));
    }
    let burst = frame.padded(offset, span - offset - frame.len());
    if snr_db == f64::INFINITY {
        return Ok(burst);
    }
    add_noise(&burst, frame.mean_power() / 10f64.powf(snr_db / 10.0), seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncTrial {
    pub seed: u64,
    pub offset: usize,
    pub detected: usize,
    pub gain_db: f64,
}

/// One seeded synchronization trial: a random offset within one frame,
/// default sync length, window and guard.
pub fn sync_trial(cfg: &FrameConfig, frame: &IqBuffer, snr_db: f64, seed: u64) -> Result<SyncTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = rng.random_range(0..cfg.frame_len());
    let rx = sync_burst(cfg, frame, offset, snr_db, rng.next_u64())?;
    let l = default_sync_length(cfg);
    let sync = frame.slice(0, l)?;
    let corr = sliding_correlation(&rx, &sync, default_search_window(cfg))?;
    Ok(SyncTrial { seed, offset, detected: find_frame_start(&corr)?, gain_db: sync_gain(&corr, l)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncGainRow {
    pub m: usize,
    pub n: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_gain_db: f64,
    pub detection_rate: f64,
}

/// Mean sync gain and detection rate over `seeds` for each size and SNR.
pub fn sync_gain_sweep(
    sizes: &[(usize, usize)],
    snrs_db: &[f64],
    bandwidth_hz: f64,
    seeds: &[u64],
) -> Result<Vec<SyncGainRow>> {
    require_seeds(seeds)?;
    let mut rows = Vec::new();
    for &(m, n) in sizes {
        let cfg = FrameConfig::with_defaults(m, n, bandwidth_hz)?;
        let frame = sounding_frame(&cfg)?;
        for &snr_db in snrs_db {
            let trials = seeds.iter().map(|&s| sync_trial(&cfg, &frame, snr_db, s)).collect::<Result<Vec<_>>>()?;
            let hits = trials.iter().filter(|t| t.detected == t.offset).count();
            rows.push(SyncGainRow {
                m,
                n,
                snr_db,
                trials: trials.len(),
                mean_gain_db: mean(trials.iter().map(|t| t.gain_db)),
                detection_rate: hits as f64 / trials.len() as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfoRow {
    pub cfo_bins: f64,
    pub cfo_hz: f64,
    pub dd_dynamic_range_db: f64,
    pub dd_peak_doppler_tap: i64,
    pub ofdm_dynamic_range_db: f64,
}

/// Dynamic range of the DD sounder and of the OFDM reference (`cfg.m()`
/// subcarriers) under carrier offsets of `multiples · Δν`, in an ideal
/// channel. Values are means over `seeds`; every offset reuses the same
/// noise seeds. The peak tap is taken from the first seed.
pub fn dynamic_range_cfo(cfg: &FrameConfig, multiples: &[f64], snr_db: f64, seeds: &[u64]) -> Result<Vec<CfoRow>> {
    require_seeds(seeds)?;
    let frame = sounding_frame(cfg)?;
    let channel = PathSet::identity();
    multiples
        .iter()
        .map(|&bins| {
            let cfo_hz = bins * cfg.doppler_resolution();
            let mut dd = Vec::with_capacity(seeds.len());
            let mut ofdm = Vec::with_capacity(seeds.len());
            let mut peak_tap = None;
            for &seed in seeds {
                let rx = add_awgn(&apply_cfo(&frame, cfo_hz), snr_db, seed)?;
                let csf = extract_csf(&rx, cfg)?;
                if peak_tap.is_none() {
                    peak_tap = Some(csf.doppler_tap(csf.peak().0));
                }
                dd.push(dynamic_range(&csf));
                ofdm.push(ofdm_reference_sounder(&channel, cfo_hz, snr_db, cfg.m(), cfg.sample_rate(), seed)?.1);
            }
            Ok(CfoRow {
                cfo_bins: bins,
                cfo_hz,
                dd_dynamic_range_db: mean(dd),
                dd_peak_doppler_tap: peak_tap.unwrap_or_default(),
                ofdm_dynamic_range_db: mean(ofdm),
            })
        })
        .collect()
}

/// Two-path test channel for the NMSE sweep: 0 dB and -3 dB paths with
/// random phases, integer delays inside `[4, l_tau/2 - 4)` at least eight
/// taps apart, integer Dopplers inside `±(N/2 - 4)`, and independent
/// fractional offsets in `[-0.5, 0.5)` on both axes. Delays stay below
/// `l_tau/2` so that delayed PN chips cover less than half of the guard
/// band used for the noise-floor estimate.
pub fn nmse_channel(cfg: &FrameConfig, seed: u64) -> Result<PathSet> {
    let l_max = (cfg.l_tau() / 2) as i64 - 4;
    let k_max = (cfg.n() / 2) as i64 - 4;
    if l_max < 13 || k_max < 1 {
        return Err(Error::InvalidFrame(format!("frame {}x{} too small for the two-path channel", cfg.m(), cfg.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l1 = rng.random_range(4..l_max - 8);
    let l2 = rng.random_range(l1 + 8..l_max);
    let mut paths = Vec::with_capacity(2);
    for (l, power_db) in [(l1, 0.0), (l2, -3.0)] {
        let k = rng.random_range(-k_max..k_max);
        let l_frac: f64 = rng.random_range(-0.5..0.5);
        let k_frac: f64 = rng.random_range(-0.5..0.5);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        paths.push(Path::new(
            Complex64::from_polar(10f64.powf(power_db / 20.0), phase),
            (l as f64 + l_frac) * cfg.delay_resolution(),
            (k as f64 + k_frac) * cfg.doppler_resolution(),
        )?);
    }
    PathSet::new(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub snr_db: f64,
    pub step: f64,
    pub trials: usize,
    pub index_nmse: f64,
    pub amplitude_nmse: f64,
    pub missed_paths: usize,
    pub spurious_paths: usize,
}

/// Mean NMSE of the estimator over `seeds` for every (SNR, step) pair.
/// Both steps are set to `step`; `max_paths` is set to the true path count.
/// Channels and noise depend only on the seed, so every grid point sees
/// the same realizations.
pub fn nmse_sweep(
    cfg: &FrameConfig,
    snrs_db: &[f64],
    steps: &[f64],
    seeds: &[u64],
    base: &EstimatorConfig,
) -> Result<Vec<NmseRow>> {
    require_seeds(seeds)?;
    let frame = sounding_frame(cfg)?;
    let cases = seeds
        .iter()
        .map(|&seed| {
            let channel = nmse_channel(cfg, seed)?;
            let clean = apply_paths(&frame, &channel)?;
            Ok((seed, channel, clean))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &step in steps {
        let est_cfg = EstimatorConfig { delay_step: step, doppler_step: step, max_paths: 2, ..*base };
        est_cfg.validate()?;
        for &snr_db in snrs_db {
            let (mut index, mut amplitude, mut missed, mut spurious) = (0.0, 0.0, 0, 0);
            for (seed, channel, clean) in &cases {
                let rx = add_awgn(clean, snr_db, seed.wrapping_add(0x5eed))?;
                let estimates = estimate_paths(&extract_csf(&rx, cfg)?, &est_cfg)?;
                let report = nmse(&estimates, channel, cfg);
                index += report.index_nmse;
                amplitude += report.amplitude_nmse;
                missed += report.unmatched_truth;
                spurious += report.unmatched_estimates;
            }
            let trials = cases.len();
            rows.push(NmseRow {
                snr_db,
                step,
                trials,
                index_nmse: index / trials as f64,
                amplitude_nmse: amplitude / trials as f64,
                missed_paths: missed,
                spurious_paths: spurious,
            });
        }
    }
    Ok(rows)
}

/// Strongest CSF power within one tap of `(doppler_taps, delay_taps)`.
pub fn local_peak_power(csf: &Csf, doppler_taps: f64, delay_taps: f64) -> f64 {
    let k0 = doppler_taps.round() as i64;
    let l0 = delay_taps.round() as i64;
    let mut best = 0.0f64;
    for dk in -1..=1 {
        for dl in -1..=1 {
            let l = l0 + dl;
            if l < 0 || l as usize >= csf.cols() {
                continue;
            }
            best = best.max(csf.get(csf.row_of(k0 + dk), l as usize).norm_sqr());
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureDopplerReport {
    pub csf: Csf,
    pub estimates: Vec<PathEstimate>,
    /// Raw CSF level near each true path relative to the first path, dB.
    pub raw_relative_db: Vec<f64>,
}

/// Noiseless run of the pure-Doppler channel through the full chain.
pub fn verify_pure_doppler(est_cfg: &EstimatorConfig) -> Result<PureDopplerReport> {
    let cfg = pure_doppler_frame();
    let channel = pure_doppler_channel();
    let csf = extract_csf(&apply_paths(&sounding_frame(&cfg)?, &channel)?, &cfg)?;
    let levels: Vec<f64> = channel
        .paths()
        .iter()
        .map(|p| local_peak_power(&csf, p.doppler_hz / cfg.doppler_resolution(), p.delay_s / cfg.delay_resolution()))
        .collect();
    let raw_relative_db = levels.iter().map(|&p| 10.0 * (p / levels[0]).log10()).collect();
    let estimates = estimate_paths(&csf, est_cfg)?;
    Ok(PureDopplerReport { csf, estimates, raw_relative_db })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeReport {
    pub delay_s: f64,
    /// Ridge power summed over Doppler relative to the first ridge, dB.
    pub relative_power_db: f64,
    pub doppler_low_hz: f64,
    pub doppler_high_hz: f64,
    /// Ridge power per signed Doppler tap, averaged over frames.
    pub doppler_power: Vec<f64>,
}

/// Relative threshold, in dB below a ridge's strongest row, that marks the
/// edge of its Doppler support.
pub const RIDGE_EDGE_DB: f64 = -10.0;

/// Delay ridges of the Rayleigh channel, averaged over one independent
/// fading realization per seed. Noiseless.
pub fn verify_rayleigh(seeds: &[u64]) -> Result<Vec<RidgeReport>> {
    require_seeds(seeds)?;
    let cfg = rayleigh_frame();
    let frame = sounding_frame(&cfg)?;
    let columns: Vec<usize> =
        RAYLEIGH_DELAYS_S.iter().map(|&d| (d / cfg.delay_resolution()).round() as usize).collect();
    let mut power = vec![vec![0.0; cfg.n()]; columns.len()];
    for &seed in seeds {
        let csf = extract_csf(&apply_paths(&frame, &rayleigh_channel(seed))?, &cfg)?;
        for (ridge, &col) in power.iter_mut().zip(&columns) {
            for (row, p) in ridge.iter_mut().enumerate() {
                *p += csf.get(row, col).norm_sqr() / seeds.len() as f64;
            }
        }
    }
    let totals: Vec<f64> = power.iter().map(|r| r.iter().sum()).collect();
    let k_p = cfg.k_p() as i64;
    Ok(power
        .into_iter()
        .zip(&totals)
        .zip(RAYLEIGH_DELAYS_S)
        .map(|((doppler_power, &total), delay_s)| {
            let peak = doppler_power.iter().copied().fold(0.0, f64::max);
            let level = peak * 10f64.powf(RIDGE_EDGE_DB / 10.0);
            let above: Vec<i64> =
                (0..doppler_power.len()).filter(|&r| doppler_power[r] >= level).map(|r| r as i64 - k_p).collect();
            let dv = cfg.doppler_resolution();
            RidgeReport {
                delay_s,
                relative_power_db: 10.0 * (total / totals[0]).log10(),
                doppler_low_hz: above.first().copied().unwrap_or_default() as f64 * dv,
                doppler_high_hz: above.last().copied().unwrap_or_default() as f64 * dv,
                doppler_power,
            }
        })
        .collect())
}

/// Received capture: `lead` zeros, the sounding frame through `channel`,
/// an optional carrier offset, and white noise at `snr_db` relative to the
/// channel output power. Enough trailing zeros are appended for the default
/// search window.
pub fn synthetic_capture(
    cfg: &FrameConfig,
    channel: &PathSet,
    snr_db: f64,
    cfo_hz: f64,
    lead: usize,
    seed: u64,
) -> Result<IqBuffer> {
    let faded = apply_cfo(&apply_paths(&sounding_frame(cfg)?, channel)?, cfo_hz);
    let span = (default_sync_length(cfg) + default_search_window(cfg) - 1).max(lead + faded.len());
    let burst = faded.padded(lead, span - lead - faded.len());
    if snr_db == f64::INFINITY {
        return Ok(burst);
    }
    add_noise(&burst, faded.mean_power() / 10f64.powf(snr_db / 10.0), seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundResult {
    pub frame_start: usize,
    pub sync_gain_db: f64,
    pub csf: Csf,
    pub estimates: Vec<PathEstimate>,
    pub statistics: Option<FrameStatistics>,
}

/// Full receive chain on one capture: synchronization, CSF extraction,
/// path estimation and per-frame statistics. Statistics are `None` when
/// no path is detected.
pub fn sound(rx: &IqBuffer, cfg: &FrameConfig, est_cfg: &EstimatorConfig, frame_index: usize) -> Result<SoundResult> {
    let frame = sounding_frame(cfg)?;
    let sync_length = default_sync_length(cfg);
    if rx.len() < cfg.frame_len() {
        return Err(Error::ShortBuffer { needed: cfg.frame_len(), got: rx.len() });
    }
    let window = default_search_window(cfg).min(rx.len() - cfg.frame_len() + 1);
    let (frame_start, corr) = synchronize(rx, &frame, sync_length, window)?;
    let guard = sync_length.min(corr.values.len().saturating_sub(1) / 2);
    let sync_gain_db = sync_gain(&corr, guard)?;
    let csf = extract_csf(&rx.slice(frame_start, cfg.frame_len())?, cfg)?;
    let estimates = estimate_paths(&csf, est_cfg)?;
    let statistics = if estimates.is_empty() {
        None
    } else {
        Some(frame_statistics(frame_index, &estimates, cfg.delay_resolution(), cfg.doppler_resolution())?)
    };
    Ok(SoundResult { frame_start, sync_gain_db, csf, estimates, statistics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_channels() {
        let pd = pure_doppler_channel();
        assert_eq!(pd.len(), 3);
        assert!((pd.paths()[2].gain_db() + 10.0).abs() < 1e-12);
        let ray = rayleigh_channel(3);
        assert_eq!(ray.len(), 3 * RAYLEIGH_SINUSOIDS);
        assert_eq!(ray, rayleigh_channel(3));
        assert!((rayleigh_frame().doppler_resolution() - 11.920_928_955).abs() < 1e-6);
    }

    #[test]
    fn nmse_channel_layout() {
        let cfg = FrameConfig::with_defaults(256, 128, 10e6).unwrap();
        for seed in 0..200 {
            let ch = nmse_channel(&cfg, seed).unwrap();
            let l: Vec<f64> = ch.paths().iter().map(|p| p.delay_s / cfg.delay_resolution()).collect();
            let k: Vec<f64> = ch.paths().iter().map(|p| p.doppler_hz / cfg.doppler_resolution()).collect();
            assert!(l[0] >= 3.5 && l[1] < 28.5 && l[1] - l[0] >= 7.0, "{l:?}");
            assert!(k.iter().all(|k| k.abs() <= 60.5), "{k:?}");
        }
        assert!(nmse_channel(&FrameConfig::with_defaults(32, 16, 1e6).unwrap(), 0).is_err());
    }

    #[test]
    fn sync_trial_noiseless_is_exact() {
        let cfg = FrameConfig::with_defaults(64, 32, 1e6).unwrap();
        let frame = sounding_frame(&cfg).unwrap();
        for seed in 0..5 {
            let t = sync_trial(&cfg, &frame, f64::INFINITY, seed).unwrap();
            assert_eq!(t.detected, t.offset);
        }
    }

    #[test]
    fn sound_recovers_integer_paths() {
        let cfg = FrameConfig::with_defaults(128, 64, 10e6).unwrap();
        let (dt, dv) = (cfg.delay_resolution(), cfg.doppler_resolution());
        let channel = PathSet::new(vec![
            Path::from_db(0.0, 0.3, 2.0 * dt, 3.0 * dv).unwrap(),
            Path::from_db(-6.0, -1.0, 9.0 * dt, -5.0 * dv).unwrap(),
        ])
        .unwrap();
        let rx = synthetic_capture(&cfg, &channel, f64::INFINITY, 0.0, 777, 1).unwrap();
        let result = sound(&rx, &cfg, &EstimatorConfig { max_paths: 2, ..Default::default() }, 0).unwrap();
        // Timing locks onto the strongest arrival, so delays are relative to it.
        assert_eq!(result.frame_start, 777 + 2);
        assert_eq!(result.estimates.len(), 2);
        assert_eq!(result.estimates[0].integer_taps, (3, 0));
        assert_eq!(result.estimates[1].integer_taps, (-5, 7));
        assert_eq!(result.statistics.unwrap().n_mpcs, 2);
    }

    #[test]
    fn sweeps_reject_empty_seeds() {
        let cfg = FrameConfig::with_defaults(64, 32, 1e6).unwrap();
        assert!(dynamic_range_cfo(&cfg, &[0.0], 30.0, &[]).is_err());
        assert!(nmse_sweep(&cfg, &[30.0], &[0.1], &[], &EstimatorConfig::default()).is_err());
        assert!(verify_rayleigh(&[]).is_err());
    }
}
