//! `run_experiment`: dispatches a spec to the library and writes its bundle.

use std::path::{Path as FsPath, PathBuf};

use ddsound::analysis::{dpsd_from_csf, frame_statistics, pdp_from_csf, FrameStatistics};
use ddsound::channel::{rayleigh_tap_paths, Path};
use ddsound::estimation::nmse;
use ddsound::io::{
    read_iq, read_path_set, write_csf_csv, write_csf_to, write_estimates_csv, write_profile_csv,
    write_statistics_csv,
};
use ddsound::receiver::dynamic_range;
use ddsound::scenarios::{self, SoundResult};
use ddsound::{Csf, FrameConfig, PathEstimate, PathSet};
use serde::Serialize;

use crate::bundle::Bundle;
use crate::checks::{self, Check};
use crate::error::{CliError, CliResult};
use crate::spec::{ChannelSpec, ExperimentKind, ExperimentSpec, DEFAULT_CFO_SNR_DB};

/// CSF grids with more cells than this are written only in binary form.
pub const CSF_CSV_MAX_CELLS: usize = 1 << 18;

/// Cells within this many dB of the CSF peak count as occupied.
pub const OCCUPANCY_WINDOW_DB: f64 = 20.0;

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub outputs: Vec<String>,
    pub checks: Option<Vec<Check>>,
}

/// Runs `spec` into `dir`. With `check`, the kind's built-in assertions
/// are evaluated and recorded; any failure is returned as an error after
/// the bundle and manifest have been written.
pub fn run_experiment(spec: &ExperimentSpec, dir: &FsPath, check: bool) -> CliResult<RunSummary> {
    spec.validate()?;
    let mut bundle = Bundle::create(dir)?;
    let found = match spec.kind {
        ExperimentKind::PaprSweep => papr_sweep(spec, &mut bundle)?,
        ExperimentKind::SyncGainSweep => sync_gain_sweep(spec, &mut bundle)?,
        ExperimentKind::DynamicRangeCfo => dynamic_range_cfo(spec, &mut bundle)?,
        ExperimentKind::NmseSweep => nmse_sweep(spec, &mut bundle)?,
        ExperimentKind::VerifyRayleigh => verify_rayleigh(spec, &mut bundle)?,
        ExperimentKind::VerifyPureDoppler => verify_pure_doppler(spec, &mut bundle)?,
        ExperimentKind::Sound => sound(spec, &mut bundle)?,
    };
    let checks = check.then_some(found);
    let echo = serde_json::to_value(spec).map_err(|e| CliError::Computation(e.to_string()))?;
    let command = format!("experiment {}", spec.kind.name());
    let outputs = bundle.outputs().to_vec();
    let dir = bundle.dir().to_path_buf();
    bundle.finish(&command, &echo, &spec.seeds, checks.as_deref())?;
    finish_checks(RunSummary { dir, outputs, checks })
}

/// Turns a summary with failed checks into `CheckFailed`.
pub fn finish_checks(summary: RunSummary) -> CliResult<RunSummary> {
    match &summary.checks {
        Some(c) if c.iter().any(|c| !c.passed) => Err(CliError::CheckFailed(c.clone())),
        _ => Ok(summary),
    }
}

fn papr_sweep(spec: &ExperimentSpec, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    let rows = scenarios::papr_sweep(&spec.sweep.m_values(), spec.bandwidth_hz())?;
    bundle.csv("papr.csv", &rows, &["m", "n", "designed_db", "single_pilot_db", "full_pn_db"])?;
    Ok(checks::papr(&rows))
}

fn sync_gain_sweep(spec: &ExperimentSpec, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    let rows = scenarios::sync_gain_sweep(
        &spec.sweep.sizes(),
        &spec.sweep.snrs_db(spec.kind),
        spec.bandwidth_hz(),
        &spec.seeds,
    )?;
    bundle.csv("sync_gain.csv", &rows, &["m", "n", "snr_db", "trials", "mean_gain_db", "detection_rate"])?;
    Ok(checks::sync_gain(&rows))
}

fn frame_of(spec: &ExperimentSpec) -> CliResult<FrameConfig> {
    spec.frame.ok_or_else(|| CliError::InvalidSpec(format!("{} needs a frame", spec.kind.name())))
}

fn dynamic_range_cfo(spec: &ExperimentSpec, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    let snr = spec.impairments.snr_db.unwrap_or(DEFAULT_CFO_SNR_DB);
    let rows = scenarios::dynamic_range_cfo(&frame_of(spec)?, &spec.sweep.cfo_multiples(), snr, &spec.seeds)?;
    bundle.csv(
        "dynamic_range.csv",
        &rows,
        &["cfo_bins", "cfo_hz", "dd_dynamic_range_db", "dd_peak_doppler_tap", "ofdm_dynamic_range_db"],
    )?;
    Ok(checks::dynamic_range(&rows))
}

fn nmse_sweep(spec: &ExperimentSpec, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    let rows = scenarios::nmse_sweep(
        &frame_of(spec)?,
        &spec.sweep.snrs_db(spec.kind),
        &spec.sweep.steps(),
        &spec.seeds,
        &spec.estimator,
    )?;
    bundle.csv(
        "nmse.csv",
        &rows,
        &["snr_db", "step", "trials", "index_nmse", "amplitude_nmse", "missed_paths", "spurious_paths"],
    )?;
    Ok(checks::nmse(&rows))
}

#[derive(Serialize)]
struct RidgeRow {
    delay_s: f64,
    relative_power_db: f64,
    doppler_low_hz: f64,
    doppler_high_hz: f64,
}

#[derive(Serialize)]
struct RidgeDpsdRow {
    delay_s: f64,
    doppler_hz: f64,
    power_db: f64,
}

fn verify_rayleigh(spec: &ExperimentSpec, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    let ridges = scenarios::verify_rayleigh(&spec.seeds)?;
    let cfg = scenarios::rayleigh_frame();
    let summary: Vec<RidgeRow> = ridges
        .iter()
        .map(|r| RidgeRow {
            delay_s: r.delay_s,
            relative_power_db: r.relative_power_db,
            doppler_low_hz: r.doppler_low_hz,
            doppler_high_hz: r.doppler_high_hz,
        })
        .collect();
    bundle.csv("ridges.csv", &summary, &[])?;
    let dpsd: Vec<RidgeDpsdRow> = ridges
        .iter()
        .flat_map(|r| {
            r.doppler_power.iter().enumerate().map(move |(row, &p)| RidgeDpsdRow {
                delay_s: r.delay_s,
                doppler_hz: cfg.row_doppler_hz(row),
                power_db: 10.0 * p.log10(),
            })
        })
        .collect();
    bundle.csv("ridge_dpsd.csv", &dpsd, &[])?;
    Ok(checks::rayleigh(&ridges, cfg.doppler_resolution()))
}

#[derive(Serialize)]
struct RawLevelRow {
    delay_s: f64,
    doppler_hz: f64,
    power_db: f64,
    raw_relative_db: f64,
}

fn verify_pure_doppler(spec: &ExperimentSpec, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    let report = scenarios::verify_pure_doppler(&spec.estimator)?;
    let cfg = scenarios::pure_doppler_frame();
    bundle.write_with("estimates.csv", |w| write_estimates_csv(&report.estimates, w))?;
    let raw: Vec<RawLevelRow> = scenarios::pure_doppler_channel()
        .paths()
        .iter()
        .zip(&report.raw_relative_db)
        .map(|(p, &raw_relative_db)| RawLevelRow {
            delay_s: p.delay_s,
            doppler_hz: p.doppler_hz,
            power_db: p.gain_db(),
            raw_relative_db,
        })
        .collect();
    bundle.csv("raw_levels.csv", &raw, &[])?;
    write_csf_outputs(bundle, &report.csf, "")?;
    let stats = if report.estimates.is_empty() {
        Vec::new()
    } else {
        vec![frame_statistics(0, &report.estimates, cfg.delay_resolution(), cfg.doppler_resolution())?]
    };
    bundle.write_with("statistics.csv", |w| write_statistics_csv(&stats, w))?;
    Ok(checks::pure_doppler(&report))
}

/// `csf{suffix}.ddcf`, `pdp{suffix}.csv`, `dpsd{suffix}.csv`, and
/// `csf{suffix}.csv` for grids up to [`CSF_CSV_MAX_CELLS`].
fn write_csf_outputs(bundle: &mut Bundle, csf: &Csf, suffix: &str) -> CliResult<()> {
    bundle.write_with(&format!("csf{suffix}.ddcf"), |w| write_csf_to(csf, w))?;
    if csf.rows() * csf.cols() <= CSF_CSV_MAX_CELLS {
        bundle.write_with(&format!("csf{suffix}.csv"), |w| write_csf_csv(csf, w))?;
    }
    bundle.write_with(&format!("pdp{suffix}.csv"), |w| write_profile_csv(&pdp_from_csf(csf), w))?;
    bundle.write_with(&format!("dpsd{suffix}.csv"), |w| write_profile_csv(&dpsd_from_csf(csf), w))?;
    Ok(())
}

/// Number of CSF cells within [`OCCUPANCY_WINDOW_DB`] of the peak.
pub fn csf_occupancy(csf: &Csf) -> usize {
    let peak = csf.peak().2.norm_sqr();
    let level = peak * 10f64.powf(-OCCUPANCY_WINDOW_DB / 10.0);
    csf.data().iter().filter(|v| v.norm_sqr() >= level).count()
}

#[derive(Debug, Serialize)]
pub struct FrameRow {
    pub frame_index: usize,
    pub seed: Option<u64>,
    pub frame_start: usize,
    pub sync_gain_db: f64,
    pub noise_floor_db: f64,
    pub peak_db: f64,
    pub dynamic_range_db: f64,
    pub occupied_cells: usize,
    pub paths_detected: usize,
}

impl FrameRow {
    pub fn new(frame_index: usize, seed: Option<u64>, r: &SoundResult) -> Self {
        FrameRow {
            frame_index,
            seed,
            frame_start: r.frame_start,
            sync_gain_db: r.sync_gain_db,
            noise_floor_db: 10.0 * r.csf.noise_floor_estimate().log10(),
            peak_db: 10.0 * r.csf.peak().2.norm_sqr().log10(),
            dynamic_range_db: dynamic_range(&r.csf),
            occupied_cells: csf_occupancy(&r.csf),
            paths_detected: r.estimates.len(),
        }
    }
}

pub const FRAME_HEADER: [&str; 9] = [
    "frame_index",
    "seed",
    "frame_start",
    "sync_gain_db",
    "noise_floor_db",
    "peak_db",
    "dynamic_range_db",
    "occupied_cells",
    "paths_detected",
];

#[derive(Debug, Serialize)]
pub struct EstimateRow {
    pub frame_index: usize,
    pub path_index: usize,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub gain_db: f64,
    pub phase_rad: f64,
    #[serde(rename = "k_I")]
    pub k_i: i64,
    #[serde(rename = "l_I")]
    pub l_i: i64,
    #[serde(rename = "k_F")]
    pub k_f: f64,
    #[serde(rename = "l_F")]
    pub l_f: f64,
}

impl EstimateRow {
    pub fn new(frame_index: usize, path_index: usize, e: &PathEstimate) -> Self {
        EstimateRow {
            frame_index,
            path_index,
            delay_s: e.delay_s,
            doppler_hz: e.doppler_hz,
            gain_db: e.gain_db(),
            phase_rad: e.phase,
            k_i: e.integer_taps.0,
            l_i: e.integer_taps.1,
            k_f: e.fractional_taps.0,
            l_f: e.fractional_taps.1,
        }
    }
}

pub const ESTIMATE_HEADER: [&str; 10] =
    ["frame_index", "path_index", "delay_s", "doppler_hz", "gain_db", "phase_rad", "k_I", "l_I", "k_F", "l_F"];

/// Truth as the receiver sees it: delays relative to the synchronization
/// point and Dopplers shifted by the carrier offset. Paths arriving before
/// the synchronization point are dropped.
pub fn referenced_truth(truth: &PathSet, cfg: &FrameConfig, sync_shift_samples: f64, cfo_hz: f64) -> Option<PathSet> {
    let shift = sync_shift_samples / cfg.sample_rate();
    let half_tap = 0.5 * cfg.delay_resolution();
    let paths: Vec<Path> = truth
        .paths()
        .iter()
        .filter(|p| p.delay_s - shift >= -half_tap)
        .filter_map(|p| Path::new(p.gain, (p.delay_s - shift).max(0.0), p.doppler_hz + cfo_hz).ok())
        .collect();
    PathSet::new(paths).ok()
}

/// Every truth path within [`OCCUPANCY_WINDOW_DB`] of the strongest one
/// has an estimate within one tap.
pub fn truth_recovered(estimates: &[PathEstimate], truth: &PathSet, cfg: &FrameConfig) -> (bool, String) {
    let strongest = truth.paths().iter().map(Path::power).fold(0.0, f64::max);
    let level = strongest * 10f64.powf(-OCCUPANCY_WINDOW_DB / 10.0);
    let strong: Vec<Path> = truth.paths().iter().copied().filter(|p| p.power() >= level).collect();
    let Ok(strong) = PathSet::new(strong) else {
        return (false, "no truth paths".into());
    };
    let report = nmse(estimates, &strong, cfg);
    (
        report.unmatched_truth == 0,
        format!(
            "{} of {} paths matched, index NMSE {:.3e}, amplitude NMSE {:.3e}",
            report.matched,
            strong.len(),
            report.index_nmse,
            report.amplitude_nmse
        ),
    )
}

/// One sounded frame and, for synthesized captures with a fixed channel,
/// the truth it was generated from.
#[derive(Debug)]
pub struct SoundRun {
    pub seed: Option<u64>,
    pub result: SoundResult,
    pub truth: Option<TruthRef>,
}

#[derive(Debug, Clone)]
pub struct TruthRef {
    pub paths: PathSet,
    pub lead_samples: usize,
    pub cfo_hz: f64,
}

/// `frames.csv`, `estimates.csv`, `statistics.csv` and the per-frame CSF outputs.
pub fn write_sound_runs(bundle: &mut Bundle, runs: &[SoundRun]) -> CliResult<()> {
    let frames: Vec<FrameRow> = runs.iter().enumerate().map(|(i, r)| FrameRow::new(i, r.seed, &r.result)).collect();
    bundle.csv("frames.csv", &frames, &FRAME_HEADER)?;
    let estimates: Vec<EstimateRow> = runs
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.result.estimates.iter().enumerate().map(move |(j, e)| EstimateRow::new(i, j, e)))
        .collect();
    bundle.csv("estimates.csv", &estimates, &ESTIMATE_HEADER)?;
    let stats: Vec<FrameStatistics> = runs.iter().filter_map(|r| r.result.statistics).collect();
    bundle.write_with("statistics.csv", |w| write_statistics_csv(&stats, w))?;
    for (i, r) in runs.iter().enumerate() {
        write_csf_outputs(bundle, &r.result.csf, &format!("_{i}"))?;
    }
    Ok(())
}

pub fn sound_checks(runs: &[SoundRun], cfg: &FrameConfig) -> Vec<Check> {
    let mut out = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let r = &run.result;
        out.push(Check::new(
            format!("frame {i}: at least one path detected"),
            !r.estimates.is_empty(),
            format!("{} paths", r.estimates.len()),
        ));
        if let Some(t) = &run.truth {
            let shift = r.frame_start as f64 - t.lead_samples as f64;
            let (passed, detail) = match referenced_truth(&t.paths, cfg, shift, t.cfo_hz) {
                Some(seen) => truth_recovered(&r.estimates, &seen, cfg),
                None => (false, "every path precedes the synchronization point".into()),
            };
            out.push(Check::new(format!("frame {i}: paths within 20 dB of the strongest recovered"), passed, detail));
        }
    }
    out
}

fn sound(spec: &ExperimentSpec, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    let cfg = frame_of(spec)?;
    let channel = spec.channel.as_ref().ok_or_else(|| CliError::InvalidSpec("sound needs a channel".into()))?;
    let imp = spec.impairments;
    let snr = imp.snr_db.unwrap_or(f64::INFINITY);
    let fixed = match channel {
        ChannelSpec::Paths(p) => Some(p.clone()),
        ChannelSpec::PathsFile(f) => Some(read_path_set(f)?),
        _ => None,
    };

    let mut runs = Vec::new();
    if let ChannelSpec::IqFile(f) = channel {
        let rx = read_iq(f)?;
        check_sample_rate(rx.sample_rate(), &cfg)?;
        runs.push(SoundRun { seed: None, result: scenarios::sound(&rx, &cfg, &spec.estimator, 0)?, truth: None });
    } else {
        let seeds: Vec<Option<u64>> =
            if spec.seeds.is_empty() { vec![None] } else { spec.seeds.iter().copied().map(Some).collect() };
        for (index, seed) in seeds.into_iter().enumerate() {
            let s = seed.unwrap_or(0);
            let paths = match (channel, &fixed) {
                (_, Some(p)) => p.clone(),
                (ChannelSpec::Rayleigh { delays_s, powers_db, max_dopplers_hz, n_sinusoids }, None) => {
                    rayleigh_tap_paths(delays_s, powers_db, max_dopplers_hz, *n_sinusoids, s)?
                }
                _ => unreachable!("IQ captures are handled above"),
            };
            let rx = scenarios::synthetic_capture(&cfg, &paths, snr, imp.cfo_hz, imp.lead_samples, s)?;
            let truth = fixed.is_some().then_some(TruthRef { paths, lead_samples: imp.lead_samples, cfo_hz: imp.cfo_hz });
            runs.push(SoundRun { seed, result: scenarios::sound(&rx, &cfg, &spec.estimator, index)?, truth });
        }
    }
    write_sound_runs(bundle, &runs)?;
    Ok(sound_checks(&runs, &cfg))
}

pub fn check_sample_rate(rate: f64, cfg: &FrameConfig) -> CliResult<()> {
    if (rate - cfg.sample_rate()).abs() > 1e-9 * cfg.sample_rate() {
        return Err(CliError::InvalidSpec(format!(
            "capture sample rate {rate} Hz does not match the frame's {} Hz",
            cfg.sample_rate()
        )));
    }
    Ok(())
}
