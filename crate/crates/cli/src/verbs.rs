//! The single-step verbs: `capability`, `generate`, `sound`, `estimate`, `analyze`.

use std::path::{Path as FsPath, PathBuf};

use ddsound::analysis::{
    dpsd_from_csf, dpsd_from_estimates, frame_statistics, pdp_from_csf, pdp_from_estimates, rms_delay_spread,
    rms_doppler_spread,
};
use ddsound::estimation::estimate_paths_with_residual;
use ddsound::io::{
    read_csf, read_iq, read_path_set, write_csf_to, write_estimates_csv, write_iq_to,
    write_profile_csv, write_statistics_csv,
};
use ddsound::scenarios;
use ddsound::{Complex64, Csf, EstimatorConfig, FrameConfig, PathEstimate, PathSet};
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::checks::{self, Check};
use crate::error::{CliError, CliResult};
use crate::experiment::{check_sample_rate, finish_checks, sound_checks, write_sound_runs, RunSummary, SoundRun, TruthRef};

/// Settings shared by every verb.
#[derive(Debug, Clone)]
pub struct Common {
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub check: bool,
}

fn conclude(bundle: Bundle, command: &str, echo: serde_json::Value, seeds: &[u64], c: &Common, found: Vec<Check>) -> CliResult<RunSummary> {
    let checks = c.check.then_some(found);
    let outputs = bundle.outputs().to_vec();
    let dir = bundle.dir().to_path_buf();
    bundle.finish(command, &echo, seeds, checks.as_deref())?;
    finish_checks(RunSummary { dir, outputs, checks })
}

fn to_value(v: &impl Serialize) -> CliResult<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| CliError::Computation(e.to_string()))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &FsPath) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::InvalidSpec(format!("{}: {e}", path.display())))
}

pub fn capability(cfg: &FrameConfig, c: &Common) -> CliResult<RunSummary> {
    let mut bundle = Bundle::create(&c.output_dir)?;
    let cap = cfg.capability();
    bundle.json("capability.json", &cap)?;
    let echo = serde_json::json!({ "frame": cfg });
    conclude(bundle, "capability", echo, &[], c, checks::capability(cfg, &cap))
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateArgs {
    pub frame: FrameConfig,
    /// `None` sends the frame through an identity channel.
    pub channel: Option<PathSet>,
    pub snr_db: Option<f64>,
    pub cfo_hz: f64,
    pub lead_samples: usize,
}

/// Synthesizes a received capture and writes `capture.ddiq`, `frame.json`
/// and `channel.json`.
pub fn generate(args: &GenerateArgs, c: &Common) -> CliResult<RunSummary> {
    let seed = c.seed.unwrap_or(0);
    let channel = args.channel.clone().unwrap_or_else(PathSet::identity);
    let rx = scenarios::synthetic_capture(
        &args.frame,
        &channel,
        args.snr_db.unwrap_or(f64::INFINITY),
        args.cfo_hz,
        args.lead_samples,
        seed,
    )?;
    let mut bundle = Bundle::create(&c.output_dir)?;
    bundle.write_with("capture.ddiq", |w| write_iq_to(&rx, w))?;
    bundle.json("frame.json", &args.frame)?;
    bundle.json("channel.json", &channel)?;
    let mut found = Vec::new();
    if c.check {
        let back = read_iq(bundle.dir().join("capture.ddiq"))?;
        let exact = back.len() == rx.len()
            && back.samples().iter().zip(rx.samples()).all(|(a, b)| a.re == b.re as f32 as f64 && a.im == b.im as f32 as f64);
        found.push(Check::new("capture reads back sample-exact", exact, format!("{} samples", back.len())));
        found.push(Check::new(
            "capture holds a full frame after the lead",
            rx.len() >= args.lead_samples + args.frame.frame_len(),
            format!("{} samples", rx.len()),
        ));
    }
    conclude(bundle, "generate", to_value(args)?, &[seed], c, found)
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundArgs {
    pub input: PathBuf,
    pub frame: FrameConfig,
    pub estimator: EstimatorConfig,
    /// Known channel, for the recovery check.
    pub truth: Option<PathSet>,
    pub lead_samples: usize,
    pub cfo_hz: f64,
}

pub fn sound(args: &SoundArgs, c: &Common) -> CliResult<RunSummary> {
    let rx = read_iq(&args.input)?;
    check_sample_rate(rx.sample_rate(), &args.frame)?;
    let result = scenarios::sound(&rx, &args.frame, &args.estimator, 0)?;
    let truth = args.truth.clone().map(|paths| TruthRef { paths, lead_samples: args.lead_samples, cfo_hz: args.cfo_hz });
    let runs = [SoundRun { seed: None, result, truth }];
    let mut bundle = Bundle::create(&c.output_dir)?;
    write_sound_runs(&mut bundle, &runs)?;
    conclude(bundle, "sound", to_value(args)?, &[], c, sound_checks(&runs, &args.frame))
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateArgs {
    pub csf: PathBuf,
    pub estimator: EstimatorConfig,
}

pub fn estimate(args: &EstimateArgs, c: &Common) -> CliResult<RunSummary> {
    let csf = read_csf(&args.csf)?;
    let (estimates, residual) = estimate_paths_with_residual(&csf, &args.estimator)?;
    let cfg = *csf.cfg();
    let mut bundle = Bundle::create(&c.output_dir)?;
    bundle.write_with("estimates.csv", |w| write_estimates_csv(&estimates, w))?;
    bundle.write_with("residual.ddcf", |w| write_csf_to(&residual, w))?;
    let stats = if estimates.is_empty() {
        Vec::new()
    } else {
        vec![frame_statistics(0, &estimates, cfg.delay_resolution(), cfg.doppler_resolution())?]
    };
    bundle.write_with("statistics.csv", |w| write_statistics_csv(&stats, w))?;
    let found = vec![
        Check::new("at least one path detected", !estimates.is_empty(), format!("{} paths", estimates.len())),
        Check::new(
            "cancellation lowers the CSF energy",
            residual.energy() < csf.energy(),
            format!("{:.3e} -> {:.3e}", csf.energy(), residual.energy()),
        ),
    ];
    conclude(bundle, "estimate", to_value(args)?, &[], c, found)
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeArgs {
    pub csf: PathBuf,
    /// Estimates CSV as written by `estimate` or `sound`; estimated afresh when absent.
    pub estimates: Option<PathBuf>,
    /// Frame to take from a multi-frame estimates file.
    pub frame_index: usize,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Deserialize)]
struct EstimateRecord {
    #[serde(default)]
    frame_index: Option<usize>,
    delay_s: f64,
    doppler_hz: f64,
    gain_db: f64,
}

pub fn read_estimates_csv(path: &FsPath, cfg: &FrameConfig, frame_index: usize) -> CliResult<Vec<PathEstimate>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.deserialize::<EstimateRecord>() {
        let r = record.map_err(|e| CliError::InvalidSpec(format!("{}: {e}", path.display())))?;
        if r.frame_index.is_some_and(|f| f != frame_index) {
            continue;
        }
        let amplitude = Complex64::new(10f64.powf(r.gain_db / 20.0), 0.0);
        out.push(PathEstimate::from_taps(
            cfg,
            r.doppler_hz / cfg.doppler_resolution(),
            r.delay_s / cfg.delay_resolution(),
            amplitude,
        ));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct AnalysisSummary {
    csf_energy: f64,
    csf_rms_delay_spread_s: f64,
    csf_rms_doppler_spread_hz: f64,
    paths: usize,
    n_mpcs: Option<usize>,
    k_factor_db: Option<f64>,
    rms_delay_spread_s: Option<f64>,
    rms_doppler_spread_hz: Option<f64>,
}

pub fn analyze(args: &AnalyzeArgs, c: &Common) -> CliResult<RunSummary> {
    let csf: Csf = read_csf(&args.csf)?;
    let cfg = *csf.cfg();
    let estimates = match &args.estimates {
        Some(p) => read_estimates_csv(p, &cfg, args.frame_index)?,
        None => estimate_paths_with_residual(&csf, &args.estimator)?.0,
    };
    let (pdp, dpsd) = (pdp_from_csf(&csf), dpsd_from_csf(&csf));
    let mut bundle = Bundle::create(&c.output_dir)?;
    bundle.write_with("pdp.csv", |w| write_profile_csv(&pdp, w))?;
    bundle.write_with("dpsd.csv", |w| write_profile_csv(&dpsd, w))?;
    let stats = if estimates.is_empty() {
        None
    } else {
        let (dt, dv) = (cfg.delay_resolution(), cfg.doppler_resolution());
        let est_pdp = pdp_from_estimates(&estimates, dt)?;
        let est_dpsd = dpsd_from_estimates(&estimates, dv)?;
        bundle.write_with("estimate_pdp.csv", |w| write_profile_csv(&est_pdp, w))?;
        bundle.write_with("estimate_dpsd.csv", |w| write_profile_csv(&est_dpsd, w))?;
        Some(frame_statistics(args.frame_index, &estimates, dt, dv)?)
    };
    let rows: Vec<_> = stats.into_iter().collect();
    bundle.write_with("statistics.csv", |w| write_statistics_csv(&rows, w))?;
    let summary = AnalysisSummary {
        csf_energy: csf.energy(),
        csf_rms_delay_spread_s: rms_delay_spread(&pdp)?,
        csf_rms_doppler_spread_hz: rms_doppler_spread(&dpsd)?,
        paths: estimates.len(),
        n_mpcs: stats.map(|s| s.n_mpcs),
        k_factor_db: stats.map(|s| s.kf_db),
        rms_delay_spread_s: stats.map(|s| s.rms_ds_s),
        rms_doppler_spread_hz: stats.map(|s| s.rms_dps_hz),
    };
    bundle.json("analysis.json", &summary)?;
    let energy = csf.energy();
    let rel = |x: f64| (x - energy).abs() / energy.max(f64::MIN_POSITIVE);
    let found = vec![
        Check::new("PDP conserves CSF energy", rel(pdp.total_power()) < 1e-9, format!("{:.3e}", pdp.total_power())),
        Check::new("DPSD conserves CSF energy", rel(dpsd.total_power()) < 1e-9, format!("{:.3e}", dpsd.total_power())),
        Check::new("at least one path to analyze", !estimates.is_empty(), format!("{} paths", estimates.len())),
    ];
    conclude(bundle, "analyze", to_value(args)?, &[], c, found)
}

/// Path set from a JSON file, for `--channel` and `--truth`.
pub fn load_paths(path: &FsPath) -> CliResult<PathSet> {
    read_path_set(path).map_err(|e| match e {
        ddsound::Error::Io(e) => CliError::Io(format!("{}: {e}", path.display())),
        other => CliError::InvalidSpec(format!("{}: {other}", path.display())),
    })
}

