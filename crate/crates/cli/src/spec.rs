//! Versioned JSON experiment description.

use std::path::{Path as FsPath, PathBuf};

use ddsound::{EstimatorConfig, FrameConfig, PathSet};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PaprSweep,
    SyncGainSweep,
    DynamicRangeCfo,
    NmseSweep,
    VerifyRayleigh,
    VerifyPureDoppler,
    Sound,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PaprSweep => "papr_sweep",
            ExperimentKind::SyncGainSweep => "sync_gain_sweep",
            ExperimentKind::DynamicRangeCfo => "dynamic_range_cfo",
            ExperimentKind::NmseSweep => "nmse_sweep",
            ExperimentKind::VerifyRayleigh => "verify_rayleigh",
            ExperimentKind::VerifyPureDoppler => "verify_pure_doppler",
            ExperimentKind::Sound => "sound",
        }
    }
}

/// Channel under test for `sound` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Inline path list.
    Paths(PathSet),
    /// Path list stored as JSON.
    PathsFile(PathBuf),
    /// Sum-of-sinusoids Rayleigh taps, redrawn per seed.
    Rayleigh {
        delays_s: Vec<f64>,
        powers_db: Vec<f64>,
        max_dopplers_hz: Vec<f64>,
        #[serde(default = "default_sinusoids")]
        n_sinusoids: usize,
    },
    /// Recorded capture in DDIQ format; impairments do not apply.
    IqFile(PathBuf),
}

fn default_sinusoids() -> usize {
    ddsound::scenarios::RAYLEIGH_SINUSOIDS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impairments {
    /// `None` means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub cfo_hz: f64,
    /// Zeros preceding the frame in synthesized captures.
    #[serde(default)]
    pub lead_samples: usize,
}

impl Default for Impairments {
    fn default() -> Self {
        Impairments { snr_db: None, cfo_hz: 0.0, lead_samples: 0 }
    }
}

/// Sweep axes; any axis left out takes the reference values below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snrs_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfo_multiples: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn m_values(&self) -> Vec<usize> {
        self.m_values.clone().unwrap_or_else(|| (4..=12).map(|e| 1 << e).collect())
    }

    pub fn sizes(&self) -> Vec<(usize, usize)> {
        self.sizes.clone().unwrap_or_else(|| vec![(256, 128), (1024, 512), (2048, 256)])
    }

    pub fn snrs_db(&self, kind: ExperimentKind) -> Vec<f64> {
        self.snrs_db.clone().unwrap_or_else(|| match kind {
            ExperimentKind::NmseSweep => vec![0.0, 10.0, 20.0, 30.0],
            _ => vec![-10.0, 0.0, 10.0],
        })
    }

    pub fn steps(&self) -> Vec<f64> {
        self.steps.clone().unwrap_or_else(|| vec![0.1, 0.05, 0.01])
    }

    pub fn cfo_multiples(&self) -> Vec<f64> {
        self.cfo_multiples.clone().unwrap_or_else(|| vec![0.0, 1.0, 4.0, 16.0])
    }
}

pub const DEFAULT_BANDWIDTH_HZ: f64 = 100e6;
pub const DEFAULT_CFO_SNR_DB: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub impairments: Impairments,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepSpec,
}

impl ExperimentSpec {
    /// Parses and validates a spec. Relative file references are resolved
    /// against `base_dir`.
    pub fn from_json(text: &str, base_dir: &FsPath) -> CliResult<Self> {
        let mut spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| CliError::InvalidSpec(e.to_string()))?;
        spec.resolve_paths(base_dir);
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &FsPath) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(FsPath::new(".")))
    }

    fn resolve_paths(&mut self, base: &FsPath) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.channel {
            Some(ChannelSpec::PathsFile(p)) | Some(ChannelSpec::IqFile(p)) => fix(p),
            _ => {}
        }
    }

    pub fn is_stochastic(&self) -> bool {
        match self.kind {
            ExperimentKind::PaprSweep | ExperimentKind::VerifyPureDoppler => false,
            ExperimentKind::Sound => match self.channel {
                Some(ChannelSpec::IqFile(_)) => false,
                Some(ChannelSpec::Rayleigh { .. }) => true,
                _ => self.impairments.snr_db.is_some(),
            },
            _ => true,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let invalid = |m: String| Err(CliError::InvalidSpec(m));
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        self.estimator.validate()?;
        if self.is_stochastic() && self.seeds.is_empty() {
            return invalid(format!("{} needs a nonempty seed list", self.kind.name()));
        }
        let needs_frame = matches!(self.kind, ExperimentKind::DynamicRangeCfo | ExperimentKind::NmseSweep | ExperimentKind::Sound);
        let fixed_frame = matches!(self.kind, ExperimentKind::VerifyRayleigh | ExperimentKind::VerifyPureDoppler);
        if needs_frame && self.frame.is_none() {
            return invalid(format!("{} needs a frame", self.kind.name()));
        }
        if fixed_frame && self.frame.is_some() {
            return invalid(format!("{} runs on its reference frame; remove `frame`", self.kind.name()));
        }
        match (self.kind, &self.channel) {
            (ExperimentKind::Sound, None) => return invalid("sound needs a channel".into()),
            (ExperimentKind::Sound, Some(ChannelSpec::PathsFile(p) | ChannelSpec::IqFile(p))) if !p.is_file() => {
                return invalid(format!("referenced file {} does not exist", p.display()));
            }
            (ExperimentKind::Sound, Some(ChannelSpec::Rayleigh { delays_s, powers_db, max_dopplers_hz, .. }))
                if delays_s.len() != powers_db.len() || delays_s.len() != max_dopplers_hz.len() =>
            {
                return invalid("rayleigh delays_s, powers_db and max_dopplers_hz differ in length".into());
            }
            (ExperimentKind::Sound, _) => {}
            (_, Some(_)) => return invalid(format!("{} does not take a channel", self.kind.name())),
            (_, None) => {}
        }
        if let Some(snr) = self.impairments.snr_db {
            if !snr.is_finite() {
                return invalid(format!("snr_db {snr} must be finite; omit it for a noiseless run"));
            }
        }
        if !self.impairments.cfo_hz.is_finite() {
            return invalid("cfo_hz must be finite".into());
        }
        let s = &self.sweep;
        let empty = [
            ("m_values", s.m_values.as_ref().map(Vec::len)),
            ("sizes", s.sizes.as_ref().map(Vec::len)),
            ("snrs_db", s.snrs_db.as_ref().map(Vec::len)),
            ("steps", s.steps.as_ref().map(Vec::len)),
            ("cfo_multiples", s.cfo_multiples.as_ref().map(Vec::len)),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, n)| *n == Some(0)) {
            return invalid(format!("sweep.{name} is empty"));
        }
        Ok(())
    }

    /// Bandwidth of the spec's frame, or 100 MHz without one.
    pub fn bandwidth_hz(&self) -> f64 {
        self.frame.map_or(DEFAULT_BANDWIDTH_HZ, |f| f.bandwidth_hz())
    }
}
