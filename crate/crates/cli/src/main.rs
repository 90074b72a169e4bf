use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddsound::{EstimatorConfig, FrameConfig};
use ddsound_cli::bundle::write_error_record;
use ddsound_cli::verbs::{self, AnalyzeArgs, Common, EstimateArgs, GenerateArgs, SoundArgs};
use ddsound_cli::{run_experiment, CliError, CliResult, ExperimentSpec, RunSummary};

/// Delay-Doppler channel sounder: waveform synthesis, channel emulation,
/// CSF extraction, path estimation and channel statistics.
#[derive(Parser)]
#[command(name = "ddsound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Result directory [default: results/<verb>].
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Seed for stochastic steps; for `experiment`, replaces the spec's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the built-in assertions; exit with status 4 if any fails.
    #[arg(long)]
    check: bool,
}

impl CommonArgs {
    fn resolve(&self, verb: &str) -> Common {
        Common {
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("results").join(verb)),
            seed: self.seed,
            check: self.check,
        }
    }
}

#[derive(Args, Clone)]
struct FrameArgs {
    /// Frame configuration as JSON; overrides the individual frame flags.
    #[arg(long)]
    frame: Option<PathBuf>,
    /// Delay taps (subcarriers).
    #[arg(long, default_value_t = 2048)]
    m: usize,
    /// Doppler taps (symbols).
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 100e6)]
    bandwidth_hz: f64,
    /// Guard columns on each side of the pilot [default: M/4].
    #[arg(long)]
    l_tau: Option<usize>,
    /// PN amplitude relative to the unit pilot.
    #[arg(long, default_value_t = 1.0)]
    a_pn: f64,
}

impl FrameArgs {
    fn resolve(&self) -> CliResult<FrameConfig> {
        if let Some(p) = &self.frame {
            return verbs::load_json(p);
        }
        Ok(FrameConfig::new(self.m, self.n, self.bandwidth_hz, self.l_tau.unwrap_or(self.m / 4), self.a_pn)?)
    }
}

#[derive(Args, Clone)]
struct EstimatorArgs {
    /// Estimator configuration as JSON [default: built-in settings].
    #[arg(long)]
    estimator: Option<PathBuf>,
}

impl EstimatorArgs {
    fn resolve(&self) -> CliResult<EstimatorConfig> {
        let cfg = match &self.estimator {
            Some(p) => verbs::load_json(p)?,
            None => EstimatorConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Resolution and range limits of a frame configuration.
    Capability {
        #[command(flatten)]
        frame: FrameArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Synthesize a received capture through a path-set channel.
    Generate {
        #[command(flatten)]
        frame: FrameArgs,
        /// Path set as JSON [default: identity channel].
        #[arg(long)]
        channel: Option<PathBuf>,
        /// Omit for a noiseless capture.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        cfo_hz: f64,
        /// Zeros ahead of the frame.
        #[arg(long, default_value_t = 0)]
        lead_samples: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Synchronize, extract the CSF, estimate paths and summarize one capture.
    Sound {
        /// Capture in DDIQ format.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        frame: FrameArgs,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Known path set; enables the recovery check.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Lead used when the capture was generated, for the recovery check.
        #[arg(long, default_value_t = 0)]
        lead_samples: usize,
        /// Carrier offset of the capture, for the recovery check.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        cfo_hz: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Extract paths from a CSF file.
    Estimate {
        /// CSF in DDCF format.
        #[arg(long)]
        csf: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Power profiles and channel statistics of a CSF file.
    Analyze {
        /// CSF in DDCF format.
        #[arg(long)]
        csf: PathBuf,
        /// Estimates CSV; paths are extracted from the CSF when absent.
        #[arg(long)]
        estimates: Option<PathBuf>,
        /// Frame to read from a multi-frame estimates file.
        #[arg(long, default_value_t = 0)]
        frame_index: usize,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a JSON experiment spec.
    Experiment {
        spec: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    fn output_dir(&self) -> PathBuf {
        let (verb, common) = match self {
            Command::Capability { common, .. } => ("capability", common),
            Command::Generate { common, .. } => ("generate", common),
            Command::Sound { common, .. } => ("sound", common),
            Command::Estimate { common, .. } => ("estimate", common),
            Command::Analyze { common, .. } => ("analyze", common),
            Command::Experiment { common, .. } => ("experiment", common),
        };
        common.resolve(verb).output_dir
    }
}

fn run(command: &Command) -> CliResult<RunSummary> {
    match command {
        Command::Capability { frame, common } => verbs::capability(&frame.resolve()?, &common.resolve("capability")),
        Command::Generate { frame, channel, snr_db, cfo_hz, lead_samples, common } => {
            let args = GenerateArgs {
                frame: frame.resolve()?,
                channel: channel.as_deref().map(verbs::load_paths).transpose()?,
                snr_db: *snr_db,
                cfo_hz: *cfo_hz,
                lead_samples: *lead_samples,
            };
            verbs::generate(&args, &common.resolve("generate"))
        }
        Command::Sound { input, frame, estimator, truth, lead_samples, cfo_hz, common } => {
            let args = SoundArgs {
                input: input.clone(),
                frame: frame.resolve()?,
                estimator: estimator.resolve()?,
                truth: truth.as_deref().map(verbs::load_paths).transpose()?,
                lead_samples: *lead_samples,
                cfo_hz: *cfo_hz,
            };
            verbs::sound(&args, &common.resolve("sound"))
        }
        Command::Estimate { csf, estimator, common } => {
            let args = EstimateArgs { csf: csf.clone(), estimator: estimator.resolve()? };
            verbs::estimate(&args, &common.resolve("estimate"))
        }
        Command::Analyze { csf, estimates, frame_index, estimator, common } => {
            let args = AnalyzeArgs {
                csf: csf.clone(),
                estimates: estimates.clone(),
                frame_index: *frame_index,
                estimator: estimator.resolve()?,
            };
            verbs::analyze(&args, &common.resolve("analyze"))
        }
        Command::Experiment { spec, common } => {
            let mut spec = ExperimentSpec::load(spec)?;
            if let Some(seed) = common.seed {
                spec.seeds = vec![seed];
            }
            let dir = match (&common.output_dir, &spec.output_dir) {
                (Some(d), _) | (None, Some(d)) => d.clone(),
                (None, None) => PathBuf::from("results").join(spec.kind.name()),
            };
            run_experiment(&spec, &dir, common.check)
        }
    }
}

/// Output directory for the error record: the explicit or default one,
/// or the spec's own for `experiment` runs that got far enough to parse it.
fn error_dir(command: &Command) -> PathBuf {
    if let Command::Experiment { spec, common } = command {
        if common.output_dir.is_none() {
            if let Ok(s) = ExperimentSpec::load(spec) {
                if let Some(d) = s.output_dir {
                    return d;
                }
            }
        }
    }
    command.output_dir()
}

fn report(e: &CliError, command: &Command) -> ExitCode {
    let record = e.record();
    let text = serde_json::to_string(&record).unwrap_or_else(|_| format!("{{\"error\":{{\"message\":{:?}}}}}", e.to_string()));
    eprintln!("{text}");
    write_error_record(&error_dir(command), &record);
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(summary) => {
            println!("wrote {} files to {}", summary.outputs.len() + 1, summary.dir.display());
            if let Some(checks) = &summary.checks {
                println!("{} checks passed", checks.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e, &cli.command),
    }
}
