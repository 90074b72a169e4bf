//! Delay-Doppler (DD) domain channel sounding.
//!
//! The crate covers the whole measurement chain of an OTFS-based sounder:
//!
//! * [`frame`]: grid geometry and sounding-capability metrics,
//! * [`waveform`]: PN-filled DD sounding frames, ISFFT/SFFT and
//!   Heisenberg/Wigner transforms, PAPR,
//! * [`channel`]: sparse fractional delay/Doppler path emulation, Jakes
//!   taps, AWGN and CFO,
//! * [`receiver`]: sliding-correlation synchronization, channel spreading
//!   function (CSF) extraction, dynamic range and an OFDM reference sounder,
//! * [`estimation`]: joint fractional delay/Doppler path extraction with
//!   serial interference cancellation,
//! * [`analysis`]: PDP/DPSD, MPC count, K-factor and RMS spreads,
//! * [`io`]: the DDIQ/DDCF binary formats and CSV/JSON exports.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod frame;
pub mod io;
pub mod receiver;
pub mod scenarios;
pub mod waveform;

mod fft;

pub use num_complex::Complex64;

pub use analysis::{PowerProfile, ProfileKind};
pub use channel::{Path, PathSet};
pub use error::{Error, Result};
pub use estimation::{EstimatorConfig, PathEstimate, Threshold};
pub use frame::{FrameConfig, SoundingCapability};
pub use receiver::{CorrelationSeries, Csf};
pub use waveform::{DdGrid, IqBuffer, TfGrid};

/// Library version, as recorded in result manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Power ratios whose denominator falls below this fraction of the
/// numerator are reported as saturated (`f64::INFINITY`). Double-precision
/// transform round-off sits near 1e-30 in power, far below it.
pub const SATURATION_RATIO: f64 = 1e-20;

/// `10·log10(num/den)`, or `+∞` when `den` is numerically zero relative to `num`.
pub(crate) fn ratio_db(num: f64, den: f64) -> f64 {
    if den <= num * SATURATION_RATIO {
        f64::INFINITY
    } else {
        10.0 * (num / den).log10()
    }
}
