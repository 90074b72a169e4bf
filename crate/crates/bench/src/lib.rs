//! Shared fixtures for the benchmarks.

use ddsound::channel::{apply_paths, rayleigh_tap_paths};
use ddsound::waveform::sounding_frame;
use ddsound::{FrameConfig, IqBuffer, Path, PathSet};

/// Frame sizes benchmarked, smallest first.
pub const SIZES: [(usize, usize); 3] = [(256, 128), (1024, 512), (2048, 256)];

pub fn frame(m: usize, n: usize) -> FrameConfig {
    FrameConfig::with_defaults(m, n, 100e6).expect("valid frame")
}

/// Three paths with fractional delay and Doppler inside the guard band.
pub fn sparse_channel(cfg: &FrameConfig) -> PathSet {
    let (dt, dv) = (cfg.delay_resolution(), cfg.doppler_resolution());
    PathSet::new(vec![
        Path::from_db(0.0, 0.3, 0.0, 0.4 * dv).expect("path"),
        Path::from_db(-5.0, -1.2, 7.3 * dt, -3.7 * dv).expect("path"),
        Path::from_db(-10.0, 2.0, 19.6 * dt, 6.2 * dv).expect("path"),
    ])
    .expect("nonempty")
}

/// Three Rayleigh taps of 64 sinusoids each.
pub fn diffuse_channel(cfg: &FrameConfig) -> PathSet {
    let dt = cfg.delay_resolution();
    let f = 10.0 * cfg.doppler_resolution();
    rayleigh_tap_paths(&[0.0, 4.0 * dt, 9.0 * dt], &[0.0, -5.0, -10.0], &[f, f / 2.0, f / 4.0], 64, 7)
        .expect("taps")
}

/// The sounding frame of `cfg` through `channel`, noiseless.
pub fn received(cfg: &FrameConfig, channel: &PathSet) -> IqBuffer {
    apply_paths(&sounding_frame(cfg).expect("frame"), channel).expect("channel")
}
