//! OTFS frame geometry and sounding capability.
//!
//! A frame is an `N × M` delay-Doppler grid: row `k` is a Doppler tap,
//! column `l` a delay tap. The time-frequency grid is critically sampled,
//! so the symbol duration is `T = 1/Δf` and the bandwidth is `B = M·Δf`.
//! The pilot sits at the grid centre `(k_p, l_p) = (N/2, M/2)` and is
//! surrounded by `l_tau` guard columns on each side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid geometry and pilot layout shared by every stage of the sounder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameConfigRepr", into = "FrameConfigRepr")]
pub struct FrameConfig {
    m: usize,
    n: usize,
    bandwidth_hz: f64,
    l_tau: usize,
    a_pn: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameConfigRepr {
    m: usize,
    n: usize,
    bandwidth_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l_tau: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a_pn: Option<f64>,
}

impl TryFrom<FrameConfigRepr> for FrameConfig {
    type Error = Error;

    fn try_from(r: FrameConfigRepr) -> Result<Self> {
        FrameConfig::new(r.m, r.n, r.bandwidth_hz, r.l_tau.unwrap_or(r.m / 4), r.a_pn.unwrap_or(1.0))
    }
}

impl From<FrameConfig> for FrameConfigRepr {
    fn from(c: FrameConfig) -> Self {
        FrameConfigRepr {
            m: c.m,
            n: c.n,
            bandwidth_hz: c.bandwidth_hz,
            l_tau: Some(c.l_tau),
            a_pn: Some(c.a_pn),
        }
    }
}

/// Smallest accepted delay-tap count (a guard band needs `M/2 - 1 >= 1`).
pub const MIN_DELAY_TAPS: usize = 4;
/// Smallest accepted Doppler-tap count.
pub const MIN_DOPPLER_TAPS: usize = 2;

impl FrameConfig {
    /// Builds a validated configuration.
    ///
    /// `m` and `n` must be powers of two; `l_tau` must leave room for the
    /// guard band on both sides of the pilot (`1 <= l_tau <= M/2 - 1`).
    pub fn new(m: usize, n: usize, bandwidth_hz: f64, l_tau: usize, a_pn: f64) -> Result<Self> {
        if !m.is_power_of_two() || m < MIN_DELAY_TAPS {
            return Err(Error::InvalidFrame(format!(
                "M = {m} must be a power of two >= {MIN_DELAY_TAPS}"
            )));
        }
        if !n.is_power_of_two() || n < MIN_DOPPLER_TAPS {
            return Err(Error::InvalidFrame(format!(
                "N = {n} must be a power of two >= {MIN_DOPPLER_TAPS}"
            )));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::InvalidFrame(format!(
                "bandwidth must be positive and finite, got {bandwidth_hz}"
            )));
        }
        if !a_pn.is_finite() {
            return Err(Error::InvalidFrame(format!("A_pn must be finite, got {a_pn}")));
        }
        let max = m / 2 - 1;
        if l_tau == 0 || l_tau > max {
            return Err(Error::GuardOverflow { l_tau, m, max });
        }
        Ok(FrameConfig { m, n, bandwidth_hz, l_tau, a_pn })
    }

    /// Configuration with the default guard span `l_tau = M/4` and unit PN amplitude.
    pub fn with_defaults(m: usize, n: usize, bandwidth_hz: f64) -> Result<Self> {
        Self::new(m, n, bandwidth_hz, m / 4, 1.0)
    }

    /// Delay taps `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Doppler taps `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// Measurable-delay tap span.
    pub fn l_tau(&self) -> usize {
        self.l_tau
    }

    /// PN symbol amplitude.
    pub fn a_pn(&self) -> f64 {
        self.a_pn
    }

    /// Returns a copy with a different PN amplitude.
    pub fn with_a_pn(mut self, a_pn: f64) -> Self {
        self.a_pn = a_pn;
        self
    }

    /// Subcarrier spacing `Δf = B/M`.
    pub fn delta_f(&self) -> f64 {
        self.bandwidth_hz / self.m as f64
    }

    /// Symbol duration `T = 1/Δf`.
    pub fn symbol_duration(&self) -> f64 {
        self.m as f64 / self.bandwidth_hz
    }

    /// Pilot Doppler index.
    pub fn k_p(&self) -> usize {
        self.n / 2
    }

    /// Pilot delay index.
    pub fn l_p(&self) -> usize {
        self.m / 2
    }

    /// Samples in one frame, `M·N`.
    pub fn frame_len(&self) -> usize {
        self.m * self.n
    }

    /// Sample rate of the time-domain frame (equal to the bandwidth).
    pub fn sample_rate(&self) -> f64 {
        self.bandwidth_hz
    }

    /// Delay resolution `Δτ = 1/B`.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Doppler resolution `Δν = 1/(N·T)`.
    pub fn doppler_resolution(&self) -> f64 {
        self.bandwidth_hz / (self.m as f64 * self.n as f64)
    }

    /// Frame duration `N·T`.
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.symbol_duration()
    }

    /// Signed Doppler tap of grid row `k`, in `[-N/2, N/2)`.
    pub fn signed_doppler_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        (k as i64 - self.k_p() as i64 + n / 2).rem_euclid(n) - n / 2
    }

    /// Grid row holding signed Doppler tap `offset` (taken modulo `N`).
    pub fn doppler_row(&self, offset: i64) -> usize {
        (self.k_p() as i64 + offset).rem_euclid(self.n as i64) as usize
    }

    /// Signed Doppler frequency of grid row `k`.
    pub fn row_doppler_hz(&self, k: usize) -> f64 {
        self.signed_doppler_index(k) as f64 * self.doppler_resolution()
    }

    /// Sounding capability of this frame.
    pub fn capability(&self) -> SoundingCapability {
        capability_metrics(self)
    }
}

/// Resolution and range limits of a sounding frame, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundingCapability {
    pub delay_resolution_s: f64,
    pub doppler_resolution_hz: f64,
    pub max_delay_s: f64,
    pub max_doppler_hz: f64,
    pub frame_length_s: f64,
    pub min_si_s: f64,
}

/// Computes delay/Doppler resolution, maximum measurable delay and Doppler,
/// frame length and minimum measurable stationary interval.
pub fn capability_metrics(cfg: &FrameConfig) -> SoundingCapability {
    let delay_resolution_s = cfg.delay_resolution();
    let frame_length_s = cfg.frame_duration();
    let doppler_resolution_hz = 1.0 / frame_length_s;
    SoundingCapability {
        delay_resolution_s,
        doppler_resolution_hz,
        max_delay_s: cfg.l_tau() as f64 * delay_resolution_s,
        max_doppler_hz: doppler_resolution_hz * (cfg.n() / 2) as f64,
        frame_length_s,
        min_si_s: frame_length_s,
    }
}
