//! Sounding waveform: DD-domain frame layout, the ISFFT/SFFT pair, the
//! Heisenberg/Wigner transforms with rectangular pulses, and PAPR.
//!
//! Normalization: the `1/sqrt(NM)` factor lives in [`isfft`]/[`sfft`];
//! [`heisenberg_modulate`] is a plain per-slot inverse DFT and
//! [`wigner_demodulate`] the matching forward DFT scaled by `1/M`, so each
//! pair composes to the identity.

mod pn;

pub use pn::{generate_pn, Lfsr, DEFAULT_POLYNOMIAL, DEFAULT_SEED};

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::frame::FrameConfig;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Delay-Doppler symbols, row `k` = Doppler tap, column `l` = delay tap.
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid {
    cfg: FrameConfig,
    data: Vec<Complex64>,
}

/// Time-frequency samples, row `n` = time slot, column `m` = subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    cfg: FrameConfig,
    data: Vec<Complex64>,
}

macro_rules! grid_impl {
    ($ty:ident) => {
        impl $ty {
            /// All-zero grid shaped by `cfg`.
            pub fn zeros(cfg: FrameConfig) -> Self {
                Self { cfg, data: vec![ZERO; cfg.frame_len()] }
            }

            /// Wraps row-major `N × M` data.
            pub fn from_vec(cfg: FrameConfig, data: Vec<Complex64>) -> Result<Self> {
                if data.len() != cfg.frame_len() {
                    return Err(Error::InvalidArgument(format!(
                        "grid needs {} cells for {}x{}, got {}",
                        cfg.frame_len(),
                        cfg.n(),
                        cfg.m(),
                        data.len()
                    )));
                }
                Ok(Self { cfg, data })
            }

            pub fn cfg(&self) -> &FrameConfig {
                &self.cfg
            }

            pub fn rows(&self) -> usize {
                self.cfg.n()
            }

            pub fn cols(&self) -> usize {
                self.cfg.m()
            }

            pub fn data(&self) -> &[Complex64] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [Complex64] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<Complex64> {
                self.data
            }

            pub fn get(&self, row: usize, col: usize) -> Complex64 {
                self.data[row * self.cfg.m() + col]
            }

            pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
                let m = self.cfg.m();
                self.data[row * m + col] = value;
            }

            pub fn row(&self, row: usize) -> &[Complex64] {
                let m = self.cfg.m();
                &self.data[row * m..(row + 1) * m]
            }

            /// Sum of squared magnitudes.
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|v| v.norm_sqr()).sum()
            }
        }
    };
}

grid_impl!(DdGrid);
grid_impl!(TfGrid);

/// Complex baseband samples at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqBuffer {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl IqBuffer {
    /// Wraps samples, rejecting a non-positive rate or non-finite samples.
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("sample rate must be positive, got {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(IqBuffer { samples, sample_rate })
    }

    pub(crate) fn from_parts(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        debug_assert!(sample_rate > 0.0);
        IqBuffer { samples, sample_rate }
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![ZERO; len], sample_rate)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power `mean |s|^2` (zero for an empty buffer).
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.energy() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Copy of `len` samples starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Result<IqBuffer> {
        let end = start.checked_add(len).filter(|&e| e <= self.samples.len()).ok_or(Error::ShortBuffer {
            needed: start.saturating_add(len),
            got: self.samples.len(),
        })?;
        Ok(IqBuffer::from_parts(self.samples[start..end].to_vec(), self.sample_rate))
    }

    /// Returns `lead` zeros, then this buffer, then `tail` zeros.
    pub fn padded(&self, lead: usize, tail: usize) -> IqBuffer {
        let mut out = Vec::with_capacity(lead + self.samples.len() + tail);
        out.resize(lead, ZERO);
        out.extend_from_slice(&self.samples);
        out.resize(lead + self.samples.len() + tail, ZERO);
        IqBuffer::from_parts(out, self.sample_rate)
    }
}

/// DD-domain layouts compared in PAPR studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundingPattern {
    /// Centre pilot, zero guard columns, PN everywhere else.
    Designed,
    /// Centre pilot only; every other cell zero.
    SinglePilot,
    /// PN in every cell.
    FullPn,
}

/// Number of PN cells in the designed layout: `N·M - N·(2·l_tau + 1)`.
pub fn pn_cell_count(cfg: &FrameConfig) -> usize {
    cfg.frame_len() - cfg.n() * (2 * cfg.l_tau() + 1)
}

/// Whether column `l` lies in the zero guard band `[l_p - l_tau, l_p + l_tau]`.
pub fn is_guard_column(cfg: &FrameConfig, l: usize) -> bool {
    let lo = cfg.l_p() - cfg.l_tau();
    let hi = cfg.l_p() + cfg.l_tau();
    (lo..=hi).contains(&l)
}

/// Default PN chips for the designed layout of `cfg`.
pub fn default_pn(cfg: &FrameConfig) -> Result<Vec<f64>> {
    generate_pn(pn_cell_count(cfg), DEFAULT_POLYNOMIAL, DEFAULT_SEED)
}

/// Builds the sounding frame: unit pilot at `(k_p, l_p)`, zeros on every row
/// for `l` in `[l_p - l_tau, l_p + l_tau]`, and `±A_pn` chips filled
/// row-major over the remaining cells.
pub fn build_sounding_grid(cfg: &FrameConfig, pn: &[f64]) -> Result<DdGrid> {
    let needed = pn_cell_count(cfg);
    if pn.len() < needed {
        return Err(Error::PnTooShort { needed, got: pn.len() });
    }
    let mut grid = DdGrid::zeros(*cfg);
    let m = cfg.m();
    let a = cfg.a_pn();
    let mut chips = pn.iter();
    for k in 0..cfg.n() {
        for l in 0..m {
            if !is_guard_column(cfg, l) {
                let chip = chips.next().copied().unwrap_or_default();
                grid.data[k * m + l] = Complex64::new(a * chip, 0.0);
            }
        }
    }
    grid.set(cfg.k_p(), cfg.l_p(), Complex64::new(1.0, 0.0));
    Ok(grid)
}

/// Builds one of the comparison layouts using the default PN generator.
pub fn build_pattern(cfg: &FrameConfig, pattern: SoundingPattern) -> Result<DdGrid> {
    match pattern {
        SoundingPattern::Designed => build_sounding_grid(cfg, &default_pn(cfg)?),
        SoundingPattern::SinglePilot => {
            let mut grid = DdGrid::zeros(*cfg);
            grid.set(cfg.k_p(), cfg.l_p(), Complex64::new(1.0, 0.0));
            Ok(grid)
        }
        SoundingPattern::FullPn => {
            let chips = generate_pn(cfg.frame_len(), DEFAULT_POLYNOMIAL, DEFAULT_SEED)?;
            let a = cfg.a_pn();
            let data = chips.into_iter().map(|c| Complex64::new(a * c, 0.0)).collect();
            DdGrid::from_vec(*cfg, data)
        }
    }
}

/// Inverse symplectic finite Fourier transform:
/// `X[n,m] = 1/sqrt(NM) · Σ_k Σ_l x[k,l] · exp(j2π(nk/N - ml/M))`.
pub fn isfft(grid: &DdGrid) -> TfGrid {
    let cfg = grid.cfg;
    let mut data = grid.data.clone();
    fft::rows(&mut data, cfg.m(), FftDirection::Forward);
    fft::columns(&mut data, cfg.n(), cfg.m(), FftDirection::Inverse);
    fft::scale(&mut data, 1.0 / (cfg.frame_len() as f64).sqrt());
    TfGrid { cfg, data }
}

/// Symplectic finite Fourier transform, the exact inverse of [`isfft`].
pub fn sfft(grid: &TfGrid) -> DdGrid {
    let cfg = grid.cfg;
    let mut data = grid.data.clone();
    fft::rows(&mut data, cfg.m(), FftDirection::Inverse);
    fft::columns(&mut data, cfg.n(), cfg.m(), FftDirection::Forward);
    fft::scale(&mut data, 1.0 / (cfg.frame_len() as f64).sqrt());
    DdGrid { cfg, data }
}

/// Heisenberg transform with a rectangular pulse of one symbol: slot `n`
/// holds the (unscaled) M-point inverse DFT of row `n`, sampled at rate `B`.
pub fn heisenberg_modulate(grid: &TfGrid) -> IqBuffer {
    let mut samples = grid.data.clone();
    fft::rows(&mut samples, grid.cfg.m(), FftDirection::Inverse);
    IqBuffer::from_parts(samples, grid.cfg.sample_rate())
}

/// Wigner transform matched to [`heisenberg_modulate`]: the first `M·N`
/// samples are split into slots and forward transformed with `1/M` scaling.
pub fn wigner_demodulate(buf: &IqBuffer, cfg: &FrameConfig) -> Result<TfGrid> {
    let len = cfg.frame_len();
    if buf.len() < len {
        return Err(Error::ShortBuffer { needed: len, got: buf.len() });
    }
    let mut data = buf.samples[..len].to_vec();
    fft::rows(&mut data, cfg.m(), FftDirection::Forward);
    fft::scale(&mut data, 1.0 / cfg.m() as f64);
    Ok(TfGrid { cfg: *cfg, data })
}

/// DD grid to time-domain frame (`heisenberg_modulate ∘ isfft`).
pub fn modulate(grid: &DdGrid) -> IqBuffer {
    heisenberg_modulate(&isfft(grid))
}

/// Time-domain frame to DD grid (`sfft ∘ wigner_demodulate`).
pub fn demodulate(buf: &IqBuffer, cfg: &FrameConfig) -> Result<DdGrid> {
    Ok(sfft(&wigner_demodulate(buf, cfg)?))
}

/// Time-domain sounding frame with the default PN sequence.
pub fn sounding_frame(cfg: &FrameConfig) -> Result<IqBuffer> {
    Ok(modulate(&build_pattern(cfg, SoundingPattern::Designed)?))
}

/// Peak-to-average power ratio in dB on the critically sampled buffer.
pub fn papr(buf: &IqBuffer) -> Result<f64> {
    papr_of(buf.samples())
}

/// PAPR after band-limited `factor`× oversampling (zero-padded spectrum).
///
/// The baseband occupies `[0, B)`, so the padding goes above the occupied band.
pub fn papr_oversampled(buf: &IqBuffer, factor: usize) -> Result<f64> {
    if factor == 0 {
        return Err(Error::InvalidArgument("oversampling factor must be >= 1".into()));
    }
    if factor == 1 || buf.is_empty() {
        return papr(buf);
    }
    let len = buf.len();
    let mut spectrum = buf.samples.clone();
    fft::rows(&mut spectrum, len, FftDirection::Forward);
    spectrum.resize(len * factor, ZERO);
    fft::rows(&mut spectrum, len * factor, FftDirection::Inverse);
    papr_of(&spectrum)
}

fn papr_of(samples: &[Complex64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::ZeroBuffer);
    }
    let (peak, total) = samples
        .iter()
        .map(|s| s.norm_sqr())
        .fold((0.0f64, 0.0f64), |(p, t), v| (p.max(v), t + v));
    if peak == 0.0 {
        return Err(Error::ZeroBuffer);
    }
    let mean = total / samples.len() as f64;
    Ok(10.0 * (peak / mean).log10())
}
