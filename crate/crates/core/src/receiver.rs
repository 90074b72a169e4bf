//! Synchronization, CSF extraction, dynamic range and the OFDM reference sounder.

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::analysis::{PowerProfile, ProfileKind};
use crate::channel::{add_awgn, apply_cfo, apply_paths, delay_extension, PathSet};
use crate::error::{Error, Result};
use crate::fft;
use crate::frame::FrameConfig;
use crate::waveform::{demodulate, generate_pn, IqBuffer, DEFAULT_POLYNOMIAL, DEFAULT_SEED};
use crate::ratio_db;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Squared-magnitude sliding correlation `R_c[k]` against a length-`L` sync sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub values: Vec<f64>,
    pub sync_length: usize,
}

/// Default sync length: the first quarter of the frame.
pub fn default_sync_length(cfg: &FrameConfig) -> usize {
    cfg.frame_len() / 4
}

/// Default search window: two frames of timing uncertainty.
pub fn default_search_window(cfg: &FrameConfig) -> usize {
    2 * cfg.frame_len()
}

/// `R_c[k] = |Σ_{i<L} rx[k+i] · conj(sync[i])|²` for `k` in `[0, window)`,
/// computed by overlap-save FFT correlation.
pub fn sliding_correlation(rx: &IqBuffer, sync: &IqBuffer, window: usize) -> Result<CorrelationSeries> {
    let l = sync.len();
    if l == 0 {
        return Err(Error::InvalidArgument("sync sequence is empty".into()));
    }
    if window == 0 || l + window - 1 > rx.len() {
        return Err(Error::ShortBuffer { needed: l + window.max(1) - 1, got: rx.len() });
    }
    let p = (2 * l).next_power_of_two().max(1024);
    let hop = p - l + 1;
    let mut sync_spec = sync.samples().to_vec();
    sync_spec.resize(p, ZERO);
    fft::rows(&mut sync_spec, p, FftDirection::Forward);
    for v in &mut sync_spec {
        *v = v.conj() / p as f64;
    }
    let forward = fft::plan(p, FftDirection::Forward);
    let inverse = fft::plan(p, FftDirection::Inverse);

    let x = rx.samples();
    let mut values = Vec::with_capacity(window);
    let mut block = vec![ZERO; p];
    let mut start = 0;
    while start < window {
        let end = (start + p).min(x.len());
        block[..end - start].copy_from_slice(&x[start..end]);
        block[end - start..].fill(ZERO);
        forward.process(&mut block);
        for (b, s) in block.iter_mut().zip(&sync_spec) {
            *b *= s;
        }
        inverse.process(&mut block);
        let count = hop.min(window - start);
        values.extend(block[..count].iter().map(|c| c.norm_sqr()));
        start += hop;
    }
    Ok(CorrelationSeries { values, sync_length: l })
}

/// Index of the correlation peak; ties go to the smallest index.
pub fn find_frame_start(corr: &CorrelationSeries) -> Result<usize> {
    if corr.values.is_empty() {
        return Err(Error::InvalidArgument("empty correlation series".into()));
    }
    let mut best = 0;
    for (k, &v) in corr.values.iter().enumerate() {
        if v > corr.values[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Peak over noise level in dB, the noise level being the mean of `R_c`
/// farther than `guard` samples from the peak. Saturates to `+∞`.
pub fn sync_gain(corr: &CorrelationSeries, guard: usize) -> Result<f64> {
    let len = corr.values.len();
    let peak_index = find_frame_start(corr)?;
    if 2 * guard >= len {
        return Err(Error::DegenerateSeries { guard, len });
    }
    let (sum, count) = corr
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| k.abs_diff(peak_index) > guard)
        .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
    if count == 0 {
        return Err(Error::DegenerateSeries { guard, len });
    }
    Ok(ratio_db(corr.values[peak_index], sum / count as f64))
}

/// Correlates `rx` against the first `sync_length` samples of `frame` and
/// returns the detected frame start with the correlation series.
pub fn synchronize(
    rx: &IqBuffer,
    frame: &IqBuffer,
    sync_length: usize,
    window: usize,
) -> Result<(usize, CorrelationSeries)> {
    let sync = frame.slice(0, sync_length)?;
    let window = window.min((rx.len() + 1).saturating_sub(sync_length));
    let corr = sliding_correlation(rx, &sync, window)?;
    Ok((find_frame_start(&corr)?, corr))
}

/// Measured channel spreading function: `N` Doppler rows by `l_tau + 1`
/// delay offsets. Row `r` holds signed Doppler tap `r - N/2`; column `d`
/// holds delay `d·Δτ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Csf {
    cfg: FrameConfig,
    data: Vec<Complex64>,
    noise_floor_estimate: f64,
}

impl Csf {
    pub fn new(cfg: FrameConfig, data: Vec<Complex64>, noise_floor_estimate: f64) -> Result<Self> {
        let expected = cfg.n() * (cfg.l_tau() + 1);
        if data.len() != expected {
            return Err(Error::LengthMismatch(format!("CSF needs {expected} cells, got {}", data.len())));
        }
        if !(noise_floor_estimate.is_finite() && noise_floor_estimate >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise floor {noise_floor_estimate} must be finite and >= 0"
            )));
        }
        Ok(Csf { cfg, data, noise_floor_estimate })
    }

    pub fn cfg(&self) -> &FrameConfig {
        &self.cfg
    }

    pub fn rows(&self) -> usize {
        self.cfg.n()
    }

    pub fn cols(&self) -> usize {
        self.cfg.l_tau() + 1
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols() + col]
    }

    pub fn noise_floor_estimate(&self) -> f64 {
        self.noise_floor_estimate
    }

    /// Grid row holding signed Doppler tap `k`.
    pub fn row_of(&self, k: i64) -> usize {
        self.cfg.doppler_row(k)
    }

    /// Signed Doppler tap of `row`.
    pub fn doppler_tap(&self, row: usize) -> i64 {
        self.cfg.signed_doppler_index(row)
    }

    pub fn doppler_hz(&self, row: usize) -> f64 {
        self.cfg.row_doppler_hz(row)
    }

    pub fn delay_s(&self, col: usize) -> f64 {
        col as f64 * self.cfg.delay_resolution()
    }

    /// Strongest cell as `(row, col, value)`; ties go to the first in row-major order.
    pub fn peak(&self) -> (usize, usize, Complex64) {
        let mut best = 0;
        let mut best_power = -1.0;
        for (i, v) in self.data.iter().enumerate() {
            let p = v.norm_sqr();
            if p > best_power {
                best = i;
                best_power = p;
            }
        }
        (best / self.cols(), best % self.cols(), self.data[best])
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Copy with every cell (and the noise floor) scaled by `c`.
    pub fn scaled(&self, c: f64) -> Csf {
        Csf {
            cfg: self.cfg,
            data: self.data.iter().map(|v| v * c).collect(),
            noise_floor_estimate: self.noise_floor_estimate * c * c,
        }
    }
}

/// Median of `values` (mean of the middle pair for even lengths).
pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mid = values.len() / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if values.len() % 2 == 1 {
        return upper;
    }
    let lower = values[..mid].iter().copied().fold(f64::MIN, f64::max);
    0.5 * (lower + upper)
}

/// Demodulates a synchronized frame and cuts out the CSF region
/// `[l_p, l_p + l_tau]` on every Doppler row. The noise floor is the median
/// cell power over the pilot-free guard columns `[l_p - l_tau, l_p - 1]`.
pub fn extract_csf(rx_frame: &IqBuffer, cfg: &FrameConfig) -> Result<Csf> {
    let grid = demodulate(rx_frame, cfg)?;
    let (l_p, l_tau) = (cfg.l_p(), cfg.l_tau());
    let mut data = Vec::with_capacity(cfg.n() * (l_tau + 1));
    let mut guard = Vec::with_capacity(cfg.n() * l_tau);
    for k in 0..cfg.n() {
        let row = grid.row(k);
        data.extend_from_slice(&row[l_p..=l_p + l_tau]);
        guard.extend(row[l_p - l_tau..l_p].iter().map(|v| v.norm_sqr()));
    }
    Csf::new(*cfg, data, median(guard))
}

/// Strongest CSF cell power over the noise floor, in dB.
pub fn dynamic_range(csf: &Csf) -> f64 {
    let (_, _, peak) = csf.peak();
    ratio_db(peak.norm_sqr(), csf.noise_floor_estimate)
}

/// Single-symbol OFDM channel sounder used as a frequency-domain reference.
///
/// One symbol of `n_subcarriers` unit-magnitude PN pilots with a cyclic
/// prefix of a quarter symbol is passed through `paths`, a carrier offset
/// and AWGN. The channel transfer function is estimated by pilot division
/// and inverse transformed into a PDP. The dynamic range is the PDP peak
/// over the median tap power of the signal-free region `(cp, K - cp)`.
pub fn ofdm_reference_sounder(
    paths: &PathSet,
    cfo_hz: f64,
    snr_db: f64,
    n_subcarriers: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<(PowerProfile, f64)> {
    let k = n_subcarriers;
    if k < 8 || !k.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("subcarrier count {k} must be a power of two >= 8")));
    }
    let cp = k / 4;
    let needed = delay_extension(paths.max_delay_s(), sample_rate_hz);
    if needed > cp {
        return Err(Error::CyclicPrefixTooShort { cp, needed });
    }
    let pilots: Vec<Complex64> =
        generate_pn(k, DEFAULT_POLYNOMIAL, DEFAULT_SEED)?.into_iter().map(|c| Complex64::new(c, 0.0)).collect();
    let mut symbol = pilots.clone();
    fft::rows(&mut symbol, k, FftDirection::Inverse);
    fft::scale(&mut symbol, 1.0 / (k as f64).sqrt());
    let mut tx = symbol[k - cp..].to_vec();
    tx.extend_from_slice(&symbol);

    let tx = IqBuffer::new(tx, sample_rate_hz)?;
    let rx = add_awgn(&apply_cfo(&apply_paths(&tx, paths)?, cfo_hz), snr_db, seed)?;

    let mut spectrum = rx.samples()[cp..cp + k].to_vec();
    fft::rows(&mut spectrum, k, FftDirection::Forward);
    let mut response: Vec<Complex64> =
        spectrum.iter().zip(&pilots).map(|(y, p)| y / p / (k as f64).sqrt()).collect();
    fft::rows(&mut response, k, FftDirection::Inverse);
    let power: Vec<f64> = response.iter().map(|h| h.norm_sqr() / (k * k) as f64).collect();

    let floor = median(power[cp + 1..k - cp].to_vec());
    let peak = power.iter().copied().fold(0.0, f64::max);
    let axis = (0..k).map(|i| i as f64 / sample_rate_hz).collect();
    let profile = PowerProfile::new(axis, power, ProfileKind::Delay)?;
    Ok((profile, ratio_db(peak, floor)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_noise, Path};
    use crate::waveform::sounding_frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn random_samples(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
    }

    fn direct_correlation(rx: &[Complex64], sync: &[Complex64], window: usize) -> Vec<f64> {
        (0..window)
            .map(|k| sync.iter().enumerate().map(|(i, s)| rx[k + i] * s.conj()).sum::<Complex64>().norm_sqr())
            .collect()
    }

    #[test]
    fn fft_correlation_matches_direct_sum() {
        let rx = random_samples(4096, 1);
        let sync = random_samples(700, 2);
        let window = 4096 - 700 + 1;
        let fast = sliding_correlation(
            &IqBuffer::new(rx.clone(), 1.0).unwrap(),
            &IqBuffer::new(sync.clone(), 1.0).unwrap(),
            window,
        )
        .unwrap();
        let direct = direct_correlation(&rx, &sync, window);
        let scale = direct.iter().copied().fold(0.0, f64::max);
        for (a, b) in fast.values.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-6 * scale.max(*b));
        }
        assert!(sliding_correlation(
            &IqBuffer::new(rx, 1.0).unwrap(),
            &IqBuffer::new(sync, 1.0).unwrap(),
            window + 1
        )
        .is_err());
    }

    #[test]
    fn aligned_peak_and_saturated_gain() {
        let sync = random_samples(256, 3);
        let energy: f64 = sync.iter().map(|s| s.norm_sqr()).sum();
        let rx = IqBuffer::new(sync.clone(), 1.0).unwrap().padded(0, 2000);
        let corr = sliding_correlation(&rx, &IqBuffer::new(sync, 1.0).unwrap(), 1000).unwrap();
        assert_eq!(find_frame_start(&corr).unwrap(), 0);
        assert!((corr.values[0] - energy * energy).abs() < 1e-9 * energy * energy);
        assert_eq!(sync_gain(&corr, 256).unwrap(), f64::INFINITY);
        assert!(sync_gain(&corr, 500).is_err());
    }

    #[test]
    fn delayed_sync_found() {
        let sync = random_samples(512, 4);
        let rx = IqBuffer::new(sync.clone(), 1.0).unwrap().padded(1000, 1000);
        let corr = sliding_correlation(&rx, &IqBuffer::new(sync, 1.0).unwrap(), 2000).unwrap();
        assert_eq!(find_frame_start(&corr).unwrap(), 1000);
    }

    #[test]
    fn ties_break_low() {
        let mut values = vec![0.0; 12];
        values[5] = 3.0;
        values[9] = 3.0;
        assert_eq!(find_frame_start(&CorrelationSeries { values, sync_length: 1 }).unwrap(), 5);
        assert!(find_frame_start(&CorrelationSeries { values: vec![], sync_length: 1 }).is_err());
    }

    #[test]
    fn shift_equivariance_and_sync_length() {
        let cfg = FrameConfig::with_defaults(64, 16, 1e6).unwrap();
        let frame = sounding_frame(&cfg).unwrap();
        for lead in [0usize, 37, 500] {
            let rx = frame.padded(lead, 2 * cfg.frame_len());
            let (quarter, _) = synchronize(&rx, &frame, cfg.frame_len() / 4, 2 * cfg.frame_len()).unwrap();
            let (full, _) = synchronize(&rx, &frame, cfg.frame_len(), 2 * cfg.frame_len()).unwrap();
            assert_eq!(quarter, lead);
            assert_eq!(full, lead);
        }
    }

    #[test]
    fn identity_channel_csf() {
        let cfg = FrameConfig::with_defaults(64, 16, 1e6).unwrap();
        let csf = extract_csf(&sounding_frame(&cfg).unwrap(), &cfg).unwrap();
        assert_eq!((csf.rows(), csf.cols()), (16, 17));
        let (row, col, value) = csf.peak();
        assert_eq!((csf.doppler_tap(row), col), (0, 0));
        assert!((value - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        for (i, v) in csf.data().iter().enumerate() {
            if i != row * csf.cols() {
                assert!(v.norm() < 1e-9);
            }
        }
        assert_eq!(dynamic_range(&csf), f64::INFINITY);
    }

    #[test]
    fn integer_path_csf_gain_and_phase() {
        let cfg = FrameConfig::with_defaults(64, 16, 1e6).unwrap();
        let (dt, dv) = (cfg.delay_resolution(), cfg.doppler_resolution());
        let path = Path::new(Complex64::from_polar(0.5, 0.7), 3.0 * dt, -2.0 * dv).unwrap();
        let rx = apply_paths(&sounding_frame(&cfg).unwrap(), &PathSet::new(vec![path]).unwrap()).unwrap();
        let csf = extract_csf(&rx, &cfg).unwrap();
        let (row, col, value) = csf.peak();
        assert_eq!((csf.doppler_tap(row), col), (-2, 3));
        // Doppler phase is referenced to the pilot's position in its slot.
        let expected = path.gain * Complex64::from_polar(1.0, 2.0 * PI * path.doppler_hz * cfg.l_p() as f64 * dt);
        assert!((value - expected).norm() < 1e-9);
    }

    #[test]
    fn noise_floor_from_guard_band() {
        let cfg = FrameConfig::with_defaults(128, 32, 1e6).unwrap();
        let rx = add_noise(&sounding_frame(&cfg).unwrap(), 0.01, 5).unwrap();
        let csf = extract_csf(&rx, &cfg).unwrap();
        // The 1/M Wigner scaling leaves white noise at σ²/M per cell; the
        // median of an exponential law sits at ln 2 of its mean.
        let expected = 0.01 / 128.0 * 2f64.ln();
        assert!((csf.noise_floor_estimate() - expected).abs() < 0.1 * expected);
        assert!(dynamic_range(&csf) > 15.0);
    }

    #[test]
    fn integer_cfo_moves_peak() {
        let cfg = FrameConfig::with_defaults(128, 32, 1e6).unwrap();
        let frame = sounding_frame(&cfg).unwrap();
        let base = extract_csf(&add_awgn(&frame, 30.0, 1).unwrap(), &cfg).unwrap();
        for bins in [1i64, 4, 9] {
            let rx = add_awgn(&apply_cfo(&frame, bins as f64 * cfg.doppler_resolution()), 30.0, 1).unwrap();
            let csf = extract_csf(&rx, &cfg).unwrap();
            let (row, col, _) = csf.peak();
            assert_eq!((csf.doppler_tap(row), col), (bins, 0));
            assert!((dynamic_range(&csf) - dynamic_range(&base)).abs() < 1.0);
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn ofdm_identity_channel() {
        let (pdp, dr) = ofdm_reference_sounder(&PathSet::identity(), 0.0, f64::INFINITY, 256, 1e6, 1).unwrap();
        assert!((pdp.power[0] - 1.0).abs() < 1e-9);
        assert!(pdp.power[1..].iter().all(|p| *p < 1e-20));
        assert_eq!(dr, f64::INFINITY);
    }

    #[test]
    fn ofdm_half_subcarrier_cfo_costs_dynamic_range() {
        let k = 1024;
        let fs = 1e6;
        let (_, clean) = ofdm_reference_sounder(&PathSet::identity(), 0.0, 30.0, k, fs, 2).unwrap();
        let (_, offset) = ofdm_reference_sounder(&PathSet::identity(), 0.5 * fs / k as f64, 30.0, k, fs, 2).unwrap();
        assert!(clean - offset >= 10.0, "{clean} vs {offset}");
    }

    #[test]
    fn ofdm_rejects_short_prefix() {
        let late = PathSet::new(vec![Path::new(Complex64::new(1.0, 0.0), 100e-6, 0.0).unwrap()]).unwrap();
        assert!(matches!(
            ofdm_reference_sounder(&late, 0.0, 30.0, 256, 1e6, 1),
            Err(Error::CyclicPrefixTooShort { .. })
        ));
    }
}
