//! Ground-truth channel emulation.
//!
//! Paths act in the time domain as
//! `y(t) = Σ_i h_i · x(t - τ_i) · exp(j2π ν_i (t - τ_i))`, with `t` measured
//! from the first input sample. A fractional delay `d` (in samples) uses a
//! linear phase on the DFT of the input zero-padded to `L = len + ceil(d)`,
//! i.e. periodic sinc interpolation over that path's own support. The
//! baseband occupies `[0, B)`, so DFT bin `q` is taken as frequency `q·B/L`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::waveform::IqBuffer;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Samples between exact re-evaluations of a recursively rotated phasor.
const PHASOR_RESYNC: usize = 4096;

/// Fractional sample delays closer than this to an integer are treated as integer shifts.
const INTEGER_DELAY_TOL: f64 = 1e-9;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub delay_s: f64,
    pub doppler_hz: f64,
}

impl Path {
    pub fn new(gain: Complex64, delay_s: f64, doppler_hz: f64) -> Result<Self> {
        if !gain.is_finite() || gain.norm() == 0.0 {
            return Err(Error::InvalidPath(format!("gain {gain} must be finite and nonzero")));
        }
        if !(delay_s.is_finite() && delay_s >= 0.0) {
            return Err(Error::InvalidPath(format!("delay {delay_s} s must be finite and >= 0")));
        }
        if !doppler_hz.is_finite() {
            return Err(Error::InvalidPath(format!("Doppler {doppler_hz} Hz must be finite")));
        }
        Ok(Path { gain, delay_s, doppler_hz })
    }

    /// Path from a power in dB and a phase in radians.
    pub fn from_db(gain_db: f64, phase_rad: f64, delay_s: f64, doppler_hz: f64) -> Result<Self> {
        Self::new(Complex64::from_polar(10f64.powf(gain_db / 20.0), phase_rad), delay_s, doppler_hz)
    }

    pub fn power(&self) -> f64 {
        self.gain.norm_sqr()
    }

    pub fn gain_db(&self) -> f64 {
        10.0 * self.power().log10()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathRecord {
    gain_db: f64,
    #[serde(default)]
    phase_rad: f64,
    delay_s: f64,
    #[serde(default)]
    doppler_hz: f64,
}

/// Non-empty ordered set of paths. Serializes as a JSON array of
/// `{gain_db, phase_rad, delay_s, doppler_hz}` records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PathRecord>", into = "Vec<PathRecord>")]
pub struct PathSet {
    paths: Vec<Path>,
}

impl TryFrom<Vec<PathRecord>> for PathSet {
    type Error = Error;

    fn try_from(records: Vec<PathRecord>) -> Result<Self> {
        let paths = records
            .into_iter()
            .map(|r| Path::from_db(r.gain_db, r.phase_rad, r.delay_s, r.doppler_hz))
            .collect::<Result<Vec<_>>>()?;
        PathSet::new(paths)
    }
}

impl From<PathSet> for Vec<PathRecord> {
    fn from(set: PathSet) -> Self {
        set.paths
            .iter()
            .map(|p| PathRecord {
                gain_db: p.gain_db(),
                phase_rad: p.gain.arg(),
                delay_s: p.delay_s,
                doppler_hz: p.doppler_hz,
            })
            .collect()
    }
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidPath("a path set needs at least one path".into()));
        }
        Ok(PathSet { paths })
    }

    /// Single unit-gain path with no delay and no Doppler.
    pub fn identity() -> Self {
        PathSet { paths: vec![Path { gain: Complex64::new(1.0, 0.0), delay_s: 0.0, doppler_hz: 0.0 }] }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn max_delay_s(&self) -> f64 {
        self.paths.iter().map(|p| p.delay_s).fold(0.0, f64::max)
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(Path::power).sum()
    }

    /// Merges two sets, keeping order.
    pub fn concat(&self, other: &PathSet) -> PathSet {
        let mut paths = self.paths.clone();
        paths.extend_from_slice(&other.paths);
        PathSet { paths }
    }
}

/// Extra output samples needed to hold a delay of `delay_s` at `sample_rate`.
pub fn delay_extension(delay_s: f64, sample_rate: f64) -> usize {
    let d = delay_s * sample_rate;
    let rounded = d.round();
    if (d - rounded).abs() < INTEGER_DELAY_TOL {
        rounded as usize
    } else {
        d.ceil() as usize
    }
}

/// Passes `buf` through `paths`.
///
/// The output is `len + ceil(max_delay·B)` samples long. Paths sharing a
/// delay share one interpolated copy of the input.
pub fn apply_paths(buf: &IqBuffer, paths: &PathSet) -> Result<IqBuffer> {
    for p in paths.paths() {
        Path::new(p.gain, p.delay_s, p.doppler_hz)?;
    }
    let fs = buf.sample_rate();
    let out_len = buf.len() + delay_extension(paths.max_delay_s(), fs);

    let mut groups: BTreeMap<u64, Vec<&Path>> = BTreeMap::new();
    for p in paths.paths() {
        groups.entry(p.delay_s.to_bits()).or_default().push(p);
    }

    let mut out = vec![ZERO; out_len];
    let mut spectra = HashMap::new();
    for (bits, group) in groups {
        let delay_s = f64::from_bits(bits);
        let mut delayed = delayed_copy(buf.samples(), delay_s * fs, &mut spectra);
        delayed.resize(out_len, ZERO);
        add_rotated(&mut out, &delayed, &group, delay_s, fs);
    }
    Ok(IqBuffer::from_parts(out, fs))
}

/// `x` delayed by `delay` samples, `len + ceil(delay)` samples long.
/// Spectra of the zero-padded input are cached by padded length.
fn delayed_copy(x: &[Complex64], delay: f64, spectra: &mut HashMap<usize, Vec<Complex64>>) -> Vec<Complex64> {
    let out_len = x.len() + delay_extension(delay, 1.0);
    let rounded = delay.round();
    if (delay - rounded).abs() < INTEGER_DELAY_TOL {
        let shift = rounded as usize;
        let mut out = vec![ZERO; out_len];
        out[shift..].copy_from_slice(x);
        return out;
    }
    let spec = spectra.entry(out_len).or_insert_with(|| {
        let mut s = x.to_vec();
        s.resize(out_len, ZERO);
        fft::rows(&mut s, out_len, FftDirection::Forward);
        s
    });
    let len = out_len as f64;
    let mut out: Vec<Complex64> = spec
        .iter()
        .enumerate()
        .map(|(q, v)| {
            // Reduce q·delay modulo L before forming the phase.
            let cycles = (q as f64 * delay / len).rem_euclid(1.0);
            v * Complex64::from_polar(1.0 / len, -2.0 * PI * cycles)
        })
        .collect();
    fft::rows(&mut out, out_len, FftDirection::Inverse);
    out
}

/// `out[i] += x[i] · Σ_p g_p · exp(j2π ν_p (i/fs - τ))`.
fn add_rotated(out: &mut [Complex64], x: &[Complex64], group: &[&Path], delay_s: f64, fs: f64) {
    let (still, moving): (Vec<&&Path>, Vec<&&Path>) = group.iter().partition(|p| p.doppler_hz == 0.0);
    let static_gain: Complex64 = still.iter().map(|p| p.gain).sum();
    if moving.is_empty() {
        for (o, v) in out.iter_mut().zip(x) {
            *o += v * static_gain;
        }
        return;
    }
    let steps: Vec<Complex64> =
        moving.iter().map(|p| Complex64::from_polar(1.0, 2.0 * PI * p.doppler_hz / fs)).collect();
    let mut phasors = vec![ZERO; moving.len()];
    for (block_start, block) in out.chunks_mut(PHASOR_RESYNC).enumerate().map(|(b, c)| (b * PHASOR_RESYNC, c)) {
        let t0 = block_start as f64 / fs - delay_s;
        for (ph, p) in phasors.iter_mut().zip(&moving) {
            let cycles = (p.doppler_hz * t0).rem_euclid(1.0);
            *ph = p.gain * Complex64::from_polar(1.0, 2.0 * PI * cycles);
        }
        for (i, o) in block.iter_mut().enumerate() {
            let mut gain = static_gain;
            for (ph, step) in phasors.iter_mut().zip(&steps) {
                gain += *ph;
                *ph *= step;
            }
            *o += x[block_start + i] * gain;
        }
    }
}

/// Adds circularly symmetric white Gaussian noise at `snr_db` below the
/// buffer's mean power. `f64::INFINITY` disables the noise.
pub fn add_awgn(buf: &IqBuffer, snr_db: f64, seed: u64) -> Result<IqBuffer> {
    if buf.is_empty() {
        return Err(Error::InvalidArgument("cannot add noise to an empty buffer".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(buf.clone());
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR is NaN".into()));
    }
    let noise_power = buf.mean_power() / 10f64.powf(snr_db / 10.0);
    add_noise(buf, noise_power, seed)
}

/// Adds complex white Gaussian noise of per-sample variance `noise_power`.
pub fn add_noise(buf: &IqBuffer, noise_power: f64, seed: u64) -> Result<IqBuffer> {
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise power {noise_power} must be finite and >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (noise_power / 2.0).sqrt();
    let samples = buf
        .samples()
        .iter()
        .map(|s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re, im) * sigma
        })
        .collect();
    Ok(IqBuffer::from_parts(samples, buf.sample_rate()))
}

/// Applies a carrier frequency offset: sample `i` is rotated by `exp(j2π·cfo·i/fs)`.
pub fn apply_cfo(buf: &IqBuffer, cfo_hz: f64) -> IqBuffer {
    if cfo_hz == 0.0 {
        return buf.clone();
    }
    let per_sample = cfo_hz / buf.sample_rate();
    let samples = buf
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let cycles = (per_sample * i as f64).rem_euclid(1.0);
            s * Complex64::from_polar(1.0, 2.0 * PI * cycles)
        })
        .collect();
    IqBuffer::from_parts(samples, buf.sample_rate())
}

/// Sum-of-sinusoids Rayleigh taps with Jakes Doppler spectra.
///
/// Tap `t` becomes `n_sinusoids` paths at `delays[t]` with equal power
/// `P_t / n_sinusoids`, independent uniform phases, and Dopplers
/// `f_max · cos(θ_q)`. The arrival angles are uniform, drawn one per
/// stratum `θ_q ∈ [π q/Q, π (q+1)/Q)` so every tap reaches both edges of
/// its Doppler support.
pub fn rayleigh_tap_paths(
    delays_s: &[f64],
    powers_db: &[f64],
    max_dopplers_hz: &[f64],
    n_sinusoids: usize,
    seed: u64,
) -> Result<PathSet> {
    if delays_s.len() != powers_db.len() || delays_s.len() != max_dopplers_hz.len() {
        return Err(Error::LengthMismatch(format!(
            "{} delays, {} powers, {} max Dopplers",
            delays_s.len(),
            powers_db.len(),
            max_dopplers_hz.len()
        )));
    }
    if n_sinusoids < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 sinusoids per tap, got {n_sinusoids}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q_count = n_sinusoids as f64;
    let mut paths = Vec::with_capacity(delays_s.len() * n_sinusoids);
    for ((&delay, &power_db), &f_max) in delays_s.iter().zip(powers_db).zip(max_dopplers_hz) {
        let amplitude = (10f64.powf(power_db / 10.0) / q_count).sqrt();
        for q in 0..n_sinusoids {
            let theta = PI * (q as f64 + rng.random::<f64>()) / q_count;
            let phase = 2.0 * PI * rng.random::<f64>();
            let doppler = if f_max == 0.0 { 0.0 } else { f_max * theta.cos() };
            paths.push(Path::new(Complex64::from_polar(amplitude, phase), delay, doppler)?);
        }
    }
    PathSet::new(paths)
}

/// Deterministic paths: gain `10^(p/20)` with zero phase.
pub fn pure_doppler_paths(delays_s: &[f64], dopplers_hz: &[f64], powers_db: &[f64]) -> Result<PathSet> {
    if delays_s.len() != dopplers_hz.len() || delays_s.len() != powers_db.len() {
        return Err(Error::LengthMismatch(format!(
            "{} delays, {} Dopplers, {} powers",
            delays_s.len(),
            dopplers_hz.len(),
            powers_db.len()
        )));
    }
    let paths = delays_s
        .iter()
        .zip(dopplers_hz)
        .zip(powers_db)
        .map(|((&d, &f), &p)| Path::from_db(p, 0.0, d, f))
        .collect::<Result<Vec<_>>>()?;
    PathSet::new(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameConfig;

    fn random_buffer(len: usize, fs: f64, seed: u64) -> IqBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..len)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        IqBuffer::new(samples, fs).unwrap()
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_channel() {
        let buf = random_buffer(300, 1e6, 1);
        let out = apply_paths(&buf, &PathSet::identity()).unwrap();
        assert_eq!(out.samples(), buf.samples());
    }

    #[test]
    fn integer_delay_is_a_shift() {
        let fs = 10e6;
        let buf = random_buffer(100, fs, 2);
        let paths = PathSet::new(vec![Path::new(Complex64::new(1.0, 0.0), 7.0 / fs, 0.0).unwrap()]).unwrap();
        let out = apply_paths(&buf, &paths).unwrap();
        assert_eq!(out.len(), 107);
        assert!(out.samples()[..7].iter().all(|s| *s == ZERO));
        assert_eq!(&out.samples()[7..], buf.samples());
    }

    /// Periodic sinc (Dirichlet) kernel of period `len` over the one-sided band.
    fn periodic_sinc(u: f64, len: usize) -> Complex64 {
        let l = len as f64;
        let s = (PI * u / l).sin();
        let mag = if s.abs() < 1e-12 { 1.0 } else { (PI * u).sin() / (l * s) };
        Complex64::from_polar(mag, PI * u * (l - 1.0) / l)
    }

    #[test]
    fn fractional_delay_matches_sinc_superposition() {
        let fs = 1e6;
        let buf = random_buffer(256, fs, 3);
        let p1 = Path::new(Complex64::from_polar(0.8, 0.3), 2.5 / fs, 1500.0).unwrap();
        let p2 = Path::new(Complex64::from_polar(0.4, -1.0), 1.0 / fs, -700.0).unwrap();
        let out = apply_paths(&buf, &PathSet::new(vec![p1, p2]).unwrap()).unwrap();
        assert_eq!(out.len(), 259);

        for i in 0..out.len() {
            let t = i as f64 / fs;
            let mut expected = ZERO;
            for p in [p1, p2] {
                let d = p.delay_s * fs;
                let period = 256 + d.ceil() as usize;
                if i >= period {
                    continue;
                }
                let delayed: Complex64 =
                    (0..256).map(|j| buf.samples()[j] * periodic_sinc(i as f64 - j as f64 - d, period)).sum();
                expected += p.gain * delayed * Complex64::from_polar(1.0, 2.0 * PI * p.doppler_hz * (t - p.delay_s));
            }
            assert!((out.samples()[i] - expected).norm() < 1e-9, "sample {i}");
        }
    }

    #[test]
    fn superposition_is_linear() {
        let fs = 2e6;
        let buf = random_buffer(500, fs, 4);
        let p1 = Path::new(Complex64::from_polar(1.0, 0.2), 3.3 / fs, 250.0).unwrap();
        let p2 = Path::new(Complex64::from_polar(0.5, 1.2), 10.0 / fs, -90.0).unwrap();
        let both = apply_paths(&buf, &PathSet::new(vec![p1, p2]).unwrap()).unwrap();
        let a = apply_paths(&buf, &PathSet::new(vec![p1]).unwrap()).unwrap();
        let b = apply_paths(&buf, &PathSet::new(vec![p2]).unwrap()).unwrap();
        let mut sum = a.samples().to_vec();
        sum.resize(both.len(), ZERO);
        for (s, v) in sum.iter_mut().zip(b.samples()) {
            *s += v;
        }
        let scale = both.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max_abs_diff(&sum, both.samples()) / scale < 1e-9);
    }

    #[test]
    fn fractional_delay_preserves_energy() {
        let fs = 1e6;
        let buf = random_buffer(1000, fs, 5);
        for d in [0.25, 1.5, 17.71] {
            let paths = PathSet::new(vec![Path::new(Complex64::new(1.0, 0.0), d / fs, 0.0).unwrap()]).unwrap();
            let out = apply_paths(&buf, &paths).unwrap();
            assert!((out.energy() - buf.energy()).abs() / buf.energy() < 1e-6, "delay {d}");
        }
    }

    #[test]
    fn doppler_phase_referenced_to_delayed_time() {
        let fs = 1e3;
        let buf = IqBuffer::new(vec![Complex64::new(1.0, 0.0); 10_000], fs).unwrap();
        let path = Path::new(Complex64::new(1.0, 0.0), 4.0 / fs, 12.5).unwrap();
        let out = apply_paths(&buf, &PathSet::new(vec![path]).unwrap()).unwrap();
        for i in [4usize, 5, 4100, 9000, 10_003] {
            let expected = Complex64::from_polar(1.0, 2.0 * PI * 12.5 * (i as f64 - 4.0) / fs);
            assert!((out.samples()[i] - expected).norm() < 1e-11, "sample {i}");
        }
    }

    #[test]
    fn rejects_invalid_paths() {
        assert!(Path::new(Complex64::new(1.0, 0.0), -1e-9, 0.0).is_err());
        assert!(Path::new(Complex64::new(f64::INFINITY, 0.0), 0.0, 0.0).is_err());
        assert!(Path::new(Complex64::new(0.0, 0.0), 0.0, 0.0).is_err());
        assert!(PathSet::new(vec![]).is_err());
    }

    #[test]
    fn awgn_disabled_and_deterministic() {
        let buf = random_buffer(64, 1.0, 6);
        assert_eq!(add_awgn(&buf, f64::INFINITY, 1).unwrap(), buf);
        let a = add_awgn(&buf, 3.0, 99).unwrap();
        let b = add_awgn(&buf, 3.0, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_awgn(&buf, 3.0, 100).unwrap());
    }

    #[test]
    fn awgn_power_at_zero_db() {
        let n = 1_000_000;
        let buf = IqBuffer::new(vec![Complex64::new(1.0, 0.0); n], 1.0).unwrap();
        let noisy = add_awgn(&buf, 0.0, 7).unwrap();
        let noise_power: f64 =
            noisy.samples().iter().map(|s| (s - Complex64::new(1.0, 0.0)).norm_sqr()).sum::<f64>() / n as f64;
        assert!((noise_power - 1.0).abs() < 0.01, "measured {noise_power}");
    }

    #[test]
    fn cfo_identity_and_composition() {
        let fs = 8e6;
        let buf = random_buffer(4096, fs, 8);
        assert_eq!(apply_cfo(&buf, 0.0), buf);
        let twice = apply_cfo(&apply_cfo(&buf, fs / 4.0), fs / 4.0);
        let once = apply_cfo(&buf, fs / 2.0);
        assert!(max_abs_diff(twice.samples(), once.samples()) < 1e-12);
    }

    #[test]
    fn rayleigh_configuration() {
        let set = rayleigh_tap_paths(&[0.0, 2e-6, 4e-6], &[0.0, -5.0, -10.0], &[953.67, 476.84, 238.42], 64, 1)
            .unwrap();
        assert_eq!(set.len(), 192);
        for (tap, (delay, power_db, f_max)) in [(0.0, 0.0, 953.67), (2e-6, -5.0, 476.84), (4e-6, -10.0, 238.42)]
            .into_iter()
            .enumerate()
        {
            let taps = &set.paths()[tap * 64..(tap + 1) * 64];
            assert!(taps.iter().all(|p| p.delay_s == delay && p.doppler_hz.abs() <= f_max));
            let power: f64 = taps.iter().map(Path::power).sum();
            assert!((10.0 * power.log10() - power_db).abs() < 1e-9);
            let (lo, hi) = taps
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.doppler_hz), hi.max(p.doppler_hz)));
            assert!(hi > f_max * 0.995 && lo < -f_max * 0.995);
        }
    }

    #[test]
    fn rayleigh_static_taps() {
        let set = rayleigh_tap_paths(&[0.0, 1e-6], &[0.0, -3.0], &[0.0, 0.0], 8, 2).unwrap();
        assert!(set.paths().iter().all(|p| p.doppler_hz == 0.0));
        assert!(rayleigh_tap_paths(&[0.0], &[0.0, 1.0], &[0.0], 8, 2).is_err());
        assert!(rayleigh_tap_paths(&[0.0], &[0.0], &[0.0], 7, 2).is_err());
    }

    /// Kolmogorov-Smirnov distance of tap envelopes against the Rayleigh law.
    #[test]
    fn rayleigh_envelope_distribution() {
        let trials = 10_000;
        let mut envelopes: Vec<f64> = (0..trials)
            .map(|seed| {
                let set = rayleigh_tap_paths(&[0.0], &[0.0], &[100.0], 64, seed).unwrap();
                set.paths().iter().map(|p| p.gain).sum::<Complex64>().norm()
            })
            .collect();
        envelopes.sort_by(f64::total_cmp);
        // Unit mean power: F(r) = 1 - exp(-r^2).
        let ks = envelopes
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let f = 1.0 - (-r * r).exp();
                (f - i as f64 / trials as f64).abs().max(((i + 1) as f64 / trials as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        let critical = 1.358 / (trials as f64).sqrt();
        assert!(ks < critical, "KS statistic {ks} >= {critical}");
    }

    #[test]
    fn pure_doppler_configuration() {
        let set = pure_doppler_paths(&[0.0, 1.25e-6, 2.49e-6], &[0.0, -610.35, 1251.22], &[0.0, -5.0, -10.0]).unwrap();
        let db: Vec<f64> = set.paths().iter().map(Path::gain_db).collect();
        for (got, want) in db.iter().zip([0.0, -5.0, -10.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(set.paths().iter().all(|p| p.gain.im == 0.0 && p.gain.re > 0.0));

        let unit = pure_doppler_paths(&[0.0, 1e-6], &[5.0, 6.0], &[0.0, 0.0]).unwrap();
        assert!(unit.paths().iter().all(|p| (p.gain.norm() - 1.0).abs() < 1e-15));
        assert!(pure_doppler_paths(&[0.0], &[1.0, 2.0], &[0.0]).is_err());

        let cfg = FrameConfig::with_defaults(2048, 256, 80e6).unwrap();
        let cap = cfg.capability();
        assert!((cap.delay_resolution_s - 12.5e-9).abs() < 1e-21);
        assert!((cap.doppler_resolution_hz - 152.587_890_625).abs() < 1e-9);
        let third = set.paths()[2];
        assert!((third.delay_s / cap.delay_resolution_s - 199.2).abs() < 1e-9);
        assert!((third.doppler_hz / cap.doppler_resolution_hz - 8.2).abs() < 1e-4);
    }

    #[test]
    fn path_set_json_schema() {
        let json = r#"[{"gain_db": -3.0, "phase_rad": 0.5, "delay_s": 1e-6, "doppler_hz": -20.0},
                       {"gain_db": 0.0, "delay_s": 0.0}]"#;
        let set: PathSet = serde_json::from_str(json).unwrap();
        assert_eq!(set.len(), 2);
        assert!((set.paths()[0].gain_db() + 3.0).abs() < 1e-12);
        assert!((set.paths()[0].gain.arg() - 0.5).abs() < 1e-12);
        let back: PathSet = serde_json::from_str(&serde_json::to_string(&set).unwrap()).unwrap();
        for (a, b) in back.paths().iter().zip(set.paths()) {
            assert!((a.gain - b.gain).norm() < 1e-12);
            assert_eq!(a.delay_s, b.delay_s);
        }
        assert!(serde_json::from_str::<PathSet>("[]").is_err());
        assert!(serde_json::from_str::<PathSet>(r#"[{"gain_db": 0.0, "delay_s": -1.0}]"#).is_err());
    }
}
