//! Maximal-length (m-sequence) PN generator.

use crate::error::{Error, Result};

/// Default degree-20 feedback polynomial (period 2^20 - 1), bit pattern
/// `x^20 + x^18 + x^17 + x^16 + x^15 + x^14 + x^12 + x^11 + x^9 + x^8 + x^7 + x^3 + 1`.
///
/// A dense polynomial is used on purpose. With a sparse trinomial the
/// register leaves a near-zero state only slowly, and when the chips are laid
/// row-major on a grid whose row length is a power of two, the decimated
/// sequence puts that low-weight stretch into a single delay column, which
/// shows up as a coherent time-domain peak.
pub const DEFAULT_POLYNOMIAL: u64 = 0x17_db89;
/// Default register seed.
pub const DEFAULT_SEED: u64 = 1;

/// Fibonacci linear-feedback shift register.
///
/// The polynomial is given as a bit pattern, bit `i` holding the coefficient
/// of `x^i`. The generated bits obey `a[t+n] = sum_{i<n} p_i a[t+i] (mod 2)`
/// and the seed holds `a[0..n]` with `a[0]` in bit 0.
#[derive(Debug, Clone)]
pub struct Lfsr {
    taps: u64,
    degree: u32,
    state: u64,
}

impl Lfsr {
    /// Validates the polynomial (degree 2..=32, constant term set, maximal
    /// period) and the seed (nonzero, fits the register).
    pub fn new(polynomial: u64, seed: u64) -> Result<Self> {
        if polynomial < 4 || polynomial.leading_zeros() < 31 {
            return Err(Error::InvalidPn(format!(
                "polynomial {polynomial:#b} must have degree between 2 and 32"
            )));
        }
        if polynomial & 1 == 0 {
            return Err(Error::InvalidPn(format!(
                "polynomial {polynomial:#b} has no constant term"
            )));
        }
        let degree = 63 - polynomial.leading_zeros();
        let mask = (1u64 << degree) - 1;
        if seed == 0 {
            return Err(Error::InvalidPn("seed must be nonzero (all-zero state is degenerate)".into()));
        }
        if seed & !mask != 0 {
            return Err(Error::InvalidPn(format!(
                "seed {seed:#b} does not fit a degree-{degree} register"
            )));
        }
        let lfsr = Lfsr { taps: polynomial & mask, degree, state: seed };
        let period = lfsr.cycle_length();
        if period != mask {
            return Err(Error::InvalidPn(format!(
                "polynomial {polynomial:#b} is not primitive (cycle length {period}, expected {mask})"
            )));
        }
        Ok(lfsr)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Maximal period `2^degree - 1`.
    pub fn period(&self) -> usize {
        ((1u64 << self.degree) - 1) as usize
    }

    fn cycle_length(&self) -> u64 {
        let start = self.state;
        let mut probe = self.clone();
        let mut steps = 0u64;
        loop {
            probe.next_bit();
            steps += 1;
            if probe.state == start || steps > (1u64 << self.degree) {
                return steps;
            }
        }
    }

    /// Emits the next register bit.
    pub fn next_bit(&mut self) -> u8 {
        let out = (self.state & 1) as u8;
        let feedback = (self.state & self.taps).count_ones() as u64 & 1;
        self.state = (self.state >> 1) | (feedback << (self.degree - 1));
        out
    }

    /// Emits the next chip mapped `0 -> +1`, `1 -> -1`.
    pub fn next_chip(&mut self) -> f64 {
        if self.next_bit() == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Generates `length` chips of the m-sequence defined by `polynomial` and
/// `seed`; lengths beyond one period repeat periodically.
pub fn generate_pn(length: usize, polynomial: u64, seed: u64) -> Result<Vec<f64>> {
    let mut lfsr = Lfsr::new(polynomial, seed)?;
    let period = lfsr.period();
    let first: Vec<f64> = (0..length.min(period)).map(|_| lfsr.next_chip()).collect();
    if length <= period {
        return Ok(first);
    }
    let mut full = Vec::with_capacity(length);
    full.extend_from_slice(&first);
    while full.len() < length {
        let take = (length - full.len()).min(period);
        full.extend_from_slice(&first[..take]);
    }
    Ok(full)
}
