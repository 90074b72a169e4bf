//! Thin helpers over `rustfft` for row-major matrices.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub(crate) fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(len, direction)
}

/// Transforms every contiguous row of length `row_len` in place (unnormalized).
pub(crate) fn rows(data: &mut [Complex64], row_len: usize, direction: FftDirection) {
    debug_assert_eq!(data.len() % row_len, 0);
    if row_len == 1 {
        return;
    }
    plan(row_len, direction).process(data);
}

/// Transforms every column of a `rows × cols` row-major matrix in place.
pub(crate) fn columns(data: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    if rows == 1 {
        return;
    }
    let mut t = transpose(data, rows, cols);
    self::rows(&mut t, rows, direction);
    let back = transpose(&t, cols, rows);
    data.copy_from_slice(&back);
}

/// Out-of-place transpose of a `rows × cols` row-major matrix.
pub(crate) fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    const BLOCK: usize = 32;
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    out[c * rows + r] = data[r * cols + c];
                }
            }
        }
    }
    out
}

pub(crate) fn scale(data: &mut [Complex64], factor: f64) {
    for v in data {
        *v *= factor;
    }
}
