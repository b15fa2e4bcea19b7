//! Gray-mapped QPSK with unit symbol energy.
//!
//! The first bit of each pair sets the sign of the real part and the second
//! bit the sign of the imaginary part, giving `00 → (1+j)/√2`,
//! `01 → (1−j)/√2`, `11 → (−1−j)/√2`, `10 → (−1+j)/√2`.

use core::f64::consts::FRAC_1_SQRT_2;

use wmse_core::Complex64;

use crate::error::SimError;

fn level(bit: u8) -> f64 {
    if bit == 0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    }
}

pub fn qpsk_symbol(b0: u8, b1: u8) -> Complex64 {
    Complex64::new(level(b0), level(b1))
}

pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>, SimError> {
    if !bits.len().is_multiple_of(2) {
        return Err(SimError::OddBitCount(bits.len()));
    }
    Ok(bits.chunks_exact(2).map(|b| qpsk_symbol(b[0], b[1])).collect())
}

/// Nearest-quadrant decision for one symbol.
pub fn qpsk_decide(s: Complex64) -> (u8, u8) {
    (u8::from(s.re < 0.0), u8::from(s.im < 0.0))
}

pub fn qpsk_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| {
            let (a, b) = qpsk_decide(s);
            [a, b]
        })
        .collect()
}
