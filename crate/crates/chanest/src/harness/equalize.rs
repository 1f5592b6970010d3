//! Per-subcarrier MIMO MMSE equalization and QPSK hard decisions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// Gray-mapped QPSK: bit0 picks the real sign, bit1 the imaginary sign,
/// a zero bit meaning positive. Unit symbol power.
pub fn qpsk_symbol(b0: u8, b1: u8) -> Complex64 {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(if b0 == 0 { a } else { -a }, if b1 == 0 { a } else { -a })
}

/// Hard decision by quadrant, inverse of [`qpsk_symbol`].
pub fn qpsk_demod(x: Complex64) -> (u8, u8) {
    (u8::from(x.re < 0.0), u8::from(x.im < 0.0))
}

/// Equalized data symbols and their hard decisions.
#[derive(Debug, Clone)]
pub struct Equalized {
    /// `N × K_d`: stream `n`'s estimate on data bin `j` at `(n, j)`.
    pub symbols: CMatrix,
    /// Per-stream decided bits, `2·K_d` each.
    pub bits: Vec<Vec<u8>>,
    /// Data bins whose channel estimate was identically zero; their
    /// decisions carry no information.
    pub zero_gain_bins: usize,
}

/// MMSE equalizer `x̂ = (GᴴG + γ̂_w⁻¹·I)⁻¹ Gᴴ y` applied per data bin.
///
/// `gains[j]` is the `M×N` channel gain matrix of data bin `j` in the same
/// scaling as the received bins, `received[m]` the data bins of hydrophone
/// `m`. Needs at least as many hydrophones as streams.
pub fn equalize_and_demod(
    gains: &[CMatrix],
    received: &[CVector],
    gamma_w_hat: f64,
) -> Result<Equalized> {
    let m_rx = received.len();
    if m_rx == 0 || gains.is_empty() {
        return Err(Error::InvalidDimension("nothing to equalize".into()));
    }
    let n_tx = gains[0].ncols();
    if n_tx == 0 || m_rx < n_tx {
        return Err(Error::InvalidDimension(format!(
            "MMSE equalization needs M ≥ N, got M={m_rx}, N={n_tx}"
        )));
    }
    if !(gamma_w_hat > 0.0) {
        return Err(Error::InvalidParameter("equalizer noise precision must be positive".into()));
    }
    let k_d = gains.len();
    for y in received {
        if y.len() != k_d {
            return Err(Error::InvalidDimension("received data length != bin count".into()));
        }
    }

    let reg = Complex64::from(1.0 / gamma_w_hat);
    let mut symbols = CMatrix::zeros(n_tx, k_d);
    let mut zero_gain_bins = 0usize;
    for j in 0..k_d {
        let g = &gains[j];
        if g.nrows() != m_rx || g.ncols() != n_tx {
            return Err(Error::InvalidDimension("gain matrix shape mismatch".into()));
        }
        if g.norm() == 0.0 {
            zero_gain_bins += 1;
        }
        let y = CVector::from_fn(m_rx, |m, _| received[m][j]);
        let mut a = g.ad_mul(g);
        for d in 0..n_tx {
            a[(d, d)] += reg;
        }
        let rhs = g.ad_mul(&y);
        // the γ̂_w⁻¹ ridge keeps this solvable even for degenerate estimates
        let x = a.lu().solve(&rhs).ok_or_else(|| Error::Numeric("equalizer solve failed".into()))?;
        symbols.column_mut(j).copy_from(&x);
    }

    let mut bits = vec![vec![0u8; 2 * k_d]; n_tx];
    for n in 0..n_tx {
        for j in 0..k_d {
            let (b0, b1) = qpsk_demod(symbols[(n, j)]);
            bits[n][2 * j] = b0;
            bits[n][2 * j + 1] = b1;
        }
    }
    Ok(Equalized { symbols, bits, zero_gain_bins })
}
