//! Error metrics reported by the experiment harness.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// dB floor standing in for -∞ when an error is exactly zero.
pub const NMSE_FLOOR_DB: f64 = -320.0;

/// `10·log₁₀(‖ĥ-h‖²/‖h‖²)`; a zero truth vector is rejected.
pub fn nmse_db(h_hat: &CVector, h_true: &CVector) -> Result<f64> {
    if h_hat.len() != h_true.len() {
        return Err(Error::InvalidDimension("NMSE length mismatch".into()));
    }
    let denom = h_true.norm_squared();
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter("NMSE against a zero truth is undefined".into()));
    }
    let err = (h_hat - h_true).norm_squared();
    Ok(if err == 0.0 { NMSE_FLOOR_DB } else { 10.0 * (err / denom).log10() })
}

/// NMSE of several stacked estimates against their truths, pooled over the
/// total energy (one number per trial for a MIMO link).
pub fn pooled_nmse_db(pairs: &[(&CVector, &CVector)]) -> Result<f64> {
    let mut err = 0.0;
    let mut denom = 0.0;
    for (h_hat, h_true) in pairs {
        if h_hat.len() != h_true.len() {
            return Err(Error::InvalidDimension("NMSE length mismatch".into()));
        }
        err += (*h_hat - *h_true).norm_squared();
        denom += h_true.norm_squared();
    }
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter("NMSE against a zero truth is undefined".into()));
    }
    Ok(if err == 0.0 { NMSE_FLOOR_DB } else { 10.0 * (err / denom).log10() })
}

/// Mean squared error of equalized symbols against the transmitted ones,
/// in dB.
pub fn symbol_mse_db(estimated: &CMatrix, transmitted: &CMatrix) -> Result<f64> {
    if estimated.shape() != transmitted.shape() {
        return Err(Error::InvalidDimension("symbol MSE shape mismatch".into()));
    }
    let n = (estimated.nrows() * estimated.ncols()) as f64;
    if n == 0.0 {
        return Err(Error::InvalidDimension("no symbols".into()));
    }
    let mse = (estimated - transmitted).norm_squared() / n;
    Ok(if mse == 0.0 { NMSE_FLOOR_DB } else { 10.0 * mse.log10() })
}

/// Fraction of differing bits.
pub fn bit_error_rate(decided: &[Vec<u8>], sent: &[Vec<u8>]) -> Result<f64> {
    if decided.len() != sent.len() {
        return Err(Error::InvalidDimension("BER stream count mismatch".into()));
    }
    let mut errors = 0usize;
    let mut total = 0usize;
    for (d, s) in decided.iter().zip(sent) {
        if d.len() != s.len() {
            return Err(Error::InvalidDimension("BER bit count mismatch".into()));
        }
        errors += d.iter().zip(s).filter(|(a, b)| a != b).count();
        total += d.len();
    }
    if total == 0 {
        return Err(Error::InvalidDimension("no bits".into()));
    }
    Ok(errors as f64 / total as f64)
}
