//! Reference channel estimators sharing the pilot measurement model.
//!
//! Every estimator consumes the pilot observation and the measurement
//! matrix (or its SVD) and returns the stacked `NL` tap estimate together
//! with an instrumented complex-multiply count. Divisions count as one
//! multiply, additions are free, and one general matrix inverse of size `n`
//! is booked at `n³`.

mod omp;
mod sbl;

pub use omp::{omp_estimate, OmpConfig};
pub use sbl::{sbl_estimate, SblConfig};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CVector, SvdFactors};
use crate::vamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorStatus {
    Ok,
    /// The system was rank deficient; the estimate is the minimum-norm
    /// solution over the numerical row space.
    RankDeficient,
    /// The iteration cap was hit before the convergence test fired.
    MaxIterations,
    /// A numerical stall (repeated or dependent atom, singular system).
    Stalled,
    Diverged,
}

impl EstimatorStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorStatus::Ok => "ok",
            EstimatorStatus::RankDeficient => "rank_deficient",
            EstimatorStatus::MaxIterations => "max_iter",
            EstimatorStatus::Stalled => "stalled",
            EstimatorStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub h_hat: CVector,
    pub iterations: usize,
    pub cmul_count: u64,
    pub status: EstimatorStatus,
}

/// Minimum-norm least squares over the numerical rank:
/// `ĥ = V·diag(1/sₙ)·Uᴴy`.
pub fn ls_estimate(y: &CVector, svd: &SvdFactors) -> Result<EstimatorResult> {
    if y.len() != svd.nrows() {
        return Err(Error::InvalidDimension("observation length != pilot count".into()));
    }
    let r = svd.rank();
    let nl = svd.ncols();
    let mut z = svd.u.ad_mul(y);
    for i in 0..r {
        z[i] /= Complex64::from(svd.s[i]);
    }
    let h = &svd.v * z;
    let cmul_count = (svd.nrows() * r + r + nl * r) as u64;
    let status = if r < nl { EstimatorStatus::RankDeficient } else { EstimatorStatus::Ok };
    Ok(EstimatorResult { h_hat: h, iterations: 1, cmul_count, status })
}

/// Regularized linear MMSE with a flat Gaussian prior of variance
/// `prior_variance`: `ĥ = (γ_w WᴴW + σ_h⁻²I)⁻¹ γ_w Wᴴy`, evaluated through
/// the same SVD machinery as the message-passing LMMSE stage with a zero
/// prior mean.
pub fn lmmse_estimate(
    y: &CVector,
    svd: &SvdFactors,
    prior_variance: f64,
    gamma_w: f64,
) -> Result<EstimatorResult> {
    if !(prior_variance > 0.0) || !(gamma_w > 0.0) {
        return Err(Error::InvalidParameter("LMMSE needs positive prior variance and γ_w".into()));
    }
    let r2 = CVector::zeros(svd.ncols());
    let (h, _) = vamp::lmmse_stage(&r2, 1.0 / prior_variance, gamma_w, svd, y)?;
    let r = svd.rank();
    let cmul_count = (svd.nrows() * r + 2 * svd.ncols() * r + 5 * r) as u64;
    Ok(EstimatorResult { h_hat: h, iterations: 1, cmul_count, status: EstimatorStatus::Ok })
}
