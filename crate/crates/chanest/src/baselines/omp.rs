//! Orthogonal matching pursuit with a progressive QR factorization of the
//! active set.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

use super::{EstimatorResult, EstimatorStatus};

/// Stopping controls: an atom budget plus an optional residual-power floor.
///
/// When `residual_threshold` is `None`, the floor defaults to the
/// noise-power heuristic `‖y‖²/(1+ζ)` with the stock SNR guess `ζ = 10`;
/// sweeps that know the injected noise level pass `K_p/γ_w` explicitly.
#[derive(Debug, Clone, Copy)]
pub struct OmpConfig {
    pub max_atoms: usize,
    pub residual_threshold: Option<f64>,
}

impl OmpConfig {
    pub fn new(max_atoms: usize, residual_threshold: Option<f64>) -> Result<Self> {
        if max_atoms == 0 {
            return Err(Error::InvalidParameter("OMP needs at least one atom".into()));
        }
        if let Some(t) = residual_threshold {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter("residual threshold must be nonnegative".into()));
            }
        }
        Ok(Self { max_atoms, residual_threshold })
    }

    /// Atom budget `⌈N·L·λ_guess⌉` for an expected sparsity rate.
    pub fn with_sparsity_guess(n_tx: usize, chan_len: usize, lambda_guess: f64) -> Result<Self> {
        if !(lambda_guess > 0.0 && lambda_guess <= 1.0) {
            return Err(Error::InvalidParameter("sparsity guess must lie in (0,1]".into()));
        }
        let atoms = ((n_tx * chan_len) as f64 * lambda_guess).ceil() as usize;
        Self::new(atoms.max(1), None)
    }
}

/// Greedy sparse recovery: select the column most correlated with the
/// residual, refit by least squares on the active set, repeat.
pub fn omp_estimate(y: &CVector, w: &CMatrix, cfg: &OmpConfig) -> Result<EstimatorResult> {
    let k_p = w.nrows();
    let nl = w.ncols();
    if y.len() != k_p {
        return Err(Error::InvalidDimension("observation length != pilot count".into()));
    }
    let mut cmuls = 0u64;

    let mut col_norms = Vec::with_capacity(nl);
    for j in 0..nl {
        let n = w.column(j).norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numeric(format!("column {j} of W is degenerate")));
        }
        col_norms.push(n);
    }
    cmuls += (k_p * nl) as u64;

    let threshold = cfg.residual_threshold.unwrap_or(y.norm_squared() / 11.0);

    let mut resid = y.clone();
    let mut q_cols: Vec<CVector> = Vec::new();
    // r_cols[t] holds column t of the QR upper factor (t+1 entries)
    let mut r_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut qty: Vec<Complex64> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; nl];
    let mut status = EstimatorStatus::Ok;

    loop {
        if resid.norm_squared() <= threshold {
            break;
        }
        if active.len() == cfg.max_atoms {
            break;
        }

        let corr = w.ad_mul(&resid);
        cmuls += (k_p * nl) as u64;
        let mut best = 0usize;
        let mut best_score = -1.0f64;
        for j in 0..nl {
            let score = corr[j].norm() / col_norms[j];
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        cmuls += nl as u64;
        if in_active[best] {
            status = EstimatorStatus::Stalled;
            break;
        }

        // orthogonalize the new column against the active basis
        let mut v = w.column(best).clone_owned();
        let mut rcol = Vec::with_capacity(q_cols.len() + 1);
        for q in &q_cols {
            let c = q.dotc(&v);
            v -= q * c;
            rcol.push(c);
        }
        cmuls += (2 * k_p * q_cols.len()) as u64;
        let nrm = v.norm();
        if nrm <= 1e-12 * col_norms[best] {
            // column numerically inside the active span
            status = EstimatorStatus::Stalled;
            break;
        }
        let q = v / Complex64::from(nrm);
        rcol.push(Complex64::from(nrm));
        let beta = q.dotc(&y);
        resid -= &q * beta;
        cmuls += (3 * k_p) as u64;

        q_cols.push(q);
        r_cols.push(rcol);
        qty.push(beta);
        active.push(best);
        in_active[best] = true;
    }

    // back-substitution on the QR factor for the active-set coefficients
    let t = active.len();
    let mut coeff = vec![Complex64::ZERO; t];
    for i in (0..t).rev() {
        let mut acc = qty[i];
        for j in (i + 1)..t {
            acc -= r_cols[j][i] * coeff[j];
        }
        coeff[i] = acc / r_cols[i][i];
    }
    cmuls += (t * t / 2 + t) as u64;

    let mut h = CVector::zeros(nl);
    for (i, &j) in active.iter().enumerate() {
        h[j] = coeff[i];
    }
    Ok(EstimatorResult { h_hat: h, iterations: t, cmul_count: cmuls, status })
}
