//! Sparse Bayesian learning with one Gaussian precision per tap, learned by
//! EM, with pruning of taps whose precisions diverge.
//!
//! Per iteration: `Σ = (γ_w·WᴴW + diag(a))⁻¹`, `μ = γ_w·Σ·Wᴴy`, then
//! `aᵢ = 1/(|μᵢ|² + Σᵢᵢ)` and `γ_w = K_p/(‖y - Wμ‖² + Tr(WΣWᴴ))`. When the
//! pilot book makes `WᴴW` diagonal the whole update collapses to `O(NL)`
//! per iteration; otherwise each iteration pays the dense inverse.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::vamp::GAMMA_CLAMP;

use super::{EstimatorResult, EstimatorStatus};

#[derive(Debug, Clone, Copy)]
pub struct SblConfig {
    pub max_iters: usize,
    /// Taps whose learned precision exceeds this are pruned to exact zero.
    pub prune_threshold: f64,
    /// Convergence tolerance on the relative change of the per-tap
    /// variance vector.
    pub tol: f64,
    /// Noise precision starting point; defaults to the `ζ = 10` heuristic.
    pub gamma_w_init: Option<f64>,
}

impl Default for SblConfig {
    fn default() -> Self {
        Self { max_iters: 200, prune_threshold: 1e8, tol: 1e-4, gamma_w_init: None }
    }
}

impl SblConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("SBL needs at least one iteration".into()));
        }
        if !(self.prune_threshold > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("SBL thresholds must be positive".into()));
        }
        Ok(())
    }
}

fn clamp(x: f64, (lo, hi): (f64, f64)) -> f64 {
    x.max(lo).min(hi)
}

pub fn sbl_estimate(y: &CVector, w: &CMatrix, cfg: &SblConfig) -> Result<EstimatorResult> {
    cfg.validate()?;
    let k_p = w.nrows();
    let nl = w.ncols();
    if y.len() != k_p {
        return Err(Error::InvalidDimension("observation length != pilot count".into()));
    }
    let mut cmuls = 0u64;

    let gram = w.ad_mul(w);
    let g = w.ad_mul(y);
    cmuls += (k_p * nl * nl + k_p * nl) as u64;

    let mut diag_max = 0.0f64;
    let mut off_max = 0.0f64;
    for i in 0..nl {
        for j in 0..nl {
            let v = gram[(i, j)].norm();
            if i == j {
                diag_max = diag_max.max(v);
            } else {
                off_max = off_max.max(v);
            }
        }
    }
    let diagonal_gram = off_max <= 1e-10 * diag_max;

    let y_norm_sq = y.norm_squared();
    let w_frob_sq = gram.trace().re;
    let (mut gamma_w, var0) = if y_norm_sq > 0.0 {
        let gw = cfg.gamma_w_init.unwrap_or(11.0 * k_p as f64 / y_norm_sq);
        let denom = y_norm_sq - k_p as f64 / gw;
        let v0 = if denom > 0.0 { denom / w_frob_sq } else { y_norm_sq / w_frob_sq };
        (gw, v0.max(1e-12))
    } else {
        (1.0, 1.0)
    };

    let mut active: Vec<usize> = (0..nl).collect();
    let mut a: Vec<f64> = vec![1.0 / var0; nl];
    let mut h = CVector::zeros(nl);
    let mut prev_var: Vec<f64> = a.iter().map(|&ai| 1.0 / ai).collect();
    let mut status = EstimatorStatus::MaxIterations;
    let mut iterations = 0usize;

    for _k in 0..cfg.max_iters {
        iterations += 1;
        if active.is_empty() {
            status = EstimatorStatus::Ok;
            break;
        }
        let n_act = active.len();

        let (mu, sigma_diag, resid, trace_term) = if diagonal_gram {
            let mut mu = vec![Complex64::ZERO; n_act];
            let mut sd = vec![0.0f64; n_act];
            let mut trace_term = 0.0;
            let mut fit = 0.0; // 2·Re(μᴴg) - μᴴ(WᴴW)μ, diagonal Gram
            for (t, &i) in active.iter().enumerate() {
                let gii = gram[(i, i)].re;
                let s = 1.0 / (gamma_w * gii + a[i]);
                let m = Complex64::from(gamma_w * s) * g[i];
                trace_term += gii * s;
                fit += 2.0 * (m.conj() * g[i]).re - gii * m.norm_sqr();
                mu[t] = m;
                sd[t] = s;
            }
            cmuls += 8 * n_act as u64;
            (mu, sd, (y_norm_sq - fit).max(0.0), trace_term)
        } else {
            let mut sys = CMatrix::zeros(n_act, n_act);
            for (ti, &i) in active.iter().enumerate() {
                for (tj, &j) in active.iter().enumerate() {
                    sys[(ti, tj)] = gram[(i, j)] * Complex64::from(gamma_w);
                }
                sys[(ti, ti)] += Complex64::from(a[i]);
            }
            cmuls += (n_act * n_act) as u64;
            let Some(sigma) = sys.try_inverse() else {
                status = EstimatorStatus::Stalled;
                break;
            };
            cmuls += (n_act * n_act * n_act) as u64;

            let g_act = CVector::from_fn(n_act, |t, _| g[active[t]]);
            let mu_vec = &sigma * &g_act * Complex64::from(gamma_w);
            cmuls += (n_act * n_act + n_act) as u64;

            // W_act·Σ, reused for Tr(WΣWᴴ)
            let mut w_act = CMatrix::zeros(k_p, n_act);
            for (t, &i) in active.iter().enumerate() {
                w_act.set_column(t, &w.column(i));
            }
            let b = &w_act * &sigma;
            cmuls += (k_p * n_act * n_act) as u64;
            let mut trace_term = 0.0;
            for row in 0..k_p {
                for t in 0..n_act {
                    trace_term += (b[(row, t)] * w_act[(row, t)].conj()).re;
                }
            }
            cmuls += (k_p * n_act) as u64;

            let resid_vec = y - &w_act * &mu_vec;
            cmuls += (k_p * n_act) as u64;

            let mu: Vec<Complex64> = (0..n_act).map(|t| mu_vec[t]).collect();
            let sd: Vec<f64> = (0..n_act).map(|t| sigma[(t, t)].re).collect();
            (mu, sd, resid_vec.norm_squared(), trace_term)
        };

        gamma_w = clamp(k_p as f64 / (resid + trace_term), GAMMA_CLAMP);

        h.fill(Complex64::ZERO);
        let mut max_rel_change = 0.0f64;
        let mut survivors: Vec<usize> = Vec::with_capacity(n_act);
        for (t, &i) in active.iter().enumerate() {
            h[i] = mu[t];
            let var_new = mu[t].norm_sqr() + sigma_diag[t];
            let a_new = 1.0 / var_new.max(1e-300);
            let rel = (var_new - prev_var[i]).abs() / prev_var[i].max(1e-300);
            max_rel_change = max_rel_change.max(rel);
            prev_var[i] = var_new;
            a[i] = a_new;
            if a_new <= cfg.prune_threshold {
                survivors.push(i);
            } else {
                h[i] = Complex64::ZERO;
            }
        }
        cmuls += 2 * n_act as u64;
        let pruned = survivors.len() != active.len();
        active = survivors;

        if !pruned && max_rel_change <= cfg.tol {
            status = EstimatorStatus::Ok;
            break;
        }
        if active.is_empty() {
            h.fill(Complex64::ZERO);
            status = EstimatorStatus::Ok;
            break;
        }
    }

    Ok(EstimatorResult { h_hat: h, iterations, cmul_count: cmuls, status })
}
