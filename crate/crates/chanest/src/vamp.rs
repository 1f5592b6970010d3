//! The EM-VAMP estimation loop.
//!
//! One iteration alternates two stages connected by extrinsic
//! (Gaussian-division) messages:
//!
//! 1. the separable BG denoiser acting on the message `(r₁, γ₁)`, followed
//!    by the EM refresh of the prior parameters `(λ, γ_h)`;
//! 2. the LMMSE stage combining the likelihood `CN(y; Wh, γ_w⁻¹I)` with the
//!    message `(r₂, γ₂)`, followed by the EM refresh of `γ_w`.
//!
//! The LMMSE stage runs in the SVD domain. With `W = U·diag(s)·Vᴴ` thin
//! (rank `R`, ambient dimension `NL`), the posterior mean is
//!
//! ```text
//!     ĥ₂ = r₂ + V·d ⊙ (γ_w·s·(Uᴴy) - γ_w·s²·(Vᴴr₂)),    d = 1/(γ_w s² + γ₂)
//! ```
//!
//! which equals `(γ_w WᴴW + γ₂I)⁻¹(γ_w Wᴴy + γ₂r₂)` including the
//! rank-deficient directions, where the prior message passes through
//! untouched. The matching divergence is the full-dimension average
//!
//! ```text
//!     α₂ = [ (NL - R) + Σₙ γ₂/(γ_w sₙ² + γ₂) ] / NL = (γ₂/NL)·Tr[D]
//! ```
//!
//! EM and estimation iterations coincide; a fixed-hyperparameter mode skips
//! the EM refreshes and runs plain VAMP.

use num_complex::Complex64;

use crate::channel::BgParams;
use crate::denoiser::{bg_posterior, gaussian_division, ALPHA_CLAMP};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, SvdFactors};

/// EM estimates of `λ` are clamped to this band.
pub const LAMBDA_CLAMP: (f64, f64) = (1e-6, 1.0 - 1e-6);
/// EM estimates of `γ_h` and `γ_w` are clamped to this band.
pub const GAMMA_CLAMP: (f64, f64) = (1e-8, 1e12);

fn clamp(x: f64, (lo, hi): (f64, f64)) -> f64 {
    x.max(lo).min(hi)
}

/// Learned prior and noise parameters `θ = (λ, γ_h, γ_w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub lambda: f64,
    pub gamma_h: f64,
    pub gamma_w: f64,
}

impl Hyperparams {
    pub fn new(lambda: f64, gamma_h: f64, gamma_w: f64) -> Result<Self> {
        let p = Self { lambda, gamma_h, gamma_w };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("λ = {} outside (0,1)", self.lambda)));
        }
        if !(self.gamma_h > 0.0 && self.gamma_h.is_finite()) || !(self.gamma_w > 0.0 && self.gamma_w.is_finite()) {
            return Err(Error::InvalidParameter("precisions must be positive and finite".into()));
        }
        Ok(())
    }

    fn clamped(self) -> Self {
        Self {
            lambda: clamp(self.lambda, LAMBDA_CLAMP),
            gamma_h: clamp(self.gamma_h, GAMMA_CLAMP),
            gamma_w: clamp(self.gamma_w, GAMMA_CLAMP),
        }
    }
}

/// Loop controls. `zeta` is the linear SNR guess feeding the `γ_w`
/// initialization; `damping` < 1 blends each `(r₁, γ₁)` update with the
/// previous iterate (1 leaves the schedule undamped).
///
/// `theta_tol` guards the stopping test while EM is active: a pilot book
/// with equal singular values (exactly orthogonal sequences) makes the
/// LMMSE extrinsic independent of the incoming message, so `r₁` freezes
/// after the first pass and the `ξ` test alone would fire while the
/// hyperparameters are still adapting. EM runs therefore also require the
/// relative change of `(λ, γ_h, γ_w)` to drop below `theta_tol`;
/// fixed-hyperparameter runs use the plain `ξ` rule.
#[derive(Debug, Clone, Copy)]
pub struct VampConfig {
    pub k_max: usize,
    pub xi_t: f64,
    pub zeta: f64,
    pub damping: f64,
    pub theta_tol: f64,
}

impl Default for VampConfig {
    fn default() -> Self {
        Self { k_max: 50, xi_t: 1e-6, zeta: 10.0, damping: 1.0, theta_tol: 1e-4 }
    }
}

impl VampConfig {
    fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be at least 1".into()));
        }
        if !(self.xi_t > 0.0) || !(self.theta_tol > 0.0) {
            return Err(Error::InvalidParameter("stopping thresholds must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter("damping must lie in (0,1]".into()));
        }
        Ok(())
    }
}

/// Hyperparameter handling for a run.
#[derive(Debug, Clone, Copy)]
pub enum Mode {
    /// Learn `θ` by EM, initialized from the observation heuristics.
    Em,
    /// Learn `θ` by EM from the given starting point.
    EmFrom(Hyperparams),
    /// Plain VAMP with `θ` held fixed.
    Fixed(Hyperparams),
}

/// Message state after the final executed iteration.
#[derive(Debug, Clone)]
pub struct VampState {
    pub r1: CVector,
    pub gamma1: f64,
    pub r2: CVector,
    pub gamma2: f64,
    pub h_hat1: CVector,
    pub h_hat2: CVector,
    pub alpha1: f64,
    pub alpha2: f64,
    pub iteration: usize,
    pub xi: f64,
}

/// One per-iteration record.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub lambda: f64,
    pub gamma_h: f64,
    pub gamma_w: f64,
    pub xi: f64,
    /// NMSE of `ĥ₁` against ground truth, when a truth vector was supplied.
    pub nmse_db: Option<f64>,
    /// Relative residual of `γ₂r₂ + γ₁r₁ = η₁ĥ₁`, a per-iteration check of
    /// the Gaussian-division algebra.
    pub msg_identity_rel_err: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VampTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VampStatus {
    Converged,
    MaxIterations,
    /// The α clamp was pinned for three consecutive iterations or the
    /// stopping statistic went non-finite; `h_hat` is the last completed
    /// denoiser output.
    Diverged,
}

/// Result of one estimation run.
#[derive(Debug, Clone)]
pub struct VampOutcome {
    /// `ĥ₁` of the final executed iteration (the algorithm's output line).
    pub h_hat: CVector,
    pub hyperparams: Hyperparams,
    pub trace: VampTrace,
    pub iterations: usize,
    pub status: VampStatus,
    pub cmul_count: u64,
    /// Whether the `γ_h` initialization fell back to its guarded form.
    pub init_fallback: bool,
    pub state: VampState,
}

/// Observation-driven starting point for `θ`:
/// `γ_w = (1+ζ)K_p/‖y‖²`, `λ = 0.95`, `γ_h = ‖W‖_F²·λ/(‖y‖² - K_p/γ_w)`.
///
/// Returns the parameters and whether the `γ_h` rule fell back to
/// `‖W‖_F²·λ/‖y‖²` because its denominator was not positive (possible for
/// SNR guesses `ζ ≤ 0`).
pub fn init_hyperparams(y: &CVector, w: &CMatrix, zeta: f64) -> Result<(Hyperparams, bool)> {
    if y.len() != w.nrows() {
        return Err(Error::InvalidDimension("observation length != pilot count".into()));
    }
    init_from_energies(y.norm_squared(), w.norm_squared(), y.len(), zeta)
}

fn init_from_energies(y_norm_sq: f64, w_frob_sq: f64, k_p: usize, zeta: f64) -> Result<(Hyperparams, bool)> {
    if !(y_norm_sq > 0.0) {
        return Err(Error::InvalidParameter("observation must be nonzero".into()));
    }
    let lambda = 0.95;
    let gamma_w = (1.0 + zeta) * k_p as f64 / y_norm_sq;
    if !(gamma_w > 0.0 && gamma_w.is_finite()) {
        return Err(Error::InvalidParameter(format!("SNR guess ζ = {zeta} gives no usable γ_w")));
    }
    let denom = y_norm_sq - k_p as f64 / gamma_w;
    let (gamma_h, fallback) = if denom > 0.0 {
        (w_frob_sq * lambda / denom, false)
    } else {
        (w_frob_sq * lambda / y_norm_sq, true)
    };
    Ok((Hyperparams { lambda, gamma_h, gamma_w }.clamped(), fallback))
}

/// LMMSE stage in SVD form; returns `(ĥ₂, α₂)`.
pub fn lmmse_stage(
    r2: &CVector,
    gamma2: f64,
    gamma_w: f64,
    svd: &SvdFactors,
    y: &CVector,
) -> Result<(CVector, f64)> {
    check_lmmse_inputs(r2, gamma2, gamma_w, svd, y)?;
    let uy = svd.u.ad_mul(y);
    let mut cmuls = 0u64;
    let (h2, alpha2, _) = lmmse_inner(r2, gamma2, gamma_w, svd, &uy, &mut cmuls);
    Ok((h2, alpha2))
}

fn check_lmmse_inputs(r2: &CVector, gamma2: f64, gamma_w: f64, svd: &SvdFactors, y: &CVector) -> Result<()> {
    if y.len() != svd.nrows() || r2.len() != svd.ncols() {
        return Err(Error::InvalidDimension("LMMSE stage dimension mismatch".into()));
    }
    if !(gamma2 > 0.0) || !(gamma_w > 0.0) {
        return Err(Error::InvalidParameter("LMMSE stage needs positive precisions".into()));
    }
    Ok(())
}

/// Shared core: `uy = Uᴴy` is caller-cached. Also returns `Vᴴĥ₂`, which the
/// `γ_w` update reuses to evaluate the residual in the SVD domain.
fn lmmse_inner(
    r2: &CVector,
    gamma2: f64,
    gamma_w: f64,
    svd: &SvdFactors,
    uy: &CVector,
    cmuls: &mut u64,
) -> (CVector, f64, CVector) {
    let nl = svd.ncols();
    let r = svd.rank();
    let vh_r2 = svd.v.ad_mul(r2);
    *cmuls += (nl * r) as u64;

    let mut t = CVector::zeros(r);
    let mut alpha_sum = (nl - r) as f64;
    for i in 0..r {
        let s = svd.s[i];
        let d = 1.0 / (gamma_w * s * s + gamma2);
        t[i] = Complex64::from(d * gamma_w * s) * (uy[i] - Complex64::from(s) * vh_r2[i]);
        alpha_sum += gamma2 * d;
    }
    *cmuls += 5 * r as u64;

    let h2 = r2 + &svd.v * &t;
    *cmuls += (nl * r) as u64;
    let vh_h2 = vh_r2 + t;
    let alpha2 = clamp(alpha_sum / nl as f64, ALPHA_CLAMP);
    (h2, alpha2, vh_h2)
}

/// M-step for the sparsity rate: the mean posterior support probability.
pub fn em_update_lambda(pi: &[f64]) -> f64 {
    let mean = pi.iter().sum::<f64>() / pi.len() as f64;
    clamp(mean, LAMBDA_CLAMP)
}

/// M-step for the nonzero-tap precision. Falls back to `prev_gamma_h` if
/// the posterior support mass vanished entirely (λ pinned at its floor).
pub fn em_update_gamma_h(pi: &[f64], mu: &CVector, nu: f64, lambda_k: f64, prev_gamma_h: f64) -> f64 {
    let nl = pi.len() as f64;
    let s: f64 = pi.iter().enumerate().map(|(i, &p)| p * (mu[i].norm_sqr() + nu)).sum();
    if !(s > 0.0) || !s.is_finite() {
        return prev_gamma_h;
    }
    clamp(lambda_k * nl / s, GAMMA_CLAMP)
}

/// M-step for the noise precision:
/// `γ_w = K_p / (‖y - Wĥ₂‖² + Σₙ sₙ²/(γ_w_prev·sₙ² + γ₂))`.
pub fn em_update_gamma_w(
    y: &CVector,
    svd: &SvdFactors,
    h2: &CVector,
    gamma2: f64,
    gamma_w_prev: f64,
) -> f64 {
    let vh_h2 = svd.v.ad_mul(h2);
    let uy = svd.u.ad_mul(y);
    em_gamma_w_from_svd(y.norm_squared(), &uy, &vh_h2, svd, gamma2, gamma_w_prev, &mut 0)
}

fn em_gamma_w_from_svd(
    y_norm_sq: f64,
    uy: &CVector,
    vh_h2: &CVector,
    svd: &SvdFactors,
    gamma2: f64,
    gamma_w_prev: f64,
    cmuls: &mut u64,
) -> f64 {
    let k_p = svd.nrows() as f64;
    let r = svd.rank();
    // ‖y - U·(s ⊙ Vᴴĥ₂)‖² evaluated without leaving the SVD domain
    let mut cross = 0.0;
    let mut z_norm_sq = 0.0;
    let mut trace = 0.0;
    for i in 0..r {
        let s = svd.s[i];
        let z = Complex64::from(s) * vh_h2[i];
        cross += (uy[i].conj() * z).re;
        z_norm_sq += z.norm_sqr();
        trace += s * s / (gamma_w_prev * s * s + gamma2);
    }
    *cmuls += 6 * r as u64;
    let resid = (y_norm_sq - 2.0 * cross + z_norm_sq).max(0.0);
    clamp(k_p / (resid + trace), GAMMA_CLAMP)
}

/// Run the full loop; see [`run_em_vamp_traced`].
pub fn run_em_vamp(y: &CVector, svd: &SvdFactors, config: &VampConfig, mode: Mode) -> Result<VampOutcome> {
    run_em_vamp_traced(y, svd, config, mode, None)
}

/// Run the full loop, recording NMSE against `truth` per iteration when
/// given.
///
/// Estimation proceeds until `ξ = ‖r₁⁺-r₁‖²/‖r₁⁺‖² ≤ ξ_T`, the iteration
/// cap, or divergence. The returned estimate is the denoiser output of the
/// final executed iteration.
pub fn run_em_vamp_traced(
    y: &CVector,
    svd: &SvdFactors,
    config: &VampConfig,
    mode: Mode,
    truth: Option<&CVector>,
) -> Result<VampOutcome> {
    config.validate()?;
    let nl = svd.ncols();
    let k_p = svd.nrows();
    if y.len() != k_p {
        return Err(Error::InvalidDimension("observation length != pilot count".into()));
    }
    if let Some(t) = truth {
        if t.len() != nl {
            return Err(Error::InvalidDimension("truth length != NL".into()));
        }
    }

    let mut cmuls = 0u64;
    let y_norm_sq = y.norm_squared();
    let em_active = !matches!(mode, Mode::Fixed(_));
    let (mut theta, init_fallback) = match mode {
        Mode::Em => {
            if y_norm_sq > 0.0 {
                init_from_energies(y_norm_sq, svd.frob_sq(), k_p, config.zeta)?
            } else {
                // degenerate all-zero observation: any finite start decays
                (Hyperparams { lambda: 0.95, gamma_h: 1.0, gamma_w: 1.0 }, true)
            }
        }
        Mode::EmFrom(t) | Mode::Fixed(t) => {
            t.validate()?;
            (t.clamped(), false)
        }
    };

    let uy = svd.u.ad_mul(y);
    cmuls += (k_p * svd.rank()) as u64;

    let mut r1 = CVector::zeros(nl);
    let mut gamma1 = 1.0f64;
    let mut trace = VampTrace::default();
    let mut status = VampStatus::MaxIterations;
    let mut clamp_streak = 0usize;
    let mut h1_out = CVector::zeros(nl);
    let mut state: Option<VampState> = None;

    for k in 1..=config.k_max {
        let theta_before = theta;
        let prior = BgParams { lambda: theta.lambda, gamma_h: theta.gamma_h };
        let den = bg_posterior(&r1, gamma1, &prior)?;
        cmuls += 4 * nl as u64;

        let (r2, gamma2) = match gaussian_division(&den.h_hat, den.alpha, &r1, gamma1) {
            Ok(v) => v,
            Err(_) => {
                status = VampStatus::Diverged;
                h1_out = den.h_hat;
                break;
            }
        };
        cmuls += 2 * nl as u64;

        // diagnostic: γ₂r₂ + γ₁r₁ must equal η₁ĥ₁ up to roundoff
        let msg_identity_rel_err = {
            let lhs = &r2 * Complex64::from(gamma2) + &r1 * Complex64::from(gamma1);
            let rhs = &den.h_hat * Complex64::from(den.eta);
            let denom = rhs.norm();
            if denom > 0.0 { (lhs - rhs).norm() / denom } else { 0.0 }
        };

        if em_active {
            theta.lambda = em_update_lambda(&den.pi);
            theta.gamma_h = em_update_gamma_h(&den.pi, &den.mu, den.nu, theta.lambda, theta.gamma_h);
            cmuls += 3 * nl as u64;
        }

        let (h2, alpha2, vh_h2) = lmmse_inner(&r2, gamma2, theta.gamma_w, svd, &uy, &mut cmuls);

        let (mut r1_next, mut gamma1_next) = match gaussian_division(&h2, alpha2, &r2, gamma2) {
            Ok(v) => v,
            Err(_) => {
                status = VampStatus::Diverged;
                h1_out = den.h_hat;
                break;
            }
        };
        cmuls += 2 * nl as u64;

        if config.damping < 1.0 && k > 1 {
            let d = config.damping;
            r1_next = &r1_next * Complex64::from(d) + &r1 * Complex64::from(1.0 - d);
            gamma1_next = d * gamma1_next + (1.0 - d) * gamma1;
            cmuls += 2 * nl as u64;
        }

        if em_active {
            theta.gamma_w =
                em_gamma_w_from_svd(y_norm_sq, &uy, &vh_h2, svd, gamma2, theta.gamma_w, &mut cmuls);
        }

        let diff_sq = (&r1_next - &r1).norm_squared();
        let next_sq = r1_next.norm_squared();
        cmuls += 2 * nl as u64;
        let xi = if next_sq > 0.0 {
            diff_sq / next_sq
        } else if diff_sq == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };

        let nmse_db = truth.and_then(|t| nmse_vs_truth(&den.h_hat, t));
        trace.rows.push(TraceRow {
            iteration: k,
            lambda: theta.lambda,
            gamma_h: theta.gamma_h,
            gamma_w: theta.gamma_w,
            xi,
            nmse_db,
            msg_identity_rel_err,
        });

        let alpha_clamped = den.alpha_clamped() || alpha2 == ALPHA_CLAMP.0 || alpha2 == ALPHA_CLAMP.1;
        clamp_streak = if alpha_clamped { clamp_streak + 1 } else { 0 };

        h1_out = den.h_hat;
        state = Some(VampState {
            r1: r1.clone(),
            gamma1,
            r2,
            gamma2,
            h_hat1: h1_out.clone(),
            h_hat2: h2,
            alpha1: den.alpha,
            alpha2,
            iteration: k,
            xi,
        });

        if !xi.is_finite() {
            status = VampStatus::Diverged;
            break;
        }
        if clamp_streak >= 3 {
            status = VampStatus::Diverged;
            break;
        }

        r1 = r1_next;
        gamma1 = gamma1_next;

        let theta_rel_change = if em_active {
            let rel = |new: f64, old: f64| (new - old).abs() / new.abs().max(1e-300);
            rel(theta.lambda, theta_before.lambda)
                .max(rel(theta.gamma_h, theta_before.gamma_h))
                .max(rel(theta.gamma_w, theta_before.gamma_w))
        } else {
            0.0
        };
        if xi <= config.xi_t && theta_rel_change <= config.theta_tol {
            status = VampStatus::Converged;
            break;
        }
    }

    let iterations = trace.rows.len();
    let state = state.unwrap_or_else(|| VampState {
        r1: r1.clone(),
        gamma1,
        r2: CVector::zeros(nl),
        gamma2: 0.0,
        h_hat1: h1_out.clone(),
        h_hat2: CVector::zeros(nl),
        alpha1: 0.0,
        alpha2: 0.0,
        iteration: iterations,
        xi: f64::NAN,
    });

    Ok(VampOutcome {
        h_hat: h1_out,
        hyperparams: theta,
        trace,
        iterations,
        status,
        cmul_count: cmuls,
        init_fallback,
        state,
    })
}

fn nmse_vs_truth(h_hat: &CVector, truth: &CVector) -> Option<f64> {
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return None;
    }
    let err = (h_hat - truth).norm_squared();
    Some(if err == 0.0 { -320.0 } else { 10.0 * (err / denom).log10() })
}
