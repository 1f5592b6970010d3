//! Scalar Bernoulli-Gaussian MMSE denoiser and the extrinsic
//! (Gaussian-division) message update.
//!
//! Given a pseudo-observation `r = h + e`, `e ~ CN(0, 1/γ₁)`, of a tap with
//! the BG prior `(1-λ)δ(h) + λ·CN(h; 0, 1/γ_h)`, the posterior is a
//! spike-and-Gaussian mixture with
//!
//! ```text
//!     π  = [1 + ((1-λ)/λ) · CN(0; r, 1/γ₁) / CN(0; r, 1/γ₁ + 1/γ_h)]⁻¹
//!     μ  = γ₁ r / (γ₁ + γ_h)          ν = 1 / (γ₁ + γ_h)
//!     ĥ  = π ⊙ μ                       α = ⟨π⟩ · γ₁ / (γ₁ + γ_h)
//! ```
//!
//! The density ratio in `π` underflows once `|r|²γ₁` passes a few hundred,
//! so it is evaluated in the log domain through a stable logistic.

use num_complex::Complex64;

use crate::channel::BgParams;
use crate::error::{Error, Result};
use crate::linalg::CVector;

/// Posterior nonzero-probabilities are clamped to this band.
pub const PI_CLAMP: (f64, f64) = (1e-12, 1.0 - 1e-12);
/// Divergence terms are clamped to this band; the Gaussian-division
/// denominators `α` and `1-α` blow up outside it.
pub const ALPHA_CLAMP: (f64, f64) = (1e-11, 1.0 - 1e-11);

fn clamp(x: f64, (lo, hi): (f64, f64)) -> f64 {
    x.max(lo).min(hi)
}

/// `1 / (1 + eᵗ)` without overflow.
fn stable_logistic_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// Output of one denoiser application.
#[derive(Debug, Clone)]
pub struct DenoiserOutput {
    /// Posterior probability that each tap is nonzero.
    pub pi: Vec<f64>,
    /// Conditional (given nonzero) posterior means.
    pub mu: CVector,
    /// Conditional posterior variance, shared by all taps.
    pub nu: f64,
    /// Posterior mean `π ⊙ μ`.
    pub h_hat: CVector,
    /// Mean divergence, clamped into `ALPHA_CLAMP`.
    pub alpha: f64,
    /// Posterior precision `γ₁ / α`.
    pub eta: f64,
}

impl DenoiserOutput {
    /// Posterior second moment of tap `i`, `π(i)·(|μ(i)|² + ν)`.
    pub fn second_moment(&self, i: usize) -> f64 {
        self.pi[i] * (self.mu[i].norm_sqr() + self.nu)
    }

    /// Whether the divergence hit its clamp band edge.
    pub fn alpha_clamped(&self) -> bool {
        self.alpha == ALPHA_CLAMP.0 || self.alpha == ALPHA_CLAMP.1
    }
}

/// Element-wise BG posterior for the pseudo-observation `r1` at precision
/// `gamma1`.
pub fn bg_posterior(r1: &CVector, gamma1: f64, params: &BgParams) -> Result<DenoiserOutput> {
    if !(gamma1 > 0.0) || !gamma1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "message precision must be positive and finite, got {gamma1}"
        )));
    }
    let BgParams { lambda, gamma_h } = *params;

    let shrink = gamma1 / (gamma1 + gamma_h);
    let nu = 1.0 / (gamma1 + gamma_h);
    // log of the prior odds times the density ratio; see module docs
    let log_prior_odds = ((1.0 - lambda) / lambda).ln();
    let log_var_ratio = ((gamma1 + gamma_h) / gamma_h).ln();
    let quad_coeff = gamma1 * gamma1 / (gamma1 + gamma_h);

    let n = r1.len();
    let mut pi = Vec::with_capacity(n);
    let mut mu = CVector::zeros(n);
    let mut h_hat = CVector::zeros(n);
    let mut pi_sum = 0.0;
    for i in 0..n {
        let t = log_prior_odds + log_var_ratio - quad_coeff * r1[i].norm_sqr();
        let p = clamp(stable_logistic_neg(t), PI_CLAMP);
        pi_sum += p;
        pi.push(p);
        mu[i] = r1[i] * shrink;
        h_hat[i] = mu[i] * p;
    }
    let alpha = clamp(pi_sum / n as f64 * shrink, ALPHA_CLAMP);
    let eta = gamma1 / alpha;
    Ok(DenoiserOutput { pi, mu, nu, h_hat, alpha, eta })
}

/// Extrinsic message: divide the Gaussian belief `(h_hat, γ_in/α)` by the
/// incoming message `(r_in, γ_in)`.
///
/// Used in both directions of the message schedule. A divergence term
/// outside `(0,1)` is an iteration failure, reported as an error for the
/// caller to turn into a status flag.
pub fn gaussian_division(
    h_hat: &CVector,
    alpha: f64,
    r_in: &CVector,
    gamma_in: f64,
) -> Result<(CVector, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Numeric(format!("divergence term {alpha} outside (0,1)")));
    }
    if !(gamma_in > 0.0) || !gamma_in.is_finite() {
        return Err(Error::Numeric(format!("message precision {gamma_in} invalid")));
    }
    if h_hat.len() != r_in.len() {
        return Err(Error::InvalidDimension("mismatched message lengths".into()));
    }
    let one_minus = 1.0 - alpha;
    let r_out = (h_hat - r_in * Complex64::from(alpha)) / Complex64::from(one_minus);
    let gamma_out = gamma_in * one_minus / alpha;
    if !gamma_out.is_finite() || gamma_out <= 0.0 {
        return Err(Error::Numeric(format!("extrinsic precision {gamma_out} invalid")));
    }
    Ok((r_out, gamma_out))
}

/// Brute-force grid integration of the scalar BG posterior.
///
/// Reference integrator for validating the closed forms above: it works on
/// the raw densities over a 2-D grid in the complex plane and never touches
/// the closed-form path. Exponents are rescaled by their grid maximum so
/// the spike/slab mass ratio survives far into the tails.
pub mod reference {
    use num_complex::Complex64;

    /// `(π, E[h|r], E[|h|²|r])` by 2-D quadrature with `points²` grid nodes
    /// spanning ±`radius_sigmas` posterior standard deviations per axis.
    pub fn bg_posterior_quadrature(
        r: Complex64,
        gamma1: f64,
        lambda: f64,
        gamma_h: f64,
        points: usize,
        radius_sigmas: f64,
    ) -> (f64, Complex64, f64) {
        // the continuous component's integrand exp(-γ_h|h|² - γ₁|h-r|²) is
        // separable; locate its per-axis peak and curvature to place the grid
        let gsum = gamma1 + gamma_h;
        let center = (gamma1 / gsum) * r;
        let radius = radius_sigmas * (1.0 / gsum).sqrt();

        let axis = |c: f64| -> (Vec<f64>, Vec<f64>) {
            let mut xs = Vec::with_capacity(points);
            let mut es = Vec::with_capacity(points);
            for i in 0..points {
                let x = c - radius + 2.0 * radius * i as f64 / (points - 1) as f64;
                xs.push(x);
                es.push(x);
            }
            (xs, es)
        };
        let (xs, _) = axis(center.re);
        let (ys, _) = axis(center.im);

        let exponent_x: Vec<f64> =
            xs.iter().map(|&x| -gamma_h * x * x - gamma1 * (x - r.re) * (x - r.re)).collect();
        let exponent_y: Vec<f64> =
            ys.iter().map(|&y| -gamma_h * y * y - gamma1 * (y - r.im) * (y - r.im)).collect();
        let cx = exponent_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cy = exponent_y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let gx: Vec<f64> = exponent_x.iter().map(|&e| (e - cx).exp()).collect();
        let gy: Vec<f64> = exponent_y.iter().map(|&e| (e - cy).exp()).collect();

        let sum = |g: &[f64]| g.iter().sum::<f64>();
        let sum_w = |g: &[f64], w: &[f64]| g.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let xs2: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| y * y).collect();

        let (sx, sy) = (sum(&gx), sum(&gy));
        let da = (2.0 * radius / (points - 1) as f64).powi(2);

        // log-masses of the two mixture components, common factors kept
        let log_cont = (lambda * gamma1 * gamma_h / (std::f64::consts::PI * std::f64::consts::PI)).ln()
            + cx
            + cy
            + (sx * sy * da).ln();
        let log_spike = ((1.0 - lambda) * gamma1 / std::f64::consts::PI).ln() - gamma1 * r.norm_sqr();

        let pi = 1.0 / (1.0 + (log_spike - log_cont).exp());

        let mean_cont = Complex64::new(sum_w(&gx, &xs) / sx, sum_w(&gy, &ys) / sy);
        let second_cont = sum_w(&gx, &xs2) / sx + sum_w(&gy, &ys2) / sy;

        (pi, pi * mean_cont, pi * second_cont)
    }
}
