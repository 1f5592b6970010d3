//! Complex dense linear algebra substrate.
//!
//! Everything downstream is double precision: the Gaussian precisions that
//! the estimators learn span several orders of magnitude and single
//! precision loses their fixed points.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::SeedStream;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Size-`k` unitary DFT matrix: entry `(m, n)` is `exp(-j2π·mn/k)/√k`.
pub fn dft_matrix(k: usize) -> Result<CMatrix> {
    if k == 0 {
        return Err(Error::InvalidDimension("DFT size must be at least 1".into()));
    }
    let scale = 1.0 / (k as f64).sqrt();
    Ok(CMatrix::from_fn(k, k, |m, n| {
        // reduce the index product mod k before converting to float so the
        // phase stays exact for large m·n
        let phase = -2.0 * PI * ((m * n) % k) as f64 / k as f64;
        Complex64::from_polar(scale, phase)
    }))
}

/// Thin SVD of a matrix, truncated at the numerical rank.
///
/// `u` is `rows × rank` and `v` is `cols × rank`, both with orthonormal
/// columns; `s` holds the retained singular values in descending order.
/// Singular values at or below `max(rows, cols) · ε · s_max` are dropped.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Ambient column dimension of the factored matrix.
    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    /// `Σ sᵢ²`, which equals the squared Frobenius norm of the factored
    /// matrix up to the dropped (sub-tolerance) singular values.
    pub fn frob_sq(&self) -> f64 {
        self.s.iter().map(|s| s * s).sum()
    }

    /// Reassemble `U·diag(s)·Vᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut sv = self.v.adjoint();
        for (i, &s) in self.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(s);
        }
        &self.u * sv
    }
}

pub fn thin_svd(w: &CMatrix) -> Result<SvdFactors> {
    if w.nrows() == 0 || w.ncols() == 0 {
        return Err(Error::InvalidDimension("SVD of an empty matrix".into()));
    }
    let svd = w
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdNonConvergence)?;
    let u_full = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;

    // nalgebra returns descending singular values, but sort defensively
    // before truncating: the rank cut assumes order.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("finite singular values"));

    let s_max = sv[order[0]];
    let tol = w.nrows().max(w.ncols()) as f64 * f64::EPSILON * s_max;
    let rank = order.iter().take_while(|&&i| sv[i] > tol).count();

    let mut u = CMatrix::zeros(w.nrows(), rank);
    let mut v = CMatrix::zeros(w.ncols(), rank);
    let mut s = Vec::with_capacity(rank);
    for (col, &i) in order[..rank].iter().enumerate() {
        u.set_column(col, &u_full.column(i));
        v.set_column(col, &v_t.row(i).adjoint());
        s.push(sv[i]);
    }
    let out = SvdFactors { u, s, v };
    if out.s.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite singular values".into()));
    }
    Ok(out)
}

/// Draw `n` i.i.d. circularly symmetric complex Gaussian samples with
/// `E|x|² = variance` (split evenly between real and imaginary parts).
pub fn sample_cgauss(n: usize, variance: f64, stream: &mut SeedStream) -> Result<CVector> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "complex Gaussian variance must be nonnegative, got {variance}"
        )));
    }
    let sigma = (variance / 2.0).sqrt();
    Ok(CVector::from_fn(n, |_, _| {
        let re: f64 = stream.sample(StandardNormal);
        let im: f64 = stream.sample(StandardNormal);
        Complex64::new(sigma * re, sigma * im)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedStream;
    use proptest::prelude::*;

    fn random_cmatrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut stream = SeedStream::from_master(seed).child("mat", 0);
        let data = sample_cgauss(rows * cols, 1.0, &mut stream).unwrap();
        CMatrix::from_fn(rows, cols, |i, j| data[i + j * rows])
    }

    #[test]
    fn dft_rejects_zero_size() {
        assert!(dft_matrix(0).is_err());
    }

    #[test]
    fn dft_size_one_is_identity() {
        let f = dft_matrix(1).unwrap();
        assert_eq!(f.nrows(), 1);
        assert!((f[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dft_size_two_matches_definition() {
        let f = dft_matrix(2).unwrap();
        let r = 1.0 / 2.0_f64.sqrt();
        for (idx, want) in [((0, 0), r), ((0, 1), r), ((1, 0), r), ((1, 1), -r)] {
            assert!((f[idx] - Complex64::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn dft_64_is_unitary() {
        let f = dft_matrix(64).unwrap();
        let g = &f * f.adjoint();
        let mut max = 0.0f64;
        for i in 0..64 {
            for j in 0..64 {
                let want = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                max = max.max((g[(i, j)] - want).norm());
            }
        }
        assert!(max < 1e-12, "max deviation from identity {max}");
    }

    #[test]
    fn svd_of_identity() {
        let w = CMatrix::identity(4, 4);
        let f = thin_svd(&w).unwrap();
        assert_eq!(f.rank(), 4);
        for &s in &f.s {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_drops_zero_singular_values() {
        let mut w = CMatrix::zeros(2, 2);
        w[(0, 0)] = Complex64::new(3.0, 0.0);
        let f = thin_svd(&w).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.s[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn svd_factor_invariants_hold() {
        let w = random_cmatrix(64, 40, 3);
        let f = thin_svd(&w).unwrap();
        assert_eq!(f.rank(), 40);
        let iu = f.u.ad_mul(&f.u);
        let iv = f.v.ad_mul(&f.v);
        for i in 0..f.rank() {
            for j in 0..f.rank() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((iu[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10);
                assert!((iv[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
        let rel = (f.reconstruct() - &w).norm() / w.norm();
        assert!(rel < 1e-10, "reconstruction error {rel}");
        for i in 1..f.rank() {
            assert!(f.s[i] <= f.s[i - 1]);
        }
    }

    #[test]
    fn svd_roundtrip_large() {
        let w = random_cmatrix(512, 256, 17);
        let f = thin_svd(&w).unwrap();
        let rel = (f.reconstruct() - &w).norm() / w.norm();
        assert!(rel < 1e-10, "reconstruction error {rel}");
    }

    #[test]
    fn cgauss_zero_variance_is_zero() {
        let mut s = SeedStream::from_master(1).child("z", 0);
        let v = sample_cgauss(16, 0.0, &mut s).unwrap();
        assert!(v.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn cgauss_rejects_negative_variance() {
        let mut s = SeedStream::from_master(1).child("z", 0);
        assert!(sample_cgauss(4, -1.0, &mut s).is_err());
    }

    #[test]
    fn cgauss_sample_moments() {
        let n = 1_000_000;
        let mut s = SeedStream::from_master(99).child("mom", 0);
        let v = sample_cgauss(n, 2.0, &mut s).unwrap();
        let power: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
        assert!((1.99..=2.01).contains(&power), "E|x|² = {power}");
        let mean = v.iter().sum::<Complex64>() / n as f64;
        assert!(mean.norm() < 0.01 * 2.0_f64.sqrt(), "mean = {mean}");
    }

    #[test]
    fn cgauss_reproducible() {
        let a = sample_cgauss(64, 1.5, &mut SeedStream::from_master(5).child("r", 2)).unwrap();
        let b = sample_cgauss(64, 1.5, &mut SeedStream::from_master(5).child("r", 2)).unwrap();
        for i in 0..64 {
            assert_eq!(a[i].re.to_bits(), b[i].re.to_bits());
            assert_eq!(a[i].im.to_bits(), b[i].im.to_bits());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn dft_preserves_norm(seed in 0u64..1 << 20, k in 1usize..96) {
            let f = dft_matrix(k).unwrap();
            let mut s = SeedStream::from_master(seed).child("x", 0);
            let x = sample_cgauss(k, 1.0, &mut s).unwrap();
            let y = &f * &x;
            let rel = (y.norm() - x.norm()).abs() / x.norm().max(1e-300);
            prop_assert!(rel < 1e-10);
        }
    }
}
