//! Zero-padded OFDM transmit/receive chain and the pilot measurement model.
//!
//! The chain synthesizes time-domain reception sample by sample: unitary
//! IDFT of the symbol block, zero-padded guard interval, linear convolution
//! with the channel, additive noise, overlap-add of the guard tail, and a
//! forward DFT. The receive DFT carries an extra 1/√K so that the extracted
//! pilot bins obey the linear model
//!
//! ```text
//!     y_m = W h_m + n_m,     W = [S₁F | S₂F | … | S_N F]
//! ```
//!
//! exactly, where `F` is the pilot-rows × first-L-columns block of the
//! unitary DFT matrix and `S_n` holds transducer n's pilot symbols. All
//! estimators in this crate work on that model.
//!
//! Overlap-add folds the entire guard interval (`N_ZP` samples) back onto
//! the block head, so no received energy is discarded; when `N_ZP = L` this
//! coincides with folding the `L-1` convolution tail samples. Folding makes
//! the pilot noise slightly correlated across bins. The noise injector
//! compensates the per-bin variance so it equals `1/γ_w` either way, and a
//! [`NoiseMode::Whitened`] mode adds noise after the DFT for oracle tests
//! that need exactly white noise.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{sample_cgauss, thin_svd, CMatrix, CVector, SvdFactors};
use crate::seed::SeedStream;

/// Pilot placement over the occupied band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotScheme {
    /// Stride `K/K_p`; requires `K_p | K`.
    EquallySpaced,
    /// `I_j = floor(j·K/K_p)`: gaps differ by at most one. Fallback for
    /// pilot counts that do not divide the band.
    NearestUniform,
}

/// Pilot subcarrier index set for `k_p` pilots over `k` subcarriers.
pub fn pilot_pattern(k: usize, k_p: usize, scheme: PilotScheme) -> Result<Vec<usize>> {
    if k_p == 0 || k_p > k {
        return Err(Error::InvalidParameter(format!(
            "pilot count {k_p} must lie in 1..={k}"
        )));
    }
    match scheme {
        PilotScheme::EquallySpaced => {
            if k % k_p != 0 {
                return Err(Error::InvalidParameter(format!(
                    "equally-spaced pilots need K_p | K, got K={k}, K_p={k_p}"
                )));
            }
            let stride = k / k_p;
            Ok((0..k_p).map(|j| j * stride).collect())
        }
        PilotScheme::NearestUniform => Ok((0..k_p).map(|j| j * k / k_p).collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qpsk,
}

/// Dimensional constants of one link.
#[derive(Debug, Clone)]
pub struct OfdmConfig {
    pub k: usize,
    pub n_null: usize,
    pub n_tx: usize,
    pub m_rx: usize,
    pub chan_len: usize,
    pub n_zp: usize,
    pub constellation: Constellation,
    pilots: Vec<usize>,
    data_indices: Vec<usize>,
}

impl OfdmConfig {
    /// Null subcarriers occupy the top `n_null` indices; pilots must fall in
    /// the occupied band below them.
    pub fn new(
        k: usize,
        n_null: usize,
        pilots: Vec<usize>,
        n_tx: usize,
        m_rx: usize,
        chan_len: usize,
        n_zp: usize,
    ) -> Result<Self> {
        if k == 0 || n_tx == 0 || m_rx == 0 || chan_len == 0 {
            return Err(Error::InvalidDimension("all link dimensions must be positive".into()));
        }
        if n_zp < chan_len {
            return Err(Error::InvalidParameter(format!(
                "guard length {n_zp} must cover the channel length {chan_len}"
            )));
        }
        if n_zp > k {
            return Err(Error::InvalidParameter("guard longer than the block".into()));
        }
        if chan_len > k {
            return Err(Error::InvalidParameter("channel longer than the block".into()));
        }
        let occupied = k
            .checked_sub(n_null)
            .ok_or_else(|| Error::InvalidParameter("more nulls than subcarriers".into()))?;
        if pilots.is_empty() || pilots.len() > occupied {
            return Err(Error::InvalidParameter("pilot set must be nonempty and fit the band".into()));
        }
        for w in pilots.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter("pilot indices must be strictly ascending".into()));
            }
        }
        if *pilots.last().unwrap() >= occupied {
            return Err(Error::InvalidParameter("pilot index in the null band".into()));
        }
        let mut is_pilot = vec![false; k];
        for &p in &pilots {
            is_pilot[p] = true;
        }
        let data_indices: Vec<usize> = (0..occupied).filter(|&i| !is_pilot[i]).collect();
        Ok(Self {
            k,
            n_null,
            n_tx,
            m_rx,
            chan_len,
            n_zp,
            constellation: Constellation::Qpsk,
            pilots,
            data_indices,
        })
    }

    pub fn k_p(&self) -> usize {
        self.pilots.len()
    }

    pub fn k_d(&self) -> usize {
        self.data_indices.len()
    }

    pub fn pilots(&self) -> &[usize] {
        &self.pilots
    }

    pub fn data_indices(&self) -> &[usize] {
        &self.data_indices
    }
}

/// Unit-modulus pilot symbols per transducer.
#[derive(Debug, Clone)]
pub struct PilotBook {
    symbols: Vec<CVector>,
}

#[derive(Debug, Clone, Copy)]
pub enum BookScheme {
    /// Per-transducer phase ramps over disjoint delay subspaces. Makes
    /// `WᴴW` diagonal under the equally-spaced pattern when `K_p ≥ N·L`.
    Orthogonal { chan_len: usize },
    /// Independent QPSK symbols on every pilot of every transducer.
    RandomQpsk,
}

/// One uniformly random QPSK symbol, `(±1 ± j)/√2`.
pub fn random_qpsk(n: usize, stream: &mut SeedStream) -> CVector {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let bits: u32 = stream.random_range(0..4);
        Complex64::new(
            if bits & 1 == 0 { a } else { -a },
            if bits & 2 == 0 { a } else { -a },
        )
    })
}

pub fn make_pilot_book(
    n_tx: usize,
    k_p: usize,
    scheme: BookScheme,
    stream: &mut SeedStream,
) -> Result<PilotBook> {
    if n_tx == 0 || k_p == 0 {
        return Err(Error::InvalidDimension("empty pilot book".into()));
    }
    let symbols = match scheme {
        BookScheme::Orthogonal { chan_len } => {
            if k_p < n_tx * chan_len {
                return Err(Error::InvalidParameter(format!(
                    "orthogonal pilots need K_p ≥ N·L, got K_p={k_p}, N·L={}",
                    n_tx * chan_len
                )));
            }
            let base = random_qpsk(k_p, stream);
            (0..n_tx)
                .map(|n| {
                    CVector::from_fn(k_p, |j, _| {
                        let phase = -2.0 * PI * ((n * chan_len * j) % k_p) as f64 / k_p as f64;
                        base[j] * Complex64::from_polar(1.0, phase)
                    })
                })
                .collect()
        }
        BookScheme::RandomQpsk => (0..n_tx).map(|_| random_qpsk(k_p, stream)).collect(),
    };
    PilotBook::new(symbols)
}

impl PilotBook {
    pub fn new(symbols: Vec<CVector>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidDimension("empty pilot book".into()));
        }
        let k_p = symbols[0].len();
        for s in &symbols {
            if s.len() != k_p {
                return Err(Error::InvalidDimension("ragged pilot book".into()));
            }
            if s.iter().any(|x| (x.norm() - 1.0).abs() > 1e-9) {
                return Err(Error::InvalidParameter("pilot symbols must have unit modulus".into()));
            }
        }
        Ok(Self { symbols })
    }

    pub fn n_tx(&self) -> usize {
        self.symbols.len()
    }

    pub fn k_p(&self) -> usize {
        self.symbols[0].len()
    }

    pub fn symbols(&self, n: usize) -> &CVector {
        &self.symbols[n]
    }
}

/// `F` block used by the measurement matrix: pilot rows × first `L` columns
/// of the unitary DFT matrix.
fn dft_pilot_block(k: usize, pilots: &[usize], chan_len: usize) -> CMatrix {
    let scale = 1.0 / (k as f64).sqrt();
    CMatrix::from_fn(pilots.len(), chan_len, |j, l| {
        let phase = -2.0 * PI * ((pilots[j] * l) % k) as f64 / k as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Assemble `W = [S₁F | … | S_N F]` and its thin SVD.
pub fn build_measurement_matrix(cfg: &OfdmConfig, book: &PilotBook) -> Result<(CMatrix, SvdFactors)> {
    if book.n_tx() != cfg.n_tx || book.k_p() != cfg.k_p() {
        return Err(Error::InvalidDimension("pilot book does not match the config".into()));
    }
    let k_p = cfg.k_p();
    let l = cfg.chan_len;
    let f = dft_pilot_block(cfg.k, cfg.pilots(), l);
    let mut w = CMatrix::zeros(k_p, cfg.n_tx * l);
    for n in 0..cfg.n_tx {
        let s = book.symbols(n);
        for c in 0..l {
            for j in 0..k_p {
                w[(j, n * l + c)] = s[j] * f[(j, c)];
            }
        }
    }
    for c in 0..w.ncols() {
        let norm = w.column(c).norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numeric("degenerate measurement matrix column".into()));
        }
    }
    let svd = thin_svd(&w)?;
    Ok((w, svd))
}

/// The pilot observation system one trial hands to the estimators.
///
/// `true_gamma_w` is the noise precision used in synthesis, kept for
/// scoring only — estimators never see it unless a caller passes it in
/// explicitly.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub w: Arc<CMatrix>,
    pub svd: Arc<SvdFactors>,
    pub y: Vec<CVector>,
    pub true_gamma_w: Vec<f64>,
}

impl MeasurementModel {
    pub fn new(
        w: Arc<CMatrix>,
        svd: Arc<SvdFactors>,
        y: Vec<CVector>,
        true_gamma_w: Vec<f64>,
    ) -> Result<Self> {
        if y.is_empty() || true_gamma_w.len() != y.len() {
            return Err(Error::InvalidDimension("one observation and precision per hydrophone".into()));
        }
        for obs in &y {
            if obs.len() != w.nrows() {
                return Err(Error::InvalidDimension("observation length != pilot count".into()));
            }
        }
        Ok(Self { w, svd, y, true_gamma_w })
    }
}

/// How synthesis injects receiver noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Time-domain noise ahead of overlap-add: the folded guard makes the
    /// pilot noise slightly correlated, as the physical chain would. The
    /// injected variance is compensated so the per-bin power is `1/γ_w`.
    Faithful,
    /// White noise added to the frequency-domain block after the DFT.
    Whitened,
}

/// One hydrophone's reception of one OFDM block.
#[derive(Debug, Clone)]
pub struct ReceivedBlock {
    /// `K + N_ZP` time samples before overlap-add.
    pub time: CVector,
    /// Scaled spectrum of the overlap-added block (length `K`).
    pub freq: CVector,
    /// Pilot bins (length `K_p`).
    pub pilots: CVector,
    /// Data bins (length `K_d`).
    pub data: CVector,
}

/// Push one block through the time-domain chain for every hydrophone.
///
/// `gamma_w` is the pilot-domain noise precision — one shared value or one
/// per hydrophone; `f64::INFINITY` means noiseless. Each hydrophone's noise
/// comes from its own substream of `stream`, so receptions are independent
/// of evaluation order.
pub fn transmit_receive(
    cfg: &OfdmConfig,
    book: &PilotBook,
    data_symbols: &[CVector],
    channel: &ChannelRealization,
    gamma_w: &[f64],
    mode: NoiseMode,
    stream: &SeedStream,
) -> Result<Vec<ReceivedBlock>> {
    if channel.n_tx() != cfg.n_tx || channel.m_rx() != cfg.m_rx {
        return Err(Error::InvalidDimension("channel does not match the config".into()));
    }
    if channel.tap_len() > cfg.n_zp {
        return Err(Error::InvalidParameter(format!(
            "channel length {} exceeds the guard interval {}",
            channel.tap_len(),
            cfg.n_zp
        )));
    }
    if book.n_tx() != cfg.n_tx || book.k_p() != cfg.k_p() {
        return Err(Error::InvalidDimension("pilot book does not match the config".into()));
    }
    if data_symbols.len() != cfg.n_tx {
        return Err(Error::InvalidDimension("one data vector per transducer".into()));
    }
    for d in data_symbols {
        if d.len() != cfg.k_d() {
            return Err(Error::InvalidDimension(format!(
                "data vector length {} != K_d = {}",
                d.len(),
                cfg.k_d()
            )));
        }
    }
    if gamma_w.len() != 1 && gamma_w.len() != cfg.m_rx {
        return Err(Error::InvalidDimension("gamma_w must be shared or per hydrophone".into()));
    }
    if gamma_w.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidParameter("noise precision must be positive".into()));
    }

    let k = cfg.k;
    let block_len = k + cfg.n_zp;
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(k);
    let fft = planner.plan_fft_forward(k);
    let root_k = (k as f64).sqrt();

    // time-domain symbol per transducer, zero-padded guard included
    let mut x_time: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.n_tx);
    for n in 0..cfg.n_tx {
        let mut buf = vec![Complex64::ZERO; k];
        for (j, &p) in cfg.pilots().iter().enumerate() {
            buf[p] = book.symbols(n)[j];
        }
        for (j, &d) in cfg.data_indices().iter().enumerate() {
            buf[d] = data_symbols[n][j];
        }
        ifft.process(&mut buf);
        for x in &mut buf {
            *x /= root_k;
        }
        buf.resize(block_len, Complex64::ZERO);
        x_time.push(buf);
    }

    let fold_excess = 1.0 + cfg.n_zp as f64 / k as f64;
    let mut out = Vec::with_capacity(cfg.m_rx);
    for m in 0..cfg.m_rx {
        let g = gamma_w[if gamma_w.len() == 1 { 0 } else { m }];
        let mut noise_stream = stream.child("noise", m as u64);

        let mut time = CVector::zeros(block_len);
        for n in 0..cfg.n_tx {
            let h = channel.taps(m, n);
            let x = &x_time[n];
            for t in 0..block_len {
                let mut acc = Complex64::ZERO;
                let l_max = h.len().min(t + 1);
                for l in 0..l_max {
                    acc += h[l] * x[t - l];
                }
                time[t] += acc;
            }
        }
        if mode == NoiseMode::Faithful {
            // per-bin pilot variance after fold and 1/K DFT scaling:
            // v_t · (1 + N_ZP/K) / K  — solve for v_t given target 1/γ_w
            let v_t = k as f64 / (g * fold_excess);
            let noise = sample_cgauss(block_len, v_t, &mut noise_stream)?;
            time += &noise;
        }

        let mut ola: Vec<Complex64> = time.as_slice()[..k].to_vec();
        for t in 0..cfg.n_zp {
            ola[t] += time[k + t];
        }
        fft.process(&mut ola);
        let mut freq = CVector::from_vec(ola);
        freq /= Complex64::new(k as f64, 0.0);
        if mode == NoiseMode::Whitened {
            let noise = sample_cgauss(k, 1.0 / g, &mut noise_stream)?;
            freq += &noise;
        }

        let pilots = CVector::from_fn(cfg.k_p(), |j, _| freq[cfg.pilots()[j]]);
        let data = CVector::from_fn(cfg.k_d(), |j, _| freq[cfg.data_indices()[j]]);
        if freq.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Numeric("non-finite reception".into()));
        }
        out.push(ReceivedBlock { time, freq, pilots, data });
    }
    Ok(out)
}

/// Per-subcarrier channel matrices `H(k) ∈ C^{M×N}` with
/// `H(k)[m][n] = Σ_l h_{m,n}(l)·exp(-j2πkl/K)` (unnormalized DFT).
///
/// Consistency with the pilot model: `√K·(F h)_j = H(I_j)`, and the
/// equalizer's per-bin gain is `H(k)/√K`.
pub fn channel_frequency_response(channel: &ChannelRealization, cfg: &OfdmConfig) -> Result<Vec<CMatrix>> {
    if channel.tap_len() > cfg.k {
        return Err(Error::InvalidDimension("channel longer than the DFT size".into()));
    }
    let k = cfg.k;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(k);
    let mut resp = vec![CMatrix::zeros(channel.m_rx(), channel.n_tx()); k];
    let mut buf = vec![Complex64::ZERO; k];
    for m in 0..channel.m_rx() {
        for n in 0..channel.n_tx() {
            buf.fill(Complex64::ZERO);
            let taps = channel.taps(m, n);
            buf[..taps.len()].copy_from_slice(taps.as_slice());
            fft.process(&mut buf);
            for (bin, h) in buf.iter().enumerate() {
                resp[bin][(m, n)] = *h;
            }
        }
    }
    Ok(resp)
}
