//! Sparse MIMO channel realizations: Bernoulli-Gaussian ground truth
//! generation and tap-file replay.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{sample_cgauss, CVector};
use crate::seed::SeedStream;

/// Bernoulli-Gaussian prior: a tap is zero with probability `1 - lambda`,
/// otherwise circularly symmetric Gaussian with variance `1/gamma_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgParams {
    pub lambda: f64,
    pub gamma_h: f64,
}

impl BgParams {
    pub fn new(lambda: f64, gamma_h: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sparsity rate must lie in (0,1), got {lambda}"
            )));
        }
        if !(gamma_h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tap precision must be positive, got {gamma_h}"
            )));
        }
        Ok(Self { lambda, gamma_h })
    }
}

/// Law the taps are drawn from. The degenerate variants stand in for the
/// λ→0 / λ→1 limits, which [`BgParams`] itself rejects.
#[derive(Debug, Clone, Copy)]
pub enum TapLaw {
    Bg(BgParams),
    AllZero,
    AllOn { gamma_h: f64 },
}

/// One draw of the full set of subchannels: `taps[m][n]` is the length-`L`
/// impulse response between transducer `n` and hydrophone `m`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    taps: Vec<Vec<CVector>>,
    n_tx: usize,
    m_rx: usize,
    tap_len: usize,
}

impl ChannelRealization {
    pub fn new(taps: Vec<Vec<CVector>>, tap_len: usize) -> Result<Self> {
        let m_rx = taps.len();
        if m_rx == 0 {
            return Err(Error::InvalidDimension("no hydrophones".into()));
        }
        let n_tx = taps[0].len();
        if n_tx == 0 {
            return Err(Error::InvalidDimension("no transducers".into()));
        }
        for row in &taps {
            if row.len() != n_tx {
                return Err(Error::InvalidDimension("ragged transducer count".into()));
            }
            for t in row {
                if t.len() != tap_len {
                    return Err(Error::InvalidDimension(format!(
                        "tap vector has length {}, expected {tap_len}",
                        t.len()
                    )));
                }
                if t.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                    return Err(Error::Numeric("non-finite channel tap".into()));
                }
            }
        }
        Ok(Self { taps, n_tx, m_rx, tap_len })
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn m_rx(&self) -> usize {
        self.m_rx
    }

    pub fn tap_len(&self) -> usize {
        self.tap_len
    }

    pub fn taps(&self, m: usize, n: usize) -> &CVector {
        &self.taps[m][n]
    }

    /// Stacked vector for hydrophone `m`: transducer blocks concatenated in
    /// order, `[h_{m,1}; …; h_{m,N}]`, length `N·L`.
    pub fn stacked(&self, m: usize) -> CVector {
        let mut out = CVector::zeros(self.n_tx * self.tap_len);
        for n in 0..self.n_tx {
            out.rows_mut(n * self.tap_len, self.tap_len).copy_from(&self.taps[m][n]);
        }
        out
    }

    pub fn is_all_zero(&self) -> bool {
        self.taps.iter().flatten().all(|t| t.iter().all(|x| x.norm_sqr() == 0.0))
    }

    /// Rebuild a realization from one stacked `N·L` vector per hydrophone
    /// (inverse of [`ChannelRealization::stacked`]).
    pub fn from_stacked(stacked: &[CVector], n_tx: usize, tap_len: usize) -> Result<Self> {
        if n_tx == 0 || tap_len == 0 || stacked.is_empty() {
            return Err(Error::InvalidDimension("empty stacked channel".into()));
        }
        let mut taps = Vec::with_capacity(stacked.len());
        for s in stacked {
            if s.len() != n_tx * tap_len {
                return Err(Error::InvalidDimension(format!(
                    "stacked length {} != N·L = {}",
                    s.len(),
                    n_tx * tap_len
                )));
            }
            let row: Vec<CVector> =
                (0..n_tx).map(|n| s.rows(n * tap_len, tap_len).clone_owned()).collect();
            taps.push(row);
        }
        Self::new(taps, tap_len)
    }
}

/// Draw a channel realization with i.i.d. taps from `law`.
///
/// With `ensure_nonempty`, an all-zero draw is rejected and redrawn (from
/// the same stream) so normalized error metrics stay defined.
pub fn sample_bg_channel(
    n_tx: usize,
    m_rx: usize,
    tap_len: usize,
    law: &TapLaw,
    ensure_nonempty: bool,
    stream: &mut SeedStream,
) -> Result<ChannelRealization> {
    if n_tx == 0 || m_rx == 0 || tap_len == 0 {
        return Err(Error::InvalidDimension("channel dimensions must be positive".into()));
    }
    loop {
        let mut taps = Vec::with_capacity(m_rx);
        for _ in 0..m_rx {
            let mut row = Vec::with_capacity(n_tx);
            for _ in 0..n_tx {
                row.push(draw_taps(tap_len, law, stream)?);
            }
            taps.push(row);
        }
        let ch = ChannelRealization::new(taps, tap_len)?;
        if !ensure_nonempty || !ch.is_all_zero() {
            return Ok(ch);
        }
        if matches!(law, TapLaw::AllZero) {
            return Err(Error::InvalidParameter(
                "cannot draw a nonempty channel from the all-zero law".into(),
            ));
        }
    }
}

fn draw_taps(tap_len: usize, law: &TapLaw, stream: &mut SeedStream) -> Result<CVector> {
    match law {
        TapLaw::AllZero => Ok(CVector::zeros(tap_len)),
        TapLaw::AllOn { gamma_h } => {
            if !(*gamma_h > 0.0) {
                return Err(Error::InvalidParameter("tap precision must be positive".into()));
            }
            sample_cgauss(tap_len, 1.0 / gamma_h, stream)
        }
        TapLaw::Bg(p) => {
            // draw the support mask first, then the values, so the value
            // stream layout matches the dense case
            let mask: Vec<bool> = (0..tap_len).map(|_| stream.random::<f64>() < p.lambda).collect();
            let dense = sample_cgauss(tap_len, 1.0 / p.gamma_h, stream)?;
            let mut v = CVector::zeros(tap_len);
            for (i, &on) in mask.iter().enumerate() {
                if on {
                    v[i] = dense[i];
                }
            }
            Ok(v)
        }
    }
}

/// Write a realization in the tap-file format: a `N M L` header line, then
/// one `m n l re im` line per tap in canonical order.
pub fn save_channel(ch: &ChannelRealization, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{} {} {}", ch.n_tx(), ch.m_rx(), ch.tap_len()).expect("write to string");
    for m in 0..ch.m_rx() {
        for n in 0..ch.n_tx() {
            for l in 0..ch.tap_len() {
                let x = ch.taps(m, n)[l];
                writeln!(out, "{} {} {} {} {}", m, n, l, x.re, x.im).expect("write to string");
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_channel(path: &Path) -> Result<ChannelRealization> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::TapFile("empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::TapFile(format!("bad header: {header:?}"))))
        .collect::<Result<_>>()?;
    let [n_tx, m_rx, tap_len] = dims[..] else {
        return Err(Error::TapFile(format!("header must be `N M L`, got {header:?}")));
    };
    if n_tx == 0 || m_rx == 0 || tap_len == 0 {
        return Err(Error::TapFile("header dimensions must be positive".into()));
    }

    let mut taps = vec![vec![CVector::zeros(tap_len); n_tx]; m_rx];
    let mut seen = vec![false; n_tx * m_rx * tap_len];
    for (lineno, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 5 {
            return Err(Error::TapFile(format!("line {}: expected 5 fields", lineno + 1)));
        }
        let parse_idx = |t: &str| -> Result<usize> {
            t.parse().map_err(|_| Error::TapFile(format!("line {}: bad index {t:?}", lineno + 1)))
        };
        let parse_val = |t: &str| -> Result<f64> {
            let v: f64 = t
                .parse()
                .map_err(|_| Error::TapFile(format!("line {}: bad value {t:?}", lineno + 1)))?;
            if !v.is_finite() {
                return Err(Error::TapFile(format!("line {}: non-finite value {t:?}", lineno + 1)));
            }
            Ok(v)
        };
        let (m, n, l) = (parse_idx(tok[0])?, parse_idx(tok[1])?, parse_idx(tok[2])?);
        if m >= m_rx || n >= n_tx || l >= tap_len {
            return Err(Error::TapFile(format!("line {}: index out of range", lineno + 1)));
        }
        let flat = (m * n_tx + n) * tap_len + l;
        if seen[flat] {
            return Err(Error::TapFile(format!("line {}: duplicate tap ({m},{n},{l})", lineno + 1)));
        }
        seen[flat] = true;
        taps[m][n][l] = Complex64::new(parse_val(tok[3])?, parse_val(tok[4])?);
    }
    if let Some(flat) = seen.iter().position(|&s| !s) {
        let l = flat % tap_len;
        let n = (flat / tap_len) % n_tx;
        let m = flat / (tap_len * n_tx);
        return Err(Error::TapFile(format!("missing tap ({m},{n},{l})")));
    }
    ChannelRealization::new(taps, tap_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedStream;

    #[test]
    fn bg_params_validation() {
        assert!(BgParams::new(0.0, 1.0).is_err());
        assert!(BgParams::new(1.0, 1.0).is_err());
        assert!(BgParams::new(0.5, 0.0).is_err());
        assert!(BgParams::new(0.5, 1.0).is_ok());
    }

    #[test]
    fn all_zero_law_gives_zero_channel() {
        let mut s = SeedStream::from_master(1).child("ch", 0);
        let ch = sample_bg_channel(2, 2, 8, &TapLaw::AllZero, false, &mut s).unwrap();
        assert!(ch.is_all_zero());
    }

    #[test]
    fn all_on_law_matches_moment() {
        let mut s = SeedStream::from_master(2).child("ch", 0);
        let gamma_h = 4.0;
        let ch = sample_bg_channel(1, 1, 1_000_000, &TapLaw::AllOn { gamma_h }, false, &mut s).unwrap();
        let t = ch.taps(0, 0);
        assert!(t.iter().all(|x| x.norm_sqr() > 0.0));
        let power = t.iter().map(|x| x.norm_sqr()).sum::<f64>() / t.len() as f64;
        let want = 1.0 / gamma_h;
        assert!((power - want).abs() < 0.01 * want, "E|h|² = {power}");
    }

    #[test]
    fn bg_law_support_fraction() {
        let mut s = SeedStream::from_master(3).child("ch", 0);
        let p = BgParams::new(0.05, 1.0).unwrap();
        let ch = sample_bg_channel(2, 1, 10_000, &TapLaw::Bg(p), false, &mut s).unwrap();
        let mut nz = 0usize;
        for n in 0..2 {
            nz += ch.taps(0, n).iter().filter(|x| x.norm_sqr() > 0.0).count();
        }
        let frac = nz as f64 / 20_000.0;
        assert!((0.045..=0.055).contains(&frac), "support fraction {frac}");
    }

    #[test]
    fn empirical_sparsity_converges_to_lambda() {
        let mut s = SeedStream::from_master(8).child("ch", 0);
        let p = BgParams::new(0.1, 2.0).unwrap();
        let ch = sample_bg_channel(1, 1, 1_000_000, &TapLaw::Bg(p), false, &mut s).unwrap();
        let nz = ch.taps(0, 0).iter().filter(|x| x.norm_sqr() > 0.0).count();
        let frac = nz as f64 / 1e6;
        assert!((frac - 0.1).abs() < 0.01, "sparsity {frac}");
    }

    #[test]
    fn stacking_order_roundtrip() {
        let mut s = SeedStream::from_master(4).child("ch", 0);
        let p = BgParams::new(0.5, 1.0).unwrap();
        let ch = sample_bg_channel(3, 2, 5, &TapLaw::Bg(p), true, &mut s).unwrap();
        for m in 0..2 {
            let stacked = ch.stacked(m);
            assert_eq!(stacked.len(), 15);
            for n in 0..3 {
                for l in 0..5 {
                    assert_eq!(stacked[n * 5 + l], ch.taps(m, n)[l]);
                }
            }
        }
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("taps.txt");
        let mut s = SeedStream::from_master(5).child("ch", 0);
        let p = BgParams::new(0.3, 0.7).unwrap();
        let ch = sample_bg_channel(2, 3, 11, &TapLaw::Bg(p), true, &mut s).unwrap();
        save_channel(&ch, &path).unwrap();
        let back = load_channel(&path).unwrap();
        for m in 0..3 {
            for n in 0..2 {
                for l in 0..11 {
                    let a = ch.taps(m, n)[l];
                    let b = back.taps(m, n)[l];
                    assert_eq!(a.re.to_bits(), b.re.to_bits());
                    assert_eq!(a.im.to_bits(), b.im.to_bits());
                }
            }
        }
    }

    #[test]
    fn load_rejects_missing_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.txt");
        std::fs::write(&path, "1 1 2\n0 0 0 1.0 0.0\n").unwrap();
        match load_channel(&path) {
            Err(Error::TapFile(msg)) => assert!(msg.contains("missing"), "{msg}"),
            other => panic!("expected tap-file error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inf.txt");
        std::fs::write(&path, "1 1 1\n0 0 0 inf 0.0\n").unwrap();
        match load_channel(&path) {
            Err(Error::TapFile(msg)) => assert!(msg.contains("non-finite"), "{msg}"),
            other => panic!("expected tap-file error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "1 1 1\n0 0 0 1.0\n").unwrap();
        assert!(matches!(load_channel(&path), Err(Error::TapFile(_))));
    }
}
