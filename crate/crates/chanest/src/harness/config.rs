//! Plain-text `key = value` experiment configuration.
//!
//! Every [`ExperimentSpec`] field has a key; `#` starts a comment. Grids
//! are comma lists, and `snr` also accepts a `start:step:stop` range.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::ofdm::NoiseMode;

use super::{BookKind, EstimatorKind, ExperimentSpec};

pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("SNR range must be start:step:stop, got {text:?}")));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad SNR value {p:?}"))))
            .collect::<Result<_>>()?;
        let (start, step, stop) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) {
            return Err(Error::Config("SNR step must be positive".into()));
        }
        let mut grid = Vec::new();
        let mut i = 0usize;
        loop {
            let v = start + step * i as f64;
            if v > stop + 1e-9 {
                break;
            }
            grid.push(v);
            i += 1;
        }
        if grid.is_empty() {
            return Err(Error::Config("empty SNR range".into()));
        }
        Ok(grid)
    } else {
        text.split(',')
            .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad SNR value {p:?}"))))
            .collect()
    }
}

pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad count {p:?}"))))
        .collect()
}

pub fn parse_estimators(text: &str) -> Result<Vec<EstimatorKind>> {
    text.split(',').map(EstimatorKind::parse).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

/// Apply `key = value` lines on top of `base`.
pub fn apply_config(base: ExperimentSpec, text: &str) -> Result<ExperimentSpec> {
    let mut spec = base;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value", lineno + 1)));
        };
        let key = key.trim();
        let v = value.trim();
        let bad = |what: &str| Error::Config(format!("line {}: bad {what} {v:?}", lineno + 1));
        match key {
            "k" => spec.k = v.parse().map_err(|_| bad("k"))?,
            "n_null" => spec.n_null = v.parse().map_err(|_| bad("n_null"))?,
            "n_tx" => spec.n_tx = v.parse().map_err(|_| bad("n_tx"))?,
            "m_rx" => spec.m_rx = v.parse().map_err(|_| bad("m_rx"))?,
            "chan_len" => spec.chan_len = v.parse().map_err(|_| bad("chan_len"))?,
            "n_zp" => spec.n_zp = v.parse().map_err(|_| bad("n_zp"))?,
            "pilots" => spec.pilot_counts = parse_usize_list(v)?,
            "snr" => spec.snr_db = parse_snr_grid(v)?,
            "trials" => spec.trials = v.parse().map_err(|_| bad("trials"))?,
            "seed" => spec.seed = v.parse().map_err(|_| bad("seed"))?,
            "estimators" => spec.estimators = parse_estimators(v)?,
            "book" => {
                spec.book = match v {
                    "orthogonal" => BookKind::Orthogonal,
                    "random_qpsk" | "random" => BookKind::RandomQpsk,
                    _ => return Err(bad("book scheme")),
                }
            }
            "lambda_true" => spec.lambda_true = v.parse().map_err(|_| bad("lambda_true"))?,
            "gamma_h_true" => spec.gamma_h_true = v.parse().map_err(|_| bad("gamma_h_true"))?,
            "channel_file" => spec.channel_file = Some(PathBuf::from(v)),
            "noise_mode" => {
                spec.noise_mode = match v {
                    "faithful" => NoiseMode::Faithful,
                    "whitened" => NoiseMode::Whitened,
                    _ => return Err(bad("noise mode")),
                }
            }
            "zeta" => spec.zeta = v.parse().map_err(|_| bad("zeta"))?,
            "k_max" => spec.k_max = v.parse().map_err(|_| bad("k_max"))?,
            "xi_t" => spec.xi_t = v.parse().map_err(|_| bad("xi_t"))?,
            "damping" => spec.damping = v.parse().map_err(|_| bad("damping"))?,
            "theta_tol" => spec.theta_tol = v.parse().map_err(|_| bad("theta_tol"))?,
            "omp_lambda_guess" => spec.omp_lambda_guess = v.parse().map_err(|_| bad("omp_lambda_guess"))?,
            "omp_stop" => {
                spec.omp_stop = match v {
                    "heuristic" => super::OmpStop::Heuristic,
                    "true_floor" => super::OmpStop::TrueNoiseFloor,
                    "atom_budget" => super::OmpStop::AtomBudget,
                    _ => return Err(bad("omp stop rule")),
                }
            }
            "sbl_max_iters" => spec.sbl_max_iters = v.parse().map_err(|_| bad("sbl_max_iters"))?,
            "sbl_prune_threshold" => spec.sbl_prune_threshold = v.parse().map_err(|_| bad("sbl_prune_threshold"))?,
            "sbl_tol" => spec.sbl_tol = v.parse().map_err(|_| bad("sbl_tol"))?,
            "threads" => spec.threads = v.parse().map_err(|_| bad("threads"))?,
            "timing" => spec.timing = parse_bool(key, v)?,
            "out" => spec.out = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
        }
    }
    Ok(spec)
}
