//! Experiment orchestration: deterministic Monte Carlo sweeps over SNR and
//! pilot count, per-trial equalization and raw BER, hyperparameter
//! convergence studies, and CSV persistence.
//!
//! Determinism contract: every random draw comes from a substream keyed by
//! `(pilot count, SNR index, trial, role)`, trials are independent tasks,
//! and the output rows are sorted after collection — the same master seed
//! gives a byte-identical CSV for any worker count. Wall-clock timing is
//! recorded only when explicitly enabled, since measured times would break
//! that contract.

pub mod config;
pub mod equalize;
pub mod metrics;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::baselines::{
    ls_estimate, lmmse_estimate, omp_estimate, sbl_estimate, EstimatorResult, EstimatorStatus,
    OmpConfig, SblConfig,
};
use crate::channel::{load_channel, sample_bg_channel, BgParams, ChannelRealization, TapLaw};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, SvdFactors};
use crate::ofdm::{
    build_measurement_matrix, channel_frequency_response, make_pilot_book, pilot_pattern,
    random_qpsk, BookScheme, MeasurementModel, NoiseMode, OfdmConfig, PilotBook, PilotScheme,
};
use crate::seed::SeedStream;
use crate::vamp::{init_hyperparams, run_em_vamp_traced, Hyperparams, Mode, VampConfig, VampStatus};

use equalize::{equalize_and_demod, qpsk_symbol};
use metrics::{bit_error_rate, pooled_nmse_db, symbol_mse_db};

/// Estimators the harness can run. `Csi` is the perfect-channel control:
/// the equalizer is fed the ground truth instead of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EstimatorKind {
    Csi,
    EmVamp,
    Lmmse,
    Ls,
    Omp,
    Sbl,
    Vamp,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Csi,
        EstimatorKind::EmVamp,
        EstimatorKind::Lmmse,
        EstimatorKind::Ls,
        EstimatorKind::Omp,
        EstimatorKind::Sbl,
        EstimatorKind::Vamp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Csi => "csi",
            EstimatorKind::EmVamp => "em-vamp",
            EstimatorKind::Lmmse => "lmmse",
            EstimatorKind::Ls => "ls",
            EstimatorKind::Omp => "omp",
            EstimatorKind::Sbl => "sbl",
            EstimatorKind::Vamp => "vamp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "csi" => Ok(EstimatorKind::Csi),
            "em-vamp" => Ok(EstimatorKind::EmVamp),
            "lmmse" => Ok(EstimatorKind::Lmmse),
            "ls" => Ok(EstimatorKind::Ls),
            "omp" => Ok(EstimatorKind::Omp),
            "sbl" => Ok(EstimatorKind::Sbl),
            "vamp" => Ok(EstimatorKind::Vamp),
            other => Err(Error::Config(format!("unknown estimator {other:?}"))),
        }
    }
}

/// How the sweep configures OMP's residual stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmpStop {
    /// Observation heuristic `‖y‖²/(1+ζ)` (the estimator's own default).
    Heuristic,
    /// The injected noise floor `K_p/γ_w` — an oracle-aided stop.
    TrueNoiseFloor,
    /// No residual stop: run to the atom budget, as a fixed sparse level.
    AtomBudget,
}

/// Pilot book family, resolved against the channel length at build time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BookKind {
    Orthogonal,
    RandomQpsk,
}

/// Everything one experiment needs. Field-for-field serializable through
/// the plain-text `key = value` config format in [`config`].
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub k: usize,
    pub n_null: usize,
    pub n_tx: usize,
    pub m_rx: usize,
    pub chan_len: usize,
    pub n_zp: usize,
    pub pilot_counts: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub book: BookKind,
    pub lambda_true: f64,
    pub gamma_h_true: f64,
    pub channel_file: Option<PathBuf>,
    pub noise_mode: NoiseMode,
    pub zeta: f64,
    pub k_max: usize,
    pub xi_t: f64,
    pub damping: f64,
    pub theta_tol: f64,
    pub omp_lambda_guess: f64,
    pub omp_stop: OmpStop,
    pub sbl_max_iters: usize,
    pub sbl_prune_threshold: f64,
    pub sbl_tol: f64,
    pub threads: usize,
    pub timing: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            k: 1024,
            n_null: 0,
            n_tx: 2,
            m_rx: 4,
            chan_len: 100,
            n_zp: 100,
            pilot_counts: vec![256],
            snr_db: vec![10.0],
            trials: 1,
            seed: 0,
            estimators: vec![
                EstimatorKind::Ls,
                EstimatorKind::Lmmse,
                EstimatorKind::Omp,
                EstimatorKind::Sbl,
                EstimatorKind::EmVamp,
                EstimatorKind::Csi,
            ],
            book: BookKind::Orthogonal,
            lambda_true: 0.1,
            gamma_h_true: 1.0,
            channel_file: None,
            noise_mode: NoiseMode::Faithful,
            zeta: 10.0,
            k_max: 50,
            xi_t: 1e-6,
            damping: 1.0,
            theta_tol: 1e-4,
            omp_lambda_guess: 0.25,
            omp_stop: OmpStop::Heuristic,
            sbl_max_iters: 200,
            sbl_prune_threshold: 1e8,
            sbl_tol: 1e-4,
            threads: 0,
            timing: false,
            out: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pilot_counts.is_empty() || self.snr_db.is_empty() {
            return Err(Error::Config("SNR and pilot grids must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("need at least one estimator".into()));
        }
        if !(self.lambda_true > 0.0 && self.lambda_true < 1.0) || !(self.gamma_h_true > 0.0) {
            return Err(Error::Config("channel law parameters out of range".into()));
        }
        if !(self.omp_lambda_guess > 0.0 && self.omp_lambda_guess <= 1.0) {
            return Err(Error::Config("omp_lambda_guess must lie in (0,1]".into()));
        }
        Ok(())
    }

    pub fn vamp_config(&self) -> VampConfig {
        VampConfig {
            k_max: self.k_max,
            xi_t: self.xi_t,
            zeta: self.zeta,
            damping: self.damping,
            theta_tol: self.theta_tol,
        }
    }

    fn sbl_config(&self) -> SblConfig {
        SblConfig {
            max_iters: self.sbl_max_iters,
            prune_threshold: self.sbl_prune_threshold,
            tol: self.sbl_tol,
            gamma_w_init: None,
        }
    }
}

/// One experiment row.
#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub estimator: EstimatorKind,
    pub snr_db: f64,
    pub k_p: usize,
    pub trial: u64,
    pub nmse_db: f64,
    pub symbol_mse_db: f64,
    pub raw_ber: f64,
    pub iterations: u64,
    pub cmul_count: u64,
    pub wall_ms: u64,
    pub status: &'static str,
}

pub const CSV_COLUMNS: &str =
    "estimator,snr_db,k_p,trial,nmse_db,symbol_mse_db,raw_ber,iterations,cmul_count,wall_ms,status";

#[derive(Debug)]
pub struct SweepOutput {
    pub records: Vec<MetricsRecord>,
    pub csv: String,
    /// True when every single row failed numerically — the CLI turns this
    /// into its dedicated exit code.
    pub all_failed: bool,
}

fn fmt_db(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.4}")
    }
}

fn render_csv(spec: &ExperimentSpec, records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    out.push_str("# chanest sweep\n");
    out.push_str(&format!(
        "# seed={} k={} n_null={} n_tx={} m_rx={} chan_len={} n_zp={} book={} noise={} trials={}\n",
        spec.seed,
        spec.k,
        spec.n_null,
        spec.n_tx,
        spec.m_rx,
        spec.chan_len,
        spec.n_zp,
        match spec.book {
            BookKind::Orthogonal => "orthogonal",
            BookKind::RandomQpsk => "random_qpsk",
        },
        match spec.noise_mode {
            NoiseMode::Faithful => "faithful",
            NoiseMode::Whitened => "whitened",
        },
        spec.trials,
    ));
    out.push_str(
        "# snr_db: pilot-subcarrier signal power over noise power, set per hydrophone from the realized ||W h_m||^2\n",
    );
    out.push_str(
        "# symbol_mse_db: equalized data symbols vs transmitted symbols; lmmse prior variance = lambda0/gamma_h0 from the observation heuristic\n",
    );
    out.push_str(
        "# iterations and cmul_count are summed over hydrophones; wall_ms is 0 unless timing was enabled\n",
    );
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{},{},{},{}\n",
            r.estimator.name(),
            r.snr_db,
            r.k_p,
            r.trial,
            fmt_db(r.nmse_db),
            fmt_db(r.symbol_mse_db),
            r.raw_ber,
            r.iterations,
            r.cmul_count,
            r.wall_ms,
            r.status,
        ));
    }
    out
}

fn hash_bytes(h: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *h ^= u64::from(b);
        *h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

fn hash_cvector(h: &mut u64, v: &CVector) {
    for x in v.iter() {
        hash_bytes(h, &x.re.to_bits().to_le_bytes());
        hash_bytes(h, &x.im.to_bits().to_le_bytes());
    }
}

/// FNV over the exact bit patterns of the estimator inputs; used to assert
/// that every estimator in a trial saw identical `(y, W)`.
pub fn input_hash(model: &MeasurementModel) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for y in &model.y {
        hash_cvector(&mut h, y);
    }
    for x in model.w.iter() {
        hash_bytes(&mut h, &x.re.to_bits().to_le_bytes());
        hash_bytes(&mut h, &x.im.to_bits().to_le_bytes());
    }
    h
}

/// Per-estimator knobs derived from the spec.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub zeta: f64,
    pub vamp: VampConfig,
    pub omp_lambda_guess: f64,
    /// Residual floor handed to OMP (`K_p/γ_w`), when known.
    pub omp_residual_floor: Option<f64>,
    pub sbl: SblConfig,
}

fn vamp_status(s: VampStatus) -> EstimatorStatus {
    match s {
        VampStatus::Converged => EstimatorStatus::Ok,
        VampStatus::MaxIterations => EstimatorStatus::MaxIterations,
        VampStatus::Diverged => EstimatorStatus::Diverged,
    }
}

/// Run one estimator on one hydrophone's observation. Returns the result
/// and, for the message-passing estimators, the hyperparameters they used.
pub fn run_estimator(
    kind: EstimatorKind,
    y: &CVector,
    w: &CMatrix,
    svd: &SvdFactors,
    opts: &EstimatorOptions,
) -> Result<(EstimatorResult, Option<Hyperparams>)> {
    match kind {
        EstimatorKind::Csi => Err(Error::InvalidParameter(
            "the perfect-CSI control is synthesized by the sweep, not estimated".into(),
        )),
        EstimatorKind::Ls => Ok((ls_estimate(y, svd)?, None)),
        EstimatorKind::Lmmse => {
            let (init, _) = init_hyperparams(y, w, opts.zeta)?;
            let prior_var = init.lambda / init.gamma_h;
            let res = lmmse_estimate(y, svd, prior_var, init.gamma_w)?;
            Ok((res, Some(init)))
        }
        EstimatorKind::Omp => {
            let nl = w.ncols();
            let atoms = ((nl as f64) * opts.omp_lambda_guess).ceil().max(1.0) as usize;
            let cfg = OmpConfig::new(atoms.min(nl), opts.omp_residual_floor)?;
            Ok((omp_estimate(y, w, &cfg)?, None))
        }
        EstimatorKind::Sbl => Ok((sbl_estimate(y, w, &opts.sbl)?, None)),
        EstimatorKind::Vamp => {
            let (init, _) = init_hyperparams(y, w, opts.zeta)?;
            let out = run_em_vamp_traced(y, svd, &opts.vamp, Mode::Fixed(init), None)?;
            let status = vamp_status(out.status);
            Ok((
                EstimatorResult {
                    h_hat: out.h_hat,
                    iterations: out.iterations,
                    cmul_count: out.cmul_count,
                    status,
                },
                Some(out.hyperparams),
            ))
        }
        EstimatorKind::EmVamp => {
            let out = run_em_vamp_traced(y, svd, &opts.vamp, Mode::Em, None)?;
            let status = vamp_status(out.status);
            Ok((
                EstimatorResult {
                    h_hat: out.h_hat,
                    iterations: out.iterations,
                    cmul_count: out.cmul_count,
                    status,
                },
                Some(out.hyperparams),
            ))
        }
    }
}

struct LinkContext {
    cfg: OfdmConfig,
    book: PilotBook,
    w: Arc<CMatrix>,
    svd: Arc<SvdFactors>,
}

fn build_link(spec: &ExperimentSpec, k_p: usize, root: &SeedStream) -> Result<LinkContext> {
    let occupied = spec
        .k
        .checked_sub(spec.n_null)
        .ok_or_else(|| Error::Config("more nulls than subcarriers".into()))?;
    let pilots = pilot_pattern(occupied, k_p, PilotScheme::EquallySpaced)
        .or_else(|_| pilot_pattern(occupied, k_p, PilotScheme::NearestUniform))?;
    let cfg = OfdmConfig::new(spec.k, spec.n_null, pilots, spec.n_tx, spec.m_rx, spec.chan_len, spec.n_zp)?;
    let mut book_stream = root.child("pilot_book", k_p as u64);
    let scheme = match spec.book {
        BookKind::Orthogonal => BookScheme::Orthogonal { chan_len: spec.chan_len },
        BookKind::RandomQpsk => BookScheme::RandomQpsk,
    };
    let book = make_pilot_book(spec.n_tx, k_p, scheme, &mut book_stream)?;
    let (w, svd) = build_measurement_matrix(&cfg, &book)?;
    Ok(LinkContext { cfg, book, w: Arc::new(w), svd: Arc::new(svd) })
}

struct TrialSetup {
    channel: ChannelRealization,
    model: MeasurementModel,
    tx_bits: Vec<Vec<u8>>,
    tx_symbols: CMatrix,
    rx_data: Vec<CVector>,
}

fn synthesize_trial(
    spec: &ExperimentSpec,
    link: &LinkContext,
    base_channel: Option<&ChannelRealization>,
    snr_db: f64,
    stream: &SeedStream,
) -> Result<TrialSetup> {
    let cfg = &link.cfg;
    let channel = match base_channel {
        Some(ch) => ch.clone(),
        None => {
            let law = TapLaw::Bg(BgParams::new(spec.lambda_true, spec.gamma_h_true)?);
            let mut ch_stream = stream.child("channel", 0);
            sample_bg_channel(spec.n_tx, spec.m_rx, spec.chan_len, &law, true, &mut ch_stream)?
        }
    };

    let k_d = cfg.k_d();
    let mut data_stream = stream.child("data", 0);
    let mut tx_bits: Vec<Vec<u8>> = Vec::with_capacity(spec.n_tx);
    for _ in 0..spec.n_tx {
        let qpsk = random_qpsk(k_d, &mut data_stream);
        let mut bits = vec![0u8; 2 * k_d];
        for j in 0..k_d {
            let (b0, b1) = equalize::qpsk_demod(qpsk[j]);
            bits[2 * j] = b0;
            bits[2 * j + 1] = b1;
        }
        let _ = qpsk;
        tx_bits.push(bits);
    }
    let mut tx_symbols = CMatrix::zeros(spec.n_tx, k_d);
    let mut data_vectors: Vec<CVector> = Vec::with_capacity(spec.n_tx);
    for n in 0..spec.n_tx {
        let v = CVector::from_fn(k_d, |j, _| qpsk_symbol(tx_bits[n][2 * j], tx_bits[n][2 * j + 1]));
        tx_symbols.row_mut(n).copy_from(&v.transpose());
        data_vectors.push(v);
    }

    // per-hydrophone noise precision from the realized pilot signal power,
    // so the injected pilot-domain SNR is exact
    let snr_lin = 10f64.powf(snr_db / 10.0);
    let mut gamma_w = Vec::with_capacity(spec.m_rx);
    for m in 0..spec.m_rx {
        let p = (&*link.w * channel.stacked(m)).norm_squared() / cfg.k_p() as f64;
        if !(p > 0.0) {
            return Err(Error::Numeric("trial produced zero pilot signal power".into()));
        }
        gamma_w.push(snr_lin / p);
    }

    let rx_stream = stream.child("rx", 0);
    let rx =
        transmit_receive_wrapper(cfg, &link.book, &data_vectors, &channel, &gamma_w, spec.noise_mode, &rx_stream)?;
    let pilots: Vec<CVector> = rx.iter().map(|b| b.pilots.clone()).collect();
    let rx_data: Vec<CVector> = rx.iter().map(|b| b.data.clone()).collect();
    let model = MeasurementModel::new(link.w.clone(), link.svd.clone(), pilots, gamma_w)?;
    Ok(TrialSetup { channel, model, tx_bits, tx_symbols, rx_data })
}

fn transmit_receive_wrapper(
    cfg: &OfdmConfig,
    book: &PilotBook,
    data: &[CVector],
    channel: &ChannelRealization,
    gamma_w: &[f64],
    mode: NoiseMode,
    stream: &SeedStream,
) -> Result<Vec<crate::ofdm::ReceivedBlock>> {
    crate::ofdm::transmit_receive(cfg, book, data, channel, gamma_w, mode, stream)
}

/// Per-data-bin equalizer gains `H(k)/√K` of an estimated (or true)
/// channel.
fn data_bin_gains(channel: &ChannelRealization, cfg: &OfdmConfig) -> Result<Vec<CMatrix>> {
    let resp = channel_frequency_response(channel, cfg)?;
    let scale = Complex64::from(1.0 / (cfg.k as f64).sqrt());
    Ok(cfg.data_indices().iter().map(|&d| &resp[d] * scale).collect())
}

fn status_severity(s: EstimatorStatus) -> u8 {
    match s {
        EstimatorStatus::Ok => 0,
        EstimatorStatus::RankDeficient => 1,
        EstimatorStatus::MaxIterations => 2,
        EstimatorStatus::Stalled => 3,
        EstimatorStatus::Diverged => 4,
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    link: &LinkContext,
    base_channel: Option<&ChannelRealization>,
    snr_db: f64,
    snr_idx: usize,
    k_p: usize,
    trial: u64,
    root: &SeedStream,
) -> Result<Vec<MetricsRecord>> {
    let stream = root.child("kp", k_p as u64).child("snr", snr_idx as u64).child("trial", trial);
    let setup = synthesize_trial(spec, link, base_channel, snr_db, &stream)?;
    let cfg = &link.cfg;
    let truths: Vec<CVector> = (0..spec.m_rx).map(|m| setup.channel.stacked(m)).collect();
    let hash_before = input_hash(&setup.model);

    let mean_true_noise_var =
        setup.model.true_gamma_w.iter().map(|g| 1.0 / g).sum::<f64>() / spec.m_rx as f64;

    let mut records = Vec::with_capacity(spec.estimators.len());
    for &kind in &spec.estimators {
        let start = spec.timing.then(Instant::now);
        let mut iterations = 0u64;
        let mut cmuls = 0u64;
        let mut severity = 0u8;
        let mut status = EstimatorStatus::Ok;
        let mut failed = false;
        let mut learned: Vec<Hyperparams> = Vec::new();
        let mut h_hats: Vec<CVector> = Vec::with_capacity(spec.m_rx);

        if kind == EstimatorKind::Csi {
            h_hats = truths.clone();
        } else {
            for m in 0..spec.m_rx {
                let opts = EstimatorOptions {
                    zeta: spec.zeta,
                    vamp: spec.vamp_config(),
                    omp_lambda_guess: spec.omp_lambda_guess,
                    omp_residual_floor: match spec.omp_stop {
                        OmpStop::Heuristic => None,
                        OmpStop::TrueNoiseFloor => {
                            Some(cfg.k_p() as f64 / setup.model.true_gamma_w[m])
                        }
                        OmpStop::AtomBudget => Some(0.0),
                    },
                    sbl: spec.sbl_config(),
                };
                match run_estimator(kind, &setup.model.y[m], &setup.model.w, &setup.model.svd, &opts) {
                    Ok((res, hp)) => {
                        iterations += res.iterations as u64;
                        cmuls += res.cmul_count;
                        if status_severity(res.status) > severity {
                            severity = status_severity(res.status);
                            status = res.status;
                        }
                        if let Some(hp) = hp {
                            learned.push(hp);
                        }
                        h_hats.push(res.h_hat);
                    }
                    Err(_) => {
                        failed = true;
                        break;
                    }
                }
            }
        }

        let record = if failed {
            MetricsRecord {
                estimator: kind,
                snr_db,
                k_p,
                trial,
                nmse_db: f64::NAN,
                symbol_mse_db: f64::NAN,
                raw_ber: f64::NAN,
                iterations,
                cmul_count: cmuls,
                wall_ms: 0,
                status: "error",
            }
        } else {
            let est_channel = ChannelRealization::from_stacked(&h_hats, spec.n_tx, spec.chan_len)?;
            let gains = data_bin_gains(&est_channel, cfg)?;
            let eq_noise_var = if kind == EstimatorKind::Csi || learned.is_empty() {
                mean_true_noise_var
            } else {
                learned.iter().map(|hp| 1.0 / hp.gamma_w).sum::<f64>() / learned.len() as f64
            };
            let eq = equalize_and_demod(&gains, &setup.rx_data, 1.0 / eq_noise_var)?;
            let ber = bit_error_rate(&eq.bits, &setup.tx_bits)?;
            let mse = symbol_mse_db(&eq.symbols, &setup.tx_symbols)?;
            let pairs: Vec<(&CVector, &CVector)> = h_hats.iter().zip(truths.iter()).collect();
            let nmse = pooled_nmse_db(&pairs)?;
            let wall_ms = start.map(|t| t.elapsed().as_millis() as u64).unwrap_or(0);
            MetricsRecord {
                estimator: kind,
                snr_db,
                k_p,
                trial,
                nmse_db: nmse,
                symbol_mse_db: mse,
                raw_ber: ber,
                iterations,
                cmul_count: cmuls,
                wall_ms,
                status: status.as_str(),
            }
        };
        records.push(record);

        if input_hash(&setup.model) != hash_before {
            return Err(Error::Numeric("estimator mutated shared trial inputs".into()));
        }
    }
    Ok(records)
}

/// Run the full sweep described by `spec` and render the CSV.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    if spec.m_rx < spec.n_tx {
        return Err(Error::Config(
            "equalization needs at least as many hydrophones as transducers".into(),
        ));
    }
    let root = SeedStream::from_master(spec.seed);

    let base_channel: Option<ChannelRealization> = match &spec.channel_file {
        Some(path) => {
            let ch = load_channel(path)?;
            if ch.n_tx() != spec.n_tx || ch.m_rx() != spec.m_rx || ch.tap_len() != spec.chan_len {
                return Err(Error::Config("tap file does not match the link geometry".into()));
            }
            Some(ch)
        }
        None => None,
    };

    let mut links = Vec::with_capacity(spec.pilot_counts.len());
    for &k_p in &spec.pilot_counts {
        links.push((k_p, build_link(spec, k_p, &root)?));
    }

    let mut tasks = Vec::new();
    for (li, (k_p, _)) in links.iter().enumerate() {
        for (si, &snr) in spec.snr_db.iter().enumerate() {
            for trial in 0..spec.trials {
                tasks.push((li, *k_p, si, snr, trial));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let nested: Vec<Result<Vec<MetricsRecord>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(li, k_p, si, snr, trial)| {
                run_trial(spec, &links[li].1, base_channel.as_ref(), snr, si, k_p, trial, &root)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(nested.len() * spec.estimators.len());
    for r in nested {
        records.extend(r?);
    }
    records.sort_by(|a, b| {
        a.estimator
            .name()
            .cmp(b.estimator.name())
            .then(a.snr_db.partial_cmp(&b.snr_db).expect("finite SNR"))
            .then(a.k_p.cmp(&b.k_p))
            .then(a.trial.cmp(&b.trial))
    });

    let all_failed = records.iter().all(|r| {
        r.status == "error" || r.status == "diverged" || r.status == "stalled" || !r.nmse_db.is_finite()
    });
    let csv = render_csv(spec, &records);
    if let Some(path) = &spec.out {
        std::fs::write(path, &csv)?;
    }
    Ok(SweepOutput { records, csv, all_failed })
}

/// One line of the estimator cost table.
#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub estimator: EstimatorKind,
    pub iterations: usize,
    pub cmul_count: u64,
    pub wall_us: u64,
}

/// Measure instrumented complex multiplies and wall time per estimator on
/// one synthesized trial (all hydrophones, first grid point).
pub fn bench_estimators(spec: &ExperimentSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let root = SeedStream::from_master(spec.seed);
    let k_p = spec.pilot_counts[0];
    let link = build_link(spec, k_p, &root)?;
    let stream = root.child("kp", k_p as u64).child("snr", 0).child("trial", 0);
    let setup = synthesize_trial(spec, &link, None, spec.snr_db[0], &stream)?;
    let mut rows = Vec::new();
    for &kind in &spec.estimators {
        if kind == EstimatorKind::Csi {
            continue;
        }
        let start = Instant::now();
        let mut iterations = 0usize;
        let mut cmuls = 0u64;
        for m in 0..spec.m_rx {
            let opts = EstimatorOptions {
                zeta: spec.zeta,
                vamp: spec.vamp_config(),
                omp_lambda_guess: spec.omp_lambda_guess,
                omp_residual_floor: match spec.omp_stop {
                    OmpStop::Heuristic => None,
                    OmpStop::TrueNoiseFloor => {
                        Some(link.cfg.k_p() as f64 / setup.model.true_gamma_w[m])
                    }
                    OmpStop::AtomBudget => Some(0.0),
                },
                sbl: spec.sbl_config(),
            };
            let (res, _) = run_estimator(kind, &setup.model.y[m], &setup.model.w, &setup.model.svd, &opts)?;
            iterations += res.iterations;
            cmuls += res.cmul_count;
        }
        rows.push(BenchRow {
            estimator: kind,
            iterations,
            cmul_count: cmuls,
            wall_us: start.elapsed().as_micros() as u64,
        });
    }
    Ok(rows)
}

/// Synthesize trial 0 of the spec's first grid point and run the EM
/// estimator with per-iteration tracing on every hydrophone. Backs the
/// CLI's verbose single-trial mode.
pub fn single_trial_trace(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    spec.validate()?;
    let root = SeedStream::from_master(spec.seed);
    let k_p = spec.pilot_counts[0];
    let link = build_link(spec, k_p, &root)?;
    let stream = root.child("kp", k_p as u64).child("snr", 0).child("trial", 0);
    let setup = synthesize_trial(spec, &link, None, spec.snr_db[0], &stream)?;
    let mut rows = Vec::new();
    for m in 0..spec.m_rx {
        let truth = setup.channel.stacked(m);
        let out = run_em_vamp_traced(
            &setup.model.y[m],
            &setup.model.svd,
            &spec.vamp_config(),
            Mode::Em,
            Some(&truth),
        )?;
        for row in &out.trace.rows {
            rows.push(ConvergenceRow {
                trial: 0,
                init: 0,
                hydrophone: m,
                iteration: row.iteration,
                lambda: row.lambda,
                gamma_h: row.gamma_h,
                gamma_w: row.gamma_w,
                xi: row.xi,
                nmse_db: row.nmse_db.unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

/// One hyperparameter trajectory row of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub trial: u64,
    pub init: usize,
    pub hydrophone: usize,
    pub iteration: usize,
    pub lambda: f64,
    pub gamma_h: f64,
    pub gamma_w: f64,
    pub xi: f64,
    pub nmse_db: f64,
}

#[derive(Debug)]
pub struct ConvergenceOutput {
    pub rows: Vec<ConvergenceRow>,
    pub csv: String,
}

/// Track the EM hyperparameter trajectories from several starting points on
/// identical synthesized data. Uses the first entries of the spec's SNR and
/// pilot grids.
pub fn convergence_study(spec: &ExperimentSpec, inits: &[Hyperparams]) -> Result<ConvergenceOutput> {
    spec.validate()?;
    if inits.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two initializations".into()));
    }
    let root = SeedStream::from_master(spec.seed);
    let k_p = spec.pilot_counts[0];
    let snr = spec.snr_db[0];
    let link = build_link(spec, k_p, &root)?;

    let tasks: Vec<u64> = (0..spec.trials).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let nested: Vec<Result<Vec<ConvergenceRow>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&trial| {
                let stream =
                    root.child("kp", k_p as u64).child("snr", 0).child("trial", trial);
                let setup = synthesize_trial(spec, &link, None, snr, &stream)?;
                let mut rows = Vec::new();
                for (ii, init) in inits.iter().enumerate() {
                    for m in 0..spec.m_rx {
                        let truth = setup.channel.stacked(m);
                        let out = run_em_vamp_traced(
                            &setup.model.y[m],
                            &setup.model.svd,
                            &spec.vamp_config(),
                            Mode::EmFrom(*init),
                            Some(&truth),
                        )?;
                        for row in &out.trace.rows {
                            rows.push(ConvergenceRow {
                                trial,
                                init: ii,
                                hydrophone: m,
                                iteration: row.iteration,
                                lambda: row.lambda,
                                gamma_h: row.gamma_h,
                                gamma_w: row.gamma_w,
                                xi: row.xi,
                                nmse_db: row.nmse_db.unwrap_or(f64::NAN),
                            });
                        }
                    }
                }
                Ok(rows)
            })
            .collect()
    });

    let mut rows = Vec::new();
    for r in nested {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        a.trial
            .cmp(&b.trial)
            .then(a.init.cmp(&b.init))
            .then(a.hydrophone.cmp(&b.hydrophone))
            .then(a.iteration.cmp(&b.iteration))
    });

    let mut csv = String::from("# chanest convergence study\n");
    csv.push_str(&format!("# seed={} k_p={k_p} snr_db={snr} inits={}\n", spec.seed, inits.len()));
    csv.push_str("trial,init,hydrophone,iteration,lambda,gamma_h,gamma_w,xi,nmse_db\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{}\n",
            r.trial,
            r.init,
            r.hydrophone,
            r.iteration,
            r.lambda,
            r.gamma_h,
            r.gamma_w,
            r.xi,
            fmt_db(r.nmse_db),
        ));
    }
    if let Some(path) = &spec.out {
        std::fs::write(path, &csv)?;
    }
    Ok(ConvergenceOutput { rows, csv })
}
