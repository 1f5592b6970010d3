//! Sparse channel estimation for zero-padded MIMO-OFDM links.
//!
//! The crate synthesizes pilot observations through a faithful
//! time-domain transmit/receive chain, estimates the stacked channel taps
//! from them, and benchmarks the estimators against each other in a
//! deterministic Monte Carlo harness. The centerpiece is an iterative
//! estimator that alternates a scalar Bernoulli-Gaussian MMSE denoiser
//! with an SVD-domain linear-MMSE stage, connected by extrinsic Gaussian
//! messages, learning the sparsity rate and the tap/noise precisions by
//! expectation-maximization as it runs.
//!
//! Module map:
//!
//! * [`linalg`] — complex dense substrate: unitary DFT matrices, thin SVD
//!   with rank truncation, seeded circularly symmetric Gaussian sampling.
//! * [`seed`] — counter-based hierarchical random streams; every consumer
//!   owns a named substream so parallel trials reproduce bit-for-bit.
//! * [`channel`] — Bernoulli-Gaussian ground-truth realizations and the
//!   plain-text tap-file format.
//! * [`ofdm`] — pilot patterns and books, the ZP-OFDM chain with
//!   overlap-add reception, and the pilot measurement model `y = Wh + n`.
//! * [`denoiser`] — the scalar BG posterior, its divergence term, and the
//!   Gaussian-division message update, plus a brute-force reference
//!   integrator.
//! * [`vamp`] — the full estimation loop with EM hyperparameter learning,
//!   initialization heuristics, and stopping/divergence handling.
//! * [`baselines`] — LS, LMMSE, OMP, and SBL estimators sharing the same
//!   measurement interface, all instrumented with complex-multiply
//!   counts.
//! * [`harness`] — experiment orchestration: sweeps, MMSE equalization
//!   and QPSK demodulation, metrics, convergence studies, CSV output.
//! * [`guide`] — the book, compiled as doctests.
//!
//! The `chanest` binary exposes the harness as a CLI; see the guide's
//! experiments chapter for usage.

pub mod baselines;
pub mod channel;
pub mod denoiser;
pub mod error;
pub mod guide;
pub mod harness;
pub mod linalg;
pub mod ofdm;
pub mod seed;
pub mod vamp;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
