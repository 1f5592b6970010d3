//! The narrative guide, one module per chapter.
//!
//! The chapter sources live in `book/` at the workspace root (an mdbook;
//! `mdbook serve book` renders it). Including them here makes every code
//! snippet in the book a doctest, so `cargo test` keeps the guide in sync
//! with the library.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/signal-model.md")]
pub mod signal_model {}

#[doc = include_str!("../../../book/src/denoiser.md")]
pub mod bg_denoiser {}

#[doc = include_str!("../../../book/src/estimator.md")]
pub mod message_passing {}

#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baseline_estimators {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
