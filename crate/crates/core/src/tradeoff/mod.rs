//! Privacy/distortion tradeoffs: closed forms, exact and sampled distortion,
//! support-mismatch bounds and hyperparameter sweeps.

pub mod closed_form;
pub mod distortion;
pub mod mismatch;
pub mod sweep;
