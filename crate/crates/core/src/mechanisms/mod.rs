//! Release mechanisms and the ways to combine them.

pub mod combinators;
pub mod config;
pub mod maxl;
pub mod qm;
pub mod rr;
