//! Exact statistic maximal leakage (SML) for discrete data-release mechanisms.
//!
//! Probabilities stay exact rationals throughout; logarithms are taken only when a
//! value is reported. Deterministic policies are evaluated through a min-cost flow,
//! everything else by exhaustive search over prior assignments.

pub mod error;
pub mod flow;
pub mod label;
pub mod leakage;
pub mod mechanism;
pub mod mechanisms;
pub mod param;
pub mod policy;
pub mod prob;
pub mod secret;
pub mod space;
pub mod tabular;
pub mod tradeoff;

pub use error::{Error, Result};
pub use label::Label;
pub use param::{CategoricalParam, DEFAULT_ENUM_CAP};
pub use policy::PolicyMatrix;
pub use prob::{LogBase, Prob, Rational};
pub use secret::{SecretPartition, SecretValue};
pub use space::ParameterSpace;
