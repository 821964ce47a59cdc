//! JSON-configurable mechanisms.
//!
//! ```json
//! {"type": "rr", "epsilon": 1.5}
//! {"type": "qm", "interval": 4}
//! {"type": "maxl", "candidates": {"interval": 4}}
//! {"type": "postprocess", "inner": {"type": "identity"}, "kernel": {...policy...}}
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanism::{rng_for, ConstantMechanism, IdentityMechanism, Mechanism, PolicyMechanism};
use crate::mechanisms::combinators::{Compose, PostProcess, Stage};
use crate::mechanisms::maxl::{maxl_build, qm_style_candidates};
use crate::mechanisms::qm::{QmFraction, QmSupport, QmPartition};
use crate::mechanisms::rr::{Boost, RrMechanism, RrSupport};
use crate::param::{CategoricalParam, DEFAULT_ENUM_CAP};
use crate::policy::PolicyMatrix;
use crate::prob::parse_rational;
use crate::secret::{build_partition, SecretFunction};
use crate::space::ParameterSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Value(f64),
    /// "inf" or "infinity".
    Text(String),
}

impl Epsilon {
    fn boost(&self) -> Result<Boost> {
        match self {
            Epsilon::Value(e) => Boost::from_epsilon(*e),
            Epsilon::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(Boost::Infinite),
            Epsilon::Text(t) => Boost::from_epsilon(t.parse().map_err(|_| Error::Parse(format!("epsilon {t:?}")))?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Candidates {
    /// One uniformly drawn parameter per bin of I secret values.
    Interval { interval: usize },
    /// Explicit counts vectors.
    List(Vec<Vec<u64>>),
    /// "space": every input is a candidate.
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MechanismConfig {
    /// Either `epsilon` (nats, or "inf") or an exact `boost` e^ε such as "3/2".
    Rr {
        #[serde(default)]
        epsilon: Option<Epsilon>,
        #[serde(default)]
        boost: Option<String>,
    },
    Qm {
        interval: usize,
    },
    Maxl {
        candidates: Candidates,
    },
    Compose {
        stages: Vec<MechanismConfig>,
    },
    Postprocess {
        inner: Box<MechanismConfig>,
        kernel: serde_json::Value,
    },
    Identity,
    Constant {
        output: Label,
    },
    Policy {
        policy: serde_json::Value,
    },
}

/// What a configuration is built against.
#[derive(Clone)]
pub struct BuildContext {
    /// The input space.
    pub space: ParameterSpace,
    /// Γ̂* as category indices; RR and QM then release over Γ̂* ∪ supp(θ).
    pub estimated: Option<Vec<usize>>,
    /// Set when the secret is the fraction of a single category.
    pub fraction_category: Option<usize>,
    pub secret: Option<Arc<dyn SecretFunction>>,
    pub seed: u64,
    pub cap: u64,
}

impl BuildContext {
    pub fn new(space: ParameterSpace) -> Self {
        BuildContext { space, estimated: None, fraction_category: None, secret: None, seed: 0, cap: DEFAULT_ENUM_CAP }
    }

    fn secret(&self) -> Result<&dyn SecretFunction> {
        self.secret.as_deref().ok_or_else(|| Error::InvalidArgument("this mechanism needs a secret".into()))
    }
}

impl MechanismConfig {
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn build(&self, ctx: &BuildContext) -> Result<Arc<dyn Mechanism>> {
        Ok(match self {
            MechanismConfig::Rr { epsilon, boost } => {
                let b = match (epsilon, boost) {
                    (Some(e), None) => e.boost()?,
                    (None, Some(b)) => Boost::new(parse_rational(b)?)?,
                    _ => return Err(Error::InvalidArgument("rr needs exactly one of epsilon, boost".into())),
                };
                let support = match &ctx.estimated {
                    None => RrSupport::Fixed(ctx.space.clone()),
                    Some(est) => RrSupport::EstimatedUnionInput {
                        categories: ctx.space.categories().to_vec(),
                        tau: ctx.space.tau(),
                        estimated: est.clone(),
                    },
                };
                Arc::new(RrMechanism { boost: b, support, cap: ctx.cap })
            }
            MechanismConfig::Qm { interval } => match ctx.fraction_category {
                Some(c) => {
                    let mut q = QmFraction::new(ctx.space.categories().to_vec(), ctx.space.tau(), c, *interval)?;
                    q.cap = ctx.cap;
                    if let Some(est) = &ctx.estimated {
                        q.support = QmSupport::EstimatedUnionInput(est.clone());
                    }
                    Arc::new(q)
                }
                None => {
                    let (members, part) = build_partition(&ctx.space, ctx.secret()?, ctx.cap)?;
                    Arc::new(QmPartition::new(members, part, *interval)?)
                }
            },
            MechanismConfig::Maxl { candidates } => {
                let inputs = ctx.space.enumerate(ctx.cap)?;
                let cands = match candidates {
                    Candidates::Interval { interval } => {
                        let c = ctx
                            .fraction_category
                            .ok_or_else(|| Error::InvalidArgument("interval candidates need a fraction secret".into()))?;
                        qm_style_candidates(&ctx.space, c, *interval, &mut rng_for(ctx.seed, *interval as u64))?
                    }
                    Candidates::List(v) => v
                        .iter()
                        .map(|c| CategoricalParam::new(ctx.space.tau(), c.clone()))
                        .collect::<Result<Vec<_>>>()?,
                    Candidates::Keyword(k) if k == "space" => inputs.clone(),
                    Candidates::Keyword(k) => return Err(Error::Parse(format!("unknown candidate set {k:?}"))),
                };
                Arc::new(maxl_build(&inputs, &cands)?)
            }
            MechanismConfig::Compose { stages } => Arc::new(Compose::new(
                stages.iter().map(|s| s.build(ctx).map(Stage::Fixed)).collect::<Result<Vec<_>>>()?,
            )?),
            MechanismConfig::Postprocess { inner, kernel } => {
                Arc::new(PostProcess::new(inner.build(ctx)?, PolicyMatrix::from_json(kernel)?))
            }
            MechanismConfig::Identity => Arc::new(IdentityMechanism),
            MechanismConfig::Constant { output } => Arc::new(ConstantMechanism { output: output.clone() }),
            MechanismConfig::Policy { policy } => Arc::new(PolicyMechanism::new(PolicyMatrix::from_json(policy)?)),
        })
    }
}
