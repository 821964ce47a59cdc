//! Randomized response over parameter spaces.
//!
//! With N outputs and boost b = e^ε, the input is released with probability
//! b/(N+b−1) and every other output with probability 1/(N+b−1).

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanism::{materialize, Mechanism};
use crate::param::{CategoricalParam, DEFAULT_ENUM_CAP};
use crate::policy::PolicyMatrix;
use crate::prob::{from_biguint, ln_rational, Rational};
use crate::space::ParameterSpace;

/// e^ε, kept exact. `Infinite` is the ε → ∞ limit (identity release).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Boost {
    Finite(Rational),
    Infinite,
}

impl Boost {
    pub fn new(b: Rational) -> Result<Self> {
        if b < Rational::one() {
            return Err(Error::InvalidArgument("e^epsilon must be at least 1".into()));
        }
        Ok(Boost::Finite(b))
    }

    /// e^ε from a float ε; the binary value of exp(ε) is taken exactly.
    pub fn from_epsilon(eps: f64) -> Result<Self> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::InvalidArgument(format!("epsilon {eps} must be non-negative")));
        }
        if eps == f64::INFINITY {
            return Ok(Boost::Infinite);
        }
        let b = Rational::from_float(eps.exp())
            .ok_or_else(|| Error::InvalidArgument(format!("epsilon {eps} overflows")))?;
        Self::new(b.max(Rational::one()))
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Boost::Finite(b) => ln_rational(b),
            Boost::Infinite => f64::INFINITY,
        }
    }
}

/// Where RR draws its outputs from.
#[derive(Clone, Debug)]
pub enum RrSupport {
    /// One output space for every input; inputs must belong to it.
    Fixed(ParameterSpace),
    /// Compositions over the estimated categories plus the input's own support.
    EstimatedUnionInput { categories: Vec<String>, tau: u64, estimated: Vec<usize> },
}

#[derive(Clone, Debug)]
pub struct RrMechanism {
    pub boost: Boost,
    pub support: RrSupport,
    /// Largest output space `row` will enumerate.
    pub cap: u64,
}

impl RrMechanism {
    pub fn new(boost: Boost, output_space: ParameterSpace) -> Self {
        RrMechanism { boost, support: RrSupport::Fixed(output_space), cap: DEFAULT_ENUM_CAP }
    }

    pub fn output_space_for(&self, theta: &CategoricalParam) -> Result<ParameterSpace> {
        match &self.support {
            RrSupport::Fixed(sp) => Ok(sp.clone()),
            RrSupport::EstimatedUnionInput { categories, tau, estimated } => {
                let mut active = estimated.clone();
                active.extend(theta.support());
                ParameterSpace::compositions_over(categories.clone(), *tau, active)
            }
        }
    }

    fn param<'a>(&self, input: &'a Label) -> Result<&'a CategoricalParam> {
        input
            .as_param()
            .ok_or_else(|| Error::AlphabetMismatch(format!("RR needs a parameter input, got {input}")))
    }

    // row denominator N + b − 1 for an output space of N parameters
    fn weights(&self, b: &Rational, n: &BigUint) -> Rational {
        from_biguint(n) + b - Rational::one()
    }
}

impl Mechanism for RrMechanism {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        let theta = self.param(input)?;
        let sp = self.output_space_for(theta)?;
        if !sp.contains(theta) {
            return Err(Error::NotInSpace(format!("{theta} is outside the RR output space")));
        }
        let b = match &self.boost {
            Boost::Infinite => return Ok(vec![(input.clone(), Rational::one())]),
            Boost::Finite(b) => b,
        };
        let den = self.weights(b, &sp.len());
        let on = b / &den;
        let off = Rational::one() / &den;
        Ok(sp
            .enumerate(self.cap)?
            .into_iter()
            .map(|o| {
                let p = if &o == theta { on.clone() } else { off.clone() };
                (Label::Param(o), p)
            })
            .collect())
    }

    fn likelihood(&self, input: &Label, output: &Label) -> Result<Rational> {
        let theta = self.param(input)?;
        let sp = self.output_space_for(theta)?;
        if !sp.contains(theta) {
            return Err(Error::NotInSpace(format!("{theta} is outside the RR output space")));
        }
        let out = match output.as_param() {
            Some(o) if sp.contains(o) => o,
            _ => return Ok(Rational::zero()),
        };
        Ok(match &self.boost {
            Boost::Infinite => {
                if out == theta {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
            Boost::Finite(b) => {
                let den = self.weights(b, &sp.len());
                if out == theta {
                    b / den
                } else {
                    Rational::one() / den
                }
            }
        })
    }

    /// Keeps θ with probability b/(N+b−1); otherwise draws a uniform index among the
    /// N−1 others and shifts it past θ's rank, so no rejection loop is needed.
    fn sample(&self, input: &Label, rng: &mut dyn RngCore) -> Result<Label> {
        let theta = self.param(input)?;
        let sp = self.output_space_for(theta)?;
        let rank = sp
            .index_of(theta)
            .ok_or_else(|| Error::NotInSpace(format!("{theta} is outside the RR output space")))?;
        let b = match &self.boost {
            Boost::Infinite => return Ok(input.clone()),
            Boost::Finite(b) => b,
        };
        let n = sp.len();
        // b = p/q: keep with probability p / (qN + p − q)
        let (p, q) = (b.numer().magnitude(), b.denom().magnitude());
        let total = q * &n + p - q;
        if rng.gen_biguint_below(&total) < *p {
            return Ok(input.clone());
        }
        let mut j = rng.gen_biguint_below(&(n - 1u32));
        if j >= rank {
            j += 1u32;
        }
        Ok(Label::Param(sp.get(&j)?))
    }

    fn is_deterministic(&self) -> bool {
        matches!(self.boost, Boost::Infinite)
    }

    fn name(&self) -> String {
        match &self.boost {
            Boost::Finite(b) => format!("rr(e^eps={})", crate::prob::fmt_rational(b)),
            Boost::Infinite => "rr(eps=inf)".into(),
        }
    }
}

/// The explicit RR policy on `inputs`.
pub fn rr_policy(mech: &RrMechanism, inputs: &[CategoricalParam]) -> Result<PolicyMatrix> {
    let labels: Vec<Label> = inputs.iter().cloned().map(Label::Param).collect();
    materialize(mech, &labels)
}

/// r = (e^ε − 1)/N, the quantity the closed forms are written in.
pub fn rr_r(boost: &Rational, n_outputs: &BigUint) -> Rational {
    (boost - Rational::one()) / from_biguint(n_outputs)
}
