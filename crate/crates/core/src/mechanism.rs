//! The common mechanism interface plus a few trivial mechanisms.

use std::collections::HashMap;

use num_bigint::{BigInt, RandBigInt};
use num_traits::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::param::lcm_all;
use crate::policy::PolicyMatrix;
use crate::prob::Rational;

/// A release mechanism: an exact likelihood oracle and a seeded sampler.
pub trait Mechanism: Send + Sync {
    /// Outputs with positive probability for `input`, in a fixed order.
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>>;

    fn likelihood(&self, input: &Label, output: &Label) -> Result<Rational> {
        Ok(self
            .row(input)?
            .into_iter()
            .find(|(o, _)| o == output)
            .map(|(_, p)| p)
            .unwrap_or_else(Rational::zero))
    }

    fn sample(&self, input: &Label, rng: &mut dyn RngCore) -> Result<Label> {
        let row = self.row(input)?;
        let w: Vec<Rational> = row.iter().map(|(_, p)| p.clone()).collect();
        let k = sample_weighted(&w, rng)?;
        Ok(row[k].0.clone())
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn name(&self) -> String;
}

/// Generator for `(seed, stream)`; distinct streams are independent and order-free.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Draws an index with probability proportional to the exact weights.
pub fn sample_weighted(weights: &[Rational], rng: &mut dyn RngCore) -> Result<usize> {
    if weights.iter().any(|w| w.is_negative()) {
        return Err(Error::InvalidArgument("negative weight".into()));
    }
    let l = lcm_all(weights.iter().map(|w| w.denom()));
    let scaled: Vec<BigInt> = weights.iter().map(|w| w.numer() * (&l / w.denom())).collect();
    let total: BigInt = scaled.iter().sum();
    if total.is_zero() {
        return Err(Error::InvalidArgument("all weights zero".into()));
    }
    let mut u = BigInt::from(rng.gen_biguint_below(total.magnitude()));
    for (i, s) in scaled.iter().enumerate() {
        if u < *s {
            return Ok(i);
        }
        u -= s;
    }
    unreachable!("u is below the total")
}

/// Builds the explicit policy of `mech` on `inputs`. Outputs appear in first-seen order.
pub fn materialize(mech: &dyn Mechanism, inputs: &[Label]) -> Result<PolicyMatrix> {
    let mut outputs: Vec<Label> = Vec::new();
    let mut pos: HashMap<Label, usize> = HashMap::new();
    let mut sparse = Vec::with_capacity(inputs.len());
    for x in inputs {
        let row = mech.row(x)?;
        let mut r = Vec::with_capacity(row.len());
        for (o, p) in row {
            let j = *pos.entry(o.clone()).or_insert_with(|| {
                outputs.push(o);
                outputs.len() - 1
            });
            r.push((j, p));
        }
        sparse.push(r);
    }
    let rows = sparse
        .into_iter()
        .map(|r| {
            let mut dense = vec![Rational::zero(); outputs.len()];
            for (j, p) in r {
                dense[j] += p;
            }
            dense
        })
        .collect();
    PolicyMatrix::new(inputs.to_vec(), outputs, rows)
}

/// An explicit policy matrix viewed as a mechanism.
#[derive(Clone, Debug)]
pub struct PolicyMechanism {
    pub policy: PolicyMatrix,
}

impl PolicyMechanism {
    pub fn new(policy: PolicyMatrix) -> Self {
        PolicyMechanism { policy }
    }
}

impl Mechanism for PolicyMechanism {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        let i = self
            .policy
            .input_index(input)
            .ok_or_else(|| Error::AlphabetMismatch(format!("policy has no row for {input}")))?;
        Ok(self
            .policy
            .row(i)
            .iter()
            .zip(self.policy.outputs())
            .filter(|(p, _)| !p.is_zero())
            .map(|(p, o)| (o.clone(), p.clone()))
            .collect())
    }

    fn is_deterministic(&self) -> bool {
        self.policy.is_deterministic()
    }

    fn name(&self) -> String {
        "policy".into()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityMechanism;

impl Mechanism for IdentityMechanism {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        Ok(vec![(input.clone(), Rational::one())])
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "identity".into()
    }
}

#[derive(Clone, Debug)]
pub struct ConstantMechanism {
    pub output: Label,
}

impl Mechanism for ConstantMechanism {
    fn row(&self, _input: &Label) -> Result<Vec<(Label, Rational)>> {
        Ok(vec![(self.output.clone(), Rational::one())])
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "constant".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::ratio;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| rng_for(7, 1).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(rng_for(7, 1).next_u64(), rng_for(7, 2).next_u64());
    }

    #[test]
    fn weighted_sampling_hits_support_only() {
        let w = vec![ratio(0, 1), ratio(1, 3), ratio(2, 3)];
        let mut rng = rng_for(1, 0);
        let mut hits = [0usize; 3];
        for _ in 0..3000 {
            hits[sample_weighted(&w, &mut rng).unwrap()] += 1;
        }
        assert_eq!(hits[0], 0);
        assert!(hits[2] > hits[1]);
    }

    #[test]
    fn materialize_trivial_mechanisms() {
        let ins = vec![Label::name("a"), Label::name("b")];
        let id = materialize(&IdentityMechanism, &ins).unwrap();
        assert_eq!(id, PolicyMatrix::identity(ins.clone()).unwrap());
        let c = materialize(&ConstantMechanism { output: Label::name("z") }, &ins).unwrap();
        assert_eq!(c.n_outputs(), 1);
        assert!(c.is_deterministic());
    }
}
