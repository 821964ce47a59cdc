//! Sequential (possibly adaptive) composition and post-processing.

use std::sync::Arc;

use num_traits::{One, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanism::{sample_weighted, Mechanism};
use crate::policy::PolicyMatrix;
use crate::prob::Rational;

type Selector = dyn Fn(&[Label]) -> Result<Arc<dyn Mechanism>> + Send + Sync;

/// One stage of a composition. Adaptive stages pick their mechanism from the
/// outputs released so far.
#[derive(Clone)]
pub enum Stage {
    Fixed(Arc<dyn Mechanism>),
    Adaptive(Arc<Selector>),
}

impl Stage {
    pub fn adaptive<F>(f: F) -> Self
    where
        F: Fn(&[Label]) -> Result<Arc<dyn Mechanism>> + Send + Sync + 'static,
    {
        Stage::Adaptive(Arc::new(f))
    }

    pub fn select(&self, history: &[Label]) -> Result<Arc<dyn Mechanism>> {
        match self {
            Stage::Fixed(m) => Ok(m.clone()),
            Stage::Adaptive(f) => f(history),
        }
    }
}

/// Releases the tuple of every stage output; the joint likelihood is the product
/// of the stage likelihoods given the history.
#[derive(Clone)]
pub struct Compose {
    stages: Vec<Stage>,
}

impl Compose {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidArgument("composition needs at least one stage".into()));
        }
        Ok(Compose { stages })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }
}

impl Mechanism for Compose {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        let mut partial: Vec<(Vec<Label>, Rational)> = vec![(Vec::new(), Rational::one())];
        for st in &self.stages {
            let mut next = Vec::new();
            for (hist, p) in partial {
                let m = st.select(&hist)?;
                for (o, q) in m.row(input)? {
                    if q.is_zero() {
                        continue;
                    }
                    let mut h = hist.clone();
                    h.push(o);
                    next.push((h, &p * &q));
                }
            }
            partial = next;
        }
        Ok(partial.into_iter().map(|(h, p)| (Label::Tuple(h), p)).collect())
    }

    fn likelihood(&self, input: &Label, output: &Label) -> Result<Rational> {
        let parts = match output {
            Label::Tuple(v) if v.len() == self.stages.len() => v,
            _ => return Ok(Rational::zero()),
        };
        let mut p = Rational::one();
        for (k, st) in self.stages.iter().enumerate() {
            p *= st.select(&parts[..k])?.likelihood(input, &parts[k])?;
            if p.is_zero() {
                break;
            }
        }
        Ok(p)
    }

    fn sample(&self, input: &Label, rng: &mut dyn RngCore) -> Result<Label> {
        let mut hist = Vec::with_capacity(self.stages.len());
        for st in &self.stages {
            let o = st.select(&hist)?.sample(input, rng)?;
            hist.push(o);
        }
        Ok(Label::Tuple(hist))
    }

    fn is_deterministic(&self) -> bool {
        self.stages.iter().all(|s| matches!(s, Stage::Fixed(m) if m.is_deterministic()))
    }

    fn name(&self) -> String {
        format!("compose({} stages)", self.stages.len())
    }
}

/// θ″ ~ K(·|θ′) applied to the inner mechanism's output θ′.
#[derive(Clone)]
pub struct PostProcess {
    inner: Arc<dyn Mechanism>,
    kernel: PolicyMatrix,
}

impl PostProcess {
    pub fn new(inner: Arc<dyn Mechanism>, kernel: PolicyMatrix) -> Self {
        PostProcess { inner, kernel }
    }

    fn kernel_row(&self, o: &Label) -> Result<usize> {
        self.kernel
            .input_index(o)
            .ok_or_else(|| Error::AlphabetMismatch(format!("kernel has no row for {o}")))
    }
}

impl Mechanism for PostProcess {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        let mut acc = vec![Rational::zero(); self.kernel.n_outputs()];
        for (o, p) in self.inner.row(input)? {
            let i = self.kernel_row(&o)?;
            for (k, q) in self.kernel.row(i).iter().enumerate() {
                if !q.is_zero() {
                    acc[k] += &p * q;
                }
            }
        }
        Ok(acc
            .into_iter()
            .zip(self.kernel.outputs())
            .filter(|(p, _)| !p.is_zero())
            .map(|(p, o)| (o.clone(), p))
            .collect())
    }

    fn sample(&self, input: &Label, rng: &mut dyn RngCore) -> Result<Label> {
        let o = self.inner.sample(input, rng)?;
        let i = self.kernel_row(&o)?;
        let k = sample_weighted(self.kernel.row(i), rng)?;
        Ok(self.kernel.outputs()[k].clone())
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic() && self.kernel.is_deterministic()
    }

    fn name(&self) -> String {
        format!("postprocess({})", self.inner.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{materialize, rng_for, ConstantMechanism, IdentityMechanism, PolicyMechanism};
    use crate::prob::ratio;

    fn names(p: &str, n: usize) -> Vec<Label> {
        (0..n).map(|i| Label::name(format!("{p}{i}"))).collect()
    }

    fn coin() -> PolicyMatrix {
        PolicyMatrix::new(
            names("t", 2),
            names("o", 2),
            vec![vec![ratio(3, 4), ratio(1, 4)], vec![ratio(1, 3), ratio(2, 3)]],
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel_leaves_rows_alone() {
        let p = coin();
        let pp = PostProcess::new(Arc::new(PolicyMechanism::new(p.clone())), PolicyMatrix::identity(names("o", 2)).unwrap());
        assert_eq!(materialize(&pp, p.inputs()).unwrap(), p);
    }

    #[test]
    fn compose_with_constant_keeps_rows() {
        let p = coin();
        let c = Compose::new(vec![
            Stage::Fixed(Arc::new(PolicyMechanism::new(p.clone()))),
            Stage::Fixed(Arc::new(ConstantMechanism { output: Label::name("z") })),
        ])
        .unwrap();
        let j = materialize(&c, p.inputs()).unwrap();
        assert_eq!(j.rows(), p.rows());
    }

    #[test]
    fn adaptive_stage_sees_history() {
        let p = coin();
        let c = Compose::new(vec![
            Stage::Fixed(Arc::new(PolicyMechanism::new(p.clone()))),
            Stage::adaptive(|h: &[Label]| -> Result<Arc<dyn Mechanism>> {
                Ok(if h[0] == Label::name("o0") {
                    Arc::new(IdentityMechanism)
                } else {
                    Arc::new(ConstantMechanism { output: Label::name("z") })
                })
            }),
        ])
        .unwrap();
        let x = Label::name("t1");
        let row = c.row(&x).unwrap();
        assert_eq!(row.len(), 2);
        let first = Label::Tuple(vec![Label::name("o0"), x.clone()]);
        assert_eq!(c.likelihood(&x, &first).unwrap(), ratio(1, 3));
        let y = c.sample(&x, &mut rng_for(0, 0)).unwrap();
        assert!(row.iter().any(|(o, _)| *o == y));
    }

    #[test]
    fn kernel_must_cover_outputs() {
        let pp = PostProcess::new(Arc::new(PolicyMechanism::new(coin())), PolicyMatrix::identity(names("o", 1)).unwrap());
        assert_eq!(pp.row(&Label::name("t0")).unwrap_err().code(), "alphabet_mismatch");
    }
}
