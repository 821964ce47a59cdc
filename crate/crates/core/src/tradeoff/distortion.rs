//! Worst-case expected total variation between input and released parameters.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanism::{rng_for, Mechanism};
use crate::param::{tv_distance, CategoricalParam};
use crate::policy::PolicyMatrix;
use crate::prob::Rational;

fn param_of(l: &Label) -> Result<&CategoricalParam> {
    l.as_param()
        .ok_or_else(|| Error::AlphabetMismatch(format!("distortion needs parameter labels, got {l}")))
}

/// max_θ Σ_θ′ P(θ′|θ)·TV(θ, θ′), with the first maximizing input index.
pub fn distortion_exact(policy: &PolicyMatrix) -> Result<(Rational, usize)> {
    let outs = policy.outputs().iter().map(param_of).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(Rational, usize)> = None;
    for (i, x) in policy.inputs().iter().enumerate() {
        let x = param_of(x)?;
        let mut e = Rational::zero();
        for (j, p) in policy.row(i).iter().enumerate() {
            if !p.is_zero() {
                e += p * tv_distance(x, outs[j]).value();
            }
        }
        if best.as_ref().is_none_or(|(b, _)| e > *b) {
            best = Some((e, i));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("policy has no inputs".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Index of the candidate with the largest sample mean.
    pub argmax: usize,
}

/// Sample-mean distortion at each candidate input; reports the largest.
pub fn distortion_mc(
    mech: &dyn Mechanism,
    candidates: &[CategoricalParam],
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate inputs".into()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let mut best: Option<McEstimate> = None;
    for (k, c) in candidates.iter().enumerate() {
        let mut rng = rng_for(seed, k as u64);
        let x = Label::Param(c.clone());
        let (mut sum, mut sq) = (0.0f64, 0.0f64);
        for _ in 0..n_samples {
            let y = mech.sample(&x, &mut rng)?;
            let v = tv_distance(c, param_of(&y)?).to_f64();
            sum += v;
            sq += v * v;
        }
        let n = n_samples as f64;
        let mean = sum / n;
        let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
        if best.as_ref().is_none_or(|b| mean > b.estimate) {
            best = Some(McEstimate { estimate: mean, stderr: (var / n).sqrt(), argmax: k });
        }
    }
    Ok(best.unwrap())
}
