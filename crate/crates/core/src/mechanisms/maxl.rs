//! Greedy nearest-candidate release, tuned for the worst-case prior.
//!
//! Starting from A = ∅, repeatedly add the candidate that minimizes
//! max_θ min_{a∈A} TV(θ, a). Stop once no addition strictly lowers that cost or
//! every candidate is in A. Each input is released as its TV-nearest member of A.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanism::Mechanism;
use crate::param::{lcm_all, num_compositions, tv_distance, CategoricalParam};
use crate::prob::Rational;
use crate::space::ParameterSpace;

#[derive(Clone, Debug)]
pub struct MaxlMechanism {
    candidates: Vec<CategoricalParam>,
    /// Candidate indices in the order they were added.
    selected: Vec<usize>,
    worst_cost: Rational,
}

fn scaled_costs(rows: &[CategoricalParam], cols: &[CategoricalParam]) -> Result<(Vec<Vec<u128>>, BigInt)> {
    let tv: Vec<Vec<Rational>> =
        rows.iter().map(|x| cols.iter().map(|c| tv_distance(x, c).into_inner()).collect()).collect();
    let l = lcm_all(tv.iter().flatten().map(|r| r.denom()));
    let w = tv
        .iter()
        .map(|r| {
            r.iter()
                .map(|e| (e.numer() * (&l / e.denom())).to_u128())
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::InvalidArgument("cost denominators too large".into()))?;
    Ok((w, l))
}

/// Runs the greedy construction. Ties go to the lowest candidate index.
pub fn maxl_build(inputs: &[CategoricalParam], candidates: &[CategoricalParam]) -> Result<MaxlMechanism> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("MaxL needs at least one candidate".into()));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("MaxL needs at least one input".into()));
    }
    let (w, l) = scaled_costs(inputs, candidates)?;
    let mut cur: Vec<Option<u128>> = vec![None; inputs.len()];
    let mut in_a = vec![false; candidates.len()];
    let mut selected = Vec::new();
    let mut worst: Option<u128> = None;
    while selected.len() < candidates.len() {
        let mut best: Option<(u128, usize)> = None;
        for c in (0..candidates.len()).filter(|&c| !in_a[c]) {
            let v = (0..inputs.len())
                .map(|i| cur[i].map_or(w[i][c], |m| m.min(w[i][c])))
                .max()
                .unwrap();
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, c));
            }
        }
        let (v, c) = best.expect("a candidate remains");
        if worst.is_some_and(|cw| v >= cw) {
            break;
        }
        in_a[c] = true;
        selected.push(c);
        worst = Some(v);
        for i in 0..inputs.len() {
            cur[i] = Some(cur[i].map_or(w[i][c], |m| m.min(w[i][c])));
        }
    }
    let worst_cost = Rational::new(BigInt::from(worst.unwrap()), l);
    Ok(MaxlMechanism { candidates: candidates.to_vec(), selected, worst_cost })
}

impl MaxlMechanism {
    pub fn candidates(&self) -> &[CategoricalParam] {
        &self.candidates
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn selected_params(&self) -> Vec<CategoricalParam> {
        self.selected.iter().map(|&c| self.candidates[c].clone()).collect()
    }

    /// max_θ min_{a∈A} TV(θ, a) over the inputs the mechanism was built on.
    pub fn worst_cost(&self) -> &Rational {
        &self.worst_cost
    }

    /// f(θ): the nearest selected candidate, lowest candidate index on ties.
    pub fn map(&self, theta: &CategoricalParam) -> &CategoricalParam {
        let mut order = self.selected.clone();
        order.sort_unstable();
        let mut best: Option<(Rational, usize)> = None;
        for c in order {
            let d = tv_distance(theta, &self.candidates[c]).into_inner();
            if best.as_ref().is_none_or(|(b, _)| d < *b) {
                best = Some((d, c));
            }
        }
        &self.candidates[best.unwrap().1]
    }
}

impl Mechanism for MaxlMechanism {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        let theta = input
            .as_param()
            .ok_or_else(|| Error::AlphabetMismatch(format!("MaxL needs a parameter input, got {input}")))?;
        Ok(vec![(Label::Param(self.map(theta).clone()), Rational::from_integer(1.into()))])
    }

    fn sample(&self, input: &Label, _rng: &mut dyn RngCore) -> Result<Label> {
        Ok(self.row(input)?.remove(0).0)
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        format!("maxl(|A|={})", self.selected.len())
    }
}

/// One candidate per bin of I consecutive secret values (fraction of `category`):
/// a uniform parameter whose secret lies in the bin.
pub fn qm_style_candidates(
    space: &ParameterSpace,
    category: usize,
    interval: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<CategoricalParam>> {
    if interval == 0 {
        return Err(Error::InvalidArgument("interval must be positive".into()));
    }
    let (d, tau) = (space.dim(), space.tau());
    if category >= d {
        return Err(Error::InvalidArgument(format!("category {category} out of range")));
    }
    let s = tau as usize + 1;
    let mut out = Vec::new();
    for lo in (0..s).step_by(interval) {
        let hi = (lo + interval).min(s);
        // weight each count by how many parameters carry it
        let weights: Vec<Rational> = (lo..hi)
            .map(|t| Rational::from_integer(BigInt::from(num_compositions(d - 1, tau - t as u64))))
            .collect();
        if weights.iter().all(Zero::is_zero) {
            continue;
        }
        let t = (lo + crate::mechanism::sample_weighted(&weights, rng)?) as u64;
        let mut counts = vec![0; d];
        counts[category] = t;
        if d > 1 {
            let rest = ParameterSpace::numbered(d - 1, tau - t)?.sample_uniform(rng)?;
            let mut k = 0;
            for (i, c) in counts.iter_mut().enumerate() {
                if i != category {
                    *c = rest.count(k);
                    k += 1;
                }
            }
        }
        out.push(CategoricalParam::new(tau, counts)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::rng_for;
    use crate::prob::ratio;

    fn space(d: usize, tau: u64) -> Vec<CategoricalParam> {
        ParameterSpace::numbered(d, tau).unwrap().enumerate(1000).unwrap()
    }

    #[test]
    fn single_candidate_is_constant() {
        let ins = space(2, 3);
        let c = vec![CategoricalParam::new(3, vec![3, 0]).unwrap()];
        let m = maxl_build(&ins, &c).unwrap();
        assert_eq!(m.worst_cost(), &ratio(1, 1));
        for t in &ins {
            assert_eq!(m.map(t), &c[0]);
        }
    }

    #[test]
    fn full_candidates_reach_identity_when_each_step_helps() {
        let ins = space(2, 1);
        let m = maxl_build(&ins, &ins).unwrap();
        assert_eq!(m.worst_cost(), &Rational::zero());
        for t in &ins {
            assert_eq!(m.map(t), t);
        }
    }

    #[test]
    fn plateau_stops_the_greedy() {
        // After (1,1) is chosen the worst case is 1/2, and no single addition lowers it
        // because (0,2) and (2,0) both sit at distance 1/2.
        let ins = space(2, 2);
        let m = maxl_build(&ins, &ins).unwrap();
        assert_eq!(m.selected(), &[1]);
        assert_eq!(m.worst_cost(), &ratio(1, 2));
    }

    #[test]
    fn candidates_one_per_bin() {
        let sp = ParameterSpace::numbered(3, 6).unwrap();
        let c = qm_style_candidates(&sp, 0, 3, &mut rng_for(1, 0)).unwrap();
        assert_eq!(c.len(), 3);
        for (k, p) in c.iter().enumerate() {
            assert_eq!(p.count(0) as usize / 3, k);
        }
    }
}
