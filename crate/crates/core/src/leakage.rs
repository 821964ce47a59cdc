//! Statistic maximal leakage and companion measures.
//!
//! For a policy P and secret classes Θ_g, the leakage is
//! log max over prior assignments (θ_g ∈ Θ_g for each g) of Σ_θ′ max_g P(θ′|θ_g).
//! `raw_sum` is the exact maximum before the log.

use std::ops::Add;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::flow::{build_sml_network, min_cost_flow};
use crate::param::{lcm_all, DEFAULT_ENUM_CAP};
use crate::policy::PolicyMatrix;
use crate::prob::{fmt_rational, int, ln_rational, LogBase, Rational};
use crate::secret::{PriorAssignment, SecretPartition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    BruteForce,
    Flow,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BruteForce => "bruteforce",
            Method::Flow => "flow",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LeakageOptions {
    pub base: LogBase,
    /// Largest number of prior assignments brute force will visit.
    pub cap: u64,
    /// Worker threads for brute force; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for LeakageOptions {
    fn default() -> Self {
        LeakageOptions { base: LogBase::Two, cap: DEFAULT_ENUM_CAP, jobs: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeakageReport {
    pub sml: f64,
    pub base: LogBase,
    pub raw_sum: Rational,
    pub argmax_prior: PriorAssignment,
    pub method: Method,
}

impl LeakageReport {
    pub fn to_json(&self, policy: &PolicyMatrix, partition: &SecretPartition) -> serde_json::Value {
        let prior: serde_json::Map<String, serde_json::Value> = partition
            .secrets()
            .iter()
            .zip(&self.argmax_prior.choice)
            .map(|(g, &i)| (g.id.clone(), serde_json::to_value(&policy.inputs()[i]).unwrap()))
            .collect();
        json!({
            "sml": self.sml,
            "log_base": self.base.name(),
            "raw_sum": fmt_rational(&self.raw_sum),
            "argmax_prior": prior,
            "method": self.method.name(),
        })
    }
}

fn check_shapes(policy: &PolicyMatrix, partition: &SecretPartition) -> Result<()> {
    if partition.n_inputs() != policy.n_inputs() {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} inputs, policy has {}",
            partition.n_inputs(),
            policy.n_inputs()
        )));
    }
    Ok(())
}

/// Σ_θ′ max_g P(θ′|θ_g) for one prior assignment, exact.
pub fn raw_for_assignment(policy: &PolicyMatrix, choice: &[usize]) -> Rational {
    (0..policy.n_outputs())
        .map(|j| choice.iter().map(|&i| policy.entry(i, j)).max().cloned().unwrap_or_else(Rational::zero))
        .sum()
}

fn assignments(partition: &SecretPartition) -> BigUint {
    partition.classes().iter().map(|c| BigUint::from(c.len())).product()
}

// Brute-force search over integer-scaled entries. `w[i][j]` = P(j|i)·L.
fn search<T>(w: &[Vec<T>], classes: &[Vec<usize>], total: u64, jobs: Option<usize>) -> (T, u64)
where
    T: Clone + Ord + Zero + Add<Output = T> + Send + Sync,
{
    let m = w.first().map_or(0, Vec::len);
    let radix: Vec<u64> = classes.iter().map(|c| c.len() as u64).collect();
    let chunk = (total / 256).clamp(1, 1 << 16);
    let n_chunks = total.div_ceil(chunk);
    let eval = |digits: &[u64]| -> T {
        let mut acc = T::zero();
        #[allow(clippy::needless_range_loop)]
        for j in 0..m {
            let mut best = &w[classes[0][digits[0] as usize]][j];
            for (k, &dg) in digits.iter().enumerate().skip(1) {
                let v = &w[classes[k][dg as usize]][j];
                if v > best {
                    best = v;
                }
            }
            acc = acc + best.clone();
        }
        acc
    };
    let work = |c: u64| -> (T, u64) {
        let start = c * chunk;
        let end = (start + chunk).min(total);
        // mixed-radix digits, first class most significant
        let mut digits = vec![0u64; radix.len()];
        let mut rem = start;
        for k in (0..radix.len()).rev() {
            digits[k] = rem % radix[k];
            rem /= radix[k];
        }
        let mut best = (eval(&digits), start);
        for idx in start + 1..end {
            for k in (0..radix.len()).rev() {
                digits[k] += 1;
                if digits[k] < radix[k] {
                    break;
                }
                digits[k] = 0;
            }
            let v = eval(&digits);
            if v > best.0 {
                best = (v, idx);
            }
        }
        best
    };
    let merge = |a: (T, u64), b: (T, u64)| -> (T, u64) {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let run = || {
        (0..n_chunks)
            .into_par_iter()
            .map(work)
            .reduce_with(merge)
            .expect("at least one assignment")
    };
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run()),
        None => run(),
    }
}

fn decode(mut idx: u64, classes: &[Vec<usize>]) -> Vec<usize> {
    let mut choice = vec![0; classes.len()];
    for k in (0..classes.len()).rev() {
        let r = classes[k].len() as u64;
        choice[k] = classes[k][(idx % r) as usize];
        idx /= r;
    }
    choice
}

/// Exhaustive maximum over prior assignments. Ties go to the lowest assignment index.
pub fn sml_bruteforce(policy: &PolicyMatrix, partition: &SecretPartition, opts: &LeakageOptions) -> Result<LeakageReport> {
    check_shapes(policy, partition)?;
    if partition.s() == 0 {
        return Err(Error::InvalidArgument("no secret classes".into()));
    }
    let n = assignments(partition);
    let total = match n.to_u64() {
        Some(t) if t <= opts.cap => t,
        _ => {
            let hint = if policy.is_deterministic() {
                "use the flow method for deterministic policies"
            } else {
                "reduce the instance"
            };
            return Err(Error::CapExceeded { what: format!("prior assignments ({hint})"), needed: n.to_string(), cap: opts.cap });
        }
    };
    let l = lcm_all(policy.rows().iter().flatten().map(|e| e.denom()));
    let scaled: Vec<Vec<BigInt>> =
        policy.rows().iter().map(|r| r.iter().map(|e| e.numer() * (&l / e.denom())).collect()).collect();
    let classes = partition.classes();
    let fits = l.bits() + (policy.n_outputs().max(1) as u64).ilog2() as u64 + 2 < 127;
    let (best_num, idx) = if fits {
        let w: Vec<Vec<u128>> = scaled.iter().map(|r| r.iter().map(|e| e.to_u128().unwrap()).collect()).collect();
        let (v, i) = search(&w, classes, total, opts.jobs);
        (BigInt::from(v), i)
    } else {
        let w: Vec<Vec<BigUint>> = scaled.iter().map(|r| r.iter().map(|e| e.magnitude().clone()).collect()).collect();
        let (v, i) = search(&w, classes, total, opts.jobs);
        (BigInt::from(v), i)
    };
    let raw_sum = Rational::new(best_num, l);
    Ok(LeakageReport {
        sml: opts.base.log(&raw_sum),
        base: opts.base,
        raw_sum,
        argmax_prior: PriorAssignment { choice: decode(idx, classes) },
        method: Method::BruteForce,
    })
}

/// Min-cost-flow evaluation for deterministic policies.
pub fn sml_deterministic(policy: &PolicyMatrix, partition: &SecretPartition, opts: &LeakageOptions) -> Result<LeakageReport> {
    check_shapes(policy, partition)?;
    let sn = build_sml_network(policy, partition)?;
    let res = min_cost_flow(&sn.net)?;
    let raw_sum = -res.total_cost.clone();
    let mut choice: Vec<usize> = partition.classes().iter().map(|c| c[0]).collect();
    for (a, &(k, i)) in sn.member_arcs.iter().enumerate() {
        if res.flow[sn.member_arc_base() + a] > 0 {
            choice[k] = i;
        }
    }
    debug_assert_eq!(raw_for_assignment(policy, &choice), raw_sum);
    Ok(LeakageReport {
        sml: opts.base.log(&raw_sum),
        base: opts.base,
        raw_sum,
        argmax_prior: PriorAssignment { choice },
        method: Method::Flow,
    })
}

/// Flow for deterministic policies, brute force otherwise.
pub fn sml(policy: &PolicyMatrix, partition: &SecretPartition, opts: &LeakageOptions) -> Result<LeakageReport> {
    if policy.is_deterministic() {
        sml_deterministic(policy, partition, opts)
    } else {
        sml_bruteforce(policy, partition, opts)
    }
}

/// Σ_θ′ max_θ P(θ′|θ), the quantity inside the min-entropy leakage.
pub fn min_entropy_raw(policy: &PolicyMatrix) -> Rational {
    let all: Vec<usize> = (0..policy.n_inputs()).collect();
    (0..policy.n_outputs())
        .map(|j| all.iter().map(|&i| policy.entry(i, j)).max().cloned().unwrap_or_else(Rational::zero))
        .sum()
}

/// Min-entropy leakage, which also equals maximal leakage under the worst prior.
pub fn min_entropy_leakage(policy: &PolicyMatrix, base: LogBase) -> f64 {
    base.log(&min_entropy_raw(policy))
}

/// Exact raw-form sandwich: max(1, MEL/max|Θ_g|) ≤ raw_sum ≤ min(MEL, s).
pub fn sandwich_raw(policy: &PolicyMatrix, partition: &SecretPartition) -> (Rational, Rational) {
    let mel = min_entropy_raw(policy);
    let lower = (&mel / int(partition.max_class_size().max(1) as u64)).max(Rational::one());
    let upper = mel.min(int(partition.s() as u64));
    (lower, upper)
}

/// Log-domain sandwich bounds (lower, upper).
pub fn sandwich_bounds(policy: &PolicyMatrix, partition: &SecretPartition, base: LogBase) -> (f64, f64) {
    let (lo, hi) = sandwich_raw(policy, partition);
    (base.log(&lo), base.log(&hi))
}

/// The smallest e^μ such that the mechanism is μ-LDP across secret classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LdpRatio {
    Finite(Rational),
    Infinite,
}

impl LdpRatio {
    pub fn mu_nats(&self) -> f64 {
        match self {
            LdpRatio::Finite(r) => ln_rational(r),
            LdpRatio::Infinite => f64::INFINITY,
        }
    }

    pub fn mu(&self, base: LogBase) -> f64 {
        base.from_nats(self.mu_nats())
    }
}

/// max over θ₁, θ₂ in different classes and outputs θ′ of P(θ′|θ₁)/P(θ′|θ₂).
pub fn ldp_parameter(policy: &PolicyMatrix, partition: &SecretPartition) -> Result<LdpRatio> {
    check_shapes(policy, partition)?;
    let s = partition.s();
    let mut best = Rational::one();
    for j in 0..policy.n_outputs() {
        let stats: Vec<(Rational, Rational)> = partition
            .classes()
            .iter()
            .map(|c| {
                let it = c.iter().map(|&i| policy.entry(i, j));
                let mx = it.clone().max().unwrap().clone();
                let mn = it.min().unwrap().clone();
                (mx, mn)
            })
            .collect();
        for a in 0..s {
            if stats[a].0.is_zero() {
                continue;
            }
            for b in 0..s {
                if a == b {
                    continue;
                }
                if stats[b].1.is_zero() {
                    return Ok(LdpRatio::Infinite);
                }
                let r = &stats[a].0 / &stats[b].1;
                if r > best {
                    best = r;
                }
            }
        }
    }
    Ok(LdpRatio::Finite(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;
    use crate::prob::ratio;

    fn names(p: &str, n: usize) -> Vec<Label> {
        (0..n).map(|i| Label::name(format!("{p}{i}"))).collect()
    }

    fn three_by_two() -> (PolicyMatrix, SecretPartition) {
        let p = PolicyMatrix::new(
            names("t", 3),
            names("o", 2),
            vec![
                vec![ratio(9, 10), ratio(1, 10)],
                vec![ratio(2, 10), ratio(8, 10)],
                vec![ratio(5, 10), ratio(5, 10)],
            ],
        )
        .unwrap();
        (p, SecretPartition::from_assignment(vec![0, 0, 1]).unwrap())
    }

    #[test]
    fn stochastic_example() {
        let (p, part) = three_by_two();
        let r = sml_bruteforce(&p, &part, &LeakageOptions::default()).unwrap();
        assert_eq!(r.raw_sum, ratio(14, 10));
        assert_eq!(r.argmax_prior.choice, vec![0, 2]);
        assert!((r.sml - 1.4f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn constant_and_identity() {
        let ins = names("t", 4);
        let c = PolicyMatrix::constant(ins.clone(), Label::name("o")).unwrap();
        let part = SecretPartition::from_assignment(vec![0, 1, 2, 3]).unwrap();
        let opts = LeakageOptions::default();
        assert_eq!(sml_bruteforce(&c, &part, &opts).unwrap().sml, 0.0);
        let id = PolicyMatrix::identity(ins).unwrap();
        let r = sml_bruteforce(&id, &part, &opts).unwrap();
        assert_eq!(r.raw_sum, int(4));
        assert!((r.sml - 2.0).abs() < 1e-12);
        assert_eq!(sandwich_bounds(&id, &part, LogBase::Two), (2.0, 2.0));
        assert_eq!(sandwich_bounds(&c, &part, LogBase::Two), (0.0, 0.0));
    }

    #[test]
    fn deterministic_example_via_flow() {
        let p = PolicyMatrix::from_map(names("t", 3), names("o", 2), &[0, 1, 1]).unwrap();
        let part = SecretPartition::from_assignment(vec![0, 0, 1]).unwrap();
        let opts = LeakageOptions::default();
        let f = sml_deterministic(&p, &part, &opts).unwrap();
        assert_eq!(f.raw_sum, int(2));
        assert!((f.sml - 1.0).abs() < 1e-12);
        assert_eq!(f.raw_sum, sml_bruteforce(&p, &part, &opts).unwrap().raw_sum);
        let all_one = PolicyMatrix::from_map(names("t", 3), names("o", 2), &[1, 1, 1]).unwrap();
        assert_eq!(sml_deterministic(&all_one, &part, &opts).unwrap().sml, 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let (p, part) = three_by_two();
        let opts = LeakageOptions { cap: 1, ..Default::default() };
        assert_eq!(sml_bruteforce(&p, &part, &opts).unwrap_err().code(), "cap_exceeded");
    }

    #[test]
    fn parallel_result_matches_single_thread() {
        let n = 12;
        let rows: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                let a = (i * 7 % 11 + 1) as u64;
                vec![ratio(a, 12), ratio(12 - a, 12)]
            })
            .collect();
        let p = PolicyMatrix::new(names("t", n), names("o", 2), rows).unwrap();
        let part = SecretPartition::from_assignment((0..n).map(|i| i % 4).collect()).unwrap();
        let one = sml_bruteforce(&p, &part, &LeakageOptions { jobs: Some(1), ..Default::default() }).unwrap();
        let many = sml_bruteforce(&p, &part, &LeakageOptions { jobs: Some(4), ..Default::default() }).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn ldp_examples() {
        let ins = names("t", 3);
        let part = SecretPartition::from_assignment(vec![0, 0, 1]).unwrap();
        let c = PolicyMatrix::constant(ins.clone(), Label::name("o")).unwrap();
        assert_eq!(ldp_parameter(&c, &part).unwrap(), LdpRatio::Finite(int(1)));
        let d = PolicyMatrix::from_map(ins, names("o", 2), &[0, 1, 1]).unwrap();
        assert_eq!(ldp_parameter(&d, &part).unwrap(), LdpRatio::Infinite);
        let (p, part) = three_by_two();
        // worst ratio: 9/10 over 5/10 or 8/10 over 5/10 or 5/10 over 1/10
        assert_eq!(ldp_parameter(&p, &part).unwrap(), LdpRatio::Finite(int(5)));
    }

    #[test]
    fn mel_of_identity() {
        let id = PolicyMatrix::identity(names("t", 5)).unwrap();
        assert!((min_entropy_leakage(&id, LogBase::Two) - 5f64.log2()).abs() < 1e-12);
    }
}
