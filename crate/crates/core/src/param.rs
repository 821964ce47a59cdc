//! Categorical parameters on the 1/τ grid, their enumeration and ranking.
//!
//! Compositions of τ into d parts are listed in lexicographic order of the
//! count vector, so for d=2, τ=2 the order is (0,2), (1,1), (2,0).

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Prob, Rational};

pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

/// θ: integer counts per category, summing to the precision τ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawParam")]
pub struct CategoricalParam {
    tau: u64,
    counts: Vec<u64>,
}

#[derive(Deserialize)]
struct RawParam {
    tau: u64,
    counts: Vec<u64>,
}

impl TryFrom<RawParam> for CategoricalParam {
    type Error = Error;
    fn try_from(r: RawParam) -> Result<Self> {
        CategoricalParam::new(r.tau, r.counts)
    }
}

impl CategoricalParam {
    pub fn new(tau: u64, counts: Vec<u64>) -> Result<Self> {
        let sum: u64 = counts.iter().sum();
        if sum != tau {
            return Err(Error::InvalidArgument(format!(
                "counts {counts:?} sum to {sum}, expected tau={tau}"
            )));
        }
        Ok(CategoricalParam { tau, counts })
    }

    /// Counts that sum to τ by construction.
    pub(crate) fn from_counts_unchecked(tau: u64, counts: Vec<u64>) -> Self {
        debug_assert_eq!(counts.iter().sum::<u64>(), tau);
        CategoricalParam { tau, counts }
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Count of category i, zero past the end.
    pub fn count(&self, i: usize) -> u64 {
        self.counts.get(i).copied().unwrap_or(0)
    }

    pub fn mass(&self, i: usize) -> Rational {
        Rational::new(BigInt::from(self.count(i)), BigInt::from(self.tau.max(1)))
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&i| self.counts[i] > 0).collect()
    }
}

impl fmt::Display for CategoricalParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")/{}", self.tau)
    }
}

/// Total variation distance, exact. Shorter count vectors are padded with zeros.
pub fn tv_distance(p: &CategoricalParam, q: &CategoricalParam) -> Prob {
    let d = p.dim().max(q.dim());
    if p.tau == q.tau {
        let l1: u64 = (0..d).map(|i| p.count(i).abs_diff(q.count(i))).sum();
        return Prob::new(Rational::new(BigInt::from(l1), BigInt::from(2 * p.tau.max(1))))
            .expect("tv is a probability");
    }
    let (tp, tq) = (p.tau.max(1) as u128, q.tau.max(1) as u128);
    let l1: u128 = (0..d)
        .map(|i| (p.count(i) as u128 * tq).abs_diff(q.count(i) as u128 * tp))
        .sum();
    Prob::new(Rational::new(BigInt::from(l1), BigInt::from(2 * tp * tq))).expect("tv is a probability")
}

/// TV numerator over 2τ for two parameters sharing τ.
pub fn l1_counts(p: &CategoricalParam, q: &CategoricalParam) -> u64 {
    let d = p.dim().max(q.dim());
    (0..d).map(|i| p.count(i).abs_diff(q.count(i))).sum()
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    num_integer::binomial(BigUint::from(n), BigUint::from(k.min(n - k)))
}

/// binom(τ+d−1, d−1): the number of compositions of τ into d non-negative parts.
pub fn num_compositions(d: usize, tau: u64) -> BigUint {
    if d == 0 {
        return if tau == 0 { BigUint::one() } else { BigUint::zero() };
    }
    binomial(tau + d as u64 - 1, d as u64 - 1)
}

pub(crate) fn check_cap(what: &str, needed: &BigUint, cap: u64) -> Result<u64> {
    match needed.to_u64() {
        Some(n) if n <= cap => Ok(n),
        _ => Err(Error::CapExceeded { what: what.to_string(), needed: needed.to_string(), cap }),
    }
}

/// All compositions of τ into d parts, in lexicographic order.
pub fn enumerate_params(d: usize, tau: u64, cap: u64) -> Result<Vec<CategoricalParam>> {
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one category".into()));
    }
    let n = check_cap("parameter space", &num_compositions(d, tau), cap)?;
    let mut out = Vec::with_capacity(n as usize);
    let mut cur = vec![0u64; d];
    fill(&mut cur, 0, tau, tau, &mut out);
    Ok(out)
}

fn fill(cur: &mut Vec<u64>, i: usize, rem: u64, tau: u64, out: &mut Vec<CategoricalParam>) {
    if i + 1 == cur.len() {
        cur[i] = rem;
        out.push(CategoricalParam::from_counts_unchecked(tau, cur.clone()));
        return;
    }
    for v in 0..=rem {
        cur[i] = v;
        fill(cur, i + 1, rem - v, tau, out);
    }
}

// Compositions that place fewer than `c` units at a position with `k` later parts and `rem` units left.
fn before(rem: u64, c: u64, k: u64) -> BigUint {
    binomial(rem + k, k) - binomial(rem - c + k, k)
}

/// Position of θ in `enumerate_params(θ.dim(), θ.tau())`.
pub fn rank_param(theta: &CategoricalParam) -> BigUint {
    let d = theta.dim();
    let mut rem = theta.tau;
    let mut idx = BigUint::zero();
    for i in 0..d.saturating_sub(1) {
        let c = theta.counts[i];
        idx += before(rem, c, (d - i - 1) as u64);
        rem -= c;
    }
    idx
}

/// Inverse of `rank_param`.
pub fn unrank_param(index: &BigUint, d: usize, tau: u64) -> Result<CategoricalParam> {
    let size = num_compositions(d, tau);
    if d == 0 || *index >= size {
        return Err(Error::IndexOutOfRange { index: index.to_string(), size: size.to_string() });
    }
    let mut idx = index.clone();
    let mut rem = tau;
    let mut counts = Vec::with_capacity(d);
    for i in 0..d - 1 {
        let k = (d - i - 1) as u64;
        // largest c with before(rem, c, k) <= idx
        let (mut lo, mut hi) = (0u64, rem);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if before(rem, mid, k) <= idx {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        idx -= before(rem, lo, k);
        counts.push(lo);
        rem -= lo;
    }
    counts.push(rem);
    Ok(CategoricalParam::from_counts_unchecked(tau, counts))
}

pub fn lcm_all<'a>(xs: impl IntoIterator<Item = &'a BigInt>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x))
}
