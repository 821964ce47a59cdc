//! Matched-support closed forms for RR and QM and the mechanism comparison.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::rr::Boost;
use crate::param::num_compositions;
use crate::prob::{from_biguint, int, ratio, LogBase, Rational};

/// Sizes that drive every formula.
///
/// `d0` feasible estimated categories, `d1` spurious estimated categories, `d_star`
/// true feasible categories, `s` secret values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularScale {
    pub tau: u64,
    pub d0: usize,
    #[serde(default)]
    pub d1: usize,
    pub d_star: usize,
    pub s: usize,
}

impl TabularScale {
    /// Γ̂* = Γ*: no missed and no spurious categories.
    pub fn matched(tau: u64, d: usize, s: usize) -> Self {
        TabularScale { tau, d0: d, d1: 0, d_star: d, s }
    }

    /// Fraction-of-category secret: s = τ + 1.
    pub fn fraction(tau: u64, d0: usize, d1: usize, d_star: usize) -> Self {
        TabularScale { tau, d0, d1, d_star, s: tau as usize + 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 || self.d0 == 0 || self.s == 0 {
            return Err(Error::InvalidArgument("tau, d0 and s must be positive".into()));
        }
        if self.d0 > self.d_star {
            return Err(Error::InvalidArgument(format!("d0={} exceeds d*={}", self.d0, self.d_star)));
        }
        Ok(())
    }

    /// d* − d̂*₀, the number of missed feasible categories.
    pub fn missed(&self) -> usize {
        self.d_star - self.d0
    }

    pub fn d_hat(&self) -> usize {
        self.d0 + self.d1
    }

    pub fn is_matched(&self) -> bool {
        self.d1 == 0 && self.d_star == self.d0
    }
}

/// r = (e^ε − 1)/binom(τ+d−1, d−1); `None` for ε = ∞.
pub fn rr_r(tau: u64, d: usize, boost: &Boost) -> Option<Rational> {
    match boost {
        Boost::Infinite => None,
        Boost::Finite(b) => Some((b - Rational::one()) / from_biguint(&num_compositions(d, tau))),
    }
}

/// (1 + s·r)/(1 + r); s at r = ∞.
pub fn rr_privacy_raw(s: usize, r: Option<&Rational>) -> Rational {
    match r {
        None => int(s as u64),
        Some(r) => (Rational::one() + int(s as u64) * r) / (Rational::one() + r),
    }
}

pub fn rr_privacy_closed(scale: &TabularScale, boost: &Boost, base: LogBase) -> f64 {
    base.log(&rr_privacy_raw(scale.s, rr_r(scale.tau, scale.d0, boost).as_ref()))
}

/// (d − 1)/(d(1 + r)); zero at r = ∞ and at d = 1.
pub fn rr_distortion_raw(d: usize, r: Option<&Rational>) -> Rational {
    match r {
        None => Rational::zero(),
        Some(r) => ratio(d as u64 - 1, d as u64) / (Rational::one() + r),
    }
}

pub fn rr_distortion_closed(scale: &TabularScale, boost: &Boost) -> Rational {
    rr_distortion_raw(scale.d0, rr_r(scale.tau, scale.d0, boost).as_ref())
}

/// ⌈s/I⌉.
pub fn qm_privacy_raw(s: usize, interval: usize) -> u64 {
    s.div_ceil(interval.max(1)) as u64
}

pub fn qm_privacy_closed(s: usize, interval: usize, base: LogBase) -> f64 {
    base.log(&int(qm_privacy_raw(s, interval)))
}

/// ½ + (d⌊I/2⌋ − τ)/(2τ(d − 1)).
///
/// Agrees with exact enumeration when d = 2; for larger d it underestimates the
/// true worst-case distortion.
pub fn qm_distortion_closed(tau: u64, d: usize, interval: usize) -> Result<Rational> {
    if d < 2 {
        return Err(Error::InvalidArgument("the QM distortion formula needs d >= 2".into()));
    }
    if tau == 0 {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    let num = BigInt::from(d as u64 * (interval as u64 / 2)) - BigInt::from(tau);
    let den = BigInt::from(2 * tau * (d as u64 - 1));
    Ok(ratio(1, 2) + Rational::new(num, den))
}

/// Inverts (1 + s·r)/(1 + r) = c for r, valid for 1 ≤ c < s.
pub fn solve_r(s: usize, c: &Rational) -> Result<Rational> {
    let s = int(s as u64);
    if *c < Rational::one() || *c >= s {
        return Err(Error::InvalidArgument("privacy target must lie in [1, s)".into()));
    }
    Ok((c - Rational::one()) / (s - c))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub interval: usize,
    pub privacy: f64,
    pub delta_rr: Rational,
    pub delta_qm: Rational,
    /// Δ_RR/Δ_QM; `None` when Δ_QM = 0.
    pub ratio: Option<Rational>,
}

/// For every I whose QM privacy fits the budget, RR tuned to the same privacy.
pub fn mechanism_comparison(tau: u64, d0: usize, s: usize, budget: f64, base: LogBase) -> Result<Vec<ComparisonRow>> {
    if budget >= base.log(&int(s as u64)) {
        return Err(Error::InvalidArgument("budget at or above log s is trivial".into()));
    }
    let mut out = Vec::new();
    for i in 1..=s {
        let c = qm_privacy_raw(s, i);
        let privacy = base.log(&int(c));
        if privacy > budget + 1e-12 {
            continue;
        }
        let r = solve_r(s, &int(c))?;
        let delta_rr = rr_distortion_raw(d0, Some(&r));
        let delta_qm = qm_distortion_closed(tau, d0, i)?;
        let ratio = (!delta_qm.is_zero()).then(|| &delta_rr / &delta_qm);
        out.push(ComparisonRow { interval: i, privacy, delta_rr, delta_qm, ratio });
    }
    Ok(out)
}
