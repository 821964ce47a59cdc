//! Privacy and distortion bounds when the estimated support differs from the true one.
//!
//! Notation: m = d* − d̂*₀ missed feasible categories, d̂*₁ spurious ones. The lower
//! bounds are piecewise in m; the branch that fired is reported alongside the value.
//! Branch conditions and the exponents inside them use base-2 logarithms.

use num_traits::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanisms::qm::{median_rank, n_bins, QmFraction, QmSupport};
use crate::mechanisms::rr::{Boost, RrMechanism, RrSupport};
use crate::param::{binomial, num_compositions, CategoricalParam, DEFAULT_ENUM_CAP};
use crate::prob::{from_biguint, int, ln_rational, to_f64, LogBase, Rational};
use crate::secret::{build_partition, FractionOfCategory, SecretPartition};
use crate::space::ParameterSpace;
use crate::tradeoff::closed_form::{qm_distortion_closed, rr_distortion_raw, TabularScale};

#[derive(Clone, Debug)]
pub enum MechKind {
    Rr(Boost),
    Qm(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrivacyBounds {
    pub lo: f64,
    pub hi: f64,
    pub lo_branch: String,
    pub hi_branch: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MismatchBounds {
    pub privacy: PrivacyBounds,
    pub distortion: (Rational, Rational),
}

fn lg(x: f64) -> f64 {
    x.log2()
}

fn report(base: LogBase, raw: f64) -> f64 {
    if raw <= 1.0 {
        0.0
    } else {
        base.log_f64(raw)
    }
}

fn frac(r: &Rational) -> f64 {
    to_f64(r)
}

fn rr_privacy(sc: &TabularScale, b: &Rational, base: LogBase) -> PrivacyBounds {
    let (tau, d0, d1, ds, s) = (sc.tau, sc.d0 as u64, sc.d1 as u64, sc.d_star as u64, sc.s as f64);
    let m = sc.missed() as f64;
    let em1 = b - Rational::one();
    let a = from_biguint(&binomial(tau + d0 + d1 - 1, d0 + d1 - 1));
    let c = from_biguint(&binomial(tau + ds + d1 - 1, ds + d1 - 1));
    let t = tau as f64;
    let s_q = int(sc.s as u64);
    // s(e−1)/(A+e−1), C/(C+e−1) and friends, evaluated exactly then converted
    let s_over_a = frac(&(&s_q * &em1 / (&a + &em1)));
    let s_over_c = frac(&(&s_q * &em1 / (&c + &em1)));
    let c_keep = frac(&(&c / (&c + &em1)));
    let a_keep = frac(&(&a / (&a + &em1)));
    let u1 = s_over_a + c_keep * (1.0 + t / (t + (d0 + d1 - 1) as f64)).powf(m);
    let u2 = 1.0 + s - s * (((d0 + d1) as f64) / (t + (ds + d1 - 1) as f64)).powf(m) * c_keep;
    let (hi_raw, hi_branch) = if u1 <= u2 { (u1, "upper-1") } else { (u2, "upper-2") };
    let ls = lg(s);
    let (lo_raw, lo_branch) = if m <= ls {
        (s_over_c + a_keep * (1.0 + (t - m) / (t + (ds + d1 - 1) as f64)).powf(m), "m<=log s")
    } else if m < s {
        (s_over_c + a_keep * (1.0 + (t - ls) / (t + (ds + d1 - 1) as f64)).powf(ls), "log s<m<s")
    } else {
        let z = (sc.missed() / sc.s) as f64;
        (s - (s - 1.0) * (((d0 + d1) as f64 + z - 1.0) / (t + (d0 + d1) as f64)).powf(z), "m>=s")
    };
    PrivacyBounds {
        lo: report(base, lo_raw),
        hi: report(base, hi_raw),
        lo_branch: lo_branch.into(),
        hi_branch: hi_branch.into(),
    }
}

fn qm_privacy(sc: &TabularScale, interval: usize, base: LogBase) -> Result<PrivacyBounds> {
    let (t, d0, d1, ds, s) = (sc.tau as f64, sc.d0 as f64, sc.d1 as f64, sc.d_star as f64, sc.s as f64);
    let mi = sc.missed();
    let m = mi as f64;
    let i = interval as f64;
    let k = n_bins(sc.s, interval) as f64;
    let u1 = k * (1.0 + t / (t + d0 + d1 - 2.0)).powf(m);
    let u2 = k + s - s * ((d0 + d1 - 1.0) / (t + ds + d1 - 2.0)).powf(m);
    let (hi_raw, hi_branch) = if u1 <= u2 { (u1, "upper-1") } else { (u2, "upper-2") };
    let li = lg(i);
    let fl = (sc.s / interval) as f64;
    let pow = |e: f64| fl * (1.0 + (t * i - 2.0 * s * e) / (t * i + 2.0 * s * (ds + d1 - 2.0))).powf(e);
    let (lo_raw, lo_branch) = if m <= li {
        (pow(m), "m<=log I")
    } else if mi < interval {
        (pow(li), "log I<m<I")
    } else {
        // The derivation assumes every bin's representative leaves at least τI/(2s)
        // units outside the secret category; the last bin has the fewest.
        let last = median_rank(n_bins(sc.s, interval) - 1, interval, sc.s) as u64;
        let room = sc.tau + 1 - last;
        if 2 * sc.s as u64 * room < sc.tau * interval as u64 {
            return Err(Error::NotApplicable(format!(
                "QM lower bound for m >= I needs tau*(1 - g_(m_k)) >= tau*I/(2s) in every bin; \
                 the last bin leaves {room} < {}",
                (sc.tau * interval as u64) as f64 / (2.0 * s)
            )));
        }
        let z = (mi / interval) as f64;
        (s - (s - k) * ((d0 + d1 + z - 2.0) / (t * i / (2.0 * s) + d0 + d1 - 1.0)).powf(z), "m>=I")
    };
    Ok(PrivacyBounds {
        lo: report(base, lo_raw),
        hi: report(base, hi_raw),
        lo_branch: lo_branch.into(),
        hi_branch: hi_branch.into(),
    })
}

/// Bounds on SML and distortion under support mismatch.
pub fn mismatch_bounds(kind: &MechKind, scale: &TabularScale, base: LogBase) -> Result<MismatchBounds> {
    scale.validate()?;
    let (tau, lo_d, hi_d) = (scale.tau, scale.d0 + scale.d1, scale.d_star + scale.d1);
    match kind {
        MechKind::Rr(Boost::Infinite) => Err(Error::InvalidArgument("bounds need a finite epsilon".into())),
        MechKind::Rr(Boost::Finite(b)) => {
            let em1 = b - Rational::one();
            let r1 = &em1 / from_biguint(&num_compositions(lo_d, tau));
            let r2 = &em1 / from_biguint(&num_compositions(hi_d, tau));
            Ok(MismatchBounds {
                privacy: rr_privacy(scale, b, base),
                distortion: (rr_distortion_raw(lo_d, Some(&r1)), rr_distortion_raw(hi_d, Some(&r2))),
            })
        }
        MechKind::Qm(i) => {
            if *i == 0 {
                return Err(Error::InvalidArgument("interval must be positive".into()));
            }
            Ok(MismatchBounds {
                privacy: qm_privacy(scale, *i, base)?,
                distortion: (qm_distortion_closed(tau, lo_d, *i)?, qm_distortion_closed(tau, hi_d, *i)?),
            })
        }
    }
}

/// 1 + binom(τ+d̂−1, d̂−1)/s: the largest e^ε for which RR is log 3-robust.
pub fn rr_robust_boost_cap(tau: u64, d_hat: usize, s: usize) -> Rational {
    Rational::one() + from_biguint(&num_compositions(d_hat, tau)) / int(s as u64)
}

/// ε* = ln(1 + binom(τ+d̂−1, d̂−1)/s), in nats.
pub fn rr_robust_epsilon_cap(tau: u64, d_hat: usize, s: usize) -> f64 {
    ln_rational(&rr_robust_boost_cap(tau, d_hat, s))
}

/// α = (log s − log⌈s/I⌉)/log(1 + τ/(τ + d̂*₀)).
///
/// A rough guide to how many missed categories QM absorbs before its privacy starts
/// to degrade; meaningful only when d̂*₁ ≪ d̂*₀ and d* − d̂*₀ ≪ τ + d̂*₀.
pub fn qm_decay_threshold(s: usize, interval: usize, tau: u64, d0: usize) -> f64 {
    let k = s.div_ceil(interval.max(1)) as f64;
    let t = tau as f64;
    ((s as f64).ln() - k.ln()) / (1.0 + t / (t + d0 as f64)).ln()
}

/// A concrete mismatched instance for checking the bounds by enumeration.
///
/// Category layout: 0..d̂*₀ are feasible and estimated (0 carries the secret),
/// d̂*₀..d* are feasible but missed, d*..d*+d̂*₁ are estimated but infeasible.
/// Inputs are all parameters over the feasible categories.
#[derive(Clone, Debug)]
pub struct MismatchInstance {
    pub scale: TabularScale,
    pub categories: Vec<String>,
    pub estimated: Vec<usize>,
    pub inputs: Vec<CategoricalParam>,
    pub partition: SecretPartition,
}

impl MismatchInstance {
    pub fn new(scale: TabularScale, cap: u64) -> Result<Self> {
        scale.validate()?;
        if scale.s != scale.tau as usize + 1 {
            return Err(Error::InvalidArgument("mismatch instances use the fraction secret (s = tau+1)".into()));
        }
        let total = scale.d_star + scale.d1;
        let categories: Vec<String> = (0..total).map(|i| format!("c{i}")).collect();
        let feasible: Vec<usize> = (0..scale.d_star).collect();
        let estimated: Vec<usize> = (0..scale.d0).chain(scale.d_star..total).collect();
        let space = ParameterSpace::compositions_over(categories.clone(), scale.tau, feasible)?;
        let (inputs, partition) = build_partition(&space, &FractionOfCategory { category: 0 }, cap)?;
        Ok(MismatchInstance { scale, categories, estimated, inputs, partition })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.inputs.iter().cloned().map(Label::Param).collect()
    }

    pub fn rr(&self, boost: Boost) -> RrMechanism {
        RrMechanism {
            boost,
            support: RrSupport::EstimatedUnionInput {
                categories: self.categories.clone(),
                tau: self.scale.tau,
                estimated: self.estimated.clone(),
            },
            cap: DEFAULT_ENUM_CAP,
        }
    }

    pub fn qm(&self, interval: usize) -> Result<QmFraction> {
        let mut q = QmFraction::new(self.categories.clone(), self.scale.tau, 0, interval)?;
        q.support = QmSupport::EstimatedUnionInput(self.estimated.clone());
        Ok(q)
    }
}

/// SML raw sum of RR when the output space is exactly the true feasible set.
pub fn rr_true_support_raw(scale: &TabularScale, boost: &Rational) -> Rational {
    let n = from_biguint(&num_compositions(scale.d_star, scale.tau));
    let s = int(scale.s as u64);
    (&n + &s * (boost - Rational::one())) / (&n + boost - Rational::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::{sml_bruteforce, LeakageOptions};
    use crate::mechanism::materialize;
    use crate::prob::ratio;
    use crate::tradeoff::closed_form::{qm_privacy_closed, rr_privacy_closed};

    #[test]
    fn no_mismatch_rr_bounds_collapse() {
        let sc = TabularScale::fraction(4, 3, 0, 3);
        let b = Boost::new(int(5)).unwrap();
        let mb = mismatch_bounds(&MechKind::Rr(b.clone()), &sc, LogBase::Two).unwrap();
        let exact = rr_privacy_closed(&sc, &b, LogBase::Two);
        assert!((mb.privacy.lo - exact).abs() < 1e-12);
        assert!(mb.privacy.hi >= exact - 1e-12);
        assert_eq!(mb.distortion.0, mb.distortion.1);
    }

    #[test]
    fn no_mismatch_qm_bounds_bracket_closed_form() {
        let sc = TabularScale::fraction(8, 2, 0, 2);
        for i in 1..=9 {
            let mb = mismatch_bounds(&MechKind::Qm(i), &sc, LogBase::Two).unwrap();
            let exact = qm_privacy_closed(9, i, LogBase::Two);
            assert!(mb.privacy.lo <= exact + 1e-12 && exact <= mb.privacy.hi + 1e-12, "I={i}");
            assert!((mb.privacy.hi - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn rr_large_mismatch_branch() {
        let sc = TabularScale::fraction(3, 2, 1, 12);
        let b = Boost::new(int(2)).unwrap();
        let mb = mismatch_bounds(&MechKind::Rr(b), &sc, LogBase::Two).unwrap();
        assert_eq!(mb.privacy.lo_branch, "m>=s");
        let (s, z) = (4.0f64, 2.0f64);
        let want = (s - (s - 1.0) * ((2.0 + 1.0 + z - 1.0) / (3.0 + 3.0f64)).powf(z)).log2();
        assert!((mb.privacy.lo - want).abs() < 1e-12);
    }

    #[test]
    fn small_instance_brackets_bruteforce() {
        let sc = TabularScale::fraction(3, 2, 1, 3);
        let inst = MismatchInstance::new(sc, DEFAULT_ENUM_CAP).unwrap();
        let cap = rr_robust_boost_cap(3, sc.d_hat(), sc.s);
        let opts = LeakageOptions::default();
        let p = materialize(&inst.rr(Boost::new(cap.clone()).unwrap()), &inst.labels()).unwrap();
        let v = sml_bruteforce(&p, &inst.partition, &opts).unwrap().sml;
        let mb = mismatch_bounds(&MechKind::Rr(Boost::new(cap).unwrap()), &sc, LogBase::Two).unwrap();
        assert!(mb.privacy.lo <= v + 1e-12 && v <= mb.privacy.hi + 1e-12);
    }

    #[test]
    fn qm_guard_reports_condition() {
        let sc = TabularScale::fraction(3, 2, 0, 4);
        let e = mismatch_bounds(&MechKind::Qm(2), &sc, LogBase::Two).unwrap_err();
        assert_eq!(e.code(), "not_applicable");
        assert!(e.to_string().contains("tau*I/(2s)"));
    }

    #[test]
    fn robust_cap_examples() {
        assert!((rr_robust_epsilon_cap(1, 2, 2) - 2f64.ln()).abs() < 1e-12);
        assert!((rr_robust_epsilon_cap(10, 2, 11) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(rr_robust_boost_cap(10, 2, 11), int(2));
        let caps: Vec<f64> = (1..20).map(|t| rr_robust_epsilon_cap(t, 3, 5)).collect();
        assert!(caps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn decay_threshold_examples() {
        assert_eq!(qm_decay_threshold(17, 1, 100, 5), 0.0);
        let a = qm_decay_threshold(17, 17, 100, 5);
        assert!((a - 17f64.ln() / (1.0 + 100.0 / 105.0f64).ln()).abs() < 1e-12);
        let b = qm_decay_threshold(17, 4, 1000, 500);
        let want = (17f64.ln() - 5f64.ln()) / (1.0 + 1000.0 / 1500.0f64).ln();
        assert!((b - want).abs() < 1e-12);
    }

    #[test]
    fn true_support_raw_is_matched_closed_form() {
        let sc = TabularScale::fraction(2, 2, 0, 2);
        assert_eq!(rr_true_support_raw(&sc, &int(4)), ratio(3 + 3 * 3, 3 + 3));
    }
}
