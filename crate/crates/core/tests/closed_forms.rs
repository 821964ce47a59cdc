mod common;

use common::*;
use num_bigint::BigInt;
use num_traits::Zero;
use statleak::leakage::{sml_bruteforce, sml_deterministic, LeakageOptions};
use statleak::mechanism::{materialize, rng_for};
use statleak::mechanisms::maxl::{maxl_build, qm_style_candidates};
use statleak::mechanisms::qm::QmFraction;
use statleak::mechanisms::rr::{Boost, RrMechanism};
use statleak::param::{tv_distance, CategoricalParam};
use statleak::prob::{int, Rational};
use statleak::secret::{build_partition, FractionOfCategory};
use statleak::space::ParameterSpace;
use statleak::tradeoff::closed_form::{
    qm_distortion_closed, qm_privacy_raw, rr_distortion_closed, rr_privacy_raw, rr_r, TabularScale,
};
use statleak::tradeoff::distortion::distortion_exact;

fn setup(d: usize, tau: u64) -> (ParameterSpace, Vec<CategoricalParam>, statleak::SecretPartition) {
    let sp = ParameterSpace::numbered(d, tau).unwrap();
    let (m, p) = build_partition(&sp, &FractionOfCategory { category: 0 }, 100_000).unwrap();
    (sp, m, p)
}

#[test]
fn rr_matches_enumeration() {
    for d in 2..=3 {
        for tau in 1..=5u64 {
            let (sp, ins, part) = setup(d, tau);
            for b in [1u64, 2, 5, 12] {
                let boost = Boost::new(int(b)).unwrap();
                let pol = materialize(&RrMechanism::new(boost.clone(), sp.clone()), &param_labels(&ins)).unwrap();
                let r = rr_r(tau, d, &boost).unwrap();
                let got = sml_bruteforce(&pol, &part, &LeakageOptions::default()).unwrap().raw_sum;
                assert_eq!(got, rr_privacy_raw(tau as usize + 1, Some(&r)), "d={d} tau={tau} b={b}");
                assert_eq!(
                    distortion_exact(&pol).unwrap().0,
                    rr_distortion_closed(&TabularScale::matched(tau, d, tau as usize + 1), &boost)
                );
            }
        }
    }
}

#[test]
fn qm_privacy_matches_enumeration() {
    for d in 2..=3 {
        for tau in 1..=5u64 {
            let (sp, ins, part) = setup(d, tau);
            let s = tau as usize + 1;
            for i in 1..=s {
                let q = QmFraction::new(sp.categories().to_vec(), tau, 0, i).unwrap();
                let pol = materialize(&q, &param_labels(&ins)).unwrap();
                let got = sml_bruteforce(&pol, &part, &LeakageOptions::default()).unwrap().raw_sum;
                assert_eq!(got, int(qm_privacy_raw(s, i)), "d={d} tau={tau} I={i}");
            }
        }
    }
}

#[test]
fn qm_distortion_two_categories_matches_formula() {
    for tau in 1..=8u64 {
        let (sp, ins, _) = setup(2, tau);
        for i in 1..=tau as usize + 1 {
            let q = QmFraction::new(sp.categories().to_vec(), tau, 0, i).unwrap();
            let got = distortion_exact(&materialize(&q, &param_labels(&ins)).unwrap()).unwrap().0;
            assert_eq!(got, qm_distortion_closed(tau, 2, i).unwrap(), "tau={tau} I={i}");
        }
    }
}

#[test]
fn qm_distortion_more_categories_exact_value() {
    // Enumeration gives ((d-2)τ + ⌊I/2⌋)/((d-1)τ) once d ≥ 3, above the two-category formula.
    for d in 3..=4usize {
        for tau in 1..=4u64 {
            let (sp, ins, _) = setup(d, tau);
            for i in 1..=tau as usize + 1 {
                let q = QmFraction::new(sp.categories().to_vec(), tau, 0, i).unwrap();
                let got = distortion_exact(&materialize(&q, &param_labels(&ins)).unwrap()).unwrap().0;
                let want = Rational::new(
                    BigInt::from((d as u64 - 2) * tau + i as u64 / 2),
                    BigInt::from((d as u64 - 1) * tau),
                );
                assert_eq!(got, want, "d={d} tau={tau} I={i}");
                assert!(got >= qm_distortion_closed(tau, d, i).unwrap());
            }
        }
    }
}

fn worst_cost(inputs: &[CategoricalParam], chosen: &[&CategoricalParam]) -> Rational {
    inputs
        .iter()
        .map(|x| chosen.iter().map(|a| tv_distance(x, a).into_inner()).min().unwrap())
        .max()
        .unwrap()
}

#[test]
fn maxl_greedy_is_locally_optimal() {
    for seed in 0..4u64 {
        let sp = ParameterSpace::numbered(2, 4).unwrap();
        let ins = sp.enumerate(100).unwrap();
        let cands = qm_style_candidates(&sp, 0, 2, &mut rng_for(seed, 2)).unwrap();
        assert_eq!(cands.len(), 3);
        let m = maxl_build(&ins, &cands).unwrap();
        let chosen: Vec<&CategoricalParam> = m.selected().iter().map(|&k| &cands[k]).collect();
        assert_eq!(*m.worst_cost(), worst_cost(&ins, &chosen));
        // stopping rule: no single extra candidate strictly improves
        if chosen.len() < cands.len() {
            for (k, c) in cands.iter().enumerate() {
                if m.selected().contains(&k) {
                    continue;
                }
                let mut more = chosen.clone();
                more.push(c);
                assert!(worst_cost(&ins, &more) >= *m.worst_cost());
            }
        }
        // every input maps to a nearest selected candidate
        for x in &ins {
            let best = chosen.iter().map(|a| tv_distance(x, a).into_inner()).min().unwrap();
            assert_eq!(tv_distance(x, m.map(x)).into_inner(), best);
        }
        let pol = materialize(&m, &param_labels(&ins)).unwrap();
        let (_, part) = build_partition(&sp, &FractionOfCategory { category: 0 }, 100).unwrap();
        let f = sml_deterministic(&pol, &part, &LeakageOptions::default()).unwrap();
        assert!(f.raw_sum <= int(m.selected().len() as u64));
        assert!(!f.raw_sum.is_zero());
    }
}
