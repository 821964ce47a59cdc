mod common;

use common::*;
use num_bigint::BigInt;
use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statleak::flow::{min_cost_flow, FlowNetwork};
use statleak::leakage::{sml, sml_bruteforce, sml_deterministic, LeakageOptions, Method};
use statleak::prob::Rational;

/// A random acyclic network: nodes are ordered source, 2..n, sink and arcs only go
/// forward, so there are no cycles at all.
fn random_dag(rng: &mut ChaCha20Rng) -> FlowNetwork {
    let n = rng.gen_range(2..=8usize);
    let mut net = FlowNetwork::new();
    for i in 2..n {
        net.add_node(format!("v{i}"));
    }
    let order: Vec<usize> = std::iter::once(0).chain(2..n).chain(std::iter::once(1)).collect();
    let n_arcs = rng.gen_range(1..=10usize);
    for _ in 0..n_arcs {
        let a = rng.gen_range(0..order.len() - 1);
        let b = rng.gen_range(a + 1..order.len());
        let cost = Rational::new(BigInt::from(rng.gen_range(-6i64..=4)), BigInt::from(rng.gen_range(1i64..=3)));
        net.add_arc(order[a], order[b], rng.gen_range(1..=2), cost).unwrap();
    }
    net
}

/// Minimum cost over every integral flow that conserves at internal nodes.
fn exhaustive_min_cost(net: &FlowNetwork) -> Rational {
    let arcs = net.arcs();
    let mut x = vec![0u64; arcs.len()];
    let mut best: Option<Rational> = None;
    loop {
        let mut bal = vec![0i64; net.n_nodes()];
        for (a, &f) in arcs.iter().zip(&x) {
            bal[a.tail] -= f as i64;
            bal[a.head] += f as i64;
        }
        if bal.iter().enumerate().all(|(v, &b)| v == net.source() || v == net.sink() || b == 0) {
            let c = arcs.iter().zip(&x).fold(Rational::zero(), |acc, (a, &f)| acc + &a.cost * BigInt::from(f));
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        }
        let mut k = 0;
        loop {
            if k == x.len() {
                return best.unwrap();
            }
            if x[k] < arcs[k].cap {
                x[k] += 1;
                break;
            }
            x[k] = 0;
            k += 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ssp_matches_exhaustive_oracle(seed in any::<u64>()) {
        let net = random_dag(&mut ChaCha20Rng::seed_from_u64(seed));
        let res = min_cost_flow(&net).unwrap();
        prop_assert_eq!(&res.total_cost, &exhaustive_min_cost(&net));
        // the returned flow is feasible and its cost is the reported one
        let mut bal = vec![0i64; net.n_nodes()];
        let mut c = Rational::zero();
        for (a, &f) in net.arcs().iter().zip(&res.flow) {
            prop_assert!(f <= a.cap);
            bal[a.tail] -= f as i64;
            bal[a.head] += f as i64;
            c += &a.cost * BigInt::from(f);
        }
        prop_assert_eq!(c, res.total_cost);
        for (v, b) in bal.iter().enumerate() {
            if v != net.source() && v != net.sink() {
                prop_assert_eq!(*b, 0);
            }
        }
        prop_assert_eq!(bal[net.sink()], res.value as i64);
    }

    #[test]
    fn flow_equals_bruteforce(seed in any::<u64>(), n_in in 1usize..=9, n_out in 1usize..=6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let s = rng.gen_range(1..=n_in.min(4));
        let p = random_det_policy(names("x", n_in), n_out, &mut rng);
        let part = random_partition(n_in, s, &mut rng);
        let o = LeakageOptions::default();
        let f = sml_deterministic(&p, &part, &o).unwrap();
        let b = sml_bruteforce(&p, &part, &o).unwrap();
        prop_assert_eq!(&f.raw_sum, &b.raw_sum);
        prop_assert_eq!(f.method, Method::Flow);
        prop_assert_eq!(sml(&p, &part, &o).unwrap().raw_sum, b.raw_sum);
    }

    #[test]
    fn parallel_bruteforce_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = random_policy(8, 5, &mut rng);
        let part = random_partition(8, 3, &mut rng);
        let one = sml_bruteforce(&p, &part, &LeakageOptions { jobs: Some(1), ..Default::default() }).unwrap();
        let many = sml_bruteforce(&p, &part, &LeakageOptions { jobs: Some(4), ..Default::default() }).unwrap();
        prop_assert_eq!(one.raw_sum, many.raw_sum);
        prop_assert_eq!(one.argmax_prior, many.argmax_prior);
    }
}
