//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use num_traits::Zero;
use rand::{Rng, RngCore};
use statleak::label::Label;
use statleak::param::CategoricalParam;
use statleak::policy::PolicyMatrix;
use statleak::prob::{ratio, Rational};
use statleak::secret::SecretPartition;
use statleak::space::ParameterSpace;

pub fn names(prefix: &str, n: usize) -> Vec<Label> {
    (0..n).map(|i| Label::name(format!("{prefix}{i}"))).collect()
}

pub fn param_labels(v: &[CategoricalParam]) -> Vec<Label> {
    v.iter().cloned().map(Label::Param).collect()
}

pub fn space_labels(d: usize, tau: u64) -> Vec<Label> {
    param_labels(&ParameterSpace::numbered(d, tau).unwrap().enumerate(1_000_000).unwrap())
}

/// A surjective assignment of `n` inputs onto `s` classes.
pub fn random_partition(n: usize, s: usize, rng: &mut dyn RngCore) -> SecretPartition {
    assert!(s >= 1 && s <= n);
    let mut class_of: Vec<usize> = (0..n).map(|i| if i < s { i } else { rng.gen_range(0..s) }).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        class_of.swap(i, j);
    }
    SecretPartition::from_assignment(class_of).unwrap()
}

pub fn random_det_policy(inputs: Vec<Label>, n_out: usize, rng: &mut dyn RngCore) -> PolicyMatrix {
    let map: Vec<usize> = (0..inputs.len()).map(|_| rng.gen_range(0..n_out)).collect();
    PolicyMatrix::from_map(inputs, names("y", n_out), &map).unwrap()
}

/// Rows of small integer weights normalized exactly; some entries are zero.
pub fn random_row(n_out: usize, rng: &mut dyn RngCore) -> Vec<Rational> {
    loop {
        let w: Vec<u64> = (0..n_out).map(|_| if rng.gen_bool(0.3) { 0 } else { rng.gen_range(1..=6) }).collect();
        let t: u64 = w.iter().sum();
        if t > 0 {
            return w.into_iter().map(|x| ratio(x, t)).collect();
        }
    }
}

pub fn random_policy_with(inputs: Vec<Label>, outputs: Vec<Label>, rng: &mut dyn RngCore) -> PolicyMatrix {
    let rows = (0..inputs.len()).map(|_| random_row(outputs.len(), rng)).collect();
    PolicyMatrix::new(inputs, outputs, rows).unwrap()
}

pub fn random_policy(n_in: usize, n_out: usize, rng: &mut dyn RngCore) -> PolicyMatrix {
    random_policy_with(names("x", n_in), names("y", n_out), rng)
}

pub fn row_sums_are_one(p: &PolicyMatrix) -> bool {
    p.rows().iter().all(|r| r.iter().fold(Rational::zero(), |a, b| a + b) == ratio(1, 1))
}

/// Equal as conditional distributions, whatever the column order.
pub fn same_kernel(a: &PolicyMatrix, b: &PolicyMatrix) -> bool {
    let zero = Rational::zero();
    let entry = |p: &PolicyMatrix, i: usize, o: &Label| p.output_index(o).map(|j| p.entry(i, j).clone()).unwrap_or(zero.clone());
    a.inputs() == b.inputs()
        && (0..a.n_inputs()).all(|i| {
            a.outputs().iter().chain(b.outputs()).all(|o| entry(a, i, o) == entry(b, i, o))
        })
}
