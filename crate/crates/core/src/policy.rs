//! Explicit release kernels P(θ′|θ) with exact rational entries.

use std::collections::HashMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::prob::{fmt_rational, parse_rational, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyMatrix {
    inputs: Vec<Label>,
    outputs: Vec<Label>,
    rows: Vec<Vec<Rational>>,
    deterministic: bool,
    in_index: HashMap<Label, usize>,
    out_index: HashMap<Label, usize>,
}

#[derive(Serialize, Deserialize)]
struct PolicyJson {
    inputs: Vec<Label>,
    outputs: Vec<Label>,
    rows: Vec<Vec<String>>,
}

fn index_labels(labels: &[Label], what: &str) -> Result<HashMap<Label, usize>> {
    let mut seen = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if seen.insert(l.clone(), i).is_some() {
            return Err(Error::InvalidPolicy(format!("duplicate {what} label {l}")));
        }
    }
    Ok(seen)
}

impl PolicyMatrix {
    /// Validates shape, entry range, and that every row sums to exactly one.
    pub fn new(inputs: Vec<Label>, outputs: Vec<Label>, rows: Vec<Vec<Rational>>) -> Result<Self> {
        if rows.len() != inputs.len() {
            return Err(Error::InvalidPolicy(format!("{} rows for {} inputs", rows.len(), inputs.len())));
        }
        let in_index = index_labels(&inputs, "input")?;
        let out_index = index_labels(&outputs, "output")?;
        let one = Rational::one();
        let mut deterministic = true;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != outputs.len() {
                return Err(Error::InvalidPolicy(format!("row {i} has {} entries", row.len())));
            }
            let mut sum = Rational::zero();
            for e in row {
                if *e < Rational::zero() || *e > one {
                    return Err(Error::InvalidPolicy(format!("row {i} entry {} out of [0,1]", fmt_rational(e))));
                }
                if !(e.is_zero() || e.is_one()) {
                    deterministic = false;
                }
                sum += e;
            }
            if sum != one {
                return Err(Error::InvalidPolicy(format!("row {i} sums to {}", fmt_rational(&sum))));
            }
        }
        Ok(PolicyMatrix { inputs, outputs, rows, deterministic, in_index, out_index })
    }

    pub fn identity(labels: Vec<Label>) -> Result<Self> {
        let n = labels.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
            .collect();
        Self::new(labels.clone(), labels, rows)
    }

    /// Every input released as `output`.
    pub fn constant(inputs: Vec<Label>, output: Label) -> Result<Self> {
        let rows = vec![vec![Rational::one()]; inputs.len()];
        Self::new(inputs, vec![output], rows)
    }

    /// Deterministic policy from a map input index -> output index.
    pub fn from_map(inputs: Vec<Label>, outputs: Vec<Label>, map: &[usize]) -> Result<Self> {
        let rows = map
            .iter()
            .map(|&j| {
                let mut r = vec![Rational::zero(); outputs.len()];
                if let Some(e) = r.get_mut(j) {
                    *e = Rational::one();
                }
                r
            })
            .collect();
        Self::new(inputs, outputs, rows)
    }

    pub fn inputs(&self) -> &[Label] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Label] {
        &self.outputs
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j]
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_index(&self, l: &Label) -> Option<usize> {
        self.in_index.get(l).copied()
    }

    pub fn output_index(&self, l: &Label) -> Option<usize> {
        self.out_index.get(l).copied()
    }

    /// For a deterministic policy, the output index each input maps to.
    pub fn det_map(&self) -> Result<Vec<usize>> {
        if !self.deterministic {
            return Err(Error::NotDeterministic("entries outside {0,1}".into()));
        }
        Ok(self.rows.iter().map(|r| r.iter().position(|e| e.is_one()).unwrap()).collect())
    }

    /// K∘P: release θ′ by P, then θ″ by K. K's inputs must cover P's outputs.
    pub fn then(&self, kernel: &PolicyMatrix) -> Result<PolicyMatrix> {
        let idx = self
            .outputs
            .iter()
            .map(|o| {
                kernel
                    .input_index(o)
                    .ok_or_else(|| Error::AlphabetMismatch(format!("kernel has no row for {o}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut out = vec![Rational::zero(); kernel.n_outputs()];
                for (j, p) in r.iter().enumerate() {
                    if p.is_zero() {
                        continue;
                    }
                    for (k, q) in kernel.row(idx[j]).iter().enumerate() {
                        if !q.is_zero() {
                            out[k] += p * q;
                        }
                    }
                }
                out
            })
            .collect();
        PolicyMatrix::new(self.inputs.clone(), kernel.outputs.clone(), rows)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = PolicyJson {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(fmt_rational).collect()).collect(),
        };
        serde_json::to_value(j).expect("policy serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: PolicyJson = serde_json::from_value(v.clone())?;
        let rows = j
            .rows
            .iter()
            .map(|r| r.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(j.inputs, j.outputs, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::ratio;

    fn names(n: &[&str]) -> Vec<Label> {
        n.iter().map(|s| Label::name(*s)).collect()
    }

    #[test]
    fn exact_row_sums() {
        let ok = PolicyMatrix::new(names(&["a"]), names(&["x", "y"]), vec![vec![ratio(1, 3), ratio(2, 3)]]);
        assert!(ok.is_ok());
        assert!(!ok.unwrap().is_deterministic());
        let bad = PolicyMatrix::new(names(&["a"]), names(&["x", "y"]), vec![vec![ratio(1, 3), ratio(1, 3)]]);
        assert_eq!(bad.unwrap_err().code(), "invalid_policy");
    }

    #[test]
    fn deterministic_flag() {
        let p = PolicyMatrix::from_map(names(&["a", "b"]), names(&["x", "y"]), &[1, 1]).unwrap();
        assert!(p.is_deterministic());
        assert_eq!(p.det_map().unwrap(), vec![1, 1]);
    }

    #[test]
    fn json_round_trip() {
        let p = PolicyMatrix::new(
            names(&["a", "b"]),
            names(&["x", "y"]),
            vec![vec![ratio(1, 4), ratio(3, 4)], vec![ratio(1, 1), ratio(0, 1)]],
        )
        .unwrap();
        let j = p.to_json();
        assert_eq!(j["rows"][0][1], "3/4");
        assert_eq!(PolicyMatrix::from_json(&j).unwrap(), p);
    }

    #[test]
    fn post_processing_composes_rows() {
        let p = PolicyMatrix::new(names(&["a"]), names(&["x", "y"]), vec![vec![ratio(1, 4), ratio(3, 4)]]).unwrap();
        let k = PolicyMatrix::new(
            names(&["x", "y"]),
            names(&["z", "w"]),
            vec![vec![ratio(1, 2), ratio(1, 2)], vec![ratio(1, 3), ratio(2, 3)]],
        )
        .unwrap();
        let q = p.then(&k).unwrap();
        assert_eq!(q.entry(0, 0), &(ratio(1, 8) + ratio(1, 4)));
        let id = PolicyMatrix::identity(names(&["x", "y"])).unwrap();
        assert_eq!(p.then(&id).unwrap(), p);
    }
}
