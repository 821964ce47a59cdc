//! Quantization: bin the ordered secret values into runs of I and release a uniform
//! parameter whose secret is the bin's median representative.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanism::{sample_weighted, Mechanism};
use crate::param::{num_compositions, CategoricalParam, DEFAULT_ENUM_CAP};
use crate::prob::{from_biguint, Rational};
use crate::secret::SecretPartition;
use crate::space::ParameterSpace;

/// 1-based rank of the representative of bin k (0-based), clamped to s.
pub fn median_rank(k: usize, interval: usize, s: usize) -> usize {
    (((2 * k + 1) * interval) / 2 + 1).min(s)
}

pub fn n_bins(s: usize, interval: usize) -> usize {
    s.div_ceil(interval)
}

/// Which categories released parameters may use.
#[derive(Clone, Debug)]
pub enum QmSupport {
    Full,
    /// The estimated categories plus the input's own support.
    EstimatedUnionInput(Vec<usize>),
}

/// QM for the secret "fraction of category c". Works on implicit spaces of any size.
#[derive(Clone, Debug)]
pub struct QmFraction {
    pub categories: Vec<String>,
    pub tau: u64,
    pub category: usize,
    pub interval: usize,
    pub support: QmSupport,
    pub cap: u64,
}

impl QmFraction {
    pub fn new(categories: Vec<String>, tau: u64, category: usize, interval: usize) -> Result<Self> {
        if interval == 0 {
            return Err(Error::InvalidArgument("interval must be positive".into()));
        }
        if category >= categories.len() {
            return Err(Error::InvalidArgument(format!("category {category} out of range")));
        }
        Ok(QmFraction { categories, tau, category, interval, support: QmSupport::Full, cap: DEFAULT_ENUM_CAP })
    }

    pub fn s(&self) -> usize {
        self.tau as usize + 1
    }

    /// Count of the secret category in every released parameter for this input.
    pub fn target_count(&self, theta: &CategoricalParam) -> u64 {
        let k = theta.count(self.category) as usize / self.interval;
        median_rank(k, self.interval, self.s()) as u64 - 1
    }

    // Remaining categories the released parameter may use, excluding the secret one.
    fn others(&self, theta: &CategoricalParam) -> Result<Vec<usize>> {
        let mut active: Vec<usize> = match &self.support {
            QmSupport::Full => (0..self.categories.len()).collect(),
            QmSupport::EstimatedUnionInput(est) => {
                let mut a = est.clone();
                a.extend(theta.support());
                a.sort_unstable();
                a.dedup();
                a
            }
        };
        if !active.contains(&self.category) {
            return Err(Error::EmptyReleaseSet(format!("secret category {} not releasable", self.category)));
        }
        active.retain(|&i| i != self.category);
        Ok(active)
    }

    fn check(&self, input: &Label) -> Result<CategoricalParam> {
        let theta = input
            .as_param()
            .ok_or_else(|| Error::AlphabetMismatch(format!("QM needs a parameter input, got {input}")))?;
        if theta.tau() != self.tau || theta.dim() != self.categories.len() {
            return Err(Error::NotInSpace(format!("{theta} does not match the QM space")));
        }
        Ok(theta.clone())
    }

    fn release_set(&self, theta: &CategoricalParam) -> Result<(u64, Vec<usize>, BigUint)> {
        let t = self.target_count(theta);
        let others = self.others(theta)?;
        let size = num_compositions(others.len(), self.tau - t);
        if size.is_zero() {
            return Err(Error::EmptyReleaseSet(format!("no parameter has count {t} in category {}", self.category)));
        }
        Ok((t, others, size))
    }

    fn embed(&self, t: u64, others: &[usize], rest: Option<&CategoricalParam>) -> CategoricalParam {
        let mut counts = vec![0; self.categories.len()];
        counts[self.category] = t;
        if let Some(r) = rest {
            for (k, &i) in others.iter().enumerate() {
                counts[i] = r.count(k);
            }
        }
        CategoricalParam::from_counts_unchecked(self.tau, counts)
    }

    fn rest_space(&self, t: u64, others: &[usize]) -> Option<ParameterSpace> {
        if others.is_empty() {
            return None;
        }
        let names = others.iter().map(|&i| self.categories[i].clone()).collect();
        ParameterSpace::compositions(names, self.tau - t).ok()
    }
}

impl Mechanism for QmFraction {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        let theta = self.check(input)?;
        let (t, others, size) = self.release_set(&theta)?;
        let p = Rational::one() / from_biguint(&size);
        match self.rest_space(t, &others) {
            None => Ok(vec![(Label::Param(self.embed(t, &others, None)), p)]),
            Some(rs) => Ok(rs
                .enumerate(self.cap)?
                .iter()
                .map(|r| (Label::Param(self.embed(t, &others, Some(r))), p.clone()))
                .collect()),
        }
    }

    fn likelihood(&self, input: &Label, output: &Label) -> Result<Rational> {
        let theta = self.check(input)?;
        let (t, others, size) = self.release_set(&theta)?;
        let ok = output.as_param().is_some_and(|o| {
            o.tau() == self.tau
                && o.dim() == self.categories.len()
                && o.count(self.category) == t
                && (0..o.dim()).all(|i| i == self.category || o.count(i) == 0 || others.contains(&i))
        });
        Ok(if ok { Rational::one() / from_biguint(&size) } else { Rational::zero() })
    }

    /// Unranks a uniform composition of τ − t over the non-secret categories.
    fn sample(&self, input: &Label, rng: &mut dyn RngCore) -> Result<Label> {
        let theta = self.check(input)?;
        let (t, others, size) = self.release_set(&theta)?;
        Ok(Label::Param(match self.rest_space(t, &others) {
            None => self.embed(t, &others, None),
            Some(rs) => {
                let r = rs.get(&rng.gen_biguint_below(&size))?;
                self.embed(t, &others, Some(&r))
            }
        }))
    }

    fn name(&self) -> String {
        format!("qm(I={})", self.interval)
    }
}

/// QM over an explicit space and an arbitrary secret partition.
///
/// Ordered secrets release uniformly over the class of the bin's median secret.
/// Unordered secrets fall back to a uniform parameter from the whole bin; bins then
/// follow the partition's class order.
#[derive(Clone, Debug)]
pub struct QmPartition {
    members: Vec<CategoricalParam>,
    partition: SecretPartition,
    interval: usize,
    index: std::collections::HashMap<CategoricalParam, usize>,
}

impl QmPartition {
    pub fn new(members: Vec<CategoricalParam>, partition: SecretPartition, interval: usize) -> Result<Self> {
        if interval == 0 {
            return Err(Error::InvalidArgument("interval must be positive".into()));
        }
        if partition.n_inputs() != members.len() {
            return Err(Error::InvalidArgument("partition does not cover the members".into()));
        }
        let index = members.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        Ok(QmPartition { members, partition, interval, index })
    }

    /// Member indices released (uniformly) for an input in class k.
    pub fn release_members(&self, class: usize) -> Vec<usize> {
        let s = self.partition.s();
        let bin = class / self.interval;
        if self.partition.is_ordered() {
            let m = median_rank(bin, self.interval, s);
            self.partition.class(m - 1).to_vec()
        } else {
            let lo = bin * self.interval;
            let hi = ((bin + 1) * self.interval).min(s);
            (lo..hi).flat_map(|k| self.partition.class(k).iter().copied()).collect()
        }
    }
}

impl Mechanism for QmPartition {
    fn row(&self, input: &Label) -> Result<Vec<(Label, Rational)>> {
        let i = input
            .as_param()
            .and_then(|p| self.index.get(p))
            .ok_or_else(|| Error::NotInSpace(format!("{input} is not a member")))?;
        let rel = self.release_members(self.partition.class_of(*i));
        if rel.is_empty() {
            return Err(Error::EmptyReleaseSet(format!("bin of input {input}")));
        }
        let p = Rational::new(1.into(), rel.len().into());
        Ok(rel.into_iter().map(|j| (Label::Param(self.members[j].clone()), p.clone())).collect())
    }

    fn sample(&self, input: &Label, rng: &mut dyn RngCore) -> Result<Label> {
        let row = self.row(input)?;
        let w: Vec<Rational> = row.iter().map(|(_, p)| p.clone()).collect();
        Ok(row[sample_weighted(&w, rng)?].0.clone())
    }

    fn name(&self) -> String {
        format!("qm(I={})", self.interval)
    }
}

/// Number of parameters with count `t` in one category, the rest over d−1 categories.
pub fn release_set_size(d: usize, tau: u64, t: u64) -> u64 {
    num_compositions(d - 1, tau - t).to_u64().unwrap_or(u64::MAX)
}
