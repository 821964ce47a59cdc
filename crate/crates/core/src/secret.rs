//! Secret functions and the partition of a parameter space into secret classes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::CategoricalParam;
use crate::prob::{fmt_rational, ratio};
use crate::space::ParameterSpace;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SecretValue {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

impl SecretValue {
    pub fn new(id: impl Into<String>) -> Self {
        SecretValue { id: id.into(), rank: None }
    }

    pub fn ranked(id: impl Into<String>, rank: usize) -> Self {
        SecretValue { id: id.into(), rank: Some(rank) }
    }
}

pub trait SecretFunction: Send + Sync {
    fn secret(&self, theta: &CategoricalParam) -> Result<SecretValue>;

    /// The full secret set for precision τ when it is known up front, in rank order.
    fn declared(&self, _tau: u64) -> Option<Vec<SecretValue>> {
        None
    }
}

/// g(θ) = mass of one category. Values l/τ for l = 0..τ get rank l+1, so s = τ+1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FractionOfCategory {
    pub category: usize,
}

impl FractionOfCategory {
    pub fn value(count: u64, tau: u64) -> SecretValue {
        SecretValue::ranked(fmt_rational(&ratio(count, tau.max(1))), count as usize + 1)
    }
}

impl SecretFunction for FractionOfCategory {
    fn secret(&self, theta: &CategoricalParam) -> Result<SecretValue> {
        if self.category >= theta.dim() {
            return Err(Error::InvalidArgument(format!(
                "category {} outside parameter of dimension {}",
                self.category,
                theta.dim()
            )));
        }
        Ok(Self::value(theta.count(self.category), theta.tau()))
    }

    fn declared(&self, tau: u64) -> Option<Vec<SecretValue>> {
        Some((0..=tau).map(|l| Self::value(l, tau)).collect())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantSecret;

impl SecretFunction for ConstantSecret {
    fn secret(&self, _theta: &CategoricalParam) -> Result<SecretValue> {
        Ok(SecretValue::ranked("*", 1))
    }
}

/// Wraps a closure as a secret function.
pub struct FnSecret<F>(pub F);

impl<F> SecretFunction for FnSecret<F>
where
    F: Fn(&CategoricalParam) -> Result<SecretValue> + Send + Sync,
{
    fn secret(&self, theta: &CategoricalParam) -> Result<SecretValue> {
        (self.0)(theta)
    }
}

/// Classes Θ_g over a list of inputs, identified by index into that list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretPartition {
    secrets: Vec<SecretValue>,
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl SecretPartition {
    /// Groups inputs by their secret value. Classes follow rank order when every value is
    /// ranked, otherwise first appearance. Declared values must all be attained.
    pub fn from_values(values: Vec<SecretValue>, declared: Option<Vec<SecretValue>>) -> Result<Self> {
        let mut secrets: Vec<SecretValue> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        for v in &values {
            match pos.get(&v.id) {
                Some(&k) if secrets[k].rank != v.rank => {
                    return Err(Error::InvalidArgument(format!("secret {} has two ranks", v.id)));
                }
                Some(_) => {}
                None => {
                    pos.insert(v.id.clone(), secrets.len());
                    secrets.push(v.clone());
                }
            }
        }
        if let Some(decl) = declared {
            for d in &decl {
                if !pos.contains_key(&d.id) {
                    return Err(Error::EmptyClass(d.id.clone()));
                }
            }
            if decl.len() != secrets.len() {
                return Err(Error::InvalidArgument("secret outside the declared set".into()));
            }
            secrets = decl;
        } else if secrets.iter().all(|s| s.rank.is_some()) {
            secrets.sort_by_key(|s| s.rank);
            if secrets.windows(2).any(|w| w[0].rank == w[1].rank) {
                return Err(Error::InvalidArgument("duplicate secret rank".into()));
            }
        }
        let pos: HashMap<&str, usize> = secrets.iter().enumerate().map(|(k, s)| (s.id.as_str(), k)).collect();
        let mut classes = vec![Vec::new(); secrets.len()];
        let mut class_of = Vec::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            let k = pos[v.id.as_str()];
            classes[k].push(i);
            class_of.push(k);
        }
        Ok(SecretPartition { secrets, classes, class_of })
    }

    /// Partition from a class index per input; classes must all be non-empty.
    pub fn from_assignment(class_of: Vec<usize>) -> Result<Self> {
        let s = class_of.iter().max().map_or(0, |m| m + 1);
        let mut classes = vec![Vec::new(); s];
        for (i, &k) in class_of.iter().enumerate() {
            classes[k].push(i);
        }
        if let Some(k) = classes.iter().position(|c| c.is_empty()) {
            return Err(Error::EmptyClass(format!("g{k}")));
        }
        let secrets = (0..s).map(|k| SecretValue::ranked(format!("g{k}"), k + 1)).collect();
        Ok(SecretPartition { secrets, classes, class_of })
    }

    pub fn build(members: &[CategoricalParam], f: &dyn SecretFunction) -> Result<Self> {
        let values = members.iter().map(|m| f.secret(m)).collect::<Result<Vec<_>>>()?;
        let tau = members.first().map_or(0, |m| m.tau());
        Self::from_values(values, f.declared(tau))
    }

    pub fn s(&self) -> usize {
        self.secrets.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.class_of.len()
    }

    pub fn secrets(&self) -> &[SecretValue] {
        &self.secrets
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class(&self, k: usize) -> &[usize] {
        &self.classes[k]
    }

    pub fn class_of(&self, input: usize) -> usize {
        self.class_of[input]
    }

    pub fn max_class_size(&self) -> usize {
        self.classes.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// True when every secret carries an ordinal rank.
    pub fn is_ordered(&self) -> bool {
        self.secrets.iter().all(|s| s.rank.is_some())
    }
}

/// Enumerates the space and partitions it by `f`.
pub fn build_partition(
    space: &ParameterSpace,
    f: &dyn SecretFunction,
    cap: u64,
) -> Result<(Vec<CategoricalParam>, SecretPartition)> {
    let members = space.enumerate(cap)?;
    let values = members.iter().map(|m| f.secret(m)).collect::<Result<Vec<_>>>()?;
    let part = SecretPartition::from_values(values, f.declared(space.tau()))?;
    Ok((members, part))
}

/// One representative θ_g per class, stored as input indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriorAssignment {
    pub choice: Vec<usize>,
}

impl PriorAssignment {
    pub fn new(choice: Vec<usize>, partition: &SecretPartition) -> Result<Self> {
        if choice.len() != partition.s() {
            return Err(Error::InvalidArgument("one representative per class required".into()));
        }
        for (k, &i) in choice.iter().enumerate() {
            if i >= partition.n_inputs() || partition.class_of(i) != k {
                return Err(Error::InvalidArgument(format!("input {i} is not in class {k}")));
            }
        }
        Ok(PriorAssignment { choice })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::DEFAULT_ENUM_CAP;

    #[test]
    fn fraction_partition_d2() {
        let sp = ParameterSpace::numbered(2, 2).unwrap();
        let (m, p) = build_partition(&sp, &FractionOfCategory { category: 0 }, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(p.s(), 3);
        let ids: Vec<_> = p.secrets().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["0", "1/2", "1"]);
        assert_eq!(m[p.class(0)[0]].counts(), &[0, 2]);
        assert_eq!(m[p.class(1)[0]].counts(), &[1, 1]);
        assert_eq!(m[p.class(2)[0]].counts(), &[2, 0]);
    }

    #[test]
    fn fraction_partition_d3_sizes() {
        let sp = ParameterSpace::numbered(3, 2).unwrap();
        let (_, p) = build_partition(&sp, &FractionOfCategory { category: 0 }, DEFAULT_ENUM_CAP).unwrap();
        let sizes: Vec<_> = p.classes().iter().map(Vec::len).collect();
        assert_eq!(sizes, [3, 2, 1]);
    }

    #[test]
    fn constant_secret_single_class() {
        let sp = ParameterSpace::numbered(3, 3).unwrap();
        let (m, p) = build_partition(&sp, &ConstantSecret, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(p.s(), 1);
        assert_eq!(p.class(0).len(), m.len());
    }

    #[test]
    fn unattained_declared_secret_is_reported() {
        let sp = ParameterSpace::explicit(
            vec!["a".into(), "b".into()],
            2,
            vec![CategoricalParam::new(2, vec![0, 2]).unwrap()],
        )
        .unwrap();
        let e = build_partition(&sp, &FractionOfCategory { category: 0 }, 10).unwrap_err();
        assert_eq!(e, Error::EmptyClass("1/2".into()));
    }

    #[test]
    fn assignment_partition_checks() {
        assert!(SecretPartition::from_assignment(vec![0, 2]).is_err());
        let p = SecretPartition::from_assignment(vec![1, 0, 1]).unwrap();
        assert_eq!(p.class(1), &[0, 2]);
        assert!(PriorAssignment::new(vec![1, 0], &p).is_ok());
        assert!(PriorAssignment::new(vec![0, 1], &p).is_err());
    }
}
