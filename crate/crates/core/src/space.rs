//! Finite parameter spaces, either implicit (all compositions) or an explicit list.

use std::collections::HashMap;

use num_bigint::{BigUint, RandBigInt};
use num_traits::ToPrimitive;
use rand::Rng;

use crate::error::{Error, Result};
use crate::param::{check_cap, num_compositions, rank_param, unrank_param, CategoricalParam};

#[derive(Clone, Debug)]
enum Members {
    /// Every composition of τ supported on `active` (sorted category indices).
    Compositions { active: Vec<usize> },
    Explicit { list: Vec<CategoricalParam>, index: HashMap<CategoricalParam, usize> },
}

#[derive(Clone, Debug)]
pub struct ParameterSpace {
    categories: Vec<String>,
    tau: u64,
    members: Members,
}

impl ParameterSpace {
    /// All compositions of τ over the given categories.
    pub fn compositions(categories: Vec<String>, tau: u64) -> Result<Self> {
        let active = (0..categories.len()).collect();
        Self::compositions_over(categories, tau, active)
    }

    /// Compositions of τ that put mass only on `active` categories.
    pub fn compositions_over(categories: Vec<String>, tau: u64, mut active: Vec<usize>) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::InvalidArgument("no categories".into()));
        }
        active.sort_unstable();
        active.dedup();
        if active.is_empty() || active.iter().any(|&i| i >= categories.len()) {
            return Err(Error::InvalidArgument(format!("bad active set {active:?}")));
        }
        Ok(ParameterSpace { categories, tau, members: Members::Compositions { active } })
    }

    pub fn explicit(categories: Vec<String>, tau: u64, list: Vec<CategoricalParam>) -> Result<Self> {
        let mut index = HashMap::with_capacity(list.len());
        for (i, p) in list.iter().enumerate() {
            if p.tau() != tau || p.dim() != categories.len() {
                return Err(Error::InvalidArgument(format!(
                    "member {p} does not match tau={tau}, d={}",
                    categories.len()
                )));
            }
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate member {p}")));
            }
        }
        Ok(ParameterSpace { categories, tau, members: Members::Explicit { list, index } })
    }

    /// Categories named c0, c1, ...
    pub fn numbered(d: usize, tau: u64) -> Result<Self> {
        Self::compositions((0..d).map(|i| format!("c{i}")).collect(), tau)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn dim(&self) -> usize {
        self.categories.len()
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn active(&self) -> Option<&[usize]> {
        match &self.members {
            Members::Compositions { active } => Some(active),
            Members::Explicit { .. } => None,
        }
    }

    pub fn len(&self) -> BigUint {
        match &self.members {
            Members::Compositions { active } => num_compositions(active.len(), self.tau),
            Members::Explicit { list, .. } => BigUint::from(list.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == BigUint::ZERO
    }

    fn project(&self, theta: &CategoricalParam, active: &[usize]) -> Option<CategoricalParam> {
        if theta.tau() != self.tau || theta.dim() != self.dim() {
            return None;
        }
        let mut j = 0;
        for (i, &c) in theta.counts().iter().enumerate() {
            if j < active.len() && active[j] == i {
                j += 1;
            } else if c > 0 {
                return None;
            }
        }
        let sub = active.iter().map(|&i| theta.count(i)).collect();
        Some(CategoricalParam::from_counts_unchecked(self.tau, sub))
    }

    pub fn index_of(&self, theta: &CategoricalParam) -> Option<BigUint> {
        match &self.members {
            Members::Compositions { active } => self.project(theta, active).map(|p| rank_param(&p)),
            Members::Explicit { index, .. } => index.get(theta).map(|&i| BigUint::from(i)),
        }
    }

    pub fn contains(&self, theta: &CategoricalParam) -> bool {
        self.index_of(theta).is_some()
    }

    pub fn get(&self, idx: &BigUint) -> Result<CategoricalParam> {
        match &self.members {
            Members::Compositions { active } => {
                let sub = unrank_param(idx, active.len(), self.tau)?;
                let mut counts = vec![0; self.dim()];
                for (k, &i) in active.iter().enumerate() {
                    counts[i] = sub.count(k);
                }
                Ok(CategoricalParam::from_counts_unchecked(self.tau, counts))
            }
            Members::Explicit { list, .. } => idx
                .to_usize()
                .and_then(|i| list.get(i).cloned())
                .ok_or_else(|| Error::IndexOutOfRange {
                    index: idx.to_string(),
                    size: list.len().to_string(),
                }),
        }
    }

    /// Members in index order, refusing when the space exceeds `cap`.
    pub fn enumerate(&self, cap: u64) -> Result<Vec<CategoricalParam>> {
        match &self.members {
            Members::Explicit { list, .. } => {
                check_cap("parameter space", &BigUint::from(list.len()), cap)?;
                Ok(list.clone())
            }
            Members::Compositions { active } => {
                let sub = crate::param::enumerate_params(active.len(), self.tau, cap)?;
                Ok(sub
                    .into_iter()
                    .map(|s| {
                        let mut counts = vec![0; self.dim()];
                        for (k, &i) in active.iter().enumerate() {
                            counts[i] = s.count(k);
                        }
                        CategoricalParam::from_counts_unchecked(self.tau, counts)
                    })
                    .collect())
            }
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CategoricalParam> {
        let n = self.len();
        if n == BigUint::ZERO {
            return Err(Error::EmptyResult("empty parameter space".into()));
        }
        self.get(&rng.gen_biguint_below(&n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implicit_cardinality_and_lookup() {
        let sp = ParameterSpace::numbered(3, 4).unwrap();
        assert_eq!(sp.len(), BigUint::from(15u32));
        let all = sp.enumerate(100).unwrap();
        for (i, t) in all.iter().enumerate() {
            assert_eq!(sp.index_of(t), Some(BigUint::from(i)));
            assert_eq!(&sp.get(&BigUint::from(i)).unwrap(), t);
        }
    }

    #[test]
    fn restricted_support() {
        let sp = ParameterSpace::compositions_over(
            vec!["a".into(), "b".into(), "c".into()],
            2,
            vec![2, 0],
        )
        .unwrap();
        assert_eq!(sp.len(), BigUint::from(3u32));
        let all = sp.enumerate(10).unwrap();
        assert!(all.iter().all(|t| t.count(1) == 0));
        let off = CategoricalParam::new(2, vec![1, 1, 0]).unwrap();
        assert!(!sp.contains(&off));
        assert!(sp.contains(&all[1]));
    }

    #[test]
    fn explicit_rejects_duplicates() {
        let a = CategoricalParam::new(1, vec![1, 0]).unwrap();
        let cats = vec!["x".to_string(), "y".to_string()];
        assert!(ParameterSpace::explicit(cats.clone(), 1, vec![a.clone(), a.clone()]).is_err());
        let sp = ParameterSpace::explicit(cats, 1, vec![a.clone()]).unwrap();
        assert!(sp.contains(&a));
    }
}
