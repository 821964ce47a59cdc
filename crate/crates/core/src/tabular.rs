//! Tabular datasets: ingestion, attribute-combination supports, the categorical
//! parameter of a dataset, secret specifications and released datasets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::mechanism::{rng_for, Mechanism};
use crate::param::CategoricalParam;
use crate::prob::{fmt_rational, ratio, Rational};
use crate::secret::{FractionOfCategory, SecretFunction, SecretValue};
use crate::tradeoff::closed_form::TabularScale;

/// One value per selected column.
pub type Combo = Vec<String>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Combo>,
    /// Rows dropped for missing values.
    pub dropped: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Row count before missing-value filtering.
    pub fn n_raw(&self) -> usize {
        self.rows.len() + self.dropped
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for r in &self.rows {
            wr.write_record(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Cell values treated as missing (compared after trimming).
    pub missing: Vec<String>,
    pub trim: bool,
    /// When false, columns are named col0, col1, ...
    pub has_header: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { missing: vec![String::new(), "?".into()], trim: true, has_header: true }
    }
}

pub fn ingest_csv(path: &Path, columns: Option<&[String]>, opts: &IngestOptions) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ingest_reader(f, columns, opts)
}

/// Reads a CSV, keeps the selected columns (all when `None`) and drops rows with a
/// missing value in any of them. Blank lines are skipped.
pub fn ingest_reader<R: Read>(r: R, columns: Option<&[String]>, opts: &IngestOptions) -> Result<Dataset> {
    let mut rd = csv::ReaderBuilder::new().has_headers(opts.has_header).from_reader(r);
    let clean = |s: &str| if opts.trim { s.trim().to_string() } else { s.to_string() };
    let mut all_cols: Vec<String> =
        if opts.has_header { rd.headers()?.iter().map(clean).collect() } else { Vec::new() };
    let mut rows = Vec::new();
    let mut dropped = 0;
    let mut idx: Option<Vec<usize>> = None;
    for rec in rd.records() {
        let rec = rec?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if all_cols.is_empty() {
            all_cols = (0..rec.len()).map(|i| format!("col{i}")).collect();
        }
        let idx = match &idx {
            Some(i) => i,
            None => idx.insert(select(&all_cols, columns)?),
        };
        let row: Combo = idx.iter().map(|&i| clean(rec.get(i).unwrap_or(""))).collect();
        if row.iter().any(|c| opts.missing.iter().any(|m| m == c)) {
            dropped += 1;
        } else {
            rows.push(row);
        }
    }
    let idx = match idx {
        Some(i) => i,
        None => select(&all_cols, columns)?,
    };
    if rows.is_empty() {
        return Err(Error::EmptyResult(format!("no complete rows ({dropped} dropped)")));
    }
    Ok(Dataset { columns: idx.iter().map(|&i| all_cols[i].clone()).collect(), rows, dropped })
}

fn select(all: &[String], wanted: Option<&[String]>) -> Result<Vec<usize>> {
    match wanted {
        None => Ok((0..all.len()).collect()),
        Some(w) => w
            .iter()
            .map(|c| all.iter().position(|a| a == c).ok_or_else(|| Error::UnknownColumn(c.clone())))
            .collect(),
    }
}

/// Γ with counts, plus the optional true feasible set Γ* and the data holder's
/// estimate Γ̂*. Parameters are indexed over `categories`, the sorted union Γ ∪ Γ̂*.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupportSets {
    pub columns: Vec<String>,
    pub gamma: Vec<(Combo, u64)>,
    pub gamma_star: Option<Vec<Combo>>,
    pub gamma_hat_star: Option<Vec<Combo>>,
    pub categories: Vec<Combo>,
}

/// Γ with occurrence counts, sorted by combo.
pub fn extract_support(ds: &Dataset) -> SupportSets {
    let mut counts: BTreeMap<&Combo, u64> = BTreeMap::new();
    for r in &ds.rows {
        *counts.entry(r).or_default() += 1;
    }
    let gamma: Vec<(Combo, u64)> = counts.into_iter().map(|(c, k)| (c.clone(), k)).collect();
    let categories = gamma.iter().map(|(c, _)| c.clone()).collect();
    SupportSets { columns: ds.columns.clone(), gamma, gamma_star: None, gamma_hat_star: None, categories }
}

fn dedup_sorted(v: Vec<Combo>) -> Vec<Combo> {
    v.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

impl SupportSets {
    /// Attaches Γ* and Γ̂*. Fails when a combo has the wrong arity or Γ ⊄ Γ*.
    pub fn with_supports(mut self, gamma_star: Option<Vec<Combo>>, gamma_hat_star: Option<Vec<Combo>>) -> Result<Self> {
        let arity = self.columns.len();
        for c in gamma_star.iter().chain(gamma_hat_star.iter()).flatten() {
            if c.len() != arity {
                return Err(Error::SupportViolation(format!("combo {c:?} has arity {}, expected {arity}", c.len())));
            }
        }
        let gamma_star = gamma_star.map(dedup_sorted);
        let gamma_hat_star = gamma_hat_star.map(dedup_sorted);
        if let Some(gs) = &gamma_star {
            let set: BTreeSet<&Combo> = gs.iter().collect();
            if let Some((c, _)) = self.gamma.iter().find(|(c, _)| !set.contains(c)) {
                return Err(Error::SupportViolation(format!("observed combo {c:?} is not in the feasible set")));
            }
        }
        let mut cats: BTreeSet<Combo> = self.gamma.iter().map(|(c, _)| c.clone()).collect();
        cats.extend(gamma_hat_star.iter().flatten().cloned());
        self.categories = cats.into_iter().collect();
        self.gamma_star = gamma_star;
        self.gamma_hat_star = gamma_hat_star;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.gamma.len()
    }

    /// Γ*, defaulting to Γ̂* and then Γ.
    pub fn feasible(&self) -> Vec<Combo> {
        self.gamma_star.clone().unwrap_or_else(|| self.estimated())
    }

    /// Γ̂*, defaulting to Γ.
    pub fn estimated(&self) -> Vec<Combo> {
        self.gamma_hat_star.clone().unwrap_or_else(|| self.gamma.iter().map(|(c, _)| c.clone()).collect())
    }

    /// Γ̂*₀ = Γ̂* ∩ Γ*.
    pub fn hat0(&self) -> Vec<Combo> {
        let fs: BTreeSet<Combo> = self.feasible().into_iter().collect();
        self.estimated().into_iter().filter(|c| fs.contains(c)).collect()
    }

    /// Γ̂*₁ = Γ̂* ∖ Γ*.
    pub fn hat1(&self) -> Vec<Combo> {
        let fs: BTreeSet<Combo> = self.feasible().into_iter().collect();
        self.estimated().into_iter().filter(|c| !fs.contains(c)).collect()
    }

    pub fn scale(&self, tau: u64, s: usize) -> TabularScale {
        TabularScale { tau, d0: self.hat0().len(), d1: self.hat1().len(), d_star: self.feasible().len(), s }
    }

    pub fn index_of(&self, combo: &Combo) -> Option<usize> {
        self.categories.binary_search(combo).ok()
    }

    /// Printable category names: the combo values joined with '|'.
    pub fn category_names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.join("|")).collect()
    }

    /// Indices into `categories` of the combos in Γ̂*.
    pub fn estimated_indices(&self) -> Vec<usize> {
        self.estimated().iter().filter_map(|c| self.index_of(c)).collect()
    }

    /// Categories whose combo agrees with every `column = value` pair.
    pub fn matching(&self, sel: &BTreeMap<String, String>) -> Result<Vec<usize>> {
        let cols = sel
            .iter()
            .map(|(k, v)| {
                self.columns.iter().position(|c| c == k).map(|i| (i, v)).ok_or_else(|| Error::UnknownColumn(k.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.categories.len())
            .filter(|&i| cols.iter().all(|(j, v)| self.categories[i][*j] == **v))
            .collect())
    }
}

/// Counts over `categories` at precision τ (default n). Rescaling must be exact.
pub fn to_param(sup: &SupportSets, tau: Option<u64>) -> Result<CategoricalParam> {
    let n: u64 = sup.gamma.iter().map(|(_, k)| k).sum();
    let tau = tau.unwrap_or(n);
    let mut counts = vec![0u64; sup.categories.len()];
    for (c, k) in &sup.gamma {
        let i = sup.index_of(c).expect("observed combos are categories");
        let scaled = u128::from(*k) * u128::from(tau);
        if scaled % u128::from(n) != 0 {
            return Err(Error::NonIntegralRescale { n, tau });
        }
        counts[i] = (scaled / u128::from(n)) as u64;
    }
    CategoricalParam::new(tau, counts)
}

/// Which statistic of θ is secret. Categories are picked by column/value selectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SecretSpec {
    /// Mass of the matching categories; values l/τ, s = τ+1.
    FractionOfCategory { category: BTreeMap<String, String> },
    /// P(target_a | group_a) − P(target_b | group_b), optionally bucketed over [−1, 1].
    DifferenceOfConditionalFractions {
        group_a: BTreeMap<String, String>,
        target_a: BTreeMap<String, String>,
        group_b: BTreeMap<String, String>,
        target_b: BTreeMap<String, String>,
        #[serde(default)]
        buckets: Option<usize>,
    },
    /// Explicit secret id per parameter (counts over `categories`).
    Custom { values: Vec<CustomEntry> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomEntry {
    pub counts: Vec<u64>,
    pub secret: String,
}

/// Mass of a set of categories, ranked like [`FractionOfCategory`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MassOf {
    pub categories: Vec<usize>,
}

impl SecretFunction for MassOf {
    fn secret(&self, theta: &CategoricalParam) -> Result<SecretValue> {
        Ok(FractionOfCategory::value(self.categories.iter().map(|&i| theta.count(i)).sum(), theta.tau()))
    }

    fn declared(&self, tau: u64) -> Option<Vec<SecretValue>> {
        Some((0..=tau).map(|l| FractionOfCategory::value(l, tau)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalDifference {
    pub group_a: Vec<usize>,
    pub target_a: Vec<usize>,
    pub group_b: Vec<usize>,
    pub target_b: Vec<usize>,
    pub buckets: Option<usize>,
}

impl ConditionalDifference {
    fn frac(theta: &CategoricalParam, group: &[usize], target: &[usize], which: &str) -> Result<Rational> {
        let den: u64 = group.iter().map(|&i| theta.count(i)).sum();
        if den == 0 {
            return Err(Error::ZeroDenominator(format!("group {which} has no mass in {theta}")));
        }
        let num: u64 = target.iter().filter(|i| group.contains(i)).map(|&i| theta.count(i)).sum();
        Ok(ratio(num, den))
    }

    pub fn raw(&self, theta: &CategoricalParam) -> Result<Rational> {
        Ok(Self::frac(theta, &self.group_a, &self.target_a, "A")? - Self::frac(theta, &self.group_b, &self.target_b, "B")?)
    }

    fn bucket_value(k: usize, b: usize) -> SecretValue {
        let edge = |j: usize| Rational::new(BigInt::from(2 * j as i64 - k as i64), BigInt::from(k as i64));
        let close = if b + 1 == k { "]" } else { ")" };
        SecretValue::ranked(format!("[{},{}{close}", fmt_rational(&edge(b)), fmt_rational(&edge(b + 1))), b + 1)
    }
}

impl SecretFunction for ConditionalDifference {
    fn secret(&self, theta: &CategoricalParam) -> Result<SecretValue> {
        let v = self.raw(theta)?;
        match self.buckets {
            None => Ok(SecretValue::new(fmt_rational(&v))),
            Some(k) => {
                // bucket = floor((v + 1)·k/2), the top edge folded into the last bucket
                let pos = (v + Rational::from_integer(1.into())) * Rational::from_integer(BigInt::from(k)) / ratio(2, 1);
                let b = pos.floor().to_integer().to_usize().unwrap_or(0).min(k - 1);
                Ok(Self::bucket_value(k, b))
            }
        }
    }
}

pub struct CustomSecret {
    map: HashMap<Vec<u64>, String>,
}

impl SecretFunction for CustomSecret {
    fn secret(&self, theta: &CategoricalParam) -> Result<SecretValue> {
        let mut c = theta.counts().to_vec();
        while c.last() == Some(&0) && !self.map.contains_key(&c) {
            c.pop();
        }
        self.map
            .get(&c)
            .or_else(|| self.map.get(theta.counts()))
            .map(SecretValue::new)
            .ok_or_else(|| Error::NotInSpace(format!("no custom secret for {theta}")))
    }
}

fn nonempty(v: Vec<usize>, what: &str) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument(format!("selector for {what} matches no category")));
    }
    Ok(v)
}

impl SecretSpec {
    /// Binds selectors to category indices of `sup`.
    pub fn resolve(&self, sup: &SupportSets) -> Result<Box<dyn SecretFunction>> {
        Ok(match self {
            SecretSpec::FractionOfCategory { category } => {
                Box::new(MassOf { categories: nonempty(sup.matching(category)?, "category")? })
            }
            SecretSpec::DifferenceOfConditionalFractions { group_a, target_a, group_b, target_b, buckets } => {
                if *buckets == Some(0) {
                    return Err(Error::InvalidArgument("buckets must be positive".into()));
                }
                Box::new(ConditionalDifference {
                    group_a: nonempty(sup.matching(group_a)?, "group_a")?,
                    target_a: sup.matching(target_a)?,
                    group_b: nonempty(sup.matching(group_b)?, "group_b")?,
                    target_b: sup.matching(target_b)?,
                    buckets: *buckets,
                })
            }
            SecretSpec::Custom { values } => {
                Box::new(CustomSecret { map: values.iter().map(|e| (e.counts.clone(), e.secret.clone())).collect() })
            }
        })
    }

    /// Number of secret values s when it is known without enumeration.
    pub fn s_hint(&self, tau: u64) -> Option<usize> {
        match self {
            SecretSpec::FractionOfCategory { .. } => Some(tau as usize + 1),
            SecretSpec::DifferenceOfConditionalFractions { buckets, .. } => *buckets,
            SecretSpec::Custom { values } => Some(values.iter().map(|v| &v.secret).collect::<BTreeSet<_>>().len()),
        }
    }
}

pub fn secret_value(theta: &CategoricalParam, spec: &SecretSpec, sup: &SupportSets) -> Result<SecretValue> {
    spec.resolve(sup)?.secret(theta)
}

/// Draws θ′ once from `mech` at θ (stream 0), emits θ′ counts of each combo in
/// category order and shuffles the rows (stream 1). Requires τ = n.
pub fn release_dataset(
    sup: &SupportSets,
    theta: &CategoricalParam,
    mech: &dyn Mechanism,
    seed: u64,
) -> Result<(CategoricalParam, Dataset)> {
    let n: u64 = sup.gamma.iter().map(|(_, k)| k).sum();
    if theta.tau() != n {
        return Err(Error::InvalidArgument(format!("release needs tau = n = {n}, got {}", theta.tau())));
    }
    let out = mech.sample(&Label::Param(theta.clone()), &mut rng_for(seed, 0))?;
    let released = out
        .as_param()
        .cloned()
        .ok_or_else(|| Error::AlphabetMismatch(format!("mechanism released {out}, not a parameter")))?;
    if released.tau() != n || released.counts().len() > sup.categories.len() {
        return Err(Error::AlphabetMismatch(format!("released {released} does not fit the categories")));
    }
    let mut rows = Vec::with_capacity(n as usize);
    for (i, &k) in released.counts().iter().enumerate() {
        for _ in 0..k {
            rows.push(sup.categories[i].clone());
        }
    }
    rows.shuffle(&mut rng_for(seed, 1));
    Ok((released, Dataset { columns: sup.columns.clone(), rows, dropped: 0 }))
}

/// Exact rational fraction of rows matching `sel`; a convenience for checks.
pub fn row_fraction(ds: &Dataset, sel: &BTreeMap<String, String>) -> Result<Rational> {
    let cols = sel
        .iter()
        .map(|(k, v)| ds.columns.iter().position(|c| c == k).map(|i| (i, v)).ok_or_else(|| Error::UnknownColumn(k.clone())))
        .collect::<Result<Vec<_>>>()?;
    if ds.rows.is_empty() {
        return Ok(Rational::zero());
    }
    let hit = ds.rows.iter().filter(|r| cols.iter().all(|(j, v)| r[*j] == **v)).count();
    Ok(ratio(hit as u64, ds.n() as u64))
}
