//! Privacy/distortion curves over a hyperparameter grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::leakage::{sml_bruteforce, sml_deterministic, LeakageOptions};
use crate::mechanism::{materialize, rng_for, Mechanism};
use crate::mechanisms::maxl::{maxl_build, qm_style_candidates};
use crate::mechanisms::qm::QmFraction;
use crate::mechanisms::rr::{Boost, RrMechanism, RrSupport};
use crate::param::{CategoricalParam, DEFAULT_ENUM_CAP};
use crate::prob::{to_f64, LogBase};
use crate::secret::{build_partition, FractionOfCategory};
use crate::space::ParameterSpace;
use crate::tradeoff::closed_form::{
    qm_distortion_closed, qm_privacy_closed, rr_distortion_closed, rr_privacy_closed, TabularScale,
};
use crate::tradeoff::distortion::{distortion_exact, distortion_mc};
use crate::tradeoff::mismatch::{mismatch_bounds, MechKind, MismatchInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rr,
    Qm,
    Maxl,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rr => "rr",
            Family::Qm => "qm",
            Family::Maxl => "maxl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointMethod {
    ClosedForm,
    ExactEnum,
    MonteCarlo,
}

impl PointMethod {
    pub fn name(self) -> &'static str {
        match self {
            PointMethod::ClosedForm => "closed_form",
            PointMethod::ExactEnum => "exact_enum",
            PointMethod::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub mechanism: String,
    /// ε in nats for RR, the interval I for QM and MaxL.
    pub hyperparam: f64,
    pub privacy: Option<f64>,
    pub privacy_lo: Option<f64>,
    pub privacy_hi: Option<f64>,
    pub distortion: Option<f64>,
    pub distortion_lo: Option<f64>,
    pub distortion_hi: Option<f64>,
    pub method: PointMethod,
    pub error: Option<String>,
}

impl TradeoffPoint {
    fn new(family: Family, h: f64, method: PointMethod) -> Self {
        TradeoffPoint {
            mechanism: family.name().into(),
            hyperparam: h,
            privacy: None,
            privacy_lo: None,
            privacy_hi: None,
            distortion: None,
            distortion_lo: None,
            distortion_hi: None,
            method,
            error: None,
        }
    }

    fn failed(family: Family, h: f64, e: Error) -> Self {
        let mut p = Self::new(family, h, PointMethod::ClosedForm);
        p.error = Some(e.to_string());
        p
    }

    fn note(&mut self, e: Error) {
        let msg = e.to_string();
        self.error = Some(match self.error.take() {
            Some(prev) => format!("{prev}; {msg}"),
            None => msg,
        });
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub scale: TabularScale,
    pub base: LogBase,
    /// Enumeration cap for exact evaluation.
    pub cap: u64,
    pub seed: u64,
    pub mc_samples: usize,
}

impl SweepConfig {
    pub fn new(scale: TabularScale) -> Self {
        SweepConfig { scale, base: LogBase::Two, cap: DEFAULT_ENUM_CAP, seed: 0, mc_samples: 20_000 }
    }

    fn opts(&self) -> LeakageOptions {
        LeakageOptions { base: self.base, cap: self.cap, jobs: None }
    }

    fn matched_space(&self) -> Result<ParameterSpace> {
        ParameterSpace::numbered(self.scale.d0, self.scale.tau)
    }
}

/// Parameters that put the whole non-secret mass on one category: the
/// worst-case inputs used for Monte Carlo distortion.
fn extreme_inputs(d: usize, tau: u64) -> Vec<CategoricalParam> {
    let mut out = Vec::new();
    for l in 0..=tau {
        for j in 1..d {
            let mut c = vec![0; d];
            c[0] = l;
            c[j] = tau - l;
            out.push(CategoricalParam::from_counts_unchecked(tau, c));
        }
    }
    out
}

fn rr_point(cfg: &SweepConfig, eps: f64) -> Result<TradeoffPoint> {
    let sc = &cfg.scale;
    let boost = Boost::from_epsilon(eps)?;
    if sc.is_matched() {
        let mut p = TradeoffPoint::new(Family::Rr, eps, PointMethod::ClosedForm);
        p.privacy = Some(rr_privacy_closed(sc, &boost, cfg.base));
        p.distortion = Some(to_f64(&rr_distortion_closed(sc, &boost)));
        return Ok(p);
    }
    let mut p = TradeoffPoint::new(Family::Rr, eps, PointMethod::ExactEnum);
    match mismatch_bounds(&MechKind::Rr(boost.clone()), sc, cfg.base) {
        Ok(b) => {
            p.privacy_lo = Some(b.privacy.lo);
            p.privacy_hi = Some(b.privacy.hi);
            p.distortion_lo = Some(to_f64(&b.distortion.0));
            p.distortion_hi = Some(to_f64(&b.distortion.1));
        }
        Err(e) => p.note(e),
    }
    let inst = MismatchInstance::new(*sc, cfg.cap);
    let exact = inst.and_then(|inst| {
        let pol = materialize(&inst.rr(boost.clone()), &inst.labels())?;
        let d = to_f64(&distortion_exact(&pol)?.0);
        let v = sml_bruteforce(&pol, &inst.partition, &cfg.opts()).ok().map(|r| r.sml);
        Ok((v, d))
    });
    match exact {
        Ok((v, d)) => {
            p.privacy = v;
            p.distortion = Some(d);
        }
        Err(_) => {
            let total = sc.d_star + sc.d1;
            let mech = RrMechanism {
                boost,
                support: RrSupport::EstimatedUnionInput {
                    categories: (0..total).map(|i| format!("c{i}")).collect(),
                    tau: sc.tau,
                    estimated: (0..sc.d0).chain(sc.d_star..total).collect(),
                },
                cap: cfg.cap,
            };
            // point masses on feasible categories
            let cands: Vec<CategoricalParam> = (0..sc.d_star)
                .map(|j| {
                    let mut c = vec![0; total];
                    c[j] = sc.tau;
                    CategoricalParam::from_counts_unchecked(sc.tau, c)
                })
                .collect();
            let est = distortion_mc(&mech, &cands, cfg.mc_samples, cfg.seed)?;
            p.distortion = Some(est.estimate);
            p.method = PointMethod::MonteCarlo;
        }
    }
    Ok(p)
}

fn qm_point(cfg: &SweepConfig, interval: usize) -> Result<TradeoffPoint> {
    let sc = &cfg.scale;
    let h = interval as f64;
    if interval == 0 {
        return Err(Error::InvalidArgument("interval must be positive".into()));
    }
    if sc.is_matched() {
        let mut p = TradeoffPoint::new(Family::Qm, h, PointMethod::ClosedForm);
        p.privacy = Some(qm_privacy_closed(sc.s, interval, cfg.base));
        if sc.s != sc.tau as usize + 1 {
            p.note(Error::InvalidArgument("QM distortion needs the fraction secret (s = tau+1)".into()));
            return Ok(p);
        }
        // The distortion closed form is exact only for two categories.
        if sc.d0 == 2 {
            p.distortion = Some(to_f64(&qm_distortion_closed(sc.tau, 2, interval)?));
            return Ok(p);
        }
        let sp = cfg.matched_space()?;
        let mech = QmFraction::new(sp.categories().to_vec(), sc.tau, 0, interval)?;
        match sp.enumerate(cfg.cap) {
            Ok(ins) => {
                let labels: Vec<Label> = ins.into_iter().map(Label::Param).collect();
                p.distortion = Some(to_f64(&distortion_exact(&materialize(&mech, &labels)?)?.0));
                p.method = PointMethod::ExactEnum;
            }
            Err(_) => {
                let est = distortion_mc(&mech, &extreme_inputs(sc.d0, sc.tau), cfg.mc_samples, cfg.seed)?;
                p.distortion = Some(est.estimate);
                p.method = PointMethod::MonteCarlo;
            }
        }
        return Ok(p);
    }
    let mut p = TradeoffPoint::new(Family::Qm, h, PointMethod::ExactEnum);
    match mismatch_bounds(&MechKind::Qm(interval), sc, cfg.base) {
        Ok(b) => {
            p.privacy_lo = Some(b.privacy.lo);
            p.privacy_hi = Some(b.privacy.hi);
            p.distortion_lo = Some(to_f64(&b.distortion.0));
            p.distortion_hi = Some(to_f64(&b.distortion.1));
        }
        Err(e) => p.note(e),
    }
    match MismatchInstance::new(*sc, cfg.cap).and_then(|inst| {
        let pol = materialize(&inst.qm(interval)?, &inst.labels())?;
        let d = to_f64(&distortion_exact(&pol)?.0);
        let v = sml_bruteforce(&pol, &inst.partition, &cfg.opts()).ok().map(|r| r.sml);
        Ok((v, d))
    }) {
        Ok((v, d)) => {
            p.privacy = v;
            p.distortion = Some(d);
        }
        Err(e) => p.note(e),
    }
    Ok(p)
}

fn maxl_point(cfg: &SweepConfig, interval: usize) -> Result<TradeoffPoint> {
    let sc = &cfg.scale;
    if !sc.is_matched() {
        return Err(Error::InvalidArgument("MaxL sweeps support matched supports only".into()));
    }
    let sp = cfg.matched_space()?;
    let cands = qm_style_candidates(&sp, 0, interval, &mut rng_for(cfg.seed, interval as u64))?;
    let (ins, part) = build_partition(&sp, &FractionOfCategory { category: 0 }, cfg.cap)?;
    let mech = maxl_build(&ins, &cands)?;
    let labels: Vec<Label> = ins.into_iter().map(Label::Param).collect();
    let pol = materialize(&mech as &dyn Mechanism, &labels)?;
    let mut p = TradeoffPoint::new(Family::Maxl, interval as f64, PointMethod::ExactEnum);
    p.privacy = Some(sml_deterministic(&pol, &part, &cfg.opts())?.sml);
    p.distortion = Some(to_f64(&distortion_exact(&pol)?.0));
    Ok(p)
}

/// One point per grid value. Failures are recorded on the point, never raised.
pub fn tradeoff_sweep(family: Family, cfg: &SweepConfig, grid: &[f64]) -> Vec<TradeoffPoint> {
    use rayon::prelude::*;
    grid.par_iter()
        .map(|&h| {
            let res = match family {
                Family::Rr => rr_point(cfg, h),
                Family::Qm | Family::Maxl if h.fract() != 0.0 || h < 1.0 => {
                    Err(Error::InvalidArgument(format!("interval {h} is not a positive integer")))
                }
                Family::Qm => qm_point(cfg, h as usize),
                Family::Maxl => maxl_point(cfg, h as usize),
            };
            res.unwrap_or_else(|e| TradeoffPoint::failed(family, h, e))
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub const CSV_HEADER: [&str; 10] = [
    "mechanism",
    "hyperparam",
    "privacy",
    "privacy_lo",
    "privacy_hi",
    "distortion",
    "distortion_lo",
    "distortion_hi",
    "method",
    "error",
];

pub fn write_csv<W: Write>(points: &[TradeoffPoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for p in points {
        wr.write_record([
            p.mechanism.clone(),
            format!("{}", p.hyperparam),
            cell(p.privacy),
            cell(p.privacy_lo),
            cell(p.privacy_hi),
            cell(p.distortion),
            cell(p.distortion_lo),
            cell(p.distortion_hi),
            p.method.name().to_string(),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
