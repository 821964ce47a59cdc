//! `statleak` command-line front end.
//!
//! Every command writes JSON (or CSV) with a `meta` block holding the tool version,
//! a SHA-256 hash of the configuration and inputs, and the seed. Failures print
//! `{"error": {"code": ..., "message": ...}}` on stderr and exit non-zero.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use statleak::error::{Error, Result};
use statleak::flow::{build_sml_network, min_cost_flow};
use statleak::label::Label;
use statleak::leakage::{ldp_parameter, sandwich_bounds, sml, sml_bruteforce, sml_deterministic, LdpRatio, LeakageOptions};
use statleak::mechanism::materialize;
use statleak::mechanisms::config::{BuildContext, MechanismConfig};
use statleak::mechanisms::rr::Boost;
use statleak::param::DEFAULT_ENUM_CAP;
use statleak::policy::PolicyMatrix;
use statleak::prob::{fmt_rational, parse_rational, LogBase};
use statleak::secret::{build_partition, FractionOfCategory, SecretFunction, SecretPartition, SecretValue};
use statleak::space::ParameterSpace;
use statleak::tabular::{extract_support, ingest_csv, release_dataset, to_param, Combo, IngestOptions, SecretSpec, SupportSets};
use statleak::tradeoff::closed_form::TabularScale;
use statleak::tradeoff::mismatch::{mismatch_bounds, qm_decay_threshold, rr_robust_boost_cap, rr_robust_epsilon_cap, MechKind};
use statleak::tradeoff::sweep::{tradeoff_sweep, write_csv, Family, SweepConfig};

#[derive(Parser, Debug)]
#[command(name = "statleak", version, about = "Exact statistic maximal leakage for discrete release mechanisms")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Logarithm base for reported leakage: 2 or e.
    #[arg(long, global = true, default_value = "2")]
    log_base: LogBase,
    /// Largest enumeration (spaces, prior assignments) before giving up.
    #[arg(long, global = true, default_value_t = DEFAULT_ENUM_CAP)]
    enum_cap: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Auto,
    Flow,
    Brute,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FamilyArg {
    Rr,
    Qm,
    Maxl,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read a CSV and emit its categories, parameter and scale.
    Ingest(IngestArgs),
    /// Compute the leakage of a policy or a configured mechanism.
    Sml(SmlArgs),
    /// Release a synthetic dataset through a mechanism.
    Release(ReleaseArgs),
    /// Privacy/distortion curve over a hyperparameter grid.
    Tradeoff(TradeoffArgs),
    /// Leakage and distortion bounds under support mismatch.
    Bounds(BoundsArgs),
    /// Dump the min-cost-flow network of a deterministic policy as DOT.
    FlowDebug(FlowDebugArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    csv: PathBuf,
    /// Comma-separated columns to keep (default: all).
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// JSON list of feasible combos (each a list of cell values).
    #[arg(long)]
    gamma_star: Option<PathBuf>,
    /// JSON list of the estimated feasible combos.
    #[arg(long)]
    gamma_hat_star: Option<PathBuf>,
    /// Treat the first row as data.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Secret specification (JSON) used to report s.
    #[arg(long)]
    secret: Option<PathBuf>,
    /// Precision; defaults to the row count. Must rescale exactly.
    #[arg(long)]
    tau: Option<u64>,
    /// Directory for space.json and scale.json (default: print to stdout).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SmlArgs {
    /// Policy JSON: {"inputs", "outputs", "rows"} and optionally "secrets" (one id per input).
    #[arg(long, conflicts_with = "mechanism")]
    policy: Option<PathBuf>,
    /// JSON array with the secret id of each policy input.
    #[arg(long, requires = "policy")]
    partition: Option<PathBuf>,
    /// Mechanism configuration JSON, evaluated on all parameters with `d` categories at precision `tau`.
    #[arg(long, requires_all = ["d", "tau"])]
    mechanism: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    tau: Option<u64>,
    /// The secret is the fraction of this category.
    #[arg(long, default_value_t = 0)]
    category: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Also report the min-entropy sandwich bounds.
    #[arg(long)]
    sandwich: bool,
    /// Also report the local differential privacy parameter.
    #[arg(long)]
    ldp: bool,
    /// Leave the maximizing prior out of the report.
    #[arg(long)]
    no_witness: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReleaseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    mechanism: PathBuf,
    #[arg(long)]
    secret: PathBuf,
    /// Released CSV.
    #[arg(long)]
    out: PathBuf,
    /// Manifest JSON (default: <out>.manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScaleArgs {
    /// Scale JSON as written by `ingest`; overrides the flags below.
    #[arg(long)]
    scale: Option<PathBuf>,
    #[arg(long)]
    tau: Option<u64>,
    /// Feasible estimated categories.
    #[arg(long)]
    d0: Option<usize>,
    /// Spurious estimated categories.
    #[arg(long, default_value_t = 0)]
    d1: usize,
    /// True feasible categories (default d0).
    #[arg(long)]
    d_star: Option<usize>,
    /// Secret values (default tau+1).
    #[arg(long)]
    s: Option<usize>,
}

impl ScaleArgs {
    fn resolve(&self) -> Result<TabularScale> {
        if let Some(p) = &self.scale {
            let v = read_json(p)?;
            let v = v.get("scale").cloned().unwrap_or(v);
            let sc: TabularScale = serde_json::from_value(v)?;
            sc.validate()?;
            return Ok(sc);
        }
        let (Some(tau), Some(d0)) = (self.tau, self.d0) else {
            return Err(Error::InvalidArgument("give --scale or both --tau and --d0".into()));
        };
        let sc = TabularScale {
            tau,
            d0,
            d1: self.d1,
            d_star: self.d_star.unwrap_or(d0),
            s: self.s.unwrap_or(tau as usize + 1),
        };
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Args, Debug)]
struct TradeoffArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Comma-separated grid: ε in nats for rr ("inf" allowed), intervals for qm and maxl.
    /// Default: every interval 1..=s, or a small ε ladder.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<String>>,
    #[command(flatten)]
    scale: ScaleArgs,
    /// Samples per candidate input when distortion is estimated.
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[command(flatten)]
    scale: ScaleArgs,
    /// RR privacy parameter in nats ("inf" allowed).
    #[arg(long)]
    epsilon: Option<String>,
    /// RR boost e^ε as an exact rational.
    #[arg(long, conflicts_with = "epsilon")]
    boost: Option<String>,
    /// QM interval length.
    #[arg(long)]
    interval: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FlowDebugArgs {
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Solve the flow and highlight the arcs that carry it.
    #[arg(long)]
    solve: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Hashes the parsed command line and every input file read.
struct Ctx {
    g: Global,
    hasher: Sha256,
}

impl Ctx {
    fn read(&mut self, p: &Path) -> Result<Vec<u8>> {
        let b = fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        self.hasher.update((b.len() as u64).to_le_bytes());
        self.hasher.update(&b);
        Ok(b)
    }

    fn json(&mut self, p: &Path) -> Result<Value> {
        let b = self.read(p)?;
        serde_json::from_slice(&b).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
    }

    fn meta(&self) -> Value {
        let h = self.hasher.clone().finalize();
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": h.iter().map(|b| format!("{b:02x}")).collect::<String>(),
            "seed": self.g.seed,
        })
    }

    fn opts(&self) -> LeakageOptions {
        LeakageOptions { base: self.g.log_base, cap: self.g.enum_cap, jobs: self.g.jobs }
    }
}

fn read_json(p: &Path) -> Result<Value> {
    let b = fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    serde_json::from_slice(&b).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
}

fn write_out(out: Option<&Path>, body: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(body)?;
            so.flush()?;
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("json serializes");
    s.push(b'\n');
    s
}

fn load_support(ctx: &mut Ctx, a: &DataArgs) -> Result<(statleak::tabular::Dataset, SupportSets)> {
    ctx.read(&a.csv)?;
    let opts = IngestOptions { has_header: !a.no_header, ..Default::default() };
    let ds = ingest_csv(&a.csv, a.columns.as_deref(), &opts)?;
    let mut combos = |p: &Option<PathBuf>| -> Result<Option<Vec<Combo>>> {
        match p {
            None => Ok(None),
            Some(p) => Ok(Some(serde_json::from_value(ctx.json(p)?)?)),
        }
    };
    let gs = combos(&a.gamma_star)?;
    let ghs = combos(&a.gamma_hat_star)?;
    let sup = extract_support(&ds).with_supports(gs, ghs)?;
    Ok((ds, sup))
}

fn cmd_ingest(ctx: &mut Ctx, a: &IngestArgs) -> Result<()> {
    let (ds, sup) = load_support(ctx, &a.data)?;
    let theta = to_param(&sup, a.tau)?;
    let secret: Option<SecretSpec> = match &a.secret {
        Some(p) => Some(serde_json::from_value(ctx.json(p)?)?),
        None => None,
    };
    if let Some(spec) = &secret {
        spec.resolve(&sup)?;
    }
    let s = secret.as_ref().and_then(|sp| sp.s_hint(theta.tau()));
    let meta = ctx.meta();
    let space = json!({
        "columns": sup.columns,
        "categories": sup.categories,
        "category_names": sup.category_names(),
        "gamma_counts": sup.gamma.iter().map(|(c, k)| json!({"combo": c, "count": k})).collect::<Vec<_>>(),
        "theta": theta,
        "n": ds.n(),
        "n_raw": ds.n_raw(),
        "dropped": ds.dropped,
        "meta": meta,
    });
    let scale = json!({
        "tau": theta.tau(),
        "d": sup.d(),
        "d_star": sup.feasible().len(),
        "d0": sup.hat0().len(),
        "d1": sup.hat1().len(),
        "s": s,
        "meta": meta,
    });
    match &a.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_out(Some(&dir.join("space.json")), &pretty(&space))?;
            write_out(Some(&dir.join("scale.json")), &pretty(&scale))
        }
        None => write_out(None, &pretty(&json!({"space": space, "scale": scale}))),
    }
}

/// The partition from an explicit list of secret ids, one per input.
fn partition_from_ids(ids: &Value, n: usize) -> Result<SecretPartition> {
    let ids: Vec<String> = serde_json::from_value(ids.clone())?;
    if ids.len() != n {
        return Err(Error::InvalidArgument(format!("{} secret ids for {n} inputs", ids.len())));
    }
    SecretPartition::from_values(ids.into_iter().map(SecretValue::new).collect(), None)
}

fn load_policy(ctx: &mut Ctx, policy: &Path, partition: Option<&PathBuf>) -> Result<(PolicyMatrix, SecretPartition)> {
    let v = ctx.json(policy)?;
    let p = PolicyMatrix::from_json(&v)?;
    let ids = match partition {
        Some(f) => ctx.json(f)?,
        None => v
            .get("secrets")
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("policy has no \"secrets\" and no --partition was given".into()))?,
    };
    let part = partition_from_ids(&ids, p.n_inputs())?;
    Ok((p, part))
}

fn cmd_sml(ctx: &mut Ctx, a: &SmlArgs) -> Result<()> {
    let (policy, part) = match (&a.policy, &a.mechanism) {
        (Some(p), None) => load_policy(ctx, p, a.partition.as_ref())?,
        (None, Some(m)) => {
            let cfg = MechanismConfig::from_json(&ctx.json(m)?)?;
            let space = ParameterSpace::numbered(a.d.unwrap(), a.tau.unwrap())?;
            let secret = FractionOfCategory { category: a.category };
            let (members, part) = build_partition(&space, &secret, ctx.g.enum_cap)?;
            let mut bc = BuildContext::new(space);
            bc.fraction_category = Some(a.category);
            bc.secret = Some(Arc::new(secret));
            bc.seed = ctx.g.seed;
            bc.cap = ctx.g.enum_cap;
            let mech = cfg.build(&bc)?;
            let labels: Vec<Label> = members.into_iter().map(Label::Param).collect();
            (materialize(mech.as_ref(), &labels)?, part)
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --policy, --mechanism".into())),
    };
    let o = ctx.opts();
    let rep = match a.method {
        MethodArg::Auto => sml(&policy, &part, &o)?,
        MethodArg::Flow => sml_deterministic(&policy, &part, &o)?,
        MethodArg::Brute => sml_bruteforce(&policy, &part, &o)?,
    };
    let mut out = rep.to_json(&policy, &part);
    if a.no_witness {
        out.as_object_mut().unwrap().remove("argmax_prior");
    }
    if a.sandwich {
        let (lo, hi) = sandwich_bounds(&policy, &part, o.base);
        out["sandwich"] = json!({"lower": lo, "upper": hi});
    }
    if a.ldp {
        out["ldp"] = match ldp_parameter(&policy, &part)? {
            LdpRatio::Finite(r) => json!({"ratio": fmt_rational(&r), "mu": LdpRatio::Finite(r).mu(o.base)}),
            LdpRatio::Infinite => json!({"ratio": "inf", "mu": "inf"}),
        };
    }
    out["secrets"] = json!(part.s());
    out["meta"] = ctx.meta();
    let body = match ctx.g.format {
        Format::Json => pretty(&out),
        Format::Csv => format!(
            "sml,raw_sum,method,log_base,config_hash,seed\n{},{},{},{},{},{}\n",
            rep.sml,
            fmt_rational(&rep.raw_sum),
            rep.method.name(),
            o.base.name(),
            out["meta"]["config_hash"].as_str().unwrap(),
            ctx.g.seed
        )
        .into_bytes(),
    };
    write_out(a.out.as_deref(), &body)
}

fn cmd_release(ctx: &mut Ctx, a: &ReleaseArgs) -> Result<()> {
    let (_, sup) = load_support(ctx, &a.data)?;
    let cfg_json = ctx.json(&a.mechanism)?;
    let cfg = MechanismConfig::from_json(&cfg_json)?;
    let spec: SecretSpec = serde_json::from_value(ctx.json(&a.secret)?)?;
    let theta = to_param(&sup, None)?;
    let secret: Arc<dyn SecretFunction> = Arc::from(spec.resolve(&sup)?);
    let space = ParameterSpace::compositions(sup.category_names(), theta.tau())?;
    let mut bc = BuildContext::new(space.clone());
    if let SecretSpec::FractionOfCategory { category } = &spec {
        if let [c] = sup.matching(category)?[..] {
            bc.fraction_category = Some(c);
        }
    }
    if sup.gamma_hat_star.is_some() {
        bc.estimated = Some(sup.estimated_indices());
    }
    bc.secret = Some(secret.clone());
    bc.seed = ctx.g.seed;
    bc.cap = ctx.g.enum_cap;
    let mech = cfg.build(&bc)?;
    let (released, ds) = release_dataset(&sup, &theta, mech.as_ref(), ctx.g.seed)?;
    let mut csv = Vec::new();
    ds.write_csv(&mut csv)?;
    write_out(Some(&a.out), &csv)?;
    // leakage of the configured mechanism, when the space is small enough
    let leak = build_partition(&space, secret.as_ref(), ctx.g.enum_cap).and_then(|(members, part)| {
        let labels: Vec<Label> = members.into_iter().map(Label::Param).collect();
        let pol = materialize(mech.as_ref(), &labels)?;
        sml(&pol, &part, &ctx.opts()).map(|r| r.to_json(&pol, &part))
    });
    let manifest = json!({
        "theta": theta,
        "theta_released": released,
        "categories": sup.categories,
        "mechanism": cfg_json,
        "secret": spec,
        "seed": ctx.g.seed,
        "rows": ds.n(),
        "released_csv": a.out,
        "sml": leak.as_ref().ok(),
        "sml_error": leak.as_ref().err().map(|e| json!({"code": e.code(), "message": e.to_string()})),
        "meta": ctx.meta(),
    });
    let path = a.manifest.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".manifest.json");
        PathBuf::from(p)
    });
    write_out(Some(&path), &pretty(&manifest))
}

fn parse_grid(family: Family, grid: &Option<Vec<String>>, sc: &TabularScale) -> Result<Vec<f64>> {
    match grid {
        None => Ok(match family {
            Family::Rr => vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, f64::INFINITY],
            _ => (1..=sc.s).map(|i| i as f64).collect(),
        }),
        Some(v) => v
            .iter()
            .map(|s| match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                t => t.parse::<f64>().map_err(|_| Error::Parse(format!("grid value {s:?}"))),
            })
            .collect(),
    }
}

fn family_of(f: FamilyArg) -> Family {
    match f {
        FamilyArg::Rr => Family::Rr,
        FamilyArg::Qm => Family::Qm,
        FamilyArg::Maxl => Family::Maxl,
    }
}

fn cmd_tradeoff(ctx: &mut Ctx, a: &TradeoffArgs) -> Result<()> {
    if let Some(p) = &a.scale.scale {
        ctx.read(p)?;
    }
    let sc = a.scale.resolve()?;
    let family = family_of(a.family);
    let grid = parse_grid(family, &a.grid, &sc)?;
    let cfg = SweepConfig {
        scale: sc,
        base: ctx.g.log_base,
        cap: ctx.g.enum_cap,
        seed: ctx.g.seed,
        mc_samples: a.mc_samples,
    };
    let points = tradeoff_sweep(family, &cfg, &grid);
    let meta = ctx.meta();
    let body = match ctx.g.format {
        Format::Csv => {
            let mut b = Vec::new();
            write_csv(&points, &mut b)?;
            // CSV has no room for metadata; it goes next to the file (or to stderr)
            match &a.out {
                Some(p) => {
                    let mut m = p.clone().into_os_string();
                    m.push(".meta.json");
                    write_out(Some(Path::new(&m)), &pretty(&json!({"scale": sc, "meta": meta})))?;
                }
                None => eprintln!("{}", json!({"meta": meta})),
            }
            b
        }
        Format::Json => pretty(&json!({"scale": sc, "family": family, "points": points, "meta": meta})),
    };
    write_out(a.out.as_deref(), &body)?;
    let ok = points.iter().any(|p| p.error.is_none() || p.privacy.is_some() || p.distortion.is_some());
    if !ok {
        return Err(Error::EmptyResult("every grid point failed".into()));
    }
    Ok(())
}

fn cmd_bounds(ctx: &mut Ctx, a: &BoundsArgs) -> Result<()> {
    if let Some(p) = &a.scale.scale {
        ctx.read(p)?;
    }
    let sc = a.scale.resolve()?;
    let base = ctx.g.log_base;
    let (kind, extra) = match a.family {
        FamilyArg::Rr => {
            let boost = match (&a.epsilon, &a.boost) {
                (Some(e), None) if e.eq_ignore_ascii_case("inf") => Boost::Infinite,
                (Some(e), None) => Boost::from_epsilon(e.parse().map_err(|_| Error::Parse(format!("epsilon {e:?}")))?)?,
                (None, Some(b)) => Boost::new(parse_rational(b)?)?,
                _ => return Err(Error::InvalidArgument("rr bounds need --epsilon or --boost".into())),
            };
            let cap = rr_robust_boost_cap(sc.tau, sc.d_hat(), sc.s);
            let robust = match &boost {
                Boost::Finite(b) => *b <= cap,
                Boost::Infinite => false,
            };
            let extra = json!({
                "epsilon": boost.epsilon(),
                "robust_boost_cap": fmt_rational(&cap),
                "robust_epsilon_cap_nats": rr_robust_epsilon_cap(sc.tau, sc.d_hat(), sc.s),
                "within_robust_cap": robust,
            });
            (MechKind::Rr(boost), extra)
        }
        FamilyArg::Qm => {
            let i = a.interval.ok_or_else(|| Error::InvalidArgument("qm bounds need --interval".into()))?;
            (MechKind::Qm(i), json!({"interval": i, "decay_threshold": qm_decay_threshold(sc.s, i, sc.tau, sc.d0)}))
        }
        FamilyArg::Maxl => return Err(Error::NotApplicable("no mismatch bounds for maxl".into())),
    };
    let b = mismatch_bounds(&kind, &sc, base)?;
    let out = json!({
        "scale": sc,
        "log_base": base.name(),
        "privacy": b.privacy,
        "distortion": {"lower": fmt_rational(&b.distortion.0), "upper": fmt_rational(&b.distortion.1)},
        "details": extra,
        "meta": ctx.meta(),
    });
    write_out(a.out.as_deref(), &pretty(&out))
}

fn cmd_flow_debug(ctx: &mut Ctx, a: &FlowDebugArgs) -> Result<()> {
    let (policy, part) = load_policy(ctx, &a.policy, a.partition.as_ref())?;
    let net = build_sml_network(&policy, &part)?;
    let res = if a.solve { Some(min_cost_flow(&net.net)?) } else { None };
    let meta = ctx.meta();
    let mut dot = format!(
        "// statleak {} config_hash {} seed {}\n",
        meta["version"].as_str().unwrap(),
        meta["config_hash"].as_str().unwrap(),
        ctx.g.seed
    );
    if let Some(r) = &res {
        dot.push_str(&format!("// total_cost {} flow_value {}\n", fmt_rational(&r.total_cost), r.value));
    }
    dot.push_str(&net.net.to_dot(res.as_ref()));
    write_out(a.out.as_deref(), dot.as_bytes())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let mut ctx = Ctx { g: cli.global.clone(), hasher: Sha256::new() };
    // the worker count never changes results, so it stays out of the hash
    let mut hashed = cli.global.clone();
    hashed.jobs = None;
    ctx.hasher.update(format!("{hashed:?}|{:?}", cli.cmd));
    match &cli.cmd {
        Command::Ingest(a) => cmd_ingest(&mut ctx, a),
        Command::Sml(a) => cmd_sml(&mut ctx, a),
        Command::Release(a) => cmd_release(&mut ctx, a),
        Command::Tradeoff(a) => cmd_tradeoff(&mut ctx, a),
        Command::Bounds(a) => cmd_bounds(&mut ctx, a),
        Command::FlowDebug(a) => cmd_flow_debug(&mut ctx, a),
    }
}

fn fail(code: &str, msg: &str) -> ExitCode {
    eprintln!("{}", json!({"error": {"code": code, "message": msg}}));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.code(), &e.to_string()),
    }
}
