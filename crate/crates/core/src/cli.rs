//! `invsq` command line: `windows`, `verify` and `report`.
//!
//! Exit codes: 0 when everything passes, 1 when a certificate fails,
//! 2 for usage and configuration errors.

use crate::error::{Error, Result};
use crate::hankel::{build_plan, BesselOrder, HankelPlan, PlanConfig, RadialFunction};
use crate::harness::{self, HarnessConfig, Inequality, SquareKind, TestFamily, Workbench, SCHEMA, SCOPE};
use crate::kernels::{bound_ratio_scan, default_c, BoundKind, ScanGrid, ZonalConfig};
use crate::morawetz::{
    self, check_beta_bound, check_lap_psi_bound, conservation_check, log_grid, virial_samples, Estimate,
    FractionalProfile, SmoothingConfig, SmoothingProfiles, VirialReport,
};
use crate::spectrum::{smoothing_admissible, window, Exponent, ModelParams, TheoremId, WeightKind, WeightSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Times of the conservation certificates.
pub const CONSERVATION_TIMES: [f64; 4] = [0.0, 1.0, 5.0, 25.0];

#[derive(Debug, Parser)]
#[command(name = "invsq", version, about = "Checks for Schrodinger operators with an inverse-square potential")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the p-windows of every theorem for one (d, a, s).
    #[command(allow_negative_numbers = true)]
    Windows {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        s: f64,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and write one JSON certificate per check.
    Verify(VerifyArgs),
    /// Aggregate the certificates of a directory into report.md and report.csv.
    Report {
        dir: PathBuf,
        /// Directory for the summary files (defaults to DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    KernelBounds,
    Hardy,
    Equivalence,
    Square,
    Difference,
    Morawetz,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::KernelBounds, Suite::Hardy, Suite::Equivalence, Suite::Square, Suite::Difference, Suite::Morawetz];

    pub fn name(self) -> &'static str {
        match self {
            Suite::KernelBounds => "kernel-bounds",
            Suite::Hardy => "hardy",
            Suite::Equivalence => "equivalence",
            Suite::Square => "square",
            Suite::Difference => "difference",
            Suite::Morawetz => "morawetz",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// "1", "power:ALPHA" or "composite:EPS"; comma separated.
    #[arg(long, value_delimiter = ',')]
    weight: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Time truncation of the smoothing estimates.
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    #[arg(long)]
    full: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat JSON file with RunConfig keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Quick,
    #[default]
    Full,
}

/// Flat run configuration. Empty lists and missing values fall back to
/// the preset of each suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    /// (d, a) pairs.
    pub params: Vec<(u32, f64)>,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub eps: Vec<f64>,
    pub weights: Vec<String>,
    pub seed: u64,
    pub family_size: Option<usize>,
    pub r_max: Option<f64>,
    pub lambda_max: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Radii per unit scan in the kernel-bound grids.
    pub kernel_nx: Option<usize>,
    pub virial_members: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Full,
            params: vec![],
            s: vec![],
            p: vec![],
            alpha: vec![],
            eps: vec![],
            weights: vec![],
            seed: 1,
            family_size: None,
            r_max: None,
            lambda_max: None,
            t: None,
            kernel_nx: None,
            virial_members: None,
            out: PathBuf::from("certificates"),
        }
    }
}

impl RunConfig {
    pub fn quick() -> Self {
        Self { preset: Preset::Quick, ..Self::default() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// True when the user fixed any part of the parameter matrix.
    fn explicit(&self) -> bool {
        !(self.params.is_empty()
            && self.s.is_empty()
            && self.p.is_empty()
            && self.alpha.is_empty()
            && self.eps.is_empty()
            && self.weights.is_empty())
    }

    fn harness(&self) -> HarnessConfig {
        let mut h = match self.preset {
            Preset::Quick => HarnessConfig::quick(),
            Preset::Full => HarnessConfig::default(),
        };
        if let Some(r) = self.r_max {
            h.plan.r_max = r;
            h.refined.r_max = r;
        }
        if let Some(l) = self.lambda_max {
            h.plan.lambda_max = l;
            h.refined.lambda_max = l;
        }
        if let Some(n) = self.family_size {
            h.family_size = n;
        }
        h.seed = self.seed;
        h
    }

    fn kernel_grid(&self) -> ScanGrid {
        let mut g = ScanGrid::default();
        if self.preset == Preset::Full {
            // nine points a decade apart miss interior peaks at large a
            g.nx = 25;
        }
        if let Some(n) = self.kernel_nx {
            g.nx = n;
        }
        g
    }

    fn smoothing(&self) -> SmoothingConfig {
        let mut c = match self.preset {
            Preset::Quick => SmoothingConfig { t: 20.0, ..SmoothingConfig::quick() },
            Preset::Full => SmoothingConfig::default(),
        };
        if let Some(t) = self.t {
            c.t = t;
        }
        c
    }

    fn plan(&self) -> PlanConfig {
        let mut c = PlanConfig::default();
        if let Some(r) = self.r_max {
            c.r_max = r;
        }
        if let Some(l) = self.lambda_max {
            c.lambda_max = l;
        }
        c
    }

    fn virial_members(&self) -> usize {
        self.virial_members.unwrap_or(match self.preset {
            Preset::Quick => 4,
            Preset::Full => 16,
        })
    }
}

/// Parse "1", "power:ALPHA" or "composite:EPS".
pub fn parse_weight(s: &str) -> Result<WeightSpec> {
    let t = s.trim();
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number in weight '{s}'")));
    match t.split_once(':') {
        None if matches!(t, "1" | "const" | "constant") => Ok(WeightSpec::constant()),
        Some(("power", v)) => Ok(WeightSpec::power(num(v)?)),
        Some(("composite", v)) => WeightSpec::composite(num(v)?).map_err(|e| Error::Config(e.to_string())),
        _ => Err(Error::Config(format!("unknown weight '{s}' (use 1, power:ALPHA or composite:EPS)"))),
    }
}

pub fn weight_label(w: &WeightSpec) -> String {
    match &w.kind {
        WeightKind::Power { alpha } if *alpha == 0.0 => "1".into(),
        WeightKind::Power { alpha } => format!("power:{alpha}"),
        WeightKind::Composite { eps } => format!("composite:{eps}"),
        WeightKind::Table { .. } => "table".into(),
    }
}

/// One certificate file. `payload` holds the full report of the check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub schema: String,
    pub suite: String,
    pub id: String,
    pub theorem: String,
    pub d: u32,
    pub a: f64,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub weight: Option<String>,
    /// What `value` measures.
    pub metric: String,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
    pub scope: String,
    pub payload: serde_json::Value,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Record {
    fn new(suite: Suite, id: String, theorem: &str, params: &ModelParams) -> Self {
        Self {
            schema: SCHEMA.into(),
            suite: suite.name().into(),
            id,
            theorem: theorem.into(),
            d: params.d,
            a: params.a,
            s: None,
            p: None,
            alpha: None,
            eps: None,
            weight: None,
            metric: String::new(),
            value: None,
            bound: None,
            pass: false,
            scope: SCOPE.into(),
            payload: serde_json::Value::Null,
        }
    }

    fn payload<T: Serialize>(mut self, v: &T) -> Self {
        self.payload = serde_json::to_value(v).unwrap_or(serde_json::Value::Null);
        self
    }

    fn failed(mut self, err: &Error) -> Self {
        self.pass = false;
        self.payload = serde_json::json!({ "error": err.to_string() });
        self
    }

    pub fn file_name(&self) -> String {
        format!("{}.json", self.id)
    }

    /// Reject records that do not carry the certificate schema.
    pub fn from_json(s: &str) -> Result<Self> {
        let r: Record = serde_json::from_str(s)?;
        if r.schema != SCHEMA {
            return Err(Error::Config(format!("schema '{}' is not {SCHEMA}", r.schema)));
        }
        Ok(r)
    }

    /// Atomic write into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        let tmp = dir.join(format!(".{}.tmp", self.file_name()));
        std::fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

const SUMMARY_HEADER: [&str; 15] =
    ["id", "suite", "theorem", "d", "a", "s", "p", "alpha", "eps", "weight", "metric", "value", "bound", "pass", "scope"];

fn summary_row(r: &Record) -> Vec<String> {
    vec![
        r.id.clone(),
        r.suite.clone(),
        r.theorem.clone(),
        r.d.to_string(),
        r.a.to_string(),
        fmt_opt(r.s),
        fmt_opt(r.p),
        fmt_opt(r.alpha),
        fmt_opt(r.eps),
        r.weight.clone().unwrap_or_default(),
        r.metric.clone(),
        fmt_opt(r.value),
        fmt_opt(r.bound),
        r.pass.to_string(),
        r.scope.clone(),
    ]
}

fn write_summary(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in records {
        w.write_record(summary_row(r))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// job planning

#[derive(Debug, Clone)]
enum Job {
    Kernel { params: ModelParams, kind: BoundKind },
    Inequality { params: ModelParams, which: Inequality, s: f64, p: f64, weight: WeightSpec, square: Option<SquareKind> },
    Morawetz { params: ModelParams, eps: Vec<f64>, s: Vec<f64> },
}

struct Matrix {
    params: Vec<(u32, f64)>,
    s: Vec<f64>,
    p: Vec<f64>,
    alpha: Vec<f64>,
    eps: Vec<f64>,
    weights: Vec<String>,
}

fn preset_matrix(suite: Suite, preset: Preset) -> Matrix {
    let one = |v: f64| vec![v];
    let w1 = vec!["1".to_string()];
    let quick = preset == Preset::Quick;
    match suite {
        Suite::KernelBounds => Matrix {
            params: if quick {
                vec![(3, 0.0), (3, 1.0), (4, -0.5)]
            } else {
                let mut v = Vec::new();
                for d in 3..=5u32 {
                    let crit = -0.25 * ((d - 2) * (d - 2)) as f64;
                    v.extend([crit, -0.2, 0.0, 1.0, 5.0].map(|a| (d, a)));
                }
                v
            },
            s: vec![],
            p: vec![],
            alpha: vec![],
            eps: vec![],
            weights: vec![],
        },
        Suite::Hardy => Matrix {
            params: if quick { vec![(3, 0.0), (3, 1.0)] } else { vec![(3, 0.0), (3, 1.0), (3, -0.2), (4, 0.0), (4, 2.0)] },
            s: if quick { one(1.0) } else { vec![0.5, 1.0, 1.5] },
            p: if quick { one(2.0) } else { vec![1.5, 2.0, 2.5] },
            alpha: vec![],
            eps: vec![],
            weights: if quick { w1 } else { vec!["1".into(), "power:0.5".into()] },
        },
        Suite::Equivalence => Matrix {
            params: if quick { vec![(3, 1.0)] } else { vec![(3, 1.0), (3, -0.2), (4, 0.0), (5, 1.0)] },
            s: if quick { one(1.0) } else { vec![0.5, 1.0, 1.5] },
            p: if quick { one(2.0) } else { vec![1.5, 2.0] },
            alpha: vec![],
            eps: vec![],
            weights: w1,
        },
        Suite::Square => Matrix {
            params: if quick { vec![(3, 1.0)] } else { vec![(3, 0.0), (3, 1.0), (4, -0.2)] },
            s: vec![],
            p: if quick { one(2.0) } else { vec![1.5, 2.0] },
            alpha: if quick { one(0.5) } else { vec![0.25, 0.5, 0.75] },
            eps: vec![],
            weights: w1,
        },
        Suite::Difference => Matrix {
            params: if quick { vec![(3, 1.0)] } else { vec![(3, 1.0), (3, -0.2), (3, 0.0), (4, 1.0)] },
            s: if quick { one(1.0) } else { vec![0.5, 1.0] },
            p: one(2.0),
            alpha: vec![],
            eps: vec![],
            weights: w1,
        },
        Suite::Morawetz => Matrix {
            params: if quick { vec![(3, 1.0)] } else { vec![(3, 1.0), (4, 0.0), (5, -0.5)] },
            s: one(1.0),
            p: vec![],
            alpha: vec![],
            // eps* is added per (d, a) in the full preset
            eps: if quick { one(0.25) } else { vec![0.1, 0.5, 0.9] },
            weights: vec![],
        },
        Suite::All => unreachable!("expanded before planning"),
    }
}

fn matrix(cfg: &RunConfig, suite: Suite) -> Matrix {
    // a run that pins part of the matrix gets the minimal values elsewhere
    let base = preset_matrix(suite, if cfg.explicit() { Preset::Quick } else { cfg.preset });
    let pick = |user: &Vec<f64>, dflt: Vec<f64>| if user.is_empty() { dflt } else { user.clone() };
    Matrix {
        params: if cfg.params.is_empty() { base.params } else { cfg.params.clone() },
        s: pick(&cfg.s, base.s),
        p: pick(&cfg.p, base.p),
        alpha: pick(&cfg.alpha, base.alpha),
        eps: pick(&cfg.eps, base.eps),
        weights: if cfg.weights.is_empty() { base.weights } else { cfg.weights.clone() },
    }
}

fn model(d: u32, a: f64) -> Result<ModelParams> {
    if d < 3 {
        return Err(Error::Config(format!("dimension must be ≥ 3 (got {d})")));
    }
    ModelParams::new(d, a).map_err(|e| Error::Config(e.to_string()))
}

/// Expand the configuration into jobs; the second list holds the
/// combinations rejected by the window and weight checks.
fn plan_jobs(cfg: &RunConfig, suite: Suite) -> Result<(Vec<Job>, Vec<String>)> {
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut jobs = Vec::new();
    let mut rejected = Vec::new();
    for su in suites {
        let m = matrix(cfg, su);
        let weights = m.weights.iter().map(|w| parse_weight(w)).collect::<Result<Vec<_>>>()?;
        for &(d, a) in &m.params {
            let params = model(d, a)?;
            match su {
                Suite::KernelBounds => {
                    for kind in [BoundKind::MszzHeat, BoundKind::Ptk, BoundKind::Complex, BoundKind::difference_for(a)] {
                        jobs.push(Job::Kernel { params, kind });
                    }
                }
                Suite::Morawetz => {
                    let mut eps = m.eps.clone();
                    if cfg.eps.is_empty() && cfg.preset == Preset::Full {
                        if let Some(e) = params.eps_star {
                            eps.insert(0, e);
                        }
                    }
                    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
                        return Err(Error::Config(format!("eps must lie in (0, 1], got {e}")));
                    }
                    if let Some(s) = m.s.iter().find(|s| !(**s > 0.0 && **s < 2.0)) {
                        return Err(Error::Config(format!("conservation needs 0 < s < 2, got {s}")));
                    }
                    jobs.push(Job::Morawetz { params, eps, s: m.s.clone() });
                }
                _ => {
                    let which = match su {
                        Suite::Hardy => Inequality::Hardy,
                        Suite::Equivalence => Inequality::Equivalence,
                        Suite::Square => Inequality::Square,
                        _ => Inequality::Difference,
                    };
                    let mut inner: Vec<(f64, Option<SquareKind>)> = Vec::new();
                    if which == Inequality::Square {
                        for &al in &m.alpha {
                            if !(al > 0.0 && al < 1.0) {
                                return Err(Error::Config(format!("alpha must lie in (0, 1), got {al}")));
                            }
                            inner.push((0.0, Some(SquareKind::Alpha { alpha: al })));
                        }
                        for &s in &cfg.s {
                            if !(s > 0.0 && s < 2.0) {
                                return Err(Error::Config(format!("weighted square function needs 0 < s < 2, got {s}")));
                            }
                            inner.push((s, Some(SquareKind::Weighted { s })));
                        }
                    } else {
                        inner = m.s.iter().map(|&s| (s, None)).collect();
                    }
                    for &(s, square) in &inner {
                        for &p in &m.p {
                            for w in &weights {
                                match harness::preflight(&params, which, s, p, w) {
                                    Ok(()) => jobs.push(Job::Inequality { params, which, s, p, weight: w.clone(), square }),
                                    Err(e) => rejected.push(format!(
                                        "{} d={d} a={a} s={s} p={p} w={}: {e}",
                                        su.name(),
                                        weight_label(w)
                                    )),
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((jobs, rejected))
}

// ---------------------------------------------------------------------------
// running

struct Runner {
    cfg: RunConfig,
    benches: BTreeMap<(u32, u64), Workbench>,
}

fn key(p: &ModelParams) -> (u32, u64) {
    (p.d, p.a.to_bits())
}

impl Runner {
    fn bench(&mut self, params: &ModelParams) -> Result<&Workbench> {
        let k = key(params);
        if !self.benches.contains_key(&k) {
            // one workbench at a time keeps memory flat
            self.benches.clear();
            self.benches.insert(k, Workbench::new(params, &self.cfg.harness())?);
        }
        Ok(&self.benches[&k])
    }

    fn run(&mut self, job: &Job, out: &Path, sink: &mut Vec<Record>) -> Result<()> {
        match job {
            Job::Kernel { params, kind } => sink.push(self.kernel(params, *kind)),
            Job::Inequality { params, which, s, p, weight, square } => {
                let rec = self.inequality(params, *which, *s, *p, weight, *square);
                sink.push(rec);
            }
            Job::Morawetz { params, eps, s } => self.morawetz(params, eps, s, out, sink)?,
        }
        Ok(())
    }

    fn kernel(&self, params: &ModelParams, kind: BoundKind) -> Record {
        let id = format!("kernel_{}_d{}_a{}", kind.name(), params.d, params.a);
        let mut rec = Record::new(Suite::KernelBounds, id, kind.name(), params);
        rec.metric = "sup |kernel| / bound".into();
        rec.bound = Some(harness::DEFAULT_THRESHOLD);
        let c = default_c(kind);
        match bound_ratio_scan(kind, params, c, &self.cfg.kernel_grid(), &ZonalConfig::default()) {
            Ok(rep) => {
                rec.value = finite(rep.sup_ratio);
                rec.pass = rep.stable && rep.sup_ratio <= harness::DEFAULT_THRESHOLD;
                rec.payload(&rep)
            }
            Err(e) => rec.failed(&e),
        }
    }

    fn inequality(
        &mut self,
        params: &ModelParams,
        which: Inequality,
        s: f64,
        p: f64,
        w: &WeightSpec,
        square: Option<SquareKind>,
    ) -> Record {
        let suite = match which {
            Inequality::Hardy => Suite::Hardy,
            Inequality::Equivalence => Suite::Equivalence,
            Inequality::Square => Suite::Square,
            Inequality::Difference => Suite::Difference,
        };
        let cert = self.bench(params).and_then(|b| match which {
            Inequality::Hardy => b.hardy(s, p, w),
            Inequality::Equivalence => b.equivalence(s, p, w),
            Inequality::Square => b.square(square.expect("square kind"), p, w),
            Inequality::Difference => b.difference(s, p, w),
        });
        match cert {
            Ok(c) => {
                let id = c.file_name().trim_end_matches(".json").to_string();
                let mut rec = Record::new(suite, id, &c.theorem, params);
                rec.s = c.s;
                rec.alpha = c.alpha;
                rec.p = Some(p);
                rec.weight = Some(weight_label(w));
                rec.metric = "max ratio over the family".into();
                rec.value = finite(c.max_ratio);
                rec.bound = Some(c.threshold);
                rec.pass = c.pass;
                rec.scope = c.scope.clone();
                rec.payload(&c)
            }
            Err(e) => {
                let id = format!("{}_d{}_a{}_s{s}_p{p}_{}", suite.name(), params.d, params.a, weight_label(w).replace(':', ""));
                let mut rec = Record::new(suite, id, suite.name(), params);
                rec.s = Some(s);
                rec.p = Some(p);
                rec.weight = Some(weight_label(w));
                rec.metric = "max ratio over the family".into();
                rec.failed(&e)
            }
        }
    }

    fn morawetz(&self, params: &ModelParams, eps: &[f64], s_list: &[f64], out: &Path, sink: &mut Vec<Record>) -> Result<()> {
        let (d, a) = (params.d, params.a);
        let tag = format!("d{d}_a{a}");
        let base = |id: String, theorem: &str| Record::new(Suite::Morawetz, id, theorem, params);

        // psi calculus bounds
        let grid = log_grid(1e-6, 1e6, 2001);
        for &e in eps {
            let mut rec = base(format!("psi_bounds_{tag}_eps{e}"), "psi_bounds");
            rec.eps = Some(e);
            rec.metric = "max(|beta| / 3d^2, r |Lap psi| / d)".into();
            rec.bound = Some(1.0);
            let scans = check_beta_bound(d, e, &grid).and_then(|b| Ok((b, check_lap_psi_bound(d, e, &grid)?)));
            sink.push(match scans {
                Ok((b, l)) => {
                    rec.value = finite((b.max_value / b.bound).max(l.max_value / l.bound));
                    rec.pass = b.pass && l.pass;
                    rec.payload(&serde_json::json!({ "beta": b, "lap_psi": l }))
                }
                Err(e) => rec.failed(&e),
            });
        }

        // virial identity on a wide grid
        let mut vcfg = PlanConfig::with_ranges(80.0, 16.0);
        vcfg.flow_horizon = 1.0;
        let virial: Result<Vec<Vec<VirialReport>>> = (|| {
            let vplan = build_plan(params, BesselOrder::Radial, &vcfg)?;
            let fam = TestFamily::build(&vplan, self.cfg.seed, self.cfg.virial_members())?;
            let mut per_eps = vec![Vec::new(); eps.len()];
            for f in &fam.members {
                for t0 in [0.1, 1.0] {
                    let smp = virial_samples(&vplan, f, t0, 1e-3)?;
                    for (k, &e) in eps.iter().enumerate() {
                        per_eps[k].push(smp.evaluate(e)?);
                    }
                }
            }
            Ok(per_eps)
        })();
        for (k, &e) in eps.iter().enumerate() {
            let mut rec = base(format!("virial_{tag}_eps{e}"), "virial");
            rec.eps = Some(e);
            rec.metric = "max residual of the virial identity".into();
            rec.bound = Some(morawetz::VIRIAL_TOL);
            sink.push(match &virial {
                Ok(v) => {
                    let worst = v[k].iter().map(|r| r.residual).fold(0.0, f64::max);
                    rec.value = finite(worst);
                    rec.pass = v[k].iter().all(|r| r.pass);
                    rec.payload(&v[k])
                }
                Err(err) => rec.failed(err),
            });
        }

        // base plans shared by conservation, bilinear form and smoothing
        let pcfg = self.cfg.plan();
        let plans: Result<(HankelPlan, Option<HankelPlan>)> = (|| {
            let plan = build_plan(params, BesselOrder::Radial, &pcfg)?;
            let free = if a == 0.0 { None } else { Some(build_plan(params, BesselOrder::Free, &pcfg)?) };
            Ok((plan, free))
        })();
        let (plan, free) = match plans {
            Ok(p) => p,
            Err(e) => {
                let rec = base(format!("plans_{tag}"), "plans");
                sink.push(rec.failed(&e));
                return Ok(());
            }
        };
        let free_ref = free.as_ref().unwrap_or(&plan);
        let family = TestFamily::build(&plan, self.cfg.seed, 6);

        for &s in s_list {
            let mut rec = base(format!("conservation_{tag}_s{s}"), "conservation");
            rec.s = Some(s);
            rec.metric = "relative spread of ||L^(s/2) u(t)||".into();
            rec.bound = Some(morawetz::CONSERVATION_TOL);
            let r = family
                .as_ref()
                .map_err(|e| Error::Convergence(e.to_string()))
                .and_then(|fam| conservation_check(&plan, s, &fam.members[0], &CONSERVATION_TIMES, true, None));
            sink.push(match r {
                Ok(c) => {
                    rec.value = finite(c.operator_spread);
                    rec.pass = c.exact_pass;
                    rec.payload(&c)
                }
                Err(e) => rec.failed(&e),
            });
        }

        for &e in eps {
            let mut rec = base(format!("bform_{tag}_eps{e}"), "bform");
            rec.eps = Some(e);
            rec.metric = "max |B(v, w)| / (||v||_1/2 ||w||_1/2)".into();
            rec.bound = Some(morawetz::BFORM_BOUND);
            let r = family.as_ref().map_err(|e| Error::Convergence(e.to_string())).and_then(|fam| {
                let m = &fam.members;
                let pairs: Vec<(RadialFunction, RadialFunction)> =
                    (0..m.len()).map(|i| (m[i].clone(), m[(i + 1) % m.len()].clone())).chain(m.iter().map(|f| (f.clone(), f.clone()))).collect();
                morawetz::bform_check(free_ref, e, &pairs)
            });
            sink.push(match r {
                Ok(b) => {
                    rec.value = finite(b.max_ratio);
                    rec.pass = b.pass;
                    rec.payload(&b)
                }
                Err(e) => rec.failed(&e),
            });
        }

        // smoothing estimates for f = exp(-(r-2)^2)
        let scfg = self.cfg.smoothing();
        let f = RadialFunction::from_real(&plan.radial, |r| (-(r - 2.0) * (r - 2.0)).exp());
        for est in Estimate::ALL {
            let profiles = SmoothingProfiles::compute(est, &plan, free.as_ref(), None::<&FractionalProfile>, &f, &scfg);
            for &e in eps {
                let mut rec = base(format!("smoothing_{}_{tag}_eps{e}", est.id()), est.id());
                rec.eps = Some(e);
                rec.metric = "lhs / rhs (T-stable)".into();
                let adm = smoothing_admissible(params, e);
                if !matches!(adm, Ok(ref x) if x.admissible) {
                    rec.scope = format!("{SCOPE}; outside proven range");
                }
                let r = profiles.as_ref().map_err(|e| Error::Convergence(e.to_string())).and_then(|p| {
                    let rep = p.report(e, None)?;
                    p.write_slices_csv(e, out.join(format!("slices_{}_{tag}_eps{e}.csv", est.id())))?;
                    Ok(rep)
                });
                sink.push(match r {
                    Ok(rep) => {
                        rec.value = finite(rep.ratio);
                        rec.pass = rep.pass;
                        rec.payload(&rep)
                    }
                    Err(e) => rec.failed(&e),
                });
            }
        }
        Ok(())
    }
}

/// Run a suite and write its certificates and summary.csv into `cfg.out`.
/// Returns the records in execution order.
pub fn verify(cfg: &RunConfig, suite: Suite) -> Result<Vec<Record>> {
    let (jobs, rejected) = plan_jobs(cfg, suite)?;
    if !rejected.is_empty() && cfg.explicit() {
        return Err(Error::Config(format!("invalid combinations:\n  {}", rejected.join("\n  "))));
    }
    for r in &rejected {
        eprintln!("skipped (outside window): {r}");
    }
    std::fs::create_dir_all(&cfg.out)?;
    let mut runner = Runner { cfg: cfg.clone(), benches: BTreeMap::new() };
    let mut records = Vec::new();
    for job in &jobs {
        let start = records.len();
        runner.run(job, &cfg.out, &mut records)?;
        for r in &records[start..] {
            r.write(&cfg.out)?;
            eprintln!("{} {} {}", if r.pass { "pass" } else { "FAIL" }, r.id, fmt_opt(r.value));
        }
    }
    write_summary(&cfg.out.join("summary.csv"), &records)?;
    Ok(records)
}

// ---------------------------------------------------------------------------
// report

/// Aggregated view of a certificate directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub records: Vec<Record>,
    /// Files that did not parse as certificates.
    pub unreadable: Vec<String>,
}

impl Report {
    pub fn load(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut records = Vec::new();
        let mut unreadable = Vec::new();
        for p in paths {
            match std::fs::read_to_string(&p).map_err(Error::from).and_then(|s| Record::from_json(&s)) {
                Ok(r) => records.push(r),
                Err(e) => unreadable.push(format!("{}: {e}", p.display())),
            }
        }
        Ok(Self { records, unreadable })
    }

    /// theorem -> (passed, total)
    pub fn pass_counts(&self) -> BTreeMap<String, (usize, usize)> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            let e = m.entry(r.theorem.clone()).or_insert((0, 0));
            e.0 += r.pass as usize;
            e.1 += 1;
        }
        m
    }

    /// Largest value per theorem with the record it came from.
    pub fn extremes(&self) -> BTreeMap<String, (f64, String)> {
        let mut m: BTreeMap<String, (f64, String)> = BTreeMap::new();
        for r in &self.records {
            if let Some(v) = r.value {
                let e = m.entry(r.theorem.clone()).or_insert((v, r.id.clone()));
                if v > e.0 {
                    *e = (v, r.id.clone());
                }
            }
        }
        m
    }

    pub fn markdown(&self) -> String {
        let mut s = String::from("# Certificate report\n\n");
        let mut scopes: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &self.records {
            *scopes.entry(r.scope.as_str()).or_default() += 1;
        }
        for (sc, n) in &scopes {
            let _ = writeln!(s, "> scope: {sc} ({n} certificates)");
        }
        let (pass, total) = self.records.iter().fold((0, 0), |(p, t), r| (p + r.pass as usize, t + 1));
        let _ = writeln!(s, "\n{pass}/{total} certificates pass.\n\n## Pass counts\n\n| theorem | passed |\n|---|---|");
        for (th, (p, t)) in self.pass_counts() {
            let _ = writeln!(s, "| {th} | {p}/{t} |");
        }
        let _ = writeln!(s, "\n## Extremal constants\n\n| theorem | largest value | certificate |\n|---|---|---|");
        for (th, (v, id)) in self.extremes() {
            let _ = writeln!(s, "| {th} | {v:.6e} | {id} |");
        }
        let _ = writeln!(s, "\n## Certificates\n\n| theorem | d | a | s | p | alpha | eps | w | value | bound | pass |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|");
        for r in &self.records {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                r.theorem,
                r.d,
                r.a,
                fmt_opt(r.s),
                fmt_opt(r.p),
                fmt_opt(r.alpha),
                fmt_opt(r.eps),
                r.weight.as_deref().unwrap_or(""),
                r.value.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into()),
                fmt_opt(r.bound),
                if r.pass { "yes" } else { "no" }
            );
        }
        if !self.unreadable.is_empty() {
            let _ = writeln!(s, "\n## Unreadable files\n");
            for u in &self.unreadable {
                let _ = writeln!(s, "- {u}");
            }
        }
        s
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("report.md"), self.markdown())?;
        write_summary(&out.join("report.csv"), &self.records)
    }
}

// ---------------------------------------------------------------------------
// windows

fn exponent(e: Exponent) -> String {
    if e.0.is_infinite() {
        "inf".into()
    } else {
        format!("{}", e.0)
    }
}

fn windows_table(d: u32, a: f64, s: f64) -> Result<Vec<[String; 7]>> {
    let params = model(d, a)?;
    TheoremId::ALL
        .iter()
        .map(|&th| {
            let w = window(&params, s, th).map_err(|e| Error::Config(e.to_string()))?;
            Ok([
                th.name().to_string(),
                exponent(w.p_lower),
                exponent(w.p_upper),
                exponent(w.ap_index),
                exponent(w.rh_index),
                w.valid.to_string(),
                w.reason,
            ])
        })
        .collect()
}

const WINDOW_HEADER: [&str; 7] = ["theorem", "p_lower", "p_upper", "ap_index", "rh_index", "valid", "reason"];

fn cmd_windows(d: u32, a: f64, s: f64, out: Option<&Path>) -> Result<()> {
    let rows = windows_table(d, a, s)?;
    println!("d = {d}, a = {a}, s = {s}");
    println!("{:<14} {:>10} {:>10} {:>10} {:>10} {:>6}  reason", WINDOW_HEADER[0], "p_lower", "p_upper", "ap", "rh", "valid");
    for r in &rows {
        println!("{:<14} {:>10} {:>10} {:>10} {:>10} {:>6}  {}", r[0], r[1], r[2], r[3], r[4], r[5], r[6]);
    }
    if let Some(path) = out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(WINDOW_HEADER)?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn run_config(args: &VerifyArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.quick {
        cfg.preset = Preset::Quick;
    }
    if args.full {
        cfg.preset = Preset::Full;
    }
    if args.d.is_some() || args.a.is_some() {
        cfg.params = vec![(args.d.unwrap_or(3), args.a.unwrap_or(0.0))];
    }
    for (dst, src) in [(&mut cfg.s, &args.s), (&mut cfg.p, &args.p), (&mut cfg.alpha, &args.alpha), (&mut cfg.eps, &args.eps)] {
        if !src.is_empty() {
            *dst = src.clone();
        }
    }
    if !args.weight.is_empty() {
        cfg.weights = args.weight.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.t.is_some() {
        cfg.t = args.t;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cfg.t {
        if !(t > 0.0) {
            return Err(Error::Config(format!("T must be positive, got {t}")));
        }
    }
    Ok(cfg)
}

fn usage(e: &Error) -> i32 {
    eprintln!("error: {e}");
    EXIT_USAGE
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match cli.cmd {
        Command::Windows { d, a, s, out } => match cmd_windows(d, a, s, out.as_deref()) {
            Ok(()) => EXIT_PASS,
            Err(e) => usage(&e),
        },
        Command::Verify(args) => {
            let cfg = match run_config(&args) {
                Ok(c) => c,
                Err(e) => return usage(&e),
            };
            match verify(&cfg, args.suite) {
                Ok(recs) => {
                    let failed = recs.iter().filter(|r| !r.pass).count();
                    println!("{}/{} certificates pass; written to {}", recs.len() - failed, recs.len(), cfg.out.display());
                    if failed == 0 {
                        EXIT_PASS
                    } else {
                        EXIT_FAIL
                    }
                }
                Err(e @ Error::Config(_)) => usage(&e),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_FAIL
                }
            }
        }
        Command::Report { dir, out } => {
            let rep = match Report::load(&dir) {
                Ok(r) => r,
                Err(e) => return usage(&e),
            };
            if rep.records.is_empty() {
                eprintln!("error: no certificates found in {}", dir.display());
                return EXIT_USAGE;
            }
            if let Err(e) = rep.write(out.as_deref().unwrap_or(&dir)) {
                eprintln!("error: {e}");
                return EXIT_FAIL;
            }
            print!("{}", rep.markdown());
            EXIT_PASS
        }
    }
}
