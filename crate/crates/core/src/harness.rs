//! Seeded radial test families and extremal-ratio certificates for the
//! weighted Hardy, equivalence, square-function and difference inequalities.
//!
//! Every certificate is computed twice: on the working grids and on a
//! refined pair of grids with the same family resampled, and the relative
//! change of the extremal ratio is recorded as the refinement drift.

use crate::error::{Error, Result};
use crate::hankel::{
    build_plan, power, weighted_lp_norm, BesselOrder, Direction, HankelPlan, PlanConfig, RadialFunction, RadialGrid,
    SubordinationConfig,
};
use crate::specfun::{gamma, gamma_pq};
use crate::spectrum::{
    sphere_area, weight_admissible, window, AdmissibilityReport, Exponent, ModelParams, TheoremId, WeightSpec,
    WindowSpec,
};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

pub const SCHEMA: &str = "certificate_v1";
pub const SCOPE: &str = "radial sector";
pub const DEFAULT_THRESHOLD: f64 = 1e3;
pub const ROUTE_TOL: f64 = 1e-6;
pub const DRIFT_TOL: f64 = 0.05;
const SHARP_SLACK: f64 = 1e-6;
const SATURATION_GROWTH: f64 = 0.1;
/// Candidates drawn per batch; fixed so that families of different sizes
/// built from one seed are prefixes of each other.
const BATCH: usize = 16;

/// One term c r^m exp(-gamma (r - b)^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub c: Complex64,
    pub m: u32,
    pub gamma: f64,
    pub b: f64,
}

impl Bump {
    pub fn eval(&self, r: f64) -> Complex64 {
        self.c * (r.powi(self.m as i32) * (-self.gamma * (r - self.b).powi(2)).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub terms: Vec<Bump>,
}

impl MemberSpec {
    pub fn eval(&self, r: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(r)).sum()
    }

    pub fn sample(&self, grid: &Arc<RadialGrid>) -> RadialFunction {
        RadialFunction::from_fn(grid, |r| self.eval(r))
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        let count = rng.gen_range(1..=2);
        let terms = (0..count)
            .map(|_| {
                let m = rng.gen_range(0..=2u32);
                let gamma = (rng.gen_range(0.2f64.ln()..20f64.ln())).exp();
                let b = rng.gen_range(0.0..10.0);
                let rad = rng.gen::<f64>().sqrt();
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                Bump { c: Complex64::from_polar(rad, th), m, gamma, b }
            })
            .collect();
        Self { terms }
    }
}

/// Deterministic family of band-limited radial test functions.
#[derive(Debug, Clone)]
pub struct TestFamily {
    pub seed: u64,
    pub specs: Vec<MemberSpec>,
    pub members: Vec<RadialFunction>,
    /// Candidates discarded by the acceptance checks.
    pub rejected: usize,
    pub band: f64,
}

impl TestFamily {
    pub const DEFAULT_SIZE: usize = 40;

    /// Draw candidates until `size` of them pass: nonzero with norm in
    /// [1e-6, 1e6], negligible near r_max, and with transform below 1e-10
    /// of its peak for lambda >= band.
    pub fn build(plan: &HankelPlan, seed: u64, size: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let band = plan.config.band();
        let grid = plan.radial.clone();
        let r_cut = 0.9 * plan.config.r_max;
        let mut specs = Vec::with_capacity(size);
        let mut members = Vec::with_capacity(size);
        let mut rejected = 0;
        let max_draws = 200 * size.max(1);
        let mut drawn = 0;
        while members.len() < size {
            if drawn >= max_draws {
                return Err(Error::Convergence(format!(
                    "only {} of {size} family members accepted after {drawn} draws",
                    members.len()
                )));
            }
            let cands: Vec<MemberSpec> = (0..BATCH).map(|_| MemberSpec::random(&mut rng)).collect();
            drawn += BATCH;
            let sampled: Vec<RadialFunction> = cands.iter().map(|c| c.sample(&grid)).collect();
            let refs: Vec<&[Complex64]> = sampled.iter().map(|f| f.values.as_slice()).collect();
            let hats = crate::hankel::from_columns(&plan.forward_cols(&crate::hankel::to_columns(&refs)));
            for ((spec, f), fhat) in cands.into_iter().zip(sampled).zip(hats) {
                if members.len() == size {
                    break;
                }
                let peak = fhat.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let high = plan
                    .lambdas()
                    .iter()
                    .zip(&fhat)
                    .filter(|(l, _)| **l >= band)
                    .map(|(_, z)| z.norm())
                    .fold(0.0, f64::max);
                let fmax = f.max_abs();
                let edge = f.nodes().iter().zip(&f.values).filter(|(r, _)| **r >= r_cut).map(|(_, z)| z.norm()).fold(0.0, f64::max);
                let norm = f.l2_norm();
                let ok = peak > 0.0 && high <= 1e-10 * peak && edge <= 1e-12 * fmax && (1e-6..=1e6).contains(&norm);
                if ok {
                    specs.push(spec);
                    members.push(f);
                } else {
                    rejected += 1;
                }
            }
        }
        Ok(Self { seed, specs, members, rejected, band })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The same members sampled on another grid.
    pub fn on_grid(&self, grid: &Arc<RadialGrid>) -> Vec<RadialFunction> {
        self.specs.iter().map(|s| s.sample(grid)).collect()
    }
}

/// Settings shared by all certificates of a workbench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub plan: PlanConfig,
    /// Grids used for the refinement-drift recomputation.
    pub refined: PlanConfig,
    pub family_size: usize,
    pub seed: u64,
    pub threshold: f64,
    pub square_t: TQuadrature,
    pub subordination: SubordinationConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        let plan = PlanConfig::default();
        let refined = PlanConfig { oversample: 1.5, base_nodes: plan.base_nodes + 4, ..plan.clone() };
        Self {
            plan,
            refined,
            family_size: TestFamily::DEFAULT_SIZE,
            seed: 1,
            threshold: DEFAULT_THRESHOLD,
            square_t: TQuadrature::default(),
            subordination: SubordinationConfig::default(),
        }
    }
}

impl HarnessConfig {
    /// Smaller grids and family for fast runs.
    pub fn quick() -> Self {
        let plan = PlanConfig { r_max: 24.0, lambda_max: 24.0, ..PlanConfig::default() };
        let refined = PlanConfig { oversample: 1.5, base_nodes: plan.base_nodes + 4, ..plan.clone() };
        Self { plan, refined, family_size: 24, ..Self::default() }
    }
}

/// Trapezoid in log t for the square functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TQuadrature {
    pub t_min: f64,
    pub t_max: f64,
    pub nodes: usize,
}

impl Default for TQuadrature {
    fn default() -> Self {
        Self { t_min: 1e-6, t_max: 1e6, nodes: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub member: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

/// Ratio of two norms over the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub label: String,
    pub rows: Vec<NormRow>,
    pub max_ratio: f64,
    pub argmax: Option<usize>,
    pub min_ratio: f64,
    /// Running maximum over family prefixes.
    pub trajectory: Vec<f64>,
    /// Less than 10% growth of the running maximum over the last half.
    pub saturated: bool,
    pub refined_max_ratio: f64,
    pub refinement_drift: f64,
    pub threshold: f64,
    /// Exact value of the ratio when one is known.
    pub sharp_value: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub member: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowUse {
    pub direction: String,
    pub window: WindowSpec,
    pub admissibility: AdmissibilityReport,
    pub in_scope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub radial_nodes: usize,
    pub spectral_nodes: usize,
    pub radial_id: u64,
    pub r_max: f64,
    pub lambda_max: f64,
    pub round_trip: f64,
    pub refined_radial_nodes: usize,
    pub refined_spectral_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema: String,
    pub inequality_id: String,
    pub theorem: String,
    pub scope: String,
    pub d: u32,
    pub a: f64,
    pub s: Option<f64>,
    pub alpha: Option<f64>,
    pub p: f64,
    pub weight: WeightSpec,
    pub windows: Vec<WindowUse>,
    pub seed: u64,
    pub family_size: usize,
    pub series: Vec<RatioSeries>,
    pub max_ratio: f64,
    pub argmax: Option<usize>,
    pub threshold: f64,
    /// Worst relative disagreement between the two routes to L_a^{s/2}.
    pub route_agreement: f64,
    pub excluded: Vec<Exclusion>,
    pub grid: GridMeta,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Certificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.schema != SCHEMA {
            return Err(Error::Config(format!("unknown certificate schema {}", c.schema)));
        }
        Ok(c)
    }

    /// Write through a temporary file so readers never see a partial file.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()? + "\n")?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn file_name(&self) -> String {
        let mut name = format!("{}_d{}_a{}", self.inequality_id, self.d, self.a);
        if let Some(s) = self.s {
            name.push_str(&format!("_s{s}"));
        }
        if let Some(al) = self.alpha {
            name.push_str(&format!("_alpha{al}"));
        }
        name.push_str(&format!("_p{}_{}.json", self.p, weight_tag(&self.weight)));
        name.replace(['/', ' ', '|', '^', '(', ')', '+'], "")
    }
}

fn weight_tag(w: &WeightSpec) -> String {
    match &w.kind {
        crate::spectrum::WeightKind::Power { alpha } => format!("w{alpha}"),
        crate::spectrum::WeightKind::Composite { eps } => format!("weps{eps}"),
        crate::spectrum::WeightKind::Table { .. } => "wtable".into(),
    }
}

/// Which square functional: S_{L,alpha}, or the s-weighted variant
/// (int t^{-s} |t L e^{-tL} f|^2 dt/t)^{1/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SquareKind {
    Alpha { alpha: f64 },
    Weighted { s: f64 },
}

impl SquareKind {
    /// (beta, pre) with multiplier lambda^pre (t lambda^2)^beta e^{-t lambda^2}.
    fn exponents(&self) -> Result<(f64, f64)> {
        match *self {
            SquareKind::Alpha { alpha } if alpha > 0.0 && alpha < 1.0 => Ok((1.0 - alpha, 0.0)),
            SquareKind::Weighted { s } if s > 0.0 && s < 2.0 => Ok((1.0 - 0.5 * s, s)),
            k => Err(Error::Domain(format!("square function {k:?} needs alpha in (0,1) or s in (0,2)"))),
        }
    }

    /// ||S f||_2 / ||L^{pre/2} f||_2 = (Gamma(2 beta) 2^{-2 beta})^{1/2}.
    pub fn plancherel_scalar(&self) -> Result<f64> {
        let (beta, _) = self.exponents()?;
        Ok((gamma(2.0 * beta)? * 2f64.powf(-2.0 * beta)).sqrt())
    }
}

/// Pointwise square function with quadrature diagnostics.
#[derive(Debug, Clone)]
pub struct SquareFunction {
    pub values: RadialFunction,
    /// L^2 norm of the same t-quadrature evaluated on the spectral side,
    /// which also counts the part of S f beyond r_max.
    pub spectral_l2: f64,
    pub grid_l2: f64,
    /// Share of the t < t_min part in the grid L^2 norm squared.
    pub left_tail_fraction: f64,
    /// Share of the last t-node in the grid L^2 norm squared.
    pub right_edge_fraction: f64,
}

struct TermSet<'a> {
    plan: &'a HankelPlan,
    fhat: &'a [Complex64],
    sign: f64,
}

/// Core of the square functions: the signed sum of `terms` is the
/// multiplied function at each t; returns S^2 on the common grid and the
/// left-tail and right-edge energies.
fn square_pointwise(terms: &[TermSet], beta: f64, pre: f64, tq: &TQuadrature) -> Result<(Vec<f64>, f64, f64)> {
    if !(tq.t_min > 0.0 && tq.t_max > tq.t_min && tq.nodes >= 3) {
        return Err(Error::Config(format!("invalid t-quadrature {tq:?}")));
    }
    let k = tq.nodes;
    let (u0, u1) = (tq.t_min.ln(), tq.t_max.ln());
    let h = (u1 - u0) / (k - 1) as f64;
    let ts: Vec<f64> = (0..k).map(|i| (u0 + i as f64 * h).exp()).collect();
    // columns: k nodes, d/du at both ends, three small-t Taylor terms
    let ncols = k + 5;
    let nr = terms[0].plan.radial.len();
    let mut acc = Array2::<f64>::zeros((nr, 2 * ncols));
    for term in terms {
        let lams = term.plan.lambdas();
        let mut y = Array2::<f64>::zeros((lams.len(), 2 * ncols));
        for (j, (&l, f)) in lams.iter().zip(term.fhat).enumerate() {
            let l2 = l * l;
            let lp = if pre == 0.0 { 1.0 } else { l.powf(pre) };
            let m = |t: f64| lp * (t * l2).powf(beta) * (-t * l2).exp();
            let mut put = |c: usize, v: f64| {
                let z = f * (term.sign * v);
                y[[j, 2 * c]] = z.re;
                y[[j, 2 * c + 1]] = z.im;
            };
            for (c, &t) in ts.iter().enumerate() {
                put(c, m(t));
            }
            put(k, (beta - ts[0] * l2) * m(ts[0]));
            put(k + 1, (beta - ts[k - 1] * l2) * m(ts[k - 1]));
            for q in 0..3 {
                put(k + 2 + q, lp * l.powf(2.0 * beta + 2.0 * q as f64));
            }
        }
        acc += &term.plan.inverse_cols(&y);
    }
    let col = |i: usize, c: usize| Complex64::new(acc[[i, 2 * c]], acc[[i, 2 * c + 1]]);
    let tm = tq.t_min;
    let fact = [1.0, 1.0, 2.0];
    let mut s2 = Vec::with_capacity(nr);
    let (mut left, mut edge) = (Vec::with_capacity(nr), Vec::with_capacity(nr));
    for i in 0..nr {
        let mut sum = 0.0;
        for c in 0..k {
            let e = if c == 0 || c == k - 1 { 0.5 } else { 1.0 };
            sum += e * col(i, c).norm_sqr();
        }
        let dg0 = 2.0 * (col(i, 0).conj() * col(i, k)).re;
        let dg1 = 2.0 * (col(i, k - 1).conj() * col(i, k + 1)).re;
        let mut tail = 0.0;
        for a in 0..3 {
            for b in 0..3 - a {
                let g = (col(i, k + 2 + a) * col(i, k + 2 + b).conj()).re;
                let e = 2.0 * beta + (a + b) as f64;
                let sgn = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                tail += sgn / (fact[a] * fact[b]) * g * tm.powf(e) / e;
            }
        }
        let v = h * sum - h * h / 12.0 * (dg1 - dg0) + tail;
        s2.push(v.max(0.0));
        left.push(tail.abs());
        edge.push(h * col(i, k - 1).norm_sqr());
    }
    let grid = &terms[0].plan.radial;
    let integ = |v: &[f64]| -> f64 { v.iter().zip(&grid.quad_weights).map(|(a, w)| a * w).sum() };
    let total = integ(&s2);
    let (lf, ef) = if total > 0.0 { (integ(&left) / total, integ(&edge) / total) } else { (0.0, 0.0) };
    Ok((s2, lf, ef))
}

/// int_0^inf (lambda^pre (t lambda^2)^beta e^{-t lambda^2})^2 dt/t by the
/// pointwise rule's trapezoid, with the t < t_min part in closed form.
fn square_symbol(l: f64, beta: f64, pre: f64, tq: &TQuadrature) -> Result<f64> {
    let k = tq.nodes;
    let (u0, u1) = (tq.t_min.ln(), tq.t_max.ln());
    let h = (u1 - u0) / (k - 1) as f64;
    let l2 = l * l;
    let lp2 = if pre == 0.0 { 1.0 } else { l.powf(2.0 * pre) };
    let g = |t: f64| lp2 * (t * l2).powf(2.0 * beta) * (-2.0 * t * l2).exp();
    let dg = |t: f64| 2.0 * (beta - t * l2) * g(t);
    let mut sum = 0.0;
    for c in 0..k {
        let e = if c == 0 || c == k - 1 { 0.5 } else { 1.0 };
        sum += e * g((u0 + c as f64 * h).exp());
    }
    let (p_left, _) = gamma_pq(2.0 * beta, 2.0 * tq.t_min * l2)?;
    let left = lp2 * 2f64.powf(-2.0 * beta) * gamma(2.0 * beta)? * p_left;
    Ok(h * sum - h * h / 12.0 * (dg(tq.t_max) - dg(tq.t_min)) + left)
}

/// ||S f||_2 from the spectrum alone, with the share of the last t-node.
pub fn square_l2_spectral(plan: &HankelPlan, kind: SquareKind, fhat: &[Complex64], tq: &TQuadrature) -> Result<(f64, f64)> {
    let (beta, pre) = kind.exponents()?;
    let (mut spec, mut edge) = (0.0, 0.0);
    let h = (tq.t_max.ln() - tq.t_min.ln()) / (tq.nodes - 1) as f64;
    for ((l, w), z) in plan.lambdas().iter().zip(&plan.spectral.quad_weights).zip(fhat) {
        let a = w * z.norm_sqr();
        spec += a * square_symbol(*l, beta, pre, tq)?;
        let m = l.powf(pre) * (tq.t_max * l * l).powf(beta) * (-tq.t_max * l * l).exp();
        edge += a * h * m * m;
    }
    let frac = if spec > 0.0 { edge / spec } else { 0.0 };
    Ok(((sphere_area(plan.d()) * spec).sqrt(), frac))
}

fn check_edge(edge: f64, tq: &TQuadrature) -> Result<()> {
    if edge > 1e-8 {
        return Err(Error::Quadrature(format!(
            "square-function t-integral has not decayed at t = {:e} ({edge:.2e} of the total)",
            tq.t_max
        )));
    }
    Ok(())
}

/// S_{L,alpha} f (or the s-weighted variant) on the plan's radial grid.
pub fn square_function(plan: &HankelPlan, kind: SquareKind, f: &RadialFunction, tq: &TQuadrature) -> Result<SquareFunction> {
    let (beta, pre) = kind.exponents()?;
    let fhat = plan.forward(f)?;
    let (s2, left, edge) = square_pointwise(&[TermSet { plan, fhat: &fhat, sign: 1.0 }], beta, pre, tq)?;
    check_edge(edge, tq)?;
    let (spectral_l2, _) = square_l2_spectral(plan, kind, &fhat, tq)?;
    let values = RadialFunction::new(plan.radial.clone(), s2.iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect())?;
    let grid_l2 = values.l2_norm();
    Ok(SquareFunction { values, spectral_l2, grid_l2, left_tail_fraction: left, right_edge_fraction: edge })
}

/// Difference square function
/// (int t^{-s} |(t L_a e^{-t L_a} - t(-Delta) e^{t Delta}) f|^2 dt/t)^{1/2}.
pub fn difference_square_function(
    plan: &HankelPlan,
    free: &HankelPlan,
    s: f64,
    f: &RadialFunction,
    tq: &TQuadrature,
) -> Result<RadialFunction> {
    if plan.radial.id() != free.radial.id() {
        return Err(Error::GridMismatch("difference square function needs plans on one radial grid".into()));
    }
    let (beta, pre) = SquareKind::Weighted { s }.exponents()?;
    if std::ptr::eq(plan, free) || plan.nu == free.nu {
        return Ok(RadialFunction::from_real(&plan.radial, |_| 0.0));
    }
    let fa = plan.forward(f)?;
    let f0 = free.forward(f)?;
    let (s2, _, _) = square_pointwise(
        &[TermSet { plan, fhat: &fa, sign: 1.0 }, TermSet { plan: free, fhat: &f0, sign: -1.0 }],
        beta,
        pre,
        tq,
    )?;
    RadialFunction::new(plan.radial.clone(), s2.iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect())
}

/// L^{s/2} f by the spectral multiplier and by subordination, with their
/// relative L^2 disagreement. For s >= 2 the integer part of s/2 is a
/// plain power of the symbol in both routes.
pub fn power_routes(
    plan: &HankelPlan,
    f: &RadialFunction,
    s: f64,
    cfg: &SubordinationConfig,
) -> Result<(RadialFunction, RadialFunction, f64)> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("fractional power needs s > 0, got {s}")));
    }
    let mult = plan.apply_multiplier(f, power(s))?;
    let k = (0.5 * s).floor();
    let rest = s - 2.0 * k;
    let sub = if rest < 1e-12 {
        plan.apply_multiplier(f, power(2.0 * k))?
    } else {
        let g = plan.fractional_power_subordination_with(f, rest, Direction::Positive, cfg)?;
        if k > 0.0 {
            plan.apply_multiplier(&g, power(2.0 * k))?
        } else {
            g
        }
    };
    let norm = mult.l2_norm();
    let diff = mult.sub(&sub)?.l2_norm();
    let agreement = if norm > 0.0 { diff / norm } else { diff };
    Ok((mult, sub, agreement))
}

fn over_power(f: &RadialFunction, s: f64) -> RadialFunction {
    let values = f.nodes().iter().zip(&f.values).map(|(r, v)| v / r.powf(s)).collect();
    RadialFunction { grid: f.grid.clone(), values }
}

/// Reason to drop a member whose |x|^{-s p} w r^{d-1} side is not
/// integrable at the origin.
fn singular_exclusion(f: &RadialFunction, s: f64, p: f64, w: &WeightSpec, d: u32) -> Option<String> {
    let e0 = w.envelope().0;
    let expo = e0 + d as f64 - s * p;
    if expo > 0.0 {
        return None;
    }
    let head = f.values[0].norm();
    (head > 1e-10 * f.max_abs()).then(|| {
        format!("|x|^(-{s}p) w r^(d-1) has exponent {:.3} at 0 and f(0) = {head:.2e} is not negligible", expo - 1.0)
    })
}

struct Level {
    plan: HankelPlan,
    free: Option<HankelPlan>,
    members: Vec<RadialFunction>,
}

impl Level {
    fn free(&self) -> &HankelPlan {
        self.free.as_ref().unwrap_or(&self.plan)
    }
}

enum Outcome {
    Excluded(String),
    Values { pairs: Vec<(f64, f64)>, agreement: f64 },
}

struct SeriesSpec {
    label: String,
    threshold: f64,
    sharp: Option<f64>,
    /// The ratio must also not fall below the sharp value.
    two_sided: bool,
}

fn window_use(params: &ModelParams, theorem: TheoremId, direction: &str, s: f64, p: f64, w: &WeightSpec) -> Result<WindowUse> {
    let win = window(params, s, theorem)?;
    let adm = weight_admissible(w, Exponent(p), win.ap_index, win.rh_index, params.d);
    let in_scope = win.valid && win.contains(p) && adm.admissible;
    Ok(WindowUse { direction: direction.into(), window: win, admissibility: adm, in_scope })
}

/// Which workbench inequality a preflight check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    Hardy,
    Equivalence,
    Square,
    Difference,
}

/// The window and weight checks a workbench would run, without building plans.
/// `s` is ignored for the square functions.
pub fn preflight(params: &ModelParams, which: Inequality, s: f64, p: f64, w: &WeightSpec) -> Result<()> {
    let one = |th: TheoremId, s: f64| -> Result<()> { Workbench::require(&window_use(params, th, "", s, p, w)?, p) };
    match which {
        Inequality::Hardy => one(TheoremId::Hardy, s),
        Inequality::Square => one(TheoremId::Square, 0.0),
        Inequality::Difference => one(TheoremId::Difference, s),
        Inequality::Equivalence => {
            let f = one(TheoremId::EquivForward, s);
            if f.is_ok() {
                return f;
            }
            one(TheoremId::EquivReverse, s).map_err(|_| f.unwrap_err())
        }
    }
}

/// Holds the plans and the family for one (d, a) and issues certificates.
pub struct Workbench {
    pub params: ModelParams,
    pub config: HarnessConfig,
    pub family: TestFamily,
    coarse: Level,
    refined: Level,
}

impl Workbench {
    pub fn new(params: &ModelParams, config: &HarnessConfig) -> Result<Self> {
        let level = |pc: &PlanConfig| -> Result<(HankelPlan, Option<HankelPlan>)> {
            let plan = build_plan(params, BesselOrder::Radial, pc)?;
            let free = if params.a == 0.0 { None } else { Some(build_plan(params, BesselOrder::Free, pc)?) };
            Ok((plan, free))
        };
        let (plan, free) = level(&config.plan)?;
        let family = TestFamily::build(&plan, config.seed, config.family_size)?;
        let (rplan, rfree) = level(&config.refined)?;
        let rmembers = family.on_grid(&rplan.radial);
        let coarse = Level { plan, free, members: family.members.clone() };
        let refined = Level { plan: rplan, free: rfree, members: rmembers };
        Ok(Self { params: *params, config: config.clone(), family, coarse, refined })
    }

    pub fn plan(&self) -> &HankelPlan {
        &self.coarse.plan
    }

    /// Plan of order (d-2)/2 on the same grid; the working plan itself when a = 0.
    pub fn free_plan(&self) -> &HankelPlan {
        self.coarse.free()
    }

    fn grid_meta(&self) -> GridMeta {
        let p = &self.coarse.plan;
        let st = p.self_test;
        GridMeta {
            radial_nodes: p.radial.len(),
            spectral_nodes: p.spectral.len(),
            radial_id: p.radial.id(),
            r_max: p.config.r_max,
            lambda_max: p.config.lambda_max,
            round_trip: st.round_trip.max(st.plancherel),
            refined_radial_nodes: self.refined.plan.radial.len(),
            refined_spectral_nodes: self.refined.plan.spectral.len(),
        }
    }

    fn scope(&self, theorem: TheoremId, direction: &str, s: f64, p: f64, w: &WeightSpec) -> Result<WindowUse> {
        window_use(&self.params, theorem, direction, s, p, w)
    }

    fn require(u: &WindowUse, p: f64) -> Result<()> {
        if !u.window.valid || !u.window.contains(p) {
            return Err(Error::Window(format!(
                "{}: p = {p} not in ({}, {}) ({})",
                u.window.theorem.name(),
                u.window.p_lower,
                u.window.p_upper,
                u.window.reason
            )));
        }
        if !u.admissibility.admissible {
            return Err(Error::Inadmissible(u.admissibility.detail.clone()));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn certify<F>(
        &self,
        id: &str,
        theorem: TheoremId,
        s: Option<f64>,
        alpha: Option<f64>,
        p: f64,
        w: &WeightSpec,
        windows: Vec<WindowUse>,
        specs: Vec<SeriesSpec>,
        mut notes: Vec<String>,
        eval: F,
    ) -> Result<Certificate>
    where
        F: Fn(&Level, &RadialFunction) -> Result<Outcome>,
    {
        let run = |lv: &Level| -> Result<(Vec<Option<Vec<(f64, f64)>>>, Vec<Exclusion>, f64)> {
            let mut out = Vec::with_capacity(lv.members.len());
            let mut excl = Vec::new();
            let mut agree = 0.0f64;
            for (i, f) in lv.members.iter().enumerate() {
                match eval(lv, f)? {
                    Outcome::Excluded(reason) => {
                        excl.push(Exclusion { member: i, reason });
                        out.push(None);
                    }
                    Outcome::Values { pairs, agreement } => {
                        if !(agreement <= ROUTE_TOL) {
                            return Err(Error::RouteDisagreement(format!(
                                "member {i}: multiplier and subordination differ by {agreement:.3e}"
                            )));
                        }
                        agree = agree.max(agreement);
                        out.push(Some(pairs));
                    }
                }
            }
            Ok((out, excl, agree))
        };
        let (coarse, excluded, agree_c) = run(&self.coarse)?;
        let (fine, _, agree_f) = run(&self.refined)?;
        let mut series = Vec::with_capacity(specs.len());
        for (k, spec) in specs.into_iter().enumerate() {
            let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
            let mut rows = Vec::new();
            let mut trajectory = Vec::with_capacity(coarse.len());
            let (mut max, mut min, mut argmax) = (0.0f64, f64::INFINITY, None);
            for (i, v) in coarse.iter().enumerate() {
                if let Some(pairs) = v {
                    let (num, den) = pairs[k];
                    let r = ratio(num, den);
                    rows.push(NormRow { member: i, numerator: num, denominator: den, ratio: r });
                    if argmax.is_none() || r > max || r.is_nan() {
                        max = r;
                        argmax = Some(i);
                    }
                    min = min.min(r);
                }
                trajectory.push(max);
            }
            let mut rmax = 0.0f64;
            for (v, c) in fine.iter().zip(&coarse) {
                if let (Some(pairs), Some(_)) = (v, c) {
                    rmax = rmax.max(ratio(pairs[k].0, pairs[k].1));
                }
            }
            let drift = if max == 0.0 && rmax == 0.0 { 0.0 } else { (rmax - max).abs() / max.abs().max(rmax.abs()) };
            let n = trajectory.len();
            let saturated = n < 2 || {
                let mid = trajectory[(n - 1) / 2];
                let last = trajectory[n - 1];
                if mid > 0.0 {
                    last / mid - 1.0 < SATURATION_GROWTH
                } else {
                    last == 0.0
                }
            };
            let threshold = spec.sharp.map(|v| v + SHARP_SLACK).unwrap_or(spec.threshold);
            let low_ok = !spec.two_sided || spec.sharp.map(|v| min >= v - SHARP_SLACK).unwrap_or(true);
            let pass = max.is_finite() && max <= threshold && drift < DRIFT_TOL && low_ok && !rows.is_empty();
            if rows.is_empty() {
                notes.push(format!("{}: every member was excluded", spec.label));
            }
            series.push(RatioSeries {
                label: spec.label,
                rows,
                max_ratio: max,
                argmax,
                min_ratio: if min.is_finite() { min } else { 0.0 },
                trajectory,
                saturated,
                refined_max_ratio: rmax,
                refinement_drift: drift,
                threshold,
                sharp_value: spec.sharp,
                pass,
            });
        }
        let (mut max, mut argmax, mut threshold) = (0.0f64, None, self.config.threshold);
        for sr in &series {
            if argmax.is_none() || sr.max_ratio > max {
                max = sr.max_ratio;
                argmax = sr.argmax;
                threshold = sr.threshold;
            }
        }
        let pass = !series.is_empty() && series.iter().all(|s| s.pass);
        Ok(Certificate {
            schema: SCHEMA.into(),
            inequality_id: id.into(),
            theorem: theorem.name().into(),
            scope: SCOPE.into(),
            d: self.params.d,
            a: self.params.a,
            s,
            alpha,
            p,
            weight: w.clone(),
            windows,
            seed: self.family.seed,
            family_size: self.family.len(),
            series,
            max_ratio: max,
            argmax,
            threshold,
            route_agreement: agree_c.max(agree_f),
            excluded,
            grid: self.grid_meta(),
            notes,
            pass,
        })
    }

    /// || |x|^{-s} f ||_{L^p_w} / || L_a^{s/2} f ||_{L^p_w}.
    pub fn hardy(&self, s: f64, p: f64, w: &WeightSpec) -> Result<Certificate> {
        let u = self.scope(TheoremId::Hardy, "hardy", s, p, w)?;
        Self::require(&u, p)?;
        let sharp = (p == 2.0 && *w == WeightSpec::constant() && s == 1.0 && self.params.nu0 > 0.0)
            .then(|| 1.0 / self.params.nu0);
        let mut notes = Vec::new();
        if sharp.is_some() {
            notes.push("sharp threshold from <L_a f, f> >= nu0^2 || f/|x| ||^2".into());
        }
        let d = self.params.d;
        let sub = self.config.subordination;
        let spec = SeriesSpec {
            label: "|| |x|^-s f || / || L^(s/2) f ||".into(),
            threshold: self.config.threshold,
            sharp,
            two_sided: false,
        };
        self.certify("hardy", TheoremId::Hardy, Some(s), None, p, w, vec![u], vec![spec], notes, |lv, f| {
            if let Some(reason) = singular_exclusion(f, s, p, w, d) {
                return Ok(Outcome::Excluded(reason));
            }
            let (mult, _, agreement) = power_routes(&lv.plan, f, s, &sub)?;
            let num = weighted_lp_norm(&over_power(f, s), w, p);
            let den = weighted_lp_norm(&mult, w, p);
            Ok(Outcome::Values { pairs: vec![(num, den)], agreement })
        })
    }

    /// Both directions of || (-Delta)^{s/2} f || ~ || L_a^{s/2} f ||, each
    /// only where its window and weight class allow it.
    pub fn equivalence(&self, s: f64, p: f64, w: &WeightSpec) -> Result<Certificate> {
        let fwd = self.scope(TheoremId::EquivForward, "forward", s, p, w)?;
        let rev = self.scope(TheoremId::EquivReverse, "reverse", s, p, w)?;
        if !fwd.in_scope && !rev.in_scope {
            Self::require(&fwd, p)?;
            Self::require(&rev, p)?;
        }
        let mut specs = Vec::new();
        let (use_f, use_r) = (fwd.in_scope, rev.in_scope);
        let th = self.config.threshold;
        if use_f {
            specs.push(SeriesSpec { label: "|| (-Delta)^(s/2) f || / || L^(s/2) f ||".into(), threshold: th, sharp: None, two_sided: false });
        }
        if use_r {
            specs.push(SeriesSpec { label: "|| L^(s/2) f || / || (-Delta)^(s/2) f ||".into(), threshold: th, sharp: None, two_sided: false });
        }
        let sub = self.config.subordination;
        self.certify("equivalence", TheoremId::EquivForward, Some(s), None, p, w, vec![fwd, rev], specs, vec![], |lv, f| {
            let (la, _, ag1) = power_routes(&lv.plan, f, s, &sub)?;
            let (fr, _, ag2) = power_routes(lv.free(), f, s, &sub)?;
            let nl = weighted_lp_norm(&la, w, p);
            let nf = weighted_lp_norm(&fr, w, p);
            let mut pairs = Vec::new();
            if use_f {
                pairs.push((nf, nl));
            }
            if use_r {
                pairs.push((nl, nf));
            }
            Ok(Outcome::Values { pairs, agreement: ag1.max(ag2) })
        })
    }

    /// || S f || / || f || and its inverse for S_{L,alpha}, or
    /// || S_s f || / || L^{s/2} f || for the s-weighted variant.
    pub fn square(&self, kind: SquareKind, p: f64, w: &WeightSpec) -> Result<Certificate> {
        let u = self.scope(TheoremId::Square, "square", 0.0, p, w)?;
        Self::require(&u, p)?;
        let (_, pre) = kind.exponents()?;
        let l2 = p == 2.0 && *w == WeightSpec::constant();
        let scalar = kind.plancherel_scalar()?;
        let th = self.config.threshold;
        let specs = vec![
            SeriesSpec { label: "|| S f || / || f ||".into(), threshold: th, sharp: l2.then_some(scalar), two_sided: true },
            SeriesSpec { label: "|| f || / || S f ||".into(), threshold: th, sharp: l2.then_some(1.0 / scalar), two_sided: true },
        ];
        let mut notes = vec![];
        if l2 {
            notes.push(
                "p = 2, w = 1: || S f ||_2 from the t-quadrature on the spectral side, which includes r > r_max".into(),
            );
        }
        let (id, s, alpha) = match kind {
            SquareKind::Alpha { alpha } => ("square", None, Some(alpha)),
            SquareKind::Weighted { s } => ("square_s", Some(s), None),
        };
        let sub = self.config.subordination;
        let tq = self.config.square_t;
        self.certify(id, TheoremId::Square, s, alpha, p, w, vec![u], specs, notes, |lv, f| {
            let (num, den, agreement) = if l2 {
                let fhat = lv.plan.forward(f)?;
                let (num, edge) = square_l2_spectral(&lv.plan, kind, &fhat, &tq)?;
                check_edge(edge, &tq)?;
                let lifted: Vec<Complex64> = fhat.iter().zip(lv.plan.lambdas()).map(|(z, l)| z * l.powf(pre)).collect();
                let agreement = if pre > 0.0 { power_routes(&lv.plan, f, pre, &sub)?.2 } else { 0.0 };
                (num, lv.plan.spectral_norm(&lifted), agreement)
            } else {
                let sq = square_function(&lv.plan, kind, f, &tq)?;
                let (base, agreement) = if pre > 0.0 {
                    let (m, _, ag) = power_routes(&lv.plan, f, pre, &sub)?;
                    (m, ag)
                } else {
                    (f.clone(), 0.0)
                };
                (weighted_lp_norm(&sq.values, w, p), weighted_lp_norm(&base, w, p), agreement)
            };
            Ok(Outcome::Values { pairs: vec![(num, den), (den, num)], agreement })
        })
    }

    /// || (int t^{-s} |(t L_a e^{-t L_a} + t Delta e^{t Delta}) f|^2 dt/t)^{1/2} ||
    /// over || f / |x|^s ||, both in L^p_w.
    pub fn difference(&self, s: f64, p: f64, w: &WeightSpec) -> Result<Certificate> {
        let u = self.scope(TheoremId::Difference, if self.params.a >= 0.0 { "case a >= 0" } else { "case a < 0" }, s, p, w)?;
        Self::require(&u, p)?;
        let d = self.params.d;
        let tq = self.config.square_t;
        let spec = SeriesSpec {
            label: "|| difference square function || / || f / |x|^s ||".into(),
            threshold: self.config.threshold,
            sharp: None,
            two_sided: false,
        };
        let mut notes = vec![];
        if self.params.a == 0.0 {
            notes.push("a = 0: the two operators coincide and the left side vanishes identically".into());
        }
        self.certify("difference", TheoremId::Difference, Some(s), None, p, w, vec![u], vec![spec], notes, |lv, f| {
            if let Some(reason) = singular_exclusion(f, s, p, w, d) {
                return Ok(Outcome::Excluded(reason));
            }
            let g = difference_square_function(&lv.plan, lv.free(), s, f, &tq)?;
            let num = weighted_lp_norm(&g, w, p);
            let den = weighted_lp_norm(&over_power(f, s), w, p);
            Ok(Outcome::Values { pairs: vec![(num, den)], agreement: 0.0 })
        })
    }
}

pub fn verify_hardy(params: &ModelParams, s: f64, p: f64, w: &WeightSpec, cfg: &HarnessConfig) -> Result<Certificate> {
    Workbench::new(params, cfg)?.hardy(s, p, w)
}

pub fn verify_equivalence(params: &ModelParams, s: f64, p: f64, w: &WeightSpec, cfg: &HarnessConfig) -> Result<Certificate> {
    Workbench::new(params, cfg)?.equivalence(s, p, w)
}

pub fn verify_square_equiv(params: &ModelParams, kind: SquareKind, p: f64, w: &WeightSpec, cfg: &HarnessConfig) -> Result<Certificate> {
    Workbench::new(params, cfg)?.square(kind, p, w)
}

pub fn verify_difference_square(params: &ModelParams, s: f64, p: f64, w: &WeightSpec, cfg: &HarnessConfig) -> Result<Certificate> {
    Workbench::new(params, cfg)?.difference(s, p, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::make_params;

    fn bench(d: u32, a: f64) -> Workbench {
        let cfg = HarnessConfig { family_size: 12, ..HarnessConfig::quick() };
        Workbench::new(&make_params(d, a).unwrap(), &cfg).unwrap()
    }

    #[test]
    fn family_is_deterministic_and_prefix_stable() {
        let params = make_params(3, 1.0).unwrap();
        let cfg = HarnessConfig::quick();
        let plan = build_plan(&params, BesselOrder::Radial, &cfg.plan).unwrap();
        let a = TestFamily::build(&plan, 7, 10).unwrap();
        let b = TestFamily::build(&plan, 7, 20).unwrap();
        assert_eq!(a.specs[..], b.specs[..10]);
        let c = TestFamily::build(&plan, 8, 10).unwrap();
        assert_ne!(a.specs, c.specs);
        for f in &b.members {
            let n = f.l2_norm();
            assert!((1e-6..=1e6).contains(&n));
        }
    }

    #[test]
    fn hardy_sharp_constant_free_case() {
        let wb = bench(3, 0.0);
        let c = wb.hardy(1.0, 2.0, &WeightSpec::constant()).unwrap();
        assert!(c.pass, "{:#?}", c.series[0]);
        assert!(c.max_ratio <= 2.0 + 1e-6);
        assert!(c.route_agreement <= 1e-6);
        let again = wb.hardy(1.0, 2.0, &WeightSpec::constant()).unwrap();
        assert_eq!(c.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn equivalence_is_identity_without_potential() {
        let wb = bench(3, 0.0);
        let c = wb.equivalence(1.0, 2.0, &WeightSpec::constant()).unwrap();
        for s in &c.series {
            assert!((s.max_ratio - 1.0).abs() < 1e-7 && (s.min_ratio - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn square_scalar_matches_one_dimensional_integral() {
        for alpha in [0.25, 0.5, 0.75] {
            let k = SquareKind::Alpha { alpha };
            let b = 1.0 - alpha;
            let direct = crate::quad::integrate(|u: f64| (2.0 * b * u - 2.0 * u.exp()).exp(), -60.0, 8.0, 400, 16);
            assert!((k.plancherel_scalar().unwrap() - direct.sqrt()).abs() < 1e-12);
        }
        assert!((SquareKind::Alpha { alpha: 0.5 }.plancherel_scalar().unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn square_function_of_zero_and_plancherel() {
        let wb = bench(3, 1.0);
        let plan = wb.plan();
        let tq = TQuadrature::default();
        let zero = RadialFunction::from_real(&plan.radial, |_| 0.0);
        let s0 = square_function(plan, SquareKind::Alpha { alpha: 0.5 }, &zero, &tq).unwrap();
        assert!(s0.values.max_abs() == 0.0);
        let f = &wb.family.members[0];
        for alpha in [0.25, 0.5, 0.75] {
            let k = SquareKind::Alpha { alpha };
            let sq = square_function(plan, k, f, &tq).unwrap();
            let r = sq.spectral_l2 / f.l2_norm();
            assert!((r - k.plancherel_scalar().unwrap()).abs() < 1e-6, "alpha {alpha}: {r}");
            // the grid misses only the far tail of S f
            assert!(sq.grid_l2 <= sq.spectral_l2 * (1.0 + 1e-6));
            assert!(sq.grid_l2 >= 0.99 * sq.spectral_l2);
        }
    }

    #[test]
    fn square_certificate_unimodular_invariance() {
        let wb = bench(3, 1.0);
        let c = wb.square(SquareKind::Alpha { alpha: 0.5 }, 2.0, &WeightSpec::constant()).unwrap();
        assert!(c.pass, "{:#?}", c.series);
        let f = &wb.family.members[1];
        let g = f.scale(Complex64::from_polar(1.0, 0.7));
        let tq = TQuadrature::default();
        let k = SquareKind::Alpha { alpha: 0.5 };
        let a = square_function(wb.plan(), k, f, &tq).unwrap();
        let b = square_function(wb.plan(), k, &g, &tq).unwrap();
        assert!(a.values.sub(&b.values).unwrap().l2_norm() <= 1e-12 * a.grid_l2);
    }

    #[test]
    fn difference_vanishes_without_potential() {
        let wb = bench(3, 0.0);
        let c = wb.difference(0.5, 2.0, &WeightSpec::constant()).unwrap();
        assert_eq!(c.max_ratio, 0.0);
        assert!(c.pass);
    }

    #[test]
    fn out_of_window_is_rejected() {
        let wb = bench(3, 0.0);
        assert!(matches!(wb.hardy(1.0, 3.5, &WeightSpec::constant()), Err(Error::Window(_))));
        assert!(matches!(wb.hardy(1.0, 2.0, &WeightSpec::power(-3.5)), Err(Error::Inadmissible(_))));
    }
}
