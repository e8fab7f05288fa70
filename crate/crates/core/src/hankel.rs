//! Radial and spectral grids and the order-nu Hankel-type transform
//! diagonalizing `L_a` on radial functions.
//!
//! With `phi_lambda(r) = (lambda r)^{-n} J_nu(lambda r)`, `n = (d-2)/2`,
//!
//! ```text
//! fhat(lambda) = int f(r) phi_lambda(r) r^{d-1} dr
//! f(r)         = int fhat(lambda) phi_lambda(r) lambda^{d-1} dlambda
//! ```
//!
//! and `L_a phi_lambda = lambda^2 phi_lambda`.

use crate::error::{Error, Result};
use crate::quad::{composite, graded_panels, Panel};
use crate::specfun::{bessel_j_pair, gamma, gamma_pq, HermiteTable};
use crate::spectrum::{sphere_area, ModelParams, WeightSpec};
use ndarray::{Array2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

fn fingerprint(d: u32, nodes: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    d.hash(&mut h);
    for x in nodes {
        x.to_bits().hash(&mut h);
    }
    h.finish()
}

fn check_grid(nodes: &[f64], weights: &[f64]) -> Result<()> {
    if nodes.is_empty() || nodes.len() != weights.len() {
        return Err(Error::Config("grid needs matching non-empty nodes and weights".into()));
    }
    if nodes[0] <= 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("grid nodes must be positive and strictly increasing".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Config("grid weights must be positive".into()));
    }
    Ok(())
}

/// Quadrature on (0, r_max] for the measure r^{d-1} dr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub d: u32,
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub panel_edges: Vec<f64>,
    id: u64,
}

impl RadialGrid {
    pub fn from_panels(d: u32, panels: &[Panel]) -> Result<Self> {
        let (nodes, w) = composite(panels);
        let quad_weights: Vec<f64> = nodes.iter().zip(&w).map(|(r, wi)| wi * r.powi(d as i32 - 1)).collect();
        check_grid(&nodes, &quad_weights)?;
        let mut panel_edges: Vec<f64> = panels.iter().map(|p| p.a).collect();
        panel_edges.push(panels.last().map(|p| p.b).unwrap_or(0.0));
        Ok(Self {
            d,
            id: fingerprint(d, &nodes),
            r_min: nodes[0],
            r_max: *panel_edges.last().unwrap(),
            nodes,
            quad_weights,
            panel_edges,
        })
    }

    /// Graded grid resolving angular frequencies up to `density`.
    pub fn graded(d: u32, inner: f64, upper: f64, width: f64, density: f64, base: usize) -> Result<Self> {
        Self::from_panels(d, &graded_panels(inner, upper, width, density, base)?)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Sum of w_i f(r_i), approximating int_0^{r_max} f(r) r^{d-1} dr.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.quad_weights).map(|(r, w)| w * f(*r)).sum()
    }
}

/// Quadrature on (0, lambda_max] for the measure lambda^{d-1} dlambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub d: u32,
    pub lambdas: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub lambda_max: f64,
    id: u64,
}

impl SpectralGrid {
    pub fn from_panels(d: u32, panels: &[Panel]) -> Result<Self> {
        let g = RadialGrid::from_panels(d, panels)?;
        Ok(Self { d, id: fingerprint(d + 1000, &g.nodes), lambda_max: g.r_max, lambdas: g.nodes, quad_weights: g.quad_weights })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn id(&self) -> u64 {
        self.id
    }
}

/// Which Bessel order the plan diagonalizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BesselOrder {
    /// nu0, radial functions under L_a
    Radial,
    /// nu_l, the degree-l harmonic sector
    Zonal(usize),
    /// (d-2)/2, the free Laplacian
    Free,
    Explicit(f64),
}

impl BesselOrder {
    pub fn value(&self, params: &ModelParams) -> f64 {
        match self {
            Self::Radial => params.nu0,
            Self::Zonal(l) => params.nu_ell(*l),
            Self::Free => params.half(),
            Self::Explicit(v) => *v,
        }
    }
}

/// psi(x) = x^{-n} J_nu(x) and psi'(x), tabulated away from the origin.
pub struct Profile {
    pub nu: f64,
    pub n: f64,
    coupling: f64,
    table: Option<HermiteTable>,
    x_switch: f64,
    /// power series of x^{n-nu} psi in x^2, used below x_switch
    series: Vec<f64>,
}

impl Profile {
    pub fn new(nu: f64, n: f64, x_max: f64, step: f64) -> Result<Self> {
        let mut series = Vec::with_capacity(26);
        let mut c = 2f64.powf(-nu) / gamma(nu + 1.0)?;
        for k in 0..26 {
            series.push(c);
            c *= -0.25 / ((k + 1) as f64 * (nu + k as f64 + 1.0));
        }
        let mut p = Self { nu, n, coupling: nu * nu - n * n, table: None, x_switch: 2.0, series };
        if x_max > p.x_switch {
            let table = HermiteTable::build(p.x_switch, x_max * 1.001 + 1.0, step, |x| {
                let (f, fp) = p.direct(x)?;
                let fpp = -(2.0 * n + 1.0) / x * fp - (1.0 - p.coupling / (x * x)) * f;
                Ok([f, fp, fpp])
            })?;
            p.table = Some(table);
        }
        Ok(p)
    }

    /// Direct evaluation through the Bessel routines.
    pub fn direct(&self, x: f64) -> Result<(f64, f64)> {
        let (j, jp) = bessel_j_pair(self.nu, x)?;
        let xn = x.powf(-self.n);
        Ok((xn * j, xn * (jp - self.n * j / x)))
    }

    fn small(&self, x: f64) -> (f64, f64) {
        let e = self.nu - self.n;
        let y = x * x;
        let (mut f, mut fp) = (0.0, 0.0);
        for (k, c) in self.series.iter().enumerate().rev() {
            f = f * y + c;
            fp = fp * y + c * (e + 2.0 * k as f64);
        }
        let xe = x.powf(e);
        (xe * f, xe * fp / x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match &self.table {
            Some(t) if x >= self.x_switch && x <= t.upper() => t.eval(x),
            _ if x > 0.0 && x < self.x_switch => self.small(x),
            _ => self.direct(x).unwrap_or((f64::NAN, f64::NAN)),
        }
    }
}

/// Grid ranges and resolution of a plan; serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub r_max: f64,
    pub r_inner: f64,
    pub r_width: f64,
    pub lambda_max: f64,
    pub lambda_inner: f64,
    pub lambda_width: f64,
    /// Nodes added to every panel on top of the oscillation count.
    pub base_nodes: usize,
    /// Multiplies the oscillation-driven node count.
    pub oversample: f64,
    /// Largest Schroedinger time the lambda grid must resolve.
    pub flow_horizon: f64,
    pub self_test_tol: f64,
    pub table_step: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            r_max: 30.0,
            r_inner: 1e-3,
            r_width: 2.0,
            lambda_max: 30.0,
            lambda_inner: 1e-3,
            lambda_width: 2.0,
            base_nodes: 10,
            oversample: 1.0,
            flow_horizon: 0.0,
            self_test_tol: 1e-8,
            table_step: 0.02,
        }
    }
}

impl PlanConfig {
    pub fn with_ranges(r_max: f64, lambda_max: f64) -> Self {
        Self { r_max, lambda_max, ..Self::default() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Band limit used when sampling test functions for this plan.
    pub fn band(&self) -> f64 {
        0.8 * self.lambda_max
    }

    fn validate(&self) -> Result<()> {
        let ok = self.r_max > self.r_inner
            && self.r_inner > 0.0
            && self.lambda_max > self.lambda_inner
            && self.lambda_inner > 0.0
            && self.r_width > 0.0
            && self.lambda_width > 0.0
            && self.base_nodes >= 2
            && self.oversample >= 0.0
            && self.flow_horizon >= 0.0
            && self.table_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid plan configuration {self:?}")))
        }
    }
}

/// Errors measured by the self-test at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfTest {
    pub round_trip: f64,
    pub plancherel: f64,
}

/// Complex samples of a radial function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<Complex64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: &Arc<RadialGrid>, f: F) -> Self {
        let values = grid.nodes.iter().map(|r| f(*r)).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn from_real<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, f: F) -> Self {
        Self::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self { grid: self.grid.clone(), values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Unweighted L^2(R^d) norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().zip(&self.grid.quad_weights).map(|(v, w)| w * v.norm_sqr()).sum();
        (sphere_area(self.grid.d) * s).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "re", "im"])?;
        for (r, v) in self.grid.nodes.iter().zip(&self.values) {
            w.serialize((r, v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read (r, re, im) rows; the r column must reproduce the grid nodes.
    pub fn read_csv(path: impl AsRef<Path>, grid: &Arc<RadialGrid>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut values = Vec::with_capacity(grid.len());
        for (i, row) in rdr.deserialize::<(f64, f64, f64)>().enumerate() {
            let (r, re, im) = row?;
            match grid.nodes.get(i) {
                Some(x) if (x - r).abs() <= 1e-12 * x.abs().max(1e-300) => values.push(Complex64::new(re, im)),
                _ => return Err(Error::GridMismatch(format!("row {i}: r = {r} is not a node of the grid"))),
            }
        }
        Self::new(grid.clone(), values)
    }
}

fn same_grid(a: &RadialGrid, b: &RadialGrid) -> Result<()> {
    if a.id() == b.id() {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("grids of {} and {} nodes differ", a.len(), b.len())))
    }
}

/// Real columns [re_1, im_1, re_2, im_2, ...] of complex vectors.
pub fn to_columns(vs: &[&[Complex64]]) -> Array2<f64> {
    let n = vs.first().map(|v| v.len()).unwrap_or(0);
    let mut m = Array2::zeros((n, 2 * vs.len()));
    for (k, v) in vs.iter().enumerate() {
        for (i, z) in v.iter().enumerate() {
            m[[i, 2 * k]] = z.re;
            m[[i, 2 * k + 1]] = z.im;
        }
    }
    m
}

/// Inverse of `to_columns`.
pub fn from_columns(m: &Array2<f64>) -> Vec<Vec<Complex64>> {
    (0..m.ncols() / 2)
        .map(|k| (0..m.nrows()).map(|i| Complex64::new(m[[i, 2 * k]], m[[i, 2 * k + 1]])).collect())
        .collect()
}

pub fn heat(t: f64) -> impl Fn(f64) -> Complex64 {
    move |l| Complex64::new((-t * l * l).exp(), 0.0)
}

/// e^{i t lambda^2}, the symbol of e^{i t L_a}.
pub fn schrodinger(t: f64) -> impl Fn(f64) -> Complex64 {
    move |l| Complex64::from_polar(1.0, t * l * l)
}

/// e^{i t lambda}, the symbol of e^{i t L_a^{1/2}}.
pub fn wave(t: f64) -> impl Fn(f64) -> Complex64 {
    move |l| Complex64::from_polar(1.0, t * l)
}

/// lambda^s, the symbol of L_a^{s/2}.
pub fn power(s: f64) -> impl Fn(f64) -> Complex64 {
    move |l| Complex64::new(l.powf(s), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// L_a^{-s/2}
    Negative,
    /// L_a^{s/2}
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationConfig {
    pub t_min: f64,
    pub t_max: f64,
    /// Trapezoid nodes in log t; odd so the half-resolution rule nests.
    pub nodes: usize,
    pub tol: f64,
}

impl Default for SubordinationConfig {
    fn default() -> Self {
        Self { t_min: 1e-8, t_max: 1e8, nodes: 401, tol: 1e-9 }
    }
}

/// Dense transform pair on fixed grids.
pub struct HankelPlan {
    pub params: ModelParams,
    pub order: BesselOrder,
    pub nu: f64,
    pub config: PlanConfig,
    pub radial: Arc<RadialGrid>,
    pub spectral: Arc<SpectralGrid>,
    pub profile: Arc<Profile>,
    pub critical: bool,
    pub self_test: SelfTest,
    /// phi_lambda(r): rows r, columns lambda
    basis: Array2<f64>,
    /// d/dr phi_lambda(r)
    dbasis: Array2<f64>,
}

impl fmt::Debug for HankelPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HankelPlan")
            .field("d", &self.params.d)
            .field("a", &self.params.a)
            .field("nu", &self.nu)
            .field("radial_nodes", &self.radial.len())
            .field("spectral_nodes", &self.spectral.len())
            .field("critical", &self.critical)
            .field("self_test", &self.self_test)
            .finish()
    }
}

/// Build grids, basis matrices and run the round-trip self-test.
pub fn build_plan(params: &ModelParams, order: BesselOrder, config: &PlanConfig) -> Result<HankelPlan> {
    config.validate()?;
    let d = params.d;
    let c = config;
    let r_density = c.oversample * 2.0 * c.lambda_max;
    let l_density = c.oversample * (2.0 * c.r_max + 2.0 * c.flow_horizon * c.lambda_max);
    let radial = Arc::new(RadialGrid::graded(d, c.r_inner, c.r_max, c.r_width, r_density, c.base_nodes)?);
    let spectral = Arc::new(SpectralGrid::from_panels(
        d,
        &graded_panels(c.lambda_inner, c.lambda_max, c.lambda_width, l_density, c.base_nodes)?,
    )?);
    let nu = order.value(params);
    let profile = Arc::new(Profile::new(nu, params.half(), c.r_max * c.lambda_max, c.table_step)?);
    let (nr, nl) = (radial.len(), spectral.len());
    let mut basis = Array2::zeros((nr, nl));
    let mut dbasis = Array2::zeros((nr, nl));
    for (i, r) in radial.nodes.iter().enumerate() {
        for (j, l) in spectral.lambdas.iter().enumerate() {
            let (p, dp) = profile.eval(l * r);
            basis[[i, j]] = p;
            dbasis[[i, j]] = l * dp;
        }
    }
    if basis.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("non-finite basis sample".into()));
    }
    let mut plan = HankelPlan {
        params: *params,
        order,
        nu,
        config: config.clone(),
        radial,
        spectral,
        profile,
        critical: nu == 0.0,
        self_test: SelfTest { round_trip: f64::NAN, plancherel: f64::NAN },
        basis,
        dbasis,
    };
    plan.self_test = plan.run_self_test();
    let st = plan.self_test;
    let worst = st.round_trip.max(st.plancherel);
    if !(worst <= c.self_test_tol) {
        return Err(Error::RoundTrip { error: worst, tol: c.self_test_tol });
    }
    Ok(plan)
}

impl HankelPlan {
    pub fn d(&self) -> u32 {
        self.params.d
    }

    pub fn nodes(&self) -> &[f64] {
        &self.radial.nodes
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.spectral.lambdas
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn dbasis(&self) -> &Array2<f64> {
        &self.dbasis
    }

    /// Columns of samples on the radial grid to spectral columns.
    pub fn forward_cols(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut xw = x.clone();
        for (mut row, w) in xw.axis_iter_mut(Axis(0)).zip(&self.radial.quad_weights) {
            row *= *w;
        }
        self.basis.t().dot(&xw)
    }

    fn weighted_spectral(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut yw = y.clone();
        for (mut row, w) in yw.axis_iter_mut(Axis(0)).zip(&self.spectral.quad_weights) {
            row *= *w;
        }
        yw
    }

    pub fn inverse_cols(&self, y: &Array2<f64>) -> Array2<f64> {
        self.basis.dot(&self.weighted_spectral(y))
    }

    /// Radial derivative of the synthesized columns.
    pub fn inverse_deriv_cols(&self, y: &Array2<f64>) -> Array2<f64> {
        self.dbasis.dot(&self.weighted_spectral(y))
    }

    fn check(&self, f: &RadialFunction) -> Result<()> {
        same_grid(&self.radial, &f.grid)
    }

    fn check_spec(&self, fhat: &[Complex64]) -> Result<()> {
        if fhat.len() == self.spectral.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{} spectral values for {} nodes", fhat.len(), self.spectral.len())))
        }
    }

    pub fn forward(&self, f: &RadialFunction) -> Result<Vec<Complex64>> {
        self.check(f)?;
        Ok(from_columns(&self.forward_cols(&to_columns(&[&f.values]))).remove(0))
    }

    pub fn inverse(&self, fhat: &[Complex64]) -> Result<RadialFunction> {
        self.check_spec(fhat)?;
        let v = from_columns(&self.inverse_cols(&to_columns(&[fhat]))).remove(0);
        Ok(RadialFunction { grid: self.radial.clone(), values: v })
    }

    pub fn inverse_derivative(&self, fhat: &[Complex64]) -> Result<RadialFunction> {
        self.check_spec(fhat)?;
        let v = from_columns(&self.inverse_deriv_cols(&to_columns(&[fhat]))).remove(0);
        Ok(RadialFunction { grid: self.radial.clone(), values: v })
    }

    /// Symbol sampled on the spectral grid.
    pub fn symbol<M: Fn(f64) -> Complex64>(&self, m: M) -> Vec<Complex64> {
        self.spectral.lambdas.iter().map(|l| m(*l)).collect()
    }

    pub fn apply_symbol(&self, f: &RadialFunction, sym: &[Complex64]) -> Result<RadialFunction> {
        self.check_spec(sym)?;
        if sym.iter().any(|z| !z.is_finite()) {
            return Err(Error::Domain("multiplier is not finite on the spectral grid".into()));
        }
        let fhat = self.forward(f)?;
        let g: Vec<Complex64> = fhat.iter().zip(sym).map(|(a, b)| a * b).collect();
        self.inverse(&g)
    }

    pub fn apply_multiplier<M: Fn(f64) -> Complex64>(&self, f: &RadialFunction, m: M) -> Result<RadialFunction> {
        self.apply_symbol(f, &self.symbol(m))
    }

    /// Spectral differentiation in r.
    pub fn radial_derivative(&self, f: &RadialFunction) -> Result<RadialFunction> {
        let fhat = self.forward(f)?;
        self.inverse_derivative(&fhat)
    }

    /// L^2 norm on the spectral side (equals the radial one by Plancherel).
    pub fn spectral_norm(&self, fhat: &[Complex64]) -> f64 {
        let s: f64 = fhat.iter().zip(&self.spectral.quad_weights).map(|(v, w)| w * v.norm_sqr()).sum();
        (sphere_area(self.d()) * s).sqrt()
    }

    /// Synthesize the function with spectrum `fhat` at arbitrary radii.
    pub fn synthesize(&self, fhat: &[Complex64], rs: &[f64]) -> Result<Vec<Complex64>> {
        self.synth(fhat, rs, false)
    }

    pub fn synthesize_derivative(&self, fhat: &[Complex64], rs: &[f64]) -> Result<Vec<Complex64>> {
        self.synth(fhat, rs, true)
    }

    fn synth(&self, fhat: &[Complex64], rs: &[f64], deriv: bool) -> Result<Vec<Complex64>> {
        self.check_spec(fhat)?;
        let gw: Vec<Complex64> = fhat.iter().zip(&self.spectral.quad_weights).map(|(a, w)| a * w).collect();
        Ok(rs
            .iter()
            .map(|r| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, g) in self.spectral.lambdas.iter().zip(&gw) {
                    let (p, dp) = self.profile.eval(l * r);
                    acc += g * if deriv { l * dp } else { p };
                }
                acc
            })
            .collect())
    }

    /// Composite multiplier approximating lambda^{-s} or lambda^{s} by a
    /// trapezoid in log t over heat multipliers, with the parts of the
    /// t-integral outside [t_min, t_max] added in closed form.
    ///
    /// Returns (multiplier, half-resolution multiplier, right remainder).
    fn subordination_parts(&self, s: f64, dir: Direction, cfg: &SubordinationConfig) -> Result<[Vec<f64>; 3]> {
        let a = 0.5 * s;
        // exponent of t in the integrand against dt / t
        let (expo, pow) = match dir {
            Direction::Negative => (a, -s),
            Direction::Positive => (1.0 - a, s),
        };
        let norm = 1.0 / crate::specfun::gamma(expo)?;
        let n = cfg.nodes;
        if n < 5 || n % 2 == 0 {
            return Err(Error::Config("subordination needs an odd node count >= 5".into()));
        }
        let (u0, u1) = (cfg.t_min.ln(), cfg.t_max.ln());
        let h = (u1 - u0) / (n - 1) as f64;
        let mut full = Vec::with_capacity(self.spectral.len());
        let mut half = Vec::with_capacity(self.spectral.len());
        let mut right = Vec::with_capacity(self.spectral.len());
        for &l in &self.spectral.lambdas {
            let l2 = l * l;
            let lead = if dir == Direction::Positive { l2 } else { 1.0 };
            let g = |u: f64| lead * (expo * u - u.exp() * l2).exp();
            let dg = |u: f64| (expo - u.exp() * l2) * g(u);
            let (mut sf, mut sh) = (0.0, 0.0);
            for k in 0..n {
                let v = g(u0 + k as f64 * h);
                let end = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                sf += end * v;
                if k % 2 == 0 {
                    sh += end * v;
                }
            }
            // first Euler-Maclaurin correction for the open ends
            let em = dg(u1) - dg(u0);
            let qf = h * sf - h * h / 12.0 * em;
            let qh = 2.0 * h * sh - 4.0 * h * h / 12.0 * em;
            let (p_left, _) = gamma_pq(expo, cfg.t_min * l2)?;
            let (_, q_right) = gamma_pq(expo, cfg.t_max * l2)?;
            let lp = l.powf(pow);
            let tails = lp * (p_left + q_right);
            full.push(norm * qf + tails);
            half.push(norm * qh + tails);
            right.push(lp * q_right);
        }
        Ok([full, half, right])
    }

    /// The composite multiplier alone (no convergence check).
    pub fn subordination_symbol(&self, s: f64, dir: Direction) -> Result<Vec<f64>> {
        Ok(self.subordination_parts(s, dir, &SubordinationConfig::default())?[0].clone())
    }

    pub fn fractional_power_subordination(&self, f: &RadialFunction, s: f64, dir: Direction) -> Result<RadialFunction> {
        self.fractional_power_subordination_with(f, s, dir, &SubordinationConfig::default())
    }

    pub fn fractional_power_subordination_with(
        &self,
        f: &RadialFunction,
        s: f64,
        dir: Direction,
        cfg: &SubordinationConfig,
    ) -> Result<RadialFunction> {
        if !(s > 0.0 && s < 2.0) {
            return Err(Error::Domain(format!("subordination needs 0 < s < 2, got {s}")));
        }
        let fhat = self.forward(f)?;
        let [full, half, right] = self.subordination_parts(s, dir, cfg)?;
        let apply = |m: &[f64]| -> Vec<Complex64> { fhat.iter().zip(m).map(|(a, b)| a * b).collect() };
        let out = apply(&full);
        let total = self.spectral_norm(&out);
        let diff: Vec<Complex64> = fhat.iter().zip(full.iter().zip(&half)).map(|(a, (x, y))| a * (x - y)).collect();
        let quad_err = self.spectral_norm(&diff);
        if !(quad_err <= cfg.tol * total) {
            return Err(Error::Subordination(format!(
                "log-t trapezoid not converged: {quad_err:.3e} against total {total:.3e}"
            )));
        }
        let tail = self.spectral_norm(&apply(&right));
        if !(tail <= 1e-2 * total) {
            return Err(Error::Subordination(format!(
                "t > {:e} carries {:.2}% of the result; the spectrum does not decay at lambda = 0",
                cfg.t_max,
                100.0 * tail / total
            )));
        }
        self.inverse(&out)
    }

    fn run_self_test(&self) -> SelfTest {
        let c = &self.config;
        let band = c.band();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        // radial bumps vanishing to high order at the origin
        let gamma = (band * band / 120.0).min(1.0);
        let b = 6.0 / gamma.sqrt();
        for shift in [0.0, 0.5, 1.0] {
            let centre = b + shift * b;
            if c.r_max - centre >= 6.0 / gamma.sqrt() {
                cols.push(self.radial.nodes.iter().map(|r| (-gamma * (r - centre).powi(2)).exp()).collect());
            }
        }
        // spectral bumps, synthesized on the grid
        let w = (8.0 / c.r_max).max(band / 60.0);
        let mut spec_cols = Vec::new();
        for lc in [band / 3.0, band / 2.0] {
            if lc >= 7.0 * w && lc + 7.0 * w <= band {
                spec_cols.push(self.spectral.lambdas.iter().map(|l| (-(l - lc).powi(2) / (2.0 * w * w)).exp()).collect::<Vec<_>>());
            }
        }
        if !spec_cols.is_empty() {
            let mut y = Array2::zeros((self.spectral.len(), spec_cols.len()));
            for (k, col) in spec_cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    y[[i, k]] = *v;
                }
            }
            let x = self.inverse_cols(&y);
            for k in 0..x.ncols() {
                cols.push(x.column(k).to_vec());
            }
        }
        if cols.is_empty() {
            return SelfTest { round_trip: f64::INFINITY, plancherel: f64::INFINITY };
        }
        let mut x = Array2::zeros((self.radial.len(), cols.len()));
        for (k, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                x[[i, k]] = *v;
            }
        }
        let y = self.forward_cols(&x);
        let back = self.inverse_cols(&y);
        let (mut rt, mut pl) = (0.0f64, 0.0f64);
        for k in 0..x.ncols() {
            let (mut num, mut den, mut spec) = (0.0, 0.0, 0.0);
            for i in 0..x.nrows() {
                let w = self.radial.quad_weights[i];
                num += w * (back[[i, k]] - x[[i, k]]).powi(2);
                den += w * x[[i, k]].powi(2);
            }
            for j in 0..y.nrows() {
                spec += self.spectral.quad_weights[j] * y[[j, k]].powi(2);
            }
            rt = rt.max((num / den).sqrt());
            pl = pl.max((spec.sqrt() - den.sqrt()).abs() / den.sqrt());
        }
        SelfTest { round_trip: rt, plancherel: pl }
    }
}

/// (omega_{d-1} sum_i w_i |f(r_i)|^p w(r_i))^{1/p}.
pub fn weighted_lp_norm(f: &RadialFunction, w: &WeightSpec, p: f64) -> f64 {
    let g = &f.grid;
    let s: f64 = g
        .nodes
        .iter()
        .zip(&g.quad_weights)
        .zip(&f.values)
        .map(|((r, q), v)| q * v.norm().powf(p) * w.eval(*r))
        .sum();
    (sphere_area(g.d) * s).powf(1.0 / p)
}
