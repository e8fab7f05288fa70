//! Morawetz multiplier calculus, the Schrodinger and wave flows, the radial
//! virial identity and the three weighted smoothing estimates.
//!
//! The multiplier is psi(r) = int_0^r s^eps / (1 + s^eps) ds. Space-time
//! integrals over t in [-T, T] are evaluated through the time-frequency
//! representation u(t, r) = int e^{i t kappa} h_r(kappa) dkappa, which turns
//! int |u|^2 dt into a correlation of h_r against 2 sin(T x) / x.

use crate::error::{Error, Result};
use crate::hankel::{HankelPlan, Profile, RadialFunction};
use crate::quad::{composite, geometric_panels, graded_panels, uniform_panels, Panel};
use crate::specfun::{gamma, hyp2f1, rgamma};
use crate::spectrum::{smoothing_admissible, sphere_area, ModelParams};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

pub const VIRIAL_TOL: f64 = 1e-5;
pub const DRIFT_TOL: f64 = 0.05;
pub const BFORM_BOUND: f64 = 3.0;
pub const CONSERVATION_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// multiplier calculus

/// Closed-form derivatives of the Morawetz multiplier for fixed eps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiCalculus {
    pub d: u32,
    pub eps: f64,
}

impl PsiCalculus {
    pub fn new(d: u32, eps: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!("dimension must be at least 3, got {d}")));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Domain(format!("eps must lie in (0, 1], got {eps}")));
        }
        Ok(Self { d, eps })
    }

    /// (d - 1)(d - 3).
    pub fn mu(&self) -> f64 {
        let d = self.d as f64;
        (d - 1.0) * (d - 3.0)
    }

    pub fn psi(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let r0 = r * 1e-14;
        let (x, w) = composite(&geometric_panels(r0, r, 2.0, 12));
        let body: f64 = x.iter().zip(&w).map(|(s, wi)| wi * self.dpsi(*s)).sum();
        body + r0.powf(1.0 + self.eps) / (1.0 + self.eps)
    }

    /// psi' = r^eps / (1 + r^eps).
    pub fn dpsi(&self, r: f64) -> f64 {
        let q = r.powf(self.eps);
        q / (1.0 + q)
    }

    pub fn d2psi(&self, r: f64) -> f64 {
        let e = self.eps;
        let q = r.powf(e);
        e * q / r / (1.0 + q).powi(2)
    }

    pub fn d3psi(&self, r: f64) -> f64 {
        let e = self.eps;
        let q = r.powf(e);
        -e * q / (r * r) * (e * q - e + q + 1.0) / (1.0 + q).powi(3)
    }

    pub fn d4psi(&self, r: f64) -> f64 {
        let e = self.eps;
        let q = r.powf(e);
        let poly = e * e * q * q - 4.0 * e * e * q + e * e + 3.0 * e * q * q - 3.0 * e + 2.0 * q * q + 4.0 * q + 2.0;
        e * q / (r * r * r) * poly / (1.0 + q).powi(4)
    }

    /// Laplacian of the radial function psi.
    pub fn lap(&self, r: f64) -> f64 {
        self.d2psi(r) + (self.d as f64 - 1.0) * self.dpsi(r) / r
    }

    /// Bilaplacian of psi from the closed-form derivatives.
    pub fn bilap(&self, r: f64) -> f64 {
        let (p, p1, p2, p3) = (self.dpsi(r), self.d2psi(r), self.d3psi(r), self.d4psi(r));
        let dm = self.d as f64 - 1.0;
        p3 + 2.0 * dm * p2 / r + self.mu() * (p1 / (r * r) - p / (r * r * r))
    }

    /// Sum of the magnitudes of the terms of `bilap`, a scale for relative
    /// comparisons.
    pub fn bilap_scale(&self, r: f64) -> f64 {
        let (p, p1, p2, p3) = (self.dpsi(r), self.d2psi(r), self.d3psi(r), self.d4psi(r));
        let dm = self.d as f64 - 1.0;
        p3.abs() + 2.0 * dm * p2.abs() / r + self.mu().abs() * (p1.abs() / (r * r) + p / (r * r * r))
    }

    /// beta(x) = half of the 2 beta display; the identity uses x = r^eps.
    pub fn beta(&self, x: f64) -> f64 {
        let d = self.d as f64;
        let e = self.eps;
        let c = (1.0 + x).powi(3);
        0.5 * (-(d * d - 6.0 * d + 7.0) / (1.0 + x) + e * (2.0 * d - 5.0) * (x * x - 1.0) / c
            - e * e * (x * x - 4.0 * x + 1.0) / c)
    }

    /// w_eps(r) = r^{eps-1} / (1 + r^eps)^2, which equals psi''.
    pub fn weight(&self, r: f64) -> f64 {
        self.d2psi(r)
    }

    /// Right side of -1/2 Bilap psi = r^{-3} psi'(r) [mu/2 + eps beta(r^eps)].
    pub fn identity_rhs(&self, r: f64) -> f64 {
        self.dpsi(r) / (r * r * r) * (0.5 * self.mu() + self.eps * self.beta(r.powf(self.eps)))
    }

    /// Bilaplacian by Richardson-extrapolated central differences of psi'
    /// in u = ln r.
    pub fn bilap_numeric(&self, r: f64) -> f64 {
        let u = r.ln();
        let g = |v: f64| self.dpsi(v.exp());
        let d1 = richardson(|h| (g(u + h) - g(u - h)) / (2.0 * h), 0.25, 4);
        let d2 = richardson(|h| (g(u + h) - 2.0 * g(u) + g(u - h)) / (h * h), 0.25, 4);
        let d3 = richardson(|h| (g(u + 2.0 * h) - 2.0 * g(u + h) + 2.0 * g(u - h) - g(u - 2.0 * h)) / (2.0 * h * h * h), 0.25, 4);
        let p = g(u);
        let p1 = d1 / r;
        let p2 = (d2 - d1) / (r * r);
        let p3 = (d3 - 3.0 * d2 + 2.0 * d1) / (r * r * r);
        let dm = self.d as f64 - 1.0;
        p3 + 2.0 * dm * p2 / r + self.mu() * (p1 / (r * r) - p / (r * r * r))
    }
}

/// Richardson extrapolation of an even-order central difference.
fn richardson<F: Fn(f64) -> f64>(diff: F, h: f64, levels: usize) -> f64 {
    let mut prev: Vec<f64> = Vec::new();
    for k in 0..levels {
        let mut row = vec![diff(h / 2f64.powi(k as i32))];
        for j in 1..=k {
            let f = 4f64.powi(j as i32);
            let v = row[j - 1] + (row[j - 1] - prev[j - 1]) / (f - 1.0);
            row.push(v);
        }
        prev = row;
    }
    *prev.last().unwrap()
}

/// Log-spaced grid of n points on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundScan {
    pub quantity: String,
    pub d: u32,
    pub eps: f64,
    pub points: usize,
    pub max_value: f64,
    pub argmax: f64,
    pub bound: f64,
    pub violations: usize,
    pub pass: bool,
}

fn scan<F: Fn(f64) -> f64>(quantity: &str, d: u32, eps: f64, grid: &[f64], bound: f64, f: F) -> BoundScan {
    let mut max_value = f64::NEG_INFINITY;
    let mut argmax = f64::NAN;
    let mut violations = 0;
    for &r in grid {
        let v = f(r);
        if !(v <= bound) {
            violations += 1;
        }
        if v > max_value || v.is_nan() {
            max_value = v;
            argmax = r;
        }
    }
    BoundScan { quantity: quantity.into(), d, eps, points: grid.len(), max_value, argmax, bound, violations, pass: violations == 0 }
}

/// max |beta| over the grid against 3 d^2.
pub fn check_beta_bound(d: u32, eps: f64, grid: &[f64]) -> Result<BoundScan> {
    let c = PsiCalculus::new(d, eps)?;
    Ok(scan("beta", d, eps, grid, 3.0 * (d * d) as f64, |r| c.beta(r).abs()))
}

/// max r |Lap psi| over the grid against d.
pub fn check_lap_psi_bound(d: u32, eps: f64, grid: &[f64]) -> Result<BoundScan> {
    let c = PsiCalculus::new(d, eps)?;
    Ok(scan("r_lap_psi", d, eps, grid, d as f64, |r| r * c.lap(r).abs()))
}

// ---------------------------------------------------------------------------
// flows

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    Schrodinger,
    Wave,
}

impl Flow {
    /// Phase of the flow multiplier at time t and frequency lambda.
    pub fn phase(self, t: f64, l: f64) -> f64 {
        match self {
            Flow::Schrodinger => t * l * l,
            Flow::Wave => t * l,
        }
    }
}

/// e^{it L} f or e^{it L^{1/2}} f, applied spectrally.
pub fn evolve(plan: &HankelPlan, f: &RadialFunction, t: f64, flow: Flow) -> Result<RadialFunction> {
    plan.apply_multiplier(f, |l| Complex64::from_polar(1.0, flow.phase(t, l)))
}

/// Transform of a function sampled on a plan's radial grid, evaluated at
/// arbitrary frequencies by direct quadrature.
struct SpectralSampler<'a> {
    plan: &'a HankelPlan,
    r: Vec<f64>,
    wf: Vec<Complex64>,
    r_support: f64,
}

impl<'a> SpectralSampler<'a> {
    fn new(plan: &'a HankelPlan, f: &RadialFunction) -> Result<Self> {
        if f.grid.id() != plan.radial.id() {
            return Err(Error::GridMismatch("function is not sampled on the plan grid".into()));
        }
        let fmax = f.max_abs();
        let mut r = Vec::new();
        let mut wf = Vec::new();
        let mut r_support: f64 = 0.0;
        for ((ri, wi), v) in f.nodes().iter().zip(&plan.radial.quad_weights).zip(&f.values) {
            if v.norm() > 1e-18 * fmax {
                r.push(*ri);
                wf.push(v * *wi);
            }
            if v.norm() > 1e-10 * fmax {
                r_support = r_support.max(*ri);
            }
        }
        Ok(Self { plan, r, wf, r_support })
    }

    fn eval(&self, l: f64) -> Complex64 {
        let p = &self.plan.profile;
        self.r.iter().zip(&self.wf).map(|(r, w)| w * p.eval(l * r).0).sum()
    }
}

/// Smallest lambda beyond which the weighted energy int |f^|^2 (1 + lambda^m)
/// is below `tol` of the total; returns (band, captured-out fraction).
fn effective_band(plan: &HankelPlan, fhat: &[Complex64], m: f64, tol: f64) -> (f64, f64) {
    let l = plan.lambdas();
    let e: Vec<f64> =
        fhat.iter().zip(&plan.spectral.quad_weights).zip(l).map(|((z, w), li)| w * z.norm_sqr() * (1.0 + li.powf(m))).collect();
    let total: f64 = e.iter().sum();
    if total == 0.0 {
        return (1.0, 0.0);
    }
    let mut tail = 0.0;
    let mut k = l.len();
    while k > 0 && tail + e[k - 1] <= tol * total {
        tail += e[k - 1];
        k -= 1;
    }
    let band = if k == l.len() { plan.spectral.lambda_max } else { l[k.min(l.len() - 1)] };
    (band.max(1.0).min(plan.spectral.lambda_max), tail / total)
}

// ---------------------------------------------------------------------------
// fractional powers of the free Laplacian on the L_a eigenfunctions

const X_LO: f64 = 1e-4;
const X_MID: f64 = 2.0;
const X_HI: f64 = 40.0;
const TABLE_STEP: f64 = 0.02;
const MU_SPLIT: f64 = 200.0;
const MU_NODES: usize = 16;

/// Psi_s(x) = (-Delta)^{s/2} applied to the generalized eigenfunction
/// x^{-n} J_nu(x) of L_a (eigenvalue 1).
///
/// Since -Delta psi_nu = psi_nu - a x^{-2} psi_nu, the free transform of
/// psi_nu is a H(mu) / (1 - mu^2) with H the free transform of
/// x^{-2} psi_nu, known in closed form. Hence
/// Psi_s = psi_nu - a G with G the inverse free transform of
/// m_s(mu) H(mu), m_s = (mu^s - 1) / (mu^2 - 1). G is tabulated for
/// x <= 40; beyond that G ~ m_s(1) x^{-2} psi_nu.
pub struct FractionalProfile {
    pub s: f64,
    pub nu: f64,
    pub n: f64,
    pub a: f64,
    base: Profile,
    near: Vec<f64>,
    far: Vec<f64>,
    slope: f64,
}

/// m_s(mu) = (mu^s - 1) / (mu^2 - 1).
fn m_s(s: f64, mu: f64) -> f64 {
    let l = mu.ln();
    if l.abs() < 1e-12 {
        return 0.5 * s;
    }
    (s * l).exp_m1() / (2.0 * l).exp_m1()
}

/// Free transform of x^{-2} psi_nu (Weber-Schafheitlin).
struct Kernel {
    n: f64,
    nu: f64,
    c_low: f64,
    c_high: f64,
}

impl Kernel {
    fn new(n: f64, nu: f64) -> Result<Self> {
        let c_low = gamma(0.5 * (n + nu))? / (2.0 * gamma(n + 1.0)?) * rgamma(1.0 + 0.5 * (nu - n))?;
        let c_high = gamma(0.5 * (nu + n))? / (2.0 * gamma(nu + 1.0)?) * rgamma(1.0 + 0.5 * (n - nu))?;
        Ok(Self { n, nu, c_low, c_high })
    }

    fn h(&self, mu: f64) -> Result<f64> {
        let (n, nu) = (self.n, self.nu);
        if mu < 1.0 {
            Ok(self.c_low * hyp2f1(0.5 * (n + nu), 0.5 * (n - nu), n + 1.0, mu * mu)?)
        } else {
            Ok(self.c_high * mu.powf(-n - nu) * hyp2f1(0.5 * (nu + n), 0.5 * (nu - n), nu + 1.0, 1.0 / (mu * mu))?)
        }
    }
}

impl FractionalProfile {
    /// Tables for Psi_s; `x_max` bounds the arguments evaluated later.
    pub fn new(params: &ModelParams, s: f64, x_max: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 2.0) {
            return Err(Error::Domain(format!("fractional order must lie in (0, 2], got {s}")));
        }
        let n = params.half();
        let nu = params.nu0;
        let base = Profile::new(nu, n, x_max.max(X_HI), TABLE_STEP)?;
        let mut fp = Self { s, nu, n, a: params.a, base, near: Vec::new(), far: Vec::new(), slope: 0.0 };
        if params.a == 0.0 {
            return Ok(fp);
        }
        let d = params.dim();
        let kernel = Kernel::new(n, nu)?;
        let free = Profile::new(n, n, MU_SPLIT * X_HI * 1.01 + 10.0, TABLE_STEP)?;

        let mut panels = uniform_panels(0.0, 0.5, 0.1, MU_NODES);
        let mut a = 0.5;
        for k in 2..=40 {
            let b = 1.0 - 0.5f64.powi(k);
            panels.push(Panel { a, b, q: MU_NODES });
            a = b;
        }
        a = 1.0 + 0.5f64.powi(40);
        for k in (1..40).rev() {
            let b = 1.0 + 0.5f64.powi(k);
            panels.push(Panel { a, b, q: MU_NODES });
            a = b;
        }
        panels.extend(uniform_panels(1.5, MU_SPLIT, 0.2, MU_NODES));
        let (mus, ws) = composite(&panels);
        let ff = |mu: f64| -> Result<f64> { Ok(m_s(s, mu) * kernel.h(mu)?) };
        let mut coef = Vec::with_capacity(mus.len());
        for (mu, w) in mus.iter().zip(&ws) {
            coef.push(w * ff(*mu)? * mu.powf(d - 1.0));
        }

        // beyond MU_SPLIT: panels resolving the oscillation up to mu x = MU_SPLIT,
        // then the asymptotic tail
        let g = |x: f64| -> Result<f64> {
            let mut acc: f64 = coef.iter().zip(&mus).map(|(c, mu)| c * free.eval(mu * x).0).sum();
            let m = MU_SPLIT.max(MU_SPLIT / x);
            let mut lo = MU_SPLIT;
            let mut extra = Vec::new();
            while lo < m {
                let hi = (lo + (1.5 / x).min(0.1 * lo)).min(m);
                extra.push(Panel { a: lo, b: hi, q: MU_NODES });
                lo = hi;
            }
            let (em, ew) = composite(&extra);
            for (mu, w) in em.iter().zip(&ew) {
                acc += w * ff(*mu)? * mu.powf(d - 1.0) * free.eval(mu * x).0;
            }
            Ok(acc + tail(n, d, x, m, &ff)?)
        };
        let nn = ((X_MID / X_LO).ln() / TABLE_STEP).ceil() as usize + 3;
        fp.near = (0..nn).map(|i| g((X_LO.ln() + (i as f64 - 1.0) * TABLE_STEP).exp())).collect::<Result<_>>()?;
        let nf = ((X_HI - X_MID) / TABLE_STEP).ceil() as usize + 3;
        fp.far = (0..nf).map(|i| g(X_MID + (i as f64 - 1.0) * TABLE_STEP)).collect::<Result<_>>()?;
        let p0 = fp.eval(X_LO);
        let p1 = fp.eval(X_LO * TABLE_STEP.exp());
        fp.slope = if p0 * p1 > 0.0 { (p1 / p0).ln() / TABLE_STEP } else { 0.0 };
        Ok(fp)
    }

    /// psi_nu(x) = x^{-n} J_nu(x).
    pub fn psi(&self, x: f64) -> f64 {
        self.base.eval(x).0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = self.base.eval(x).0;
        if self.a == 0.0 {
            return p;
        }
        if x < X_LO {
            let p0 = self.eval(X_LO);
            return p0 * (x / X_LO).powf(self.slope);
        }
        let g = if x <= X_MID {
            cubic(&self.near, (x.ln() - X_LO.ln()) / TABLE_STEP + 1.0)
        } else if x <= X_HI {
            cubic(&self.far, (x - X_MID) / TABLE_STEP + 1.0)
        } else {
            0.5 * self.s * p / (x * x)
        };
        p - self.a * g
    }
}

/// Integral of F(mu) mu^{d-1} psi_n(mu x) over (m, inf) from the large
/// argument form of J_n, integrated by parts four times.
fn tail(n: f64, d: f64, x: f64, m: f64, ff: &dyn Fn(f64) -> Result<f64>) -> Result<f64> {
    let mm = 4.0 * n * n;
    let (c1, c2) = ((mm - 1.0) * (mm - 9.0), (mm - 25.0) * (mm - 49.0));
    // amplitudes of cos(omega) and -sin(omega)
    let amp = |mu: f64| -> Result<(f64, f64)> {
        let y = mu * x;
        let a0 = ff(mu)? * mu.powf(d - 1.0) * (2.0 / PI).sqrt() * y.powf(-n - 0.5);
        let p = 1.0 - c1 / (128.0 * y * y) + c1 * c2 / (98304.0 * y.powi(4));
        let q = (mm - 1.0) / (8.0 * y) - c1 * (mm - 25.0) / (3072.0 * y.powi(3));
        Ok((a0 * p, a0 * q))
    };
    let h = 0.02 * m;
    let mut g = [(0.0, 0.0); 5];
    for (k, slot) in g.iter_mut().enumerate() {
        *slot = amp(m + (k as f64 - 2.0) * h)?;
    }
    let derivs = |f: &dyn Fn(&(f64, f64)) -> f64| -> [f64; 4] {
        let v: Vec<f64> = g.iter().map(f).collect();
        [
            v[2],
            (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h),
            (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h),
            (v[4] - 2.0 * v[3] + 2.0 * v[1] - v[0]) / (2.0 * h * h * h),
        ]
    };
    let al = derivs(&|z| z.0);
    let be = derivs(&|z| z.1);
    let w = m * x - (2.0 * n + 1.0) * PI / 4.0;
    let (sw, cw) = w.sin_cos();
    let (x2, x3, x4) = (x * x, x * x * x, x.powi(4));
    let int_cos = -al[0] * sw / x - al[1] * cw / x2 + al[2] * sw / x3 + al[3] * cw / x4;
    let int_sin = be[0] * cw / x - be[1] * sw / x2 - be[2] * cw / x3 + be[3] * sw / x4;
    Ok(int_cos - int_sin)
}

/// Four-point Lagrange interpolation at fractional index t.
fn cubic(v: &[f64], t: f64) -> f64 {
    let i = (t.floor() as isize).clamp(1, v.len() as isize - 3) as usize;
    let u = t - i as f64;
    let (a, b, c, e) = (v[i - 1], v[i], v[i + 1], v[i + 2]);
    -u * (u - 1.0) * (u - 2.0) / 6.0 * a + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * b - (u + 1.0) * u * (u - 2.0) / 2.0 * c
        + (u + 1.0) * u * (u - 1.0) / 6.0 * e
}

// ---------------------------------------------------------------------------
// conservation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub d: u32,
    pub a: f64,
    pub s: f64,
    pub times: Vec<f64>,
    /// ||L^{s/2} u(t)||.
    pub operator_norms: Vec<f64>,
    pub operator_spread: f64,
    /// ||(-Delta)^{s/2} u(t)||; None where the grid budget was exceeded.
    pub free_norms: Vec<Option<f64>>,
    /// max / min of the available free norms.
    pub free_fluctuation: f64,
    pub corridor: Option<f64>,
    pub exact_pass: bool,
    pub corridor_pass: Option<bool>,
}

/// Largest number of (radius, frequency) pairs evaluated per time.
pub const FREE_NORM_BUDGET: f64 = 2e8;

/// (i) ||L^{s/2} e^{itL} f|| over `times`; (ii) ||(-Delta)^{s/2} e^{itL} f||
/// when `free_norms` is set, with its max/min ratio compared to `corridor`
/// (the product of the forward and reverse equivalence constants).
pub fn conservation_check(
    plan: &HankelPlan,
    s: f64,
    f: &RadialFunction,
    times: &[f64],
    free_norms: bool,
    corridor: Option<f64>,
) -> Result<ConservationReport> {
    if !(s > 0.0 && s < 2.0) {
        return Err(Error::Domain(format!("conservation check needs 0 < s < 2, got {s}")));
    }
    let fhat = plan.forward(f)?;
    let mut operator_norms = Vec::with_capacity(times.len());
    for &t in times {
        let g: Vec<Complex64> =
            fhat.iter().zip(plan.lambdas()).map(|(z, l)| z * Complex64::from_polar(l.powf(s), t * l * l)).collect();
        operator_norms.push(plan.spectral_norm(&g));
    }
    let n0 = operator_norms.first().copied().unwrap_or(0.0);
    let operator_spread =
        if n0 > 0.0 { operator_norms.iter().map(|v| (v - n0).abs() / n0).fold(0.0, f64::max) } else { 0.0 };
    let mut free = vec![None; times.len()];
    if free_norms {
        let sampler = SpectralSampler::new(plan, f)?;
        let (band, _) = effective_band(plan, &fhat, 2.0 * s, 1e-14);
        let tmax = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let r_far = 1.5 * (sampler.r_support + 2.0 * band * tmax) + 60.0;
        let fp = FractionalProfile::new(&plan.params, s, band * r_far * 1.01 + 10.0)?;
        for (k, &t) in times.iter().enumerate() {
            free[k] = free_fractional_norm(plan, &sampler, &fp, band, t)?;
        }
    }
    let avail: Vec<f64> = free.iter().flatten().copied().collect();
    let free_fluctuation = if avail.is_empty() {
        f64::NAN
    } else {
        avail.iter().fold(0.0f64, |m, v| m.max(*v)) / avail.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    };
    let corridor_pass = match (corridor, avail.len()) {
        (Some(c), k) if k > 0 => Some(free_fluctuation <= c * (1.0 + 1e-9)),
        _ => None,
    };
    Ok(ConservationReport {
        d: plan.d(),
        a: plan.params.a,
        s,
        times: times.to_vec(),
        exact_pass: operator_spread <= CONSERVATION_TOL,
        operator_norms,
        operator_spread,
        free_norms: free,
        free_fluctuation,
        corridor,
        corridor_pass,
    })
}

/// ||(-Delta)^{s/2} e^{itL} f|| on a grid large enough to hold u(t).
fn free_fractional_norm(
    plan: &HankelPlan,
    sampler: &SpectralSampler,
    fp: &FractionalProfile,
    band: f64,
    t: f64,
) -> Result<Option<f64>> {
    let d = plan.d();
    let s = fp.s;
    // (-Delta)^{s/2} u decays like r^{-d-s} outside the bulk of u
    let r_far = 1.5 * (sampler.r_support + 2.0 * band * t.abs()) + 60.0;
    let lpanels = graded_panels(1e-3, band, 0.5, r_far + 2.0 * band * t.abs(), 10)?;
    let rpanels = graded_panels(1e-4, r_far, 0.5, 2.0 * band, 10)?;
    let (ls, lw) = composite(&lpanels);
    let (rs, rw) = composite(&rpanels);
    if (ls.len() * rs.len()) as f64 > FREE_NORM_BUDGET {
        return Ok(None);
    }
    let coef: Vec<Complex64> = ls
        .iter()
        .zip(&lw)
        .map(|(l, w)| sampler.eval(*l) * Complex64::from_polar(w * l.powi(d as i32 - 1) * l.powf(s), t * l * l))
        .collect();
    let mut acc = 0.0;
    for (r, w) in rs.iter().zip(&rw) {
        let v: Complex64 = ls.iter().zip(&coef).map(|(l, c)| c * fp.eval(l * r)).sum();
        acc += w * r.powi(d as i32 - 1) * v.norm_sqr();
    }
    Ok(Some((sphere_area(d) * acc).sqrt()))
}

// ---------------------------------------------------------------------------
// virial identity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    pub d: u32,
    pub a: f64,
    pub eps: f64,
    pub t0: f64,
    pub dt: f64,
    pub theta: f64,
    pub dtheta: f64,
    pub rhs: f64,
    pub norm_sq: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Solution samples at t0 + k dt, k = -2..2, reusable across eps.
#[derive(Debug, Clone)]
pub struct VirialSamples {
    pub params: ModelParams,
    pub t0: f64,
    pub dt: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    u: Vec<Vec<Complex64>>,
    ur: Vec<Vec<Complex64>>,
    norm_sq: f64,
}

/// Evolve f to the five stencil times. The identity is the one for
/// i u_t + Delta u - c u = 0, i.e. the flow e^{-itL}.
pub fn virial_samples(plan: &HankelPlan, f: &RadialFunction, t0: f64, dt: f64) -> Result<VirialSamples> {
    let lmax = plan.spectral.lambda_max;
    if !(dt > 0.0) || dt * lmax * lmax < 1e-8 {
        return Err(Error::Stencil(format!(
            "dt = {dt:e} is below the time resolution of the grid (lambda_max = {lmax})"
        )));
    }
    let fhat = plan.forward(f)?;
    let cols: Vec<Vec<Complex64>> = (-2..=2)
        .map(|k| {
            let t = t0 + k as f64 * dt;
            fhat.iter().zip(plan.lambdas()).map(|(z, l)| z * Complex64::from_polar(1.0, -t * l * l)).collect()
        })
        .collect();
    let refs: Vec<&[Complex64]> = cols.iter().map(|c| c.as_slice()).collect();
    let y = crate::hankel::to_columns(&refs);
    let u = crate::hankel::from_columns(&plan.inverse_cols(&y));
    let ur = crate::hankel::from_columns(&plan.inverse_deriv_cols(&y));
    let norm_sq = plan.spectral_norm(&fhat).powi(2);
    Ok(VirialSamples {
        params: plan.params,
        t0,
        dt,
        nodes: plan.nodes().to_vec(),
        weights: plan.radial.quad_weights.clone(),
        u,
        ur,
        norm_sq,
    })
}

impl VirialSamples {
    pub fn evaluate(&self, eps: f64) -> Result<VirialReport> {
        let d = self.params.d;
        let c = PsiCalculus::new(d, eps)?;
        let omega = sphere_area(d);
        let a = self.params.a;
        let theta = |k: usize| -> f64 {
            let s: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .zip(self.u[k].iter().zip(&self.ur[k]))
                .map(|((r, w), (u, ur))| w * c.dpsi(*r) * (u.conj() * ur).im)
                .sum();
            omega * s
        };
        let th: Vec<f64> = (0..5).map(theta).collect();
        let dtheta = (th[0] - 8.0 * th[1] + 8.0 * th[3] - th[4]) / (12.0 * self.dt);
        let rhs: f64 = omega
            * self
                .nodes
                .iter()
                .zip(&self.weights)
                .zip(self.u[2].iter().zip(&self.ur[2]))
                .map(|((r, w), (u, ur))| {
                    let (u2, ur2) = (u.norm_sqr(), ur.norm_sqr());
                    w * (2.0 * c.d2psi(*r) * ur2 - 0.5 * c.bilap(*r) * u2 + 2.0 * a * c.dpsi(*r) * u2 / (r * r * r))
                })
                .sum::<f64>();
        let residual = (dtheta - rhs).abs() / (rhs.abs() + self.norm_sq);
        Ok(VirialReport {
            d,
            a,
            eps,
            t0: self.t0,
            dt: self.dt,
            theta: th[2],
            dtheta,
            rhs,
            norm_sq: self.norm_sq,
            residual,
            pass: residual <= VIRIAL_TOL,
        })
    }
}

pub fn verify_virial(plan: &HankelPlan, eps: f64, f: &RadialFunction, t0: f64, dt: f64) -> Result<VirialReport> {
    virial_samples(plan, f, t0, dt)?.evaluate(eps)
}

// ---------------------------------------------------------------------------
// smoothing estimates

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimate {
    #[serde(rename = "firstest")]
    First,
    #[serde(rename = "secondest")]
    Second,
    #[serde(rename = "thirdest")]
    Third,
}

impl Estimate {
    pub const ALL: [Estimate; 3] = [Estimate::First, Estimate::Second, Estimate::Third];

    pub fn id(self) -> &'static str {
        match self {
            Estimate::First => "firstest",
            Estimate::Second => "secondest",
            Estimate::Third => "thirdest",
        }
    }

    pub fn flow(self) -> Flow {
        match self {
            Estimate::Third => Flow::Wave,
            _ => Flow::Schrodinger,
        }
    }
}

impl std::str::FromStr for Estimate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimate::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimate '{s}' (firstest, secondest, thirdest)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingConfig {
    /// Time truncation T; integrals run over [-T, T] and [-2T, 2T].
    pub t: f64,
    /// Frequency samples per unit of 1 / (2T), times 2 pi.
    pub kappa_oversample: f64,
    /// Relative weighted spectral energy left out above the band.
    pub spectral_tol: f64,
    pub r_inner: f64,
    /// Ratio of the geometric panels far from the origin.
    pub r_ratio: f64,
    pub nodes: usize,
    /// Time samples kept for the slice export.
    pub slices: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { t: 100.0, kappa_oversample: 16.0, spectral_tol: 1e-6, r_inner: 1e-5, r_ratio: 1.1, nodes: 12, slices: 201 }
    }
}

impl SmoothingConfig {
    pub fn quick() -> Self {
        Self { r_ratio: 1.2, nodes: 10, spectral_tol: 1e-5, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub estimate_id: Estimate,
    pub d: u32,
    pub a: f64,
    pub eps: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// Left side with the time integral over the whole line, computed
    /// with truncation parameter 2T.
    pub lhs: f64,
    /// The same with truncation parameter T.
    pub lhs_half: f64,
    pub rhs: f64,
    /// lhs / rhs.
    pub ratio: f64,
    /// |lhs - lhs_half| / lhs.
    pub drift: f64,
    /// Left side with the time integral over [-T, T] only.
    pub window: f64,
    /// The same over [-2T, 2T].
    pub window_doubled: f64,
    /// |window_doubled - window| / window_doubled; decays like T^{-eps}.
    pub window_drift: f64,
    pub member: Option<usize>,
    pub band: f64,
    pub spectral_leak: f64,
    pub r_extent: f64,
    pub admissible: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SpaceWeight {
    /// w_eps = r^{eps-1} / (1 + r^eps)^2
    Smoothing,
    /// r^{eps-3} / (1 + r^eps)
    Potential,
}

impl SpaceWeight {
    fn eval(self, eps: f64, r: f64) -> f64 {
        let q = r.powf(eps);
        match self {
            SpaceWeight::Smoothing => q / r / (1.0 + q).powi(2),
            SpaceWeight::Potential => q / (r * r * r) / (1.0 + q),
        }
    }

    /// int_R^inf of the weight.
    fn tail(self, eps: f64, big_r: f64) -> f64 {
        let q = big_r.powf(eps);
        match self {
            SpaceWeight::Smoothing => 1.0 / (eps * (1.0 + q)),
            SpaceWeight::Potential => q / (1.0 + q) / ((2.0 - eps) * big_r * big_r),
        }
    }
}

#[derive(Debug, Clone)]
struct Component {
    weight: SpaceWeight,
    i_t: Vec<f64>,
    i_2t: Vec<f64>,
    i_inf: Vec<f64>,
    /// I_inf from every other frequency sample (the resolution for T).
    i_inf_half: Vec<f64>,
    /// I_inf(r) ~ tail_coef r^{1-d} for large r.
    tail_coef: f64,
    /// |u(t_k, r_i)|^2 at the slice times, row-major in i.
    slices: Vec<f64>,
}

/// Time-integrated squared amplitudes of the flow on a radial grid
/// reaching past the region the flow covers by time 2T. They do not
/// depend on eps, so one instance serves a whole eps scan.
#[derive(Debug, Clone)]
pub struct SmoothingProfiles {
    pub estimate: Estimate,
    pub params: ModelParams,
    pub t: f64,
    pub band: f64,
    pub spectral_leak: f64,
    pub r_extent: f64,
    /// Outer radius of the grid used with truncation parameter T.
    pub r_extent_half: f64,
    pub slice_times: Vec<f64>,
    r: Vec<f64>,
    n_half: usize,
    qw: Vec<f64>,
    comps: Vec<Component>,
    f_norm: f64,
    f_quarter_sq: f64,
}

impl SmoothingProfiles {
    /// `fractional` is required for the second estimate when a != 0 and
    /// `free` for the first (None means the plan is itself free).
    pub fn compute(
        estimate: Estimate,
        plan: &HankelPlan,
        free: Option<&HankelPlan>,
        fractional: Option<&FractionalProfile>,
        f: &RadialFunction,
        cfg: &SmoothingConfig,
    ) -> Result<Self> {
        if !(cfg.t > 0.0) || !(cfg.kappa_oversample >= 2.0) || cfg.nodes < 2 || !(cfg.r_ratio > 1.0) {
            return Err(Error::Config("smoothing needs T > 0, oversample >= 2, nodes >= 2 and r_ratio > 1".into()));
        }
        let d = plan.d();
        let flow = estimate.flow();
        let fhat = plan.forward(f)?;
        let f_norm = plan.spectral_norm(&fhat);
        let f_quarter_sq = match estimate {
            Estimate::First => {
                let fp = free.unwrap_or(plan);
                let ft = fp.forward(f)?;
                let g: Vec<Complex64> = ft.iter().zip(fp.lambdas()).map(|(z, l)| z * l.sqrt()).collect();
                fp.spectral_norm(&g).powi(2)
            }
            _ => 0.0,
        };
        let sampler = SpectralSampler::new(plan, f)?;
        let m = match estimate {
            Estimate::First => 2.0,
            Estimate::Second => 1.0,
            Estimate::Third => 0.0,
        };
        let (band, spectral_leak) = effective_band(plan, &fhat, m, cfg.spectral_tol);
        let t2 = 2.0 * cfg.t;
        let dk = 2.0 * PI / (cfg.kappa_oversample * t2);
        let kmax = match flow {
            Flow::Schrodinger => band * band,
            Flow::Wave => band,
        };
        let nk = (kmax / dk).ceil().max(4.0) as usize;
        let len = (2 * nk).next_power_of_two();
        let lam: Vec<f64> = (0..nk)
            .map(|j| {
                let k = (j as f64 + 0.5) * dk;
                match flow {
                    Flow::Schrodinger => k.sqrt(),
                    Flow::Wave => k,
                }
            })
            .collect();
        let jac = |l: f64| match flow {
            Flow::Schrodinger => 0.5 * l.powi(d as i32 - 2),
            Flow::Wave => l.powi(d as i32 - 1),
        };
        let c: Vec<Complex64> = lam.iter().map(|l| sampler.eval(*l) * jac(*l)).collect();

        let speed = match flow {
            Flow::Schrodinger => 2.0 * band,
            Flow::Wave => 1.0,
        };
        let r_near = (sampler.r_support + 10.0).max(20.0);
        let r_far = r_near + speed * t2 * 1.05;
        let width = (4.0 / band).min(0.5);
        let mut panels = geometric_panels(cfg.r_inner, 0.5, 2.0, cfg.nodes);
        panels.extend(uniform_panels(0.5, r_near, width, cfg.nodes));
        let outer = geometric_panels(r_near, r_far, cfg.r_ratio, cfg.nodes);
        let r_half = r_near + speed * cfg.t * 1.05;
        let r_extent_half = outer.iter().map(|p| p.b).find(|b| *b >= r_half).unwrap_or(r_far);
        panels.extend(outer);
        let (r, w) = composite(&panels);
        let n_half = r.partition_point(|x| *x < r_extent_half);
        let qw: Vec<f64> = r.iter().zip(&w).map(|(ri, wi)| wi * ri.powi(d as i32 - 1)).collect();
        let x_max = band * r_far * 1.01 + 1.0;

        // spectral profiles: (space weight, lambda power, profile kind)
        #[derive(Clone, Copy)]
        enum Kind {
            Value,
            Slope,
            Fractional,
        }
        let specs: Vec<(SpaceWeight, f64, Kind)> = match estimate {
            Estimate::First => vec![(SpaceWeight::Potential, 0.0, Kind::Value), (SpaceWeight::Smoothing, 1.0, Kind::Slope)],
            Estimate::Second => vec![(SpaceWeight::Smoothing, 0.5, Kind::Fractional)],
            Estimate::Third => vec![(SpaceWeight::Smoothing, 0.0, Kind::Value)],
        };
        let base = Profile::new(plan.nu, plan.params.half(), x_max, 0.02)?;
        let owned;
        let frac = match (estimate, fractional) {
            (Estimate::Second, Some(fp)) => {
                if (fp.s - 0.5).abs() > 1e-12 || fp.nu != plan.nu {
                    return Err(Error::Config("fractional profile must be of order 1/2 for the plan's coupling".into()));
                }
                Some(fp)
            }
            (Estimate::Second, None) => {
                owned = FractionalProfile::new(&plan.params, 0.5, x_max)?;
                Some(&owned)
            }
            _ => None,
        };

        let ker = |tt: f64| -> Vec<f64> {
            (0..nk).map(|m| if m == 0 { 2.0 * tt } else { 2.0 * (tt * m as f64 * dk).sin() / (m as f64 * dk) }).collect()
        };
        let (k_t, k_2t) = (ker(cfg.t), ker(t2));
        // FFT index j corresponds to t = -2 pi j / (len dk)
        let dt_fft = 2.0 * PI / (len as f64 * dk);
        let half = (cfg.t / dt_fft).floor() as i64;
        let stride = ((2 * half + 1) as f64 / cfg.slices.max(2) as f64).ceil().max(1.0) as i64;
        let ks: Vec<i64> = (-half..=half).filter(|k| (k + half) % stride == 0).collect();
        let slice_times: Vec<f64> = ks.iter().map(|k| *k as f64 * dt_fft).collect();

        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut comps = Vec::new();
        for (weight, q, kind) in specs {
            let cq: Vec<Complex64> = c.iter().zip(&lam).map(|(z, l)| z * l.powf(q)).collect();
            let mut comp = Component {
                weight,
                i_t: Vec::with_capacity(r.len()),
                i_2t: Vec::with_capacity(r.len()),
                i_inf: Vec::with_capacity(r.len()),
                i_inf_half: Vec::with_capacity(r.len()),
                tail_coef: 0.0,
                slices: Vec::with_capacity(r.len() * ks.len()),
            };
            for &ri in &r {
                let mut odd = 0.0;
                for (j, slot) in buf.iter_mut().enumerate() {
                    *slot = if j < nk {
                        let x = lam[j] * ri;
                        let p = match kind {
                            Kind::Value => base.eval(x).0,
                            Kind::Slope => base.eval(x).1,
                            Kind::Fractional => frac.unwrap().eval(x),
                        };
                        let v = cq[j] * p;
                        if j % 2 == 1 {
                            odd += v.norm_sqr();
                        }
                        v
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
                fwd.process(&mut buf);
                for k in &ks {
                    let idx = (-k).rem_euclid(len as i64) as usize;
                    comp.slices.push(dk * dk * buf[idx].norm_sqr());
                }
                for z in buf.iter_mut() {
                    *z = Complex64::new(z.norm_sqr(), 0.0);
                }
                inv.process(&mut buf);
                let scale = 1.0 / len as f64;
                let a0 = buf[0].re * scale;
                let (mut st, mut s2t) = (0.0, 0.0);
                for m in 0..nk {
                    let am = buf[m].re * scale * if m == 0 { 1.0 } else { 2.0 };
                    st += am * k_t[m];
                    s2t += am * k_2t[m];
                }
                comp.i_t.push(dk * dk * st);
                comp.i_2t.push(dk * dk * s2t);
                comp.i_inf.push(2.0 * PI * dk * a0);
                comp.i_inf_half.push(4.0 * PI * dk * odd);
            }
            // large-r form of I_inf: the squared profile averages to x^{1-d} / pi
            let lp = match flow {
                Flow::Schrodinger => 2.0 * q - 1.0,
                Flow::Wave => 2.0 * q,
            };
            let integral: f64 = fhat
                .iter()
                .zip(plan.lambdas())
                .zip(&plan.spectral.quad_weights)
                .filter(|((_, l), _)| **l <= band)
                .map(|((z, l), w)| w * z.norm_sqr() * l.powf(lp))
                .sum();
            comp.tail_coef = match flow {
                Flow::Schrodinger => integral,
                Flow::Wave => 2.0 * integral,
            };
            comps.push(comp);
        }
        Ok(Self {
            estimate,
            params: plan.params,
            t: cfg.t,
            band,
            spectral_leak,
            r_extent: r_far,
            r_extent_half,
            slice_times,
            r,
            n_half,
            qw,
            comps,
            f_norm,
            f_quarter_sq,
        })
    }

    /// Radial nodes of the space-time grid.
    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    /// Ratio of the computed I_inf at the outer edge to its large-r form;
    /// close to 1 when the grid reaches the asymptotic regime.
    pub fn tail_match(&self) -> Vec<f64> {
        let d = self.params.d as i32;
        let i = self.r.len() - 1;
        let r = self.r[i];
        self.comps
            .iter()
            .map(|c| if c.tail_coef > 0.0 { c.i_inf[i] / (c.tail_coef * r.powi(1 - d)) } else { f64::NAN })
            .collect()
    }

    /// (window T, window 2T, whole line at T, whole line at 2T), before
    /// square roots.
    fn raw(&self, eps: f64) -> [f64; 4] {
        let omega = sphere_area(self.params.d);
        let mut acc = [0.0; 4];
        for c in &self.comps {
            for (i, (r, w)) in self.r.iter().zip(&self.qw).enumerate() {
                let ww = w * c.weight.eval(eps, *r);
                acc[0] += ww * c.i_t[i];
                acc[1] += ww * c.i_2t[i];
                if i < self.n_half {
                    acc[2] += ww * c.i_inf_half[i];
                }
                acc[3] += ww * c.i_inf[i];
            }
            acc[2] += c.tail_coef * c.weight.tail(eps, self.r_extent_half);
            acc[3] += c.tail_coef * c.weight.tail(eps, self.r_extent);
        }
        acc.map(|v| omega * v)
    }

    /// Space integral of the weighted density at the slice times.
    pub fn time_slices(&self, eps: f64) -> Vec<(f64, f64)> {
        let omega = sphere_area(self.params.d);
        let nt = self.slice_times.len();
        let mut out = vec![0.0; nt];
        for c in &self.comps {
            for (i, (r, w)) in self.r.iter().zip(&self.qw).enumerate() {
                let ww = w * c.weight.eval(eps, *r);
                for (k, o) in out.iter_mut().enumerate() {
                    *o += ww * c.slices[i * nt + k];
                }
            }
        }
        self.slice_times.iter().zip(out).map(|(t, v)| (*t, omega * v)).collect()
    }

    pub fn write_slices_csv(&self, eps: f64, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "integrand"])?;
        for (t, v) in self.time_slices(eps) {
            w.write_record([format!("{t:.17e}"), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn report(&self, eps: f64, member: Option<usize>) -> Result<SmoothingReport> {
        let adm = smoothing_admissible(&self.params, eps)?;
        let raw = self.raw(eps);
        let (v, rhs) = match self.estimate {
            Estimate::First => (raw, self.f_quarter_sq / eps),
            _ => (raw.map(f64::sqrt), self.f_norm / eps.sqrt()),
        };
        let [window, window_doubled, lhs_half, lhs] = v;
        let rel = |a: f64, b: f64| if b > 0.0 { (b - a).abs() / b } else { 0.0 };
        let drift = rel(lhs_half, lhs);
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        Ok(SmoothingReport {
            estimate_id: self.estimate,
            d: self.params.d,
            a: self.params.a,
            eps,
            t: self.t,
            lhs,
            lhs_half,
            rhs,
            ratio,
            drift,
            window,
            window_doubled,
            window_drift: rel(window, window_doubled),
            member,
            band: self.band,
            spectral_leak: self.spectral_leak,
            r_extent: self.r_extent,
            admissible: adm.admissible,
            pass: ratio.is_finite() && drift < DRIFT_TOL,
        })
    }
}

/// One smoothing report; fails on inadmissible (params, eps).
pub fn smoothing_estimate(
    estimate: Estimate,
    plan: &HankelPlan,
    free: Option<&HankelPlan>,
    eps: f64,
    f: &RadialFunction,
    cfg: &SmoothingConfig,
) -> Result<SmoothingReport> {
    let adm = smoothing_admissible(&plan.params, eps)?;
    if !adm.admissible {
        return Err(Error::Inadmissible(format!(
            "smoothing estimate needs delta > 0 and w_eps in the forward class (delta = {}, eps = {eps})",
            plan.params.delta
        )));
    }
    SmoothingProfiles::compute(estimate, plan, free, None, f, cfg)?.report(eps, None)
}

// ---------------------------------------------------------------------------
// the bilinear form B(v, w) = int conj(v) psi' d_r w dx

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BformReport {
    pub d: u32,
    pub eps: f64,
    pub pairs: usize,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax: usize,
    pub bound: f64,
    pub pass: bool,
}

pub fn bform(plan: &HankelPlan, eps: f64, v: &RadialFunction, w: &RadialFunction) -> Result<Complex64> {
    let c = PsiCalculus::new(plan.d(), eps)?;
    let dw = plan.radial_derivative(w)?;
    if v.grid.id() != dw.grid.id() {
        return Err(Error::GridMismatch("bilinear form arguments on different grids".into()));
    }
    let s: Complex64 = v
        .nodes()
        .iter()
        .zip(&plan.radial.quad_weights)
        .zip(v.values.iter().zip(&dw.values))
        .map(|((r, q), (a, b))| a.conj() * b * (q * c.dpsi(*r)))
        .sum();
    Ok(s * sphere_area(plan.d()))
}

/// ||f||_{H^{1/2}} (homogeneous) through the plan's spectral side.
pub fn half_norm(plan: &HankelPlan, f: &RadialFunction) -> Result<f64> {
    let ft = plan.forward(f)?;
    let g: Vec<Complex64> = ft.iter().zip(plan.lambdas()).map(|(z, l)| z * l.sqrt()).collect();
    Ok(plan.spectral_norm(&g))
}

/// |B(v, w)| / (||v||_{1/2} ||w||_{1/2}) over the pairs; `free` should be
/// the free-order plan.
pub fn bform_check(free: &HankelPlan, eps: f64, pairs: &[(RadialFunction, RadialFunction)]) -> Result<BformReport> {
    let mut ratios = Vec::with_capacity(pairs.len());
    for (v, w) in pairs {
        let b = bform(free, eps, v, w)?.norm();
        let den = half_norm(free, v)? * half_norm(free, w)?;
        ratios.push(if b == 0.0 { 0.0 } else { b / den });
    }
    let (argmax, max_ratio) =
        ratios.iter().copied().enumerate().fold((0, 0.0), |(i, m), (j, v)| if v > m { (j, v) } else { (i, m) });
    Ok(BformReport {
        d: free.d(),
        eps,
        pairs: pairs.len(),
        max_ratio,
        argmax,
        bound: BFORM_BOUND,
        pass: ratios.iter().all(|r| r.is_finite()) && max_ratio <= BFORM_BOUND + 1e-3,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::{build_plan, BesselOrder, PlanConfig};

    #[test]
    fn psi_derivatives_and_identity() {
        for d in [3u32, 4, 5, 7] {
            for eps in [0.05, 0.3, 0.95] {
                let c = PsiCalculus::new(d, eps).unwrap();
                assert_eq!(c.psi(0.0), 0.0);
                for r in log_grid(1e-4, 1e4, 41) {
                    let p = c.dpsi(r);
                    assert!((0.0..=1.0).contains(&p) && c.d2psi(r) >= 0.0);
                    let lhs = -0.5 * c.bilap(r);
                    assert!((lhs - c.identity_rhs(r)).abs() <= 1e-12 * c.bilap_scale(r), "d={d} eps={eps} r={r}");
                    let num = c.bilap_numeric(r);
                    assert!((num - c.bilap(r)).abs() <= 1e-9 * c.bilap_scale(r), "numeric d={d} eps={eps} r={r}");
                }
                // psi' is the derivative of psi
                let r = 1.7;
                let h = 1e-4;
                let fd = (c.psi(r + h) - c.psi(r - h)) / (2.0 * h);
                assert!((fd - c.dpsi(r)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn beta_limits_and_bounds() {
        let c = PsiCalculus::new(3, 1e-12).unwrap();
        assert!((c.beta(0.0) - 1.0).abs() < 1e-10);
        let c = PsiCalculus::new(5, 0.4).unwrap();
        assert!(c.beta(1e12).abs() < 1e-10);
        let grid = log_grid(1e-6, 1e6, 500);
        for d in 3..=10 {
            for k in 1..=19 {
                let eps = 0.05 * k as f64;
                assert!(check_beta_bound(d, eps, &grid).unwrap().pass);
                assert!(check_lap_psi_bound(d, eps, &grid).unwrap().pass);
            }
        }
    }

    fn plan(d: u32, a: f64, r_max: f64, l_max: f64) -> HankelPlan {
        let p = ModelParams::new(d, a).unwrap();
        build_plan(&p, BesselOrder::Radial, &PlanConfig::with_ranges(r_max, l_max)).unwrap()
    }

    fn gauss(plan: &HankelPlan) -> RadialFunction {
        RadialFunction::from_real(&plan.radial, |r| (-(r - 2.0f64).powi(2)).exp())
    }

    #[test]
    fn evolution_is_unitary_with_group_law() {
        let mut cfg = PlanConfig::with_ranges(40.0, 16.0);
        cfg.flow_horizon = 1.0;
        let p = build_plan(&ModelParams::new(3, 1.0).unwrap(), BesselOrder::Radial, &cfg).unwrap();
        let f = RadialFunction::from_real(&p.radial, |r| r * r * (-(r - 3.0f64).powi(2)).exp());
        let n0 = f.l2_norm();
        assert!(evolve(&p, &f, 0.0, Flow::Schrodinger).unwrap().sub(&f).unwrap().l2_norm() < 1e-8 * n0);
        for t in [0.3, 1.0] {
            for flow in [Flow::Schrodinger, Flow::Wave] {
                let u = evolve(&p, &f, t, flow).unwrap();
                assert!((u.l2_norm() - n0).abs() < 1e-8 * n0);
            }
        }
        // composition passes through the radial grid, so use data whose
        // transform is negligible beyond the band
        let p = build_plan(&ModelParams::new(3, 0.0).unwrap(), BesselOrder::Radial, &cfg).unwrap();
        let f = RadialFunction::from_real(&p.radial, |r| (-(r - 3.0f64).powi(2)).exp());
        let n0 = f.l2_norm();
        let a = evolve(&p, &evolve(&p, &f, 0.2, Flow::Schrodinger).unwrap(), 0.3, Flow::Schrodinger).unwrap();
        let b = evolve(&p, &f, 0.5, Flow::Schrodinger).unwrap();
        let e = a.sub(&b).unwrap().l2_norm() / n0;
        assert!(e < 1e-8, "{e:e}");
    }

    #[test]
    fn fractional_profile_order_two_is_exact() {
        // m_2 = 1, so Psi_2 = psi_nu - a x^{-2} psi_nu
        let p = ModelParams::new(3, 1.0).unwrap();
        let fp = FractionalProfile::new(&p, 2.0, 100.0).unwrap();
        for x in [3e-4, 0.01, 0.3, 1.7, 5.0, 23.3, 39.0, 60.0] {
            let psi = fp.psi(x);
            let exact = psi * (1.0 - 1.0 / (x * x));
            assert!((fp.eval(x) - exact).abs() < 1e-7 * (psi.abs() / (x * x)).max(1e-3), "x={x}: {} vs {exact}", fp.eval(x));
        }
    }

    #[test]
    fn fractional_profile_matches_free_plan() {
        // (-Delta)^{s/2} f two ways: the free plan, and the L_a transform
        // synthesized against Psi_s
        let params = ModelParams::new(3, 1.0).unwrap();
        let cfg = PlanConfig::with_ranges(30.0, 24.0);
        let pl = build_plan(&params, BesselOrder::Radial, &cfg).unwrap();
        let free = build_plan(&params, BesselOrder::Free, &cfg).unwrap();
        let f = RadialFunction::from_real(&pl.radial, |r| r.powi(2) * (-(r - 4.0f64).powi(2)).exp());
        for s in [0.5, 1.3] {
            let fp = FractionalProfile::new(&params, s, 24.0 * 30.0).unwrap();
            let direct = free.apply_multiplier(&f, |l| Complex64::new(l.powf(s), 0.0)).unwrap();
            let fhat = pl.forward(&f).unwrap();
            let scale = direct.max_abs();
            for (i, r) in pl.nodes().iter().enumerate().step_by(37) {
                if *r < 0.2 || *r > 15.0 {
                    continue;
                }
                let v: Complex64 = fhat
                    .iter()
                    .zip(pl.lambdas())
                    .zip(&pl.spectral.quad_weights)
                    .map(|((z, l), w)| z * (w * l.powf(s) * fp.eval(l * r)))
                    .sum();
                assert!((v - direct.values[i]).norm() < 1e-6 * scale, "s={s} r={r}: {v} vs {}", direct.values[i]);
            }
        }
    }

    #[test]
    fn conservation_is_exact_in_the_operator_norm() {
        let p = plan(3, 1.0, 30.0, 20.0);
        let f = gauss(&p);
        let rep = conservation_check(&p, 0.5, &f, &[0.0, 1.0, 5.0, 25.0], false, None).unwrap();
        assert!(rep.exact_pass, "{rep:?}");
        assert!(conservation_check(&p, 2.0, &f, &[0.0], false, None).is_err());
    }

    #[test]
    fn conservation_free_norm_without_potential_is_flat() {
        let p = plan(3, 0.0, 20.0, 12.0);
        let f = RadialFunction::from_real(&p.radial, |r| (-(r - 3.0f64).powi(2)).exp());
        let rep = conservation_check(&p, 1.0, &f, &[0.0, 1.0], true, Some(1.0)).unwrap();
        assert!(rep.exact_pass);
        for (a, b) in rep.free_norms.iter().zip(&rep.operator_norms) {
            assert!((a.unwrap() - b).abs() < 1e-7 * b, "{rep:?}");
        }
        assert!((rep.free_fluctuation - 1.0).abs() < 2e-7, "{rep:?}");
    }

    #[test]
    fn virial_identity_residual() {
        let mut cfg = PlanConfig::with_ranges(60.0, 12.0);
        cfg.flow_horizon = 1.0;
        let params = ModelParams::new(3, 1.0).unwrap();
        let p = build_plan(&params, BesselOrder::Radial, &cfg).unwrap();
        let f = gauss(&p);
        let s = virial_samples(&p, &f, 0.5, 1e-3).unwrap();
        let rep = s.evaluate(0.25).unwrap();
        assert!(rep.pass, "{rep:?}");
        // a real initial datum carries no momentum
        let z = verify_virial(&p, 0.25, &f, 0.0, 1e-3).unwrap();
        assert!(z.theta.abs() < 1e-12 * z.norm_sq, "{z:?}");
        assert!(matches!(virial_samples(&p, &f, 0.5, 1e-14), Err(Error::Stencil(_))));
    }

    #[test]
    fn bform_is_bilinear_and_bounded() {
        let params = ModelParams::new(3, 0.0).unwrap();
        let p = build_plan(&params, BesselOrder::Free, &PlanConfig::with_ranges(20.0, 12.0)).unwrap();
        let v = RadialFunction::from_real(&p.radial, |r| (-(r - 3.0f64).powi(2)).exp());
        let w = RadialFunction::from_real(&p.radial, |r| r * (-(r - 4.0f64).powi(2) / 2.0).exp());
        let c = Complex64::new(0.3, -1.7);
        let b1 = bform(&p, 0.5, &v, &w.scale(c)).unwrap();
        let b0 = bform(&p, 0.5, &v, &w).unwrap();
        assert!((b1 - c * b0).norm() < 1e-12 * b0.norm());
        let rep = bform_check(&p, 0.5, &[(v.clone(), w.clone()), (v.clone(), v.clone())]).unwrap();
        assert!(rep.pass && rep.max_ratio > 0.0, "{rep:?}");
    }

    #[test]
    fn smoothing_zero_data_and_inadmissible() {
        let p = plan(3, 1.0, 20.0, 12.0);
        let zero = RadialFunction::from_real(&p.radial, |_| 0.0);
        let cfg = SmoothingConfig { t: 5.0, ..SmoothingConfig::quick() };
        let rep = smoothing_estimate(Estimate::Third, &p, None, 0.5, &zero, &cfg).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.ratio, 0.0);
        let crit = plan(3, -0.25, 20.0, 12.0);
        let zc = RadialFunction::from_real(&crit.radial, |_| 0.0);
        assert!(matches!(smoothing_estimate(Estimate::First, &crit, None, 0.5, &zc, &cfg), Err(Error::Inadmissible(_))));
    }
}
