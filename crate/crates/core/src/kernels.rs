//! Heat kernels of `L_a`: radial (l = 0), zonal sums over harmonic
//! sectors, complex time, t-derivatives and the difference with the free
//! kernel, plus scanners comparing them against Gaussian-type bounds.

use crate::error::{Error, Result};
use crate::quad::{composite, gauss_legendre, Panel};
use crate::specfun::{bessel_i_scaled, bessel_i_scaled_complex, gegenbauer_all, gamma};
use crate::spectrum::{d_alpha, sphere_area, ModelParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// (4 pi t)^{-d/2} exp(-|x - y|^2 / 4t).
pub fn free_heat_kernel(t: f64, r: f64, rho: f64, cos_theta: f64, d: u32) -> f64 {
    let dist2 = (r * r + rho * rho - 2.0 * r * rho * cos_theta).max(0.0);
    (4.0 * PI * t).powf(-0.5 * d as f64) * (-dist2 / (4.0 * t)).exp()
}

/// (-d/dt)^k of the free kernel.
pub fn free_derivative_kernel(k: u32, t: f64, r: f64, rho: f64, cos_theta: f64, d: u32) -> f64 {
    let q = (r * r + rho * rho - 2.0 * r * rho * cos_theta).max(0.0) / (4.0 * t);
    let h = 0.5 * d as f64;
    let g = free_heat_kernel(t, r, rho, cos_theta, d);
    match k {
        0 => g,
        // d/dt log g = (q - h) / t
        1 => g * (h - q) / t,
        _ => g * ((q - h) * (q - h) - 2.0 * q + h) / (t * t),
    }
}

/// e^{-z} I_nu(z) and its first two z-derivatives, all scaled by e^{-z}.
fn scaled_i_with_derivs(nu: f64, z: f64) -> Result<[f64; 3]> {
    let i0 = bessel_i_scaled(nu, z)?;
    let i1 = bessel_i_scaled(nu + 1.0, z)?;
    let d1 = i1 + nu / z * i0;
    let d2 = -d1 / z + (1.0 + nu * nu / (z * z)) * i0;
    Ok([i0, d1, d2])
}

/// (-d/dt)^k of k_t^{(nu)}(r, rho) for k in {0, 1, 2}.
///
/// With u = 1/t, A = (r^2 + rho^2)/4 and B = r rho / 2 the kernel is
/// (r rho)^{-n} H(u), H(u) = (u/2) e^{-A u} I_nu(B u).
pub fn order_kernel(nu: f64, n: f64, k: u32, t: f64, r: f64, rho: f64) -> Result<f64> {
    if !(t > 0.0 && r > 0.0 && rho > 0.0) {
        return Err(Error::Domain(format!("kernel needs t, r, rho > 0 (t={t}, r={r}, rho={rho})")));
    }
    let u = 1.0 / t;
    let a = 0.25 * (r * r + rho * rho);
    let b = 0.5 * r * rho;
    let z = b * u;
    // every term carries e^{-A u} I(B u) = e^{-(A - B) u} (e^{-z} I)
    let damp = (-(r - rho).powi(2) * 0.25 * u).exp();
    let pre = (r * rho).powf(-n) * damp;
    let need = if k == 0 { 1 } else { 3 };
    let iv = if need == 1 { [bessel_i_scaled(nu, z)?, 0.0, 0.0] } else { scaled_i_with_derivs(nu, z)? };
    let (i, di, ddi) = (iv[0], b * iv[1], b * b * iv[2]);
    let p = 0.5 * u;
    let h = p * i;
    let val = match k {
        0 => h,
        _ => {
            let h1 = 0.5 * i - a * p * i + p * di;
            if k == 1 {
                // -dF/dt = u^2 H'
                u * u * h1
            } else {
                let h2 = -a * i + di + a * a * p * i - 2.0 * a * p * di + p * ddi;
                2.0 * u * u * u * h1 + u.powi(4) * h2
            }
        }
    };
    if k > 2 {
        return Err(Error::Domain("derivative order must be 0, 1 or 2".into()));
    }
    let out = pre * val;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Overflow(format!("kernel at t={t}, r={r}, rho={rho}")))
    }
}

/// k_t(r, rho): kernel of e^{-t L_a} on radial functions against rho^{d-1} drho.
pub fn radial_heat_kernel(params: &ModelParams, t: f64, r: f64, rho: f64) -> Result<f64> {
    order_kernel(params.nu0, params.half(), 0, t, r, rho)
}

/// Radial kernel of L_a^k e^{-t L_a}.
pub fn derivative_kernel(params: &ModelParams, k: u32, t: f64, r: f64, rho: f64) -> Result<f64> {
    if !(1..=2).contains(&k) {
        return Err(Error::Domain(format!("derivative order must be 1 or 2, got {k}")));
    }
    order_kernel(params.nu0, params.half(), k, t, r, rho)
}

/// Richardson-extrapolated central differences of the radial kernel in t.
pub fn derivative_kernel_fd(params: &ModelParams, k: u32, t: f64, r: f64, rho: f64) -> Result<f64> {
    let f = |s: f64| radial_heat_kernel(params, s, r, rho);
    let diff = |h: f64| -> Result<f64> {
        Ok(match k {
            1 => -(f(t + h)? - f(t - h)?) / (2.0 * h),
            _ => (f(t + h)? - 2.0 * f(t)? + f(t - h)?) / (h * h),
        })
    };
    let h = if k == 1 { 1e-2 * t } else { 2e-2 * t };
    let (d1, d2, d3) = (diff(h)?, diff(0.5 * h)?, diff(0.25 * h)?);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Point (t, |x|, |y|, cos angle) of a kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub t: f64,
    /// arg of the complex time; 0 on the real axis
    pub phase: f64,
    pub r: f64,
    pub rho: f64,
    pub cos_theta: f64,
}

impl KernelPoint {
    pub fn real(t: f64, r: f64, rho: f64, cos_theta: f64) -> Self {
        Self { t, phase: 0.0, r, rho, cos_theta }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::from_polar(self.t, self.phase)
    }

    fn dist2(&self) -> f64 {
        (self.r * self.r + self.rho * self.rho - 2.0 * self.r * self.rho * self.cos_theta).max(0.0)
    }
}

/// Truncation controls of the sector sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZonalConfig {
    pub ell_max: usize,
    pub tail_tol: f64,
}

impl Default for ZonalConfig {
    fn default() -> Self {
        Self { ell_max: 600, tail_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZonalValue {
    pub value: f64,
    /// estimated size of the omitted terms, relative to `scale`
    pub tail: f64,
    /// sum of |terms|; value / scale measures cancellation
    pub scale: f64,
    pub terms: usize,
}

/// Z_l(cos theta) = (l + n) / (n omega) C_l^n(cos theta) for l = 0..=lmax,
/// and the same at cos theta = 1.
fn zonal_factors(lmax: usize, d: u32, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = 0.5 * (d as f64 - 2.0);
    let om = sphere_area(d);
    let c = gegenbauer_all(lmax, n, x)?;
    let c1 = gegenbauer_all(lmax, n, 1.0)?;
    let f = |l: usize| (l as f64 + n) / (n * om);
    Ok(((0..=lmax).map(|l| f(l) * c[l]).collect(), (0..=lmax).map(|l| f(l) * c1[l]).collect()))
}

fn zonal_sum<F>(d: u32, cos_theta: f64, cfg: &ZonalConfig, mut term: F) -> Result<ZonalValue>
where
    F: FnMut(usize) -> Result<f64>,
{
    let (z, z1) = zonal_factors(cfg.ell_max, d, cos_theta)?;
    let mut sum = 0.0;
    let mut scale = 0.0;
    let mut prev_bound = f64::INFINITY;
    for l in 0..=cfg.ell_max {
        let k = term(l)?;
        let v = k * z[l];
        sum += v;
        // |C_l^n(x)| <= C_l^n(1) bounds the term independently of the angle
        let bound = (k * z1[l]).abs();
        scale += v.abs();
        if l >= 2 && bound < prev_bound {
            let q = bound / prev_bound;
            let tail = if q < 1.0 { bound * q / (1.0 - q) } else { f64::INFINITY };
            // relative to the value unless it cancels below 1e-6 of the terms
            let ref_scale = sum.abs().max(1e-6 * scale);
            if bound < cfg.tail_tol * ref_scale && tail < cfg.tail_tol * ref_scale {
                return Ok(ZonalValue { value: sum, tail: tail / ref_scale, scale, terms: l + 1 });
            }
        }
        prev_bound = bound;
    }
    if cfg.tail_tol.is_infinite() {
        // explicit truncation without a convergence requirement
        return Ok(ZonalValue { value: sum, tail: f64::NAN, scale, terms: cfg.ell_max + 1 });
    }
    Err(Error::Convergence(format!(
        "sector sum not converged by l = {} (last term bound {prev_bound:.3e}, sum {sum:.3e})",
        cfg.ell_max
    )))
}

/// Full kernel p_t(x, y) as a sum over harmonic sectors.
pub fn zonal_heat_kernel(params: &ModelParams, pt: &KernelPoint, cfg: &ZonalConfig) -> Result<ZonalValue> {
    zonal_derivative_kernel(params, 0, pt, cfg)
}

/// Full kernel of L_a^k e^{-t L_a}.
pub fn zonal_derivative_kernel(params: &ModelParams, k: u32, pt: &KernelPoint, cfg: &ZonalConfig) -> Result<ZonalValue> {
    let n = params.half();
    zonal_sum(params.d, pt.cos_theta, cfg, |l| order_kernel(params.nu_ell(l), n, k, pt.t, pt.r, pt.rho))
}

/// Complex-time radial kernel (same closed form with t -> z).
pub fn complex_time_kernel(params: &ModelParams, z: Complex64, r: f64, rho: f64) -> Result<Complex64> {
    complex_order_kernel(params.nu0, params.half(), z, r, rho)
}

fn complex_order_kernel(nu: f64, n: f64, z: Complex64, r: f64, rho: f64) -> Result<Complex64> {
    if !(z.arg().abs() < 0.25 * PI) || z.norm() == 0.0 {
        return Err(Error::Domain(format!("complex time needs |arg z| < pi/4, got {z}")));
    }
    if !(r > 0.0 && rho > 0.0) {
        return Err(Error::Domain("kernel needs r, rho > 0".into()));
    }
    let w = r * rho / (2.0 * z);
    let i = bessel_i_scaled_complex(nu, w)
        .map_err(|e| Error::Overflow(format!("outside the validated complex-time region: {e}")))?;
    let damp = (-(r - rho).powi(2) / (4.0 * z)).exp();
    Ok((r * rho).powf(-n) * damp * i / (2.0 * z))
}

/// Complex-time full kernel; sums the real and imaginary parts separately.
pub fn zonal_complex_kernel(params: &ModelParams, pt: &KernelPoint, cfg: &ZonalConfig) -> Result<(Complex64, f64)> {
    let n = params.half();
    let z = pt.z();
    let (zf, _) = zonal_factors(cfg.ell_max, params.d, pt.cos_theta)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    let mut prev = f64::INFINITY;
    for l in 0..=cfg.ell_max {
        let k = complex_order_kernel(params.nu_ell(l), n, z, pt.r, pt.rho)?;
        let v = k * zf[l];
        sum += v;
        scale += v.norm();
        let b = (k * zonal_norm(l, params.d)).norm();
        if l >= 2 && b < prev && b < cfg.tail_tol * scale.max(sum.norm()) {
            return Ok((sum, scale));
        }
        prev = b;
    }
    Err(Error::Convergence("complex sector sum not converged".into()))
}

fn zonal_norm(l: usize, d: u32) -> f64 {
    let n = 0.5 * (d as f64 - 2.0);
    let c1 = gegenbauer_all(l, n, 1.0).map(|v| v[l]).unwrap_or(f64::INFINITY);
    (l as f64 + n) / (n * sphere_area(d)) * c1
}

/// t (L_a e^{-t L_a} - (-Delta) e^{t Delta}) kernel.
pub fn difference_kernel(params: &ModelParams, pt: &KernelPoint, cfg: &ZonalConfig) -> Result<ZonalValue> {
    if params.a == 0.0 {
        // the two semigroups coincide
        return Ok(ZonalValue { value: 0.0, tail: 0.0, scale: 0.0, terms: 0 });
    }
    let za = zonal_derivative_kernel(params, 1, pt, cfg)?;
    let free = free_derivative_kernel(1, pt.t, pt.r, pt.rho, pt.cos_theta, params.d);
    Ok(ZonalValue {
        value: pt.t * (za.value - free),
        tail: za.tail,
        scale: pt.t * (za.scale + free.abs()),
        terms: za.terms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// p_t against (1 + sqrt t/|x|)^sigma (1 + sqrt t/|y|)^sigma t^{-d/2} e^{-|x-y|^2/ct}
    MszzHeat,
    /// kernels of L^k e^{-tL}, k = 1, 2, with t^{-(k + d/2)}
    Ptk,
    /// complex times z = t e^{i phi}, |phi| < pi/4
    Complex,
    /// t^{-d/2} (1 + (|x|+|y|)/sqrt t)^{-2} e^{-|x-y|^2/ct}
    DifferenceAPos,
    /// as above, restricted to |x|, |y| >= sqrt t / 2
    DifferenceANeg,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [Self::MszzHeat, Self::Ptk, Self::Complex, Self::DifferenceAPos, Self::DifferenceANeg];

    pub fn name(&self) -> &'static str {
        match self {
            Self::MszzHeat => "mszz_heat",
            Self::Ptk => "ptk",
            Self::Complex => "complex",
            Self::DifferenceAPos => "difference_a_pos",
            Self::DifferenceANeg => "difference_a_neg",
        }
    }

    /// Difference scan matching the sign of a.
    pub fn difference_for(a: f64) -> Self {
        if a >= 0.0 {
            Self::DifferenceAPos
        } else {
            Self::DifferenceANeg
        }
    }
}

/// Log-spaced scan grid in t and the scale-free radii r / sqrt t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub ts: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub cos_thetas: Vec<f64>,
    /// complex phases scanned by the complex kind
    pub phases: Vec<f64>,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            ts: vec![0.1, 1.0, 10.0],
            x_min: 0.01,
            x_max: 8.0,
            nx: 9,
            cos_thetas: vec![1.0, 0.0, -1.0],
            phases: vec![PI / 8.0, PI / 5.0],
        }
    }
}

impl ScanGrid {
    /// Same ranges with twice the radial density.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx - 1, ..self.clone() }
    }

    pub fn xs(&self) -> Vec<f64> {
        let (a, b) = (self.x_min.ln(), self.x_max.ln());
        (0..self.nx).map(|i| (a + (b - a) * i as f64 / (self.nx - 1).max(1) as f64).exp()).collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "t in {:?}, r/sqrt(t) and rho/sqrt(t) log-spaced in [{}, {}] ({} points), cos(theta) in {:?}",
            self.ts, self.x_min, self.x_max, self.nx, self.cos_thetas
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRatioReport {
    pub kind: BoundKind,
    pub d: u32,
    pub a: f64,
    pub sup_ratio: f64,
    pub arg_sup: Option<KernelPoint>,
    pub c_used: f64,
    pub grid: String,
    pub truncation_tail: f64,
    pub refinement_drift: f64,
    pub stable: bool,
    pub points: usize,
    /// points dropped because cancellation left no significant digits
    pub unresolved: usize,
}

/// Default exponent constants c.
pub fn default_c(kind: BoundKind) -> f64 {
    match kind {
        BoundKind::MszzHeat | BoundKind::Ptk | BoundKind::Complex => 8.0,
        _ => 8.0,
    }
}

const RESOLVE: f64 = 1e8;

struct ScanOut {
    sup: f64,
    arg: Option<KernelPoint>,
    tail: f64,
    points: usize,
    unresolved: usize,
}

fn scan_once(kind: BoundKind, params: &ModelParams, c: f64, grid: &ScanGrid, cfg: &ZonalConfig) -> Result<ScanOut> {
    let d = params.d as f64;
    let sigma = params.sigma;
    let norm = (4.0 * PI).powf(-0.5 * d);
    // the a < 0 difference bound holds on |x|, |y| >= sqrt t / 2; scanning
    // from that edge keeps it in both the coarse and the refined grid
    let xs = if kind == BoundKind::DifferenceANeg {
        ScanGrid { x_min: grid.x_min.max(0.5), ..grid.clone() }.xs()
    } else {
        grid.xs()
    };
    let mut out = ScanOut { sup: 0.0, arg: None, tail: 0.0, points: 0, unresolved: 0 };
    let mut consider = |ratio: f64, tail: f64, resolved: bool, pt: KernelPoint| {
        out.points += 1;
        if !resolved {
            out.unresolved += 1;
            return;
        }
        out.tail = out.tail.max(tail);
        if ratio > out.sup || out.arg.is_none() {
            out.sup = ratio.max(out.sup);
            out.arg = Some(pt);
        }
    };
    for &t in &grid.ts {
        let st = t.sqrt();
        for &xr in &xs {
            for &xp in &xs {
                let (r, rho) = (xr * st, xp * st);
                if kind == BoundKind::DifferenceANeg && (xr < 0.5 || xp < 0.5) {
                    continue;
                }
                for &ct in &grid.cos_thetas {
                    let pt = KernelPoint::real(t, r, rho, ct);
                    let gauss = (-pt.dist2() / (c * t)).exp();
                    let sing = (1.0 + st / r).powf(sigma) * (1.0 + st / rho).powf(sigma);
                    match kind {
                        BoundKind::MszzHeat => {
                            let v = zonal_heat_kernel(params, &pt, cfg)?;
                            let bound = norm * sing * t.powf(-0.5 * d) * gauss;
                            consider(v.value.abs() / bound, v.tail, v.scale <= RESOLVE * v.value.abs(), pt);
                        }
                        BoundKind::Ptk => {
                            for k in 1..=2u32 {
                                let v = zonal_derivative_kernel(params, k, &pt, cfg)?;
                                let bound = norm * sing * t.powf(-(k as f64) - 0.5 * d) * gauss;
                                consider(v.value.abs() / bound, v.tail, v.scale <= RESOLVE * v.value.abs(), pt);
                            }
                        }
                        BoundKind::Complex => {
                            for &ph in &grid.phases {
                                let zp = KernelPoint { phase: ph, ..pt };
                                let zn = zp.z().norm();
                                let sing = (1.0 + zn.sqrt() / r).powf(sigma) * (1.0 + zn.sqrt() / rho).powf(sigma);
                                let bound = norm * sing * zn.powf(-0.5 * d) * (-pt.dist2() / (c * zn)).exp();
                                match zonal_complex_kernel(params, &zp, cfg) {
                                    Ok((v, scale)) => consider(v.norm() / bound, 0.0, scale <= RESOLVE * v.norm(), zp),
                                    Err(Error::Overflow(_)) => consider(0.0, 0.0, false, zp),
                                    Err(e) => return Err(e),
                                }
                            }
                        }
                        BoundKind::DifferenceAPos | BoundKind::DifferenceANeg => {
                            let v = difference_kernel(params, &pt, cfg)?;
                            let bound = norm * t.powf(-0.5 * d) * (1.0 + (r + rho) / st).powi(-2) * gauss;
                            let resolved = v.scale == 0.0 || v.scale <= RESOLVE * v.value.abs();
                            consider(v.value.abs() / bound, v.tail, resolved, pt);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// sup |kernel| / bound over the grid, with a 2x refinement for drift.
pub fn bound_ratio_scan(
    kind: BoundKind,
    params: &ModelParams,
    c: f64,
    grid: &ScanGrid,
    cfg: &ZonalConfig,
) -> Result<BoundRatioReport> {
    let coarse = scan_once(kind, params, c, grid, cfg)?;
    let fine = scan_once(kind, params, c, &grid.refined(), cfg)?;
    let drift = if fine.sup == 0.0 && coarse.sup == 0.0 { 0.0 } else { (fine.sup - coarse.sup).abs() / fine.sup };
    Ok(BoundRatioReport {
        kind,
        d: params.d,
        a: params.a,
        sup_ratio: fine.sup,
        arg_sup: fine.arg,
        c_used: c,
        grid: grid.refined().describe(),
        truncation_tail: coarse.tail.max(fine.tail),
        refinement_drift: drift,
        stable: drift < 0.05 && fine.sup.is_finite(),
        points: fine.points,
        unresolved: fine.unresolved,
    })
}

/// Centered annulus {lo <= |x| <= hi}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub lo: f64,
    pub hi: f64,
}

impl Annulus {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo >= 0.0 && hi > lo {
            Ok(Self { lo, hi })
        } else {
            Err(Error::Domain(format!("bad annulus [{lo}, {hi}]")))
        }
    }

    pub fn distance(&self, other: &Annulus) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }

    fn rule(&self, d: u32) -> (Vec<f64>, Vec<f64>) {
        let m = ((self.hi - self.lo) * 4.0).ceil().max(1.0) as usize;
        let h = (self.hi - self.lo) / m as f64;
        let panels: Vec<Panel> = (0..m).map(|i| Panel { a: self.lo + i as f64 * h, b: self.lo + (i + 1) as f64 * h, q: 24 }).collect();
        let (x, w) = composite(&panels);
        let w = x.iter().zip(&w).map(|(r, wi)| wi * r.powi(d as i32 - 1)).collect();
        (x, w)
    }
}

/// ||e^{-tL} f||_{L^q(F)} / (t^{-(d/2)(1/p - 1/q)} e^{-dist(E,F)^2/ct} ||f||_{L^p(E)})
/// with f restricted to E; the flow is computed with the radial kernel.
pub fn offdiagonal_check<F: Fn(f64) -> Complex64>(
    params: &ModelParams,
    t: f64,
    e: Annulus,
    f_set: Annulus,
    p: f64,
    q: f64,
    c: f64,
    f: F,
) -> Result<f64> {
    let lo = d_alpha(params.sigma, params.d).conjugate().0;
    let hi = d_alpha(params.sigma, params.d).0;
    if !(p > lo && p <= q && q < hi) {
        return Err(Error::Window(format!("need {lo} < p <= q < {hi}, got p={p}, q={q}")));
    }
    if e.distance(&f_set) <= 0.0 {
        return Err(Error::Domain("annuli must be disjoint".into()));
    }
    let d = params.d;
    let om = sphere_area(d);
    let (xe, we) = e.rule(d);
    let fe: Vec<Complex64> = xe.iter().map(|r| f(*r)).collect();
    let norm_p = (om * fe.iter().zip(&we).map(|(v, w)| w * v.norm().powf(p)).sum::<f64>()).powf(1.0 / p);
    if norm_p == 0.0 {
        return Ok(0.0);
    }
    let (xf, wf) = f_set.rule(d);
    let mut acc = 0.0;
    for (r, w) in xf.iter().zip(&wf) {
        let mut u = Complex64::new(0.0, 0.0);
        for ((rho, wr), v) in xe.iter().zip(&we).zip(&fe) {
            u += wr * radial_heat_kernel(params, t, *r, *rho)? * v;
        }
        acc += w * u.norm().powf(q);
    }
    let norm_q = (om * acc).powf(1.0 / q);
    let dd = d as f64;
    let bound = t.powf(-0.5 * dd * (1.0 / p - 1.0 / q)) * (-e.distance(&f_set).powi(2) / (c * t)).exp() * norm_p;
    Ok(norm_q / bound)
}

/// |x|^2 int t^{-d/2} e^{-|x-z|^2/(ct)} |z|^{-2} dz, by radial quadrature and the
/// closed-form angular integral (2 pi)^{d/2} k^{-n} I_n(k).
pub fn potential_convolution(d: u32, c: f64, x: f64, t: f64) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain("potential convolution needs d >= 3".into()));
    }
    let n = 0.5 * (d as f64 - 2.0);
    let df = d as f64;
    let s = (c * t).sqrt();
    // panels in rho: geometric toward 0, uniform over |x| +- 12 widths
    let lo = (x - 12.0 * s).max(0.0);
    let hi = x + 12.0 * s;
    let steps = 48;
    let start = lo.max((hi - lo) / steps as f64);
    let mut cuts = vec![0.0];
    let mut a = 1e-8 * hi;
    while a < start {
        cuts.push(a);
        a *= 2.0;
    }
    for i in 0..=steps {
        let v = start + (hi - start) * i as f64 / steps as f64;
        if v > *cuts.last().unwrap() {
            cuts.push(v);
        }
    }
    let panels: Vec<Panel> = cuts.windows(2).map(|w| Panel { a: w[0], b: w[1], q: 20 }).collect();
    let (nodes, weights) = composite(&panels);
    let mut sum = 0.0;
    for (rho, w) in nodes.iter().zip(&weights) {
        let k = 2.0 * x * rho / (c * t);
        let ang = if k == 0.0 {
            // k^{-n} I_n(k) -> 2^{-n} / Gamma(n + 1)
            2f64.powf(-n) / gamma(n + 1.0)?
        } else {
            k.powf(-n) * bessel_i_scaled(n, k)?
        };
        let expo = -(x - rho).powi(2) / (c * t);
        sum += w * rho.powf(df - 3.0) * expo.exp() * ang;
    }
    Ok(x * x * t.powf(-0.5 * df) * (2.0 * PI).powf(0.5 * df) * sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialScan {
    pub sup: f64,
    pub arg_sup: (f64, f64),
    /// value at the largest |x| / sqrt t scanned
    pub edge_value: f64,
    /// (pi c)^{d/2}, the |x| / sqrt t -> inf limit
    pub plateau: f64,
    pub refinement_drift: f64,
}

/// Sup of `potential_convolution` over |x| / sqrt t log-spaced and t values.
pub fn potential_convolution_check(d: u32, c: f64, xs_over_sqrt_t: &[f64], ts: &[f64]) -> Result<PotentialScan> {
    let mut sup = 0.0;
    let mut arg = (0.0, 0.0);
    let mut edge = 0.0;
    for &t in ts {
        for (i, &u) in xs_over_sqrt_t.iter().enumerate() {
            let v = potential_convolution(d, c, u * t.sqrt(), t)?;
            if v > sup {
                sup = v;
                arg = (u * t.sqrt(), t);
            }
            if i + 1 == xs_over_sqrt_t.len() {
                edge = v;
            }
        }
    }
    // midpoints in log scale refine the scan
    let mids: Vec<f64> = xs_over_sqrt_t.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    let mut fine = sup;
    for &u in &mids {
        fine = fine.max(potential_convolution(d, c, u, 1.0)?);
    }
    Ok(PotentialScan {
        sup: fine,
        arg_sup: arg,
        edge_value: edge,
        plateau: (PI * c).powf(0.5 * d as f64),
        refinement_drift: (fine - sup) / fine,
    })
}

/// Integral of f(|x|) over R^d from a radial rule (for kernel mass checks).
pub fn radial_mass<F: Fn(f64) -> f64>(d: u32, upper: f64, f: F) -> f64 {
    let (x, w) = gauss_legendre(40);
    let m = (upper * 2.0).ceil() as usize;
    let h = upper / m as f64;
    let mut s = 0.0;
    for i in 0..m {
        for (xi, wi) in x.iter().zip(&w) {
            let r = h * (i as f64 + 0.5 * (xi + 1.0));
            s += 0.5 * h * wi * f(r) * r.powi(d as i32 - 1);
        }
    }
    s * sphere_area(d)
}
