//! Exponent and weight algebra: sigma, nu, delta, eps*, the d_alpha
//! convention, exponent windows, and A_p / RH_q classification of radial
//! weights.

use crate::error::{domain, Error, Result};
use crate::quad::{composite, gauss_legendre, Panel};
use crate::specfun::gamma;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Dimension, coupling and the derived spectral quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: u32,
    pub a: f64,
    pub sigma: f64,
    pub nu0: f64,
    pub delta: f64,
    /// min{1, delta / (3 d^2)}; only defined when delta > 0.
    pub eps_star: Option<f64>,
}

impl ModelParams {
    pub fn new(d: u32, a: f64) -> Result<Self> {
        if d < 3 {
            return domain(format!("dimension must be at least 3, got {d}"));
        }
        if !a.is_finite() {
            return domain("coupling must be finite");
        }
        let df = d as f64;
        let n = 0.5 * (df - 2.0);
        if a < -n * n {
            return domain(format!("coupling {a} is below the Hardy threshold {}", -n * n));
        }
        let nu0 = 0.5 * ((df - 2.0).powi(2) + 4.0 * a).max(0.0).sqrt();
        let sigma = n - nu0;
        let delta = a + n * n - 0.25;
        let eps_star = (delta > 0.0).then(|| (delta / (3.0 * df * df)).min(1.0));
        Ok(Self { d, a, sigma, nu0, delta, eps_star })
    }

    /// (d - 2) / 2.
    pub fn half(&self) -> f64 {
        0.5 * (self.d as f64 - 2.0)
    }

    pub fn dim(&self) -> f64 {
        self.d as f64
    }

    /// Bessel order of the degree-l spherical-harmonic sector.
    pub fn nu_ell(&self, ell: usize) -> f64 {
        let m = ell as f64 + self.half();
        (m * m + self.a).max(0.0).sqrt()
    }

    /// Critical coupling: nu0 = 0, numerically delicate.
    pub fn is_critical(&self) -> bool {
        self.nu0 == 0.0
    }

    /// Surface area of the unit sphere S^{d-1}.
    pub fn omega(&self) -> f64 {
        sphere_area(self.d)
    }
}

/// Convenience constructor mirroring `ModelParams::new`.
pub fn make_params(d: u32, a: f64) -> Result<ModelParams> {
    ModelParams::new(d, a)
}

/// |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2).
pub fn sphere_area(d: u32) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * PI.powf(h) / gamma(h).expect("gamma at half-integer")
}

/// Extended-real exponent in (0, inf]; serialized as a number or "inf".
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(v) => Ok(Exponent(v)),
            Repr::Text(t) if t == "inf" => Ok(Exponent::INF),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad exponent '{t}'"))),
        }
    }
}

impl Exponent {
    pub const INF: Exponent = Exponent(f64::INFINITY);

    pub fn new(v: f64) -> Result<Self> {
        if v > 0.0 {
            Ok(Self(v))
        } else {
            domain(format!("exponent must be positive, got {v}"))
        }
    }

    pub fn is_inf(&self) -> bool {
        self.0.is_infinite()
    }

    /// Hoelder conjugate, with 1 <-> inf.
    pub fn conjugate(&self) -> Exponent {
        let p = self.0;
        if p.is_infinite() {
            Exponent(1.0)
        } else if p == 1.0 {
            Exponent::INF
        } else {
            Exponent(p / (p - 1.0))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// d / alpha for alpha > 0, infinity otherwise.
pub fn d_alpha(alpha: f64, d: u32) -> Exponent {
    if alpha > 0.0 {
        Exponent(d as f64 / alpha)
    } else {
        Exponent::INF
    }
}

/// Radial weight w(|x|).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Power { alpha: f64 },
    Composite { eps: f64 },
    /// Samples (r, w) interpolated log-log linearly, extended by the end slopes.
    Table { r: Vec<f64>, w: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub description: String,
}

impl WeightSpec {
    pub fn power(alpha: f64) -> Self {
        Self { kind: WeightKind::Power { alpha }, description: format!("|x|^{alpha}") }
    }

    pub fn constant() -> Self {
        Self::power(0.0)
    }

    /// w_eps = |x|^{eps-1} / (1 + |x|^eps)^2.
    pub fn composite(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return domain(format!("composite weight needs 0 < eps < 1, got {eps}"));
        }
        Ok(Self {
            kind: WeightKind::Composite { eps },
            description: format!("|x|^({eps}-1)/(1+|x|^{eps})^2"),
        })
    }

    pub fn table(r: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || r.len() != w.len() {
            return domain("weight table needs at least two (r, w) samples of equal length");
        }
        if r.windows(2).any(|p| !(p[1] > p[0])) || r[0] <= 0.0 || w.iter().any(|v| !(*v > 0.0)) {
            return domain("weight table needs increasing positive r and positive w");
        }
        Ok(Self { kind: WeightKind::Table { r, w }, description: "tabulated".into() })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.kind {
            WeightKind::Power { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    r.powf(*alpha)
                }
            }
            WeightKind::Composite { eps } => {
                let re = r.powf(*eps);
                re / r / ((1.0 + re) * (1.0 + re))
            }
            WeightKind::Table { r: rs, w } => {
                let n = rs.len();
                let i = match rs.partition_point(|x| *x <= r) {
                    0 => 0,
                    k if k >= n => n - 2,
                    k => k - 1,
                };
                let (x0, x1) = (rs[i].ln(), rs[i + 1].ln());
                let (y0, y1) = (w[i].ln(), w[i + 1].ln());
                (y0 + (y1 - y0) * (r.ln() - x0) / (x1 - x0)).exp()
            }
        }
    }

    /// Power exponents of the weight as |x| -> 0 and |x| -> inf.
    pub fn envelope(&self) -> (f64, f64) {
        match &self.kind {
            WeightKind::Power { alpha } => (*alpha, *alpha),
            WeightKind::Composite { eps } => (eps - 1.0, -1.0 - eps),
            WeightKind::Table { r, w } => {
                let n = r.len();
                let s0 = (w[1] / w[0]).ln() / (r[1] / r[0]).ln();
                let s1 = (w[n - 1] / w[n - 2]).ln() / (r[n - 1] / r[n - 2]).ln();
                (s0, s1)
            }
        }
    }

    pub fn is_exact_power(&self) -> bool {
        matches!(self.kind, WeightKind::Power { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    EquivForward,
    EquivReverse,
    Hardy,
    Square,
    Difference,
}

impl TheoremId {
    pub const ALL: [TheoremId; 5] =
        [Self::EquivForward, Self::EquivReverse, Self::Hardy, Self::Square, Self::Difference];

    pub fn name(&self) -> &'static str {
        match self {
            Self::EquivForward => "equiv_forward",
            Self::EquivReverse => "equiv_reverse",
            Self::Hardy => "hardy",
            Self::Square => "square",
            Self::Difference => "difference",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown theorem id '{s}'")))
    }
}

/// Open p-interval of a theorem plus its weight-class indices: the weight
/// must lie in A_{p / ap_index} and RH_{(rh_index / p)'}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub theorem: TheoremId,
    pub d: u32,
    pub a: f64,
    pub s: f64,
    pub p_lower: Exponent,
    pub p_upper: Exponent,
    pub ap_index: Exponent,
    pub rh_index: Exponent,
    pub valid: bool,
    pub reason: String,
}

impl WindowSpec {
    /// Strictly inside the open window.
    pub fn contains(&self, p: f64) -> bool {
        self.valid && p > self.p_lower.0 && p < self.p_upper.0
    }
}

/// Exponent window and weight indices for a theorem at (d, a, s).
pub fn window(params: &ModelParams, s: f64, theorem: TheoremId) -> Result<WindowSpec> {
    if s.is_nan() {
        return domain("s is NaN");
    }
    let d = params.dim();
    let sigma = params.sigma;
    let mut reasons = Vec::new();
    let s_max = if theorem == TheoremId::Hardy { d } else { 2.0 };
    if !(s > 0.0 && s < s_max) && theorem != TheoremId::Square {
        reasons.push(format!("s={s} outside (0, {s_max})"));
    }
    let one_or = |x: f64| x.max(1.0);
    let (lo, hi) = match theorem {
        TheoremId::EquivForward => (one_or(d / (d - sigma)), d_alpha(s + sigma, params.d).0),
        TheoremId::EquivReverse => (one_or(d / (d - sigma)), d_alpha(s.max(sigma), params.d).0),
        TheoremId::Hardy => {
            if !(d - s - 2.0 * sigma > 0.0) {
                reasons.push(format!("d - s - 2 sigma = {} is not positive", d - s - 2.0 * sigma));
            }
            (d_alpha(sigma, params.d).conjugate().0, d_alpha(s + sigma, params.d).0)
        }
        TheoremId::Square => (d_alpha(sigma, params.d).conjugate().0, d_alpha(sigma, params.d).0),
        TheoremId::Difference => {
            if params.a >= 0.0 {
                (1.0, f64::INFINITY)
            } else {
                (one_or(d / (d + s - sigma)), d_alpha(sigma, params.d).0)
            }
        }
    };
    if !(lo < hi) {
        reasons.push(format!("empty window ({lo}, {hi})"));
    }
    Ok(WindowSpec {
        theorem,
        d: params.d,
        a: params.a,
        s,
        p_lower: Exponent(lo),
        p_upper: Exponent(hi),
        ap_index: Exponent(lo),
        rh_index: Exponent(hi),
        valid: reasons.is_empty(),
        reason: if reasons.is_empty() { "ok".into() } else { reasons.join("; ") },
    })
}

// Relative margin by which a value must clear a class boundary; boundary
// points are treated as outside, matching the strict inequalities.
const BOUNDARY_TOL: f64 = 1e-12;

fn strictly_less(x: f64, y: f64) -> bool {
    x < y - BOUNDARY_TOL * x.abs().max(y.abs()).max(1.0)
}

/// |x|^alpha in A_p, and in RH_q.
pub fn power_weight_class(alpha: f64, p: Exponent, q: Exponent, d: u32) -> (bool, bool) {
    let df = d as f64;
    let in_ap = if p.is_inf() {
        strictly_less(-df, alpha)
    } else if p.0 <= 1.0 {
        strictly_less(-df, alpha) && alpha <= 0.0
    } else {
        strictly_less(-df, alpha) && strictly_less(alpha, df * (p.0 - 1.0))
    };
    let in_rh = if q.is_inf() {
        alpha >= 0.0
    } else if q.0 <= 1.0 {
        true
    } else {
        strictly_less(-df, alpha * q.0)
    };
    (in_ap, in_rh)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// "exact" for power weights, "envelope+numeric" otherwise.
    pub label: String,
    pub ap_class: f64,
    pub rh_class: Exponent,
    pub detail: String,
    pub ap_estimate: Option<f64>,
}

/// Decide w in A_{p/p0} intersected with RH_{(q0/p)'}.
pub fn weight_admissible(w: &WeightSpec, p: Exponent, p0: Exponent, q0: Exponent, d: u32) -> AdmissibilityReport {
    let label = if w.is_exact_power() { "exact" } else { "envelope+numeric" };
    if !(p.0 > p0.0 && p.0 < q0.0) {
        return AdmissibilityReport {
            admissible: false,
            label: label.into(),
            ap_class: f64::NAN,
            rh_class: Exponent::INF,
            detail: format!("p = {p} is not strictly inside ({p0}, {q0})"),
            ap_estimate: None,
        };
    }
    let ap = Exponent(p.0 / p0.0);
    let rh = if q0.is_inf() { Exponent(1.0) } else { Exponent(q0.0 / p.0).conjugate() };
    let (e0, e1) = w.envelope();
    let c0 = power_weight_class(e0, ap, rh, d);
    let c1 = power_weight_class(e1, ap, rh, d);
    let mut ok = c0.0 && c0.1 && c1.0 && c1.1;
    let mut detail = format!(
        "A_{} x RH_{}: exponent {e0} near 0 -> (A {}, RH {}); exponent {e1} near inf -> (A {}, RH {})",
        ap, rh, c0.0, c0.1, c1.0, c1.1
    );
    let mut est = None;
    if !w.is_exact_power() && ok {
        match ap_characteristic_estimate(w, ap, d, &BallFamily::dyadic(12, 6)) {
            Ok(v) => {
                detail.push_str(&format!("; numeric [w]_A = {v:.4}"));
                est = Some(v);
            }
            Err(e) => {
                ok = false;
                detail.push_str(&format!("; numeric estimator failed: {e}"));
            }
        }
    }
    AdmissibilityReport { admissible: ok, label: label.into(), ap_class: ap.0, rh_class: rh, detail, ap_estimate: est }
}

/// Self-test of the duality between weight classes for power weights:
/// true iff both sides of the equivalence agree.
pub fn dual_weight_check(alpha: f64, p: f64, p0: f64, q0: f64, d: u32) -> Result<bool> {
    if !(1.0 < p0 && p0 < p && p < q0 && q0.is_finite()) {
        return domain(format!("duality needs 1 < p0 < p < q0 < inf, got p0={p0}, p={p}, q0={q0}"));
    }
    let lhs = {
        let (a, r) = power_weight_class(alpha, Exponent(p / p0), Exponent(q0 / p).conjugate(), d);
        a && r
    };
    let pc = Exponent(p).conjugate().0;
    let p0c = Exponent(p0).conjugate().0;
    let q0c = Exponent(q0).conjugate().0;
    let beta = alpha * (1.0 - pc);
    let rhs = {
        let (a, r) = power_weight_class(beta, Exponent(pc / q0c), Exponent(p0c / pc).conjugate(), d);
        a && r
    };
    Ok(lhs == rhs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityScan {
    pub points: usize,
    pub failures: Vec<(f64, f64, f64, f64)>,
    pub both_true: usize,
}

/// Exhaustive duality scan over (alpha, p, p0, q0) for one dimension.
pub fn duality_scan(d: u32) -> DualityScan {
    let p0s = [1.1, 1.25, 1.5, 2.0, 2.5, 3.0];
    let ps = [1.2, 1.5, 1.75, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0];
    let q0s = [2.0, 3.0, 4.0, 6.0, 8.0, 12.0];
    let df = d as f64;
    let mut scan = DualityScan { points: 0, failures: Vec::new(), both_true: 0 };
    for &p0 in &p0s {
        for &p in &ps {
            for &q0 in &q0s {
                if !(p0 < p && p < q0) {
                    continue;
                }
                let hi = df * (p - 1.0) + 1.0;
                let n = ((hi + df + 1.0) / 0.1).round() as usize;
                for k in 0..=n {
                    let alpha = -df - 1.0 + 0.1 * k as f64;
                    scan.points += 1;
                    match dual_weight_check(alpha, p, p0, q0, d) {
                        Ok(true) => {
                            let (a, r) = power_weight_class(alpha, Exponent(p / p0), Exponent(q0 / p).conjugate(), d);
                            if a && r {
                                scan.both_true += 1;
                            }
                        }
                        _ => scan.failures.push((alpha, p, p0, q0)),
                    }
                }
            }
        }
    }
    scan
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothingAdmissibility {
    pub admissible: bool,
    pub delta: f64,
    pub delta_ok: bool,
    pub weight: AdmissibilityReport,
}

/// delta > 0 and w_eps admissible for p = 2 in the forward-equivalence
/// window at s = 1/2.
pub fn smoothing_admissible(params: &ModelParams, eps: f64) -> Result<SmoothingAdmissibility> {
    let w = WeightSpec::composite(eps)?;
    let win = window(params, 0.5, TheoremId::EquivForward)?;
    let weight = weight_admissible(&w, Exponent(2.0), win.ap_index, win.rh_index, params.d);
    let delta_ok = params.delta > 0.0;
    Ok(SmoothingAdmissibility { admissible: delta_ok && weight.admissible, delta: params.delta, delta_ok, weight })
}

/// Ball B(x0, r) with |x0| = center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
}

impl BallFamily {
    /// Centered balls of radii 2^-k..2^k and off-center balls with
    /// |x0| in 2^-m..2^m and r in {|x0|/4, |x0|, 4|x0|}.
    pub fn dyadic(k: i32, m: i32) -> Self {
        let mut balls: Vec<Ball> = (-k..=k).map(|j| Ball { center: 0.0, radius: 2f64.powi(j) }).collect();
        for j in -m..=m {
            let c = 2f64.powi(j);
            for f in [0.25, 1.0, 4.0] {
                balls.push(Ball { center: c, radius: f * c });
            }
        }
        Self { balls }
    }

    /// The default family (radii 2^-20..2^20, centers 2^-10..2^10).
    pub fn standard() -> Self {
        Self::dyadic(20, 10)
    }

    /// Family with the dyadic ranges doubled.
    pub fn doubled(k: i32, m: i32) -> Self {
        Self::dyadic(2 * k, 2 * m)
    }

    fn min_radius(&self) -> f64 {
        self.balls.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min)
    }
}

// fraction of S^{d-1} within polar angle theta of a pole
struct CapRule {
    x: Vec<f64>,
    w: Vec<f64>,
    m: i32,
    full: f64,
}

impl CapRule {
    fn new(d: u32) -> Self {
        let (x, w) = gauss_legendre(32);
        let m = d as i32 - 2;
        let full = x.iter().zip(&w).map(|(xi, wi)| 0.5 * PI * wi * (0.5 * PI * (xi + 1.0)).sin().powi(m)).sum();
        Self { x, w, m, full }
    }

    fn fraction(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= PI {
            return 1.0;
        }
        let part: f64 = self
            .x
            .iter()
            .zip(&self.w)
            .map(|(xi, wi)| 0.5 * theta * wi * (0.5 * theta * (xi + 1.0)).sin().powi(self.m))
            .sum();
        part / self.full
    }
}

// panels on [a, b] refined geometrically toward both endpoints
fn two_sided_panels(a: f64, b: f64, levels: usize, q: usize) -> Vec<Panel> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut cuts = vec![a];
    for k in (1..=levels).rev() {
        cuts.push(a + half * 0.5f64.powi(k as i32));
    }
    cuts.push(mid);
    for k in 1..=levels {
        cuts.push(b - half * 0.5f64.powi(k as i32));
    }
    cuts.push(b);
    cuts.windows(2).map(|c| Panel { a: c[0], b: c[1], q }).collect()
}

// integral of g(|x|) over the ball, by shells; `floor` truncates the origin
fn ball_integral<G: Fn(f64) -> f64>(g: &G, ball: Ball, d: u32, floor: f64, q: usize, cap: &CapRule) -> f64 {
    let omega = sphere_area(d);
    let dm1 = d as i32 - 1;
    let shell = |s: f64| g(s) * s.powi(dm1);
    let mut total = 0.0;
    let (c, r) = (ball.center, ball.radius);
    let inner = (r - c).max(0.0);
    if inner > floor {
        // full spheres: geometric panels down to the floor
        let mut panels = crate::quad::geometric_panels(floor, inner, 2.0, q);
        if let Some(last) = panels.last_mut() {
            last.b = inner;
        }
        let (x, w) = composite(&panels);
        total += omega * x.iter().zip(&w).map(|(s, wi)| wi * shell(*s)).sum::<f64>();
    }
    if c > 0.0 {
        let lo = (c - r).abs().max(inner).max(floor);
        let hi = c + r;
        if hi > lo {
            // balls touching the origin: grade geometrically down to the floor
            let knee = hi * 2f64.powi(-24);
            let mut panels = Vec::new();
            let start = if lo < knee {
                panels.extend(crate::quad::geometric_panels(lo, knee, 2.0, q));
                if let Some(last) = panels.last_mut() {
                    last.b = knee;
                }
                knee
            } else {
                lo
            };
            panels.extend(two_sided_panels(start, hi, 24, q));
            let (x, w) = composite(&panels);
            for (s, wi) in x.iter().zip(&w) {
                let cos_t = ((s * s + c * c - r * r) / (2.0 * s * c)).clamp(-1.0, 1.0);
                total += omega * wi * shell(*s) * cap.fraction(cos_t.acos());
            }
        }
    }
    total
}

/// Lower-bound estimate of [w]_{A_p} = sup_B (avg_B w)(avg_B w^{1-p'})^{p-1}
/// over the ball family.
pub fn ap_characteristic_estimate(w: &WeightSpec, p: Exponent, d: u32, family: &BallFamily) -> Result<f64> {
    if !(p.0 > 1.0) || p.is_inf() {
        return domain(format!("A_p estimate needs 1 < p < inf, got {p}"));
    }
    if family.balls.is_empty() {
        return domain("empty ball family");
    }
    let expo = 1.0 - p.conjugate().0;
    let floor = family.min_radius() * 2f64.powi(-20);
    let wf = |s: f64| w.eval(s);
    let sf = |s: f64| w.eval(s).powf(expo);
    let cap = CapRule::new(d);
    let mut best: f64 = 0.0;
    for ball in &family.balls {
        let vol = sphere_area(d) * ball.radius.powi(d as i32) / d as f64;
        let mut avgs = [0.0; 2];
        for (k, avg) in avgs.iter_mut().enumerate() {
            let (lo, hi) = if k == 0 {
                (ball_integral(&wf, *ball, d, floor, 12, &cap), ball_integral(&wf, *ball, d, floor, 20, &cap))
            } else {
                (ball_integral(&sf, *ball, d, floor, 12, &cap), ball_integral(&sf, *ball, d, floor, 20, &cap))
            };
            if !hi.is_finite() || (hi - lo).abs() > 1e-6 * hi.abs() {
                return Err(Error::Quadrature(format!(
                    "ball (|x0|={}, r={}) integral not converged: {lo} vs {hi}",
                    ball.center, ball.radius
                )));
            }
            *avg = hi / vol;
        }
        best = best.max(avgs[0] * avgs[1].powf(p.0 - 1.0));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_examples() {
        let p = make_params(3, 0.0).unwrap();
        assert_eq!((p.sigma, p.nu0, p.delta), (0.0, 0.5, 0.0));
        assert!(p.eps_star.is_none());
        let p = make_params(3, 2.0).unwrap();
        assert_eq!(p.sigma, -1.0);
        assert_eq!(p.nu0, 1.5);
        let p = make_params(4, -1.0).unwrap();
        assert_eq!((p.sigma, p.nu0), (1.0, 0.0));
        assert!(p.is_critical());
        assert!(make_params(2, 0.0).is_err());
        assert!(make_params(3, -0.26).is_err());
        assert!((make_params(3, 1.0).unwrap().eps_star.unwrap() - 1.0 / 27.0).abs() < 1e-16);
        assert!((make_params(4, 0.0).unwrap().eps_star.unwrap() - 1.0 / 64.0).abs() < 1e-16);
    }

    #[test]
    fn d_alpha_cases() {
        assert!(d_alpha(-1.0, 3).is_inf());
        assert_eq!(d_alpha(1.0, 3).0, 3.0);
        assert!(d_alpha(0.0, 5).is_inf());
        assert_eq!(Exponent::INF.conjugate().0, 1.0);
        assert!(Exponent(1.0).conjugate().is_inf());
        assert!((Exponent(3.0).conjugate().conjugate().0 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn window_examples() {
        let w = window(&make_params(3, 2.0).unwrap(), 1.0, TheoremId::EquivForward).unwrap();
        assert_eq!(w.p_lower.0, 1.0);
        assert!(w.p_upper.is_inf());
        let w = window(&make_params(3, 0.0).unwrap(), 1.0, TheoremId::Hardy).unwrap();
        assert_eq!((w.p_lower.0, w.p_upper.0), (1.0, 3.0));
        assert!(w.valid);
        let w = window(&make_params(3, 0.0).unwrap(), 1.0, TheoremId::EquivReverse).unwrap();
        assert_eq!((w.p_lower.0, w.p_upper.0), (1.0, 3.0));
        let w = window(&make_params(4, -1.0).unwrap(), 2.5, TheoremId::Hardy).unwrap();
        assert!(!w.valid, "d - s - 2 sigma = -0.5");
        assert!("bogus".parse::<TheoremId>().is_err());
    }

    #[test]
    fn power_class_examples() {
        assert_eq!(power_weight_class(-1.0, Exponent(2.0), Exponent(2.0), 3), (true, true));
        assert_eq!(power_weight_class(0.0, Exponent(7.0), Exponent(1.5), 3), (true, true));
        assert!(!power_weight_class(3.0, Exponent(2.0), Exponent(2.0), 3).0);
        assert!(!power_weight_class(-3.0, Exponent(2.0), Exponent(2.0), 3).0);
    }

    #[test]
    fn admissibility_examples() {
        let r = weight_admissible(&WeightSpec::power(-1.0), Exponent(2.0), Exponent(1.0), Exponent::INF, 3);
        assert!(r.admissible);
        assert_eq!(r.label, "exact");
        let r = weight_admissible(&WeightSpec::constant(), Exponent(2.5), Exponent(1.5), Exponent(4.0), 4);
        assert!(r.admissible);
        let r = weight_admissible(&WeightSpec::composite(0.5).unwrap(), Exponent(2.0), Exponent(1.0), Exponent::INF, 3);
        assert!(r.admissible, "{}", r.detail);
        assert_eq!(r.label, "envelope+numeric");
        let r = weight_admissible(&WeightSpec::constant(), Exponent(1.0), Exponent(1.0), Exponent(3.0), 3);
        assert!(!r.admissible, "boundary p rejected");
    }

    #[test]
    fn duality_examples() {
        assert!(dual_weight_check(1.0, 3.0, 2.0, 4.0, 5).unwrap());
        assert!(dual_weight_check(0.0, 2.0, 1.5, 3.0, 3).unwrap());
        assert!(dual_weight_check(0.0, 2.0, 2.5, 3.0, 3).is_err());
        let scan = duality_scan(4);
        assert!(scan.failures.is_empty(), "{:?}", &scan.failures[..scan.failures.len().min(5)]);
    }

    #[test]
    fn smoothing_admissibility_examples() {
        assert!(smoothing_admissible(&make_params(3, 1.0).unwrap(), 0.25).unwrap().admissible);
        let s = smoothing_admissible(&make_params(3, 0.0).unwrap(), 0.25).unwrap();
        assert!(!s.admissible && !s.delta_ok);
        assert!(smoothing_admissible(&make_params(4, 0.0).unwrap(), 0.9).unwrap().admissible);
    }

    #[test]
    fn ap_estimates() {
        let fam = BallFamily::dyadic(8, 4);
        let c = ap_characteristic_estimate(&WeightSpec::constant(), Exponent(2.0), 3, &fam).unwrap();
        assert!((c - 1.0).abs() < 1e-9, "{c}");
        // centered balls alone give d^2 / (d^2 - alpha^2) for |x|^alpha
        let fam = BallFamily { balls: vec![Ball { center: 0.0, radius: 1.0 }] };
        let c = ap_characteristic_estimate(&WeightSpec::power(-1.5), Exponent(2.0), 3, &fam).unwrap();
        assert!((c - 9.0 / (9.0 - 2.25)).abs() < 1e-6, "{c}");
    }

    #[test]
    fn composite_weight_estimate_is_stable_under_doubling() {
        let w = WeightSpec::composite(0.5).unwrap();
        let a = ap_characteristic_estimate(&w, Exponent(2.0), 3, &BallFamily::standard()).unwrap();
        let b = ap_characteristic_estimate(&w, Exponent(2.0), 3, &BallFamily::doubled(20, 10)).unwrap();
        assert!(a.is_finite() && (b / a - 1.0).abs() < 0.05, "{a} {b}");
    }

    #[test]
    fn critical_power_weight_estimate_grows() {
        let w = WeightSpec::power(-3.0);
        let est: Vec<f64> = [5, 10, 20, 40]
            .iter()
            .map(|k| ap_characteristic_estimate(&w, Exponent(2.0), 3, &BallFamily::dyadic(*k, 3)).unwrap())
            .collect();
        // logarithmic blow-up: roughly linear in the number of dyadic levels
        assert!(est.windows(2).all(|e| e[1] > e[0] + 10.0), "{est:?}");
        assert!(est[3] > 2.0 * est[0], "{est:?}");
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }
}
