//! Gauss-Legendre rules and composite panel grids.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Nodes and weights of the q-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "Gauss-Legendre needs at least one node");
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let m = q.div_ceil(2);
    let qf = q as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..q {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = qf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[q - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    (x, w)
}

/// One integration panel [a, b] carrying q Gauss-Legendre nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub q: usize,
}

/// Nodes and weights of a composite rule over consecutive panels.
pub fn composite(panels: &[Panel]) -> (Vec<f64>, Vec<f64>) {
    let mut cache: Vec<(usize, (Vec<f64>, Vec<f64>))> = Vec::new();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for p in panels {
        let idx = match cache.iter().position(|(q, _)| *q == p.q) {
            Some(i) => i,
            None => {
                cache.push((p.q, gauss_legendre(p.q)));
                cache.len() - 1
            }
        };
        let (x, w) = &cache[idx].1;
        let half = 0.5 * (p.b - p.a);
        let mid = 0.5 * (p.a + p.b);
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Panels on [0, upper]: a first panel [0, lower], geometric (ratio 2)
/// panels up to `width`, then uniform panels of at most `width`.
///
/// Each panel of length h gets `ceil(density * h) + base` nodes, where
/// `density` is the highest angular frequency to resolve (radians per
/// unit length) and `base` covers the smooth part.
pub fn graded_panels(lower: f64, upper: f64, width: f64, density: f64, base: usize) -> Result<Vec<Panel>> {
    if !(lower > 0.0 && upper > lower && width > 0.0 && density >= 0.0) {
        return Err(Error::Config(format!(
            "graded panels need 0 < lower < upper and width > 0 (lower={lower}, upper={upper}, width={width})"
        )));
    }
    let nodes_for = |h: f64| (0.9 * density * h).ceil() as usize + base;
    let mut panels = vec![Panel { a: 0.0, b: lower, q: base }];
    let mut a = lower;
    while a < upper {
        let h = a.min(width).min(upper - a);
        let b = if upper - (a + h) < 1e-9 * upper { upper } else { a + h };
        panels.push(Panel { a, b, q: nodes_for(b - a) });
        a = b;
    }
    Ok(panels)
}

/// Geometric panels on [a, b] (0 < a < b) with ratio `ratio`.
pub fn geometric_panels(a: f64, b: f64, ratio: f64, q: usize) -> Vec<Panel> {
    let mut out = Vec::new();
    let mut x = a;
    while x < b {
        let y = (x * ratio).min(b);
        out.push(Panel { a: x, b: y, q });
        x = y;
    }
    out
}

/// Uniform panels on [a, b] of width at most `h`.
pub fn uniform_panels(a: f64, b: f64, h: f64, q: usize) -> Vec<Panel> {
    let n = ((b - a) / h).ceil().max(1.0) as usize;
    let w = (b - a) / n as f64;
    (0..n)
        .map(|i| Panel { a: a + i as f64 * w, b: if i + 1 == n { b } else { a + (i + 1) as f64 * w }, q })
        .collect()
}

/// Integrate f over [a, b] with `n` equal panels of q nodes.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize, q: usize) -> f64 {
    let (x, w) = composite(&uniform_panels(a, b, (b - a) / n as f64, q));
    x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for q in [1, 2, 5, 16, 40, 101] {
            let (x, w) = gauss_legendre(q);
            let deg = 2 * q - 1;
            for k in 0..=deg.min(30) {
                let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "q={q} k={k}");
            }
        }
    }

    #[test]
    fn graded_grid_integrates_power_and_oscillation() {
        let panels = graded_panels(1e-4, 30.0, 0.5, 12.0, 10).unwrap();
        let (x, w) = composite(&panels);
        assert!(x[0] > 0.0);
        let s: f64 = x.iter().zip(&w).map(|(r, wi)| wi * r.sqrt()).sum();
        assert!((s - 2.0 / 3.0 * 30f64.powf(1.5)).abs() < 1e-10);
        let s: f64 = x.iter().zip(&w).map(|(r, wi)| wi * (12.0 * r).cos()).sum();
        assert!((s - (360.0f64).sin() / 12.0).abs() < 1e-12);
    }

    #[test]
    fn bad_panels_rejected() {
        assert!(graded_panels(0.0, 1.0, 0.5, 1.0, 4).is_err());
        assert!(graded_panels(2.0, 1.0, 0.5, 1.0, 4).is_err());
    }
}
