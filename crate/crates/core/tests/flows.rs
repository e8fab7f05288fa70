use invsq::hankel::{build_plan, heat, BesselOrder, PlanConfig, RadialFunction};
use invsq::harness::{verify_hardy, HarnessConfig};
use invsq::kernels::radial_heat_kernel;
use invsq::morawetz::{evolve, smoothing_estimate, Estimate, Flow, SmoothingConfig};
use invsq::quad::gauss_legendre;
use invsq::spectrum::{ModelParams, WeightSpec};

/// Composite Gauss-Legendre on [0, upper] against rho^{d-1} drho.
fn radial_integral<F: Fn(f64) -> f64>(d: u32, upper: f64, f: F) -> f64 {
    let (x, w) = gauss_legendre(32);
    let panels = (4.0 * upper).ceil() as usize;
    let h = upper / panels as f64;
    let mut s = 0.0;
    for i in 0..panels {
        for (xi, wi) in x.iter().zip(&w) {
            let r = h * (i as f64 + 0.5 * (xi + 1.0));
            s += 0.5 * h * wi * f(r) * r.powi(d as i32 - 1);
        }
    }
    s
}

#[test]
fn smoothing_lhs_is_time_translation_invariant() {
    let p = ModelParams::new(4, 0.0).unwrap();
    let cfg = PlanConfig { flow_horizon: 1.0, ..PlanConfig::default() };
    let plan = build_plan(&p, BesselOrder::Radial, &cfg).unwrap();
    let f = RadialFunction::from_real(&plan.radial, |r| (-(r - 2.0) * (r - 2.0)).exp());
    let sm = SmoothingConfig { t: 20.0, ..SmoothingConfig::quick() };
    let base = smoothing_estimate(Estimate::First, &plan, None, 0.5, &f, &sm).unwrap();
    for t1 in [0.25, 1.0] {
        let g = evolve(&plan, &f, t1, Flow::Schrodinger).unwrap();
        let moved = smoothing_estimate(Estimate::First, &plan, None, 0.5, &g, &sm).unwrap();
        let rel = (moved.lhs / base.lhs - 1.0).abs();
        assert!(rel < 0.05, "t1={t1}: {} vs {}", moved.lhs, base.lhs);
    }
}

#[test]
fn heat_kernel_action_matches_spectral_multiplier() {
    for (d, a) in [(3, 0.0), (3, -0.2), (4, 1.5), (5, 6.0)] {
        let p = ModelParams::new(d, a).unwrap();
        let plan = build_plan(&p, BesselOrder::Radial, &PlanConfig::default()).unwrap();
        let bump = |r: f64| (-(r - 3.0) * (r - 3.0)).exp();
        let f = RadialFunction::from_real(&plan.radial, bump);
        for t in [0.1, 0.5, 2.0] {
            let u = plan.apply_multiplier(&f, heat(t)).unwrap();
            let mut worst: f64 = 0.0;
            for (r, v) in u.nodes().iter().zip(&u.values).filter(|(r, _)| (0.5..8.0).contains(*r)) {
                let k = radial_integral(d, 12.0, |rho| radial_heat_kernel(&p, t, *r, rho).unwrap() * bump(rho));
                worst = worst.max((k - v.re).abs());
            }
            assert!(worst < 1e-7 * f.max_abs(), "d={d} a={a} t={t}: {worst:e}");
        }
    }
}

#[test]
fn chapman_kolmogorov() {
    for (d, a) in [(3, 0.0), (3, -0.24), (4, 2.0), (6, 0.5)] {
        let p = ModelParams::new(d, a).unwrap();
        for (s, t) in [(0.3, 0.7), (1.0, 0.5)] {
            for (r, q) in [(0.4, 1.1), (1.5, 2.5), (2.0, 2.0)] {
                let lhs = radial_integral(d, 20.0, |rho| {
                    radial_heat_kernel(&p, s, r, rho).unwrap() * radial_heat_kernel(&p, t, rho, q).unwrap()
                });
                let rhs = radial_heat_kernel(&p, s + t, r, q).unwrap();
                assert!((lhs / rhs - 1.0).abs() < 1e-7, "d={d} a={a} s={s} t={t} r={r} q={q}: {lhs} {rhs}");
            }
        }
    }
}

#[test]
fn hardy_certificate_is_reproducible() {
    let p = ModelParams::new(3, 0.5).unwrap();
    let cfg = HarnessConfig { family_size: 12, ..HarnessConfig::quick() };
    let a = verify_hardy(&p, 1.0, 2.0, &WeightSpec::constant(), &cfg).unwrap();
    let b = verify_hardy(&p, 1.0, 2.0, &WeightSpec::constant(), &cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert!(a.pass);
    for series in &a.series {
        assert_eq!(series.trajectory.len(), series.rows.len());
        assert!(series.trajectory.windows(2).all(|w| w[0] <= w[1]), "{}", series.label);
        assert_eq!(*series.trajectory.last().unwrap(), series.max_ratio);
    }
}
