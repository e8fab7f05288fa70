//! Cross-module invariants as property tests.

use invsq::hankel::{build_plan, heat, schrodinger, BesselOrder, HankelPlan, PlanConfig, RadialFunction};
use invsq::kernels::radial_heat_kernel;
use invsq::morawetz::{evolve, Flow, PsiCalculus};
use invsq::cli::Record;
use invsq::spectrum::{window, Exponent, ModelParams, TheoremId};
use proptest::prelude::*;
use std::sync::OnceLock;

fn coupling(d: u32, u: f64) -> f64 {
    // u in [0, 1) spread over (critical, 10]
    let crit = -0.25 * ((d - 2) * (d - 2)) as f64;
    crit + (10.0 - crit) * u
}

fn rel(a: &RadialFunction, b: &RadialFunction) -> f64 {
    a.sub(b).unwrap().l2_norm() / b.l2_norm()
}

// wide enough that a width-2 bump stays on the grid up to t = 10
fn flow_plan() -> &'static HankelPlan {
    static PLAN: OnceLock<HankelPlan> = OnceLock::new();
    PLAN.get_or_init(|| {
        let mut cfg = PlanConfig::with_ranges(80.0, 5.0);
        cfg.flow_horizon = 10.0;
        build_plan(&ModelParams::new(3, 0.7).unwrap(), BesselOrder::Radial, &cfg).unwrap()
    })
}

fn bump(plan: &HankelPlan, c: f64, w: f64) -> RadialFunction {
    RadialFunction::from_real(&plan.radial, |r| (-((r - c) / w).powi(2)).exp())
}

proptest! {
    #[test]
    fn sigma_plus_nu0_is_half_dimension(d in 3u32..12, u in 0.0f64..1.0) {
        let p = ModelParams::new(d, coupling(d, u)).unwrap();
        prop_assert_eq!(p.sigma + p.nu0, 0.5 * (d as f64 - 2.0));
    }

    #[test]
    fn hardy_upper_endpoint_nonincreasing(d in 3u32..8, u in 0.0f64..1.0, s1 in 0.05f64..2.9, ds in 0.0f64..2.0) {
        let p = ModelParams::new(d, coupling(d, u)).unwrap();
        let s2 = (s1 + ds).min(d as f64 - 0.05);
        let w1 = window(&p, s1, TheoremId::Hardy).unwrap();
        let w2 = window(&p, s2, TheoremId::Hardy).unwrap();
        prop_assert!(w2.p_upper.0 <= w1.p_upper.0, "{:?} {:?}", w1.p_upper, w2.p_upper);
    }

    #[test]
    fn beta_and_laplacian_bounds(d in 3u32..11, eps in 0.01f64..1.0, lr in -6.0f64..6.0) {
        let c = PsiCalculus::new(d, eps).unwrap();
        let r = 10f64.powf(lr);
        prop_assert!(c.beta(r).abs() <= 3.0 * (d * d) as f64);
        prop_assert!(r * c.lap(r).abs() <= d as f64);
    }

    #[test]
    fn bilaplacian_closed_form_matches_differences(d in 3u32..8, eps in 0.05f64..1.0, lr in -4.0f64..4.0) {
        let c = PsiCalculus::new(d, eps).unwrap();
        let r = 10f64.powf(lr);
        let (exact, numeric) = (c.bilap(r), c.bilap_numeric(r));
        prop_assert!((exact - numeric).abs() <= 1e-9 * c.bilap_scale(r), "{} {}", exact, numeric);
    }

    #[test]
    fn heat_kernel_is_positive_and_symmetric(d in 3u32..7, u in 0.0f64..1.0, lt in -2.0f64..1.0, r in 0.01f64..6.0, rho in 0.01f64..6.0) {
        let p = ModelParams::new(d, coupling(d, u)).unwrap();
        let t = 10f64.powf(lt);
        let k = radial_heat_kernel(&p, t, r, rho).unwrap();
        prop_assert!(k > 0.0 || (r - rho).powi(2) / (4.0 * t) > 600.0);
        prop_assert_eq!(k, radial_heat_kernel(&p, t, rho, r).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schrodinger_flow_is_unitary(t in 0.1f64..10.0, c in 4.0f64..8.0) {
        let plan = flow_plan();
        let f = bump(plan, c, 2.0);
        let u = plan.apply_multiplier(&f, schrodinger(t)).unwrap();
        prop_assert!((u.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-8, "{}", u.l2_norm() / f.l2_norm());
        let v = evolve(plan, &f, t, Flow::Schrodinger).unwrap();
        prop_assert!((v.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn heat_semigroup_composes(t1 in 0.01f64..2.0, t2 in 0.01f64..2.0, c in 4.0f64..8.0) {
        let plan = flow_plan();
        let f = bump(plan, c, 2.0);
        let two = plan.apply_multiplier(&plan.apply_multiplier(&f, heat(t1)).unwrap(), heat(t2)).unwrap();
        let one = plan.apply_multiplier(&f, heat(t1 + t2)).unwrap();
        prop_assert!(rel(&two, &one) < 1e-8);
    }
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(f64::INFINITY), 1.0f64..1e6]
}

proptest! {
    #[test]
    fn exponent_json_round_trip(x in exponent()) {
        let text = serde_json::to_string(&Exponent(x)).unwrap();
        let back: Exponent = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.0, x);
    }

    #[test]
    fn record_json_round_trip(d in 3u32..10, a in -1.0f64..10.0, v in proptest::option::of(-1e9f64..1e9), pass in any::<bool>(), up in exponent()) {
        let r = Record {
            schema: "certificate_v1".into(),
            suite: "hardy".into(),
            id: format!("hardy_d{d}"),
            theorem: "hardy".into(),
            d,
            a,
            s: Some(1.0),
            p: None,
            alpha: None,
            eps: Some(0.25),
            weight: Some("1".into()),
            metric: "ratio".into(),
            value: v,
            bound: None,
            pass,
            scope: "radial".into(),
            payload: serde_json::json!({ "p_upper": Exponent(up) }),
        };
        let back = Record::from_json(&serde_json::to_string_pretty(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}
