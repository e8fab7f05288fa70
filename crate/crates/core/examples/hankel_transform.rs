//! Hankel plan: round trip, heat flow and a closed-form check.

use invsq::hankel::{build_plan, heat, BesselOrder, PlanConfig, RadialFunction};
use invsq::spectrum::ModelParams;

fn main() -> invsq::error::Result<()> {
    let p = ModelParams::new(3, 0.0)?;
    let plan = build_plan(&p, BesselOrder::Radial, &PlanConfig::default())?;
    println!("{} radial nodes, {} frequencies", plan.nodes().len(), plan.lambdas().len());

    let f = RadialFunction::from_real(&plan.radial, |r| (-r * r).exp());
    let back = plan.inverse(&plan.forward(&f)?)?;
    println!("round trip: {:.1e}", back.sub(&f)?.l2_norm() / f.l2_norm());

    // with a = 0 the heat flow of e^{-r^2} is (1 + 4t)^{-3/2} e^{-r^2 / (1 + 4t)}
    for t in [0.1, 1.0, 5.0] {
        let u = plan.apply_multiplier(&f, heat(t))?;
        let exact = RadialFunction::from_real(&plan.radial, |r| (1.0 + 4.0 * t).powf(-1.5) * (-r * r / (1.0 + 4.0 * t)).exp());
        println!("t = {t}: heat error {:.1e}", u.sub(&exact)?.l2_norm() / exact.l2_norm());
    }

    // a repulsive potential: the heat flow decays faster near the origin
    let q = ModelParams::new(3, 2.0)?;
    let plan_q = build_plan(&q, BesselOrder::Radial, &PlanConfig::default())?;
    let g = RadialFunction::from_real(&plan_q.radial, |r| r * r * (-r * r).exp());
    let u = plan_q.apply_multiplier(&g, heat(1.0))?;
    let near = u.nodes().iter().position(|r| *r > 0.1).unwrap();
    println!("a = 2, t = 1: u({:.3}) = {:.4e}, ||u|| / ||f|| = {:.4}", u.nodes()[near], u.values[near].re, u.l2_norm() / g.l2_norm());
    Ok(())
}
