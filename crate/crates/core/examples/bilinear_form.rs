//! |B(v, w)| against the H^{1/2} norms.

use invsq::hankel::{build_plan, BesselOrder, PlanConfig, RadialFunction};
use invsq::morawetz::{bform, bform_check, half_norm};
use invsq::spectrum::ModelParams;

fn main() -> invsq::error::Result<()> {
    let p = ModelParams::new(3, 0.0)?;
    let plan = build_plan(&p, BesselOrder::Free, &PlanConfig::default())?;
    let bump = |c: f64, w: f64| RadialFunction::from_real(&plan.radial, move |r| (-((r - c) / w).powi(2)).exp());
    let fs = [bump(0.0, 1.0), bump(2.0, 0.5), bump(5.0, 2.0), bump(1.0, 0.2)];
    let v = &fs[1];
    println!("B(v, v) = {:.6e}, ||v||_1/2 = {:.6e}", bform(&plan, 0.5, v, v)?, half_norm(&plan, v)?);

    let mut pairs = Vec::new();
    for i in 0..fs.len() {
        pairs.push((fs[i].clone(), fs[(i + 1) % fs.len()].clone()));
        pairs.push((fs[i].clone(), fs[i].clone()));
    }
    for eps in [0.1, 0.5, 1.0] {
        let rep = bform_check(&plan, eps, &pairs)?;
        println!("eps = {eps}: max ratio {:.4} over {} pairs (bound {}) pass {}", rep.max_ratio, rep.pairs, rep.bound, rep.pass);
    }
    Ok(())
}
