//! Conserved operator norms and the fluctuating free norms.

use invsq::hankel::{build_plan, BesselOrder, PlanConfig, RadialFunction};
use invsq::morawetz::conservation_check;
use invsq::spectrum::ModelParams;

fn main() -> invsq::error::Result<()> {
    let p = ModelParams::new(3, 2.0)?;
    let plan = build_plan(&p, BesselOrder::Radial, &PlanConfig::default())?;
    let f = RadialFunction::from_real(&plan.radial, |r| r * (-(r - 2.0).powi(2)).exp());
    let times = [0.0, 0.5, 2.0, 10.0];
    for s in [0.5, 1.0, 1.5] {
        let rep = conservation_check(&plan, s, &f, &times, true, None)?;
        println!("s = {s}: spread of ||L^(s/2) u(t)|| {:.1e}", rep.operator_spread);
        for (t, (op, free)) in times.iter().zip(rep.operator_norms.iter().zip(&rep.free_norms)) {
            let free = free.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "over budget".into());
            println!("    t = {t:>4}: operator {op:.6e}, free {free}");
        }
    }
    Ok(())
}
