//! The virial identity along the Schrodinger flow.

use invsq::hankel::{build_plan, BesselOrder, PlanConfig, RadialFunction};
use invsq::morawetz::verify_virial;
use invsq::spectrum::ModelParams;

fn main() -> invsq::error::Result<()> {
    let cfg = PlanConfig { r_max: 80.0, lambda_max: 16.0, flow_horizon: 1.0, ..PlanConfig::default() };
    for (d, a) in [(3, 1.0), (4, 0.0), (5, -0.5)] {
        let p = ModelParams::new(d, a)?;
        let plan = build_plan(&p, BesselOrder::Radial, &cfg)?;
        let f = RadialFunction::from_real(&plan.radial, |r| (-(r - 3.0).powi(2)).exp());
        for eps in [0.1, 0.5] {
            let rep = verify_virial(&plan, eps, &f, 0.5, 1e-3)?;
            println!(
                "d = {d}, a = {a}, eps = {eps}: d/dt Theta = {:+.8e}, rhs = {:+.8e}, residual {:.1e}",
                rep.dtheta, rep.rhs, rep.residual
            );
        }
    }
    Ok(())
}
