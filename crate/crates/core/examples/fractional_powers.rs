//! L^{s/2} by the spectral multiplier and by subordination.

use invsq::hankel::{build_plan, BesselOrder, Direction, PlanConfig, RadialFunction, SubordinationConfig};
use invsq::harness::power_routes;
use invsq::spectrum::ModelParams;

fn main() -> invsq::error::Result<()> {
    let p = ModelParams::new(4, 1.0)?;
    let plan = build_plan(&p, BesselOrder::Radial, &PlanConfig::default())?;
    let f = RadialFunction::from_real(&plan.radial, |r| (1.0 + r * r) * (-0.5 * (r - 2.0).powi(2)).exp());
    let cfg = SubordinationConfig::default();
    for s in [0.3, 1.0, 1.7, 2.5] {
        let (mult, _, rel) = power_routes(&plan, &f, s, &cfg)?;
        println!("s = {s}: ||L^(s/2) f|| = {:.6e}, routes differ by {rel:.1e}", mult.l2_norm());
    }

    // negative powers by subordination undo positive ones on band-limited data
    let up = plan.fractional_power_subordination(&f, 0.8, Direction::Positive)?;
    let back = plan.fractional_power_subordination(&up, 0.8, Direction::Negative)?;
    println!("L^(-0.4) L^(0.4) f - f: {:.1e}", back.sub(&f)?.l2_norm() / f.l2_norm());
    Ok(())
}
