//! The three smoothing estimates, with the time slices written to CSV.

use invsq::hankel::{build_plan, BesselOrder, PlanConfig, RadialFunction};
use invsq::morawetz::{Estimate, SmoothingConfig, SmoothingProfiles};
use invsq::spectrum::ModelParams;

fn main() -> invsq::error::Result<()> {
    let p = ModelParams::new(3, 1.0)?;
    let plan = build_plan(&p, BesselOrder::Radial, &PlanConfig::default())?;
    let free = build_plan(&p, BesselOrder::Free, &PlanConfig::default())?;
    let f = RadialFunction::from_real(&plan.radial, |r| (-(r - 2.0).powi(2)).exp());
    let cfg = SmoothingConfig { t: 20.0, ..SmoothingConfig::quick() };
    let out = std::env::temp_dir().join("invsq_slices");
    std::fs::create_dir_all(&out)?;
    for est in Estimate::ALL {
        // the profiles do not depend on eps, so one computation serves the scan
        let prof = SmoothingProfiles::compute(est, &plan, Some(&free), None, &f, &cfg)?;
        for eps in [0.1, 0.5, 0.9] {
            let rep = prof.report(eps, None)?;
            println!(
                "{:<9} eps = {eps}: lhs {:.6e}, rhs {:.6e}, ratio {:.4}, drift {:.1e}, admissible {}",
                est.id(),
                rep.lhs,
                rep.rhs,
                rep.ratio,
                rep.drift,
                rep.admissible
            );
        }
        let path = out.join(format!("{}.csv", est.id()));
        prof.write_slices_csv(0.5, &path)?;
        println!("    slices at eps = 0.5 in {}", path.display());
    }
    Ok(())
}
