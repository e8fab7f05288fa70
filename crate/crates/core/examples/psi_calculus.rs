//! The multiplier psi and the bounds on beta and Delta psi.

use invsq::morawetz::{check_beta_bound, check_lap_psi_bound, log_grid, PsiCalculus};

fn main() -> invsq::error::Result<()> {
    let c = PsiCalculus::new(3, 0.25)?;
    println!("{:>10} {:>14} {:>14} {:>14} {:>14}", "r", "psi'", "Lap psi", "Bilap psi", "beta");
    for r in [1e-3, 0.1, 1.0, 10.0, 1e3] {
        println!("{r:>10.0e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}", c.dpsi(r), c.lap(r), c.bilap(r), c.beta(r));
    }
    let grid = log_grid(1e-6, 1e6, 2001);
    for d in [3, 5, 10] {
        for eps in [0.05, 0.5, 1.0] {
            let b = check_beta_bound(d, eps, &grid)?;
            let l = check_lap_psi_bound(d, eps, &grid)?;
            println!(
                "d = {d:>2}, eps = {eps}: max|beta| {:.3} <= {}, max r|Lap psi| {:.3} <= {}",
                b.max_value, b.bound, l.max_value, l.bound
            );
        }
    }
    Ok(())
}
