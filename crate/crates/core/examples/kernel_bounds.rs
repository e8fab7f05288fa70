//! Gaussian upper bounds of the heat kernels, scanned on scale-free grids.

use invsq::kernels::{
    bound_ratio_scan, default_c, offdiagonal_check, potential_convolution_check, Annulus, BoundKind, ScanGrid, ZonalConfig,
};
use invsq::spectrum::ModelParams;
use num_complex::Complex64;

fn main() -> invsq::error::Result<()> {
    // the a < 0 difference bound peaks near sqrt t / 2 and needs a denser grid
    let grid = ScanGrid { nx: 25, ..ScanGrid::default() };
    let zc = ZonalConfig::default();
    for a in [-0.2, 0.0, 1.0] {
        let p = ModelParams::new(3, a)?;
        for kind in [BoundKind::MszzHeat, BoundKind::Ptk, BoundKind::Complex, BoundKind::difference_for(a)] {
            let rep = bound_ratio_scan(kind, &p, default_c(kind), &grid, &zc)?;
            println!(
                "a = {a:>4} {:<18} sup ratio {:.4} (c = {}, drift {:.1e}, {} points)",
                kind.name(),
                rep.sup_ratio,
                rep.c_used,
                rep.refinement_drift,
                rep.points
            );
        }
    }

    // off-diagonal L^p -> L^q decay between separated annuli
    let p = ModelParams::new(3, 0.5)?;
    let e = Annulus::new(0.5, 1.0)?;
    let f = Annulus::new(3.0, 4.0)?;
    for t in [0.1, 1.0, 10.0] {
        let r = offdiagonal_check(&p, t, e, f, 1.5, 2.0, 8.0, |_| Complex64::new(1.0, 0.0))?;
        println!("off-diagonal ratio at t = {t}: {r:.4}");
    }

    let xs: Vec<f64> = (0..12).map(|i| 0.05 * 2f64.powi(i)).collect();
    let scan = potential_convolution_check(3, 4.0, &xs, &[0.5, 2.0])?;
    println!("|x|^2 (gaussian * |z|^-2): sup {:.4}, plateau {:.4}", scan.sup, scan.plateau);
    Ok(())
}
