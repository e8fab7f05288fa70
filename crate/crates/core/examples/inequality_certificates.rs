//! Hardy, equivalence, square and difference certificates on a test family.

use invsq::harness::{HarnessConfig, SquareKind, Workbench};
use invsq::spectrum::{ModelParams, WeightSpec};

fn main() -> invsq::error::Result<()> {
    let params = ModelParams::new(3, 0.5)?;
    let cfg = HarnessConfig { family_size: 12, ..HarnessConfig::quick() };
    let wb = Workbench::new(&params, &cfg)?;
    let w = WeightSpec::constant();

    let certs = [
        wb.hardy(1.0, 2.0, &w)?,
        wb.equivalence(1.0, 2.0, &w)?,
        wb.square(SquareKind::Alpha { alpha: 0.5 }, 2.0, &w)?,
        wb.square(SquareKind::Weighted { s: 1.0 }, 2.0, &WeightSpec::power(0.5))?,
        wb.difference(1.0, 2.0, &w)?,
    ];
    for c in &certs {
        println!("{:<28} max ratio {:.4e}  pass {}", c.inequality_id, c.max_ratio, c.pass);
        for s in &c.series {
            println!("    {:<40} [{:.4e}, {:.4e}] saturated {}", s.label, s.min_ratio, s.max_ratio, s.saturated);
        }
    }

    // out-of-window requests are refused
    match wb.hardy(1.0, 5.0, &w) {
        Ok(_) => println!("p = 5 unexpectedly accepted"),
        Err(e) => println!("p = 5: {e}"),
    }
    Ok(())
}
