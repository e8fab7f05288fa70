//! Exponent windows of every theorem for a few couplings.

use invsq::spectrum::{window, ModelParams, TheoremId};

fn main() -> invsq::error::Result<()> {
    let d = 3;
    let s = 1.0;
    for a in [-0.2, 0.0, 0.75, 2.0, 8.0] {
        let p = ModelParams::new(d, a)?;
        println!("d = {d}, a = {a}: sigma = {:.4}, nu0 = {:.4}", p.sigma, p.nu0);
        for th in TheoremId::ALL {
            let w = window(&p, s, th)?;
            println!("  {:<14} ({}, {})  valid={} {}", th, w.p_lower.0, w.p_upper.0, w.valid, if w.valid { "" } else { &w.reason });
        }
    }

    // the Hardy window shrinks as s grows
    let p = ModelParams::new(4, -0.5)?;
    for s in [0.5, 1.0, 2.0, 3.0] {
        let w = window(&p, s, TheoremId::Hardy)?;
        println!("d = 4, a = -0.5, s = {s}: hardy p in ({}, {})  contains 2: {}", w.p_lower.0, w.p_upper.0, w.contains(2.0));
    }
    Ok(())
}
