//! Gauss-Legendre nodes and composite panel rules.

use invsq::quad::{composite, gauss_legendre, geometric_panels, graded_panels, integrate};

fn main() -> invsq::error::Result<()> {
    let (x, w) = gauss_legendre(5);
    for (xi, wi) in x.iter().zip(&w) {
        println!("node {xi:+.16}  weight {wi:.16}");
    }

    // oscillatory integrand: int_0^40 cos(3r) dr
    let exact = (120f64).sin() / 3.0;
    let approx = integrate(|r| (3.0 * r).cos(), 0.0, 40.0, 40, 16);
    println!("uniform panels: error {:.1e}", approx - exact);

    // graded panels cover [0, 40], finer toward the origin
    let panels = graded_panels(1e-3, 40.0, 2.0, 3.0, 8)?;
    let (nodes, weights) = composite(&panels);
    let s: f64 = nodes.iter().zip(&weights).map(|(r, w)| w * (3.0 * r).cos()).sum();
    println!("graded: {} panels, {} nodes, error {:.1e}", panels.len(), nodes.len(), s - exact);

    // geometric panels for an integrable endpoint singularity, int_0^1 r^-1/2 = 2
    let (nodes, weights) = composite(&geometric_panels(1e-12, 1.0, 2.0, 12));
    let s: f64 = nodes.iter().zip(&weights).map(|(r, w)| w / r.sqrt()).sum();
    println!("geometric: int r^-1/2 = {:.12} (missing [0, 1e-12] contributes 2e-6)", s);
    Ok(())
}
