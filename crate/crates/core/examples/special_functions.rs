//! Gamma, Bessel, Gegenbauer and hypergeometric values.

use invsq::specfun::{bessel_i_scaled, bessel_j, bessel_j_prime, gamma, gamma_pq, gegenbauer, hyp2f1, ln_gamma, sici};

fn main() -> invsq::error::Result<()> {
    println!("Gamma(1/2)^2 = {:.15} (pi = {:.15})", gamma(0.5)?.powi(2), std::f64::consts::PI);
    println!("ln Gamma(100) = {:.12}", ln_gamma(100.0)?);

    for nu in [0.0, 0.5, 1.5, 7.25] {
        let x = 3.7;
        println!("J_{nu}({x}) = {:+.15e}   J' = {:+.15e}", bessel_j(nu, x)?, bessel_j_prime(nu, x)?);
    }
    // J_{1/2}(x) = sqrt(2 / (pi x)) sin x
    let x: f64 = 2.0;
    let closed = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
    println!("J_1/2(2) - closed form = {:.1e}", bessel_j(0.5, x)? - closed);

    println!("e^-z I_1(z) at z = 50: {:.15e}", bessel_i_scaled(1.0, 50.0)?);
    println!("C_4^(1.5)(0.3) = {:.15}", gegenbauer(4, 1.5, 0.3)?);
    println!("2F1(1, 1; 2; 1/2) = {:.15} (2 ln 2 = {:.15})", hyp2f1(1.0, 1.0, 2.0, 0.5)?, 2.0 * 2f64.ln());
    let (p, q) = gamma_pq(2.5, 1.0)?;
    println!("P(2.5, 1) = {p:.15}, Q = {q:.15}");
    let (si, ci) = sici(10.0)?;
    println!("Si(10) = {si:.15}, Ci(10) = {ci:.15}");
    Ok(())
}
