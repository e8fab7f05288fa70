//! Radial and zonal heat kernels, their derivatives and complex times.

use invsq::kernels::{
    complex_time_kernel, derivative_kernel, derivative_kernel_fd, free_heat_kernel, radial_heat_kernel, radial_mass,
    zonal_heat_kernel, KernelPoint, ZonalConfig,
};
use invsq::spectrum::{sphere_area, ModelParams};
use num_complex::Complex64;

fn main() -> invsq::error::Result<()> {
    let free = ModelParams::new(3, 0.0)?;
    let pt = KernelPoint::real(0.5, 1.0, 1.5, 0.3);
    let z = zonal_heat_kernel(&free, &pt, &ZonalConfig::default())?;
    println!("a = 0 zonal sum {:.15e} vs Gaussian {:.15e} ({} terms)", z.value, free_heat_kernel(0.5, 1.0, 1.5, 0.3, 3), z.terms);

    for a in [-0.2, 0.0, 1.0, 4.0] {
        let p = ModelParams::new(3, a)?;
        // e^{-tL} 1 = 1 only when a = 0; attractive potentials add mass
        let mass = radial_mass(3, 40.0, |rho| radial_heat_kernel(&p, 1.0, 0.5, rho).unwrap()) / sphere_area(3);
        let k1 = derivative_kernel(&p, 1, 1.0, 0.5, 0.9)?;
        let fd = derivative_kernel_fd(&p, 1, 1.0, 0.5, 0.9)?;
        println!("a = {a:>4}: mass from r = 0.5 at t = 1: {mass:.6}; L k = {k1:+.6e} (finite difference {fd:+.6e})");
    }

    let p = ModelParams::new(5, 2.0)?;
    for phi in [0.0, 0.3, 0.7] {
        let z = Complex64::from_polar(1.0, phi);
        println!("d = 5, a = 2, z = e^(i {phi}): k_z(1, 2) = {:.6e}", complex_time_kernel(&p, z, 1.0, 2.0)?);
    }
    Ok(())
}
