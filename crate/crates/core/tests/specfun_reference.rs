//! Special functions against mpmath reference values (tests/data).

use invsq::specfun::{bessel_i_scaled, bessel_j, bessel_j_prime, gamma};
use std::f64::consts::PI;

struct Row {
    function: String,
    nu: f64,
    z: f64,
    value: f64,
}

fn rows() -> Vec<Row> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/reference_values.csv");
    let mut rdr = csv::Reader::from_path(path).expect("reference csv");
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            Row {
                function: r[0].to_string(),
                nu: r[1].parse().unwrap(),
                z: r[2].parse().unwrap(),
                value: r[3].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn gamma_matches_reference() {
    for r in rows().iter().filter(|r| r.function == "gamma") {
        let v = gamma(r.z).unwrap();
        let rel = (v - r.value).abs() / r.value.abs();
        assert!(rel < 1e-13, "gamma({}) = {v}, want {} (rel {rel:.2e})", r.z, r.value);
    }
}

#[test]
fn scaled_i_matches_reference() {
    for r in rows().iter().filter(|r| r.function == "bessel_i_scaled") {
        let v = bessel_i_scaled(r.nu, r.z).unwrap();
        if r.value < 1e-290 {
            assert!(v.abs() < 1e-280);
            continue;
        }
        let rel = (v - r.value).abs() / r.value;
        assert!(rel < 1e-12, "I~_{}({}) = {v:e}, want {:e} (rel {rel:.2e})", r.nu, r.z, r.value);
    }
}

// Relative to the local envelope, so isolated zeros do not dominate.
fn envelope(nu: f64, z: f64, v: f64) -> f64 {
    let osc = if z > nu { (2.0 / (PI * z)).sqrt() * 1e-2 } else { 0.0 };
    v.abs().max(osc).max(1e-300)
}

#[test]
fn bessel_j_matches_reference() {
    for r in rows().iter().filter(|r| r.function == "bessel_j") {
        let v = bessel_j(r.nu, r.z).unwrap();
        let rel = (v - r.value).abs() / envelope(r.nu, r.z, r.value);
        assert!(rel < 1e-10, "J_{}({}) = {v:e}, want {:e} (rel {rel:.2e})", r.nu, r.z, r.value);
    }
}

#[test]
fn bessel_j_prime_matches_reference() {
    for r in rows().iter().filter(|r| r.function == "bessel_j_prime") {
        let v = bessel_j_prime(r.nu, r.z).unwrap();
        let rel = (v - r.value).abs() / envelope(r.nu, r.z, r.value);
        assert!(rel < 1e-10, "J'_{}({}) = {v:e}, want {:e} (rel {rel:.2e})", r.nu, r.z, r.value);
    }
}
