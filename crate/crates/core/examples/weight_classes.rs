//! Muckenhoupt and reverse Holder membership of power and composite weights.

use invsq::spectrum::{
    ap_characteristic_estimate, duality_scan, power_weight_class, weight_admissible, window, BallFamily, Exponent,
    ModelParams, TheoremId, WeightSpec,
};

fn main() -> invsq::error::Result<()> {
    let d = 3;
    // |x|^alpha in A_2 iff -3 < alpha < 3, and in RH_inf iff alpha >= 0
    for alpha in [-2.5, -1.0, 0.0, 1.5, 3.0] {
        let (ap, rh) = power_weight_class(alpha, Exponent(2.0), Exponent(f64::INFINITY), d);
        println!("|x|^{alpha}: A_2 {ap}, RH_inf {rh}");
    }

    let params = ModelParams::new(d, 0.5)?;
    let win = window(&params, 1.0, TheoremId::Hardy)?;
    for w in [WeightSpec::constant(), WeightSpec::power(0.5), WeightSpec::composite(0.3)?] {
        let rep = weight_admissible(&w, Exponent(2.0), win.ap_index, win.rh_index, d);
        println!("{} at p = 2: admissible {} ({})", w.description, rep.admissible, rep.label);
    }

    let balls = BallFamily::dyadic(6, 6);
    let est = ap_characteristic_estimate(&WeightSpec::power(1.0), Exponent(2.0), d, &balls)?;
    println!("numerical A_2 characteristic of |x| over {} balls: {est:.4}", balls.balls.len());

    let scan = duality_scan(d);
    println!("duality scan: {} points, {} failures, {} in both classes", scan.points, scan.failures.len(), scan.both_true);
    Ok(())
}
