//! Zeros of the hopping kernel and the two low-energy flavors around them.
//!
//! cargo run --release --example doubling

use cpeps::spectrum::{dispersion_zeros, low_energy_dispersion};

fn main() -> cpeps::Result<()> {
    for eps in [0.1, 1.0, std::f64::consts::TAU] {
        let [q0, q1] = dispersion_zeros(eps);
        println!("eps = {eps:.4}: q0 = {q0:+.6}, q1 = {q1:+.6}");
    }
    let eps = 1.0;
    for m in [0.0, 0.2] {
        let r = low_energy_dispersion(m, eps, 1200, 0.1 / eps)?;
        println!(
            "m = {m}: raw slope {:.9} (√3 = {:.9}), fit E² = {:.4} k² + {:.4}, sector residual {:.2e}, pointwise {:.2e}",
            r.raw_slope,
            3f64.sqrt(),
            r.fit_slope,
            r.fit_intercept,
            r.sector_residual,
            r.pointwise_residual
        );
        for p in r.points.iter().filter(|p| p.k.abs() < 0.02) {
            println!("    sector {} k = {:+.5} E = {:.6}", p.sector, p.k, p.energy);
        }
    }
    Ok(())
}
