//! A slowly varying on-site potential stops mixing the two flavors as the
//! lattice is refined at fixed box length.
//!
//! cargo run --example flavor_decoupling

use std::f64::consts::TAU;

use cpeps::linalg::c;
use cpeps::spectrum::{flavor_coupling_norm, gaussian_decoupling_scan, is_slowly_varying};

fn main() {
    println!("{:>6} {:>12} {:>12} {:>12}", "N_x", "inter", "intra", "ratio");
    for fc in gaussian_decoupling_scan(TAU, 0.035, &[24, 48, 96, 192]) {
        println!(
            "{:>6} {:>12.3e} {:>12.3e} {:>12.3e} {}",
            fc.n_x,
            fc.inter,
            fc.intra,
            fc.inter / fc.intra,
            if is_slowly_varying(&fc) { "decoupled" } else { "" }
        );
    }
    let n = 96;
    let eps = TAU / n as f64;
    let fc = flavor_coupling_norm(&vec![c(1.0, 0.0); n], eps, 0.1 / eps);
    println!("constant potential: inter = {:.1e}", fc.inter);
}
