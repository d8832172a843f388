//! The one-parameter metric family: Clifford residuals over θ, and the
//! vector representation of the group element at both endpoints.
//!
//! cargo run --example clifford_flow

use std::f64::consts::FRAC_PI_2;

use cpeps::clifford::{gamma_family, group_element, interpolated_transfer_coeffs, theta_grid, TransferBranch};

fn main() -> cpeps::Result<()> {
    println!(
        "{:>8} {:>6} {:>6} {:>10} {:>10}",
        "theta", "eta00", "eta11", "clifford", "γ5 herm"
    );
    for theta in theta_grid(12, 0.05) {
        let g = gamma_family(theta)?;
        println!(
            "{theta:>8.4} {:>6.2} {:>6.2} {:>10.1e} {:>10.1e}",
            g.eta[0],
            g.eta[1],
            g.clifford_residual(),
            g.gamma5_hermiticity_residual()
        );
    }
    for theta in [0.0, FRAC_PI_2] {
        let g = group_element(0.7, theta)?;
        let v = g.real_v(1e-10)?;
        println!(
            "θ = {theta:.4}: V = {v:.4?}, metric residual {:.1e}, orthogonality residual {:.1e}",
            g.metric_residual(),
            g.orthogonality_residual()
        );
    }
    for branch in [TransferBranch::Literal, TransferBranch::Rephased] {
        let k = interpolated_transfer_coeffs(1.2, 0.1, branch)?;
        println!(
            "{branch:?} at θ = 1.2: c1 = {:.4}, cσy = {:.4}, cH = {:.4}",
            k.c1, k.c_sigma_y, k.c_h
        );
    }
    Ok(())
}
