//! Continuum action functionals on a periodic grid: the Minkowski-to-Euclidean
//! family, and which of them survive a rotation of the field.
//!
//! cargo run --release --example actions

use std::f64::consts::{FRAC_PI_2, TAU};

use cpeps::action::{
    conserved_current, dirac_action, euclidean_action, family_action, gaussian_packet, plane_wave, random_smooth_field,
    rotation_witness, unit_spinor, DerivMode, FieldConfiguration, Grid2, ScalarField,
};
use cpeps::linalg::c;

fn main() -> cpeps::Result<()> {
    let grid = Grid2::new(64, TAU)?;
    let cfg = random_smooth_field(grid, 3, 1);
    let m = ScalarField::constant(grid, c(1.0, 0.0));
    let mode = DerivMode::Spectral;

    for theta in [0.0, 0.3, 0.6, 1.0, 1.3, FRAC_PI_2] {
        println!("S(θ = {theta:.3}) = {:.6}", family_action(&cfg, &m, theta, mode)?);
    }
    let eucl = |c: &_| euclidean_action(c, &m, mode);
    let mink = |c: &_| dirac_action(c, &m, mode);
    println!(
        "quarter turn: euclidean witness {:.2e}, minkowski witness {:.2e}",
        rotation_witness(&cfg, FRAC_PI_2, eucl)?,
        rotation_witness(&cfg, FRAC_PI_2, mink)?
    );
    // a generic angle needs a field that stays inside the box
    let packet = gaussian_packet(grid, 0.5, [1.0, 0.5], unit_spinor());
    for alpha in [0.2, 0.4] {
        println!(
            "packet, α = {alpha}: euclidean witness {:.2e}, minkowski witness {:.2e}",
            rotation_witness(&packet, alpha, eucl)?,
            rotation_witness(&packet, alpha, mink)?
        );
    }

    // p = 3, m = 4 gives E = 5, periodic on the grid
    let wave = FieldConfiguration::from_fn(grid, plane_wave(3.0, 4.0, c(1.0, 0.0)));
    let j = conserved_current(&wave, mode);
    println!("on-shell plane wave: max |∂·j| = {:.2e}", j.divergence);
    Ok(())
}
