//! Square-lattice PEPS: exact contraction over diagonal slices, the
//! structured local term, and the rotation witness of its continuum action
//! against the Euclidean one.
//!
//! cargo run --release --example square_lattice

use std::f64::consts::{FRAC_PI_2, TAU};

use cpeps::action::Grid2;
use cpeps::linalg::{c, CMat};
use cpeps::square::{
    contract_square, square_state, symmetry_contrast, DiagonalLattice, LocalTerm, QForm, SquareBoundary,
    SquarePepsTensor,
};
use cpeps::Budget;

fn main() -> cpeps::Result<()> {
    let budget = Budget::default();
    let lat = DiagonalLattice::new(3, 3, 0.5)?;
    let t = SquarePepsTensor::random(3, 2, 0.4, 5);
    let bnd = SquareBoundary::uniform_single(3);
    let vac = contract_square(&lat, &t, &vec![0; lat.sites()], &bnd, &budget)?;
    let state = square_state(&lat, &t, &bnd, &budget)?;
    let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    println!(
        "3x3 lattice: vacuum amplitude {vac:.6}, {} amplitudes, norm {norm:.6}",
        state.len()
    );

    let q = LocalTerm::Q {
        qa: CMat::from_element(1, 1, c(0.3, 0.0)),
        qb: CMat::from_element(1, 1, c(-0.2, 0.1)),
        epsilon: 0.5,
        form: QForm::SpeciesConsistent,
    };
    let tq = q.expand()?;
    println!(
        "Q term expands to bond dimension {} with {} physical levels",
        tq.d,
        tq.phys()
    );

    let rep = symmetry_contrast(Grid2::new(64, TAU)?, 8, 7, FRAC_PI_2)?;
    println!(
        "quarter turn over 8 fields: median square witness {:.3e}, median euclidean {:.3e}, contrast {:.2e}",
        rep.median_square, rep.median_euclidean, rep.contrast
    );
    Ok(())
}
