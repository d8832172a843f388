//! 1D continuous MPS: density under refinement, Richardson limit, and the
//! path-integral construction checked against the path-ordered one.
//!
//! cargo run --example cmps_density

use cpeps::cmps::{self, AuxKind, CmpsData, Observable, SignMode};
use cpeps::linalg::c;
use cpeps::Budget;

fn main() -> cpeps::Result<()> {
    let r = c(0.6, 0.3);
    let data = CmpsData::scalar(0.4, r, 1.0, 8);

    let (rows, limit) = cmps::observable_series(&data, Observable::Density, &[8, 16, 32, 64], 2);
    println!("{:>8} {:>10} {:>14}", "n_steps", "delta", "density");
    for row in &rows {
        println!("{:>8} {:>10.5} {:>14.10}", row.n_steps, row.delta, row.value.re);
    }
    println!("extrapolated {:.10}, |r|^2 = {:.10}", limit.re, r.norm_sqr());

    let small = data.with_steps(4);
    let po = cmps::path_ordered_state(&small, 2, &Budget::default())?.state;
    let pi = cmps::path_integral_state_1d(&small, 2, AuxKind::Fermionic, SignMode::Oscillatory)?.state;
    println!("path-ordered vs path-integral: {:.2e}", cmps::max_deviation(&po, &pi));
    Ok(())
}
