//! Entanglement of a generated lattice state: temporal cuts, blocks, and the
//! entropy-per-boundary candidate.
//!
//! cargo run --release --example area_law

use cpeps::entanglement::{area_law_scan, temporal_cut_rank, Region};
use cpeps::fock::generate_state;
use cpeps::model::config;
use cpeps::Budget;

const CONFIG: &str = r#"{
  "schema_version": 1,
  "lattice": { "epsilon": 0.4, "epsilon_x": 1.0, "n_x": 3, "n_t": 3, "bc": "periodic" },
  "couplings": {
    "d": 1,
    "j": { "preset": "constant", "value": [1.0, 0.0] },
    "m0": { "preset": "constant", "value": [0.2, 0.0] },
    "r": { "preset": "constant", "value": [1.0, 0.3] }
  }
}"#;

fn main() -> cpeps::Result<()> {
    let model = config::parse(CONFIG.as_bytes())?;
    let budget = Budget::default();
    let g = generate_state(&model, &budget)?;
    let lat = model.lattice;
    for t0 in 1..lat.n_t {
        let cut = temporal_cut_rank(&g.normalized, t0, g.aux_dim);
        println!(
            "temporal cut t0 = {t0}: Schmidt rank {} (bound {})",
            cut.rank, cut.bound
        );
    }
    let regions = vec![
        Region::temporal(lat, 1)?,
        Region::block(lat, 0, 0, 1, 1)?,
        Region::block(lat, 0, 0, 2, 1)?,
        Region::block(lat, 0, 0, 2, 2)?,
        Region::block(lat, 0, 1, 3, 1)?,
    ];
    let scan = area_law_scan(&g.normalized, &regions, &budget)?;
    println!("{:>5} {:>9} {:>10} {:>6} {:>8}", "|A|", "|∂A|", "S_A", "rank", "S/|∂A|");
    for r in &scan.rows {
        println!(
            "{:>5} {:>9} {:>10.6} {:>6} {:>8.5}",
            r.region_size, r.boundary_size, r.entropy, r.schmidt_rank, r.c_candidate
        );
    }
    println!("fitted c = {:.5}", scan.fitted_c);
    Ok(())
}
