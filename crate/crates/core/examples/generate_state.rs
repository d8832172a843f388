//! Build the transfer operators of a small lattice model, generate the
//! physical state, and round-trip it through the binary state file.
//!
//! cargo run --example generate_state

use cpeps::fock::{generate_state, unitarity_scaling};
use cpeps::linalg::c;
use cpeps::model::{config, CouplingFields};
use cpeps::statefile::{self, StateFile};
use cpeps::Budget;

const CONFIG: &str = r#"{
  "schema_version": 1,
  "lattice": { "epsilon": 0.2, "epsilon_x": 1.0, "n_x": 3, "n_t": 2, "bc": "periodic" },
  "couplings": {
    "d": 1,
    "j": { "preset": "constant", "value": [1.0, 0.0] },
    "m0": { "preset": "constant", "value": [0.3, 0.0] },
    "r": { "preset": "constant", "value": [0.7, 0.0] }
  }
}"#;

fn main() -> cpeps::Result<()> {
    let model = config::parse(CONFIG.as_bytes())?;
    let g = generate_state(&model, &Budget::default())?;
    println!(
        "modes {}, dim {}, norm {:.6}, aux sector dim {}",
        g.state.modes(),
        g.state.amplitudes.len(),
        g.norm,
        g.aux_dim
    );

    let mut top: Vec<(usize, f64)> = g
        .normalized
        .amplitudes
        .iter()
        .map(|a| a.norm_sqr())
        .enumerate()
        .collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (i, p) in top.iter().take(5) {
        let occ: String = g.state.occupation(*i).iter().map(|n| n.to_string()).collect();
        println!("  |{occ}>  p = {p:.5}");
    }

    let bytes = statefile::encode(&StateFile {
        state: g.state.clone(),
        aux_dim: g.aux_dim,
    });
    let back = statefile::decode(&bytes)?;
    println!(
        "state file: {} bytes, max f32 error {:.1e}",
        bytes.len(),
        cpeps::cmps::max_deviation(&back.state, &g.state)
    );

    // with J and m0 imaginary and R = 0 the step is unitary up to O(ε²)
    let mut unitary = model.clone();
    unitary.couplings = CouplingFields::uniform(1, &model.lattice, c(0.0, 1.0), c(0.0, 0.3), c(0.0, 0.0));
    let sc = unitarity_scaling(&unitary, 0, &[1e-1, 1e-2, 1e-3])?;
    println!("‖M†M − 1‖ vs ε: {:?}, slope {:.3}", sc.rows, sc.slope);
    Ok(())
}
