//! Contract the fermionic coherent-state path integral with Berezin
//! integration and compare with Fock-space state generation.
//!
//! cargo run --release --example oracle_equivalence

use cpeps::fock::generate_state;
use cpeps::grassmann::Grassmann;
use cpeps::linalg::c;
use cpeps::model::config;
use cpeps::oracle::{contract_path_integral, ContractOptions};
use cpeps::Budget;

const CONFIG: &str = r#"{
  "schema_version": 1,
  "lattice": { "epsilon": 0.3, "epsilon_x": 1.0, "n_x": 2, "n_t": 2, "bc": "open" },
  "couplings": {
    "d": 1,
    "j": { "preset": "constant", "value": [0.8, 0.4] },
    "m0": { "preset": "constant", "value": [0.1, -0.5] },
    "r": { "preset": "constant", "value": [0.9, 0.2] }
  }
}"#;

fn main() -> cpeps::Result<()> {
    // ∫dθ θ = 1 and θ² = 0
    let t = Grassmann::generator(0);
    println!(
        "∫dθ θ = {}, θθ is zero: {}",
        t.integrate_one(0).body(),
        (&t * &t).is_empty()
    );
    let e = Grassmann::product_of(&[0, 1]).scale(c(2.0, 0.0)).exp()?;
    println!("exp(2 θ0θ1) has {} terms", e.len());

    let model = config::parse(CONFIG.as_bytes())?;
    let fock = generate_state(&model, &Budget::default())?.state;
    let oracle = contract_path_integral(&model, ContractOptions::default())?;
    let mut worst: f64 = 0.0;
    for (i, (a, b)) in fock.amplitudes.iter().zip(&oracle.amplitudes).enumerate() {
        worst = worst.max((a - b).norm());
        if a.norm() > 1e-3 {
            let occ: String = fock.occupation(i).iter().map(|n| n.to_string()).collect();
            println!("  |{occ}>  fock {a:.6}  grassmann {b:.6}");
        }
    }
    println!("max amplitude difference {worst:.2e}");
    Ok(())
}
