//! Oracle cross-checks, as run by `goc verify`.
//!
//! Four independent routes guard the solver: a pair-search oracle for the
//! frontier, exactness of the synthesized mixtures, agreement between the
//! frontier-based and enumeration-based equilibrium searches, and Monte
//! Carlo agreement with the closed forms.
//!
//! Run with: `cargo run --release --example oracle_verification`

use game_of_coding::cli::verify;
use game_of_coding::config::{load_config, SolveConfig};
use std::path::Path;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["example1.json", "example3.json"] {
        let cfg: SolveConfig = load_config(&dir.join(name), &[]).expect("config parses");
        let report = verify(&cfg, Some(&dir), None).expect("verification runs");
        println!("{name}:");
        for check in &report.checks {
            println!(
                "  {} {}: {}",
                if check.pass { "PASS" } else { "FAIL" },
                check.name,
                check.detail
            );
        }
        println!();
    }
}
