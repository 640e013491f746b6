//! End-to-end equilibrium solve.
//!
//! Loads the first reference scenario (log-utility adversary against a
//! linear-tradeoff collector over uniform honest noise), runs the
//! leader-follower search over the threshold grid, and prints the committed
//! threshold, the adversary response the collector must plan for, and the
//! mixture that attains it.
//!
//! Run with: `cargo run --example solve_equilibrium`

use game_of_coding::config::{load_config, SolveConfig};
use game_of_coding::equilibrium::solve_stackelberg;
use std::path::Path;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example1.json");
    let cfg: SolveConfig = load_config(&path, &[]).expect("config parses");
    let report = solve_stackelberg(&cfg).expect("solve succeeds");

    println!("committed threshold  eta* = {}", report.eta_star);
    println!("adversary response   PA   = {:.3}", report.pa);
    println!("worst-case error     MMSE = {:.4}", report.mmse);
    println!("collector utility         = {:.4}", report.u_dc);
    println!("adversary utility         = {:.4}", report.u_ad);
    println!();
    println!("frontier-attaining mixture (magnitudes in honest half-widths):");
    for atom in report.noise.atoms() {
        println!("  mass {:.4} at +/- {:.4}", atom.w, atom.z);
    }
    println!();
    println!(
        "full report as JSON:\n{}",
        serde_json::to_string_pretty(&report).unwrap()
    );
}
