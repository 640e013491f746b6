//! Synthesizing the adversary noise that attains the frontier.
//!
//! Where the per-atom error curve is concave a single magnitude pair
//! suffices; where the envelope bridges a non-concave stretch the optimum
//! mixes the two bridge endpoints. Both cases are re-checked against the
//! closed-form evaluators here.
//!
//! Run with: `cargo run --example synthesize_noise`

use game_of_coding::{build_envelope, synthesize_optimal_noise, HonestNoise};

fn main() {
    let noise = HonestNoise::uniform(1.0).unwrap();

    for (eta, alpha) in [(4.0, 0.5), (2.0, 0.9), (2.0, 1.0), (6.75, 0.807)] {
        let env = build_envelope(&noise, eta, 4096).unwrap();
        let g = synthesize_optimal_noise(&noise, eta, alpha, &env).unwrap();
        let eval = g.evaluate(&noise, eta).unwrap();
        println!("eta = {eta}, target acceptance = {alpha}:");
        for atom in g.atoms() {
            println!("  mass {:.6} at +/- {:.6}", atom.w, atom.z);
        }
        println!(
            "  attains PA = {:.9}, MSE = {:.9} (frontier {:.9})",
            eval.pa,
            eval.mse_mean.unwrap(),
            env.worst_mse(alpha).unwrap()
        );
        println!(
            "  wire format: {}",
            serde_json::to_string(&g).unwrap()
        );
        println!();
    }
}
