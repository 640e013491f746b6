//! Monte Carlo validation of the closed-form evaluators.
//!
//! Simulates the accept/estimate protocol round by round and compares the
//! empirical acceptance probability and midpoint-estimator MSE with the
//! kernel-based closed forms, then runs the estimator-orthogonality check:
//! in the interior the conditional mean of the hidden value given both
//! reports is exactly their midpoint, so every residual should vanish.
//!
//! Run with: `cargo run --release --example monte_carlo_validation`

use game_of_coding::simulator::{orthogonality_check, simulate, SimConfig, TestFunction};
use game_of_coding::{Atom, DiscreteSymmetricNoise, HonestNoise};

fn main() {
    let noise = HonestNoise::uniform(1.0).unwrap();
    let cases = [
        (2.0, vec![Atom { z: 1.0, w: 0.5 }]),
        (4.0, vec![Atom { z: 4.0, w: 0.5 }]),
        (3.0, vec![Atom { z: 1.2, w: 0.2 }, Atom { z: 2.8, w: 0.3 }]),
    ];

    for (eta, atoms) in cases {
        let g = DiscreteSymmetricNoise::new(atoms).unwrap();
        let pa = g.acceptance_probability(&noise, eta).unwrap();
        let mse = g.mse_mean(&noise, eta).unwrap();
        let cfg = SimConfig::new(1000.0, 1.0, eta, noise.clone(), g, 1_000_000, 7).unwrap();
        let stats = simulate(&cfg);
        println!("eta = {eta}:");
        println!(
            "  PA   closed form {pa:.6}  simulated {:.6} +/- {:.6}",
            stats.pa_hat, stats.pa_stderr
        );
        println!(
            "  MSE  closed form {mse:.6}  simulated {:.6} +/- {:.6}",
            stats.mse_mean_hat.unwrap(),
            stats.mse_stderr.unwrap()
        );
        println!("  interior fraction {:.6}", stats.interior_fraction);

        let residuals = orthogonality_check(&cfg, &TestFunction::all()).unwrap();
        for r in residuals {
            let sigmas = r.residual.abs() / r.stderr.max(1e-300);
            println!(
                "  orthogonality vs {:<12} residual {:+.3e} ({sigmas:.2} sigma)",
                r.test_function, r.residual
            );
        }
        println!();
    }
}
