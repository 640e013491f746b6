//! Inspecting the per-atom error curve and its concave envelope.
//!
//! For thresholds at or above 8/3 the curve is concave over the whole
//! acceptance range and the envelope follows it everywhere. Below 8/3 a
//! convex stretch opens near full acceptance and the envelope bridges it
//! with a straight hull segment; this prints the bridge and where it
//! touches the curve.
//!
//! Run with: `cargo run --example envelope_inspection`

use game_of_coding::{build_envelope, HonestNoise, TangentInterval};

fn main() {
    let noise = HonestNoise::uniform(1.0).unwrap();

    for eta in [2.0, 2.2, 2.5, 8.0 / 3.0, 4.0] {
        let env = build_envelope(&noise, eta, 4096).unwrap();
        let touching = env
            .hull_vertex_flags()
            .iter()
            .filter(|&&flag| flag)
            .count();
        println!(
            "eta = {eta:.4}: {} knots, {} touch the curve",
            env.knots().len(),
            touching
        );
        match env.tangent_interval(0.95).unwrap() {
            TangentInterval::Touch(q) => {
                println!("  at alpha = 0.95 the envelope touches the curve (q = {q})")
            }
            TangentInterval::Segment(q1, q2) => {
                println!("  at alpha = 0.95 the envelope bridges [{q1:.6}, {q2:.6}]")
            }
        }
    }

    // The bridge start moves with the threshold; print a short profile of
    // envelope minus curve for one sub-threshold case.
    let eta = 2.2;
    let env = build_envelope(&noise, eta, 4096).unwrap();
    println!("\nenvelope minus curve at eta = {eta}:");
    for i in 0..=10 {
        let q = 0.70 + 0.03 * i as f64;
        let lift = env.value(q).unwrap() - noise.error_at_acceptance(eta, q).unwrap();
        println!("  q = {q:.2}: lift = {lift:.6}");
    }
}
