//! Acceptance-vs-accuracy equilibria for two-node redundant reporting.
//!
//! A data collector asks two nodes to report a bounded quantity. One node
//! is honest and reports with bounded symmetric noise; the other is a
//! rational adversary that picks its noise distribution freely. The
//! collector commits first to an acceptance rule, keeping the pair of
//! reports only when they differ by at most `eta` honest half-widths, and
//! then estimates the quantity from an accepted pair. Both parties care
//! about the probability of acceptance and the estimation error, with
//! opposite preferences on the error, so the committed threshold and the
//! adversary's noise settle into a leader-follower equilibrium.
//!
//! The crate computes, for any symmetric bounded honest noise:
//!
//! - the band kernels of the honest noise and the worst-case error frontier
//!   over acceptance probabilities ([`honest_noise`], [`envelope`]),
//! - exact acceptance/error evaluation, synthesis of frontier-attaining
//!   mixtures, and a pair-search oracle ([`adversary`]),
//! - the equilibrium threshold and best-response sets for utilities given
//!   as expressions over `MMSE` and `PA`, cross-checked by a grid oracle
//!   that never looks at the frontier ([`equilibrium`]),
//! - a seeded, deterministic Monte Carlo protocol simulator used to verify
//!   the closed forms and the estimator-optimality claims ([`simulator`]).
//!
//! The `goc` binary exposes the same functionality as subcommands; the
//! `examples/` directory shows one runnable walkthrough per capability.

pub mod adversary;
pub mod cli;
pub mod config;
pub mod envelope;
pub mod equilibrium;
pub mod error;
pub mod honest_noise;
pub mod simulator;

pub use adversary::{synthesize_optimal_noise, Atom, DiscreteSymmetricNoise};
pub use envelope::{build_envelope, FrontierPoint, PiecewiseLinearEnvelope, TangentInterval};
pub use error::{Error, Result};
pub use honest_noise::HonestNoise;
