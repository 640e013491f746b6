//! Seeded Monte Carlo simulation of the two-node protocol.
//!
//! Each round draws the hidden value uniformly from `[-M, M]`, the honest
//! noise by inverse CDF, the adversary noise from its mixture, assigns the
//! honest report to slot 1 or 2 with probability 1/2, accepts when the two
//! reports differ by at most `eta * delta`, and scores the midpoint
//! estimator against the hidden value.
//!
//! Determinism: rounds are split into fixed-size chunks; chunk `i` runs on
//! its own stream seeded by `splitmix64(master_seed + (i + 1) *
//! 0x9E3779B97F4A7C15)` and partial accumulators merge in chunk order, so
//! results are bit-identical for any worker count.

use crate::adversary::DiscreteSymmetricNoise;
use crate::error::{Error, Result};
use crate::honest_noise::HonestNoise;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK_ROUNDS: u64 = 1 << 16;

/// Fully resolved simulation input.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub m: f64,
    pub delta: f64,
    pub eta: f64,
    pub honest_noise: HonestNoise,
    pub adversary: DiscreteSymmetricNoise,
    pub n_samples: u64,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn new(
        m: f64,
        delta: f64,
        eta: f64,
        honest_noise: HonestNoise,
        adversary: DiscreteSymmetricNoise,
        n_samples: u64,
        master_seed: u64,
    ) -> Result<Self> {
        if !eta.is_finite() || eta < 2.0 {
            return Err(Error::Config(format!(
                "acceptance threshold must satisfy eta >= 2, got {eta}"
            )));
        }
        if m.is_nan() || m <= (eta + 2.0) * delta {
            return Err(Error::Config(format!(
                "prior half-width M = {m} must exceed (eta + 2) * delta = {}",
                (eta + 2.0) * delta
            )));
        }
        if n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if (honest_noise.delta() - delta).abs() > 1e-12 * delta.max(1.0) {
            return Err(Error::Config(format!(
                "honest noise support {} disagrees with delta {delta}",
                honest_noise.delta()
            )));
        }
        Ok(SimConfig {
            m,
            delta,
            eta,
            honest_noise,
            adversary,
            n_samples,
            master_seed,
        })
    }
}

/// One orthogonality-test residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub test_function: String,
    pub residual: f64,
    pub stderr: f64,
}

/// Aggregate simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub n_samples: u64,
    pub n_accepted: u64,
    pub pa_hat: f64,
    pub pa_stderr: f64,
    /// `None` when no round was accepted.
    pub mse_mean_hat: Option<f64>,
    pub mse_stderr: Option<f64>,
    /// Share of accepted rounds with `|y1 + y2| <= 2M - (eta + 2) delta`.
    pub interior_fraction: f64,
    pub orthogonality_residuals: Vec<ResidualEntry>,
}

/// Test functions for the estimator-orthogonality check, evaluated on
/// `(y1 + y2, y1 - y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    One,
    Diff,
    SumOverM,
    SignDiff,
}

impl TestFunction {
    pub fn all() -> [TestFunction; 4] {
        [
            TestFunction::One,
            TestFunction::Diff,
            TestFunction::SumOverM,
            TestFunction::SignDiff,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::One => "1",
            TestFunction::Diff => "y1-y2",
            TestFunction::SumOverM => "(y1+y2)/M",
            TestFunction::SignDiff => "sign(y1-y2)",
        }
    }

    fn eval(&self, sum: f64, diff: f64, m: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Diff => diff,
            TestFunction::SumOverM => sum / m,
            TestFunction::SignDiff => {
                if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Gap measurement between the midpoint estimator and a binned
/// conditional-mean refinement of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    /// `MSE(midpoint) - MSE(binned)`, in sample.
    pub gap: f64,
    pub gap_stderr: f64,
    /// The vanishing-gap bound `(eta^2 + 4) (eta + 2) delta^3 / M`.
    pub bound: f64,
    /// Bias allowance from finite cell width: `(cell width in y1+y2)^2 / 4`.
    pub bin_allowance: f64,
    pub median_occupancy: f64,
    pub mse_mean_hat: f64,
    pub n_accepted: u64,
}

#[derive(Clone, Copy)]
enum Sampler {
    Uniform,
}

struct RoundCtx<'a> {
    m: f64,
    delta: f64,
    eta_delta: f64,
    interior_cut: f64,
    honest: &'a HonestNoise,
    sampler: Option<Sampler>,
    /// Cumulative atom weights scaled to 1 and signed magnitudes.
    atom_cdf: Vec<f64>,
    atom_z: Vec<f64>,
}

/// One simulated round, after the accept test.
#[derive(Clone, Copy)]
struct Round {
    accepted: bool,
    /// Midpoint estimator error `u - (y1 + y2) / 2`.
    err: f64,
    sum: f64,
    diff: f64,
    interior: bool,
}

impl<'a> RoundCtx<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let total: f64 = cfg.adversary.atoms().iter().map(|a| a.w).sum();
        let mut acc = 0.0;
        let mut atom_cdf = Vec::with_capacity(cfg.adversary.atoms().len());
        let mut atom_z = Vec::with_capacity(cfg.adversary.atoms().len());
        for a in cfg.adversary.atoms() {
            acc += a.w / total;
            atom_cdf.push(acc);
            atom_z.push(a.z * cfg.delta);
        }
        *atom_cdf.last_mut().unwrap() = 1.0;
        RoundCtx {
            m: cfg.m,
            delta: cfg.delta,
            eta_delta: cfg.eta * cfg.delta,
            interior_cut: 2.0 * cfg.m - (cfg.eta + 2.0) * cfg.delta,
            honest: &cfg.honest_noise,
            sampler: cfg.honest_noise.is_uniform().then_some(Sampler::Uniform),
            atom_cdf,
            atom_z,
        }
    }

    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> Round {
        // Fixed draw order: u, honest noise, atom, sign, slot.
        let u = (2.0 * rng.gen::<f64>() - 1.0) * self.m;
        let r = rng.gen::<f64>();
        let nh = match self.sampler {
            Some(Sampler::Uniform) => (2.0 * r - 1.0) * self.delta,
            None => self
                .honest
                .cdf_inv(r)
                .expect("r lies in [0, 1]"),
        };
        let ra = rng.gen::<f64>();
        let idx = self
            .atom_cdf
            .iter()
            .position(|&c| ra <= c)
            .unwrap_or(self.atom_cdf.len() - 1);
        let mag = self.atom_z[idx];
        let na = if rng.gen::<f64>() < 0.5 { mag } else { -mag };
        let honest_first = rng.gen::<f64>() < 0.5;
        let (n1, n2) = if honest_first { (nh, na) } else { (na, nh) };
        let diff = n1 - n2;
        let accepted = diff.abs() <= self.eta_delta;
        let sum = 2.0 * u + n1 + n2;
        Round {
            accepted,
            err: -(n1 + n2) / 2.0,
            sum,
            diff,
            interior: sum.abs() <= self.interior_cut,
        }
    }
}

fn chunk_seed(master: u64, chunk: u64) -> u64 {
    splitmix64(master.wrapping_add((chunk + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs chunked rounds and folds per-chunk accumulators in chunk order.
fn run_chunks<A, F>(cfg: &SimConfig, init: impl Fn() -> A + Sync, body: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut A, Round) + Sync,
{
    let ctx = RoundCtx::new(cfg);
    let n_chunks = cfg.n_samples.div_ceil(CHUNK_ROUNDS);
    (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(cfg.master_seed, chunk));
            let rounds = CHUNK_ROUNDS.min(cfg.n_samples - chunk * CHUNK_ROUNDS);
            let mut acc = init();
            for _ in 0..rounds {
                let round = ctx.draw(&mut rng);
                body(&mut acc, round);
            }
            acc
        })
        .collect()
}

/// Replays the exact round stream of [`simulate`] sequentially, visiting
/// `(u, y1, y2, accepted)` per round. Used for sample dumps.
pub fn replay_rounds<F: FnMut(f64, f64, f64, bool)>(cfg: &SimConfig, mut visit: F) {
    let ctx = RoundCtx::new(cfg);
    let n_chunks = cfg.n_samples.div_ceil(CHUNK_ROUNDS);
    for chunk in 0..n_chunks {
        let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(cfg.master_seed, chunk));
        let rounds = CHUNK_ROUNDS.min(cfg.n_samples - chunk * CHUNK_ROUNDS);
        for _ in 0..rounds {
            let r = ctx.draw(&mut rng);
            let u = r.err + r.sum / 2.0;
            let y1 = (r.sum + r.diff) / 2.0;
            let y2 = (r.sum - r.diff) / 2.0;
            visit(u, y1, y2, r.accepted);
        }
    }
}

/// Simulates the protocol and reports acceptance and midpoint-estimator
/// statistics.
pub fn simulate(cfg: &SimConfig) -> EmpiricalStats {
    #[derive(Default)]
    struct Acc {
        n_acc: u64,
        n_interior: u64,
        sum_e2: f64,
        sum_e4: f64,
    }
    let parts = run_chunks(cfg, Acc::default, |acc, r| {
        if r.accepted {
            acc.n_acc += 1;
            let e2 = r.err * r.err;
            acc.sum_e2 += e2;
            acc.sum_e4 += e2 * e2;
            if r.interior {
                acc.n_interior += 1;
            }
        }
    });
    let mut total = Acc::default();
    for p in parts {
        total.n_acc += p.n_acc;
        total.n_interior += p.n_interior;
        total.sum_e2 += p.sum_e2;
        total.sum_e4 += p.sum_e4;
    }
    let n = cfg.n_samples as f64;
    let pa_hat = total.n_acc as f64 / n;
    let pa_stderr = (pa_hat * (1.0 - pa_hat) / n).sqrt();
    let (mse, mse_stderr, interior_fraction) = if total.n_acc > 0 {
        let na = total.n_acc as f64;
        let mse = total.sum_e2 / na;
        let var = (total.sum_e4 / na - mse * mse).max(0.0);
        (
            Some(mse),
            Some((var / na).sqrt()),
            total.n_interior as f64 / na,
        )
    } else {
        (None, None, 0.0)
    };
    EmpiricalStats {
        n_samples: cfg.n_samples,
        n_accepted: total.n_acc,
        pa_hat,
        pa_stderr,
        mse_mean_hat: mse,
        mse_stderr,
        interior_fraction,
        orthogonality_residuals: Vec::new(),
    }
}

/// Estimator-orthogonality residuals: over accepted interior rounds, the
/// sample mean of `(u - (y1 + y2) / 2) * phi(y1 + y2, y1 - y2)` for each
/// test function. The interior conditional mean of the hidden value is the
/// midpoint, so every residual has population value zero.
///
/// Mixtures here are symmetric by construction of
/// [`DiscreteSymmetricNoise`], which the argument relies on.
pub fn orthogonality_check(
    cfg: &SimConfig,
    test_functions: &[TestFunction],
) -> Result<Vec<ResidualEntry>> {
    let k = test_functions.len();
    #[derive(Clone)]
    struct Acc {
        n_interior: u64,
        sums: Vec<f64>,
        sums2: Vec<f64>,
    }
    let m = cfg.m;
    let funcs = test_functions.to_vec();
    let parts = run_chunks(
        cfg,
        || Acc {
            n_interior: 0,
            sums: vec![0.0; k],
            sums2: vec![0.0; k],
        },
        |acc, r| {
            if r.accepted && r.interior {
                acc.n_interior += 1;
                for (slot, f) in funcs.iter().enumerate() {
                    let v = r.err * f.eval(r.sum, r.diff, m);
                    acc.sums[slot] += v;
                    acc.sums2[slot] += v * v;
                }
            }
        },
    );
    let mut n_interior = 0u64;
    let mut sums = vec![0.0; k];
    let mut sums2 = vec![0.0; k];
    for p in parts {
        n_interior += p.n_interior;
        for slot in 0..k {
            sums[slot] += p.sums[slot];
            sums2[slot] += p.sums2[slot];
        }
    }
    if n_interior < 1000 {
        return Err(Error::InsufficientData(format!(
            "only {n_interior} interior accepted rounds; need at least 1000"
        )));
    }
    let n = n_interior as f64;
    Ok(test_functions
        .iter()
        .enumerate()
        .map(|(slot, f)| {
            let mean = sums[slot] / n;
            let var = (sums2[slot] / n - mean * mean).max(0.0);
            ResidualEntry {
                test_function: f.name().to_string(),
                residual: mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect())
}

/// Measures how much a binned conditional-mean correction improves on the
/// midpoint estimator.
///
/// In the interior the conditional mean of the hidden value is exactly the
/// midpoint, so the correction is fit only over the two boundary shells
/// `2M - (eta + 2) delta < |y1 + y2| <= 2M + (eta + 2) delta`, on a
/// `bins x bins` grid of equal-width cells in `(|y1 + y2|, y1 - y2)` per
/// shell. The in-sample improvement equals the occupancy-weighted sum of
/// squared cell means of the midpoint residual.
pub fn mmse_gap_check(cfg: &SimConfig, bins: usize) -> Result<GapCheck> {
    if bins == 0 {
        return Err(Error::Domain("bin count must be at least 1".into()));
    }
    if cfg.n_samples < 1_000_000 {
        return Err(Error::Domain(format!(
            "gap measurement needs at least 1e6 rounds, got {}",
            cfg.n_samples
        )));
    }
    let pa = cfg
        .adversary
        .acceptance_probability(&cfg.honest_noise, cfg.eta)?;
    if pa <= 0.05 {
        return Err(Error::Domain(format!(
            "gap measurement needs acceptance probability above 0.05, got {pa}"
        )));
    }
    let shell_lo = 2.0 * cfg.m - (cfg.eta + 2.0) * cfg.delta;
    let shell_w = 2.0 * (cfg.eta + 2.0) * cfg.delta;
    let t_half = cfg.eta * cfg.delta;
    let n_cells = 2 * bins * bins;

    #[derive(Clone)]
    struct Acc {
        n_acc: u64,
        sum_e2: f64,
        sum_e4: f64,
        cell_n: Vec<u64>,
        cell_sum: Vec<f64>,
        cell_sum2: Vec<f64>,
    }
    let parts = run_chunks(
        cfg,
        || Acc {
            n_acc: 0,
            sum_e2: 0.0,
            sum_e4: 0.0,
            cell_n: vec![0; n_cells],
            cell_sum: vec![0.0; n_cells],
            cell_sum2: vec![0.0; n_cells],
        },
        |acc, r| {
            if !r.accepted {
                return;
            }
            acc.n_acc += 1;
            let e2 = r.err * r.err;
            acc.sum_e2 += e2;
            acc.sum_e4 += e2 * e2;
            if r.interior {
                return;
            }
            let side = usize::from(r.sum > 0.0);
            let vi = (((r.sum.abs() - shell_lo) / shell_w * bins as f64) as usize).min(bins - 1);
            let ti = (((r.diff + t_half) / (2.0 * t_half) * bins as f64) as usize).min(bins - 1);
            let cell = (side * bins + vi) * bins + ti;
            acc.cell_n[cell] += 1;
            acc.cell_sum[cell] += r.err;
            acc.cell_sum2[cell] += e2;
        },
    );
    let mut n_acc = 0u64;
    let mut sum_e2 = 0.0;
    let mut cell_n = vec![0u64; n_cells];
    let mut cell_sum = vec![0.0; n_cells];
    let mut cell_sum2 = vec![0.0; n_cells];
    for p in parts {
        n_acc += p.n_acc;
        sum_e2 += p.sum_e2;
        for c in 0..n_cells {
            cell_n[c] += p.cell_n[c];
            cell_sum[c] += p.cell_sum[c];
            cell_sum2[c] += p.cell_sum2[c];
        }
    }
    if n_acc == 0 {
        return Err(Error::InsufficientData("no accepted rounds".into()));
    }
    let mut occupied: Vec<u64> = cell_n.iter().copied().filter(|&n| n > 0).collect();
    occupied.sort_unstable();
    if occupied.is_empty() {
        return Err(Error::InsufficientData(
            "no accepted rounds landed in the boundary shells".into(),
        ));
    }
    let median_occupancy = occupied[occupied.len() / 2] as f64;
    if median_occupancy < 50.0 {
        return Err(Error::InsufficientData(format!(
            "median cell occupancy {median_occupancy} is below 50; \
             use fewer bins or more rounds"
        )));
    }
    let na = n_acc as f64;
    let mut gap = 0.0;
    let mut var = 0.0;
    for c in 0..n_cells {
        if cell_n[c] == 0 {
            continue;
        }
        let nc = cell_n[c] as f64;
        let mean = cell_sum[c] / nc;
        let cell_var = (cell_sum2[c] / nc - mean * mean).max(0.0);
        gap += nc / na * mean * mean;
        var += (nc / na) * (nc / na) * 4.0 * mean * mean * cell_var / nc;
    }
    Ok(GapCheck {
        gap,
        gap_stderr: var.sqrt(),
        bound: (cfg.eta * cfg.eta + 4.0) * (cfg.eta + 2.0) * cfg.delta.powi(3) / cfg.m,
        bin_allowance: (shell_w / bins as f64).powi(2) / 4.0,
        median_occupancy,
        mse_mean_hat: sum_e2 / na,
        n_accepted: n_acc,
    })
}
