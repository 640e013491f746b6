//! Leader-follower equilibrium of the acceptance game.
//!
//! The collector commits a threshold `eta` from a grid. For each `eta` the
//! adversary's best responses are the acceptance levels maximizing its
//! utility along the worst-case frontier; the collector then takes, per
//! threshold, the response worst for itself, and commits the threshold
//! maximizing that guaranteed value. Two independent routes compute this:
//!
//! - [`solve_stackelberg`] walks the frontier through the concave envelope,
//! - [`brute_force_stackelberg`] enumerates two-magnitude mixtures on a
//!   support grid directly through the closed-form evaluators, never
//!   touching envelopes.
//!
//! Argmax sets on a grid use an absolute utility tie tolerance of 1e-9;
//! ties across thresholds break toward the smaller threshold (the cheaper
//! acceptance band).

pub mod utility;

pub use utility::UtilityExpr;

use crate::adversary::{synthesize_optimal_noise, Atom, DiscreteSymmetricNoise};
use crate::config::{GridSpec, SolveConfig};
use crate::envelope::{build_envelope_with, PiecewiseLinearEnvelope};
use crate::error::{Error, Result};
use crate::honest_noise::HonestNoise;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Absolute tolerance for membership in a grid argmax set.
pub const TIE_TOL: f64 = 1e-9;

/// Acceptance levels attaining the adversary's maximum utility at one
/// threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseSet {
    pub eta: f64,
    /// Grid levels within [`TIE_TOL`] of the maximum, ascending.
    pub alphas: Vec<f64>,
    pub u_ad_max: f64,
}

/// Grids and tolerances a report was computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub eta_grid: GridSpec,
    pub alpha_grid: GridSpec,
    pub tie_tol: f64,
    pub n_envelope_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_grid_n: Option<usize>,
}

/// The equilibrium: committed threshold, the adversary response the
/// collector must plan for, both utilities, and a mixture attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub eta_star: f64,
    pub alpha_star: f64,
    pub pa: f64,
    pub mmse: f64,
    pub u_dc: f64,
    pub u_ad: f64,
    pub noise: DiscreteSymmetricNoise,
    pub grid_meta: GridMeta,
}

/// Best-response levels for one threshold: all grid `alpha` within
/// [`TIE_TOL`] of the maximum of `q_ad(frontier(alpha), alpha)`.
pub fn best_response_alphas(
    noise: &HonestNoise,
    eta: f64,
    q_ad: &UtilityExpr,
    alpha_grid: &[f64],
    env: &PiecewiseLinearEnvelope,
) -> Result<BestResponseSet> {
    debug_assert_eq!(env.eta(), eta);
    let _ = noise;
    let mut best = f64::NEG_INFINITY;
    let mut utilities = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let beta = env.worst_mse(alpha)?;
        let u = q_ad.eval(beta, alpha);
        if u.is_finite() && u > best {
            best = u;
        }
        utilities.push(u);
    }
    if !best.is_finite() {
        return Err(Error::Evaluation(format!(
            "adversary utility is not finite anywhere on the grid at eta = {eta}"
        )));
    }
    let alphas: Vec<f64> = alpha_grid
        .iter()
        .zip(&utilities)
        .filter(|(_, &u)| u.is_finite() && u >= best - TIE_TOL)
        .map(|(&a, _)| a)
        .collect();
    Ok(BestResponseSet {
        eta,
        alphas,
        u_ad_max: best,
    })
}

struct PerEta {
    eta: f64,
    env: PiecewiseLinearEnvelope,
    response: BestResponseSet,
    /// The collector's guaranteed value at this threshold, with the
    /// response that attains it.
    value: f64,
    alpha_worst: f64,
}

/// Frontier-based equilibrium search.
pub fn solve_stackelberg(cfg: &SolveConfig) -> Result<EquilibriumReport> {
    solve_stackelberg_in(cfg, None)
}

/// As [`solve_stackelberg`], resolving relative CSV paths against `base_dir`.
pub fn solve_stackelberg_in(cfg: &SolveConfig, base_dir: Option<&Path>) -> Result<EquilibriumReport> {
    let noise = cfg.frontier.resolve_noise(base_dir)?;
    let q_ad = UtilityExpr::parse(&cfg.u_ad)?;
    let q_dc = UtilityExpr::parse(&cfg.u_dc)?;
    let etas = cfg.frontier.eta_grid.values()?;
    let alphas = cfg.frontier.alpha_grid.values()?;
    validate_grids(&etas, &alphas)?;
    if let Some(m) = cfg.frontier.m {
        // The equilibrium itself is solved in asymptotic mode, but a prior
        // narrower than the widest acceptance band is never meaningful.
        let widest = (etas.last().unwrap() + 2.0) * noise.delta();
        if m.is_nan() || m <= widest {
            return Err(Error::Config(format!(
                "prior half-width M = {m} must exceed (eta + 2) * delta = {widest}"
            )));
        }
    }
    let n_samples = cfg.frontier.n_envelope_samples;

    // Per-threshold work is independent; collect preserves grid order.
    let per: Vec<PerEta> = etas
        .par_iter()
        .map(|&eta| -> Result<PerEta> {
            // Insert the alpha grid into the sample set so frontier queries
            // at grid levels carry no interpolation error.
            let env = build_envelope_with(&noise, eta, n_samples, &alphas)?;
            let response = best_response_alphas(&noise, eta, &q_ad, &alphas, &env)?;
            let mut value = f64::INFINITY;
            let mut alpha_worst = f64::NAN;
            for &alpha in &response.alphas {
                let u = q_dc.eval(env.worst_mse(alpha)?, alpha);
                if u.is_nan() {
                    return Err(Error::Evaluation(format!(
                        "collector utility is NaN at (eta, alpha) = ({eta}, {alpha})"
                    )));
                }
                if u < value {
                    value = u;
                    alpha_worst = alpha;
                }
            }
            Ok(PerEta {
                eta,
                env,
                response,
                value,
                alpha_worst,
            })
        })
        .collect::<Result<_>>()?;

    audit_monotonicity(&q_ad, &q_dc, probe_ranges(&per, &alphas)?)?;

    // Threshold scan; strict improvement keeps the smallest tied threshold.
    let mut winner = &per[0];
    for p in &per[1..] {
        if p.value > winner.value {
            winner = p;
        }
    }
    let eta_star = winner.eta;
    let alpha_star = winner.alpha_worst;
    let mmse = winner.env.worst_mse(alpha_star)?;
    let noise_star = synthesize_optimal_noise(&noise, eta_star, alpha_star, &winner.env)?;
    Ok(EquilibriumReport {
        eta_star,
        alpha_star,
        pa: alpha_star,
        mmse,
        u_dc: winner.value,
        u_ad: winner.response.u_ad_max,
        noise: noise_star,
        grid_meta: GridMeta {
            eta_grid: cfg.frontier.eta_grid,
            alpha_grid: cfg.frontier.alpha_grid,
            tie_tol: TIE_TOL,
            n_envelope_samples: n_samples,
            support_grid_n: None,
        },
    })
}

/// Grid oracle for the equilibrium: enumerates symmetric two-magnitude
/// mixtures on a band support grid per threshold, scores them through the
/// closed-form evaluators, and applies the same argmax semantics. Never
/// consults envelopes or the frontier.
pub fn brute_force_stackelberg(
    cfg: &SolveConfig,
    support_grid_n: usize,
) -> Result<EquilibriumReport> {
    brute_force_stackelberg_in(cfg, support_grid_n, None)
}

pub fn brute_force_stackelberg_in(
    cfg: &SolveConfig,
    support_grid_n: usize,
    base_dir: Option<&Path>,
) -> Result<EquilibriumReport> {
    let noise = cfg.frontier.resolve_noise(base_dir)?;
    let q_ad = UtilityExpr::parse(&cfg.u_ad)?;
    let q_dc = UtilityExpr::parse(&cfg.u_dc)?;
    let etas = cfg.frontier.eta_grid.values()?;
    let alphas = cfg.frontier.alpha_grid.values()?;
    validate_grids(&etas, &alphas)?;
    if etas.len() > 50 {
        return Err(Error::Domain(format!(
            "exhaustive search is limited to 50 thresholds, got {}",
            etas.len()
        )));
    }
    if !(32..=200).contains(&support_grid_n) {
        return Err(Error::Domain(format!(
            "support grid must have between 32 and 200 points, got {support_grid_n}"
        )));
    }

    struct BfEta {
        eta: f64,
        value: f64,
        u_ad_max: f64,
        pa: f64,
        mse: f64,
        atoms: Vec<Atom>,
    }

    let per: Vec<BfEta> = etas
        .par_iter()
        .map(|&eta| -> Result<BfEta> {
            let (lo, hi) = noise.band(eta);
            let step = (hi - lo) / (support_grid_n - 1) as f64;
            let mut ks = Vec::with_capacity(support_grid_n);
            let mut nus = Vec::with_capacity(support_grid_n);
            for i in 0..support_grid_n {
                let z = lo + i as f64 * step;
                ks.push(noise.acceptance_kernel(eta, z)?);
                nus.push(noise.error_kernel(eta, z)?);
            }
            // For every acceptance level, the worst two-magnitude mixture
            // whose weights are pinned by the mass and acceptance
            // constraints, as in the frontier pair-search oracle.
            let mut worst: Vec<Option<(f64, usize, usize)>> = vec![None; alphas.len()];
            for (a, &alpha) in alphas.iter().enumerate() {
                let mut best: Option<(f64, usize, usize)> = None;
                for i in 0..support_grid_n {
                    if (ks[i] - alpha).abs() <= 1e-12 {
                        let mse = 0.5 * nus[i] / (2.0 * alpha);
                        if best.is_none_or(|(m, _, _)| mse > m) {
                            best = Some((mse, i, i));
                        }
                    }
                    if ks[i] < alpha {
                        break;
                    }
                    for j in (i + 1)..support_grid_n {
                        if ks[j] > alpha {
                            continue;
                        }
                        let w1 = (alpha - ks[j]) / (2.0 * (ks[i] - ks[j]));
                        let w2 = 0.5 - w1;
                        if w1 < 0.0 || w2 < 0.0 {
                            continue;
                        }
                        let mse = (w1 * nus[i] + w2 * nus[j]) / (2.0 * alpha);
                        if best.is_none_or(|(m, _, _)| mse > m) {
                            best = Some((mse, i, j));
                        }
                    }
                }
                worst[a] = best;
            }
            // Step 1 on the enumerated cloud: adversary argmax with ties.
            let mut u_ad_max = f64::NEG_INFINITY;
            for (a, &alpha) in alphas.iter().enumerate() {
                if let Some((mse, _, _)) = worst[a] {
                    let u = q_ad.eval(mse, alpha);
                    if u.is_finite() && u > u_ad_max {
                        u_ad_max = u;
                    }
                }
            }
            if !u_ad_max.is_finite() {
                return Err(Error::Evaluation(format!(
                    "adversary utility is not finite on any candidate at eta = {eta}"
                )));
            }
            // Collector-worst member of the tie set.
            let mut value = f64::INFINITY;
            let mut pick = None;
            for (a, &alpha) in alphas.iter().enumerate() {
                let Some((mse, i, j)) = worst[a] else {
                    continue;
                };
                let u = q_ad.eval(mse, alpha);
                if !u.is_finite() || u < u_ad_max - TIE_TOL {
                    continue;
                }
                let v = q_dc.eval(mse, alpha);
                if v < value {
                    value = v;
                    pick = Some((alpha, mse, i, j));
                }
            }
            let (alpha, mse, i, j) = pick.ok_or_else(|| {
                Error::Evaluation(format!(
                    "collector utility is NaN on the whole tie set at eta = {eta}"
                ))
            })?;
            let delta = noise.delta();
            let zi = (lo + i as f64 * step) / delta;
            let zj = (lo + j as f64 * step) / delta;
            let mut atoms: Vec<Atom> = Vec::new();
            if i == j {
                atoms.push(Atom { z: zi, w: 0.5 });
            } else {
                let w1 = (alpha - ks[j]) / (2.0 * (ks[i] - ks[j]));
                let w2 = 0.5 - w1;
                if w1 <= 0.0 {
                    atoms.push(Atom { z: zj, w: 0.5 });
                } else if w2 <= 0.0 {
                    atoms.push(Atom { z: zi, w: 0.5 });
                } else {
                    // i precedes j on the grid, so zi < zj.
                    atoms.push(Atom { z: zi, w: w1 });
                    atoms.push(Atom { z: zj, w: w2 });
                }
            }
            Ok(BfEta {
                eta,
                value,
                u_ad_max,
                pa: alpha,
                mse,
                atoms,
            })
        })
        .collect::<Result<_>>()?;

    let mut winner = &per[0];
    for p in &per[1..] {
        if p.value > winner.value {
            winner = p;
        }
    }
    Ok(EquilibriumReport {
        eta_star: winner.eta,
        alpha_star: winner.pa,
        pa: winner.pa,
        mmse: winner.mse,
        u_dc: winner.value,
        u_ad: winner.u_ad_max,
        noise: DiscreteSymmetricNoise::new(winner.atoms.clone())?,
        grid_meta: GridMeta {
            eta_grid: cfg.frontier.eta_grid,
            alpha_grid: cfg.frontier.alpha_grid,
            tie_tol: TIE_TOL,
            n_envelope_samples: cfg.frontier.n_envelope_samples,
            support_grid_n: Some(support_grid_n),
        },
    })
}

fn validate_grids(etas: &[f64], alphas: &[f64]) -> Result<()> {
    if etas.is_empty() || alphas.is_empty() {
        return Err(Error::Config("grids must be nonempty".into()));
    }
    if etas[0] < 2.0 {
        return Err(Error::Config(format!(
            "threshold grid must start at 2 or above, got {}",
            etas[0]
        )));
    }
    if alphas[0] <= 0.0 || *alphas.last().unwrap() > 1.0 {
        return Err(Error::Config(format!(
            "acceptance grid must lie inside (0, 1], got [{}, {}]",
            alphas[0],
            alphas.last().unwrap()
        )));
    }
    Ok(())
}

fn probe_ranges(per: &[PerEta], alphas: &[f64]) -> Result<((f64, f64), (f64, f64))> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in per {
        for &alpha in &[alphas[0], *alphas.last().unwrap()] {
            let b = p.env.worst_mse(alpha)?;
            lo = lo.min(b);
            hi = hi.max(b);
        }
    }
    Ok(((lo, hi), (alphas[0], *alphas.last().unwrap())))
}

/// Numerical sanity check on the parsed utilities over a 20 x 20 probe
/// grid: the adversary's utility must strictly increase in both arguments,
/// the collector's must not increase in the error and not decrease in the
/// acceptance probability. Violations abort the solve with a diagnostic.
pub fn audit_monotonicity(
    q_ad: &UtilityExpr,
    q_dc: &UtilityExpr,
    ranges: ((f64, f64), (f64, f64)),
) -> Result<()> {
    const N: usize = 20;
    let ((m_lo, m_hi), (p_lo, p_hi)) = ranges;
    let ms: Vec<f64> = (0..N)
        .map(|i| m_lo + (m_hi - m_lo) * i as f64 / (N - 1) as f64)
        .collect();
    let ps: Vec<f64> = (0..N)
        .map(|i| p_lo + (p_hi - p_lo) * i as f64 / (N - 1) as f64)
        .collect();
    let slack = 1e-12;
    for &p in &ps {
        for w in ms.windows(2) {
            let (a, b) = (q_ad.eval(w[0], p), q_ad.eval(w[1], p));
            if b.is_nan() || a.is_nan() || b <= a {
                return Err(Error::Monotonicity(format!(
                    "adversary utility must strictly increase in the error: \
                     u({}, {p}) = {a} vs u({}, {p}) = {b}",
                    w[0], w[1]
                )));
            }
            let (c, d) = (q_dc.eval(w[0], p), q_dc.eval(w[1], p));
            if d.is_nan() || c.is_nan() || d > c + slack * c.abs().max(1.0) {
                return Err(Error::Monotonicity(format!(
                    "collector utility must not increase in the error: \
                     u({}, {p}) = {c} vs u({}, {p}) = {d}",
                    w[0], w[1]
                )));
            }
        }
    }
    for &m in &ms {
        for w in ps.windows(2) {
            let (a, b) = (q_ad.eval(m, w[0]), q_ad.eval(m, w[1]));
            if b.is_nan() || a.is_nan() || b <= a {
                return Err(Error::Monotonicity(format!(
                    "adversary utility must strictly increase in the acceptance \
                     probability: u({m}, {}) = {a} vs u({m}, {}) = {b}",
                    w[0], w[1]
                )));
            }
            let (c, d) = (q_dc.eval(m, w[0]), q_dc.eval(m, w[1]));
            if d.is_nan() || c.is_nan() || d < c - slack * c.abs().max(1.0) {
                return Err(Error::Monotonicity(format!(
                    "collector utility must not decrease in the acceptance \
                     probability: u({m}, {}) = {c} vs u({m}, {}) = {d}",
                    w[0], w[1]
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CurveConfig, HonestNoiseConfig};

    fn cfg(u_ad: &str, u_dc: &str, alpha_min: f64, alpha_step: f64) -> SolveConfig {
        SolveConfig {
            frontier: CurveConfig {
                delta: 1.0,
                m: None,
                honest_noise: HonestNoiseConfig::Uniform,
                eta_grid: GridSpec::new(2.0, 8.0, 0.25),
                alpha_grid: GridSpec::new(alpha_min, 1.0, alpha_step),
                n_envelope_samples: 4096,
            },
            u_ad: u_ad.into(),
            u_dc: u_dc.into(),
            verify: None,
        }
    }

    #[test]
    fn best_response_reference_points() {
        let noise = HonestNoise::uniform(1.0).unwrap();
        let alphas = GridSpec::new(0.001, 1.0, 0.001).values().unwrap();
        let q_ad = UtilityExpr::parse("log(MMSE) + 0.75*log(PA)").unwrap();
        let env = build_envelope_with(&noise, 6.75, 4096, &alphas).unwrap();
        let brs = best_response_alphas(&noise, 6.75, &q_ad, &alphas, &env).unwrap();
        assert_eq!(brs.alphas.len(), 1);
        assert!((brs.alphas[0] - 0.807).abs() < 1e-12);

        // A pure liveness seeker pushes acceptance to 1.
        let q_ad = UtilityExpr::parse("PA").unwrap();
        let brs = best_response_alphas(&noise, 6.75, &q_ad, &alphas, &env).unwrap();
        assert_eq!(brs.alphas, vec![1.0]);

        // Utterly conflicting interests drive acceptance to the grid floor.
        let q_ad = UtilityExpr::parse("log(MMSE) + 0.25*log(PA + 0.3)").unwrap();
        let env2 = build_envelope_with(&noise, 2.0, 4096, &alphas).unwrap();
        let brs = best_response_alphas(&noise, 2.0, &q_ad, &alphas, &env2).unwrap();
        assert_eq!(brs.alphas, vec![0.001]);
    }

    #[test]
    fn solve_reproduces_the_reference_equilibria() {
        let report =
            solve_stackelberg(&cfg("log(MMSE) + 0.75*log(PA)", "-MMSE + 25*PA", 0.001, 0.001))
                .unwrap();
        assert_eq!(report.eta_star, 6.75);
        assert!((report.pa - 0.807).abs() < 1e-12);
        assert!((report.mmse - 10.068).abs() < 1e-3);

        let report = solve_stackelberg(&cfg(
            "log(MMSE) + 0.25*log(PA + 0.3)",
            "-MMSE + PA",
            0.001,
            0.001,
        ))
        .unwrap();
        assert_eq!(report.eta_star, 2.0);
        assert_eq!(report.pa, 0.001);
        assert!((report.mmse - 3.994).abs() < 1e-3);
    }

    #[test]
    fn report_invariants_hold() {
        let report =
            solve_stackelberg(&cfg("log(MMSE) + 0.75*log(PA)", "-MMSE + 25*PA", 0.001, 0.001))
                .unwrap();
        assert_eq!(report.pa, report.alpha_star);
        let noise = HonestNoise::uniform(1.0).unwrap();
        let eval = report.noise.evaluate(&noise, report.eta_star).unwrap();
        assert!((eval.pa - report.pa).abs() <= 1e-9);
        assert!((eval.mse_mean.unwrap() - report.mmse).abs() <= 1e-9);
    }

    #[test]
    fn pure_liveness_collector_ties_resolve_to_the_narrowest_band() {
        // Every threshold guarantees acceptance 1, so the collector value
        // ties across the grid and the smaller threshold wins.
        let solved = solve_stackelberg(&cfg("PA + 0.001*MMSE", "PA", 0.01, 0.01)).unwrap();
        assert_eq!(solved.eta_star, 2.0);
        assert_eq!(solved.pa, 1.0);
        let mut small = cfg("PA + 0.001*MMSE", "PA", 0.01, 0.01);
        small.frontier.eta_grid = GridSpec::new(2.0, 3.0, 0.5);
        let bf = brute_force_stackelberg(&small, 64).unwrap();
        assert_eq!(bf.eta_star, 2.0);
        assert!((bf.pa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_audit_rejects_bad_utilities() {
        // Adversary utility decreasing in the error.
        let err = solve_stackelberg(&cfg("-MMSE + PA", "-MMSE + PA", 0.01, 0.01)).unwrap_err();
        assert!(matches!(err, Error::Monotonicity(_)));
        // Collector utility increasing in the error.
        let err = solve_stackelberg(&cfg("log(MMSE) + log(PA)", "MMSE + PA", 0.01, 0.01))
            .unwrap_err();
        assert!(matches!(err, Error::Monotonicity(_)));
    }

    #[test]
    fn empty_and_invalid_grids_are_configuration_errors() {
        let mut c = cfg("log(MMSE) + log(PA)", "-MMSE + PA", 0.01, 0.01);
        c.frontier.alpha_grid = GridSpec::new(0.0, 1.0, 0.01);
        assert!(matches!(
            solve_stackelberg(&c),
            Err(Error::Config(_))
        ));
        let mut c = cfg("log(MMSE) + log(PA)", "-MMSE + PA", 0.01, 0.01);
        c.frontier.eta_grid = GridSpec::new(1.0, 8.0, 0.25);
        assert!(matches!(solve_stackelberg(&c), Err(Error::Config(_))));
    }

    #[test]
    fn reports_are_deterministic_across_thread_counts() {
        let config = cfg("log(MMSE) + 0.75*log(PA)", "-MMSE + 25*PA", 0.01, 0.001);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| solve_stackelberg(&config).unwrap())
        };
        let a = serde_json::to_string(&run(1)).unwrap();
        let b = serde_json::to_string(&run(4)).unwrap();
        assert_eq!(a, b);
    }
}
