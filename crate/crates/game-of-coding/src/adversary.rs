//! Adversary noise as symmetric point-mass mixtures.
//!
//! Every distribution here is a finite list of atoms `(z, w)` with `z >= 0`
//! in units of the honest support half-width: each entry places mass `w` at
//! `+z` and mass `w` at `-z`, so the total mass constraint is
//! `2 * sum(w) = 1`. A `z = 0` atom appears once in the list; its two
//! halves coincide at the origin.
//!
//! Acceptance probability and the mean-estimator MSE conditioned on
//! acceptance have exact closed forms in terms of the band kernels: atoms
//! strictly inside `(eta - 1) * delta` are always accepted and contribute
//! their squared offset plus the honest variance, atoms in the band
//! contribute through the kernels, atoms beyond `(eta + 1) * delta` are
//! never accepted. Atoms exactly on a band edge are evaluated by the band
//! formulas; both classifications agree there.

use crate::envelope::{PiecewiseLinearEnvelope, TangentInterval};
use crate::error::{Error, Result};
use crate::honest_noise::HonestNoise;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MASS_TOL: f64 = 1e-12;

/// One symmetric atom pair: mass `w` at `+z` and at `-z`, with `z` in units
/// of the honest support half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: f64,
    pub w: f64,
}

/// A symmetric point-mass mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSymmetricNoise {
    atoms: Vec<Atom>,
}

/// Exact evaluation of a mixture against one honest noise and threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvaluation {
    pub pa: f64,
    /// Mean-estimator MSE given acceptance; `None` when acceptance has
    /// probability zero and the conditional is undefined.
    pub mse_mean: Option<f64>,
}

impl DiscreteSymmetricNoise {
    /// Builds a mixture from `(z, w)` pairs with `z >= 0`. Locations must be
    /// strictly ascending, weights positive, and `2 * sum(w) = 1` within
    /// 1e-12.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config("mixture needs at least one atom".into()));
        }
        for a in &atoms {
            if !a.z.is_finite() || a.z < 0.0 {
                return Err(Error::Config(format!(
                    "atom location must be a finite nonnegative magnitude, got {}",
                    a.z
                )));
            }
            if !a.w.is_finite() || a.w <= 0.0 {
                return Err(Error::Config(format!(
                    "atom weight must be positive, got {}",
                    a.w
                )));
            }
        }
        for p in atoms.windows(2) {
            if p[1].z <= p[0].z {
                return Err(Error::Config(
                    "atom locations must be strictly ascending".into(),
                ));
            }
        }
        let mass: f64 = 2.0 * atoms.iter().map(|a| a.w).sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Config(format!(
                "total mass must be 1, got {mass}"
            )));
        }
        Ok(DiscreteSymmetricNoise { atoms })
    }

    /// The single always-informative mixture: all mass at the origin.
    pub fn truthful() -> Self {
        DiscreteSymmetricNoise {
            atoms: vec![Atom { z: 0.0, w: 0.5 }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Probability that the pair of reports is accepted.
    pub fn acceptance_probability(&self, noise: &HonestNoise, eta: f64) -> Result<f64> {
        Ok(self.accumulate(noise, eta)?.0)
    }

    /// Mean-estimator MSE conditioned on acceptance. Errors when the
    /// acceptance probability is zero.
    pub fn mse_mean(&self, noise: &HonestNoise, eta: f64) -> Result<f64> {
        let (pa, num) = self.accumulate(noise, eta)?;
        if pa <= 0.0 {
            return Err(Error::DegeneratePa(
                "mean-estimator MSE conditions on acceptance, which has probability zero".into(),
            ));
        }
        Ok(num / (4.0 * pa))
    }

    /// Both quantities at once, with the zero-acceptance case flagged
    /// instead of erroring.
    pub fn evaluate(&self, noise: &HonestNoise, eta: f64) -> Result<NoiseEvaluation> {
        let (pa, num) = self.accumulate(noise, eta)?;
        Ok(NoiseEvaluation {
            pa,
            mse_mean: if pa > 0.0 { Some(num / (4.0 * pa)) } else { None },
        })
    }

    /// Returns `(pa, mse numerator)` where the numerator is
    /// `2 * sum of per-atom error contributions` and `mse = numerator / (4 pa)`.
    fn accumulate(&self, noise: &HonestNoise, eta: f64) -> Result<(f64, f64)> {
        if !eta.is_finite() || eta < 2.0 {
            return Err(Error::Domain(format!(
                "acceptance threshold must satisfy eta >= 2, got {eta}"
            )));
        }
        let delta = noise.delta();
        let (lo, hi) = noise.band(eta);
        let var = noise.variance();
        let mut pa = 0.0;
        let mut num = 0.0;
        for a in &self.atoms {
            let z = a.z * delta;
            if z < lo {
                pa += 2.0 * a.w;
                num += 2.0 * a.w * (z * z + var);
            } else if z <= hi {
                let k = noise.kernel_eval(eta, z)?;
                pa += 2.0 * a.w * k.k_value;
                num += 2.0 * a.w * k.nu_value;
            }
            // Atoms beyond the band are never accepted and contribute nothing.
        }
        // Quadrature-backed kernels can spill a probability past 1 by a few ulps.
        debug_assert!(pa <= 1.0 + 1e-9);
        Ok((pa.clamp(0.0, 1.0), num))
    }
}

/// Folds a signed atom list into the symmetric mixture with the same
/// acceptance probability and mean-estimator MSE: each signed mass `w` at
/// location `s` contributes `w / 2` at magnitude `|s|`.
pub fn symmetrize(signed_atoms: &[(f64, f64)]) -> Result<DiscreteSymmetricNoise> {
    if signed_atoms.is_empty() {
        return Err(Error::Config("mixture needs at least one atom".into()));
    }
    let mut total = 0.0;
    for &(s, w) in signed_atoms {
        if !s.is_finite() {
            return Err(Error::Config(format!("non-finite atom location {s}")));
        }
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::Config(format!(
                "atom weight must be positive, got {w}"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::Config(format!(
            "signed weights must sum to 1, got {total}"
        )));
    }
    let mut folded: Vec<(f64, f64)> = signed_atoms.iter().map(|&(s, w)| (s.abs(), w)).collect();
    folded.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut atoms: Vec<Atom> = Vec::new();
    for (z, w) in folded {
        match atoms.last_mut() {
            Some(last) if (z - last.z).abs() <= 1e-12 * z.max(1.0) => last.w += 0.5 * w,
            _ => atoms.push(Atom { z, w: 0.5 * w }),
        }
    }
    DiscreteSymmetricNoise::new(atoms)
}

/// Synthesizes the mixture attaining the frontier at `(eta, alpha)`.
///
/// Where the envelope touches the error curve a single magnitude pair at
/// the inverse acceptance kernel of `alpha` suffices; across a hull segment
/// the two endpoint magnitudes are mixed with the weights that land the
/// acceptance probability exactly on `alpha`. The result is re-evaluated
/// through the closed forms and must reproduce `alpha` and the frontier
/// value to 1e-9.
pub fn synthesize_optimal_noise(
    noise: &HonestNoise,
    eta: f64,
    alpha: f64,
    env: &PiecewiseLinearEnvelope,
) -> Result<DiscreteSymmetricNoise> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::Domain(format!(
            "acceptance probability must lie in (0, 1], got {alpha}"
        )));
    }
    let delta = noise.delta();
    let g = match env.tangent_interval(alpha)? {
        TangentInterval::Touch(q) => {
            let z = noise.acceptance_kernel_inv(eta, q)?;
            DiscreteSymmetricNoise::new(vec![Atom {
                z: z / delta,
                w: 0.5,
            }])?
        }
        TangentInterval::Segment(q1, q2) => {
            let z1 = noise.acceptance_kernel_inv(eta, q1)?;
            let z2 = noise.acceptance_kernel_inv(eta, q2)?;
            let w1 = (q2 - alpha) / (2.0 * (q2 - q1));
            let w2 = (alpha - q1) / (2.0 * (q2 - q1));
            // The inverse kernel is decreasing: q1 < q2 puts z2 below z1.
            DiscreteSymmetricNoise::new(vec![
                Atom {
                    z: z2 / delta,
                    w: w2,
                },
                Atom {
                    z: z1 / delta,
                    w: w1,
                },
            ])?
        }
    };
    let eval = g.evaluate(noise, eta)?;
    let beta = env.worst_mse(alpha)?;
    let scale = beta.max(1.0);
    let ok_pa = (eval.pa - alpha).abs() <= 1e-9;
    let ok_mse = match eval.mse_mean {
        Some(m) => (m - beta).abs() <= 1e-9 * scale,
        None => false,
    };
    if !ok_pa || !ok_mse {
        return Err(Error::Internal(format!(
            "synthesized mixture misses the target: pa {} vs {alpha}, mse {:?} vs {beta}",
            eval.pa, eval.mse_mean
        )));
    }
    Ok(g)
}

/// Independent search oracle for the frontier: the maximum mean-estimator
/// MSE over symmetric mixtures supported on at most two magnitudes drawn
/// from a uniform grid over the band, with weights pinned by the mass and
/// acceptance constraints. Pairs that would need a negative weight are
/// discarded.
pub fn brute_force_beta(
    noise: &HonestNoise,
    eta: f64,
    alpha: f64,
    grid_n: usize,
) -> Result<f64> {
    if grid_n < 32 {
        return Err(Error::Domain(format!(
            "support grid needs at least 32 points, got {grid_n}"
        )));
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(Error::Domain(format!(
            "acceptance probability must lie in (0, 1], got {alpha}"
        )));
    }
    let (lo, hi) = noise.band(eta);
    let step = (hi - lo) / (grid_n - 1) as f64;
    let mut ks = Vec::with_capacity(grid_n);
    let mut nus = Vec::with_capacity(grid_n);
    for i in 0..grid_n {
        let z = lo + i as f64 * step;
        ks.push(noise.acceptance_kernel(eta, z)?);
        nus.push(noise.error_kernel(eta, z)?);
    }
    let best = (0..grid_n)
        .into_par_iter()
        .map(|i| {
            let mut local = f64::NEG_INFINITY;
            // Single-magnitude candidate (weight 1/2 on this magnitude):
            // feasible only when the grid hits alpha exactly.
            if (ks[i] - alpha).abs() <= 1e-12 {
                local = 0.5 * nus[i] / (2.0 * alpha);
            }
            for j in (i + 1)..grid_n {
                // ks is decreasing in z, so ks[j] <= ks[i]; feasibility
                // needs ks[j] <= alpha <= ks[i].
                let (khi, klo) = (ks[i], ks[j]);
                if khi <= klo || alpha > khi || alpha < klo {
                    continue;
                }
                let w1 = (alpha - klo) / (2.0 * (khi - klo));
                let w2 = 0.5 - w1;
                if w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let mse = (w1 * nus[i] + w2 * nus[j]) / (2.0 * alpha);
                if mse > local {
                    local = mse;
                }
            }
            local
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Infeasible(format!(
            "no mixture on the {grid_n}-point grid attains acceptance probability {alpha}"
        )))
    }
}

// Serialized form: {"delta_units": true, "atoms": [{"z": ..., "w": ...}]}.
#[derive(Serialize, Deserialize)]
struct NoiseWire {
    delta_units: bool,
    atoms: Vec<Atom>,
}

impl Serialize for DiscreteSymmetricNoise {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        NoiseWire {
            delta_units: true,
            atoms: self.atoms.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DiscreteSymmetricNoise {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let wire = NoiseWire::deserialize(de)?;
        if !wire.delta_units {
            return Err(serde::de::Error::custom(
                "atom locations must be given in delta units",
            ));
        }
        DiscreteSymmetricNoise::new(wire.atoms).map_err(serde::de::Error::custom)
    }
}
