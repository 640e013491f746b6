//! Upper concave envelope of the per-atom error curve and the frontier it
//! induces.
//!
//! For a fixed threshold `eta`, sampling `error_at_acceptance` on `[0, 1]`
//! and taking the upper concave hull of the samples yields a piecewise
//! linear majorant. The worst mean-estimator MSE an adversary can force at
//! acceptance probability `alpha` is that majorant divided by `4 * alpha`,
//! and the gap to the fully optimal estimator is bounded by
//! `(eta^2 + 4) * (eta + 2) * delta^3 / m` for a prior half-width `m`.
//!
//! Hull construction is the usual monotone chain over the sampled points.
//! For uniform honest noise below the concavity threshold `8/3` the exact
//! tangency abscissa `(9*eta + 4) / 28` is inserted as a sample so the hull
//! segment endpoints carry no sampling error.

use crate::error::{Error, Result};
use crate::honest_noise::HonestNoise;

/// Acceptance levels below this use the analytic small-alpha limit of the
/// frontier instead of dividing the envelope by `4 * alpha`.
pub const SMALL_ALPHA_CUTOFF: f64 = 1e-6;

/// Concavity threshold for uniform honest noise: the error curve is concave
/// on all of `[0, 1]` exactly when `eta >= 8/3`.
const UNIFORM_CONCAVITY_ETA: f64 = 8.0 / 3.0;

/// Where the envelope sits relative to the curve at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TangentInterval {
    /// The envelope coincides with the curve at this acceptance level.
    Touch(f64),
    /// The query falls inside a hull segment `[q1, q2]` whose endpoints
    /// touch the curve.
    Segment(f64, f64),
}

/// One point of the worst-case frontier, with both bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub eta: f64,
    pub alpha: f64,
    /// Worst mean-estimator MSE at acceptance floor `alpha`.
    pub beta: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    /// `(eta^2 + 4) * (eta + 2) * delta^3 / m`; zero in asymptotic mode.
    pub gap: f64,
}

/// Piecewise-linear upper concave envelope of the per-atom error curve.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearEnvelope {
    eta: f64,
    delta: f64,
    /// The honest noise the curve was sampled from. Frontier queries
    /// re-evaluate the curve through it so touching regions carry no
    /// interpolation error.
    noise: HonestNoise,
    /// `(q, envelope value)` knots, strictly ascending in `q`, spanning [0, 1].
    knots: Vec<(f64, f64)>,
    /// Curve samples at the knot abscissae.
    curve: Vec<f64>,
    /// True where the envelope touches the curve.
    hull_vertex_flags: Vec<bool>,
    /// Envelope slope at `q = 0`, used for the small-alpha frontier limit.
    slope_at_zero: f64,
}

/// Builds the envelope from `n_samples` uniform samples on `[0, 1]`.
pub fn build_envelope(
    noise: &HonestNoise,
    eta: f64,
    n_samples: usize,
) -> Result<PiecewiseLinearEnvelope> {
    build_envelope_with(noise, eta, n_samples, &[])
}

/// Like [`build_envelope`], with extra acceptance levels inserted into the
/// sample grid so downstream queries at exactly those levels carry no
/// interpolation error.
pub fn build_envelope_with(
    noise: &HonestNoise,
    eta: f64,
    n_samples: usize,
    extra_levels: &[f64],
) -> Result<PiecewiseLinearEnvelope> {
    if n_samples < 16 {
        return Err(Error::Domain(format!(
            "envelope needs at least 16 samples, got {n_samples}"
        )));
    }
    if !eta.is_finite() || eta < 2.0 {
        return Err(Error::Domain(format!(
            "acceptance threshold must satisfy eta >= 2, got {eta}"
        )));
    }
    let mut qs: Vec<f64> = (0..n_samples)
        .map(|i| i as f64 / (n_samples - 1) as f64)
        .collect();
    if noise.is_uniform() && eta < UNIFORM_CONCAVITY_ETA {
        // Exact tangency of the closing hull segment for uniform noise.
        qs.push((9.0 * eta + 4.0) / 28.0);
    }
    for &q in extra_levels {
        if (0.0..=1.0).contains(&q) {
            qs.push(q);
        }
    }
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    qs.dedup();

    let curve: Vec<f64> = qs
        .iter()
        .map(|&q| noise.error_at_acceptance(eta, q))
        .collect::<Result<_>>()?;
    let (env, flags) = hull_values(&qs, &curve);
    let knots: Vec<(f64, f64)> = qs.iter().cloned().zip(env).collect();
    let slope_at_zero = noise.error_slope_at_zero(eta);
    Ok(PiecewiseLinearEnvelope {
        eta,
        delta: noise.delta(),
        noise: noise.clone(),
        knots,
        curve,
        hull_vertex_flags: flags,
        slope_at_zero,
    })
}

/// Upper concave hull by monotone chain. Returns the hull's value at every
/// sample abscissa and a flag marking the chain vertices, where the hull
/// anchors to the curve exactly.
fn hull_values(qs: &[f64], hs: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let n = qs.len();
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while stack.len() >= 2 {
            let a = stack[stack.len() - 2];
            let b = stack[stack.len() - 1];
            // Keep b only if it rises above the chord a -> i.
            let cross = (qs[b] - qs[a]) * (hs[i] - hs[a]) - (hs[b] - hs[a]) * (qs[i] - qs[a]);
            if cross >= 0.0 {
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(i);
    }
    let mut env = vec![0.0; n];
    let mut flags = vec![false; n];
    for &i in &stack {
        env[i] = hs[i];
        flags[i] = true;
    }
    for w in stack.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dq = qs[b] - qs[a];
        for i in (a + 1)..b {
            env[i] = hs[a] + (qs[i] - qs[a]) / dq * (hs[b] - hs[a]);
        }
    }
    (env, flags)
}

impl PiecewiseLinearEnvelope {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn hull_vertex_flags(&self) -> &[bool] {
        &self.hull_vertex_flags
    }

    /// Curve sample at knot index `i` (the value the envelope majorizes).
    pub fn curve_value(&self, i: usize) -> f64 {
        self.curve[i]
    }

    fn segment_index(&self, q: f64) -> usize {
        let n = self.knots.len();
        match self
            .knots
            .binary_search_by(|k| k.0.partial_cmp(&q).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Envelope value at `q` by linear interpolation between knots.
    pub fn value(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!(
                "acceptance level must lie in [0, 1], got {q}"
            )));
        }
        let i = self.segment_index(q);
        let (q0, v0) = self.knots[i];
        let (q1, v1) = self.knots[i + 1];
        if q <= q0 {
            return Ok(v0);
        }
        if q >= q1 {
            return Ok(v1);
        }
        Ok(v0 + (q - q0) / (q1 - q0) * (v1 - v0))
    }

    /// Whether the envelope touches the curve at `alpha`, or the hull
    /// segment that spans it.
    pub fn tangent_interval(&self, alpha: f64) -> Result<TangentInterval> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(Error::Domain(format!(
                "acceptance probability must lie in (0, 1], got {alpha}"
            )));
        }
        let i = self.segment_index(alpha);
        let exact = self.knots[i].0 == alpha || self.knots[i + 1].0 == alpha;
        if exact {
            let j = if self.knots[i].0 == alpha { i } else { i + 1 };
            if self.hull_vertex_flags[j] {
                return Ok(TangentInterval::Touch(alpha));
            }
        } else if self.hull_vertex_flags[i] && self.hull_vertex_flags[i + 1] {
            // Both bracketing knots touch, so the curve and the hull agree
            // along this stretch up to sampling resolution.
            return Ok(TangentInterval::Touch(alpha));
        }
        let q1 = (0..=i)
            .rev()
            .find(|&j| self.hull_vertex_flags[j])
            .map(|j| self.knots[j].0)
            .ok_or_else(|| Error::Internal("no touching knot left of query".into()))?;
        let q2 = (i + 1..self.knots.len())
            .find(|&j| self.hull_vertex_flags[j])
            .map(|j| self.knots[j].0)
            .ok_or_else(|| Error::Internal("no touching knot right of query".into()))?;
        Ok(TangentInterval::Segment(q1, q2))
    }

    /// Worst mean-estimator MSE at acceptance floor `alpha`: the envelope
    /// divided by `4 * alpha`, with the analytic limit below
    /// [`SMALL_ALPHA_CUTOFF`].
    ///
    /// Where the hull touches the curve the value is recomputed through the
    /// noise kernels; across a hull segment it is the exact chord between
    /// the touching endpoints. Knot interpolation is never the limiting
    /// precision here.
    pub fn worst_mse(&self, alpha: f64) -> Result<f64> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::Domain(format!(
                "acceptance probability must be positive, got {alpha}"
            )));
        }
        if alpha > 1.0 {
            return Err(Error::Domain(format!(
                "acceptance probability must not exceed 1, got {alpha}"
            )));
        }
        if alpha < SMALL_ALPHA_CUTOFF {
            return Ok(self.slope_at_zero / 4.0);
        }
        let value = match self.tangent_interval(alpha)? {
            TangentInterval::Touch(_) => self.noise.error_at_acceptance(self.eta, alpha)?,
            TangentInterval::Segment(q1, q2) => {
                let h1 = self.noise.error_at_acceptance(self.eta, q1)?;
                let h2 = self.noise.error_at_acceptance(self.eta, q2)?;
                h1 + (alpha - q1) / (q2 - q1) * (h2 - h1)
            }
        };
        Ok(value / (4.0 * alpha))
    }

    /// Two-sided frontier bounds at `alpha`. With a finite prior half-width
    /// `m` the lower bound backs off by the vanishing-gap term; `None`
    /// means asymptotic mode with a zero gap.
    pub fn bounds(&self, alpha: f64, m: Option<f64>) -> Result<FrontierPoint> {
        let beta = self.worst_mse(alpha)?;
        let gap = match m {
            None => 0.0,
            Some(m) => {
                if m <= (self.eta + 2.0) * self.delta || m.is_nan() {
                    return Err(Error::Config(format!(
                        "prior half-width m = {m} must exceed (eta + 2) * delta = {}",
                        (self.eta + 2.0) * self.delta
                    )));
                }
                (self.eta * self.eta + 4.0) * (self.eta + 2.0) * self.delta.powi(3) / m
            }
        };
        Ok(FrontierPoint {
            eta: self.eta,
            alpha,
            beta,
            c_lower: (beta - gap).max(0.0),
            c_upper: beta,
            gap,
        })
    }
}
