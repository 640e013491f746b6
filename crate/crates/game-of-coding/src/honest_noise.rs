//! Honest-node noise distributions and their band kernels.
//!
//! The honest node reports the true value plus a symmetric, bounded noise
//! with support `[-delta, delta]` and a strictly increasing CDF. Two
//! representations are supported:
//!
//! - `Uniform`: closed forms throughout, no quadrature.
//! - `Tabulated`: a piecewise-linear density given by knots on `[0, delta]`
//!   and mirrored to the negative half by symmetry. Integrals use composite
//!   Simpson rule split at the knots (exact for the polynomial integrands
//!   that arise here) with adaptive refinement as a safety net.
//!
//! For an acceptance threshold `eta >= 2`, an adversary atom at magnitude
//! `z` inside the band `[(eta-1)*delta, (eta+1)*delta]` is accepted exactly
//! when the honest noise lands in `[z - eta*delta, delta]`. Two kernels
//! describe that regime:
//!
//! - the acceptance kernel: mass of the honest noise over that interval,
//! - the error kernel: the shifted second moment over the same interval,
//!   which is the atom's (unnormalized) contribution to the mean-estimator
//!   squared error.
//!
//! Composing the error kernel with the inverse acceptance kernel gives the
//! per-atom error as a function of the acceptance level `q` in `[0, 1]`,
//! the curve whose upper concave envelope drives everything downstream.

use crate::error::{Error, Result};
use std::path::Path;

/// Relative slack accepted when classifying a point against the band edges.
const BAND_EDGE_TOL: f64 = 1e-9;

/// Target absolute error for adaptive quadrature on tabulated densities.
const QUAD_TOL: f64 = 1e-10;

/// Bisection interval width for tabulated inverse-CDF queries.
const BISECT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Kind {
    Uniform,
    Tabulated {
        /// Knot abscissae on `[0, delta]`, strictly ascending, `xs[0] == 0`,
        /// `xs[last] == delta`.
        xs: Vec<f64>,
        /// Density values at the knots, nonnegative.
        fs: Vec<f64>,
        /// CDF values at the knots for the positive half, starting at 1/2.
        cdf: Vec<f64>,
    },
}

/// A symmetric bounded honest-noise distribution.
#[derive(Debug, Clone)]
pub struct HonestNoise {
    delta: f64,
    variance: f64,
    kind: Kind,
}

/// Both band kernels evaluated at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub eta: f64,
    pub z: f64,
    /// Acceptance kernel value, in `[0, 1]`.
    pub k_value: f64,
    /// Error kernel value, nonnegative.
    pub nu_value: f64,
}

impl HonestNoise {
    /// Uniform noise on `[-delta, delta]`.
    pub fn uniform(delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::Config(format!(
                "support half-width must be positive and finite, got {delta}"
            )));
        }
        Ok(HonestNoise {
            delta,
            variance: delta * delta / 3.0,
            kind: Kind::Uniform,
        })
    }

    /// Piecewise-linear density from `(x, density)` knots on `[0, delta]`.
    ///
    /// The table describes the positive half only; the negative half is the
    /// mirror image. The knots must start at 0, end at `delta`, be strictly
    /// ascending in `x`, carry nonnegative densities, integrate to 1 over
    /// the full support within 1e-9, and leave no zero-mass segment (a flat
    /// CDF stretch would make the inverse kernel ill-defined).
    pub fn tabulated(delta: f64, knots: &[(f64, f64)]) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::Config(format!(
                "support half-width must be positive and finite, got {delta}"
            )));
        }
        if knots.len() < 2 {
            return Err(Error::Config(
                "tabulated density needs at least two knots".into(),
            ));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let fs: Vec<f64> = knots.iter().map(|k| k.1).collect();
        if xs[0] != 0.0 {
            return Err(Error::Config(format!(
                "first knot must sit at x = 0, got {}",
                xs[0]
            )));
        }
        let last = *xs.last().unwrap();
        if (last - delta).abs() > 1e-12 * delta.max(1.0) {
            return Err(Error::Config(format!(
                "last knot must sit at x = delta = {delta}, got {last}"
            )));
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(
                    "knot abscissae must be strictly ascending".into(),
                ));
            }
        }
        if fs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(
                "densities must be finite and nonnegative".into(),
            ));
        }
        // Segment masses under linear interpolation (trapezoid is exact).
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.5);
        for i in 1..xs.len() {
            let seg = 0.5 * (fs[i - 1] + fs[i]) * (xs[i] - xs[i - 1]);
            if seg <= 0.0 {
                return Err(Error::Config(format!(
                    "zero-mass segment [{}, {}]: the CDF must be strictly increasing",
                    xs[i - 1],
                    xs[i]
                )));
            }
            cdf.push(cdf[i - 1] + seg);
        }
        let total = 2.0 * (cdf.last().unwrap() - 0.5);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "density must integrate to 1 over [-delta, delta]; got {total}"
            )));
        }
        let mut noise = HonestNoise {
            delta,
            variance: 0.0,
            kind: Kind::Tabulated { xs, fs, cdf },
        };
        // Second moment by quadrature, fixed at construction.
        noise.variance = 2.0 * noise.integrate(|x| x * x * noise.pdf(x), 0.0, delta);
        Ok(noise)
    }

    /// Load a tabulated density from a two-column CSV of `x, density` rows
    /// with `x` ascending in `[0, delta]`. A non-numeric first line is
    /// treated as a header and skipped.
    pub fn from_csv(delta: f64, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut knots = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Config(format!(
                        "{}:{}: expected two comma-separated columns",
                        path.display(),
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(f)) => knots.push((x, f)),
                _ if lineno == 0 => continue, // header
                _ => {
                    return Err(Error::Config(format!(
                        "{}:{}: could not parse '{a}, {b}' as numbers",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
        Self::tabulated(delta, &knots)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Noise variance, `delta^2 / 3` exactly for the uniform case.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, Kind::Uniform)
    }

    /// Density at `x`, zero outside `[-delta, delta]`.
    pub fn pdf(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax > self.delta {
            return 0.0;
        }
        match &self.kind {
            Kind::Uniform => 0.5 / self.delta,
            Kind::Tabulated { xs, fs, .. } => {
                let i = segment_index(xs, ax);
                let t = (ax - xs[i]) / (xs[i + 1] - xs[i]);
                fs[i] + t * (fs[i + 1] - fs[i])
            }
        }
    }

    /// CDF at `x`, clamped to `[0, 1]` outside the support.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -self.delta {
            return 0.0;
        }
        if x >= self.delta {
            return 1.0;
        }
        match &self.kind {
            Kind::Uniform => 0.5 + 0.5 * x / self.delta,
            Kind::Tabulated { xs, fs, cdf } => {
                // F(-x) = 1 - F(x) by symmetry; integrate the positive half.
                let ax = x.abs();
                let i = segment_index(xs, ax);
                let h = ax - xs[i];
                let slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i]);
                let partial = fs[i] * h + 0.5 * slope * h * h;
                let pos = cdf[i] + partial;
                if x >= 0.0 {
                    pos
                } else {
                    1.0 - pos
                }
            }
        }
    }

    /// Inverse CDF for `p` in `[0, 1]`.
    pub fn cdf_inv(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "CDF argument must lie in [0, 1], got {p}"
            )));
        }
        match &self.kind {
            Kind::Uniform => Ok((2.0 * p - 1.0) * self.delta),
            Kind::Tabulated { .. } => {
                // Strictly increasing CDF, so plain bisection converges.
                let (mut lo, mut hi) = (-self.delta, self.delta);
                while hi - lo > BISECT_TOL {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// Lower and upper band edges `((eta-1)*delta, (eta+1)*delta)`.
    pub fn band(&self, eta: f64) -> (f64, f64) {
        ((eta - 1.0) * self.delta, (eta + 1.0) * self.delta)
    }

    fn check_eta(&self, eta: f64) -> Result<()> {
        if !eta.is_finite() || eta < 2.0 {
            return Err(Error::Domain(format!(
                "acceptance threshold must satisfy eta >= 2, got {eta}"
            )));
        }
        Ok(())
    }

    fn check_band(&self, eta: f64, z: f64) -> Result<f64> {
        self.check_eta(eta)?;
        let (lo, hi) = self.band(eta);
        let slack = BAND_EDGE_TOL * (1.0 + z.abs().max(hi));
        if z < lo - slack || z > hi + slack {
            return Err(Error::Domain(format!(
                "z = {z} lies outside the band [{lo}, {hi}] for eta = {eta}"
            )));
        }
        Ok(z.clamp(lo, hi))
    }

    /// Acceptance kernel: the honest-noise mass on `[z - eta*delta, delta]`.
    ///
    /// Equals the probability that an adversary atom at magnitude `z` in the
    /// band is accepted. Strictly decreasing in `z`, 1 at the lower band
    /// edge, 0 at the upper one.
    pub fn acceptance_kernel(&self, eta: f64, z: f64) -> Result<f64> {
        let z = self.check_band(eta, z)?;
        match &self.kind {
            Kind::Uniform => Ok(((eta + 1.0) * self.delta - z) / (2.0 * self.delta)),
            Kind::Tabulated { .. } => Ok(1.0 - self.cdf(z - eta * self.delta)),
        }
    }

    /// Inverse of the acceptance kernel on `[0, 1]`.
    pub fn acceptance_kernel_inv(&self, eta: f64, q: f64) -> Result<f64> {
        self.check_eta(eta)?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!(
                "acceptance level must lie in [0, 1], got {q}"
            )));
        }
        match &self.kind {
            Kind::Uniform => Ok((eta + 1.0 - 2.0 * q) * self.delta),
            Kind::Tabulated { .. } => Ok(eta * self.delta + self.cdf_inv(1.0 - q)?),
        }
    }

    /// Error kernel: the shifted second moment of the honest noise over the
    /// accepted interval, `integral of (x+z)^2 f(x) over [z - eta*delta, delta]`.
    pub fn error_kernel(&self, eta: f64, z: f64) -> Result<f64> {
        let z = self.check_band(eta, z)?;
        match &self.kind {
            Kind::Uniform => {
                let a = self.delta + z;
                let b = 2.0 * z - eta * self.delta;
                Ok(((a * a * a) - (b * b * b)) / (6.0 * self.delta))
            }
            Kind::Tabulated { .. } => {
                let lo = z - eta * self.delta;
                Ok(self.integrate(|x| (x + z) * (x + z) * self.pdf(x), lo, self.delta))
            }
        }
    }

    /// Both kernels at once.
    pub fn kernel_eval(&self, eta: f64, z: f64) -> Result<KernelEval> {
        Ok(KernelEval {
            eta,
            z,
            k_value: self.acceptance_kernel(eta, z)?,
            nu_value: self.error_kernel(eta, z)?,
        })
    }

    /// Per-atom squared-error contribution at acceptance level `q`: the
    /// error kernel composed with the inverse acceptance kernel. Zero at
    /// `q = 0`, nonnegative everywhere.
    pub fn error_at_acceptance(&self, eta: f64, q: f64) -> Result<f64> {
        self.check_eta(eta)?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!(
                "acceptance level must lie in [0, 1], got {q}"
            )));
        }
        match &self.kind {
            Kind::Uniform => {
                let d2 = self.delta * self.delta;
                let a = eta + 2.0 - 2.0 * q;
                let b = eta + 2.0 - 4.0 * q;
                Ok(d2 * ((a * a * a) - (b * b * b)) / 6.0)
            }
            Kind::Tabulated { .. } => {
                let z = self.acceptance_kernel_inv(eta, q)?;
                self.error_kernel(eta, z)
            }
        }
    }

    /// Derivative of `error_at_acceptance` at `q = 0`; the small-acceptance
    /// limit of the frontier is this over 4.
    pub(crate) fn error_slope_at_zero(&self, eta: f64) -> f64 {
        match &self.kind {
            Kind::Uniform => {
                let s = (eta + 2.0) * self.delta;
                s * s
            }
            Kind::Tabulated { .. } => {
                // One-sided difference; the curve is smooth at 0.
                let q = 1e-7;
                let h = self
                    .error_at_acceptance(eta, q)
                    .expect("q inside [0, 1]");
                h / q
            }
        }
    }

    /// Adaptive composite Simpson quadrature split at the density knots.
    fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut cuts: Vec<f64> = vec![lo];
        if let Kind::Tabulated { xs, .. } = &self.kind {
            // The integrand is polynomial between knots of |x|; split there.
            let mut marks: Vec<f64> = xs.iter().flat_map(|&x| [x, -x]).collect();
            marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for m in marks {
                if m > lo && m < hi {
                    cuts.push(m);
                }
            }
        }
        cuts.push(hi);
        cuts.windows(2)
            .map(|w| adaptive_simpson(&f, w[0], w[1], QUAD_TOL))
            .sum()
    }
}

fn segment_index(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => i.saturating_sub(1).min(xs.len() - 2),
    }
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, whole: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let left = simpson(f, a, c);
        let right = simpson(f, c, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, c, tol / 2.0, left, depth - 1)
                + recurse(f, c, b, tol / 2.0, right, depth - 1)
        }
    }
    recurse(f, a, b, tol, simpson(f, a, b), 40)
}
