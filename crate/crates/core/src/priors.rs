//! Data misfit, the smoothness, slope-ratio and flatness priors, and the
//! combined acceptance probability.
//!
//! With `f` the misfit and `T`, `Px`, `Py` the prior terms of the candidate
//! (subscript `c`) and the current state (`n`), the three acceptance rules are
//!
//! ```text
//! alpha_c = min(1, exp(f_n - f_c - lambda (T_c - T_n)))   smoothness
//! alpha_s = min(1, exp(f_n - f_c - mu (Px_c + Py_c)))     slope
//! alpha_f = min(1, exp(f_n - f_c - W T_c))                flatness
//! ```
//!
//! and the chain accepts with the largest of the rules whose weight is
//! nonzero. With every weight zero this is plain Metropolis,
//! `min(1, exp(f_n - f_c))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, ConductivityField};

/// Exponents below this underflow `exp` to zero; clamping keeps alpha > 0.
pub const MIN_LOG_ALPHA: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorWeights {
    /// Smoothness weight.
    pub lambda: f64,
    /// Slope-ratio weight.
    pub mu: f64,
    /// Flatness weight.
    pub w: f64,
    /// Likelihood noise scale.
    pub sigma: f64,
    /// Regularizer added to every slope before taking ratios.
    pub epsilon0: f64,
}

impl Default for PriorWeights {
    /// All priors off: plain likelihood Metropolis with `sigma = 0.1`.
    fn default() -> Self {
        Self {
            lambda: 0.0,
            mu: 0.0,
            w: 0.0,
            sigma: 0.1,
            epsilon0: 0.00005,
        }
    }
}

impl PriorWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("W", self.w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("{name} >= 0 required, got {v}")));
            }
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", format!("sigma > 0 required, got {}", self.sigma)));
        }
        if !(self.epsilon0.is_finite() && self.epsilon0 > 0.0) {
            return Err(Error::param(
                "epsilon0",
                format!("epsilon0 > 0 required, got {}", self.epsilon0),
            ));
        }
        Ok(())
    }

    /// Slope terms only enter the slope rule.
    pub(crate) fn needs_slopes(&self) -> bool {
        self.mu != 0.0
    }
}

/// Misfit and prior terms of one conductivity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorEvaluation {
    pub f: f64,
    pub t: f64,
    pub px: f64,
    pub py: f64,
}

/// `f = 1/2 sum_k ((d_k - d_sim_k) / sigma)^2`.
pub fn data_misfit(d: &BoundaryTrace, d_sim: &BoundaryTrace, sigma: f64) -> Result<f64> {
    if d.len() != d_sim.len() {
        return Err(Error::DimensionMismatch(format!(
            "trace lengths {} and {}",
            d.len(),
            d_sim.len()
        )));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::param("sigma", format!("sigma > 0 required, got {sigma}")));
    }
    Ok(misfit_values(d.values(), d_sim.values(), sigma))
}

pub(crate) fn misfit_values(d: &[f64], d_sim: &[f64], sigma: f64) -> f64 {
    let inv = 1.0 / sigma;
    0.5 * d
        .iter()
        .zip(d_sim)
        .map(|(a, b)| {
            let r = (a - b) * inv;
            r * r
        })
        .sum::<f64>()
}

/// Sum of squared differences between horizontally and vertically adjacent
/// nodes.
pub fn smoothness_term(k: &ConductivityField) -> f64 {
    let mesh = k.mesh();
    smoothness_values(k.values(), mesh.m(), mesh.n())
}

pub(crate) fn smoothness_values(k: &[f64], m: usize, n: usize) -> f64 {
    let mut total = 0.0;
    for j in 0..n {
        let row = &k[j * m..(j + 1) * m];
        for pair in row.windows(2) {
            let d = pair[1] - pair[0];
            total += d * d;
        }
    }
    for j in 1..n {
        let (lower, upper) = (&k[(j - 1) * m..j * m], &k[j * m..(j + 1) * m]);
        for (a, b) in lower.iter().zip(upper) {
            let d = b - a;
            total += d * d;
        }
    }
    total
}

/// Slope-ratio sums in x and y.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlopeTerms {
    pub px: f64,
    pub py: f64,
    /// Summands whose denominator `S + epsilon0` was exactly zero and were
    /// re-evaluated with a doubled regularizer.
    pub degenerate: u64,
}

/// `Px = sum |(S(i)+e)/(S(i+1)+e) - (S(i+1)+e)/(S(i+2)+e)|` over consecutive
/// x-slopes `S(i) = K(i+1, j) - K(i, j)`, and likewise `Py` along y.
pub fn slope_terms(k: &ConductivityField, epsilon0: f64) -> Result<SlopeTerms> {
    if epsilon0.is_nan() || epsilon0 <= 0.0 {
        return Err(Error::param(
            "epsilon0",
            format!("epsilon0 > 0 required, got {epsilon0}"),
        ));
    }
    let mesh = k.mesh();
    Ok(slope_values(k.values(), mesh.m(), mesh.n(), epsilon0))
}

pub(crate) fn slope_values(k: &[f64], m: usize, n: usize, epsilon0: f64) -> SlopeTerms {
    let mut out = SlopeTerms::default();
    // x: along each row
    for j in 0..n {
        let row = &k[j * m..(j + 1) * m];
        for i in 0..m - 3 {
            let s0 = row[i + 1] - row[i];
            let s1 = row[i + 2] - row[i + 1];
            let s2 = row[i + 3] - row[i + 2];
            out.px += ratio_gap(s0, s1, s2, epsilon0, &mut out.degenerate);
        }
    }
    // y: along each column
    for j in 0..n - 3 {
        for i in 0..m {
            let at = |jj: usize| k[jj * m + i];
            let s0 = at(j + 1) - at(j);
            let s1 = at(j + 2) - at(j + 1);
            let s2 = at(j + 3) - at(j + 2);
            out.py += ratio_gap(s0, s1, s2, epsilon0, &mut out.degenerate);
        }
    }
    out
}

#[inline]
fn ratio_gap(s0: f64, s1: f64, s2: f64, epsilon0: f64, degenerate: &mut u64) -> f64 {
    let mut eps = epsilon0;
    loop {
        let (a, b, c) = (s0 + eps, s1 + eps, s2 + eps);
        if b != 0.0 && c != 0.0 {
            return (a / b - b / c).abs();
        }
        *degenerate += 1;
        eps *= 2.0;
    }
}

/// Log of the combined acceptance probability, clamped below at
/// [`MIN_LOG_ALPHA`].
#[allow(clippy::too_many_arguments)]
pub fn log_acceptance(
    f_n: f64,
    f_c: f64,
    t_n: f64,
    t_c: f64,
    px_c: f64,
    py_c: f64,
    weights: &PriorWeights,
) -> f64 {
    let base = f_n - f_c;
    let mut best = f64::NEG_INFINITY;
    if weights.lambda != 0.0 {
        best = best.max(base - weights.lambda * (t_c - t_n));
    }
    if weights.mu != 0.0 {
        best = best.max(base - weights.mu * (px_c + py_c));
    }
    if weights.w != 0.0 {
        best = best.max(base - weights.w * t_c);
    }
    if best == f64::NEG_INFINITY {
        best = base;
    }
    best.clamp(MIN_LOG_ALPHA, 0.0)
}

/// `max(alpha_c, alpha_s, alpha_f)` over the enabled rules, always in `(0, 1]`.
#[allow(clippy::too_many_arguments)]
pub fn acceptance_probability(
    f_n: f64,
    f_c: f64,
    t_n: f64,
    t_c: f64,
    px_c: f64,
    py_c: f64,
    weights: &PriorWeights,
) -> f64 {
    log_acceptance(f_n, f_c, t_n, t_c, px_c, py_c, weights).exp()
}
