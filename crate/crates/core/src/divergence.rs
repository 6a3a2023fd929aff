//! f-divergences between discrete distributions.
//!
//! For a convex generator `f` with `f(1) = 0`,
//! `D(p, q) = sum_k q_k f(p_k / q_k)`. Boundary terms follow the usual
//! lower semi-continuous extension:
//!
//! - `p_k = q_k = 0` contributes `0`,
//! - `p_k = 0 < q_k` contributes `q_k * f(0+)`,
//! - `q_k = 0 < p_k` contributes `p_k * lim_{t -> inf} f(t) / t`.
//!
//! Either limit may be `+inf`; infinities are carried as `f64::INFINITY`.
//!
//! The per-row perspective `h_k(r) = m f(r_k / (p0_k m))` with `m = sum(r)`
//! (and `h_k(0) = 0`) rewrites the privacy cost of a plan as
//! `sum_{i,k} p0_k h_k(gamma_i)`; see [`perspective_h`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::DiscreteDistribution;

type Generator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Kl,
    ReverseKl,
    TotalVariation,
    /// `(t^a - 1) / (a - 1)` with `a > 1`.
    Alpha(f64),
    Custom {
        f: Generator,
        f_at_zero: f64,
        slope_at_infinity: f64,
    },
}

/// An f-divergence, identified by its convex generator.
#[derive(Clone)]
pub struct FDivergence {
    name: String,
    kind: Kind,
}

impl fmt::Debug for FDivergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FDivergence").field("name", &self.name).finish()
    }
}

impl fmt::Display for FDivergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FDivergence {
    /// Kullback-Leibler, `f(t) = t log t`.
    pub fn kl() -> Self {
        Self {
            name: "kl".into(),
            kind: Kind::Kl,
        }
    }

    /// Reverse Kullback-Leibler, `f(t) = -log t`.
    pub fn reverse_kl() -> Self {
        Self {
            name: "reverse_kl".into(),
            kind: Kind::ReverseKl,
        }
    }

    /// Total variation, `f(t) = |t - 1| / 2`.
    pub fn total_variation() -> Self {
        Self {
            name: "tv".into(),
            kind: Kind::TotalVariation,
        }
    }

    /// The alpha-divergence `f(t) = (t^a - 1) / (a - 1)`.
    ///
    /// Only `a >= 1` is accepted; `a = 1` is the KL limit.
    pub fn alpha(a: f64) -> Result<Self> {
        if !a.is_finite() || a < 1.0 {
            return Err(Error::InvalidInput(format!(
                "alpha-divergence requires a finite alpha >= 1, got {a}"
            )));
        }
        if a == 1.0 {
            return Ok(Self::kl());
        }
        Ok(Self {
            name: format!("alpha:{a}"),
            kind: Kind::Alpha(a),
        })
    }

    /// A user-supplied generator. Nothing is checked here; call
    /// [`check_convexity`] before trusting it.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_at_zero: f64,
        slope_at_infinity: f64,
    ) -> Self {
        Self {
            name: name.into(),
            kind: Kind::Custom {
                f: Arc::new(f),
                f_at_zero,
                slope_at_infinity,
            },
        }
    }

    /// Parses `"kl" | "reverse_kl" | "tv" | "alpha:<value>"`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "kl" => Ok(Self::kl()),
            "reverse_kl" => Ok(Self::reverse_kl()),
            "tv" => Ok(Self::total_variation()),
            other => match other.strip_prefix("alpha:") {
                Some(value) => {
                    let a: f64 = value.parse().map_err(|_| Error::UnknownDivergence(other.to_string()))?;
                    Self::alpha(a)
                }
                None => Err(Error::UnknownDivergence(other.to_string())),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_kl(&self) -> bool {
        matches!(self.kind, Kind::Kl)
    }

    /// Whether the generator is differentiable on `(0, inf)`.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, Kind::TotalVariation | Kind::Custom { .. })
    }

    /// The generator on `t > 0`. At `t = 0` returns `f(0+)`.
    pub fn f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.f_at_zero();
        }
        match &self.kind {
            Kind::Kl => t * t.ln(),
            Kind::ReverseKl => -t.ln(),
            Kind::TotalVariation => 0.5 * (t - 1.0).abs(),
            Kind::Alpha(a) => (t.powf(*a) - 1.0) / (a - 1.0),
            Kind::Custom { f, .. } => f(t),
        }
    }

    /// `lim_{t -> 0+} f(t)`, possibly `+inf`.
    pub fn f_at_zero(&self) -> f64 {
        match &self.kind {
            Kind::Kl => 0.0,
            Kind::ReverseKl => f64::INFINITY,
            Kind::TotalVariation => 0.5,
            Kind::Alpha(a) => -1.0 / (a - 1.0),
            Kind::Custom { f_at_zero, .. } => *f_at_zero,
        }
    }

    /// `lim_{t -> inf} f(t) / t`, possibly `+inf`.
    pub fn slope_at_infinity(&self) -> f64 {
        match &self.kind {
            Kind::Kl | Kind::Alpha(_) => f64::INFINITY,
            Kind::ReverseKl => 0.0,
            Kind::TotalVariation => 0.5,
            Kind::Custom { slope_at_infinity, .. } => *slope_at_infinity,
        }
    }

    /// A (sub)derivative of `f` at `t > 0`. For `t <= 0` the derivative at
    /// the smallest positive normal is returned, which keeps gradients finite.
    pub fn derivative(&self, t: f64) -> f64 {
        let t = t.max(f64::MIN_POSITIVE);
        match &self.kind {
            Kind::Kl => t.ln() + 1.0,
            Kind::ReverseKl => -1.0 / t,
            Kind::TotalVariation => {
                if t > 1.0 {
                    0.5
                } else if t < 1.0 {
                    -0.5
                } else {
                    0.0
                }
            }
            Kind::Alpha(a) => a / (a - 1.0) * t.powf(a - 1.0),
            Kind::Custom { f, .. } => {
                let h = 1e-6 * t.max(1e-3);
                (f(t + h) - f((t - h).max(0.5 * t))) / (t + h - (t - h).max(0.5 * t))
            }
        }
    }

    /// Huber smoothing of `|u|` with width `mu` (value and derivative);
    /// `mu = 0` gives `|u|` with derivative 0 at the kink.
    pub(crate) fn smoothed_tv_abs(u: f64, mu: f64) -> (f64, f64) {
        if mu <= 0.0 {
            let d = if u > 0.0 {
                1.0
            } else if u < 0.0 {
                -1.0
            } else {
                0.0
            };
            return (u.abs(), d);
        }
        if u.abs() <= mu {
            (u * u / (2.0 * mu) + mu / 2.0, u / mu)
        } else {
            (u.abs(), u.signum())
        }
    }

    pub(crate) fn is_total_variation(&self) -> bool {
        matches!(self.kind, Kind::TotalVariation)
    }

    pub(crate) fn alpha_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Alpha(a) => Some(a),
            _ => None,
        }
    }

    pub(crate) fn is_reverse_kl(&self) -> bool {
        matches!(self.kind, Kind::ReverseKl)
    }
}

/// One term `q f(p / q)` with the boundary conventions.
fn term(div: &FDivergence, p: f64, q: f64) -> f64 {
    match (p > 0.0, q > 0.0) {
        (false, false) => 0.0,
        (false, true) => {
            let f0 = div.f_at_zero();
            if f0.is_infinite() {
                f0
            } else {
                q * f0
            }
        }
        (true, false) => {
            let s = div.slope_at_infinity();
            if s.is_infinite() {
                s
            } else {
                p * s
            }
        }
        (true, true) => q * div.f(p / q),
    }
}

/// `D(p, q)` on weight vectors over a common support.
pub fn divergence_weights(div: &FDivergence, p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "divergence over different supports");
    p.iter().zip(q).map(|(&pk, &qk)| term(div, pk, qk)).sum()
}

/// `D(p, q)` between two distributions over the same atoms.
pub fn divergence(div: &FDivergence, p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    divergence_weights(div, p.weights(), q.weights())
}

/// `h_k(r) = m f(r_k / (p0_k m))`, `m = sum(r)`, with `h_k(0) = 0` and
/// `m f(0+)` when `r_k = 0 < m`.
pub fn perspective_h(div: &FDivergence, row: &[f64], prior: &[f64], k: usize) -> f64 {
    let m: f64 = row.iter().sum();
    if m <= 0.0 {
        return 0.0;
    }
    if row[k] <= 0.0 {
        let f0 = div.f_at_zero();
        return if f0.is_infinite() { f0 } else { m * f0 };
    }
    m * div.f(row[k] / (prior[k] * m))
}

/// `sum_k p0_k h_k(r)`, the privacy cost carried by one action row.
pub fn row_privacy(div: &FDivergence, row: &[f64], prior: &[f64]) -> f64 {
    (0..row.len())
        .map(|k| prior[k] * perspective_h(div, row, prior, k))
        .sum()
}

/// Value and gradient of `sum_k p0_k h_k(r)`, smoothed when `mu > 0`.
///
/// For total variation `|u|` is replaced by its Huber smoothing of width
/// `mu`. Otherwise the row mass `m` becomes `s = m + mu` inside the
/// perspective and `f` is replaced below `t = mu` by its tangent there,
/// which bounds the curvature near empty cells and fading rows while
/// keeping the function convex.
///
/// With `t_k = r_k / (p0_k s)`,
/// `d/dr_j = sum_k p0_k f(t_k) + f'(t_j) - sum_k (r_k / s) f'(t_k)`.
/// Without smoothing the gradient at a zero row is taken in the direction
/// of the prior, where it vanishes.
pub(crate) fn row_privacy_grad(div: &FDivergence, row: &[f64], prior: &[f64], mu: f64, grad: &mut [f64]) -> f64 {
    let m: f64 = row.iter().sum();
    if div.is_total_variation() {
        // 0.5 * sum_k |r_k - p0_k m|
        let mut value = 0.0;
        let mut dsum = 0.0;
        for k in 0..row.len() {
            let (v, d) = FDivergence::smoothed_tv_abs(row[k] - prior[k] * m, mu);
            value += 0.5 * v;
            grad[k] = 0.5 * d;
            dsum += 0.5 * d * prior[k];
        }
        grad.iter_mut().for_each(|g| *g -= dsum);
        return value;
    }
    if mu <= 0.0 {
        if m <= 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        let value = row_privacy(div, row, prior);
        let mut mean_slope = 0.0;
        for k in 0..row.len() {
            let slope = div.derivative(row[k] / (prior[k] * m));
            grad[k] = slope;
            mean_slope += row[k] / m * slope;
        }
        let d = value / m;
        grad.iter_mut().for_each(|g| *g += d - mean_slope);
        return value;
    }
    let s = m + mu;
    let (f_mu, d_mu) = (div.f(mu), div.derivative(mu));
    let mut inner = 0.0;
    let mut mean_slope = 0.0;
    for k in 0..row.len() {
        let t = row[k] / (prior[k] * s);
        let (f, slope) = if t < mu {
            (f_mu + d_mu * (t - mu), d_mu)
        } else {
            (div.f(t), div.derivative(t))
        };
        inner += prior[k] * f;
        grad[k] = slope;
        mean_slope += row[k] / s * slope;
    }
    grad.iter_mut().for_each(|g| *g += inner - mean_slope);
    s * inner
}

/// Midpoint-convexity test of the generator on a log-spaced grid of
/// `[1e-6, 1e6]`.
pub fn check_convexity(div: &FDivergence) -> bool {
    const POINTS: usize = 241;
    let grid: Vec<f64> = (0..POINTS)
        .map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / (POINTS - 1) as f64))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| div.f(t)).collect();
    for i in 0..POINTS {
        for j in i + 1..POINTS {
            let mid = div.f(0.5 * (grid[i] + grid[j]));
            let chord = 0.5 * (values[i] + values[j]);
            let tol = 1e-9 * (1.0 + values[i].abs() + values[j].abs());
            if !(mid <= chord + tol) {
                return false;
            }
        }
    }
    true
}
