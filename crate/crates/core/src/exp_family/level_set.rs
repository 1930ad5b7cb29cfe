use std::sync::Arc;

use super::legendre::{rate_at_natural, theta_of_mu, theta_of_mu_from};
use super::CumulantModel;
use crate::error::{Error, Result};
use crate::numeric::{brent_minimize, dot, Tolerances};

/// Number of boundary directions tabulated in two dimensions.
const POLAR_ANGLES: usize = 1024;
/// Rays are truncated at this radius when the rate never reaches the bound.
const RADIUS_CAP: f64 = 50.0;
/// Slack allowed on `phi(mu_theta) <= I` in membership tests.
const MEMBERSHIP_SLACK: f64 = 1e-9;

/// `M = { theta : phi(mu_theta) <= I }`.
///
/// `M` is star-shaped about the origin because `phi(mu_{s theta})` has
/// derivative `s theta' H(s theta) theta > 0` in `s`, so it is described by
/// one boundary radius per direction.
#[derive(Debug, Clone)]
pub struct LevelSet {
    model: Arc<dyn CumulantModel>,
    rate: f64,
    shape: Shape,
}

#[derive(Debug, Clone)]
enum Shape {
    Interval { lo: f64, hi: f64, mean_lo: f64, mean_hi: f64 },
    Polar { radius: Vec<f64>, points: Vec<[f64; 2]>, psi: Vec<f64> },
    Unbounded,
}

impl LevelSet {
    /// Builds `M` for the bound `rate`; `rate = +inf` gives the whole domain.
    pub fn new(model: Arc<dyn CumulantModel>, rate: f64) -> Result<Self> {
        if rate.is_nan() || rate < 0.0 {
            return Err(Error::Domain(format!("level-set bound must be nonnegative, got {rate}")));
        }
        if rate == f64::INFINITY {
            return Ok(Self { model, rate, shape: Shape::Unbounded });
        }
        let shape = match model.dim() {
            1 => {
                let hi = boundary_radius(model.as_ref(), rate, &[1.0]);
                let lo = -boundary_radius(model.as_ref(), rate, &[-1.0]);
                Shape::Interval { lo, hi, mean_lo: model.grad_psi(&[lo])[0], mean_hi: model.grad_psi(&[hi])[0] }
            }
            2 => {
                let mut radius = Vec::with_capacity(POLAR_ANGLES);
                let mut points = Vec::with_capacity(POLAR_ANGLES);
                let mut psi = Vec::with_capacity(POLAR_ANGLES);
                for k in 0..POLAR_ANGLES {
                    let omega = direction(angle(k as f64));
                    let r = boundary_radius(model.as_ref(), rate, &omega);
                    let p = [r * omega[0], r * omega[1]];
                    radius.push(r);
                    psi.push(model.psi(&p));
                    points.push(p);
                }
                Shape::Polar { radius, points, psi }
            }
            d => return Err(Error::Domain(format!("level sets are supported for d = 1 or 2, got {d}"))),
        };
        Ok(Self { model, rate, shape })
    }

    /// The whole natural domain (no bound on the rate).
    pub fn unbounded(model: Arc<dyn CumulantModel>) -> Self {
        Self { model, rate: f64::INFINITY, shape: Shape::Unbounded }
    }

    pub fn model(&self) -> &dyn CumulantModel {
        self.model.as_ref()
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `[theta_-, theta_+]` in one dimension.
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self.shape {
            Shape::Interval { lo, hi, .. } => Some((lo, hi)),
            _ => None,
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if !self.model.in_domain(theta) {
            return false;
        }
        match self.shape {
            Shape::Unbounded => true,
            _ => rate_at_natural(self.model.as_ref(), theta) <= self.rate + MEMBERSHIP_SLACK * (1.0 + self.rate),
        }
    }

    /// `kappa = sup_{theta in M} |theta|`; diagnostic only.
    pub fn kappa(&self) -> f64 {
        match &self.shape {
            Shape::Interval { lo, hi, .. } => lo.abs().max(hi.abs()),
            Shape::Polar { radius, .. } => radius.iter().copied().fold(0.0, f64::max),
            Shape::Unbounded => f64::INFINITY,
        }
    }

    /// `argmax_{theta in M} { theta . x / t - psi(theta) }`.
    pub fn argmax(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        if t == 0 {
            return Err(Error::Domain("argmax over M needs t >= 1".into()));
        }
        let y: Vec<f64> = x.iter().map(|v| v / t as f64).collect();
        self.argmax_mean(&y)
    }

    /// [`argmax`](Self::argmax) with the running mean `y = x / t` given.
    pub fn argmax_mean(&self, y: &[f64]) -> Result<Vec<f64>> {
        let model = self.model.as_ref();
        match &self.shape {
            Shape::Unbounded => theta_of_mu(model, y),
            &Shape::Interval { lo, hi, mean_lo, mean_hi } => {
                if y[0] >= mean_hi {
                    Ok(vec![hi])
                } else if y[0] <= mean_lo {
                    Ok(vec![lo])
                } else {
                    let theta = theta_of_mu(model, y)?;
                    Ok(vec![theta[0].clamp(lo, hi)])
                }
            }
            Shape::Polar { radius, points, psi } => self.argmax_polar(y, radius, points, psi),
        }
    }

    fn argmax_polar(&self, y: &[f64], radius: &[f64], points: &[[f64; 2]], psi: &[f64]) -> Result<Vec<f64>> {
        let model = self.model.as_ref();
        let objective = |theta: &[f64]| dot(theta, y) - model.psi(theta);

        // best tabulated boundary point, ties to the lexicographically smallest
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (k, (p, s)) in points.iter().zip(psi).enumerate() {
            let val = p[0] * y[0] + p[1] * y[1] - s;
            let tie = (val - best_val).abs() <= 1e-12 * (1.0 + val.abs());
            if (val > best_val && !tie) || (tie && lex_less(p, &points[best])) {
                best = k;
                best_val = val;
            }
        }

        let mut tried_interior = false;
        if points_inward(model, y, &points[best]) {
            tried_interior = true;
            if let Some(theta) = self.interior_candidate(y, &points[best]) {
                return Ok(theta);
            }
        }

        // refine along the boundary between the neighbouring table angles
        let a0 = angle(best as f64);
        let step = angle(1.0);
        let guess = radius[best];
        let on_boundary = |a: f64| -> Result<Vec<f64>> {
            let omega = direction(a);
            let r = radius_newton(model, self.rate, &omega, guess)?;
            Ok(vec![r * omega[0], r * omega[1]])
        };
        let (a_ref, _) = brent_minimize(
            |a| on_boundary(a).map_or(f64::INFINITY, |theta| -objective(&theta)),
            a0 - step,
            a0 + step,
            1e-10,
            100,
        );
        let refined = on_boundary(a_ref)?;
        let boundary = if objective(&refined) >= best_val { refined } else { points[best].to_vec() };
        if !tried_interior && points_inward(model, y, &boundary) {
            if let Some(theta) = self.interior_candidate(y, &boundary) {
                return Ok(theta);
            }
        }
        Ok(boundary)
    }

    /// Unconstrained maximizer `theta_y`, kept only if it lies in `M`.
    fn interior_candidate(&self, y: &[f64], start: &[f64]) -> Option<Vec<f64>> {
        theta_of_mu_from(self.model.as_ref(), y, start, &Tolerances::DEFAULT).ok().filter(|theta| self.contains(theta))
    }
}

fn angle(k: f64) -> f64 {
    std::f64::consts::TAU * k / POLAR_ANGLES as f64
}

fn direction(a: f64) -> [f64; 2] {
    [a.cos(), a.sin()]
}

fn lex_less(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] < b[0] || (a[0] == b[0] && a[1] < b[1])
}

/// Whether the objective gradient `y - grad psi(theta)` at a boundary point
/// points into `M`, i.e. against the outward normal `H(theta) theta`.
fn points_inward(model: &dyn CumulantModel, y: &[f64], theta: &[f64]) -> bool {
    let g = model.grad_psi(theta);
    let h = model.hess_psi(theta);
    let normal = [h[0] * theta[0] + h[1] * theta[1], h[2] * theta[0] + h[3] * theta[1]];
    (y[0] - g[0]) * normal[0] + (y[1] - g[1]) * normal[1] < 0.0
}

/// Radius where `phi(mu_{r omega}) = I`, by bisection on membership.
fn boundary_radius(model: &dyn CumulantModel, rate: f64, omega: &[f64]) -> f64 {
    let inside = |r: f64| {
        let theta: Vec<f64> = omega.iter().map(|w| r * w).collect();
        model.in_domain(&theta) && rate_at_natural(model, &theta) <= rate
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while inside(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > RADIUS_CAP {
            if inside(RADIUS_CAP) {
                return RADIUS_CAP;
            }
            hi = RADIUS_CAP;
            break;
        }
    }
    while hi - lo > 1e-13 * (1.0 + lo) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Safeguarded Newton for the boundary radius along `omega`, using
/// `d/dr phi(mu_{r omega}) = r omega' H(r omega) omega`.
fn radius_newton(model: &dyn CumulantModel, rate: f64, omega: &[f64; 2], guess: f64) -> Result<f64> {
    let at = |r: f64| [r * omega[0], r * omega[1]];
    let excess = |r: f64| rate_at_natural(model, &at(r)) - rate;
    let (mut lo, mut hi) = (0.0, guess.max(1e-3));
    let mut grow = 0;
    while excess(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if hi > RADIUS_CAP || grow > 60 {
            return Ok(RADIUS_CAP.min(lo.max(guess)));
        }
    }
    let mut r = guess.clamp(lo, hi);
    for _ in 0..100 {
        let e = excess(r);
        if e.is_finite() && e.abs() <= 1e-12 * (1.0 + rate) {
            return Ok(r);
        }
        if e.is_finite() && e < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        if hi - lo <= 1e-14 * (1.0 + hi) {
            return Ok(lo);
        }
        let theta = at(r);
        let newton = if e.is_finite() {
            let h = model.hess_psi(&theta);
            let curv =
                r * (omega[0] * (h[0] * omega[0] + h[1] * omega[1]) + omega[1] * (h[2] * omega[0] + h[3] * omega[1]));
            if curv > 0.0 {
                r - e / curv
            } else {
                f64::NAN
            }
        } else {
            f64::NAN
        };
        r = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::NonConvergence { what: "level-set boundary radius", iterations: 100 })
}
