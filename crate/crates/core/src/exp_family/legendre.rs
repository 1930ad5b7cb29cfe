use super::CumulantModel;
use crate::error::{Error, Result};
use crate::numeric::{bisect, brent_minimize, brent_root, cholesky_solve, dot, norm, Tolerances};

/// `phi(mu_theta) = theta . grad psi(theta) - psi(theta)`, the rate at the
/// mean parameter of `theta`. Needs no inversion.
pub fn rate_at_natural(model: &dyn CumulantModel, theta: &[f64]) -> f64 {
    if !model.in_domain(theta) {
        return f64::INFINITY;
    }
    dot(theta, &model.grad_psi(theta)) - model.psi(theta)
}

/// Solves `grad psi(theta) = mu` by damped Newton from `theta = 0`.
pub fn theta_of_mu(model: &dyn CumulantModel, mu: &[f64]) -> Result<Vec<f64>> {
    theta_of_mu_from(model, mu, &vec![0.0; model.dim()], &Tolerances::DEFAULT)
}

/// [`theta_of_mu`] with a warm start and explicit tolerances.
pub fn theta_of_mu_from(model: &dyn CumulantModel, mu: &[f64], start: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
    let d = model.dim();
    if mu.len() != d || start.len() != d {
        return Err(Error::Domain(format!("expected dimension {d}, got mu of length {}", mu.len())));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite mean parameter {mu:?}")));
    }
    if !model.in_domain(start) {
        return Err(Error::Domain(format!("start {start:?} outside the natural domain")));
    }
    let target = tol.inversion * (1.0 + norm(mu));
    let objective = |t: &[f64]| model.psi(t) - dot(t, mu);
    let residual = |t: &[f64]| -> Vec<f64> { model.grad_psi(t).iter().zip(mu).map(|(g, m)| g - m).collect() };

    let mut theta = start.to_vec();
    let mut left_domain = false;
    for _ in 0..tol.newton_max_iter {
        let r = residual(&theta);
        let rn = norm(&r);
        if rn <= target {
            return Ok(theta);
        }
        let dir: Vec<f64> = match cholesky_solve(&model.hess_psi(&theta), &r) {
            Some(step) => step.iter().map(|s| -s).collect(),
            None => r.iter().map(|s| -s).collect(),
        };
        let f0 = objective(&theta);
        let slope = dot(&r, &dir);
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..=tol.max_halvings {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, v)| t + s * v).collect();
            if model.in_domain(&cand) {
                let f1 = objective(&cand);
                if f1 <= f0 + 1e-4 * s * slope || norm(&residual(&cand)) < rn {
                    accepted = Some(cand);
                    break;
                }
            } else {
                left_domain = true;
            }
            s *= 0.5;
        }
        match accepted {
            Some(next) if next != theta => theta = next,
            _ => break,
        }
    }
    if norm(&residual(&theta)) <= target {
        return Ok(theta);
    }
    if d == 1 {
        return invert_scalar(model, mu[0], target);
    }
    if left_domain {
        Err(Error::Domain(format!("Newton iterates for mu = {mu:?} left the natural domain")))
    } else {
        Err(Error::NonConvergence { what: "gradient inversion", iterations: tol.newton_max_iter })
    }
}

/// Bisection fallback for `psi'(theta) = mu` in one dimension.
fn invert_scalar(model: &dyn CumulantModel, mu: f64, target: f64) -> Result<Vec<f64>> {
    let f = |t: f64| model.grad_psi(&[t])[0] - mu;
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(vec![0.0]);
    }
    // psi' is increasing, so search on the side where the sign can flip
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let mut inner = 0.0;
    let mut outer = None;
    let mut r = 0.125;
    while r <= 1e4 {
        let t = dir * r;
        if !model.in_domain(&[t]) {
            break;
        }
        if f(t).signum() != f0.signum() {
            outer = Some(t);
            break;
        }
        inner = t;
        r *= 2.0;
    }
    let outer = match outer {
        Some(t) => t,
        None => {
            return Err(Error::NonConvergence { what: "gradient inversion bracket", iterations: 0 });
        }
    };
    let root = bisect(f, inner, outer, 0.0)?;
    // finite-difference gradients cannot always reach the Newton target
    if f(root).abs() <= target.max(1e-8 * (1.0 + mu.abs())) {
        Ok(vec![root])
    } else {
        Err(Error::NonConvergence { what: "gradient inversion", iterations: 200 })
    }
}

/// Rate function `phi(mu) = sup_theta { theta . mu - psi(theta) }`.
pub fn rate(model: &dyn CumulantModel, mu: &[f64]) -> Result<f64> {
    let theta = theta_of_mu(model, mu)?;
    Ok((dot(&theta, mu) - model.psi(&theta)).max(0.0))
}

/// Minimal rate over an event `{g(mu) >= b}` with the minimizing mean
/// parameter and its natural parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBound {
    pub rate: f64,
    pub mu_star: Vec<f64>,
    pub theta_star: Vec<f64>,
}

/// Largest ray parameter explored in natural-parameter space.
const RAY_CAP: f64 = 50.0;
const RAY_FIRST: f64 = 1e-3;
const RAY_GROWTH: f64 = 1.08;

/// `I = inf { phi(mu) : g(mu) >= b }`.
///
/// The search runs over natural parameters: along each ray `r * omega` the
/// rate `phi(mu_{r omega})` increases in `r`, so the cheapest feasible point
/// on the ray is the first crossing of `g(grad psi(r omega)) = b`. Rays are
/// taken in both directions when `d = 1` and on a 360-angle fan refined by
/// Brent minimization when `d = 2`.
pub fn compute_rate_bound(model: &dyn CumulantModel, g: &dyn Fn(&[f64]) -> f64, b: f64) -> Result<RateBound> {
    let d = model.dim();
    let origin = vec![0.0; d];
    let mu0 = model.mean();
    if g(&mu0) >= b {
        return Ok(RateBound { rate: 0.0, mu_star: mu0, theta_star: origin });
    }
    let feasible = |theta: &[f64]| model.in_domain(theta) && g(&model.grad_psi(theta)) >= b;
    let best = match d {
        1 => [1.0, -1.0]
            .iter()
            .filter_map(|&w| first_crossing(model, &feasible, &[w]))
            .min_by(|a, b| a.0.total_cmp(&b.0)),
        2 => {
            const FAN: usize = 360;
            let step = std::f64::consts::TAU / FAN as f64;
            let on_ray = |a: f64| first_crossing(model, &feasible, &[a.cos(), a.sin()]);
            let coarse = (0..FAN)
                .filter_map(|k| {
                    let a = k as f64 * step;
                    on_ray(a).map(|hit| (hit, a))
                })
                .min_by(|x, y| x.0 .0.total_cmp(&y.0 .0));
            coarse.map(|(hit, a)| {
                let (a_ref, _) =
                    brent_minimize(|a| on_ray(a).map_or(f64::INFINITY, |h| h.0), a - step, a + step, 1e-9, 200);
                match on_ray(a_ref) {
                    Some(refined) if refined.0 <= hit.0 => refined,
                    _ => hit,
                }
            })
        }
        _ => return Err(Error::Domain(format!("rate bound search supports d = 1 or 2, got {d}"))),
    };
    let (rate, theta) = best.ok_or_else(|| {
        Error::InfeasibleEvent(format!("no natural parameter within radius {RAY_CAP} reaches g >= {b}"))
    })?;
    Ok(RateBound { rate, mu_star: model.grad_psi(&theta), theta_star: theta })
}

/// First point on the ray `r * omega` satisfying `feasible`, refined by
/// bisection so the returned point is feasible. Returns `(phi, theta)`.
fn first_crossing(
    model: &dyn CumulantModel,
    feasible: &dyn Fn(&[f64]) -> bool,
    omega: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let at = |r: f64| -> Vec<f64> { omega.iter().map(|w| r * w).collect() };
    let mut lo = 0.0;
    let mut r = RAY_FIRST;
    let hi = loop {
        if r > RAY_CAP || !model.in_domain(&at(r)) {
            return None;
        }
        if feasible(&at(r)) {
            break r;
        }
        lo = r;
        r *= RAY_GROWTH;
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1e-13 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if feasible(&at(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = at(hi);
    Some((rate_at_natural(model, &theta), theta))
}

/// Positive root of `psi(theta) = 0` for a one-dimensional increment with
/// negative mean.
pub fn theta_star(model: &dyn CumulantModel) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::Domain("theta_star needs a scalar increment".into()));
    }
    let psi = |t: f64| model.psi(&[t]);
    if !(model.mean()[0] < 0.0) {
        return Err(Error::Bracket { what: "theta_star", lo: 0.0, hi: 0.0 });
    }
    // a point just right of zero where psi is still negative
    let mut lo = 0.05;
    while !(psi(lo) < 0.0) {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::Bracket { what: "theta_star", lo: 0.0, hi: 0.05 });
        }
    }
    let mut hi = None;
    let mut t = 0.05;
    while t <= 1e6 && model.in_domain(&[t]) {
        if psi(t) >= 0.0 {
            hi = Some(t);
            break;
        }
        lo = lo.max(t);
        t = if t < 10.0 { t + 0.05 } else { 2.0 * t };
    }
    let hi = hi.ok_or(Error::Bracket { what: "theta_star", lo: 0.0, hi: t })?;
    brent_root(psi, lo, hi, 1e-15, 200)
}

#[cfg(test)]
mod tests {
    use super::super::{Bernoulli, Gaussian, NormalMixtureSquares, TwoPoint};
    use super::*;

    #[test]
    fn gaussian_rate_is_half_square() {
        let m = Gaussian::standard();
        assert!((rate(&m, &[1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(rate(&m, &[0.0]).unwrap(), 0.0);
        assert!((theta_of_mu(&m, &[1.7]).unwrap()[0] - 1.7).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_inversion_is_logit_shift() {
        let m = Bernoulli { p: 0.3 };
        let theta = theta_of_mu(&m, &[0.5]).unwrap()[0];
        assert!((theta - (7.0f64 / 3.0).ln()).abs() < 1e-10);
        // kullback-leibler closed form
        let mu: f64 = 0.875;
        let kl = mu * (mu / 0.3).ln() + (1.0 - mu) * ((1.0 - mu) / 0.7).ln();
        assert!((rate(&m, &[mu]).unwrap() - kl).abs() < 1e-12);
    }

    #[test]
    fn inversion_outside_mean_range_fails() {
        let m = Bernoulli { p: 0.3 };
        assert!(theta_of_mu(&m, &[1.2]).is_err());
        assert!(theta_of_mu(&NormalMixtureSquares, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn mixture_inversion_at_mean_is_origin() {
        let t = theta_of_mu(&NormalMixtureSquares, &[0.0, 2.0]).unwrap();
        assert!(norm(&t) < 1e-10);
    }

    #[test]
    fn mixture_rate_at_one_two() {
        // cross-checked against numerical quadrature of the mixture density
        let t = theta_of_mu(&NormalMixtureSquares, &[1.0, 2.0]).unwrap();
        assert!((t[0] - 0.91762).abs() < 1e-4 && (t[1] + 0.23565).abs() < 1e-4, "{t:?}");
        let phi = rate(&NormalMixtureSquares, &[1.0, 2.0]).unwrap();
        assert!((phi - 0.330357).abs() < 1e-5, "{phi}");
    }

    #[test]
    fn rate_bound_linear_event_matches_rate() {
        let m = Bernoulli { p: 0.3 };
        let rb = compute_rate_bound(&m, &|x: &[f64]| x[0], 0.875).unwrap();
        assert!((rb.rate - rate(&m, &[0.875]).unwrap()).abs() < 1e-9);
        assert!((rb.mu_star[0] - 0.875).abs() < 1e-9);
        let rb = compute_rate_bound(&Gaussian::standard(), &|x: &[f64]| x[0], 1.0).unwrap();
        assert!((rb.rate - 0.5).abs() < 1e-10);
    }

    #[test]
    fn rate_bound_at_mean_is_zero() {
        let rb = compute_rate_bound(&Gaussian::standard(), &|x: &[f64]| x[0], -1.0).unwrap();
        assert_eq!(rb.rate, 0.0);
    }

    #[test]
    fn rate_bound_infeasible_event() {
        let m = Bernoulli { p: 0.3 };
        let err = compute_rate_bound(&m, &|x: &[f64]| x[0], 1.5).unwrap_err();
        assert!(matches!(err, Error::InfeasibleEvent(_)));
    }

    #[test]
    fn self_normalized_rate_bound() {
        let g = |x: &[f64]| if x[1] > 0.0 { x[0] / x[1].sqrt() } else { f64::NEG_INFINITY };
        let rb = compute_rate_bound(&NormalMixtureSquares, &g, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        // brute-force minimum of phi along the constraint curve v = 2 y^2
        let mut best = f64::INFINITY;
        for k in 0..400 {
            let y = 0.9 + k as f64 * 0.0005;
            best = best.min(rate(&NormalMixtureSquares, &[y, 2.0 * y * y]).unwrap());
        }
        assert!((rb.rate - best).abs() < 1e-6, "{} vs {best}", rb.rate);
        assert!(g(&rb.mu_star) >= std::f64::consts::FRAC_1_SQRT_2 - 1e-9);
    }

    #[test]
    fn theta_star_examples() {
        let t = theta_star(&Gaussian { mean: -1.0, sd: 1.0 }).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        let t = theta_star(&Gaussian { mean: -0.5, sd: 1.0 }).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let m = TwoPoint { p_up: 0.25 };
        let t = theta_star(&m).unwrap();
        assert!((t - 3f64.ln()).abs() < 1e-12);
        assert!(m.psi(&[t]).abs() <= 1e-10);
    }

    #[test]
    fn theta_star_needs_negative_drift() {
        let err = theta_star(&Gaussian { mean: 0.5, sd: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }
}
