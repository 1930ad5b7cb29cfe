//! Cumulant generating functions, Legendre transforms, tilt parameters and
//! the level sets that bound the adaptive tilts.
//!
//! A [`CumulantModel`] describes `psi(theta) = log E exp(theta . xi)` of an
//! increment `xi` in `R^d` together with its natural-parameter domain. The
//! rate function `phi(mu) = sup_theta { theta . mu - psi(theta) }` and the
//! tilt `theta_mu = (grad psi)^{-1}(mu)` are computed numerically from it.

mod families;
mod legendre;
mod level_set;

use std::fmt;

pub use families::{Bernoulli, Gaussian, NormalMixtureSquares, PointMass, TwoPoint};
pub use legendre::{compute_rate_bound, rate, rate_at_natural, theta_of_mu, theta_star, RateBound};
pub use level_set::LevelSet;

/// `psi`, its derivatives and its domain for a `d`-dimensional increment law.
///
/// Only [`dim`](Self::dim) and [`psi`](Self::psi) are required. The gradient
/// and Hessian fall back to central finite differences with step
/// `1e-5 * (1 + |theta|)`.
pub trait CumulantModel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Log moment generating function. May return `+inf` (or NaN) outside the
    /// domain.
    fn psi(&self, theta: &[f64]) -> f64;

    fn in_domain(&self, theta: &[f64]) -> bool {
        self.psi(theta).is_finite()
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        central_gradient(|t| self.psi(t), theta)
    }

    /// Row-major `d x d` Hessian.
    fn hess_psi(&self, theta: &[f64]) -> Vec<f64> {
        central_jacobian(|t| self.grad_psi(t), theta)
    }

    /// Increment mean `grad psi(0)`.
    fn mean(&self) -> Vec<f64> {
        self.grad_psi(&vec![0.0; self.dim()])
    }
}

fn fd_step(theta: &[f64]) -> f64 {
    1e-5 * (1.0 + crate::numeric::norm(theta))
}

/// Central-difference gradient of a scalar function.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64]) -> Vec<f64> {
    let h = fd_step(theta);
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            probe[i] = theta[i] + h;
            let up = f(&probe);
            probe[i] = theta[i] - h;
            let down = f(&probe);
            probe[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Jacobian of a vector function, symmetrized.
pub fn central_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, theta: &[f64]) -> Vec<f64> {
    let d = theta.len();
    let h = fd_step(theta);
    let mut probe = theta.to_vec();
    let mut jac = vec![0.0; d * d];
    for j in 0..d {
        probe[j] = theta[j] + h;
        let up = f(&probe);
        probe[j] = theta[j] - h;
        let down = f(&probe);
        probe[j] = theta[j];
        for i in 0..d {
            jac[i * d + j] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (jac[i * d + j] + jac[j * d + i]);
            jac[i * d + j] = s;
            jac[j * d + i] = s;
        }
    }
    jac
}
