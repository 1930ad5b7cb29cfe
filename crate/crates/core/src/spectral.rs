//! Cumulant functions of Markov additive processes through a finite-state
//! approximation of the modulating chain.
//!
//! For a chain with states `x_1..x_N` and transition matrix `p`, the tilted
//! kernel `A_ij = exp(theta x_j) p_ij` is entrywise positive and its Perron
//! root plays the part of `exp(psi)`. Observations `xi = X + N(0, 1)` add
//! `theta^2 / 2`.

use crate::error::{Error, Result};
use crate::exp_family::CumulantModel;
use crate::numeric::brent_root;

const PERRON_RTOL: f64 = 1e-12;
const PERRON_MAX_ITER: usize = 100_000;
const TILT_XTOL: f64 = 1e-10;

/// Finite state grid with a row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChain {
    states: Vec<f64>,
    /// Row-major `N x N`.
    transition: Vec<f64>,
}

impl DiscreteChain {
    pub fn new(states: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Config("a chain needs at least one state".into()));
        }
        if transition.len() != n * n {
            return Err(Error::Config(format!(
                "transition matrix has {} entries, expected {}",
                transition.len(),
                n * n
            )));
        }
        if let Some(v) = transition.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("transition entry {v} is not a finite nonnegative number")));
        }
        for (i, row) in transition.chunks_exact(n).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { states, transition })
    }

    /// States `x_i = i * step + offset` for `i = 1..=n` and
    /// `p_ij` proportional to `exp(-(x_j - lambda(x_i))^2 / 2)`.
    pub fn discretize(n: usize, offset: f64, step: f64, lambda: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("discretization needs at least 2 states, got {n}")));
        }
        if !(step > 0.0) || !step.is_finite() || !offset.is_finite() {
            return Err(Error::Config(format!("invalid grid step {step} / offset {offset}")));
        }
        let states: Vec<f64> = (1..=n).map(|i| i as f64 * step + offset).collect();
        let mut transition = vec![0.0; n * n];
        for (row, &x) in transition.chunks_exact_mut(n).zip(&states) {
            let centre = lambda(x);
            // shift by the largest exponent so the row cannot underflow to 0
            let nearest = states.iter().map(|y| (y - centre).powi(2)).fold(f64::INFINITY, f64::min);
            for (p, y) in row.iter_mut().zip(&states) {
                *p = (-0.5 * ((y - centre).powi(2) - nearest)).exp();
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Self::new(states, transition)
    }

    /// A one-state chain sitting at `x`.
    pub fn constant(x: f64) -> Self {
        Self { states: vec![x], transition: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.transition[i * n..(i + 1) * n]
    }
}

/// The nonlinear autoregression chain on the grid `x_i = i * step + offset`
/// with the piecewise-linear drift [`crate::models::lambda_pw`].
pub fn discretize_ar(n_states: usize, offset: f64, step: f64) -> Result<DiscreteChain> {
    DiscreteChain::discretize(n_states, offset, step, crate::models::lambda_pw)
}

/// The 1000-state grid from `-2.495` to `7.495`.
pub fn ar_chain() -> DiscreteChain {
    discretize_ar(1000, -2.505, 0.01).expect("fixed grid is valid")
}

/// Perron root of the tilted kernel with its eigenvectors, both scaled to
/// unit maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Perron {
    pub log_eigenvalue: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub iterations: usize,
}

/// Tilted kernel `exp(theta x_j - shift) p_ij` and its log shift.
fn tilted(chain: &DiscreteChain, theta: f64) -> Result<(Vec<f64>, f64)> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("tilt {theta} is not finite")));
    }
    let n = chain.len();
    let exponents: Vec<f64> = chain.states.iter().map(|x| theta * x).collect();
    let shift = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let factors: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
    let mut a = chain.transition.clone();
    for row in a.chunks_exact_mut(n) {
        row.iter_mut().zip(&factors).for_each(|(p, f)| *p *= f);
    }
    Ok((a, shift))
}

/// Power iteration with Collatz-Wielandt stopping. `transpose` iterates the
/// row vector `u A` instead of `A v`. Returns `(eigenvalue, vector, iterations)`.
fn power_iteration(a: &[f64], n: usize, transpose: bool) -> Result<(f64, Vec<f64>, usize)> {
    let mut v = vec![1.0; n];
    let mut next = vec![0.0; n];
    for iter in 1..=PERRON_MAX_ITER {
        if transpose {
            next.iter_mut().for_each(|x| *x = 0.0);
            for (row, vi) in a.chunks_exact(n).zip(&v) {
                next.iter_mut().zip(row).for_each(|(x, aij)| *x += vi * aij);
            }
        } else {
            for (x, row) in next.iter_mut().zip(a.chunks_exact(n)) {
                *x = row.iter().zip(&v).map(|(aij, vj)| aij * vj).sum();
            }
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (x, vi) in next.iter().zip(&v) {
            let ratio = x / vi;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::Domain("tilted kernel lost positivity in power iteration".into()));
        }
        let scale = next.iter().copied().fold(0.0, f64::max);
        v.iter_mut().zip(&next).for_each(|(vi, x)| *vi = x / scale);
        if hi - lo <= PERRON_RTOL * hi {
            return Ok((0.5 * (lo + hi), v, iter));
        }
    }
    Err(Error::NonConvergence { what: "Perron power iteration", iterations: PERRON_MAX_ITER })
}

/// Log Perron root and both eigenvectors of `exp(theta x_j) p_ij`.
pub fn perron(chain: &DiscreteChain, theta: f64) -> Result<Perron> {
    let (a, shift) = tilted(chain, theta)?;
    let n = chain.len();
    let (lambda, right, it_r) = power_iteration(&a, n, false)?;
    let (_, left, it_l) = power_iteration(&a, n, true)?;
    Ok(Perron { log_eigenvalue: shift + lambda.ln(), right, left, iterations: it_r.max(it_l) })
}

/// Log Perron root of `exp(theta x_j) p_ij`.
pub fn log_perron(chain: &DiscreteChain, theta: f64) -> Result<f64> {
    if theta == 0.0 {
        return Ok(0.0);
    }
    let (a, shift) = tilted(chain, theta)?;
    let (lambda, _, _) = power_iteration(&a, chain.len(), false)?;
    Ok(shift + lambda.ln())
}

/// `psi(theta) = theta^2 / 2 + log_perron(theta)`.
pub fn psi_markov(chain: &DiscreteChain, theta: f64) -> Result<f64> {
    Ok(0.5 * theta * theta + log_perron(chain, theta)?)
}

/// `psi'(theta) = theta + sum_j l_j r_j x_j / sum_j l_j r_j`
/// (first-order eigenvalue perturbation).
pub fn psi_markov_derivative(chain: &DiscreteChain, theta: f64) -> Result<f64> {
    let p = perron(chain, theta)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((l, r), x) in p.left.iter().zip(&p.right).zip(&chain.states) {
        num += l * r * x;
        den += l * r;
    }
    Ok(theta + num / den)
}

/// Scan points used to bracket positive roots.
fn scan_grid() -> impl Iterator<Item = f64> {
    std::iter::once(1e-6).chain((1..=40).map(|k| 0.05 * k as f64))
}

fn bracket_and_solve(what: &'static str, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for t in scan_grid() {
        let ft = f(t)?;
        if ft == 0.0 {
            return Ok(t);
        }
        if let Some((t0, f0)) = prev {
            if f0 < 0.0 && ft > 0.0 {
                let mut failure = None;
                let root = brent_root(
                    |x| {
                        f(x).unwrap_or_else(|e| {
                            failure.get_or_insert(e);
                            f64::NAN
                        })
                    },
                    t0,
                    t,
                    TILT_XTOL,
                    200,
                );
                return match failure {
                    Some(e) => Err(e),
                    None => root,
                };
            }
        }
        prev = Some((t, ft));
    }
    Err(Error::Bracket { what, lo: 1e-6, hi: 2.0 })
}

/// Positive tilt with `psi'(theta) = slope`, i.e. the natural parameter whose
/// tilted mean increment is `slope`.
pub fn solve_tilt(chain: &DiscreteChain, slope: f64) -> Result<f64> {
    bracket_and_solve("tilt equation psi'(theta) = slope", |t| Ok(psi_markov_derivative(chain, t)? - slope))
}

/// Positive root of the chord equation `psi(theta) = slope * theta`.
pub fn chord_root(chain: &DiscreteChain, slope: f64) -> Result<f64> {
    bracket_and_solve("chord equation psi(theta) = slope theta", |t| Ok(psi_markov(chain, t)? - slope * t))
}

/// A discretized chain viewed as a scalar cumulant model.
#[derive(Debug, Clone)]
pub struct SpectralCumulant {
    pub chain: DiscreteChain,
}

impl CumulantModel for SpectralCumulant {
    fn dim(&self) -> usize {
        1
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        psi_markov(&self.chain, theta[0]).unwrap_or(f64::NAN)
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta[0].is_finite()
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        vec![psi_markov_derivative(&self.chain, theta[0]).unwrap_or(f64::NAN)]
    }
}
