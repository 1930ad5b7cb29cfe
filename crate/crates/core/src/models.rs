//! Increment samplers, event definitions and the concrete walks used by the
//! examples and tests.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exp_family::{self, CumulantModel};
use crate::rng::{Domain, StreamRng, Streams};

/// State of the modulating chain. I.i.d. models carry `Unit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelState {
    Unit,
    Real(f64),
}

impl ModelState {
    pub fn value(self) -> f64 {
        match self {
            ModelState::Unit => 0.0,
            ModelState::Real(x) => x,
        }
    }
}

/// Law of the increments `xi_t` (and of the modulating chain, if any).
///
/// `sample` must consume a fixed number of draws per call so that streams
/// stay aligned across particles.
pub trait IncrementModel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn initial_state(&self) -> ModelState {
        ModelState::Unit
    }

    /// Draws `xi` into `xi` given the current state and returns the new state.
    fn sample(&self, state: ModelState, rng: &mut StreamRng, xi: &mut [f64]) -> ModelState;

    /// `psi` of the increments when it is available in closed form.
    fn cumulant(&self) -> Option<Arc<dyn CumulantModel>> {
        None
    }

    /// Log-likelihood increment `log p_t / q_t` of the sampling law against
    /// the target. Zero when sampling from the target itself.
    fn log_likelihood_increment(&self, _state: ModelState, _xi: &[f64]) -> f64 {
        0.0
    }
}

/// Normal increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWalk {
    pub mean: f64,
    pub sd: f64,
}

impl IncrementModel for GaussianWalk {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, state: ModelState, rng: &mut StreamRng, xi: &mut [f64]) -> ModelState {
        xi[0] = self.mean + self.sd * rng.normal();
        state
    }

    fn cumulant(&self) -> Option<Arc<dyn CumulantModel>> {
        Some(Arc::new(exp_family::Gaussian { mean: self.mean, sd: self.sd }))
    }
}

/// `{0, 1}` increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliWalk {
    pub p: f64,
}

impl IncrementModel for BernoulliWalk {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, state: ModelState, rng: &mut StreamRng, xi: &mut [f64]) -> ModelState {
        xi[0] = if rng.bernoulli(self.p) { 1.0 } else { 0.0 };
        state
    }

    fn cumulant(&self) -> Option<Arc<dyn CumulantModel>> {
        Some(Arc::new(exp_family::Bernoulli { p: self.p }))
    }
}

/// `{-1, +1}` increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointWalk {
    pub p_up: f64,
}

impl IncrementModel for TwoPointWalk {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, state: ModelState, rng: &mut StreamRng, xi: &mut [f64]) -> ModelState {
        xi[0] = if rng.bernoulli(self.p_up) { 1.0 } else { -1.0 };
        state
    }

    fn cumulant(&self) -> Option<Arc<dyn CumulantModel>> {
        Some(Arc::new(exp_family::TwoPoint { p_up: self.p_up }))
    }
}

/// Constant increments.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMassWalk {
    pub value: Vec<f64>,
}

impl IncrementModel for PointMassWalk {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn sample(&self, state: ModelState, _rng: &mut StreamRng, xi: &mut [f64]) -> ModelState {
        xi.copy_from_slice(&self.value);
        state
    }

    fn cumulant(&self) -> Option<Arc<dyn CumulantModel>> {
        Some(Arc::new(exp_family::PointMass { value: self.value.clone() }))
    }
}

/// `xi = (X, X^2)` with `X` an equal mixture of `N(1, 1)` and `N(-1, 1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MixtureSquaresWalk;

impl IncrementModel for MixtureSquaresWalk {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, state: ModelState, rng: &mut StreamRng, xi: &mut [f64]) -> ModelState {
        let centre = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
        let x = centre + rng.normal();
        xi[0] = x;
        xi[1] = x * x;
        state
    }

    fn cumulant(&self) -> Option<Arc<dyn CumulantModel>> {
        Some(Arc::new(exp_family::NormalMixtureSquares))
    }
}

/// `lambda(x) = x` on `[-1, 1]`, `(x + 1) / 2` above and `(x - 1) / 2` below.
pub fn lambda_pw(x: f64) -> f64 {
    if x > 1.0 {
        0.5 * (x + 1.0)
    } else if x < -1.0 {
        0.5 * (x - 1.0)
    } else {
        x
    }
}

/// `u(x) = exp(2.1 theta x^+)`.
pub fn u_drift(x: f64, theta: f64) -> f64 {
    log_u_drift(x, theta).exp()
}

pub fn log_u_drift(x: f64, theta: f64) -> f64 {
    2.1 * theta * x.max(0.0)
}

/// Nonlinear autoregression `X_{t+1} = lambda(X_t) + zeta`, observed as
/// `xi_t = X_t + gamma` with independent standard normal noises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearAr {
    pub x0: f64,
}

impl Default for NonlinearAr {
    fn default() -> Self {
        Self { x0: 0.0 }
    }
}

impl NonlinearAr {
    fn step(x: f64, rng: &mut StreamRng) -> (f64, f64) {
        let next = lambda_pw(x) + rng.normal();
        (next, next + rng.normal())
    }
}

impl IncrementModel for NonlinearAr {
    fn dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> ModelState {
        ModelState::Real(self.x0)
    }

    fn sample(&self, state: ModelState, rng: &mut StreamRng, xi: &mut [f64]) -> ModelState {
        let (next, obs) = Self::step(state.value(), rng);
        xi[0] = obs;
        ModelState::Real(next)
    }
}

type Sampler = dyn Fn(&mut StreamRng, &mut [f64]) + Send + Sync;

/// I.i.d. increments from a user-supplied sampler.
#[derive(Clone)]
pub struct CustomIid {
    pub dim: usize,
    pub sampler: Arc<Sampler>,
    pub cumulant: Option<Arc<dyn CumulantModel>>,
}

impl fmt::Debug for CustomIid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomIid").field("dim", &self.dim).field("cumulant", &self.cumulant).finish()
    }
}

impl IncrementModel for CustomIid {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, state: ModelState, rng: &mut StreamRng, xi: &mut [f64]) -> ModelState {
        (self.sampler)(rng, xi);
        state
    }

    fn cumulant(&self) -> Option<Arc<dyn CumulantModel>> {
        self.cumulant.clone()
    }
}

/// The function `g` in events `g(S_n / n) >= b`.
type StatisticFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Statistic {
    /// First coordinate.
    Identity,
    /// `y / sqrt(v)` for `(y, v)`, `-inf` when `v <= 0`.
    SelfNormalized,
    Custom(Arc<StatisticFn>),
}

impl fmt::Debug for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Identity => f.write_str("Identity"),
            Statistic::SelfNormalized => f.write_str("SelfNormalized"),
            Statistic::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Statistic {
    pub fn eval(&self, mean: &[f64]) -> f64 {
        match self {
            Statistic::Identity => mean[0],
            Statistic::SelfNormalized => {
                if mean[1] > 0.0 {
                    mean[0] * (1.0 / mean[1]).sqrt()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Statistic::Custom(g) => g(mean),
        }
    }

    /// `g(s / n)`.
    pub fn eval_sum(&self, sum: &[f64], n: usize) -> f64 {
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        self.eval(&mean)
    }
}

/// Terminal event of a run.
#[derive(Debug, Clone)]
pub enum EventSpec {
    /// `{ g(S_n / n) >= b }`.
    FixedHorizon { g: Statistic, b: f64, n: usize },
    /// `{ n g(S_n / n) >= c for some n0 <= n <= n1 }`.
    BoundaryCrossing { g: Statistic, c: f64, n0: usize, n1: usize },
}

impl EventSpec {
    pub fn validate(&self, mean: &[f64]) -> Result<()> {
        match self {
            EventSpec::FixedHorizon { g, b, n } => {
                if *n == 0 {
                    return Err(Error::Config("horizon n must be at least 1".into()));
                }
                if !(g.eval(mean) < *b) {
                    return Err(Error::Config(format!(
                        "event threshold b = {b} must exceed g(mu0) = {}",
                        g.eval(mean)
                    )));
                }
            }
            EventSpec::BoundaryCrossing { n0, n1, .. } => {
                if *n0 == 0 || n0 > n1 {
                    return Err(Error::Config(format!("crossing window needs 1 <= n0 <= n1, got [{n0}, {n1}]")));
                }
            }
        }
        Ok(())
    }

    /// Number of stages simulated.
    pub fn horizon(&self) -> usize {
        match self {
            EventSpec::FixedHorizon { n, .. } => *n,
            EventSpec::BoundaryCrossing { n1, .. } => *n1,
        }
    }

    pub fn statistic(&self) -> &Statistic {
        match self {
            EventSpec::FixedHorizon { g, .. } | EventSpec::BoundaryCrossing { g, .. } => g,
        }
    }

    /// Whether stage `t` with running sum `sum` is a crossing,
    /// `t g(S_t / t) >= c` with `n0 <= t <= n1`. Always false for
    /// fixed-horizon events.
    pub fn crosses_at(&self, sum: &[f64], t: usize) -> bool {
        match self {
            EventSpec::BoundaryCrossing { g, c, n0, n1 } => t >= *n0 && t <= *n1 && t as f64 * g.eval_sum(sum, t) >= *c,
            EventSpec::FixedHorizon { .. } => false,
        }
    }

    /// Event indicator at the horizon. `crossed` records whether a crossing
    /// happened at some stage up to the horizon.
    pub fn holds(&self, sum: &[f64], crossed: bool) -> bool {
        match self {
            EventSpec::FixedHorizon { g, b, n } => g.eval_sum(sum, *n) >= *b,
            EventSpec::BoundaryCrossing { .. } => crossed,
        }
    }
}

/// Drift diagnostic at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPoint {
    pub x: f64,
    /// Estimate of `E_x[exp(theta xi - psi) u(X_1)] / u(x)`.
    pub ratio: f64,
    pub ratio_se: f64,
    /// Estimate of `E_x[exp(2 theta xi - 2 psi) u^2(X_1)] / u^2(x)`.
    pub second_moment: f64,
    pub second_moment_se: f64,
    /// `x > rho` and the ratio exceeds 1 by more than three standard errors.
    pub flagged: bool,
}

/// Monte Carlo check of the drift conditions for [`NonlinearAr`] with
/// `u(x) = exp(2.1 theta_u x^+)`.
pub fn check_drift_numeric(
    theta: f64,
    psi: f64,
    theta_u: f64,
    rho: f64,
    grid: &[f64],
    inner: usize,
    seed: u64,
) -> Vec<DriftPoint> {
    let streams = Streams::new(seed, Domain::Diagnostic, 0);
    grid.iter()
        .enumerate()
        .map(|(k, &x)| {
            let mut rng = streams.particle(k as u64, 0);
            let log_ux = log_u_drift(x, theta_u);
            let (mut s1, mut s2, mut q1, mut q2) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..inner {
                let (next, obs) = NonlinearAr::step(x, &mut rng);
                let v = (theta * obs - psi + log_u_drift(next, theta_u) - log_ux).exp();
                let v2 = v * v;
                s1 += v;
                q1 += v * v;
                s2 += v2;
                q2 += v2 * v2;
            }
            let n = inner as f64;
            let se = |s: f64, q: f64| ((q / n - (s / n).powi(2)).max(0.0) / (n - 1.0)).sqrt();
            let ratio = s1 / n;
            let ratio_se = se(s1, q1);
            DriftPoint {
                x,
                ratio,
                ratio_se,
                second_moment: s2 / n,
                second_moment_se: se(s2, q2),
                flagged: x > rho && ratio > 1.0 + 3.0 * ratio_se,
            }
        })
        .collect()
}
