//! Resampling weights `w_t` for SISR with the increments sampled from their
//! nominal law.
//!
//! All weights are produced as logs. Adaptive schedules carry a per-particle
//! potential `theta_t . S_t - t psi(theta_t)` so the weight at stage `t` is
//! the difference of two potentials and the product of weights telescopes.

use std::sync::Arc;

use crate::error::Result;
use crate::exp_family::{CumulantModel, LevelSet};
use crate::models::{log_u_drift, ModelState, Statistic};
use crate::numeric::dot;

/// `T_c = inf { n >= n0 : n g(S_n / n) >= c } ^ n1`.
#[derive(Debug, Clone)]
pub struct StopRule {
    pub g: Statistic,
    pub c: f64,
    pub n0: usize,
    pub n1: usize,
}

impl StopRule {
    /// Whether the path stops at stage `t` given it has not stopped before.
    pub fn stops_at(&self, sum: &[f64], t: usize) -> bool {
        t >= self.n1 || (t >= self.n0 && t as f64 * self.g.eval_sum(sum, t) >= self.c)
    }

    /// Threshold `c / n0` on `g(mu)` that defines the level set for the
    /// stopped adaptive schedule.
    pub fn level(&self) -> f64 {
        self.c / self.n0 as f64
    }
}

/// Stop status of a particle: the stage `T_c` once reached.
pub type StopTime = Option<usize>;

/// What a schedule may look at when weighting one particle at stage `t`.
#[derive(Debug, Clone, Copy)]
pub struct ParticleView<'a> {
    pub t: usize,
    pub xi: &'a [f64],
    /// `S_t`, including `xi`.
    pub sum: &'a [f64],
    pub prev_state: ModelState,
    pub state: ModelState,
    pub stop: StopTime,
    /// Potential carried from stage `t - 1` (0 at `t = 1`).
    pub potential: f64,
}

/// Log weight and the potential to carry to the next stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageWeight {
    pub log_w: f64,
    pub potential: f64,
}

#[derive(Debug, Clone)]
pub enum WeightSchedule {
    /// `w = 1`: plain bootstrap selection, the baseline.
    Uniform,
    /// `w = exp(theta . xi - psi(theta))`.
    FixedTilt { theta: Vec<f64>, psi: f64 },
    /// Potentials of `theta_t = argmax_{M} { theta . S_t / t - psi(theta) }`.
    AdaptiveTilt { level_set: Arc<LevelSet> },
    /// Fixed tilt up to `T_c`, then 1.
    StoppedFixed { theta: Vec<f64>, psi: f64, stop: StopRule },
    /// Adaptive tilt up to `T_c`, then 1.
    StoppedAdaptive { level_set: Arc<LevelSet>, stop: StopRule },
    /// `w = exp(theta xi - psi) u(X_t) / u(X_{t-1})` with
    /// `u(x) = exp(2.1 drift_theta x^+)`.
    DriftWeighted { theta: f64, psi: f64, drift_theta: f64 },
}

impl WeightSchedule {
    /// Fixed tilt at `theta` with `psi(theta)` taken from `model`.
    pub fn fixed_tilt(model: &dyn CumulantModel, theta: Vec<f64>) -> Self {
        let psi = model.psi(&theta);
        WeightSchedule::FixedTilt { theta, psi }
    }

    pub fn stop_rule(&self) -> Option<&StopRule> {
        match self {
            WeightSchedule::StoppedFixed { stop, .. } | WeightSchedule::StoppedAdaptive { stop, .. } => Some(stop),
            _ => None,
        }
    }

    pub fn weight(&self, view: &ParticleView<'_>) -> Result<StageWeight> {
        let same = |log_w: f64| StageWeight { log_w, potential: view.potential };
        let stopped = matches!(view.stop, Some(tc) if view.t > tc);
        Ok(match self {
            WeightSchedule::Uniform => same(0.0),
            WeightSchedule::FixedTilt { theta, psi } => same(dot(theta, view.xi) - psi),
            WeightSchedule::AdaptiveTilt { level_set } => adaptive(level_set, view)?,
            WeightSchedule::StoppedFixed { theta, psi, .. } => {
                if stopped {
                    same(0.0)
                } else {
                    same(dot(theta, view.xi) - psi)
                }
            }
            WeightSchedule::StoppedAdaptive { level_set, .. } => {
                if stopped {
                    same(0.0)
                } else {
                    adaptive(level_set, view)?
                }
            }
            WeightSchedule::DriftWeighted { theta, psi, drift_theta } => {
                let tilt = theta * view.xi[0] - psi;
                let drift =
                    log_u_drift(view.state.value(), *drift_theta) - log_u_drift(view.prev_state.value(), *drift_theta);
                same(tilt + drift)
            }
        })
    }

    /// Stop status after stage `t`; call after [`weight`](Self::weight).
    pub fn advance_stop(&self, view: &ParticleView<'_>) -> StopTime {
        match (self.stop_rule(), view.stop) {
            (Some(rule), None) if rule.stops_at(view.sum, view.t) => Some(view.t),
            (_, stop) => stop,
        }
    }
}

fn adaptive(level_set: &LevelSet, view: &ParticleView<'_>) -> Result<StageWeight> {
    let theta = level_set.argmax(view.sum, view.t)?;
    let potential = dot(&theta, view.sum) - view.t as f64 * level_set.model().psi(&theta);
    Ok(StageWeight { log_w: potential - view.potential, potential })
}
