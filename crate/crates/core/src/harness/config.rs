//! JSON experiment configuration and its resolution into runtime objects.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::Resampler;
use crate::error::{Error, Result};
use crate::exp_family::{compute_rate_bound, theta_star, CumulantModel, LevelSet};
use crate::models::{
    BernoulliWalk, EventSpec, GaussianWalk, IncrementModel, MixtureSquaresWalk, NonlinearAr, PointMassWalk, Statistic,
    TwoPointWalk,
};
use crate::schedules::{StopRule, WeightSchedule};
use crate::spectral::{discretize_ar, psi_markov, solve_tilt, DiscreteChain, SpectralCumulant};

/// Current schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub model: ModelConfig,
    pub event: EventConfig,
    pub schedule: ScheduleConfig,
    #[serde(default = "default_resampler")]
    pub resampler: Resampler,
    /// Subgroup size.
    pub k: usize,
    /// Number of subgroups.
    pub r: usize,
    /// Optional cross-check of `k * r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_total: Option<usize>,
    pub seed: u64,
    /// Also run direct Monte Carlo with `k * r` paths.
    #[serde(default)]
    pub direct_mc: bool,
    /// Directory for `report.json` and `results.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_resampler() -> Resampler {
    Resampler::Bootstrap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
    },
    Bernoulli {
        p: f64,
    },
    TwoPoint {
        p_up: f64,
    },
    PointMass {
        value: Vec<f64>,
    },
    MixtureSquares,
    NonlinearAr {
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        grid: GridConfig,
    },
}

fn one() -> f64 {
    1.0
}

/// Finite-state grid `x_i = i * step + offset`, `i = 1..=n_states`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_states: usize,
    pub offset: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_states: 1000, offset: -2.505, step: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticConfig {
    Identity,
    SelfNormalized,
}

impl From<StatisticConfig> for Statistic {
    fn from(s: StatisticConfig) -> Self {
        match s {
            StatisticConfig::Identity => Statistic::Identity,
            StatisticConfig::SelfNormalized => Statistic::SelfNormalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventConfig {
    FixedHorizon {
        #[serde(default = "identity")]
        statistic: StatisticConfig,
        b: f64,
        n: usize,
    },
    BoundaryCrossing {
        #[serde(default = "identity")]
        statistic: StatisticConfig,
        c: f64,
        n0: usize,
        n1: usize,
    },
}

fn identity() -> StatisticConfig {
    StatisticConfig::Identity
}

impl EventConfig {
    pub fn horizon(&self) -> usize {
        match self {
            EventConfig::FixedHorizon { n, .. } => *n,
            EventConfig::BoundaryCrossing { n1, .. } => *n1,
        }
    }
}

/// A tilt given as a number (d = 1) or a vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tilt {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Tilt {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Tilt::Scalar(t) => vec![*t],
            Tilt::Vector(v) => v.clone(),
        }
    }
}

/// Weight schedule. Omitted tilts and rate bounds are computed from the
/// model and the event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Uniform,
    FixedTilt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Tilt>,
    },
    AdaptiveTilt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
    },
    StoppedFixed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    StoppedAdaptive {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
    },
    DriftWeighted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
        /// Exponent parameter of `u`; defaults to `theta`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift_theta: Option<f64>,
    },
}

impl ScheduleConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleConfig::Uniform => "uniform",
            ScheduleConfig::FixedTilt { .. } => "fixed_tilt",
            ScheduleConfig::AdaptiveTilt { .. } => "adaptive_tilt",
            ScheduleConfig::StoppedFixed { .. } => "stopped_fixed",
            ScheduleConfig::StoppedAdaptive { .. } => "stopped_adaptive",
            ScheduleConfig::DriftWeighted { .. } => "drift_weighted",
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn m_total(&self) -> usize {
        self.k * self.r
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "field `version`: unsupported schema version {}, expected {SCHEMA_VERSION}",
                self.version
            )));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("field `k`: subgroup size must be at least 2, got {}", self.k)));
        }
        if self.r < 2 {
            return Err(Error::Config(format!(
                "field `r`: need at least 2 subgroups for a standard error, got {}",
                self.r
            )));
        }
        if let Some(m) = self.m_total {
            if m != self.m_total() {
                return Err(Error::Config(format!("field `m_total`: {m} != k * r = {}", self.m_total())));
            }
        }
        match self.model {
            ModelConfig::Bernoulli { p } if !(p > 0.0 && p < 1.0) => {
                return Err(Error::Config(format!("field `model.p`: {p} is not in (0, 1)")));
            }
            ModelConfig::TwoPoint { p_up } if !(p_up > 0.0 && p_up < 1.0) => {
                return Err(Error::Config(format!("field `model.p_up`: {p_up} is not in (0, 1)")));
            }
            ModelConfig::Gaussian { sd, .. } if !(sd > 0.0) => {
                return Err(Error::Config(format!("field `model.sd`: {sd} must be positive")));
            }
            _ => {}
        }
        let stopped =
            matches!(self.schedule, ScheduleConfig::StoppedFixed { .. } | ScheduleConfig::StoppedAdaptive { .. });
        if stopped && !matches!(self.event, EventConfig::BoundaryCrossing { .. }) {
            return Err(Error::Config("field `schedule`: stopped schedules need a boundary_crossing event".into()));
        }
        if matches!(self.schedule, ScheduleConfig::DriftWeighted { .. })
            && !matches!(self.model, ModelConfig::NonlinearAr { .. })
        {
            return Err(Error::Config("field `schedule`: drift_weighted needs the nonlinear_ar model".into()));
        }
        Ok(())
    }

    /// Builds the model, event and schedule, solving for any tilt or rate
    /// bound the configuration leaves open.
    pub fn resolve(&self) -> Result<Experiment> {
        self.validate()?;
        let (model, cumulant, chain): (Arc<dyn IncrementModel>, Arc<dyn CumulantModel>, Option<DiscreteChain>) =
            match &self.model {
                ModelConfig::NonlinearAr { x0, grid } => {
                    let chain = discretize_ar(grid.n_states, grid.offset, grid.step)?;
                    let cumulant = Arc::new(SpectralCumulant { chain: chain.clone() });
                    (Arc::new(NonlinearAr { x0: *x0 }), cumulant, Some(chain))
                }
                other => {
                    let model: Arc<dyn IncrementModel> = match other {
                        ModelConfig::Gaussian { mean, sd } => Arc::new(GaussianWalk { mean: *mean, sd: *sd }),
                        ModelConfig::Bernoulli { p } => Arc::new(BernoulliWalk { p: *p }),
                        ModelConfig::TwoPoint { p_up } => Arc::new(TwoPointWalk { p_up: *p_up }),
                        ModelConfig::PointMass { value } => Arc::new(PointMassWalk { value: value.clone() }),
                        ModelConfig::MixtureSquares => Arc::new(MixtureSquaresWalk),
                        ModelConfig::NonlinearAr { .. } => unreachable!(),
                    };
                    let cumulant = model.cumulant().expect("built-in i.i.d. models have closed-form cumulants");
                    (model, cumulant, None)
                }
            };

        let event = match self.event {
            EventConfig::FixedHorizon { statistic, b, n } => EventSpec::FixedHorizon { g: statistic.into(), b, n },
            EventConfig::BoundaryCrossing { statistic, c, n0, n1 } => {
                EventSpec::BoundaryCrossing { g: statistic.into(), c, n0, n1 }
            }
        };
        if chain.is_none() {
            event.validate(&cumulant.mean())?;
        }
        // level defining the rate bound: b, or c / n0 for crossing events
        let (g, level) = match &event {
            EventSpec::FixedHorizon { g, b, .. } => (g.clone(), *b),
            EventSpec::BoundaryCrossing { g, c, n0, .. } => (g.clone(), c / *n0 as f64),
        };
        let stop_rule = match &event {
            EventSpec::BoundaryCrossing { g, c, n0, n1 } => Some(StopRule { g: g.clone(), c: *c, n0: *n0, n1: *n1 }),
            EventSpec::FixedHorizon { .. } => None,
        };
        let rate_bound = |given: Option<f64>| -> Result<f64> {
            match given {
                Some(rate) => Ok(rate),
                None => Ok(compute_rate_bound(cumulant.as_ref(), &|mu: &[f64]| g.eval(mu), level)?.rate),
            }
        };

        let mut resolved = Resolved::default();
        let schedule = match &self.schedule {
            ScheduleConfig::Uniform => WeightSchedule::Uniform,
            ScheduleConfig::FixedTilt { theta } => {
                let theta = match (theta, &chain) {
                    (Some(t), _) => t.to_vec(),
                    (None, Some(chain)) => vec![solve_tilt(chain, level)?],
                    (None, None) => compute_rate_bound(cumulant.as_ref(), &|mu: &[f64]| g.eval(mu), level)?.theta_star,
                };
                if theta.len() != cumulant.dim() {
                    return Err(Error::Config(format!(
                        "field `schedule.theta`: expected {} components, got {}",
                        cumulant.dim(),
                        theta.len()
                    )));
                }
                let psi = cumulant.psi(&theta);
                resolved.theta = Some(theta.clone());
                resolved.psi = Some(psi);
                WeightSchedule::FixedTilt { theta, psi }
            }
            ScheduleConfig::AdaptiveTilt { rate } => {
                let rate = rate_bound(*rate)?;
                resolved.rate = Some(rate);
                WeightSchedule::AdaptiveTilt { level_set: Arc::new(LevelSet::new(cumulant.clone(), rate)?) }
            }
            ScheduleConfig::StoppedFixed { theta } => {
                let theta = match theta {
                    Some(t) => *t,
                    None => theta_star(cumulant.as_ref())?,
                };
                let psi = cumulant.psi(&[theta]);
                resolved.theta = Some(vec![theta]);
                resolved.psi = Some(psi);
                WeightSchedule::StoppedFixed { theta: vec![theta], psi, stop: stop_rule.clone().expect("validated") }
            }
            ScheduleConfig::StoppedAdaptive { rate } => {
                let rate = rate_bound(*rate)?;
                resolved.rate = Some(rate);
                WeightSchedule::StoppedAdaptive {
                    level_set: Arc::new(LevelSet::new(cumulant.clone(), rate)?),
                    stop: stop_rule.clone().expect("validated"),
                }
            }
            ScheduleConfig::DriftWeighted { theta, drift_theta } => {
                let chain = chain.as_ref().expect("validated");
                let theta = match theta {
                    Some(t) => *t,
                    None => solve_tilt(chain, level)?,
                };
                let psi = psi_markov(chain, theta)?;
                resolved.theta = Some(vec![theta]);
                resolved.psi = Some(psi);
                WeightSchedule::DriftWeighted { theta, psi, drift_theta: drift_theta.unwrap_or(theta) }
            }
        };
        Ok(Experiment { model, event, schedule, resampler: self.resampler, resolved })
    }
}

/// Parameters computed while resolving a configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

/// Runtime objects of one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: Arc<dyn IncrementModel>,
    pub event: EventSpec,
    pub schedule: WeightSchedule,
    pub resampler: Resampler,
    pub resolved: Resolved,
}
