//! Settings with exactly known tail probabilities.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{
    EventConfig, ExperimentConfig, ModelConfig, ScheduleConfig, StatisticConfig, Tilt, SCHEMA_VERSION,
};
use super::{run_config, RunReport};
use crate::engine::Resampler;
use crate::error::Result;

/// `P{ S_n / n >= b }` for i.i.d. N(0, 1) increments: `Phi_bar(b sqrt n)`.
pub fn gaussian_tail(b: f64, n: usize) -> f64 {
    Normal::standard().sf(b * (n as f64).sqrt())
}

/// `P{ Binomial(n, p) >= j_min }` by enumeration.
pub fn binomial_tail(n: usize, p: f64, j_min: usize) -> f64 {
    (j_min..=n).map(|j| binomial(n, j) * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32)).sum()
}

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// N(0, 1) walk, `n = 25`, `b = 0.8`, fixed tilt at `theta = b`.
pub fn gaussian_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        version: SCHEMA_VERSION,
        model: ModelConfig::Gaussian { mean: 0.0, sd: 1.0 },
        event: EventConfig::FixedHorizon { statistic: StatisticConfig::Identity, b: 0.8, n: 25 },
        schedule: ScheduleConfig::FixedTilt { theta: Some(Tilt::Scalar(0.8)) },
        resampler: Resampler::Bootstrap,
        k: 100,
        r: 100,
        m_total: Some(10_000),
        seed,
        direct_mc: false,
        output: None,
    }
}

/// Bernoulli(0.3) walk, `n = 8`, `b = 7/8`, fixed tilt from the rate bound.
pub fn binomial_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        version: SCHEMA_VERSION,
        model: ModelConfig::Bernoulli { p: 0.3 },
        event: EventConfig::FixedHorizon { statistic: StatisticConfig::Identity, b: 0.875, n: 8 },
        schedule: ScheduleConfig::FixedTilt { theta: None },
        resampler: Resampler::Bootstrap,
        k: 100,
        r: 100,
        m_total: Some(10_000),
        seed,
        direct_mc: true,
        output: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub exact: f64,
    /// `|estimate - exact| / se`.
    pub z: f64,
    pub report: RunReport,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.z <= 3.0
    }
}

/// Config and exact value of a named oracle.
pub fn oracle(name: &str, seed: u64) -> Option<(ExperimentConfig, f64)> {
    match name {
        "gaussian" => Some((gaussian_config(seed), gaussian_tail(0.8, 25))),
        "binomial" => Some((binomial_config(seed), binomial_tail(8, 0.3, 7))),
        _ => None,
    }
}

/// Runs `config` and compares the estimate with `exact`.
pub fn check(name: &str, config: &ExperimentConfig, exact: f64, threads: usize) -> Result<OracleCheck> {
    let report = run_config(config, threads)?;
    let z = (report.estimate - exact).abs() / report.se;
    Ok(OracleCheck { name: name.to_string(), exact, z, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        let exact = 8.0 * 0.3f64.powi(7) * 0.7 + 0.3f64.powi(8);
        assert!((binomial_tail(8, 0.3, 7) / exact - 1.0).abs() < 1e-13);
        assert!((binomial_tail(8, 0.3, 0) - 1.0).abs() < 1e-14);
        assert!((gaussian_tail(0.8, 25) / 3.1671241833119965e-5 - 1.0).abs() < 1e-9, "{}", gaussian_tail(0.8, 25));
    }
}
