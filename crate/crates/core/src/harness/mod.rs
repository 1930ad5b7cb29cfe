//! Experiment orchestration: direct Monte Carlo, subgroup runs with batch
//! standard errors, and report output.

mod config;
pub mod oracle;
pub mod presets;

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use config::{
    EventConfig, Experiment, ExperimentConfig, GridConfig, ModelConfig, Resolved, ScheduleConfig, StatisticConfig,
    Tilt, SCHEMA_VERSION,
};

use crate::engine::{ParticleSystem, Resampler};
use crate::error::{Error, Result};
use crate::models::{EventSpec, IncrementModel};
use crate::rng::{Domain, Streams};
use crate::schedules::WeightSchedule;

/// Direct Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectEstimate {
    pub estimate: f64,
    /// `sqrt(alpha (1 - alpha) / m)`.
    pub se: f64,
    pub hits: usize,
    pub m: usize,
}

/// Fraction of `m` independent nominal paths in the event.
pub fn direct_mc(model: &dyn IncrementModel, event: &EventSpec, m: usize, seed: u64) -> Result<DirectEstimate> {
    if m < 2 {
        return Err(Error::Config(format!("direct Monte Carlo needs m >= 2, got {m}")));
    }
    let streams = Streams::new(seed, Domain::Direct, 0);
    let d = model.dim();
    let n = event.horizon();
    let mut sum = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut hits = 0;
    for path in 0..m as u64 {
        sum.iter_mut().for_each(|s| *s = 0.0);
        let mut state = model.initial_state();
        let mut crossed = false;
        for t in 1..=n {
            let mut rng = streams.particle(path, t as u64);
            state = model.sample(state, &mut rng, &mut xi);
            sum.iter_mut().zip(&xi).for_each(|(s, x)| *s += x);
            crossed = crossed || event.crosses_at(&sum, t);
        }
        if event.holds(&sum, crossed) {
            hits += 1;
        }
    }
    let estimate = hits as f64 / m as f64;
    Ok(DirectEstimate { estimate, se: (estimate * (1.0 - estimate) / m as f64).sqrt(), hits, m })
}

/// Subgroup design: `r` independent SISR runs of `k` particles each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Design {
    pub k: usize,
    pub r: usize,
    pub resampler: Resampler,
    pub seed: u64,
}

/// Aggregate of `r` subgroup runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupSummary {
    /// Mean of the subgroup estimates.
    pub estimate: f64,
    /// `sigma / sqrt(r)` with `sigma^2` the sample variance across subgroups.
    pub se: f64,
    pub subgroups: Vec<f64>,
}

impl SubgroupSummary {
    pub fn from_estimates(subgroups: Vec<f64>) -> Self {
        let r = subgroups.len() as f64;
        let estimate = subgroups.iter().sum::<f64>() / r;
        let var = subgroups.iter().map(|a| (a - estimate).powi(2)).sum::<f64>() / (r - 1.0);
        Self { estimate, se: (var / r).sqrt(), subgroups }
    }

    /// `sigma^2` across subgroups, i.e. `r se^2`.
    pub fn sigma2(&self) -> f64 {
        self.se * self.se * self.subgroups.len() as f64
    }
}

/// Runs the subgroups on `threads` workers (0 = all cores). Results do not
/// depend on `threads`.
pub fn run_subgroups(
    model: &dyn IncrementModel,
    schedule: &WeightSchedule,
    event: &EventSpec,
    design: Design,
    threads: usize,
) -> Result<SubgroupSummary> {
    run_subgroups_with(model, schedule, event, design, threads, |j| Streams::new(design.seed, Domain::Sisr, j as u64))
}

/// [`run_subgroups`] with caller-chosen streams per subgroup index.
pub fn run_subgroups_with<F>(
    model: &dyn IncrementModel,
    schedule: &WeightSchedule,
    event: &EventSpec,
    design: Design,
    threads: usize,
    streams: F,
) -> Result<SubgroupSummary>
where
    F: Fn(usize) -> Streams + Sync,
{
    use rayon::prelude::*;
    if design.k < 2 || design.r < 2 {
        return Err(Error::Config(format!("need k >= 2 and r >= 2, got k = {}, r = {}", design.k, design.r)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<f64>> = pool.install(|| {
        (0..design.r)
            .into_par_iter()
            .map(|j| {
                let mut system = ParticleSystem::new(design.k, model, schedule, event, design.resampler, streams(j))?;
                Ok(system.run()?.estimate)
            })
            .collect()
    });
    let estimates = results
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| Error::Subgroup { index, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubgroupSummary::from_estimates(estimates))
}

/// Variance-reduction ratio `(sigma_D / sigma_SISR)^2`, or "n/a".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Ratio {
    Value(f64),
    #[serde(serialize_with = "na")]
    NotAvailable,
}

fn na<S: serde::Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str("n/a")
}

impl Ratio {
    /// Compares per-path standard deviations; `n/a` when direct MC saw no hits.
    pub fn new(direct: &DirectEstimate, sisr: &SubgroupSummary, m_total: usize) -> Self {
        if direct.hits == 0 || sisr.se == 0.0 {
            return Ratio::NotAvailable;
        }
        let sigma_d2 = direct.estimate * (1.0 - direct.estimate);
        let sigma_s2 = sisr.se * sisr.se * m_total as f64;
        Ratio::Value(sigma_d2 / sigma_s2)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Value(v) => write!(f, "{v:.1}"),
            Ratio::NotAvailable => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub method: String,
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub subgroups: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct: Option<DirectEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_reduction: Option<Ratio>,
    pub seconds: f64,
    pub seed: u64,
    pub resolved: Resolved,
    pub config: ExperimentConfig,
}

impl RunReport {
    /// Report with the timing zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self { seconds: 0.0, ..self.clone() }
    }
}

/// Runs the configured SISR subgroups and the optional direct baseline.
pub fn run_config(config: &ExperimentConfig, threads: usize) -> Result<RunReport> {
    let start = Instant::now();
    let experiment = config.resolve()?;
    let design = Design { k: config.k, r: config.r, resampler: config.resampler, seed: config.seed };
    let summary = run_subgroups(experiment.model.as_ref(), &experiment.schedule, &experiment.event, design, threads)?;
    let direct = if config.direct_mc {
        Some(direct_mc(experiment.model.as_ref(), &experiment.event, config.m_total(), config.seed)?)
    } else {
        None
    };
    let variance_reduction = direct.as_ref().map(|d| Ratio::new(d, &summary, config.m_total()));
    Ok(RunReport {
        method: config.schedule.name().to_string(),
        n: experiment.event.horizon(),
        estimate: summary.estimate,
        se: summary.se,
        subgroups: summary.subgroups,
        direct,
        variance_reduction,
        seconds: start.elapsed().as_secs_f64(),
        seed: config.seed,
        resolved: experiment.resolved,
        config: config.clone(),
    })
}

/// `(1.10 ± 0.07) × 10^-3`, sharing the exponent of the estimate.
pub fn format_estimate(estimate: f64, se: f64) -> String {
    if estimate == 0.0 || !estimate.is_finite() {
        return format!("{estimate} ± {se:.2e}");
    }
    let exp = estimate.abs().log10().floor() as i32;
    let scale = 10f64.powi(exp);
    format!("({:.2} ± {:.2}) × 10^{exp}", estimate / scale, se / scale)
}

pub const CSV_HEADER: [&str; 10] = ["method", "n", "theta", "estimate", "se", "m", "k", "r", "seed", "seconds"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub method: String,
    pub n: usize,
    pub theta: String,
    pub estimate: f64,
    pub se: f64,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub seed: u64,
    pub seconds: f64,
}

impl RunReport {
    /// One row for the SISR run, plus one for direct MC when present.
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let theta = match &self.resolved.theta {
            Some(t) => t.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";"),
            None => String::new(),
        };
        let m = self.config.m_total();
        let mut rows = vec![CsvRow {
            method: self.method.clone(),
            n: self.n,
            theta,
            estimate: self.estimate,
            se: self.se,
            m,
            k: self.config.k,
            r: self.config.r,
            seed: self.seed,
            seconds: self.seconds,
        }];
        if let Some(d) = &self.direct {
            rows.push(CsvRow {
                method: "direct".into(),
                n: self.n,
                theta: String::new(),
                estimate: d.estimate,
                se: d.se,
                m: d.m,
                k: d.m,
                r: 1,
                seed: self.seed,
                seconds: 0.0,
            });
        }
        rows
    }

    /// Console line for the SISR estimate and, when run, direct MC.
    pub fn console_lines(&self) -> Vec<String> {
        let mut lines =
            vec![format!("{:<16} n={:<3} {}", self.method, self.n, format_estimate(self.estimate, self.se))];
        if let Some(d) = &self.direct {
            lines.push(format!("{:<16} n={:<3} {}", "direct", self.n, format_estimate(d.estimate, d.se)));
        }
        if let Some(ratio) = &self.variance_reduction {
            lines.push(format!("{:<16} {ratio}", "variance ratio"));
        }
        lines
    }
}

/// Writes `report.json` (an array of reports) and `results.csv` into `dir`.
pub fn write_outputs(dir: &Path, reports: &[RunReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(reports).map_err(|e| Error::Io(e.into()))?;
    fs::write(dir.join("report.json"), json)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(dir.join("results.csv")).map_err(csv_io)?;
    writer.write_record(CSV_HEADER).map_err(csv_io)?;
    for row in reports.iter().flat_map(RunReport::csv_rows) {
        writer.serialize(row).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Runs a config, prints the console table and writes the output files to
/// `out` (or the config's own `output`, if any).
pub fn run_experiment(config: &ExperimentConfig, threads: usize, out: Option<&Path>) -> Result<RunReport> {
    let report = run_config(config, threads)?;
    for line in report.console_lines() {
        println!("{line}");
    }
    if let Some(dir) = out.or(config.output.as_deref()) {
        write_outputs(dir, std::slice::from_ref(&report))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BernoulliWalk, PointMassWalk, Statistic};

    #[test]
    fn impossible_event_gives_zero() {
        let event = EventSpec::FixedHorizon { g: Statistic::Identity, b: 2.0, n: 5 };
        let d = direct_mc(&BernoulliWalk { p: 0.5 }, &event, 100, 1).unwrap();
        assert_eq!((d.estimate, d.se, d.hits), (0.0, 0.0, 0));
    }

    #[test]
    fn sure_event_gives_one() {
        let event = EventSpec::FixedHorizon { g: Statistic::Identity, b: 0.5, n: 3 };
        let d = direct_mc(&PointMassWalk { value: vec![1.0] }, &event, 10, 1).unwrap();
        assert_eq!(d.estimate, 1.0);
    }

    #[test]
    fn identical_subgroups_have_zero_se() {
        let event = EventSpec::FixedHorizon { g: Statistic::Identity, b: 0.6, n: 6 };
        let design = Design { k: 50, r: 2, resampler: Resampler::Bootstrap, seed: 9 };
        let s = run_subgroups_with(&BernoulliWalk { p: 0.3 }, &WeightSchedule::Uniform, &event, design, 1, |_| {
            Streams::new(9, Domain::Sisr, 0)
        })
        .unwrap();
        assert_eq!(s.subgroups[0], s.subgroups[1]);
        assert_eq!(s.se, 0.0);
    }

    #[test]
    fn mean_is_exact_fold() {
        let s = SubgroupSummary::from_estimates(vec![0.1, 0.2, 0.4]);
        assert_eq!(s.estimate, (0.1 + 0.2 + 0.4) / 3.0);
    }

    #[test]
    fn formatting() {
        assert_eq!(format_estimate(1.1e-3, 7e-5), "(1.10 ± 0.07) × 10^-3");
        assert_eq!(format_estimate(8.31e-4, 4.8e-5), "(8.31 ± 0.48) × 10^-4");
    }

    #[test]
    fn ratio_is_na_without_hits() {
        let d = DirectEstimate { estimate: 0.0, se: 0.0, hits: 0, m: 10 };
        let s = SubgroupSummary::from_estimates(vec![1e-5, 2e-5]);
        assert_eq!(Ratio::new(&d, &s, 10), Ratio::NotAvailable);
        assert_eq!(serde_json::to_string(&Ratio::NotAvailable).unwrap(), "\"n/a\"");
    }
}
