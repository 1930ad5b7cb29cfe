//! The SISR particle system.
//!
//! Stages run `mutate(1), resample(1), ..., mutate(n - 1), resample(n - 1),
//! mutate(n)`; the terminal population is not resampled. Each particle
//! carries `log h`, the log of the product of `w_bar / w` along its lineage,
//! and its first-generation ancestor, which together give the unbiased
//! estimate and the martingale variance estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EventSpec, IncrementModel, ModelState};
use crate::rng::Streams;
use crate::schedules::{ParticleView, StopTime, WeightSchedule};

/// Below this log mean weight the stage is treated as degenerate.
const LOG_WEIGHT_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampler {
    /// Multinomial offspring, population fixed at `m`.
    Bootstrap,
    /// `floor(m_t W) + Bernoulli(frac(m_t W))` offspring; population drifts.
    Residual,
}

/// Result of one complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct SisrOutcome {
    pub estimate: f64,
    /// `sigma^2` estimate; the estimate's variance is about `variance / m`.
    pub variance: f64,
    pub final_population: usize,
    pub log_mean_weights: Vec<f64>,
}

pub struct ParticleSystem<'a> {
    model: &'a dyn IncrementModel,
    schedule: &'a WeightSchedule,
    event: &'a EventSpec,
    resampler: Resampler,
    streams: Streams,
    m0: usize,
    d: usize,
    t: usize,

    sum: Vec<f64>,
    state: Vec<ModelState>,
    log_h: Vec<f64>,
    log_l: Vec<f64>,
    origin: Vec<usize>,
    stop: Vec<StopTime>,
    crossed: Vec<bool>,
    potential: Vec<f64>,
    log_w: Vec<f64>,

    log_wbar: Vec<f64>,
    corrections: Vec<f64>,
    last_parents: Vec<usize>,
    last_offspring: Vec<usize>,
    last_log_mw: Vec<f64>,
}

impl<'a> ParticleSystem<'a> {
    pub fn new(
        m: usize,
        model: &'a dyn IncrementModel,
        schedule: &'a WeightSchedule,
        event: &'a EventSpec,
        resampler: Resampler,
        streams: Streams,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(format!("population size must be at least 2, got {m}")));
        }
        let d = model.dim();
        Ok(Self {
            model,
            schedule,
            event,
            resampler,
            streams,
            m0: m,
            d,
            t: 0,
            sum: vec![0.0; m * d],
            state: vec![model.initial_state(); m],
            log_h: vec![0.0; m],
            log_l: vec![0.0; m],
            origin: (0..m).collect(),
            stop: vec![None; m],
            crossed: vec![false; m],
            potential: vec![0.0; m],
            log_w: vec![0.0; m],
            log_wbar: Vec::new(),
            corrections: vec![0.0; m],
            last_parents: Vec::new(),
            last_offspring: Vec::new(),
            last_log_mw: Vec::new(),
        })
    }

    pub fn stage(&self) -> usize {
        self.t
    }

    pub fn population(&self) -> usize {
        self.log_h.len()
    }

    pub fn initial_population(&self) -> usize {
        self.m0
    }

    pub fn log_h(&self) -> &[f64] {
        &self.log_h
    }

    pub fn log_likelihood(&self) -> &[f64] {
        &self.log_l
    }

    /// First-generation ancestor of each particle (0-based).
    pub fn origins(&self) -> &[usize] {
        &self.origin
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    pub fn log_mean_weights(&self) -> &[f64] {
        &self.log_wbar
    }

    pub fn corrections(&self) -> &[f64] {
        &self.corrections
    }

    /// Running sum `S_t` of particle `i`.
    pub fn sum(&self, i: usize) -> &[f64] {
        &self.sum[i * self.d..(i + 1) * self.d]
    }

    /// Parent index of each particle produced by the last resampling step.
    pub fn last_parents(&self) -> &[usize] {
        &self.last_parents
    }

    /// Offspring count of each pre-resampling particle at the last step.
    pub fn last_offspring(&self) -> &[usize] {
        &self.last_offspring
    }

    /// `log(m_t W_i)` of each pre-resampling particle at the last step.
    pub fn last_log_mw(&self) -> &[f64] {
        &self.last_log_mw
    }

    /// Extends every particle by one increment and weights it.
    pub fn mutate(&mut self) -> Result<()> {
        let t = self.t + 1;
        let d = self.d;
        let mut xi = vec![0.0; d];
        for i in 0..self.population() {
            let mut rng = self.streams.particle(i as u64, t as u64);
            let prev_state = self.state[i];
            let state = self.model.sample(prev_state, &mut rng, &mut xi);
            let sum = &mut self.sum[i * d..(i + 1) * d];
            sum.iter_mut().zip(&xi).for_each(|(s, x)| *s += x);
            self.log_l[i] += self.model.log_likelihood_increment(prev_state, &xi);
            self.state[i] = state;
            let view =
                ParticleView { t, xi: &xi, sum, prev_state, state, stop: self.stop[i], potential: self.potential[i] };
            let w = self.schedule.weight(&view)?;
            self.stop[i] = self.schedule.advance_stop(&view);
            self.log_w[i] = w.log_w;
            self.potential[i] = w.potential;
            if !self.crossed[i] && self.event.crosses_at(sum, t) {
                self.crossed[i] = true;
            }
        }
        self.t = t;
        let log_wbar = log_mean(&self.log_w);
        if !log_wbar.is_finite() || log_wbar < LOG_WEIGHT_FLOOR || self.log_w.iter().any(|w| w.is_nan()) {
            return Err(Error::DegenerateWeights { stage: t, log_mean: log_wbar });
        }
        self.log_wbar.push(log_wbar);
        Ok(())
    }

    /// Selection step at the current stage.
    pub fn resample(&mut self) -> Result<()> {
        let m_t = self.population();
        let log_wbar = *self.log_wbar.last().ok_or_else(|| Error::Config("resample called before mutate".into()))?;
        // m_t W_i = w_i / w_bar
        let log_mw: Vec<f64> = self.log_w.iter().map(|w| w - log_wbar).collect();
        let mut rng = self.streams.resampling(self.t as u64);
        let offspring: Vec<usize> = match self.resampler {
            Resampler::Bootstrap => {
                let total = m_t as f64;
                let mut cumulative = Vec::with_capacity(m_t);
                let mut acc = 0.0;
                for lw in &log_mw {
                    acc += lw.exp() / total;
                    cumulative.push(acc);
                }
                let mut counts = vec![0usize; m_t];
                for _ in 0..self.m0 {
                    let u = rng.uniform() * acc;
                    let k = cumulative.partition_point(|c| *c <= u).min(m_t - 1);
                    counts[k] += 1;
                }
                counts
            }
            Resampler::Residual => log_mw
                .iter()
                .map(|lw| {
                    let mw = lw.exp();
                    let whole = mw.floor();
                    let u = rng.uniform();
                    whole as usize + usize::from(u < mw - whole)
                })
                .collect(),
        };
        let next_m: usize = offspring.iter().sum();
        if next_m == 0 {
            return Err(Error::PopulationCollapse { stage: self.t });
        }
        for (i, (&count, lw)) in offspring.iter().zip(&log_mw).enumerate() {
            self.corrections[self.origin[i]] += count as f64 - lw.exp();
        }
        let parents: Vec<usize> =
            offspring.iter().enumerate().flat_map(|(i, &count)| std::iter::repeat_n(i, count)).collect();
        let d = self.d;
        let mut sum = Vec::with_capacity(next_m * d);
        for &p in &parents {
            sum.extend_from_slice(&self.sum[p * d..(p + 1) * d]);
        }
        self.sum = sum;
        self.state = parents.iter().map(|&p| self.state[p]).collect();
        self.log_h = parents.iter().map(|&p| self.log_h[p] - log_mw[p]).collect();
        self.log_l = parents.iter().map(|&p| self.log_l[p]).collect();
        self.origin = parents.iter().map(|&p| self.origin[p]).collect();
        self.stop = parents.iter().map(|&p| self.stop[p]).collect();
        self.crossed = parents.iter().map(|&p| self.crossed[p]).collect();
        self.potential = parents.iter().map(|&p| self.potential[p]).collect();
        self.log_w = parents.iter().map(|&p| self.log_w[p]).collect();
        self.last_parents = parents;
        self.last_offspring = offspring;
        self.last_log_mw = log_mw;
        Ok(())
    }

    /// `f_n h_{n-1}` of each terminal particle: `L h 1{event}`.
    fn terminal_terms(&self) -> Vec<f64> {
        (0..self.population())
            .map(|i| {
                if self.event.holds(self.sum(i), self.crossed[i]) {
                    (self.log_l[i] + self.log_h[i]).exp()
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `m_n^{-1} sum_i L h_{n-1} 1{event}`.
    pub fn estimate(&self) -> f64 {
        self.terminal_terms().iter().sum::<f64>() / self.population() as f64
    }

    /// `m^{-1} sum_j ( sum_{i: a(i) = j} f_n h_{n-1} - (1 + corr_j) alpha )^2`
    /// over the initial population `j`.
    pub fn variance_estimate(&self, alpha: f64) -> f64 {
        let mut per_origin = vec![0.0; self.m0];
        for (term, &o) in self.terminal_terms().iter().zip(&self.origin) {
            per_origin[o] += term;
        }
        per_origin.iter().zip(&self.corrections).map(|(s, c)| (s - (1.0 + c) * alpha).powi(2)).sum::<f64>()
            / self.m0 as f64
    }

    /// Runs all remaining stages up to the event horizon.
    pub fn run(&mut self) -> Result<SisrOutcome> {
        let n = self.event.horizon();
        while self.t < n {
            self.mutate()?;
            if self.t < n {
                self.resample()?;
            }
        }
        let estimate = self.estimate();
        Ok(SisrOutcome {
            estimate,
            variance: self.variance_estimate(estimate),
            final_population: self.population(),
            log_mean_weights: self.log_wbar.clone(),
        })
    }
}

/// `log(mean(exp(xs)))`, exact when all entries are equal.
fn log_mean(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mean = xs.iter().map(|x| (x - max).exp()).sum::<f64>() / xs.len() as f64;
    max + mean.ln()
}

/// `gamma(x) = (x - floor x)(1 - x + floor x) / x`, the Bernoulli variance of
/// residual rounding per unit of expected offspring.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma needs x > 0, got {x}")));
    }
    let frac = x - x.floor();
    Ok(frac * (1.0 - frac) / x)
}
