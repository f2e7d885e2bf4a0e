//! Observation containers: individual event histories and interval counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Infectious period of one individual, either observed or right-censored at
/// the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub duration: f64,
    pub censored: bool,
}

/// Individual-level output of an exact simulation on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Infection times of the `K` initially susceptible individuals infected by `T`, sorted.
    pub infection_times: Vec<f64>,
    /// Infectious period of each infected individual, aligned with `infection_times`.
    /// Censored entries carry `T - t_i`.
    pub infectious_periods: Vec<Period>,
    /// Observed infectious periods of the initially infected who recovered by `T`.
    pub initial_recoveries: Vec<f64>,
    /// Number of initially infected still infectious at `T`.
    pub initial_censored: u64,
    pub n: u64,
    pub m: u64,
    pub t_end: f64,
}

impl EventRecord {
    /// Number infected by `T` among the initial susceptibles.
    pub fn k(&self) -> usize {
        self.infection_times.len()
    }

    /// Number of newly infected individuals who recovered by `T`.
    pub fn recovered(&self) -> usize {
        self.infectious_periods.iter().filter(|p| !p.censored).count()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k as u64 > self.n {
            return Err(Error::Domain(format!("{k} infections exceed N = {}", self.n)));
        }
        if self.infectious_periods.len() != k {
            return Err(Error::Domain("one infectious period is required per infection".into()));
        }
        if self.initial_recoveries.len() as u64 + self.initial_censored != self.m {
            return Err(Error::Domain("initially infected bookkeeping does not add up to M".into()));
        }
        if self.infection_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("infection times must be sorted".into()));
        }
        if let Some(&t) = self.infection_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(Error::Domain(format!("infection time {t} outside [0, {}]", self.t_end)));
        }
        for (t, p) in self.infection_times.iter().zip(&self.infectious_periods) {
            if p.duration < 0.0 || t + p.duration > self.t_end * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Domain(format!("infectious period {} starting at {t} leaves [0, T]", p.duration)));
            }
        }
        if self.initial_recoveries.iter().any(|&e| !(0.0..=self.t_end).contains(&e)) {
            return Err(Error::Domain("initial recovery outside [0, T]".into()));
        }
        Ok(())
    }
}

/// Infection counts over a discrete observation schedule `0 = X_0 < ... < X_P = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountData {
    pub schedule: Vec<f64>,
    /// `counts[j]` is the number of infections in `(X_j, X_{j+1}]`.
    pub counts: Vec<u64>,
    /// Initial susceptibles, if known.
    pub n: Option<u64>,
    /// Initial infected, if known.
    pub m: Option<u64>,
}

impl CountData {
    pub fn new(schedule: Vec<f64>, counts: Vec<u64>, n: Option<u64>, m: Option<u64>) -> Result<Self> {
        let data = CountData { schedule, counts, n, m };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        validate_schedule(&self.schedule)?;
        if self.counts.len() + 1 != self.schedule.len() {
            return Err(Error::Domain(format!(
                "{} counts for a schedule of {} points",
                self.counts.len(),
                self.schedule.len()
            )));
        }
        if let Some(n) = self.n {
            if self.total() > n {
                return Err(Error::Domain(format!("total count {} exceeds N = {n}", self.total())));
            }
        }
        Ok(())
    }

    /// Total number of infections `K`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn t_end(&self) -> f64 {
        *self.schedule.last().expect("validated schedule")
    }

    pub fn intervals(&self) -> usize {
        self.counts.len()
    }
}

/// Checks `0 = X_0 < X_1 < ... < X_P` with `P >= 1`.
pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < 2 {
        return Err(Error::Domain("schedule needs at least one interval".into()));
    }
    if schedule[0] != 0.0 {
        return Err(Error::Domain(format!("schedule must start at 0, got {}", schedule[0])));
    }
    if let Some(w) = schedule.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::Domain(format!("schedule not strictly increasing at {} -> {}", w[0], w[1])));
    }
    Ok(())
}

/// Evenly spaced schedule `0, step, 2 step, ..., t_end`; the last interval is
/// shortened if `step` does not divide `t_end`.
pub fn uniform_schedule(t_end: f64, step: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && step > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("invalid schedule horizon {t_end} / step {step}")));
    }
    let n = ((t_end / step) - 1e-9).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (0..n).map(|j| j as f64 * step).collect();
    out.push(t_end);
    Ok(out)
}
