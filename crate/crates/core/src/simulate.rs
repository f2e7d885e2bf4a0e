//! Data generators: the exact Sellke construction of the stochastic SIR
//! epidemic (optionally with Gamma frailty on susceptibility), the DSA
//! infection-time sampler, and aggregation of event times into counts.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Exp1, Gamma};

use crate::data::{validate_schedule, CountData, EventRecord, Period};
use crate::error::{Error, Result};
use crate::model::{default_min_steps, solve_through, ModelParams, Trajectory, Variant};
use crate::rng::SeededGenerator;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn check_sizes(n: u64, m: u64, t_end: f64) -> Result<()> {
    if n < 1 || m < 1 {
        return Err(Error::Domain(format!("need N >= 1 and M >= 1, got N = {n}, M = {m}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive and finite, got {t_end}")));
    }
    Ok(())
}

/// Exact stochastic SIR epidemic on `[0, T]` via the Sellke construction.
///
/// Each of the `n` susceptibles draws a threshold `Q_i ~ Exp(1)` and becomes
/// infected when the cumulative exposure `(beta / n) * int_0^t I(u) du`
/// reaches it; every infective recovers after an `Exp(gamma)` period. `beta`
/// may be zero, in which case nobody is infected.
///
/// Random draws are consumed in a fixed order: `n` thresholds, then the `m`
/// initial infectious periods, then one period per new infection.
pub fn sellke_simulate(
    params: &ModelParams,
    n: u64,
    m: u64,
    t_end: f64,
    gen: &mut SeededGenerator,
) -> Result<EventRecord> {
    if params.variant != Variant::StandardSir {
        return Err(Error::Unsupported(format!("sellke_simulate needs standard_sir, got {}", params.variant.name())));
    }
    params.validate()?;
    check_sizes(n, m, t_end)?;
    let thresholds: Vec<f64> = (0..n).map(|_| Exp1.sample(gen)).collect();
    run_sellke(params, thresholds, n, m, t_end, gen)
}

/// Per-individual susceptibility multipliers: Gamma with mean 1 and standard
/// deviation `nu` (shape `1/nu^2`, scale `nu^2`). At `nu = 0` every
/// multiplier is exactly 1 and no random numbers are consumed.
pub fn draw_frailties(nu: f64, count: usize, gen: &mut SeededGenerator) -> Result<Vec<f64>> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::Domain(format!("frailty scale must be non-negative, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(vec![1.0; count]);
    }
    let var = nu * nu;
    let dist = Gamma::new(1.0 / var, var).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((0..count).map(|_| dist.sample(gen)).collect())
}

/// Sellke construction with Gamma frailty: susceptible `i` draws
/// `X_i ~ Gamma(mean 1, sd nu)` and then `Q_i ~ Exp(rate X_i)`.
///
/// With `nu = 0` the output is byte-identical to [`sellke_simulate`] under
/// the same seed.
pub fn sellke_simulate_frailty(
    params: &ModelParams,
    n: u64,
    m: u64,
    t_end: f64,
    gen: &mut SeededGenerator,
) -> Result<EventRecord> {
    if params.variant != Variant::GammaFrailty {
        return Err(Error::Unsupported(format!(
            "sellke_simulate_frailty needs gamma_frailty, got {}",
            params.variant.name()
        )));
    }
    if !(params.nu >= 0.0) {
        return Err(Error::Domain(format!("frailty scale must be non-negative, got {}", params.nu)));
    }
    params.validate()?;
    check_sizes(n, m, t_end)?;
    let mut thresholds = Vec::with_capacity(n as usize);
    if params.nu == 0.0 {
        thresholds.extend((0..n).map(|_| -> f64 { Exp1.sample(gen) }));
    } else {
        let var = params.nu * params.nu;
        let frailty = Gamma::new(1.0 / var, var).map_err(|e| Error::Domain(e.to_string()))?;
        for _ in 0..n {
            let x: f64 = frailty.sample(gen);
            let e: f64 = Exp1.sample(gen);
            thresholds.push(if x > 0.0 { e / x } else { f64::INFINITY });
        }
    }
    run_sellke(params, thresholds, n, m, t_end, gen)
}

fn run_sellke(
    params: &ModelParams,
    mut thresholds: Vec<f64>,
    n: u64,
    m: u64,
    t_end: f64,
    gen: &mut SeededGenerator,
) -> Result<EventRecord> {
    thresholds.sort_by(f64::total_cmp);
    let period = Exp::new(params.gamma).map_err(|e| Error::Domain(e.to_string()))?;
    let pressure = params.beta / n as f64;

    let mut recoveries = BinaryHeap::new();
    let mut initial_recoveries = Vec::new();
    let mut initial_censored = 0;
    for _ in 0..m {
        let d: f64 = period.sample(gen);
        if d <= t_end {
            initial_recoveries.push(d);
        } else {
            initial_censored += 1;
        }
        recoveries.push(Reverse(Time(d)));
    }

    let mut infection_times = Vec::new();
    let mut infectious_periods = Vec::new();
    let mut t = 0.0;
    let mut exposure = 0.0;
    let mut infectives = m as f64;
    let mut next = 0;

    loop {
        let next_recovery = recoveries.peek().map_or(f64::INFINITY, |r| r.0 .0);
        let next_infection = if infectives > 0.0 && next < thresholds.len() && pressure > 0.0 {
            t + (thresholds[next] - exposure) / (pressure * infectives)
        } else {
            f64::INFINITY
        };
        let event = next_recovery.min(next_infection);
        if !(event <= t_end) {
            break;
        }
        if next_infection < next_recovery {
            exposure = thresholds[next];
            next += 1;
            t = next_infection;
            infectives += 1.0;
            let d: f64 = period.sample(gen);
            let p = if t + d <= t_end {
                Period { duration: d, censored: false }
            } else {
                Period { duration: t_end - t, censored: true }
            };
            infection_times.push(t);
            infectious_periods.push(p);
            recoveries.push(Reverse(Time(t + d)));
        } else {
            exposure += pressure * infectives * (next_recovery - t);
            t = next_recovery;
            recoveries.pop();
            infectives -= 1.0;
        }
    }

    Ok(EventRecord { infection_times, infectious_periods, initial_recoveries, initial_censored, n, m, t_end })
}

/// Inverse-CDF draw of an infection time given a uniform `u` in `[0, 1]`:
/// `s_{t*} = 1 - u (1 - s_T)`, then `t*` solves `s_t = s_{t*}`.
pub fn infection_time_from_uniform(traj: &Trajectory, t_end: f64, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("uniform draw {u} outside [0, 1]")));
    }
    let s_end = traj.eval_survival(t_end)?;
    let target = 1.0 - u * (1.0 - s_end);
    Ok(traj.invert_survival(target.max(s_end))?.min(t_end))
}

/// One draw from the conditional infection-time law `F(t; T) = (1 - s_t) / (1 - s_T)`.
pub fn sample_infection_time(traj: &Trajectory, t_end: f64, gen: &mut SeededGenerator) -> Result<f64> {
    let u: f64 = gen.random();
    infection_time_from_uniform(traj, t_end, u)
}

/// DSA infection times for `n` susceptibles: `K ~ Binomial(n, 1 - s_T)` and
/// `K` i.i.d. times from [`sample_infection_time`], returned sorted.
pub fn simulate_dsa_times(traj: &Trajectory, n: u64, t_end: f64, gen: &mut SeededGenerator) -> Result<Vec<f64>> {
    let p = 1.0 - traj.eval_survival(t_end)?;
    let k =
        if p > 0.0 { Binomial::new(n, p.min(1.0)).map_err(|e| Error::Domain(e.to_string()))?.sample(gen) } else { 0 };
    let mut times = (0..k).map(|_| sample_infection_time(traj, t_end, gen)).collect::<Result<Vec<_>>>()?;
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Count data generated from the DSA approximation on `schedule`.
pub fn simulate_dsa_counts(
    params: &ModelParams,
    n: u64,
    m: u64,
    t_end: f64,
    schedule: &[f64],
    gen: &mut SeededGenerator,
) -> Result<CountData> {
    validate_schedule(schedule)?;
    if *schedule.last().unwrap() != t_end {
        return Err(Error::Domain(format!("schedule must end at T = {t_end}")));
    }
    let traj = solve_through(params, schedule, default_min_steps(schedule.len() - 1))?;
    let times = simulate_dsa_times(&traj, n, t_end, gen)?;
    let counts = bin_times(&times, schedule)?;
    CountData::new(schedule.to_vec(), counts, Some(n), Some(m))
}

/// Counts of `times` per interval `(X_{j-1}, X_j]`; the first interval also
/// takes `t = 0`.
pub fn bin_times(times: &[f64], schedule: &[f64]) -> Result<Vec<u64>> {
    validate_schedule(schedule)?;
    let end = *schedule.last().unwrap();
    let mut counts = vec![0u64; schedule.len() - 1];
    for &t in times {
        if !(0.0..=end).contains(&t) {
            return Err(Error::Domain(format!("event time {t} not covered by schedule [0, {end}]")));
        }
        let j = schedule.partition_point(|&x| x < t).max(1);
        counts[j - 1] += 1;
    }
    Ok(counts)
}

/// Aggregates an event record's infection times onto `schedule`.
pub fn aggregate_counts(events: &EventRecord, schedule: &[f64]) -> Result<CountData> {
    let counts = bin_times(&events.infection_times, schedule)?;
    CountData::new(schedule.to_vec(), counts, Some(events.n), Some(events.m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::uniform_schedule;
    use crate::model::{solve, GridSpec};

    #[test]
    fn no_transmission_no_infections() {
        let params = ModelParams::standard_sir(0.0, 1.0, 0.05);
        let rec = sellke_simulate(&params, 100, 5, 10.0, &mut SeededGenerator::new(1)).unwrap();
        assert_eq!(rec.k(), 0);
        let fr = ModelParams::gamma_frailty(0.0, 1.0, 0.05, 0.5);
        let rec = sellke_simulate_frailty(&fr, 100, 5, 10.0, &mut SeededGenerator::new(1)).unwrap();
        assert_eq!(rec.k(), 0);
        let sched = uniform_schedule(10.0, 1.0).unwrap();
        let counts = simulate_dsa_counts(&params, 100, 5, 10.0, &sched, &mut SeededGenerator::new(1)).unwrap();
        assert!(counts.counts.iter().all(|&y| y == 0));
    }

    #[test]
    fn sellke_is_deterministic_and_valid() {
        let params = ModelParams::standard_sir(2.0, 0.5, 0.05);
        let a = sellke_simulate(&params, 500, 25, 10.0, &mut SeededGenerator::new(42)).unwrap();
        let b = sellke_simulate(&params, 500, 25, 10.0, &mut SeededGenerator::new(42)).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert!(a.k() > 0);
        for (t, p) in a.infection_times.iter().zip(&a.infectious_periods) {
            if p.censored {
                assert_eq!(p.duration, 10.0 - t);
            }
        }
    }

    #[test]
    fn frailty_at_zero_reproduces_sellke() {
        let sir = ModelParams::standard_sir(2.0, 0.5, 0.05);
        let fr = ModelParams::gamma_frailty(2.0, 0.5, 0.05, 0.0);
        let a = sellke_simulate(&sir, 300, 15, 10.0, &mut SeededGenerator::new(9)).unwrap();
        let b = sellke_simulate_frailty(&fr, 300, 15, 10.0, &mut SeededGenerator::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frailty_variance_matches_nu() {
        let xs = draw_frailties(1.0, 10_000, &mut SeededGenerator::new(3)).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
        assert!(draw_frailties(-1.0, 3, &mut SeededGenerator::new(3)).is_err());
        let bad = ModelParams::gamma_frailty(2.0, 0.5, 0.05, -0.1);
        assert!(matches!(
            sellke_simulate_frailty(&bad, 10, 1, 1.0, &mut SeededGenerator::new(3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn uniform_edges() {
        let params = ModelParams::standard_sir(2.0, 1.0, 0.05);
        let traj = solve(&params, &GridSpec::new(10.0, 2000).unwrap()).unwrap();
        assert_eq!(infection_time_from_uniform(&traj, 10.0, 0.0).unwrap(), 0.0);
        assert!((infection_time_from_uniform(&traj, 10.0, 1.0).unwrap() - 10.0).abs() < 1e-9);
        assert!(infection_time_from_uniform(&traj, 10.0, 1e-12).unwrap() < 1e-6);
        assert!(infection_time_from_uniform(&traj, 5.0, 1.0 - 1e-12).unwrap() > 5.0 - 1e-3);
    }

    #[test]
    fn binning_conventions() {
        let sched = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(bin_times(&[], &sched).unwrap(), vec![0, 0, 0]);
        assert_eq!(bin_times(&[1.0], &sched).unwrap(), vec![1, 0, 0]);
        assert_eq!(bin_times(&[0.0, 1.5, 3.0], &sched).unwrap(), vec![1, 1, 1]);
        assert!(bin_times(&[3.5], &sched).is_err());
    }

    #[test]
    fn empty_record_aggregates_to_zeros() {
        let rec = EventRecord {
            infection_times: vec![],
            infectious_periods: vec![],
            initial_recoveries: vec![],
            initial_censored: 2,
            n: 10,
            m: 2,
            t_end: 3.0,
        };
        let data = aggregate_counts(&rec, &[0.0, 1.5, 3.0]).unwrap();
        assert_eq!(data.counts, vec![0, 0]);
    }

    #[test]
    fn counts_partition_simulations() {
        let params = ModelParams::standard_sir(2.0, 0.5, 0.05);
        let sched = uniform_schedule(10.0, 1.0).unwrap();
        for seed in 0..20 {
            let rec = sellke_simulate(&params, 400, 20, 10.0, &mut SeededGenerator::new(seed)).unwrap();
            let data = aggregate_counts(&rec, &sched).unwrap();
            assert_eq!(data.total() as usize, rec.k());
            let dsa = simulate_dsa_counts(&params, 400, 20, 10.0, &sched, &mut SeededGenerator::new(seed)).unwrap();
            assert!(dsa.total() <= 400);
        }
    }

    #[test]
    fn wrong_variant_is_rejected() {
        let net = ModelParams::poisson_network(2.0, 1.0, 0.05);
        assert!(matches!(sellke_simulate(&net, 10, 1, 1.0, &mut SeededGenerator::new(0)), Err(Error::Unsupported(_))));
    }
}
