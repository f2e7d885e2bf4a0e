//! Survival-analytic likelihoods under the DSA approximation.
//!
//! The susceptible curve `s` of the limiting system is the survival function
//! of a random susceptible's infection time `T_I`, and `-ds/dt` (the
//! infection flux) is its improper density. Every likelihood here is built
//! from those two quantities:
//!
//! * complete data:     `s_T^(N-K) g^(L+L~) exp(-g * exposure) prod_i flux(t_i)`
//! * infection times:   `prod_i flux(t_i) / (1 - s_T)` or, given `N`, `s_T^(N-K) prod_i flux(t_i)`
//! * interval counts:   `s_T^(N-K) prod_j (s_{X_{j-1}} - s_{X_j})^{Y_j}`
//!
//! The count form is what remains of the times likelihood after integrating
//! each unobserved time over its interval, so no data augmentation is needed.

use serde::{Deserialize, Serialize};

use crate::data::{validate_schedule, CountData, EventRecord};
use crate::error::{Error, Result};
use crate::model::{default_min_steps, solve_through, survival_at_knots, ModelParams, Trajectory, Variant};

/// Natural-log likelihood value; finite or `-inf`, never `+inf` or NaN.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogLikelihood(f64);

impl LogLikelihood {
    pub const ZERO_PROBABILITY: LogLikelihood = LogLikelihood(f64::NEG_INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::Numerical(format!("log-likelihood evaluated to {value}")));
        }
        Ok(LogLikelihood(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

/// Final size: the probability that a susceptible is ever infected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalSize {
    pub tau: f64,
}

fn final_size_gap(r0: f64, rho: f64, tau: f64) -> f64 {
    1.0 - tau - (-r0 * (rho + tau)).exp()
}

/// Root of `1 - tau = exp(-R0 (rho + tau))` in `(0, 1)`.
///
/// The left side minus the right is concave in `tau`, positive at 0 and
/// negative at 1, so the root is unique; bisection followed by a Newton
/// polish gets the residual to machine precision.
pub fn solve_tau(r0: f64, rho: f64) -> Result<FinalSize> {
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::InvalidParameter(format!("R0 must be positive, got {r0}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if final_size_gap(r0, rho, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..3 {
        let slope = -1.0 + r0 * (-r0 * (rho + tau)).exp();
        if slope == 0.0 {
            break;
        }
        let next = tau - final_size_gap(r0, rho, tau) / slope;
        if next > 0.0 && next < 1.0 && final_size_gap(r0, rho, next).abs() <= final_size_gap(r0, rho, tau).abs() {
            tau = next;
        }
    }
    Ok(FinalSize { tau })
}

/// `1 - s_T` for a trajectory covering `[0, t_end]`, erroring when zero.
fn infected_mass(traj: &Trajectory, t_end: f64) -> Result<f64> {
    let mass = 1.0 - traj.eval_survival(t_end)?;
    if !(mass > 0.0) {
        return Err(Error::Degenerate(format!("1 - s_T = {mass}: no infection mass by T = {t_end}")));
    }
    Ok(mass)
}

/// Infection flux `-ds/dt` at `t`, read from the trajectory.
pub fn infection_flux_at(traj: &Trajectory, t: f64) -> Result<f64> {
    let state = traj.state_at(t)?;
    Ok(traj.params().infection_flux(state.s, state.iota))
}

/// Conditional density of the infection time given infection by `t_end`:
/// `f(t; T) = -ds_t/dt / (1 - s_T)`.
pub fn density_infection(traj: &Trajectory, t: f64, t_end: f64) -> Result<f64> {
    if !(0.0..=t_end).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {t_end}]")));
    }
    let mass = infected_mass(traj, t_end)?;
    Ok(infection_flux_at(traj, t)? / mass)
}

/// Density of the recovery time of a randomly chosen eventually-infected
/// individual: `(gamma / tau) (iota_t - rho exp(-gamma t))`. Standard SIR only,
/// since `tau` comes from the closed-form final-size equation.
pub fn density_recovery(traj: &Trajectory, t: f64) -> Result<f64> {
    let params = traj.params();
    if params.variant != Variant::StandardSir {
        return Err(Error::Unsupported("recovery density is defined for standard_sir only".into()));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("time {t} is negative")));
    }
    let tau = solve_tau(params.r0(), params.rho).map_err(|e| Error::Degenerate(e.to_string()))?.tau;
    if !(tau > 0.0) {
        return Err(Error::Degenerate(format!("final size {tau} is not positive")));
    }
    let iota = traj.state_at(t)?.iota;
    Ok((params.gamma / tau * (iota - params.rho * (-params.gamma * t).exp())).max(0.0))
}

/// `count * ln(x)` with the convention `0 * ln(0) = 0`.
fn weighted_ln(count: f64, x: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * x.ln()
    }
}

/// Solves on `[0, t_end]` at the default resolution.
fn horizon_trajectory(params: &ModelParams, t_end: f64) -> Result<Trajectory> {
    solve_through(params, &[0.0, t_end], default_min_steps(1))
}

/// Complete-data log-likelihood of exact infection and recovery histories.
pub fn loglik_complete(params: &ModelParams, events: &EventRecord) -> Result<LogLikelihood> {
    events.validate()?;
    let traj = horizon_trajectory(params, events.t_end)?;
    loglik_complete_on(&traj, events)
}

/// [`loglik_complete`] on a precomputed trajectory covering `[0, T]`.
pub fn loglik_complete_on(traj: &Trajectory, events: &EventRecord) -> Result<LogLikelihood> {
    let t_end = events.t_end;
    if let Some(&t) = events.infection_times.iter().find(|&&t| t > t_end || t < 0.0) {
        return Err(Error::Domain(format!("infection time {t} outside [0, {t_end}]")));
    }
    let gamma = traj.params().gamma;
    let k = events.k() as f64;
    let s_end = traj.eval_survival(t_end)?;
    let recovered = (events.recovered() + events.initial_recoveries.len()) as f64;
    let exposure: f64 = events.infectious_periods.iter().map(|p| p.duration).sum::<f64>()
        + events.initial_recoveries.iter().sum::<f64>()
        + events.initial_censored as f64 * t_end;

    let mut value = weighted_ln(events.n as f64 - k, s_end) + weighted_ln(recovered, gamma) - gamma * exposure;
    for &t in &events.infection_times {
        value += infection_flux_at(traj, t)?.ln();
    }
    LogLikelihood::new(value)
}

/// Log-likelihood of exact infection times with recoveries unobserved.
///
/// Without `n` this is the product of conditional densities `f(t_i; T)` and
/// does not involve the population size; with `n` it becomes
/// `s_T^(N-K) prod_i flux(t_i)`.
pub fn loglik_infection_times(
    params: &ModelParams,
    times: &[f64],
    t_end: f64,
    n: Option<u64>,
) -> Result<LogLikelihood> {
    let traj = horizon_trajectory(params, t_end)?;
    loglik_infection_times_on(&traj, times, t_end, n)
}

/// [`loglik_infection_times`] on a precomputed trajectory covering `[0, t_end]`.
pub fn loglik_infection_times_on(
    traj: &Trajectory,
    times: &[f64],
    t_end: f64,
    n: Option<u64>,
) -> Result<LogLikelihood> {
    if let Some(&t) = times.iter().find(|&&t| !(t > 0.0 && t <= t_end)) {
        return Err(Error::Domain(format!("infection time {t} outside (0, {t_end}]")));
    }
    let k = times.len() as f64;
    let mut flux_sum = 0.0;
    for &t in times {
        flux_sum += infection_flux_at(traj, t)?.ln();
    }
    let value = match n {
        Some(n) => {
            if times.len() as u64 > n {
                return Err(Error::Domain(format!("{} infections exceed N = {n}", times.len())));
            }
            weighted_ln(n as f64 - k, traj.eval_survival(t_end)?) + flux_sum
        }
        None if times.is_empty() => 0.0,
        None => flux_sum - k * infected_mass(traj, t_end)?.ln(),
    };
    LogLikelihood::new(value)
}

fn require_n(data: &CountData) -> Result<u64> {
    data.n.ok_or_else(|| {
        Error::Unsupported(
            "the marginal count likelihood conditions on the number of initial susceptibles N; \
             supply N (or use the infection-times likelihood, which does not need it)"
                .into(),
        )
    })
}

/// `ln(a - b)` for `a >= b >= 0`, evaluated as `ln a + ln1p(-b/a)` so that
/// nearly equal survival values keep their relative precision.
pub fn ln_survival_drop(a: f64, b: f64) -> f64 {
    if !(a > b) || a <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let la = a.ln();
    la + (-(b.ln() - la).exp()).ln_1p()
}

/// Marginal count log-likelihood from survival values at the schedule points.
pub fn loglik_counts_from_survival(survival: &[f64], data: &CountData) -> Result<LogLikelihood> {
    let n = require_n(data)?;
    if survival.len() != data.schedule.len() {
        return Err(Error::Domain("one survival value is required per schedule point".into()));
    }
    let k = data.total();
    if k > n {
        return Err(Error::Domain(format!("total count {k} exceeds N = {n}")));
    }
    let mut value = weighted_ln((n - k) as f64, *survival.last().unwrap());
    for (j, &y) in data.counts.iter().enumerate() {
        if y > 0 {
            value += y as f64 * ln_survival_drop(survival[j], survival[j + 1]);
        }
    }
    LogLikelihood::new(value)
}

/// Marginal DSA count log-likelihood `s_T^(N-K) prod_j (s_{X_{j-1}} - s_{X_j})^{Y_j}`.
///
/// The ODE grid is built so that every observation time is a grid point.
pub fn loglik_counts(params: &ModelParams, data: &CountData) -> Result<LogLikelihood> {
    data.validate()?;
    require_n(data)?;
    let survival = survival_at_knots(params, &data.schedule, default_min_steps(data.intervals()))?;
    loglik_counts_from_survival(&survival, data)
}

/// [`loglik_counts`] reading the survival curve from `traj`; exact when the
/// schedule points are grid points of `traj`.
pub fn loglik_counts_on(traj: &Trajectory, data: &CountData) -> Result<LogLikelihood> {
    data.validate()?;
    let survival = data.schedule.iter().map(|&x| traj.eval_survival(x)).collect::<Result<Vec<_>>>()?;
    loglik_counts_from_survival(&survival, data)
}

/// Interval-censored form: each of the `K` infected contributes
/// `ln P(X_{j-1} < T_I <= X_j)` and each of the `N - K` others `ln P(T_I > T)`.
/// Algebraically identical to [`loglik_counts_on`].
pub fn loglik_counts_interval_censored(traj: &Trajectory, data: &CountData) -> Result<LogLikelihood> {
    data.validate()?;
    let n = require_n(data)?;
    let k = data.total();
    let mut value = 0.0;
    for (j, &y) in data.counts.iter().enumerate() {
        let p = traj.eval_survival(data.schedule[j])? - traj.eval_survival(data.schedule[j + 1])?;
        for _ in 0..y {
            value += p.ln();
        }
    }
    value += weighted_ln((n - k) as f64, traj.eval_survival(data.t_end())?);
    LogLikelihood::new(if value.is_nan() { f64::NEG_INFINITY } else { value })
}

/// Plug-in population size `N = K / (1 - s_T)`, rounded to the nearest integer.
pub fn estimate_population(data: &CountData, traj: &Trajectory) -> Result<u64> {
    let k = data.total();
    let mass = infected_mass(traj, data.t_end())?;
    if k == 0 {
        return Ok(0);
    }
    Ok((k as f64 / mass).round() as u64)
}

/// Probability-integral transform of infection times within their
/// observation intervals: `u = (s_t - s_{X_{j-1}}) / (s_{X_j} - s_{X_{j-1}})`.
/// Under the model these are i.i.d. uniform given the counts.
pub fn interval_uniforms(traj: &Trajectory, schedule: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    validate_schedule(schedule)?;
    times
        .iter()
        .map(|&t| {
            if !(0.0..=*schedule.last().unwrap()).contains(&t) {
                return Err(Error::Domain(format!("time {t} outside the schedule")));
            }
            let j = schedule.partition_point(|&x| x < t).max(1);
            let lo = traj.eval_survival(schedule[j - 1])?;
            let hi = traj.eval_survival(schedule[j])?;
            let st = traj.eval_survival(t)?;
            Ok((st - lo) / (hi - lo))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Period;
    use crate::model::{solve, GridSpec};

    fn sir() -> ModelParams {
        ModelParams::standard_sir(2.0, 1.0, 0.05)
    }

    /// Composite Gauss-Legendre (5 nodes) on `[a, b]` with `panels` panels.
    fn gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
        const X: [f64; 5] =
            [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                acc += w * f(mid + 0.5 * h * x);
            }
        }
        acc * 0.5 * h
    }

    #[test]
    fn tau_reference_values() {
        // bisection oracle on the final-size equation
        let brute = |r0: f64, rho: f64| {
            let (mut lo, mut hi) = (0.0, 1.0);
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if 1.0 - mid - (-r0 * (rho + mid)).exp() > 0.0 {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            0.5 * (lo + hi)
        };
        let tau = solve_tau(2.0, 0.05).unwrap().tau;
        assert!((tau - 0.826_877_276_874_585).abs() < 1e-9);
        assert!((tau - brute(2.0, 0.05)).abs() < 1e-12);
        assert!(final_size_gap(2.0, 0.05, tau).abs() < 1e-12);
        let tiny = solve_tau(1e-8, 0.05).unwrap().tau;
        assert!(tiny < 1e-8);
        assert!(solve_tau(0.0, 0.05).is_err());
        assert!(solve_tau(2.0, 1.0).is_err());
    }

    #[test]
    fn tau_matches_long_horizon_ode() {
        let params = ModelParams::standard_sir(2.0, 1.0, 0.05);
        let traj = solve(&params, &GridSpec::new(200.0, 40_000).unwrap()).unwrap();
        let tau = solve_tau(2.0, 0.05).unwrap().tau;
        assert!(((1.0 - traj.s_end()) - tau).abs() < 1e-4);
    }

    #[test]
    fn infection_density_normalizes() {
        let traj = solve(&sir(), &GridSpec::new(10.0, 2000).unwrap()).unwrap();
        let times = traj.times();
        let mut trap = 0.0;
        for w in times.windows(2) {
            let a = density_infection(&traj, w[0], 10.0).unwrap();
            let b = density_infection(&traj, w[1], 10.0).unwrap();
            trap += 0.5 * (a + b) * (w[1] - w[0]);
        }
        assert!((trap - 1.0).abs() < 1e-6, "{trap}");
    }

    #[test]
    fn infection_cdf_matches_quadrature() {
        let traj = solve_through(&sir(), &[0.0, 1.0, 2.5, 4.0, 10.0], 2000).unwrap();
        let s_end = traj.s_end();
        for x in [1.0, 2.5, 4.0, 10.0] {
            let quad = gauss(|t| density_infection(&traj, t, 10.0).unwrap(), 0.0, x, 200);
            let closed = (1.0 - traj.eval_survival(x).unwrap()) / (1.0 - s_end);
            assert!((quad - closed).abs() < 1e-6, "{x}: {quad} vs {closed}");
        }
    }

    #[test]
    fn frailty_density_reduces() {
        let grid = GridSpec::new(10.0, 2000).unwrap();
        let a = solve(&sir(), &grid).unwrap();
        let b = solve(&ModelParams::gamma_frailty(2.0, 1.0, 0.05, 0.0), &grid).unwrap();
        for t in [0.0, 0.3, 3.7, 9.99] {
            let fa = density_infection(&a, t, 10.0).unwrap();
            let fb = density_infection(&b, t, 10.0).unwrap();
            assert!((fa - fb).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_conditioning() {
        let traj = solve(&ModelParams::standard_sir(0.0, 1.0, 0.05), &GridSpec::new(5.0, 200).unwrap()).unwrap();
        assert!(matches!(density_infection(&traj, 1.0, 5.0), Err(Error::Degenerate(_))));
        let data = CountData::new(vec![0.0, 5.0], vec![0], Some(3), None).unwrap();
        assert!(matches!(estimate_population(&data, &traj), Err(Error::Degenerate(_))));
    }

    #[test]
    fn recovery_density_is_a_convolution() {
        let params = ModelParams::standard_sir(2.0, 1.0, 0.05);
        let traj = solve(&params, &GridSpec::new(40.0, 8000).unwrap()).unwrap();
        let tau = solve_tau(2.0, 0.05).unwrap().tau;
        assert_eq!(density_recovery(&traj, 0.0).unwrap(), 0.0);
        for t in [0.5, 2.0, 5.0, 12.0] {
            // unconditional f_{T_I}(u) = flux(u) / tau
            let conv = gauss(
                |u| infection_flux_at(&traj, u).unwrap() / tau * params.gamma * (-params.gamma * (t - u)).exp(),
                0.0,
                t,
                400,
            );
            let closed = density_recovery(&traj, t).unwrap();
            assert!((conv - closed).abs() < 1e-5, "t={t}: {conv} vs {closed}");
        }
        assert!(traj.times().iter().all(|&t| density_recovery(&traj, t).unwrap() >= 0.0));
    }

    fn toy_record() -> EventRecord {
        EventRecord {
            infection_times: vec![0.5, 1.2, 2.0],
            infectious_periods: vec![
                Period { duration: 1.0, censored: false },
                Period { duration: 1.8, censored: true },
                Period { duration: 1.0, censored: true },
            ],
            initial_recoveries: vec![0.7],
            initial_censored: 1,
            n: 10,
            m: 2,
            t_end: 3.0,
        }
    }

    #[test]
    fn complete_loglik_hand_expansion() {
        let params = sir();
        let rec = toy_record();
        let traj = solve_through(&params, &[0.0, 3.0], 2000).unwrap();
        let s_end = traj.eval_survival(3.0).unwrap();
        // (N - K) ln s_T + (L + L~) ln g - g (sum w + sum eps + (M - L~) T) + sum ln(b s i)
        let mut expected = 7.0 * s_end.ln() + 2.0 * 1.0_f64.ln() - 1.0 * (1.0 + 1.8 + 1.0 + 0.7 + 1.0 * 3.0);
        for t in [0.5, 1.2, 2.0] {
            let st = traj.state_at(t).unwrap();
            expected += (2.0 * st.s * st.iota).ln();
        }
        let got = loglik_complete(&params, &rec).unwrap().value();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn complete_loglik_empty_and_extension() {
        let params = ModelParams::standard_sir(2.0, 0.7, 0.05);
        let empty = EventRecord {
            infection_times: vec![],
            infectious_periods: vec![],
            initial_recoveries: vec![],
            initial_censored: 4,
            n: 50,
            m: 4,
            t_end: 2.0,
        };
        let traj = solve_through(&params, &[0.0, 2.0], 2000).unwrap();
        let s_end = traj.s_end();
        let got = loglik_complete(&params, &empty).unwrap().value();
        assert!((got - (50.0 * s_end.ln() - 0.7 * 4.0 * 2.0)).abs() < 1e-12);

        // one more individual infected exactly at T with a zero-length censored period
        let base = toy_record();
        let mut extended = base.clone();
        extended.n += 1;
        extended.infection_times.push(3.0);
        extended.infectious_periods.push(Period { duration: 0.0, censored: true });
        let traj = solve_through(&params, &[0.0, 3.0], 2000).unwrap();
        let diff =
            loglik_complete(&params, &extended).unwrap().value() - loglik_complete(&params, &base).unwrap().value();
        let end = traj.state_at(3.0).unwrap();
        assert!((diff - (2.0 * end.s * end.iota).ln()).abs() < 1e-10);

        let mut late = base;
        late.infection_times[2] = 3.5;
        assert!(loglik_complete(&params, &late).is_err());
    }

    #[test]
    fn infection_times_identities() {
        let params = sir();
        let traj = solve_through(&params, &[0.0, 10.0], 2000).unwrap();
        let single = loglik_infection_times(&params, &[2.3], 10.0, None).unwrap().value();
        assert!((single - density_infection(&traj, 2.3, 10.0).unwrap().ln()).abs() < 1e-12);

        let times = [0.4, 1.1, 1.9, 3.3, 7.0];
        let n = 40;
        let with_n = loglik_infection_times(&params, &times, 10.0, Some(n)).unwrap().value();
        let without = loglik_infection_times(&params, &times, 10.0, None).unwrap().value();
        let s_end = traj.s_end();
        let expected = (n as f64 - 5.0) * s_end.ln() + 5.0 * (1.0 - s_end).ln();
        assert!((with_n - without - expected).abs() < 1e-10);

        assert!(loglik_infection_times(&params, &times, 10.0, Some(3)).is_err());
        assert!(loglik_infection_times(&params, &[0.0], 10.0, None).is_err());
        assert!(loglik_infection_times(&params, &[10.5], 10.0, None).is_err());
    }

    #[test]
    fn counts_reductions() {
        let params = sir();
        let sched = vec![0.0, 2.0, 5.0, 10.0];
        let traj = solve_through(&params, &sched, 2000).unwrap();
        let s_end = traj.s_end();
        let zeros = CountData::new(sched.clone(), vec![0, 0, 0], Some(100), None).unwrap();
        assert!((loglik_counts(&params, &zeros).unwrap().value() - 100.0 * s_end.ln()).abs() < 1e-12);

        let one = CountData::new(vec![0.0, 10.0], vec![37], Some(100), None).unwrap();
        let expected = 63.0 * s_end.ln() + 37.0 * (1.0 - s_end).ln();
        assert!((loglik_counts(&params, &one).unwrap().value() - expected).abs() < 1e-10);

        let unknown = CountData::new(sched, vec![1, 2, 3], None, None).unwrap();
        assert!(matches!(loglik_counts(&params, &unknown), Err(Error::Unsupported(_))));
    }

    #[test]
    fn counts_match_interval_quadrature() {
        let params = ModelParams::standard_sir(1.7, 0.6, 0.03);
        let sched = vec![0.0, 1.0, 2.0, 3.5, 6.0, 10.0];
        let data = CountData::new(sched.clone(), vec![3, 8, 20, 31, 12], Some(150), None).unwrap();
        let traj = solve_through(&params, &sched, 4000).unwrap();
        let mut oracle = (150.0 - 74.0) * traj.s_end().ln();
        for (j, &y) in data.counts.iter().enumerate() {
            let mass = gauss(|u| infection_flux_at(&traj, u).unwrap(), sched[j], sched[j + 1], 100);
            oracle += y as f64 * mass.ln();
        }
        let got = loglik_counts(&params, &data).unwrap().value();
        assert!(((got - oracle) / oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn flat_tail_gives_neg_infinity() {
        assert_eq!(ln_survival_drop(0.5, 0.5), f64::NEG_INFINITY);
        let v = ln_survival_drop(1.0, 1.0 - 1e-15);
        assert!((v - (1e-15_f64).ln()).abs() < 0.2);
        let s = [1.0, 0.5, 0.5];
        let data = CountData::new(vec![0.0, 1.0, 2.0], vec![0, 2], Some(10), None).unwrap();
        assert_eq!(loglik_counts_from_survival(&s, &data).unwrap().value(), f64::NEG_INFINITY);
    }

    #[test]
    fn population_estimate() {
        let params = sir();
        let traj = solve_through(&params, &[0.0, 10.0], 2000).unwrap();
        let zero = CountData::new(vec![0.0, 10.0], vec![0], None, None).unwrap();
        assert_eq!(estimate_population(&zero, &traj).unwrap(), 0);
        let data = CountData::new(vec![0.0, 10.0], vec![100], None, None).unwrap();
        let expected = (100.0 / (1.0 - traj.s_end())).round() as u64;
        assert_eq!(estimate_population(&data, &traj).unwrap(), expected);
    }

    #[test]
    fn population_estimate_half_survival() {
        // find a horizon where s_T is close to 1/2 and check K / (1 - s_T)
        let params = sir();
        let traj = solve_through(&params, &[0.0, 10.0], 2000).unwrap();
        let t_half = traj.invert_survival(0.5).unwrap();
        let half = solve_through(&params, &[0.0, t_half], 2000).unwrap();
        assert!((half.s_end() - 0.5).abs() < 1e-6);
        let data = CountData::new(vec![0.0, t_half], vec![100], None, None).unwrap();
        assert_eq!(estimate_population(&data, &half).unwrap(), 200);
    }

    #[test]
    fn loglikelihood_rejects_nan() {
        assert!(LogLikelihood::new(f64::NAN).is_err());
        assert!(LogLikelihood::new(f64::INFINITY).is_err());
        assert!(!LogLikelihood::ZERO_PROBABILITY.is_finite());
    }
}
