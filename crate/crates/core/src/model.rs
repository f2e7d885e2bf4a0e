//! Large-population limits of the three epidemic variants and a fixed-step
//! integrator producing interpolable survival curves.
//!
//! All three variants share one state layout `(s, iota, r)`:
//!
//! * `StandardSir`:   `s' = -b s i`,            `i' = b s i - g i`, `r' = g i`
//! * `GammaFrailty`:  `s' = -b s^(1+nu^2) i`,   `i' = -s' - g i`,   `r' = g i`
//! * `PoissonNetwork`: `S' = -b S (1 + rho - S + (g/b) ln S)`, `I' = -S' - g I`,
//!   `R = 1 + rho - S - I`, where `b`, `g` are the reparametrised network rates.
//!
//! with `s(0) = 1`, `iota(0) = rho`, `r(0) = 0`. The susceptible curve `s` is
//! the survival function of a randomly chosen susceptible's infection time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest susceptible fraction fed to `ln` in the network drift.
const LOG_FLOOR: f64 = 1e-12;
/// Negative undershoot tolerated (and clamped to zero) in the integrator.
const CLAMP_TOL: f64 = 1e-12;
/// Default number of integration steps over the horizon.
pub const DEFAULT_STEPS: usize = 2000;
/// Upper bound on the total number of steps a single solve may take.
pub const MAX_STEPS: usize = 1_000_000;
/// Minimum number of steps allowed in a [`GridSpec`].
pub const MIN_STEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    StandardSir,
    GammaFrailty,
    PoissonNetwork,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::StandardSir => "standard_sir",
            Variant::GammaFrailty => "gamma_frailty",
            Variant::PoissonNetwork => "poisson_network",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard_sir" | "sir" => Ok(Variant::StandardSir),
            "gamma_frailty" | "frailty" => Ok(Variant::GammaFrailty),
            "poisson_network" | "network" => Ok(Variant::PoissonNetwork),
            other => Err(Error::Config(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Epidemic parameters for one model variant.
///
/// For [`Variant::PoissonNetwork`], `beta` and `gamma` hold the identifiable
/// network rates `beta_tilde = mu * beta` and `gamma_tilde = beta + gamma`.
/// `nu` is the frailty standard deviation and is ignored by the other variants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: Variant,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    #[serde(default)]
    pub nu: f64,
}

impl ModelParams {
    pub fn standard_sir(beta: f64, gamma: f64, rho: f64) -> Self {
        ModelParams { variant: Variant::StandardSir, beta, gamma, rho, nu: 0.0 }
    }

    pub fn gamma_frailty(beta: f64, gamma: f64, rho: f64, nu: f64) -> Self {
        ModelParams { variant: Variant::GammaFrailty, beta, gamma, rho, nu }
    }

    pub fn poisson_network(beta_tilde: f64, gamma_tilde: f64, rho: f64) -> Self {
        ModelParams { variant: Variant::PoissonNetwork, beta: beta_tilde, gamma: gamma_tilde, rho, nu: 0.0 }
    }

    /// Checks the parameter region. `beta = 0` is accepted as the
    /// no-transmission limit so that degenerate scenarios can be simulated.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta must be finite and non-negative, got {}", self.beta));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be finite and positive, got {}", self.gamma));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return bad(format!("nu must be finite and non-negative, got {}", self.nu));
        }
        Ok(())
    }

    /// Basic reproduction number `beta / gamma`.
    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }

    /// Rate at which the susceptible fraction is depleted, `-ds/dt`, at the
    /// state `(s, iota)`. Divided by `1 - s_T` this is the conditional
    /// infection-time density.
    pub fn infection_flux(&self, s: f64, iota: f64) -> f64 {
        match self.variant {
            Variant::StandardSir => self.beta * s * iota,
            Variant::GammaFrailty => {
                let s = s.max(0.0);
                let weight = if self.nu == 0.0 { s } else { s.powf(1.0 + self.nu * self.nu) };
                self.beta * weight * iota
            }
            Variant::PoissonNetwork => {
                let s = s.max(LOG_FLOOR);
                self.beta * s * (1.0 + self.rho - s) + self.gamma * s * s.ln()
            }
        }
    }

    fn derivative(&self, state: &[f64; 3]) -> [f64; 3] {
        let flux = self.infection_flux(state[0], state[1]);
        let removal = self.gamma * state[1];
        [-flux, flux - removal, removal]
    }

    /// Largest step keeping the explicit scheme well inside its stability region.
    fn stable_step(&self) -> f64 {
        let rate = self.beta * (1.0 + self.rho) + self.gamma;
        if rate > 0.0 {
            0.5 / rate
        } else {
            f64::INFINITY
        }
    }
}

/// Uniform integration grid on `[0, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_end: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("grid horizon must be positive, got {t_end}")));
        }
        if n_steps < MIN_STEPS {
            return Err(Error::InvalidParameter(format!("grid needs at least {MIN_STEPS} steps, got {n_steps}")));
        }
        Ok(GridSpec { t_end, n_steps })
    }

    /// Default resolution for a horizon: [`DEFAULT_STEPS`] steps.
    pub fn for_horizon(t_end: f64) -> Result<Self> {
        GridSpec::new(t_end, DEFAULT_STEPS)
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }
}

/// Interpolated state of the limiting system at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    pub s: f64,
    pub iota: f64,
    pub r: f64,
}

/// Numerical solution of the limiting ODEs on a grid that starts at 0.
///
/// Values between grid points are reconstructed with cubic Hermite
/// interpolation using the exact vector field at the nodes. For `s` the cubic
/// is replaced by the chord on any segment where it could lose monotonicity.
#[derive(Clone, Debug)]
pub struct Trajectory {
    params: ModelParams,
    times: Vec<f64>,
    s: Vec<f64>,
    iota: Vec<f64>,
    r: Vec<f64>,
    ds: Vec<f64>,
    diota: Vec<f64>,
    dr: Vec<f64>,
}

enum Position {
    Node(usize),
    Segment(usize, f64),
}

impl Trajectory {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.params.variant
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn iota(&self) -> &[f64] {
        &self.iota
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Time derivative of `s` at each grid point.
    pub fn ds(&self) -> &[f64] {
        &self.ds
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least two points")
    }

    /// `s` at the final grid point.
    pub fn s_end(&self) -> f64 {
        *self.s.last().expect("trajectory has at least two points")
    }

    fn clamp_time(&self, t: f64) -> Result<f64> {
        let t_end = self.t_end();
        let slack = 1e-12 * t_end.max(1.0);
        if !t.is_finite() || t < -slack || t > t_end + slack {
            return Err(Error::Domain(format!("time {t} outside [0, {t_end}]")));
        }
        Ok(t.clamp(0.0, t_end))
    }

    fn locate(&self, t: f64) -> Position {
        let idx = self.times.partition_point(|&x| x < t);
        if idx < self.times.len() && self.times[idx] == t {
            return Position::Node(idx);
        }
        let k = idx - 1;
        let h = self.times[k + 1] - self.times[k];
        Position::Segment(k, (t - self.times[k]) / h)
    }

    fn hermite(y: &[f64], dy: &[f64], k: usize, h: f64, theta: f64) -> f64 {
        let one_minus = 1.0 - theta;
        let h00 = (1.0 + 2.0 * theta) * one_minus * one_minus;
        let h10 = theta * one_minus * one_minus;
        let h01 = theta * theta * (3.0 - 2.0 * theta);
        let h11 = theta * theta * (theta - 1.0);
        h00 * y[k] + h10 * h * dy[k] + h01 * y[k + 1] + h11 * h * dy[k + 1]
    }

    /// Whether the Hermite cubic for `s` on segment `k` is monotone
    /// (Fritsch–Carlson sufficient condition).
    fn s_segment_is_cubic(&self, k: usize) -> bool {
        let h = self.times[k + 1] - self.times[k];
        let secant = (self.s[k + 1] - self.s[k]) / h;
        if secant == 0.0 {
            return self.ds[k] == 0.0 && self.ds[k + 1] == 0.0;
        }
        let a = self.ds[k] / secant;
        let b = self.ds[k + 1] / secant;
        a >= 0.0 && b >= 0.0 && a * a + b * b <= 9.0
    }

    fn s_on_segment(&self, k: usize, theta: f64) -> f64 {
        let h = self.times[k + 1] - self.times[k];
        if self.s_segment_is_cubic(k) {
            Self::hermite(&self.s, &self.ds, k, h, theta)
        } else {
            self.s[k] + theta * (self.s[k + 1] - self.s[k])
        }
    }

    /// Survival probability `P(T_I > t) = s_t`, exact at grid points.
    pub fn eval_survival(&self, t: f64) -> Result<f64> {
        let t = self.clamp_time(t)?;
        Ok(match self.locate(t) {
            Position::Node(k) => self.s[k],
            Position::Segment(k, theta) => self.s_on_segment(k, theta),
        })
    }

    /// Full interpolated state at `t`.
    pub fn state_at(&self, t: f64) -> Result<State> {
        let t = self.clamp_time(t)?;
        Ok(match self.locate(t) {
            Position::Node(k) => State { s: self.s[k], iota: self.iota[k], r: self.r[k] },
            Position::Segment(k, theta) => {
                let h = self.times[k + 1] - self.times[k];
                State {
                    s: self.s_on_segment(k, theta),
                    iota: Self::hermite(&self.iota, &self.diota, k, h, theta).max(0.0),
                    r: Self::hermite(&self.r, &self.dr, k, h, theta),
                }
            }
        })
    }

    /// Smallest `t` with `s_t = s_target`.
    pub fn invert_survival(&self, s_target: f64) -> Result<f64> {
        let s_end = self.s_end();
        let slack = 1e-12;
        if !s_target.is_finite() || s_target > 1.0 + slack || s_target < s_end - slack {
            return Err(Error::Domain(format!("survival level {s_target} outside [{s_end}, 1]")));
        }
        let target = s_target.clamp(s_end, 1.0);
        // first node at or below the target; s is non-increasing
        let idx = self.s.partition_point(|&v| v > target);
        if idx == 0 {
            return Ok(self.times[0]);
        }
        let k = idx - 1;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.s_on_segment(k, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.times[k + 1] - self.times[k];
        Ok(self.times[k] + hi * h)
    }
}

fn rk4_step(params: &ModelParams, y: &[f64; 3], h: f64) -> [f64; 3] {
    let add = |a: &[f64; 3], b: &[f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
    let k1 = params.derivative(y);
    let k2 = params.derivative(&add(y, &k1, 0.5 * h));
    let k3 = params.derivative(&add(y, &k2, 0.5 * h));
    let k4 = params.derivative(&add(y, &k3, h));
    let mut next = [0.0; 3];
    for i in 0..3 {
        next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    next
}

fn initial_state(params: &ModelParams) -> [f64; 3] {
    [1.0, params.rho, 0.0]
}

/// Clamps floating-point undershoot and rejects states that left the
/// admissible region.
fn check_state(params: &ModelParams, y: &mut [f64; 3], t: f64) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure { time: t, reason: "non-finite state".into() });
    }
    for v in y.iter_mut().take(2) {
        if *v < 0.0 {
            if *v >= -CLAMP_TOL {
                *v = 0.0;
            } else {
                return Err(Error::IntegrationFailure {
                    time: t,
                    reason: format!("negative compartment fraction {v}"),
                });
            }
        }
    }
    if params.variant == Variant::PoissonNetwork {
        y[2] = 1.0 + params.rho - y[0] - y[1];
    }
    Ok(())
}

/// Integrates from 0 through every knot, splitting each knot interval into
/// `n` equal steps. Calls `visit(t, state)` at every grid point, including 0.
fn integrate_segments<F>(params: &ModelParams, knots: &[f64], steps: &[usize], mut visit: F) -> Result<()>
where
    F: FnMut(f64, &[f64; 3]),
{
    let mut y = initial_state(params);
    visit(knots[0], &y);
    for (w, &n) in knots.windows(2).zip(steps) {
        let (t0, t1) = (w[0], w[1]);
        let h = (t1 - t0) / n as f64;
        for step in 1..=n {
            y = rk4_step(params, &y, h);
            let t = if step == n { t1 } else { t0 + step as f64 * h };
            check_state(params, &mut y, t)?;
            visit(t, &y);
        }
    }
    Ok(())
}

fn validate_knots(knots: &[f64]) -> Result<()> {
    if knots.len() < 2 || knots[0] != 0.0 {
        return Err(Error::Domain("knots must start at 0 and contain at least two points".into()));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::Domain("knots must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Steps per knot interval so that the whole horizon carries at least
/// `min_steps` steps and no step exceeds the stability bound.
fn steps_for_knots(params: &ModelParams, knots: &[f64], min_steps: usize) -> Result<Vec<usize>> {
    let t_end = *knots.last().unwrap();
    let h_target = (t_end / min_steps.max(1) as f64).min(params.stable_step());
    let steps: Vec<f64> = knots.windows(2).map(|w| (((w[1] - w[0]) / h_target) - 1e-9).ceil().max(1.0)).collect();
    if steps.iter().sum::<f64>() > MAX_STEPS as f64 {
        return Err(Error::IntegrationFailure {
            time: 0.0,
            reason: format!("rates too large: more than {MAX_STEPS} steps needed"),
        });
    }
    Ok(steps.into_iter().map(|n| n as usize).collect())
}

fn build_trajectory(params: &ModelParams, knots: &[f64], steps: &[usize]) -> Result<Trajectory> {
    let capacity = steps.iter().sum::<usize>() + 1;
    let mut traj = Trajectory {
        params: *params,
        times: Vec::with_capacity(capacity),
        s: Vec::with_capacity(capacity),
        iota: Vec::with_capacity(capacity),
        r: Vec::with_capacity(capacity),
        ds: Vec::with_capacity(capacity),
        diota: Vec::with_capacity(capacity),
        dr: Vec::with_capacity(capacity),
    };
    integrate_segments(params, knots, steps, |t, y| {
        let d = params.derivative(y);
        traj.times.push(t);
        traj.s.push(y[0]);
        traj.iota.push(y[1]);
        traj.r.push(y[2]);
        traj.ds.push(d[0]);
        traj.diota.push(d[1]);
        traj.dr.push(d[2]);
    })?;
    Ok(traj)
}

/// Solves the limiting system on a uniform grid.
pub fn solve(params: &ModelParams, grid: &GridSpec) -> Result<Trajectory> {
    params.validate()?;
    GridSpec::new(grid.t_end, grid.n_steps)?;
    build_trajectory(params, &[0.0, grid.t_end], &[grid.n_steps])
}

/// Solves on a grid that contains every knot (e.g. an observation schedule)
/// as a grid point. Each knot interval is split uniformly; the horizon carries
/// at least `min_steps` steps.
pub fn solve_through(params: &ModelParams, knots: &[f64], min_steps: usize) -> Result<Trajectory> {
    params.validate()?;
    validate_knots(knots)?;
    let steps = steps_for_knots(params, knots, min_steps)?;
    build_trajectory(params, knots, &steps)
}

/// Default minimum step count for a schedule with `intervals` intervals.
pub fn default_min_steps(intervals: usize) -> usize {
    DEFAULT_STEPS.max(20 * intervals)
}

/// Values of `s` at each knot only, without storing the dense grid.
/// Identical (bit for bit) to reading the knots off [`solve_through`].
pub fn survival_at_knots(params: &ModelParams, knots: &[f64], min_steps: usize) -> Result<Vec<f64>> {
    params.validate()?;
    validate_knots(knots)?;
    let steps = steps_for_knots(params, knots, min_steps)?;
    let mut out = Vec::with_capacity(knots.len());
    let mut next_knot = 0;
    integrate_segments(params, knots, &steps, |t, y| {
        if t == knots[next_knot] {
            out.push(y[0]);
            next_knot = (next_knot + 1).min(knots.len() - 1);
        }
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sir() -> ModelParams {
        ModelParams::standard_sir(2.0, 1.0, 0.05)
    }

    #[test]
    fn initial_conditions() {
        let traj = solve(&sir(), &GridSpec::new(10.0, 500).unwrap()).unwrap();
        assert_eq!(traj.s()[0], 1.0);
        assert_eq!(traj.iota()[0], 0.05);
        assert_eq!(traj.r()[0], 0.0);
        assert_eq!(traj.eval_survival(0.0).unwrap(), 1.0);
    }

    #[test]
    fn frailty_at_zero_nu_matches_sir() {
        let grid = GridSpec::new(10.0, 1000).unwrap();
        let a = solve(&sir(), &grid).unwrap();
        let b = solve(&ModelParams::gamma_frailty(2.0, 1.0, 0.05, 0.0), &grid).unwrap();
        for k in 0..a.s().len() {
            assert!((a.s()[k] - b.s()[k]).abs() < 1e-10);
            assert!((a.iota()[k] - b.iota()[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_points_are_exact() {
        let traj = solve(&sir(), &GridSpec::new(10.0, 400).unwrap()).unwrap();
        for k in [0, 1, 17, 200, 399, 400] {
            assert_eq!(traj.eval_survival(traj.times()[k]).unwrap(), traj.s()[k]);
        }
    }

    #[test]
    fn survival_out_of_range() {
        let traj = solve(&sir(), &GridSpec::new(5.0, 200).unwrap()).unwrap();
        assert!(matches!(traj.eval_survival(-0.1), Err(Error::Domain(_))));
        assert!(matches!(traj.eval_survival(5.1), Err(Error::Domain(_))));
        assert!(matches!(traj.invert_survival(1.1), Err(Error::Domain(_))));
        assert!(matches!(traj.invert_survival(traj.s_end() - 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn inversion_endpoints() {
        let traj = solve(&sir(), &GridSpec::new(10.0, 1000).unwrap()).unwrap();
        assert_eq!(traj.invert_survival(1.0).unwrap(), 0.0);
        assert!((traj.invert_survival(traj.s_end()).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_stays_flat() {
        let params = ModelParams::standard_sir(0.0, 1.0, 0.05);
        let traj = solve(&params, &GridSpec::new(10.0, 200).unwrap()).unwrap();
        assert!(traj.s().iter().all(|&s| s == 1.0));
        assert_eq!(traj.invert_survival(1.0).unwrap(), 0.0);
    }

    #[test]
    fn knots_land_on_grid() {
        let knots = [0.0, 0.7, 1.3, 2.0, 10.0];
        let traj = solve_through(&sir(), &knots, 2000).unwrap();
        for x in knots {
            assert!(traj.times().contains(&x));
        }
        let direct = survival_at_knots(&sir(), &knots, 2000).unwrap();
        for (x, s) in knots.iter().zip(&direct) {
            assert_eq!(traj.eval_survival(*x).unwrap(), *s);
        }
    }

    #[test]
    fn step_budget_is_enforced() {
        let fast = ModelParams::standard_sir(1e9, 1.0, 0.05);
        assert!(matches!(solve_through(&fast, &[0.0, 10.0], 100), Err(Error::IntegrationFailure { .. })));
        assert!(survival_at_knots(&fast, &[0.0, 10.0], 100).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::standard_sir(-1.0, 1.0, 0.05).validate().is_err());
        assert!(ModelParams::standard_sir(1.0, 0.0, 0.05).validate().is_err());
        assert!(ModelParams::standard_sir(1.0, 1.0, 1.0).validate().is_err());
        assert!(ModelParams::gamma_frailty(1.0, 1.0, 0.1, -0.5).validate().is_err());
        assert!(GridSpec::new(10.0, 99).is_err());
    }

    #[test]
    fn blow_up_reports_failure_time() {
        // absurd rates with a forced coarse uniform grid
        let params = ModelParams::standard_sir(1e6, 1e6, 0.5);
        match solve(&params, &GridSpec::new(10.0, 100).unwrap()) {
            Err(Error::IntegrationFailure { time, .. }) => assert!(time > 0.0 && time <= 10.0),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }
}
