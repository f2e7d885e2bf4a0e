use dsa_core::data::uniform_schedule;
use dsa_core::likelihood::{loglik_counts, loglik_counts_interval_censored, loglik_counts_on};
use dsa_core::model::{default_min_steps, solve, solve_through, GridSpec, ModelParams, Trajectory};
use dsa_core::simulate::simulate_dsa_counts;
use dsa_core::{CountData, SeededGenerator};
use proptest::prelude::*;

fn sir() -> impl Strategy<Value = ModelParams> {
    (0.2..5.0f64, 0.2..2.0f64, 0.005..0.3f64).prop_map(|(b, g, r)| ModelParams::standard_sir(b, g, r))
}

fn frailty() -> impl Strategy<Value = ModelParams> {
    (0.2..5.0f64, 0.2..2.0f64, 0.005..0.3f64, 0.0..2.0f64)
        .prop_map(|(b, g, r, n)| ModelParams::gamma_frailty(b, g, r, n))
}

fn network() -> impl Strategy<Value = ModelParams> {
    (0.2..3.0f64, 0.1..2.0f64, 0.001..0.2f64).prop_map(|(b, g, r)| ModelParams::poisson_network(b, g, r))
}

fn any_variant() -> impl Strategy<Value = ModelParams> {
    prop_oneof![sir(), frailty(), network()]
}

fn simulated_counts(params: &ModelParams, n: u64, seed: u64) -> CountData {
    let sched = uniform_schedule(10.0, 1.0).unwrap();
    simulate_dsa_counts(
        params,
        n,
        (params.rho * n as f64).round() as u64,
        10.0,
        &sched,
        &mut SeededGenerator::new(seed),
    )
    .unwrap()
}

fn max_abs_diff(a: &Trajectory, b: &Trajectory, stride: usize) -> f64 {
    a.s().iter().zip(b.s().iter().step_by(stride)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_is_conserved(params in any_variant(), t_end in 1.0..30.0f64) {
        let traj = solve(&params, &GridSpec::for_horizon(t_end).unwrap()).unwrap();
        for i in 0..traj.times().len() {
            let total = traj.s()[i] + traj.iota()[i] + traj.r()[i];
            prop_assert!((total - 1.0 - params.rho).abs() < 1e-8, "t = {}: {}", traj.times()[i], total);
        }
    }

    #[test]
    fn susceptibles_decline_while_infection_persists(params in any_variant()) {
        let traj = solve(&params, &GridSpec::for_horizon(15.0).unwrap()).unwrap();
        for w in 0..traj.times().len() - 1 {
            if traj.iota()[w] > 1e-9 && traj.s()[w] > 1e-9 {
                prop_assert!(traj.s()[w + 1] < traj.s()[w]);
            }
        }
    }

    #[test]
    fn sir_survival_is_exponential_in_recovered(params in sir()) {
        let traj = solve(&params, &GridSpec::for_horizon(10.0).unwrap()).unwrap();
        for i in 0..traj.times().len() {
            let closed = (-params.r0() * traj.r()[i]).exp();
            prop_assert!((traj.s()[i] - closed).abs() < 1e-6);
        }
    }

    #[test]
    fn survival_inversion_round_trips(params in any_variant(), u in 0.01..0.99f64) {
        let traj = solve(&params, &GridSpec::for_horizon(10.0).unwrap()).unwrap();
        let s_end = traj.s_end();
        prop_assume!(1.0 - s_end > 1e-6);
        let target = 1.0 - u * (1.0 - s_end);
        let t = traj.invert_survival(target).unwrap();
        prop_assert!((traj.eval_survival(t).unwrap() - target).abs() < 1e-10);
    }

    #[test]
    fn frailty_without_heterogeneity_is_standard(b in 0.5..4.0f64, g in 0.3..2.0f64, r in 0.01..0.2f64, seed in 0u64..1000) {
        let base = ModelParams::standard_sir(b, g, r);
        let data = simulated_counts(&base, 400, seed);
        let a = loglik_counts(&base, &data).unwrap().value();
        let f = loglik_counts(&ModelParams::gamma_frailty(b, g, r, 0.0), &data).unwrap().value();
        prop_assert!((a - f).abs() <= 1e-10 * a.abs().max(1.0), "{} vs {}", a, f);
    }

    #[test]
    fn interval_censored_form_is_identical(params in any_variant(), seed in 0u64..1000) {
        let data = simulated_counts(&params, 500, seed);
        let traj = solve_through(&params, &data.schedule, default_min_steps(data.intervals())).unwrap();
        let a = loglik_counts_on(&traj, &data).unwrap().value();
        let b = loglik_counts_interval_censored(&traj, &data).unwrap().value();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn refining_the_grid_barely_moves_the_likelihood(params in sir(), seed in 0u64..1000) {
        let data = simulated_counts(&params, 1000, seed);
        let a = loglik_counts(&params, &data).unwrap().value();
        let fine = solve_through(&params, &data.schedule, 2 * default_min_steps(data.intervals())).unwrap();
        let b = loglik_counts_on(&fine, &data).unwrap().value();
        prop_assert!((a - b).abs() < 1e-5, "{} vs {}", a, b);
    }
}

#[test]
fn fourth_order_convergence() {
    for params in [
        ModelParams::standard_sir(4.0, 1.0, 0.05),
        ModelParams::gamma_frailty(3.0, 1.0, 0.05, 0.8),
        ModelParams::poisson_network(2.0, 0.8, 0.05),
    ] {
        let t_end = 20.0;
        let reference = solve(&params, &GridSpec::new(t_end, 800).unwrap()).unwrap();
        let coarse = solve(&params, &GridSpec::new(t_end, 100).unwrap()).unwrap();
        let half = solve(&params, &GridSpec::new(t_end, 200).unwrap()).unwrap();
        let e1 = max_abs_diff(&coarse, &reference, 8);
        let e2 = max_abs_diff(&half, &reference, 4);
        assert!(e1 / e2 >= 8.0, "{:?}: {e1:e} / {e2:e}", params.variant);
    }
}

#[test]
fn count_likelihood_is_continuous_in_beta() {
    let truth = ModelParams::standard_sir(2.0, 1.0, 0.05);
    let data = simulated_counts(&truth, 1000, 8);
    let mut prev: Option<f64> = None;
    for i in 0..=400 {
        let beta = 1.8 + 1e-3 * i as f64;
        let v = loglik_counts(&ModelParams::standard_sir(beta, 1.0, 0.05), &data).unwrap().value();
        assert!(v.is_finite());
        if let Some(p) = prev {
            assert!((v - p).abs() < 10.0, "jump at beta = {beta}");
        }
        prev = Some(v);
    }
}
