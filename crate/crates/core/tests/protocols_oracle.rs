//! Closed-form protocol signals and timing optima against the ODE ground
//! truth.

mod common;

use approx::assert_abs_diff_eq;
use stabsense_core::protocols::{
    post_breakdown_vy, ramsey_vy, stabilized_vy, stable_snr_tau,
};
use stabsense_core::*;

const DELTA_T2: f64 = 0.01;
/// First-order formulas carry O((delta T2)^2) error against the dynamics.
const SMALL_DELTA_BUDGET: f64 = 2.0 * DELTA_T2 * DELTA_T2;

#[test]
fn ramsey_formula_is_exact_against_integrator() {
    let params = DecoherenceParams::from_t1_over_t2(0.9).unwrap();
    for delta in [0.01, 0.3, 1.0] {
        for t in [0.3, 1.0, 2.7] {
            let v = evolve(
                BlochState::new(1.0, 0.0, 0.0),
                &params,
                &ControlSchedule::free(),
                delta,
                t,
            )
            .unwrap();
            assert_abs_diff_eq!(v.v_y, ramsey_vy(delta, 1.0, t), epsilon = 1e-8);
        }
    }
}

#[test]
fn ramsey_per_shot_optimum_agrees_with_dense_scan() {
    let (timing, value) = protocols::ramsey_optimum(1.0, 1.0, OptimizeMode::PerShot);
    let (t_scan, v_scan) = optim::maximize_scalar(|t| ramsey_vy(1.0, 1.0, t), 0.01, 3.0, 400, 1e-9);
    assert_abs_diff_eq!(timing.t_meas, t_scan, epsilon = 1e-4);
    assert_abs_diff_eq!(value, v_scan, epsilon = 1e-9);
}

#[test]
fn stabilized_signal_matches_ode_to_second_order() {
    // gamma_1 = gamma_2, stable state 0.5: closed form within 2 (delta T2)^2
    // of the full dynamics out to 10 T2
    let params = DecoherenceParams::from_t1_over_t2(1.0).unwrap();
    let init = InitialState::from_v_x0(0.5).unwrap();
    let schedule = build_schedule(&init, &params, 50.0).unwrap();
    let delta = DELTA_T2;
    for t in common::linspace(0.25, 10.0, 16) {
        let ode = evolve(init.bloch(), &params, &schedule, delta, t).unwrap().v_y;
        let closed = stabilized_vy(t, 0.5, delta, 1.0);
        assert!(
            (ode - closed).abs() <= SMALL_DELTA_BUDGET,
            "t = {t}: |{ode} - {closed}| > {SMALL_DELTA_BUDGET}"
        );
    }
}

#[test]
fn post_breakdown_signal_matches_ode_to_second_order() {
    let params = DecoherenceParams::from_t1_over_t2(1.0).unwrap();
    let init = InitialState::from_v_x0(0.671).unwrap();
    let schedule = build_schedule(&init, &params, 50.0).unwrap();
    let tau_b = breakdown_time(&init, &params).unwrap().tau_b;
    let delta = DELTA_T2;
    for t_prime in common::linspace(0.0, 3.0, 13) {
        let ode = evolve(init.bloch(), &params, &schedule, delta, tau_b + t_prime)
            .unwrap()
            .v_y;
        let closed = post_breakdown_vy(t_prime, 0.671, tau_b, delta, 1.0);
        assert!(
            (ode - closed).abs() <= SMALL_DELTA_BUDGET,
            "t' = {t_prime}: |{ode} - {closed}| > {SMALL_DELTA_BUDGET}"
        );
    }
}

#[test]
fn continuity_across_breakdown() {
    let tau_b = 0.87;
    for v_x0 in [0.3, 0.671, 0.95] {
        assert_abs_diff_eq!(
            post_breakdown_vy(0.0, v_x0, tau_b, 0.01, 1.0),
            stabilized_vy(tau_b, v_x0, 0.01, 1.0),
            epsilon = 1e-16
        );
    }
}

#[test]
fn stabilized_formulas_reduce_to_ramsey_limits() {
    // v_x0 -> 1, tau_b -> 0 reproduces the small-delta Ramsey expressions
    let delta = 1e-4;
    for t in common::linspace(0.1, 3.0, 12) {
        let reduced = post_breakdown_vy(t, 1.0, 0.0, delta, 1.0);
        let small_delta_ramsey = delta * t * (-t).exp();
        assert_abs_diff_eq!(reduced, small_delta_ramsey, epsilon = 1e-12);
    }
}

#[test]
fn optimal_times_are_stationary_points_of_the_objectives() {
    // central differences, step 1e-5 T2, derivative of the per-delta
    // objective within 1e-6
    let step = 1e-5;
    for t1_over_t2 in [0.5, 1.0, 2.0] {
        let params = DecoherenceParams::from_t1_over_t2(t1_over_t2).unwrap();
        for v_x0 in [0.6, 0.671, 0.8, 0.9] {
            if is_stable(v_x0, &params) {
                continue;
            }
            let tau_b = breakdown_time(&InitialState::from_v_x0(v_x0).unwrap(), &params)
                .unwrap()
                .tau_b;

            let t_shot = optimal_time(v_x0, &params, OptimizeMode::PerShot).unwrap().t_meas;
            let f = |t: f64| post_breakdown_vy(t - tau_b, v_x0, tau_b, 1.0, 1.0);
            let d = (f(t_shot + step) - f(t_shot - step)) / (2.0 * step);
            assert!(d.abs() < 1e-6, "per-shot optimum not stationary: {d:e}");

            let timing = optimal_time(v_x0, &params, OptimizeMode::PerRootTime).unwrap();
            let g = |t: f64| {
                let vy = if t <= tau_b {
                    stabilized_vy(t, v_x0, 1.0, 1.0)
                } else {
                    post_breakdown_vy(t - tau_b, v_x0, tau_b, 1.0, 1.0)
                };
                vy / t.sqrt()
            };
            let d = (g(timing.t_meas + step) - g(timing.t_meas - step)) / (2.0 * step);
            assert!(d.abs() < 1e-6, "per-root-time optimum not stationary: {d:e}");
        }
    }
    // stable branch stationary point at tau*
    let g = |tau: f64| (1.0 - (-tau).exp()) / tau.sqrt();
    let tau_star = stable_snr_tau();
    let d = (g(tau_star + 1e-5) - g(tau_star - 1e-5)) / 2e-5;
    assert!(d.abs() < 1e-6);
}

#[test]
fn per_shot_time_maximizes_the_simulated_signal() {
    // the closed-form optimum matches a golden-section refinement of the
    // ODE signal within 1e-2 T2
    let params = DecoherenceParams::from_t1_over_t2(1.0).unwrap();
    let init = InitialState::from_v_x0(0.671).unwrap();
    let schedule = build_schedule(&init, &params, 50.0).unwrap();
    let delta = DELTA_T2;
    let vy_of = |t: f64| evolve(init.bloch(), &params, &schedule, delta, t).unwrap().v_y;
    let (t_ode, _) = optim::maximize_scalar(vy_of, 0.5, 4.0, 120, 1e-5);
    let t_closed = optimal_time(0.671, &params, OptimizeMode::PerShot).unwrap().t_meas;
    assert!(
        (t_ode - t_closed).abs() < 1e-2,
        "closed-form {t_closed} vs ODE argmax {t_ode}"
    );
}

#[test]
fn small_delta_dominance_across_parameter_grid() {
    // closed forms within 2 (delta T2)^2 of the ODE oracle over the
    // property grid: 50 initial states x 4 decay ratios, both timing modes
    let delta = DELTA_T2;
    for gamma_ratio in [0.1, 0.5, 1.0, 2.0] {
        let params = DecoherenceParams::from_t1_over_t2(1.0 / gamma_ratio).unwrap();
        for v_x0 in common::linspace(0.02, 0.99, 50) {
            let init = InitialState::from_v_x0(v_x0).unwrap();
            let schedule = build_schedule(&init, &params, 50.0).unwrap();
            let stable = is_stable(v_x0, &params);
            let tau_b = breakdown_time(&init, &params).unwrap().tau_b;
            for mode in [OptimizeMode::PerShot, OptimizeMode::PerRootTime] {
                let t = optimal_time(v_x0, &params, mode).unwrap().resolve(5.0);
                let ode = evolve(init.bloch(), &params, &schedule, delta, t).unwrap().v_y;
                let closed = if stable || t <= tau_b {
                    stabilized_vy(t, v_x0, delta, 1.0)
                } else {
                    post_breakdown_vy(t - tau_b, v_x0, tau_b, delta, 1.0)
                };
                assert!(
                    (ode - closed).abs() <= SMALL_DELTA_BUDGET,
                    "ratio {gamma_ratio} v_x0 {v_x0:.3} {mode:?}: |{ode} - {closed}| > budget"
                );
            }
        }
    }
}
