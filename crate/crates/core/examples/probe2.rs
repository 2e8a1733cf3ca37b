// scratch probe (deleted before release)
use stabsense_core::*;

fn main() {
    let params = DecoherenceParams::from_t1_over_t2(1.0).unwrap();
    let report = optimize_initial_state(&params, OptimizeMode::PerRootTime).unwrap();
    let init = InitialState::from_v_x0(report.best_v_x0).unwrap();
    let plan = ShotPlan::new(100_000_000, 1.0, 0.0, 1.0).unwrap();
    let deltas = [-0.02, -0.01, 0.0, 0.01, 0.02];

    for scales in [vec![], vec![1.0; 4], vec![1.1, 0.9, 1.1, 0.9]] {
        let mut cfg = SweepConfig::new(OptimizeMode::PerRootTime, 4, 777);
        cfg.t2_scale = scales.clone();
        let records = run_detuning_sweep(&init, &params, &deltas, &plan, &cfg).unwrap();
        let est = chunked_ratio_estimate(&records, 2, OptimizeMode::PerRootTime).unwrap();
        println!("scales {scales:?}: mean {} se {}", est.mean, est.std_error);
        // inspect t_meas per iteration
        for r in records.iter().filter(|r| r.iteration < 2 && r.delta == 0.01) {
            println!(
                "  it {} {:?} t_meas {:.5} t2 {:.3} tau {:.5} vy_hat {:.6} x {:.4}",
                r.iteration,
                r.protocol,
                r.t_meas,
                r.t2_actual,
                r.t_meas / r.t2_actual,
                r.sample.contrast_vy_estimate(),
                r.delta_t2()
            );
        }
    }
}
