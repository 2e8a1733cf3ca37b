// scratch probe (deleted before release)
use stabsense_core::*;

fn main() {
    for (r, mode) in [
        (0.5, OptimizeMode::PerShot),
        (100.0, OptimizeMode::PerShot),
        (0.5, OptimizeMode::PerRootTime),
        (0.764, OptimizeMode::PerRootTime),
        (100.0, OptimizeMode::PerRootTime),
        (1.0, OptimizeMode::PerShot),
        (1.0, OptimizeMode::PerRootTime),
    ] {
        let p = DecoherenceParams::from_t1_over_t2(r).unwrap();
        match optimize_initial_state(&p, mode) {
            Ok(rep) => println!(
                "T1/T2={r:>7} {mode:?}: ratio={:.6} v_x0={:.6} theta/pi={:.4} t_meas={:.4}",
                rep.ratio,
                rep.best_v_x0,
                rep.best_theta / std::f64::consts::PI,
                rep.t_meas
            ),
            Err(e) => println!("T1/T2={r} {mode:?}: ERROR {e}"),
        }
    }

    // stable-branch coefficients
    let tau_star = protocols::stable_snr_tau();
    let g = (1.0 - (-tau_star).exp()) / tau_star.sqrt();
    let e2 = (2.0 * std::f64::consts::E).sqrt();
    println!("tau* = {tau_star:.12}");
    println!("signal coeff = {:.6}", g / 2.0);
    println!("rs coeff     = {:.6}", e2 * g / 2.0);

    // breakdown anchor
    let p = DecoherenceParams::from_t1_over_t2(1.0).unwrap();
    let init = InitialState::from_v_x0(0.671).unwrap();
    let b = breakdown_time(&init, &p).unwrap();
    let ode = stabilization::breakdown_time_ode(&init, &p).unwrap();
    println!("tau_b(0.671) closed = {:.9}, ode = {:.9}, diff = {:.2e}", b.tau_b, ode, (b.t_b - ode).abs());

    // rv crossing of 1
    let f = |r: f64| {
        let p = DecoherenceParams::from_t1_over_t2(1.0 / r).unwrap();
        improvement_rv(stability_threshold(&p), &p).unwrap() - 1.0
    };
    let (mut lo, mut hi) = (0.3, 0.8);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 { lo = mid } else { hi = mid }
    }
    println!("rv stable crossing at gamma1/gamma2 = {:.9} (4/e^2 = {:.9})", 0.5 * (lo + hi), 4.0 / std::f64::consts::E.powi(2));
}
