//! Shared test oracles, deliberately independent of the crate's own
//! integrator: a fixed-step RK4 for the Bloch system (with state-feedback
//! controls), a substitution-based breakdown-time integrator, and a Prony
//! fit for two-exponential decays.

#![allow(dead_code)]

use stabsense_core::DecoherenceParams;

/// Classic RK4 with `n_steps` fixed steps. The control closure sees the
/// current time and state, so ideal feedback laws can be integrated
/// directly.
pub fn rk4_bloch<H>(
    params: &DecoherenceParams,
    delta: f64,
    v0: [f64; 3],
    t_end: f64,
    n_steps: usize,
    control: H,
) -> [f64; 3]
where
    H: Fn(f64, &[f64; 3]) -> f64,
{
    let g1 = params.gamma_1();
    let g2 = params.gamma_2();
    let eta = params.eta();
    let rhs = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        let h = control(t, y);
        [
            -g2 * y[0] - delta * y[1] + 2.0 * h * y[2],
            -g2 * y[1] + delta * y[0],
            g1 * (eta - y[2]) - 2.0 * h * y[0],
        ]
    };
    let dt = t_end / n_steps as f64;
    let mut y = v0;
    let mut t = 0.0;
    for _ in 0..n_steps {
        let k1 = rhs(t, &y);
        let y2 = add(&y, &k1, dt / 2.0);
        let k2 = rhs(t + dt / 2.0, &y2);
        let y3 = add(&y, &k2, dt / 2.0);
        let k3 = rhs(t + dt / 2.0, &y3);
        let y4 = add(&y, &k3, dt);
        let k4 = rhs(t + dt, &y4);
        for i in 0..3 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += dt;
    }
    y
}

fn add(y: &[f64; 3], k: &[f64; 3], s: f64) -> [f64; 3] {
    [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]]
}

/// Breakdown time by direct integration of the stabilized `v_z` flow in
/// the substitution `w = v_z²`:
///
///   dw/dt = 2 γ1 (η √w - w) - 2 γ2 v_x0²
///
/// which stays regular through the zero crossing (the raw `v_z` equation
/// has infinite slope there). Fixed-step RK4 plus linear interpolation of
/// the crossing; accuracy is far below 1e-6 T2 at the default step.
pub fn breakdown_oracle(v_x0: f64, params: &DecoherenceParams, dt_t2: f64, t_max_t2: f64) -> f64 {
    let g1 = params.gamma_1();
    let g2 = params.gamma_2();
    let eta = params.eta();
    let rhs = |w: f64| 2.0 * g1 * (eta * w.max(0.0).sqrt() - w) - 2.0 * g2 * v_x0 * v_x0;
    let dt = dt_t2 / g2;
    let mut t = 0.0;
    let mut w = 1.0 - v_x0 * v_x0;
    let t_max = t_max_t2 / g2;
    while t < t_max {
        let k1 = rhs(w);
        let k2 = rhs(w + dt / 2.0 * k1);
        let k3 = rhs(w + dt / 2.0 * k2);
        let k4 = rhs(w + dt * k3);
        let w_new = w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if w_new <= 0.0 {
            // linear interpolation of the crossing inside the step
            return t + dt * w / (w - w_new);
        }
        w = w_new;
        t += dt;
    }
    f64::INFINITY
}

/// Recover the two decay rates of `y(t) = offset + A e^{-a t} + B e^{-b t}`
/// sampled on a uniform grid, via the three-term recurrence satisfied by
/// the exponentials (Prony's method). Returns rates sorted descending.
pub fn prony_two_rates(ys: &[f64], offset: f64, dt: f64) -> (f64, f64) {
    let u: Vec<f64> = ys.iter().map(|y| y - offset).collect();
    // least squares for u[k+2] = p u[k+1] + q u[k]
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..u.len() - 2 {
        let (x1, x2, y) = (u[k + 1], u[k], u[k + 2]);
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        b1 += x1 * y;
        b2 += x2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    let p = (b1 * s22 - b2 * s12) / det;
    let q = (s11 * b2 - s12 * b1) / det;
    // roots of r^2 - p r - q
    let disc = (p * p / 4.0 + q).max(0.0).sqrt();
    let r1 = p / 2.0 + disc;
    let r2 = p / 2.0 - disc;
    let rate = |r: f64| -r.ln() / dt;
    let (a, b) = (rate(r1), rate(r2));
    if a > b { (a, b) } else { (b, a) }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
