//! The coherence-stabilizing control law, its stability criterion, the
//! closed-form breakdown time, and construction of executable control
//! schedules.
//!
//! Driving `h_y(t) = γ2 v_x(0) / (2 v_z(t))` holds `v_x` constant by
//! pumping population out of `v_z`. If the initial transverse component is
//! small enough, relaxation replenishes `v_z` and the drive settles to a
//! constant; otherwise `v_z` reaches zero at a finite breakdown time and
//! the control must be switched off.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::bloch::{BlochState, DecoherenceParams};
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, State, Stop};
use crate::schedule::ControlSchedule;

/// Default amplitude cap for schedules, in units of γ2. Large enough that
/// the cutoff happens within ~1e-4 T2 of the ideal breakdown time.
pub const DEFAULT_H_MAX_OVER_GAMMA2: f64 = 50.0;

/// Co-integration horizon for schedules that never break down, in units
/// of T2.
pub const STABLE_SCHEDULE_HORIZON_T2: f64 = 60.0;

/// Event-location tolerance for the amplitude-cap crossing, in units of T2.
const CUTOFF_TIME_TOL_T2: f64 = 1e-9;

/// Below `γ1 < γ1_SERIES_THRESHOLD · γ2` the closed-form breakdown time is
/// evaluated by its small-γ1 series instead of the full expression, whose
/// 1/γ1 prefactor would otherwise amplify rounding.
const GAMMA1_SERIES_THRESHOLD: f64 = 1e-8;

/// A pure initial state in the xz plane, at polar angle θ from +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    theta: f64,
    v_x0: f64,
    v_z0: f64,
}

impl InitialState {
    /// From the polar angle θ ∈ [0, π/2]: `v_x(0) = sin θ`, `v_z(0) = cos θ`.
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2 + 1e-12).contains(&theta) {
            return Err(Error::Domain(format!("theta must lie in [0, pi/2] (got {theta})")));
        }
        let theta = theta.min(FRAC_PI_2);
        Ok(Self { theta, v_x0: theta.sin(), v_z0: theta.cos() })
    }

    /// From the transverse component `v_x(0) ∈ [0, 1]`.
    pub fn from_v_x0(v_x0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v_x0) {
            return Err(Error::Domain(format!("v_x0 must lie in [0, 1] (got {v_x0})")));
        }
        let theta = v_x0.asin();
        Ok(Self { theta, v_x0, v_z0: theta.cos() })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn v_x0(&self) -> f64 {
        self.v_x0
    }

    pub fn v_z0(&self) -> f64 {
        self.v_z0
    }

    pub fn bloch(&self) -> BlochState {
        BlochState::new(self.v_x0, 0.0, self.v_z0)
    }
}

/// Breakdown analysis of an initial state. `t_b` is `f64::INFINITY` for
/// stable states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakdownResult {
    /// First time `v_z` reaches zero under ideal stabilization.
    pub t_b: f64,
    /// Dimensionless breakdown time `γ2 t_b`.
    pub tau_b: f64,
    /// `α = √(4 v_x(0)² γ2/γ1 - η²)`, the margin above the stability
    /// threshold (NaN on the stable branch where the radicand is negative).
    pub alpha: f64,
}

impl BreakdownResult {
    pub fn is_finite(&self) -> bool {
        self.t_b.is_finite()
    }
}

/// The stabilizing drive amplitude `h_y = γ2 v_x(0) / (2 v_z)`.
///
/// Errors at `v_z = 0`, where the law diverges; schedules cap or cut off
/// the drive before that point.
pub fn control_field(v_z: f64, v_x0: f64, gamma_2: f64) -> Result<f64> {
    if v_z == 0.0 {
        if v_x0 == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::BreakdownSingularity);
    }
    Ok(gamma_2 * v_x0 / (2.0 * v_z))
}

/// Largest transverse component that can be held indefinitely:
/// `(η/2)√(γ1/γ2)`.
pub fn stability_threshold(params: &DecoherenceParams) -> f64 {
    0.5 * params.eta() * (params.gamma_1() / params.gamma_2()).sqrt()
}

/// Whether `v_x(0)` can be stabilized indefinitely. The threshold itself
/// is stable (non-strict inequality).
pub fn is_stable(v_x0: f64, params: &DecoherenceParams) -> bool {
    v_x0 <= stability_threshold(params)
}

/// Closed-form breakdown time of an initial state.
///
/// Stable states return the `t_b = +∞` sentinel without evaluating the
/// formula. For unstable states the expression integrates the 1-D flow of
/// `v_z` under ideal stabilization:
///
/// ```text
/// t_b = (1/2γ1) [ ln((α² + (2v_z0 - η)²)/(α² + η²))
///                 + (2η/α)(arctan((2v_z0 - η)/α) + arctan(η/α)) ]
/// ```
///
/// with `α² = 4 v_x0² γ2/γ1 - η²`. The `η` factor on the arctan term is
/// required for the zero-crossing to match the Bloch dynamics at finite
/// temperature (and for the γ1 → 0 limit to lose its η dependence); at
/// η = 1 it is invisible. For `γ1 → 0` the expression is replaced by its
/// series `t_b = v_z0²/(2 γ2 v_x0²) + γ1 (η v_z0³/3 - v_z0⁴/4)/(γ2 v_x0²)²`.
pub fn breakdown_time(init: &InitialState, params: &DecoherenceParams) -> Result<BreakdownResult> {
    let v_x0 = init.v_x0;
    let v_z0 = init.v_z0;
    let g1 = params.gamma_1();
    let g2 = params.gamma_2();
    let eta = params.eta();

    if is_stable(v_x0, params) {
        return Ok(BreakdownResult { t_b: f64::INFINITY, tau_b: f64::INFINITY, alpha: f64::NAN });
    }
    // past this point v_x0 > threshold >= 0, so v_x0 > 0

    if g1 < GAMMA1_SERIES_THRESHOLD * g2 {
        let c = g2 * v_x0 * v_x0;
        let t_b = v_z0 * v_z0 / (2.0 * c)
            + g1 * (eta * v_z0.powi(3) / 3.0 - v_z0.powi(4) / 4.0) / (c * c);
        return Ok(BreakdownResult { t_b, tau_b: g2 * t_b, alpha: (2.0 * v_x0) * (g2 / g1).sqrt() });
    }

    let alpha_sq = 4.0 * v_x0 * v_x0 * g2 / g1 - eta * eta;
    if alpha_sq <= 0.0 {
        return Err(Error::Internal(format!(
            "unstable branch reached with alpha^2 = {alpha_sq} <= 0"
        )));
    }
    let alpha = alpha_sq.sqrt();
    let u = 2.0 * v_z0 - eta;
    // ln((α² + u²)/(α² + η²)) via ln_1p for accuracy when α is large
    let log_term = ((u * u - eta * eta) / (alpha_sq + eta * eta)).ln_1p();
    let atan_term = (2.0 * eta / alpha) * ((u / alpha).atan() + (eta / alpha).atan());
    let t_b = (log_term + atan_term) / (2.0 * g1);
    Ok(BreakdownResult { t_b, tau_b: g2 * t_b, alpha })
}

/// Reference trajectory of the stabilized zero-detuning dynamics, stopping
/// either at the amplitude-cap crossing or at the horizon.
///
/// Along this trajectory `v_x` stays at `v_x(0)` and `v_y` stays at zero,
/// so only `v_z` carries information; the full 3-component system is
/// integrated anyway as a self-check.
fn co_integrate(
    init: &InitialState,
    params: &DecoherenceParams,
    h_max: f64,
    horizon: f64,
) -> Result<(ode::DenseTrajectory, Option<f64>)> {
    let v_x0 = init.v_x0;
    let g1 = params.gamma_1();
    let g2 = params.gamma_2();
    let eta = params.eta();
    // the cap is reached when v_z falls to this level
    let v_z_cut = g2 * v_x0 / (2.0 * h_max);

    let rhs = move |_t: f64, y: &State| {
        let h = g2 * v_x0 / (2.0 * y[2]);
        [
            -g2 * y[0] + 2.0 * h * y[2],
            0.0,
            g1 * (eta - y[2]) - 2.0 * h * y[0],
        ]
    };
    let event = move |_t: f64, y: &State| y[2] - v_z_cut;
    let opts = OdeOptions::default();
    let (traj, stop) = ode::integrate(
        rhs,
        0.0,
        [v_x0, 0.0, init.v_z0],
        horizon,
        Some((&event, CUTOFF_TIME_TOL_T2 / g2)),
        &opts,
    )?;
    match stop {
        Stop::Event { t } => Ok((traj, Some(t))),
        Stop::Completed => Ok((traj, None)),
    }
}

/// Build the executable control schedule for an initial state.
///
/// The waveform evaluates the control law along the deterministic Δ = 0
/// trajectory (computed here by co-integration, not lookup tables). The
/// first time the amplitude would exceed `h_max` the drive is set to zero
/// permanently and the cutoff time recorded. Stable states never cut off;
/// beyond the co-integration horizon their drive holds the steady-state
/// value `γ2 v_x0 / (2 v_z∞)`.
pub fn build_schedule(
    init: &InitialState,
    params: &DecoherenceParams,
    h_max: f64,
) -> Result<ControlSchedule> {
    if !(h_max > 0.0) {
        return Err(Error::Domain(format!("h_max must be > 0 (got {h_max})")));
    }
    let v_x0 = init.v_x0;
    let g1 = params.gamma_1();
    let g2 = params.gamma_2();
    let eta = params.eta();

    if v_x0 == 0.0 {
        // nothing to stabilize
        return Ok(ControlSchedule::free());
    }
    if init.v_z0 <= g2 * v_x0 / (2.0 * h_max) {
        // over the cap from the start; the entire schedule is zero
        return Ok(ControlSchedule::free().with_cutoff(0.0));
    }

    let horizon = STABLE_SCHEDULE_HORIZON_T2 / g2;
    let (traj, cutoff) = co_integrate(init, params, h_max, horizon)?;

    let asymptote = if cutoff.is_some() {
        0.0
    } else {
        // stable branch: v_z settles at the larger root of
        // v_z² - η v_z + (γ2/γ1) v_x0² = 0
        let disc = eta * eta - 4.0 * v_x0 * v_x0 * g2 / g1;
        let v_z_inf = 0.5 * (eta + disc.max(0.0).sqrt());
        g2 * v_x0 / (2.0 * v_z_inf)
    };
    Ok(ControlSchedule::tracking(Arc::new(traj), v_x0, g2, asymptote, h_max, cutoff))
}

/// Breakdown time measured on the integrated dynamics instead of the
/// closed form: the cutoff of a schedule built with a very large cap.
///
/// With cap `H`, the cutoff precedes the true zero crossing of `v_z` by
/// `~(γ2 v_x0/(2H))² / (2 γ2 v_x0²)`, which at `H = 1e5 γ2` is below
/// 1e-10 T2 — far inside any tolerance used in this crate. Larger caps
/// would force the integrator below its step-size floor approaching the
/// square-root singularity.
pub fn breakdown_time_ode(init: &InitialState, params: &DecoherenceParams) -> Result<f64> {
    let h_max = 1e5 * params.gamma_2();
    let schedule = build_schedule(init, params, h_max)?;
    schedule
        .cutoff_time()
        .ok_or_else(|| Error::Internal("no breakdown within the integration horizon".into()))
}
