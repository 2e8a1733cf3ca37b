//! Bloch vector dynamics of a driven, decohering qubit.
//!
//! The model is a two-level system in the rotating frame of its drive,
//! with detuning `Δ`, a y-axis control field `h_y(t)`, relaxation at rate
//! `γ1` toward a thermal z-polarization `η`, and total transverse decay at
//! rate `γ2 = γφ + γ1/2`:
//!
//! ```text
//! v̇_x = -γ2 v_x - Δ v_y + 2 h_y v_z
//! v̇_y = -γ2 v_y + Δ v_x
//! v̇_z = γ1 (η - v_z) - 2 h_y v_x
//! ```
//!
//! All quantities are in a consistent unit system chosen by the caller;
//! the usual choice is dimensionless time with `γ2 = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, State};
use crate::schedule::ControlSchedule;

/// Relative tolerance for the `γ2 = γφ + γ1/2` consistency check.
const RATE_CONSISTENCY_RTOL: f64 = 1e-12;

/// Allowed overshoot of the Bloch-ball norm in integrator output.
pub const NORM_SLACK: f64 = 1e-9;

/// The Bloch vector (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) at one instant. Time lives in
/// trajectories, not in the state, so states can be reused across
/// schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub v_x: f64,
    pub v_y: f64,
    pub v_z: f64,
}

impl BlochState {
    pub fn new(v_x: f64, v_y: f64, v_z: f64) -> Self {
        Self { v_x, v_y, v_z }
    }

    pub fn norm(&self) -> f64 {
        (self.v_x * self.v_x + self.v_y * self.v_y + self.v_z * self.v_z).sqrt()
    }

    pub(crate) fn to_array(self) -> State {
        [self.v_x, self.v_y, self.v_z]
    }

    pub(crate) fn from_array(y: State) -> Self {
        Self { v_x: y[0], v_y: y[1], v_z: y[2] }
    }
}

/// Decoherence rates and the thermal asymmetry factor.
///
/// Only two of (γ1, γ2, γφ) are independent; constructors derive the third
/// and reject inconsistent or unphysical combinations (γ1 ≥ 0, γφ ≥ 0,
/// hence γ1/γ2 ∈ [0, 2]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceParams {
    gamma_1: f64,
    gamma_2: f64,
    gamma_phi: f64,
    eta: f64,
}

impl DecoherenceParams {
    /// Build from relaxation and total transverse rates; `γφ = γ2 - γ1/2`.
    pub fn from_rates(gamma_1: f64, gamma_2: f64, eta: f64) -> Result<Self> {
        let gamma_phi = gamma_2 - gamma_1 / 2.0;
        Self::check(gamma_1, gamma_2, gamma_phi, eta)
    }

    /// Build from relaxation and pure-dephasing rates; `γ2 = γφ + γ1/2`.
    pub fn from_relaxation_dephasing(gamma_1: f64, gamma_phi: f64, eta: f64) -> Result<Self> {
        Self::check(gamma_1, gamma_1 / 2.0 + gamma_phi, gamma_phi, eta)
    }

    /// Build from characteristic times `T1 = 1/γ1`, `T2 = 1/γ2`.
    pub fn from_times(t1: f64, t2: f64, eta: f64) -> Result<Self> {
        if !(t1 > 0.0) || !(t2 > 0.0) {
            return Err(Error::Domain(format!("T1, T2 must be positive (got {t1}, {t2})")));
        }
        Self::from_rates(1.0 / t1, 1.0 / t2, eta)
    }

    /// Dimensionless convention: `γ2 = 1` and `γ1 = γ2 / (T1/T2)`, zero
    /// temperature unless overridden later.
    pub fn from_t1_over_t2(t1_over_t2: f64) -> Result<Self> {
        if !(t1_over_t2 > 0.0) {
            return Err(Error::Domain(format!("T1/T2 must be positive (got {t1_over_t2})")));
        }
        Self::from_rates(1.0 / t1_over_t2, 1.0, 1.0)
    }

    fn check(gamma_1: f64, gamma_2: f64, gamma_phi: f64, eta: f64) -> Result<Self> {
        if !gamma_1.is_finite() || gamma_1 < 0.0 {
            return Err(Error::Domain(format!("gamma_1 must be finite and >= 0 (got {gamma_1})")));
        }
        if !gamma_phi.is_finite() || gamma_phi < -RATE_CONSISTENCY_RTOL * gamma_2.abs() {
            return Err(Error::Domain(format!(
                "gamma_phi = gamma_2 - gamma_1/2 must be >= 0 (got {gamma_phi})"
            )));
        }
        if !(gamma_2 > 0.0) {
            return Err(Error::Domain(format!("gamma_2 must be positive (got {gamma_2})")));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("eta must lie in [0, 1] (got {eta})")));
        }
        let rel = (gamma_2 - (gamma_phi + gamma_1 / 2.0)).abs() / gamma_2;
        if rel > RATE_CONSISTENCY_RTOL {
            return Err(Error::Internal(format!("rate consistency violated by {rel:e}")));
        }
        Ok(Self { gamma_1, gamma_2, gamma_phi: gamma_phi.max(0.0), eta })
    }

    /// Same rates with a different thermal asymmetry.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::check(self.gamma_1, self.gamma_2, self.gamma_phi, eta)
    }

    pub fn gamma_1(&self) -> f64 {
        self.gamma_1
    }

    pub fn gamma_2(&self) -> f64 {
        self.gamma_2
    }

    pub fn gamma_phi(&self) -> f64 {
        self.gamma_phi
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t2(&self) -> f64 {
        1.0 / self.gamma_2
    }

    /// T1/T2 = γ2/γ1; infinite when γ1 = 0.
    pub fn t1_over_t2(&self) -> f64 {
        self.gamma_2 / self.gamma_1
    }
}

/// Thermal asymmetry `η = (1 - e^{-βω01}) / (1 + e^{-βω01})`.
///
/// `η → 1` in the zero-temperature limit (βω01 → ∞) and `η = 0` at
/// infinite temperature (β = 0).
pub fn eta_from_temperature(beta: f64, omega01: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be >= 0 (got {beta})")));
    }
    if !(omega01 > 0.0) {
        return Err(Error::Domain(format!("omega01 must be > 0 (got {omega01})")));
    }
    // tanh(x/2) form avoids cancellation for small and large arguments
    Ok((beta * omega01 / 2.0).tanh())
}

/// A detuned experiment: initial state in the xz plane and the output
/// time grid.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub detuning: f64,
    pub initial_state: BlochState,
    pub time_grid: Vec<f64>,
}

impl ExperimentConfig {
    /// Validates that the initial state has `v_y = 0` exactly, sits inside
    /// the Bloch ball, and that the grid starts at 0 and is strictly
    /// increasing.
    pub fn new(detuning: f64, initial_state: BlochState, time_grid: Vec<f64>) -> Result<Self> {
        if !detuning.is_finite() {
            return Err(Error::Domain(format!("detuning must be finite (got {detuning})")));
        }
        if initial_state.v_y != 0.0 {
            return Err(Error::Domain(format!(
                "initial state must have v_y = 0 (got {})",
                initial_state.v_y
            )));
        }
        if initial_state.norm() > 1.0 + NORM_SLACK {
            return Err(Error::Domain(format!(
                "initial state leaves the Bloch ball (|v| = {})",
                initial_state.norm()
            )));
        }
        match time_grid.first() {
            None => return Err(Error::Domain("time grid is empty".into())),
            Some(&t0) if t0 != 0.0 => {
                return Err(Error::Domain(format!("time grid must start at 0 (got {t0})")));
            }
            _ => {}
        }
        if time_grid.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::Domain("time grid must be finite and strictly increasing".into()));
        }
        Ok(Self { detuning, initial_state, time_grid })
    }
}

/// Right-hand side of the Bloch equations.
pub fn bloch_derivative(
    state: BlochState,
    params: &DecoherenceParams,
    h_y: f64,
    delta: f64,
) -> BlochState {
    let g1 = params.gamma_1;
    let g2 = params.gamma_2;
    BlochState {
        v_x: -g2 * state.v_x - delta * state.v_y + 2.0 * h_y * state.v_z,
        v_y: -g2 * state.v_y + delta * state.v_x,
        v_z: g1 * (params.eta - state.v_z) - 2.0 * h_y * state.v_x,
    }
}

fn rhs_array(y: &State, params: &DecoherenceParams, h_y: f64, delta: f64) -> State {
    let g1 = params.gamma_1;
    let g2 = params.gamma_2;
    [
        -g2 * y[0] - delta * y[1] + 2.0 * h_y * y[2],
        -g2 * y[1] + delta * y[0],
        g1 * (params.eta - y[2]) - 2.0 * h_y * y[0],
    ]
}

/// Integrate the Bloch equations under a control schedule and return the
/// state exactly at each grid time.
///
/// The schedule's cutoff, if any, is honored as a hard breakpoint so the
/// control discontinuity never sits inside an integration step.
pub fn integrate_trajectory(
    config: &ExperimentConfig,
    params: &DecoherenceParams,
    control: &ControlSchedule,
) -> Result<Vec<(f64, BlochState)>> {
    let t_end = *config.time_grid.last().unwrap();
    let pieces = split_at_cutoff(0.0, t_end, control.cutoff_time());
    let opts = OdeOptions::default();

    let mut out = Vec::with_capacity(config.time_grid.len());
    let mut grid_iter = config.time_grid.iter().copied().peekable();
    let mut y = config.initial_state.to_array();

    for (a, b, before_cutoff) in pieces {
        let rhs = |t: f64, s: &State| {
            let h = if before_cutoff { control.h_y_pre_cutoff(t) } else { control.h_y(t) };
            rhs_array(s, params, h, config.detuning)
        };
        let (traj, _) = ode::integrate(
            rhs,
            a,
            y,
            b,
            None::<(&fn(f64, &State) -> f64, f64)>,
            &opts,
        )?;
        while let Some(&t) = grid_iter.peek() {
            if t > b {
                break;
            }
            out.push((t, BlochState::from_array(traj.sample(t))));
            grid_iter.next();
        }
        y = traj.y_end();
    }
    Ok(out)
}

/// Integrate to a single time and return the final state.
pub fn evolve(
    initial: BlochState,
    params: &DecoherenceParams,
    control: &ControlSchedule,
    delta: f64,
    t: f64,
) -> Result<BlochState> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("evolution time must be >= 0 (got {t})")));
    }
    if t == 0.0 {
        return Ok(initial);
    }
    let config = ExperimentConfig::new(delta, initial, vec![0.0, t])?;
    let traj = integrate_trajectory(&config, params, control)?;
    Ok(traj.last().unwrap().1)
}

/// Split `[a, b]` at a cutoff time, tagging each piece with whether it
/// lies before the cutoff.
fn split_at_cutoff(a: f64, b: f64, cutoff: Option<f64>) -> Vec<(f64, f64, bool)> {
    match cutoff {
        Some(c) if c > a && c < b => vec![(a, c, true), (c, b, false)],
        Some(c) if c <= a => vec![(a, b, false)],
        _ => vec![(a, b, true)],
    }
}

/// Closed-form free decay (`h_y = 0`, `Δ = 0`):
/// transverse components decay at γ2, `v_z` relaxes toward η at γ1.
pub fn free_decay(initial: BlochState, params: &DecoherenceParams, t: f64) -> Result<BlochState> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("free decay time must be >= 0 (got {t})")));
    }
    let e2 = (-params.gamma_2 * t).exp();
    let e1 = (-params.gamma_1 * t).exp();
    Ok(BlochState {
        v_x: initial.v_x * e2,
        v_y: initial.v_y * e2,
        v_z: params.eta + (initial.v_z - params.eta) * e1,
    })
}

/// Decay structure of `v_x`/`v_z` under a constant drive.
///
/// In the overdamped regime both components are sums of two decaying
/// exponentials; the rates are reported as an (unordered) fast/slow pair.
/// At `h_y = 0` the fast rate is `max(γ1, γ2)` and the attachment is the
/// trivial one: `v_x` decays at γ2 and `v_z` at γ1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveRegime {
    /// `|γ1 - γ2| > 4|h_y|`: two real decay rates
    /// `½(γ1 + γ2 ± √((γ1-γ2)² - (4 h_y)²))`.
    Overdamped { gamma_fast: f64, gamma_slow: f64 },
    /// `|γ1 - γ2| ≤ 4|h_y|`: oscillation at `√((4h_y)² - (γ1-γ2)²)/2`
    /// under a common envelope `(γ1 + γ2)/2`.
    Oscillatory { frequency: f64, decay: f64 },
}

pub fn constant_drive_rates(params: &DecoherenceParams, h_y: f64) -> DriveRegime {
    let dg = params.gamma_1 - params.gamma_2;
    let sum = params.gamma_1 + params.gamma_2;
    let disc = dg * dg - 16.0 * h_y * h_y;
    if disc > 0.0 {
        let root = disc.sqrt();
        DriveRegime::Overdamped {
            gamma_fast: 0.5 * (sum + root),
            gamma_slow: 0.5 * (sum - root),
        }
    } else {
        DriveRegime::Oscillatory { frequency: 0.5 * (-disc).sqrt(), decay: 0.5 * sum }
    }
}

/// Steady state of the Bloch equations under a constant drive.
///
/// Satisfies `bloch_derivative(steady_state(..)) = 0` and
/// `v_y = (Δ/γ2) v_x` identically.
pub fn steady_state(params: &DecoherenceParams, h_y: f64, delta: f64) -> Result<BlochState> {
    let g1 = params.gamma_1;
    let g2 = params.gamma_2;
    let denom = 4.0 * h_y * h_y * g2 + g1 * (g2 * g2 + delta * delta);
    if !(denom > 0.0) {
        return Err(Error::Domain(
            "no unique steady state: 4 h_y^2 gamma_2 + gamma_1 (gamma_2^2 + delta^2) = 0".into(),
        ));
    }
    let scale = params.eta * g1 / denom;
    Ok(BlochState {
        v_x: 2.0 * h_y * g2 * scale,
        v_y: 2.0 * h_y * delta * scale,
        v_z: (g2 * g2 + delta * delta) * scale,
    })
}
