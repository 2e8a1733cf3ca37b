//! Closed-form signal curves and optimal measurement times for the Ramsey
//! and coherence-stabilized protocols.
//!
//! Except for the Ramsey expressions, which are exact in the detuning,
//! every formula here is the first-order small-detuning expansion; the ODE
//! integrator covers the finite-detuning regime. Signals therefore carry
//! `O((Δ/γ2)²)` absolute error relative to the true dynamics, which the
//! test suite pins at `2 (Δ T2)²` for `Δ T2 = 0.01`.

use std::f64::consts::E;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bloch::DecoherenceParams;
use crate::error::Result;
use crate::stabilization::{breakdown_time, is_stable, InitialState};

pub use crate::lambert::lambert_w_minus1;

/// Which optimum a measurement time refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingBranch {
    /// Ramsey, maximum v_y.
    RamseyVy,
    /// Ramsey, maximum v_y/√t.
    RamseySnr,
    /// Stabilized without breakdown, asymptotic v_y (infinite optimum).
    StableVy,
    /// Maximum v_y/√t reached during stabilization.
    StableSnr,
    /// Maximum v_y after breakdown and control cutoff.
    BreakdownVy,
    /// Maximum v_y/√t after breakdown and control cutoff.
    BreakdownSnr,
}

/// A measurement time and the optimum it realizes. `t_meas` is
/// `f64::INFINITY` for the asymptotic stable branch; use
/// [`ProtocolTiming::resolve`] to substitute a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolTiming {
    pub t_meas: f64,
    pub branch: TimingBranch,
}

/// Default measurement horizon, in units of T2, standing in for the
/// infinite optimum of permanently stabilized states. The asymptote is
/// approached as `1 - e^{-t/T2}`, so five T2 leaves a 0.7% shortfall.
pub const DEFAULT_STABLE_HORIZON_T2: f64 = 5.0;

impl ProtocolTiming {
    /// The measurement time, replacing an infinite optimum by `horizon`.
    pub fn resolve(&self, horizon: f64) -> f64 {
        if self.t_meas.is_finite() {
            self.t_meas
        } else {
            horizon
        }
    }
}

/// Figure of merit being optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMode {
    /// Maximum signal per measurement shot: v_y itself.
    PerShot,
    /// Maximum signal per root evolution time: v_y/√t.
    PerRootTime,
}

/// Ramsey signal `v_y(t) = sin(Δt) e^{-γ2 t}` (exact in Δ).
pub fn ramsey_vy(delta: f64, gamma_2: f64, t: f64) -> f64 {
    (delta * t).sin() * (-gamma_2 * t).exp()
}

/// Optimal Ramsey measurement time and the signal value there.
///
/// Per shot the optimum `t = arctan(Δ/γ2)/Δ` and its value are exact in
/// Δ (and approach `T2` and `(1/e)Δ/γ2` as Δ → 0). Per root time the
/// first-order optimum `t = T2/2` is used, with the value evaluated
/// exactly at that time.
pub fn ramsey_optimum(delta: f64, gamma_2: f64, mode: OptimizeMode) -> (ProtocolTiming, f64) {
    match mode {
        OptimizeMode::PerShot => {
            let t = if delta == 0.0 {
                1.0 / gamma_2
            } else {
                (delta / gamma_2).atan() / delta
            };
            (ProtocolTiming { t_meas: t, branch: TimingBranch::RamseyVy }, ramsey_vy(delta, gamma_2, t))
        }
        OptimizeMode::PerRootTime => {
            let t = 0.5 / gamma_2;
            (
                ProtocolTiming { t_meas: t, branch: TimingBranch::RamseySnr },
                ramsey_vy(delta, gamma_2, t) / t.sqrt(),
            )
        }
    }
}

/// Small-Δ Ramsey peak `v_y ≈ (1/e) Δ/γ2`, the per-shot baseline of every
/// improvement ratio.
pub fn ramsey_peak_small_delta(delta: f64, gamma_2: f64) -> f64 {
    delta / (E * gamma_2)
}

/// Small-Δ Ramsey peak of `v_y/√t`, namely `Δ/√(2 e γ2)`.
pub fn ramsey_snr_peak_small_delta(delta: f64, gamma_2: f64) -> f64 {
    delta / (2.0 * E * gamma_2).sqrt()
}

/// Stabilized signal while the control holds `v_x = v_x(0)`:
/// `v_y(t) = (1 - e^{-γ2 t}) v_x(0) Δ/γ2` (first order in Δ).
pub fn stabilized_vy(t: f64, v_x0: f64, delta: f64, gamma_2: f64) -> f64 {
    -(-gamma_2 * t).exp_m1() * v_x0 * delta / gamma_2
}

/// Signal after breakdown, `t'` past the cutoff (first order in Δ):
/// `v_y(t_b + t') = [v_y(t_b) + v_x(0) Δ t'] e^{-γ2 t'}` with
/// `v_y(t_b) = (1 - e^{-τ_b}) v_x(0) Δ/γ2`.
pub fn post_breakdown_vy(t_prime: f64, v_x0: f64, tau_b: f64, delta: f64, gamma_2: f64) -> f64 {
    let vy_at_breakdown = -(-tau_b).exp_m1() * v_x0 * delta / gamma_2;
    (vy_at_breakdown + v_x0 * delta * t_prime) * (-gamma_2 * t_prime).exp()
}

/// The dimensionless time `τ* = γ2 t` maximizing `(1 - e^{-τ})/√τ`, i.e.
/// `-(1 + 2 W₋₁(-1/(2√e)))/2 ≈ 1.2564`.
pub fn stable_snr_tau() -> f64 {
    static TAU: OnceLock<f64> = OnceLock::new();
    *TAU.get_or_init(|| {
        let w = lambert_w_minus1(-0.5 / E.sqrt()).expect("argument is inside the branch domain");
        -(1.0 + 2.0 * w) / 2.0
    })
}

/// Post-breakdown delay `τ' = γ2 t'` maximizing `v_y/√t`, as a function of
/// the dimensionless breakdown time. Returns 0 when the optimum lies
/// before the breakdown (τ_b ≥ τ*), where the in-stabilization maximum at
/// τ* applies instead.
pub(crate) fn post_breakdown_snr_delay(tau_b: f64) -> f64 {
    // positive root of 2x² + (2c + 2τ_b - 1)x - (2τ_b(1-c) - c) = 0 with
    // c = 1 - e^{-τ_b}; from d/dτ'[ln((c+τ') e^{-τ'}/√(τ_b+τ'))] = 0
    let c = -(-tau_b).exp_m1();
    let b = 2.0 * c + 2.0 * tau_b - 1.0;
    let q = 2.0 * tau_b * (1.0 - c) - c;
    let disc = b * b + 8.0 * q;
    if disc <= 0.0 {
        return 0.0;
    }
    let x = (-b + disc.sqrt()) / 4.0;
    x.max(0.0)
}

/// Per-shot post-breakdown delay `τ' = e^{-τ_b}` maximizing v_y.
pub(crate) fn post_breakdown_vy_delay(tau_b: f64) -> f64 {
    (-tau_b).exp()
}

/// Optimal measurement time for the stabilized protocol.
///
/// Branches:
/// - per shot, stable: the signal saturates; `t_meas` is the +∞ sentinel
///   (resolve against a horizon, conventionally 5 T2);
/// - per shot, unstable: `t = t_b + T2 e^{-τ_b}`;
/// - per root time: `t = τ* T2 ≈ 1.256 T2` whenever the state is stable
///   *or* survives past τ* (the v_y/√t maximum is reached during
///   stabilization in that case); otherwise `t = t_b + t'` with the
///   closed-form post-breakdown delay.
pub fn optimal_time(
    v_x0: f64,
    params: &DecoherenceParams,
    mode: OptimizeMode,
) -> Result<ProtocolTiming> {
    let g2 = params.gamma_2();
    let init = InitialState::from_v_x0(v_x0)?;
    let stable = is_stable(v_x0, params);
    let tau_b = if stable { f64::INFINITY } else { breakdown_time(&init, params)?.tau_b };

    Ok(match mode {
        OptimizeMode::PerShot => {
            if stable {
                ProtocolTiming { t_meas: f64::INFINITY, branch: TimingBranch::StableVy }
            } else {
                ProtocolTiming {
                    t_meas: (tau_b + post_breakdown_vy_delay(tau_b)) / g2,
                    branch: TimingBranch::BreakdownVy,
                }
            }
        }
        OptimizeMode::PerRootTime => {
            let tau_star = stable_snr_tau();
            if tau_b >= tau_star {
                ProtocolTiming { t_meas: tau_star / g2, branch: TimingBranch::StableSnr }
            } else {
                ProtocolTiming {
                    t_meas: (tau_b + post_breakdown_snr_delay(tau_b)) / g2,
                    branch: TimingBranch::BreakdownSnr,
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_params() -> DecoherenceParams {
        DecoherenceParams::from_rates(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn ramsey_vy_values() {
        assert_eq!(ramsey_vy(0.0, 1.0, 3.0), 0.0);
        // small detuning at t = T2: ~ (1/e) * 0.01
        let v = ramsey_vy(0.01, 1.0, 1.0);
        assert_abs_diff_eq!(v, 3.679e-3, epsilon = 1e-6);
    }

    #[test]
    fn ramsey_optimum_small_and_unit_detuning() {
        let (timing, value) = ramsey_optimum(1e-6, 1.0, OptimizeMode::PerShot);
        assert_abs_diff_eq!(timing.t_meas, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(value / 1e-6, 1.0 / E, epsilon = 1e-9);

        // delta/gamma_2 = 1: t = pi/4, value = sin(pi/4) e^{-pi/4}
        let (timing, value) = ramsey_optimum(1.0, 1.0, OptimizeMode::PerShot);
        assert_abs_diff_eq!(timing.t_meas, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        let expected = std::f64::consts::FRAC_PI_4.sin()
            * (-std::f64::consts::FRAC_PI_4).exp();
        assert_abs_diff_eq!(value, expected, epsilon = 1e-15);

        let (timing, value) = ramsey_optimum(1e-6, 1.0, OptimizeMode::PerRootTime);
        assert_abs_diff_eq!(timing.t_meas, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(value / 1e-6, 1.0 / (2.0 * E).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn stabilized_vy_limits() {
        assert_eq!(stabilized_vy(0.0, 0.5, 0.01, 1.0), 0.0);
        // asymptote v_x0 * delta / gamma_2
        let v = stabilized_vy(100.0, 0.5, 0.01, 1.0);
        assert_abs_diff_eq!(v, 0.5 * 0.01, epsilon = 1e-15);
    }

    #[test]
    fn post_breakdown_continuity_and_ramsey_reduction() {
        let (v_x0, delta, g2) = (0.671, 0.01, 1.0);
        let tau_b = 1.2;
        // continuity at t' = 0
        assert_abs_diff_eq!(
            post_breakdown_vy(0.0, v_x0, tau_b, delta, g2),
            stabilized_vy(tau_b / g2, v_x0, delta, g2),
            epsilon = 1e-15
        );
        // tau_b = 0 reduces to the first-order Ramsey form
        for t in [0.2, 0.7, 1.3] {
            assert_abs_diff_eq!(
                post_breakdown_vy(t, 1.0, 0.0, delta, g2),
                delta * t * (-t).exp(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn snr_delay_reduces_to_ramsey_and_vanishes_at_tau_star() {
        assert_abs_diff_eq!(post_breakdown_snr_delay(0.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(post_breakdown_snr_delay(stable_snr_tau()), 0.0, epsilon = 1e-9);
        assert_eq!(post_breakdown_snr_delay(3.0), 0.0);
    }

    #[test]
    fn optimal_time_branches() {
        let p = unit_params();
        // stable per shot: sentinel with a resolvable horizon
        let t = optimal_time(0.4, &p, OptimizeMode::PerShot).unwrap();
        assert_eq!(t.branch, TimingBranch::StableVy);
        assert!(t.t_meas.is_infinite());
        assert_eq!(t.resolve(5.0), 5.0);

        // stable per root time: tau* T2
        let t = optimal_time(0.4, &p, OptimizeMode::PerRootTime).unwrap();
        assert_eq!(t.branch, TimingBranch::StableSnr);
        assert_abs_diff_eq!(t.t_meas, 1.256431208626170, epsilon = 1e-12);

        // equatorial state: Ramsey timings recovered
        let t = optimal_time(1.0, &p, OptimizeMode::PerShot).unwrap();
        assert_eq!(t.branch, TimingBranch::BreakdownVy);
        assert_abs_diff_eq!(t.t_meas, 1.0, epsilon = 1e-12);
        let t = optimal_time(1.0, &p, OptimizeMode::PerRootTime).unwrap();
        assert_abs_diff_eq!(t.t_meas, 0.5, epsilon = 1e-12);

        // deep breakdown: per-shot delay e^{-tau_b} -> 0
        let p_fast = DecoherenceParams::from_rates(0.02, 1.0, 1.0).unwrap();
        let tb = breakdown_time(&InitialState::from_v_x0(0.9).unwrap(), &p_fast)
            .unwrap();
        let t = optimal_time(0.9, &p_fast, OptimizeMode::PerShot).unwrap();
        assert!(t.t_meas - tb.t_b < 2.0 * (-tb.tau_b).exp() / 1.0 + 1e-12);
        assert!(t.t_meas >= tb.t_b);
    }

    #[test]
    fn breakdown_branch_times_never_precede_breakdown() {
        let p = unit_params();
        for v_x0 in [0.55, 0.7, 0.85, 1.0] {
            let tb = breakdown_time(&InitialState::from_v_x0(v_x0).unwrap(), &p).unwrap();
            for mode in [OptimizeMode::PerShot, OptimizeMode::PerRootTime] {
                let t = optimal_time(v_x0, &p, mode).unwrap();
                match t.branch {
                    TimingBranch::BreakdownVy | TimingBranch::BreakdownSnr => {
                        assert!(t.t_meas >= tb.t_b - 1e-12);
                    }
                    TimingBranch::StableSnr => assert!(tb.tau_b >= stable_snr_tau()),
                    _ => {}
                }
            }
        }
    }
}
