//! Simulation and analysis toolkit for coherence-stabilized qubit
//! frequency sensing.
//!
//! A qubit sensing a static frequency shift accumulates signal in the `v_y`
//! Bloch component. Driving `h_y(t) = γ2 v_x(0) / (2 v_z(t))` holds the
//! transverse component `v_x` constant against decoherence, letting `v_y`
//! grow well past the Ramsey free-evolution maximum. This crate implements
//! the full pipeline around that protocol:
//!
//! - [`bloch`]: state/parameter types, the Bloch equations with thermal
//!   relaxation, closed-form special cases, and an adaptive Runge-Kutta
//!   trajectory integrator used as the numerical ground truth;
//! - [`stabilization`]: the control law, stability criterion, closed-form
//!   breakdown time, and executable control schedules with amplitude cap
//!   and cutoff;
//! - [`protocols`]: closed-form signal curves and optimal measurement
//!   times for Ramsey and stabilized protocols (Lambert-W timing optimum
//!   included);
//! - [`sensitivity`]: improvement ratios `R_v`/`R_s`, SNR and
//!   frequency-uncertainty accounting, initial-state optimization,
//!   parameter sweeps, and miscalibration robustness maps;
//! - [`shots`]: seeded Monte Carlo measurement shots and the chunked
//!   slope-ratio estimation pipeline.
//!
//! Everything is a pure function of its inputs over immutable values;
//! parallel callers need no synchronization. All quantities use whatever
//! consistent unit system the caller picks — dimensionless time with
//! `γ2 = 1` is the conventional choice, with unit conversions kept at the
//! application boundary.

pub mod bloch;
pub mod error;
pub mod lambert;
pub mod ode;
pub mod optim;
pub mod protocols;
pub mod schedule;
pub mod sensitivity;
pub mod shots;
pub mod stabilization;

pub use bloch::{
    bloch_derivative, constant_drive_rates, eta_from_temperature, evolve, free_decay,
    integrate_trajectory, steady_state, BlochState, DecoherenceParams, DriveRegime,
    ExperimentConfig,
};
pub use error::{Error, Result};
pub use protocols::{optimal_time, ramsey_optimum, OptimizeMode, ProtocolTiming, TimingBranch};
pub use schedule::ControlSchedule;
pub use sensitivity::{
    improvement_rs, improvement_rv, miscalibration_grid, optimize_initial_state, snr,
    sweep_improvement, ImprovementReport, MiscalGrid, MiscalibrationSpec, ShotPlan, SimGridOptions,
    SlopeFit, SweepGrid,
};
pub use shots::{
    chunked_ratio_estimate, run_detuning_sweep, sample_shots, ProtocolKind, RatioEstimate,
    ShotRecord, ShotSample, SweepConfig,
};
pub use stabilization::{
    breakdown_time, build_schedule, control_field, is_stable, stability_threshold,
    BreakdownResult, InitialState,
};
