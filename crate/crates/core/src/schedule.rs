//! Time-dependent control schedules `h_y(t)`.
//!
//! A schedule is an immutable, thread-safe description of the drive
//! amplitude over time, with two pieces of shared semantics: the amplitude
//! is clamped to `±h_max`, and once a cutoff time is set the drive is
//! identically zero for `t >= cutoff_time`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ode::DenseTrajectory;

#[derive(Clone)]
enum Waveform {
    Zero,
    Constant(f64),
    /// Control-law amplitude evaluated along a precomputed zero-detuning
    /// reference trajectory: `h_y(t) = γ2 v_x(0) / (2 v_z_ref(t))`.
    /// Beyond the co-integration horizon the drive holds the steady-state
    /// asymptote.
    Tracking {
        reference: Arc<DenseTrajectory>,
        v_x0: f64,
        gamma_2: f64,
        asymptote: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Waveform::Zero => write!(f, "Zero"),
            Waveform::Constant(h) => write!(f, "Constant({h})"),
            Waveform::Tracking { v_x0, gamma_2, .. } => {
                write!(f, "Tracking {{ v_x0: {v_x0}, gamma_2: {gamma_2}, .. }}")
            }
            Waveform::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Drive amplitude as a function of time, with cap and cutoff semantics.
#[derive(Debug, Clone)]
pub struct ControlSchedule {
    waveform: Waveform,
    h_max: f64,
    cutoff_time: Option<f64>,
}

impl ControlSchedule {
    /// No drive at all (free evolution / Ramsey).
    pub fn free() -> Self {
        Self { waveform: Waveform::Zero, h_max: 0.0, cutoff_time: None }
    }

    /// Constant drive, clamped to the cap.
    pub fn constant(h_y: f64, h_max: f64) -> Result<Self> {
        if !(h_max >= 0.0) {
            return Err(Error::Domain(format!("h_max must be >= 0 (got {h_max})")));
        }
        Ok(Self { waveform: Waveform::Constant(h_y), h_max, cutoff_time: None })
    }

    /// Arbitrary waveform, clamped to the cap. `h_max` may be infinite for
    /// deliberately uncapped controls.
    pub fn from_fn<F>(f: F, h_max: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(h_max >= 0.0) {
            return Err(Error::Domain(format!("h_max must be >= 0 (got {h_max})")));
        }
        Ok(Self { waveform: Waveform::Custom(Arc::new(f)), h_max, cutoff_time: None })
    }

    pub(crate) fn tracking(
        reference: Arc<DenseTrajectory>,
        v_x0: f64,
        gamma_2: f64,
        asymptote: f64,
        h_max: f64,
        cutoff_time: Option<f64>,
    ) -> Self {
        Self {
            waveform: Waveform::Tracking { reference, v_x0, gamma_2, asymptote },
            h_max,
            cutoff_time,
        }
    }

    /// Copy of this schedule with a cutoff applied.
    pub fn with_cutoff(mut self, cutoff_time: f64) -> Self {
        self.cutoff_time = Some(cutoff_time);
        self
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn cutoff_time(&self) -> Option<f64> {
        self.cutoff_time
    }

    /// Drive amplitude at time `t` (zero from the cutoff onward).
    pub fn h_y(&self, t: f64) -> f64 {
        if let Some(c) = self.cutoff_time {
            if t >= c {
                return 0.0;
            }
        }
        self.raw(t)
    }

    /// Drive amplitude ignoring the cutoff, for integrating the piece of a
    /// trajectory that ends exactly at the cutoff: Runge-Kutta stages that
    /// land on the cutoff time itself must see the left-limit value, not
    /// the zeroed post-cutoff drive.
    pub(crate) fn h_y_pre_cutoff(&self, t: f64) -> f64 {
        match self.cutoff_time {
            Some(c) => self.raw(t.min(c)),
            None => self.raw(t),
        }
    }

    fn raw(&self, t: f64) -> f64 {
        let h = match &self.waveform {
            Waveform::Zero => 0.0,
            Waveform::Constant(h) => *h,
            Waveform::Tracking { reference, v_x0, gamma_2, asymptote } => {
                if t > reference.t_end() {
                    *asymptote
                } else {
                    let v_z = reference.sample(t)[2];
                    if v_z == 0.0 {
                        return self.h_max; // clamp at the singularity
                    }
                    gamma_2 * v_x0 / (2.0 * v_z)
                }
            }
            Waveform::Custom(f) => f(t),
        };
        h.clamp(-self.h_max, self.h_max)
    }
}
