//! Run configuration: JSON config files plus flag overrides, with strict
//! unit discipline.
//!
//! Every physical field name carries its unit (`*_t2` for quantities in
//! units of T2 or γ2, `*_us`/`*_hz` for SI). Dimensionless runs reject SI
//! fields and vice versa, so a config file can never silently mix unit
//! systems.

use serde::{Deserialize, Serialize};
use stabsense_core::{DecoherenceParams, OptimizeMode};

use crate::AppError;

pub const DEFAULT_H_MAX_T2: f64 = 50.0;
pub const DEFAULT_DELTA_T2: f64 = 0.01;
pub const DEFAULT_HORIZON_T2: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    Dimensionless,
    Si,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::Dimensionless
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PerShot,
    PerRootTime,
}

impl Default for Mode {
    fn default() -> Self {
        Self::PerShot
    }
}

impl From<Mode> for OptimizeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::PerShot => OptimizeMode::PerShot,
            Mode::PerRootTime => OptimizeMode::PerRootTime,
        }
    }
}

/// Decoherence / drive / detuning inputs in either unit system.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub unit_system: UnitSystem,
    /// Thermal asymmetry, defaulting to the zero-temperature value 1.
    pub eta: Option<f64>,
    // dimensionless fields (unit_system = "dimensionless")
    pub t1_over_t2: Option<f64>,
    pub delta_t2: Option<f64>,
    pub h_max_t2: Option<f64>,
    // SI fields (unit_system = "si")
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
    pub detuning_hz: Option<f64>,
    pub h_max_rad_per_us: Option<f64>,
}

/// Unit conversion data carried to the output layer.
#[derive(Debug, Clone, Copy)]
pub enum UnitScale {
    Dimensionless,
    /// T2 in microseconds; internal dimensionless times scale by this.
    Si { t2_us: f64 },
}

impl UnitScale {
    pub fn system(&self) -> UnitSystem {
        match self {
            UnitScale::Dimensionless => UnitSystem::Dimensionless,
            UnitScale::Si { .. } => UnitSystem::Si,
        }
    }

    pub fn time_col(&self) -> &'static str {
        match self {
            UnitScale::Dimensionless => "t_over_t2",
            UnitScale::Si { .. } => "t_us",
        }
    }

    pub fn drive_col(&self) -> &'static str {
        match self {
            UnitScale::Dimensionless => "h_y_t2",
            UnitScale::Si { .. } => "h_y_rad_per_us",
        }
    }

    /// Dimensionless time (units of T2) to output units.
    pub fn time_out(&self, tau: f64) -> f64 {
        match self {
            UnitScale::Dimensionless => tau,
            UnitScale::Si { t2_us } => tau * t2_us,
        }
    }

    /// Dimensionless drive (units of γ2) to output units.
    pub fn drive_out(&self, h: f64) -> f64 {
        match self {
            UnitScale::Dimensionless => h,
            UnitScale::Si { t2_us } => h / t2_us,
        }
    }
}

/// Fully validated parameters in the internal dimensionless convention
/// (γ2 = 1, times in units of T2).
#[derive(Debug, Clone)]
pub struct ResolvedParams {
    pub params: DecoherenceParams,
    pub delta_t2: f64,
    pub h_max_t2: f64,
    pub scale: UnitScale,
}

impl ParamsConfig {
    pub fn resolve(&self, default_delta_t2: f64) -> Result<ResolvedParams, AppError> {
        let eta = self.eta.unwrap_or(1.0);
        match self.unit_system {
            UnitSystem::Dimensionless => {
                for (name, set) in [
                    ("t1_us", self.t1_us.is_some()),
                    ("t2_us", self.t2_us.is_some()),
                    ("detuning_hz", self.detuning_hz.is_some()),
                    ("h_max_rad_per_us", self.h_max_rad_per_us.is_some()),
                ] {
                    if set {
                        return Err(AppError::config(format!(
                            "field `{name}` is an SI input; dimensionless runs take \
                             t1_over_t2 / delta_t2 / h_max_t2"
                        )));
                    }
                }
                let t1_over_t2 = self.t1_over_t2.unwrap_or(1.0);
                let params = DecoherenceParams::from_t1_over_t2(t1_over_t2)
                    .and_then(|p| p.with_eta(eta))
                    .map_err(|e| AppError::config(format!("params: {e}")))?;
                Ok(ResolvedParams {
                    params,
                    delta_t2: self.delta_t2.unwrap_or(default_delta_t2),
                    h_max_t2: self.h_max_t2.unwrap_or(DEFAULT_H_MAX_T2),
                    scale: UnitScale::Dimensionless,
                })
            }
            UnitSystem::Si => {
                for (name, set) in [
                    ("t1_over_t2", self.t1_over_t2.is_some()),
                    ("delta_t2", self.delta_t2.is_some()),
                    ("h_max_t2", self.h_max_t2.is_some()),
                ] {
                    if set {
                        return Err(AppError::config(format!(
                            "field `{name}` is a dimensionless input; SI runs take \
                             t1_us / t2_us / detuning_hz / h_max_rad_per_us"
                        )));
                    }
                }
                let t1_us = self
                    .t1_us
                    .ok_or_else(|| AppError::config("SI runs require field `t1_us`"))?;
                let t2_us = self
                    .t2_us
                    .ok_or_else(|| AppError::config("SI runs require field `t2_us`"))?;
                if !(t2_us > 0.0) {
                    return Err(AppError::config(format!("t2_us must be positive (got {t2_us})")));
                }
                let params = DecoherenceParams::from_t1_over_t2(t1_us / t2_us)
                    .and_then(|p| p.with_eta(eta))
                    .map_err(|e| AppError::config(format!("params: {e}")))?;
                // ordinary frequency in Hz -> angular detuning times T2
                let delta_t2 = self
                    .detuning_hz
                    .map(|f| std::f64::consts::TAU * f * t2_us * 1e-6)
                    .unwrap_or(default_delta_t2);
                let h_max_t2 = self
                    .h_max_rad_per_us
                    .map(|h| h * t2_us)
                    .unwrap_or(DEFAULT_H_MAX_T2);
                Ok(ResolvedParams {
                    params,
                    delta_t2,
                    h_max_t2,
                    scale: UnitScale::Si { t2_us },
                })
            }
        }
    }

    /// Header metadata rows echoing the resolved parameters.
    pub fn echo(&self, r: &ResolvedParams) -> Vec<(String, String)> {
        let mut rows = vec![
            (
                "unit_system".into(),
                match r.scale.system() {
                    UnitSystem::Dimensionless => "dimensionless".into(),
                    UnitSystem::Si => "si".into(),
                },
            ),
            ("t1_over_t2".into(), crate::io::fmt_float(r.params.t1_over_t2())),
            ("eta".into(), crate::io::fmt_float(r.params.eta())),
            ("delta_t2".into(), crate::io::fmt_float(r.delta_t2)),
            ("h_max_t2".into(), crate::io::fmt_float(r.h_max_t2)),
        ];
        if let UnitScale::Si { t2_us } = r.scale {
            rows.push(("t2_us".into(), crate::io::fmt_float(t2_us)));
        }
        rows
    }
}

/// A `{min, max, n}` axis description for sweep grids.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, AppError> {
        if self.n == 0 {
            return Err(AppError::config(format!("grid `{name}`: n must be >= 1")));
        }
        if self.n > 1 && !(self.max > self.min) {
            return Err(AppError::config(format!(
                "grid `{name}`: max ({}) must exceed min ({})",
                self.max, self.min
            )));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(AppError::config(format!("grid `{name}`: bounds must be finite")));
        }
        if self.n == 1 {
            return Ok(vec![self.min]);
        }
        Ok((0..self.n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64)
            .collect())
    }
}

/// Initial-state selector shared by the stabilized-protocol commands.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialStateConfig {
    pub v_x0: Option<f64>,
    pub theta_over_pi: Option<f64>,
}

impl InitialStateConfig {
    /// Resolve to `v_x0`; `None` when neither field is given.
    pub fn v_x0(&self) -> Result<Option<f64>, AppError> {
        match (self.v_x0, self.theta_over_pi) {
            (Some(_), Some(_)) => {
                Err(AppError::config("give either `v_x0` or `theta_over_pi`, not both"))
            }
            (Some(v), None) => Ok(Some(v)),
            (None, Some(tp)) => Ok(Some((tp * std::f64::consts::PI).sin())),
            (None, None) => Ok(None),
        }
    }
}
