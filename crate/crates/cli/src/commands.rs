//! The six subcommands: simulate, optimize, sweep, miscal, shots,
//! waveform.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use stabsense_core::sensitivity::UncertaintyNormalization;
use stabsense_core::*;

use crate::config::{
    GridSpec, InitialStateConfig, Mode, ParamsConfig, ResolvedParams, UnitScale, UnitSystem,
    DEFAULT_DELTA_T2, DEFAULT_HORIZON_T2,
};
use crate::io::{self, fmt_float, CsvTable};
use crate::AppError;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Load a JSON config file, or the type's defaults when no file is given.
pub fn load_config<T: for<'de> Deserialize<'de> + Default>(
    path: Option<&Path>,
) -> Result<T, AppError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| AppError::config(format!("reading {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| AppError::config(format!("{}: {e}", p.display())))
        }
    }
}

/// Final output path: explicit flag > config field > out_dir/default.
pub fn resolve_out(
    flag: Option<PathBuf>,
    cfg: Option<String>,
    out_dir: &Path,
    default_name: &str,
) -> PathBuf {
    flag.unwrap_or_else(|| {
        cfg.map(PathBuf::from).unwrap_or_else(|| out_dir.join(default_name))
    })
}

// ── simulate ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Ramsey,
    Stabilized,
}

impl Default for Protocol {
    fn default() -> Self {
        Self::Ramsey
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub params: ParamsConfig,
    pub protocol: Protocol,
    pub initial_state: InitialStateConfig,
    pub t_max_t2: Option<f64>,
    pub t_max_us: Option<f64>,
    pub n_points: Option<usize>,
    pub out: Option<String>,
}

/// Evolution span in units of T2, honoring the unit discipline.
fn resolve_t_max(
    t_max_t2: Option<f64>,
    t_max_us: Option<f64>,
    scale: &UnitScale,
    default_t2: f64,
) -> Result<f64, AppError> {
    match scale {
        UnitScale::Dimensionless => {
            if t_max_us.is_some() {
                return Err(AppError::config(
                    "field `t_max_us` is an SI input; dimensionless runs take t_max_t2",
                ));
            }
            Ok(t_max_t2.unwrap_or(default_t2))
        }
        UnitScale::Si { t2_us } => {
            if t_max_t2.is_some() {
                return Err(AppError::config(
                    "field `t_max_t2` is a dimensionless input; SI runs take t_max_us",
                ));
            }
            Ok(t_max_us.map(|t| t / t2_us).unwrap_or(default_t2))
        }
    }
}

pub fn cmd_simulate(cfg: &SimulateConfig, out: &Path) -> Result<String, AppError> {
    let r = cfg.params.resolve(DEFAULT_DELTA_T2)?;
    let t_max = resolve_t_max(cfg.t_max_t2, cfg.t_max_us, &r.scale, 5.0)?;
    if !(t_max > 0.0) {
        return Err(AppError::config(format!("t_max must be positive (got {t_max})")));
    }
    let n_points = cfg.n_points.unwrap_or(501);
    if n_points < 2 {
        return Err(AppError::config(format!("n_points must be >= 2 (got {n_points})")));
    }

    let (initial, schedule, v_x0) = match cfg.protocol {
        Protocol::Ramsey => {
            if cfg.initial_state.v_x0()?.is_some() {
                return Err(AppError::config(
                    "ramsey runs fix the initial state at v_x0 = 1; drop `initial_state`",
                ));
            }
            (BlochState::new(1.0, 0.0, 0.0), ControlSchedule::free(), 1.0)
        }
        Protocol::Stabilized => {
            let v_x0 = cfg.initial_state.v_x0()?.ok_or_else(|| {
                AppError::config("stabilized runs need `initial_state.v_x0` or `theta_over_pi`")
            })?;
            let init = InitialState::from_v_x0(v_x0)?;
            let schedule = build_schedule(&init, &r.params, r.h_max_t2)?;
            (init.bloch(), schedule, v_x0)
        }
    };

    let grid = linspace(0.0, t_max, n_points);
    let config = ExperimentConfig::new(r.delta_t2, initial, grid)?;
    let traj = integrate_trajectory(&config, &r.params, &schedule)?;

    let mut meta = io::tool_meta("simulate");
    meta.extend(cfg.params.echo(&r));
    meta.push((
        "protocol".into(),
        match cfg.protocol {
            Protocol::Ramsey => "ramsey".into(),
            Protocol::Stabilized => "stabilized".into(),
        },
    ));
    meta.push(("v_x0".into(), fmt_float(v_x0)));
    if let Some(c) = schedule.cutoff_time() {
        meta.push(("cutoff_time_over_t2".into(), fmt_float(c)));
        meta.push((
            format!("cutoff_{}", r.scale.time_col()),
            fmt_float(r.scale.time_out(c)),
        ));
    }

    let mut table = CsvTable::new(meta, &[r.scale.time_col(), "v_x", "v_y", "v_z", r.scale.drive_col()]);
    for (t, v) in &traj {
        table.push_row(vec![
            fmt_float(r.scale.time_out(*t)),
            fmt_float(v.v_x),
            fmt_float(v.v_y),
            fmt_float(v.v_z),
            fmt_float(r.scale.drive_out(schedule.h_y(*t))),
        ]);
    }
    table.write(out)?;
    Ok(format!("wrote {} ({} rows)", out.display(), traj.len()))
}

// ── optimize ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub params: ParamsConfig,
    pub mode: Mode,
    pub horizon_t2: Option<f64>,
    pub out: Option<String>,
}

pub fn cmd_optimize(cfg: &OptimizeConfig, out: &Path) -> Result<String, AppError> {
    let r = cfg.params.resolve(DEFAULT_DELTA_T2)?;
    let horizon = cfg.horizon_t2.unwrap_or(DEFAULT_HORIZON_T2);
    let report = optimize_initial_state(&r.params, cfg.mode.into())?;

    let mut value = json!({
        "tool": format!("stabsense {}", env!("CARGO_PKG_VERSION")),
        "command": "optimize",
        "unit_system": match r.scale.system() {
            UnitSystem::Dimensionless => "dimensionless",
            UnitSystem::Si => "si",
        },
        "params": {
            "t1_over_t2": report.t1_over_t2,
            "gamma_1_t2": r.params.gamma_1(),
            "gamma_phi_t2": r.params.gamma_phi(),
            "eta": report.eta,
            "h_max_t2": r.h_max_t2,
        },
        "mode": match cfg.mode { Mode::PerShot => "per_shot", Mode::PerRootTime => "per_root_time" },
        "ratio": report.ratio,
        "best_v_x0": report.best_v_x0,
        "best_theta_rad": report.best_theta,
        "best_theta_over_pi": report.best_theta / std::f64::consts::PI,
        "t_meas_over_t2": io::json_float(report.t_meas),
        "stable_horizon_t2": horizon,
    });
    if let UnitScale::Si { t2_us } = r.scale {
        value["t2_us"] = json!(t2_us);
        value["t_meas_us"] = io::json_float(report.t_meas * t2_us);
        value["stable_horizon_us"] = json!(horizon * t2_us);
    }
    io::write_json(out, &value)?;
    Ok(format!(
        "wrote {} (ratio = {:.4} at v_x0 = {:.4})",
        out.display(),
        report.ratio,
        report.best_v_x0
    ))
}

// ── sweep ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepCmdConfig {
    pub params: ParamsConfig,
    pub mode: Mode,
    pub t1_over_t2: GridSpec,
    pub v_x0: GridSpec,
    pub horizon_t2: Option<f64>,
    pub out: Option<String>,
}

impl Default for SweepCmdConfig {
    fn default() -> Self {
        Self {
            params: ParamsConfig::default(),
            mode: Mode::PerShot,
            t1_over_t2: GridSpec { min: 0.5, max: 8.0, n: 12 },
            v_x0: GridSpec { min: 0.05, max: 1.0, n: 20 },
            horizon_t2: None,
            out: None,
        }
    }
}

fn require_dimensionless(r: &ResolvedParams, command: &str) -> Result<(), AppError> {
    match r.scale {
        UnitScale::Dimensionless => Ok(()),
        UnitScale::Si { .. } => Err(AppError::config(format!(
            "`{command}` is a ratio study and runs in dimensionless units only"
        ))),
    }
}

pub fn cmd_sweep(cfg: &SweepCmdConfig, out: &Path) -> Result<String, AppError> {
    let r = cfg.params.resolve(DEFAULT_DELTA_T2)?;
    require_dimensionless(&r, "sweep")?;
    let opts = SimGridOptions {
        delta_t2: r.delta_t2,
        h_max_over_gamma2: r.h_max_t2,
        horizon_t2: cfg.horizon_t2.unwrap_or(DEFAULT_HORIZON_T2),
    };
    let rows = cfg.t1_over_t2.values("t1_over_t2")?;
    let cols = cfg.v_x0.values("v_x0")?;
    for &v in &cols {
        if !(0.0..=1.0).contains(&v) {
            return Err(AppError::config(format!("grid `v_x0`: {v} outside [0, 1]")));
        }
    }
    let grid = sweep_improvement(&rows, &cols, cfg.mode.into(), &opts)?;

    let mut meta = io::tool_meta("sweep");
    meta.extend(cfg.params.echo(&r));
    meta.push((
        "mode".into(),
        match cfg.mode { Mode::PerShot => "per_shot".into(), Mode::PerRootTime => "per_root_time".into() },
    ));
    meta.push(("horizon_t2".into(), fmt_float(opts.horizon_t2)));
    let mut table = CsvTable::new(meta, &["t1_over_t2", "v_x0", "ratio"]);
    for (i, &t1) in grid.t1_over_t2.iter().enumerate() {
        for (j, &v) in grid.v_x0.iter().enumerate() {
            table.push_row(vec![fmt_float(t1), fmt_float(v), fmt_float(grid.ratio[i][j])]);
        }
    }
    table.write(out)?;
    Ok(format!("wrote {} ({} cells)", out.display(), rows.len() * cols.len()))
}

// ── miscal ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiscalCmdConfig {
    pub params: ParamsConfig,
    pub mode: Mode,
    pub extent: f64,
    pub n: usize,
    pub horizon_t2: Option<f64>,
    pub out: Option<String>,
}

impl Default for MiscalCmdConfig {
    fn default() -> Self {
        Self {
            params: ParamsConfig::default(),
            mode: Mode::PerShot,
            extent: 0.3,
            n: 41,
            horizon_t2: None,
            out: None,
        }
    }
}

pub fn cmd_miscal(cfg: &MiscalCmdConfig, out: &Path) -> Result<String, AppError> {
    let r = cfg.params.resolve(DEFAULT_DELTA_T2)?;
    require_dimensionless(&r, "miscal")?;
    let opts = SimGridOptions {
        delta_t2: r.delta_t2,
        h_max_over_gamma2: r.h_max_t2,
        horizon_t2: cfg.horizon_t2.unwrap_or(DEFAULT_HORIZON_T2),
    };
    let spec = MiscalibrationSpec { extent: cfg.extent, n: cfg.n };
    let grid = miscalibration_grid(&r.params, &spec, cfg.mode.into(), &opts)?;

    let mut meta = io::tool_meta("miscal");
    meta.extend(cfg.params.echo(&r));
    meta.push((
        "mode".into(),
        match cfg.mode { Mode::PerShot => "per_shot".into(), Mode::PerRootTime => "per_root_time".into() },
    ));
    meta.push(("extent".into(), fmt_float(cfg.extent)));
    meta.push(("calibrated_ratio".into(), fmt_float(grid.calibrated_ratio)));
    // miscalibration of 1/T is (T_nominal/T_actual - 1) = gamma_act/gamma_nom - 1
    let mut table = CsvTable::new(meta, &["miscal_1_over_t1", "miscal_1_over_t2", "ratio"]);
    for (i, &m1) in grid.miscal_gamma_1.iter().enumerate() {
        for (j, &m2) in grid.miscal_gamma_2.iter().enumerate() {
            table.push_row(vec![fmt_float(m1), fmt_float(m2), fmt_float(grid.ratio[i][j])]);
        }
    }
    table.write(out)?;
    Ok(format!("wrote {} ({} cells)", out.display(), cfg.n * cfg.n))
}

// ── shots ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotsCmdConfig {
    pub params: ParamsConfig,
    pub mode: Mode,
    pub initial_state: InitialStateConfig,
    /// Detunings; dimensionless runs give `deltas_t2`, SI runs `deltas_hz`.
    pub deltas_t2: Option<Vec<f64>>,
    pub deltas_hz: Option<Vec<f64>>,
    pub shots_per_point: u64,
    pub iterations: usize,
    pub chunks: usize,
    pub contrast: f64,
    pub seed: u64,
    /// Optional per-iteration scale factor on both coherence times.
    pub t2_drift: Option<Vec<f64>>,
    pub horizon_t2: Option<f64>,
    pub out_records: Option<String>,
    pub out_summary: Option<String>,
}

impl Default for ShotsCmdConfig {
    fn default() -> Self {
        Self {
            params: ParamsConfig::default(),
            mode: Mode::PerShot,
            initial_state: InitialStateConfig::default(),
            deltas_t2: None,
            deltas_hz: None,
            shots_per_point: 100_000,
            iterations: 20,
            chunks: 10,
            contrast: 1.0,
            seed: 1,
            t2_drift: None,
            horizon_t2: None,
            out_records: None,
            out_summary: None,
        }
    }
}

pub fn cmd_shots(
    cfg: &ShotsCmdConfig,
    out_records: &Path,
    out_summary: &Path,
) -> Result<String, AppError> {
    let r = cfg.params.resolve(DEFAULT_DELTA_T2)?;
    let deltas: Vec<f64> = match r.scale {
        UnitScale::Dimensionless => {
            if cfg.deltas_hz.is_some() {
                return Err(AppError::config(
                    "field `deltas_hz` is an SI input; dimensionless runs take deltas_t2",
                ));
            }
            cfg.deltas_t2.clone().unwrap_or_else(|| vec![-0.02, -0.01, 0.0, 0.01, 0.02])
        }
        UnitScale::Si { t2_us } => {
            if cfg.deltas_t2.is_some() {
                return Err(AppError::config(
                    "field `deltas_t2` is a dimensionless input; SI runs take deltas_hz",
                ));
            }
            match &cfg.deltas_hz {
                Some(fs) => fs
                    .iter()
                    .map(|f| std::f64::consts::TAU * f * t2_us * 1e-6)
                    .collect(),
                None => vec![-0.02, -0.01, 0.0, 0.01, 0.02],
            }
        }
    };

    // initial state: explicit, or the optimum for this mode
    let v_x0 = match cfg.initial_state.v_x0()? {
        Some(v) => v,
        None => optimize_initial_state(&r.params, cfg.mode.into())?.best_v_x0,
    };
    let init = InitialState::from_v_x0(v_x0)?;
    let plan = ShotPlan::new(cfg.shots_per_point, 0.0, 0.0, cfg.contrast)
        .map_err(|e| AppError::config(e.to_string()))?;
    let mut sweep_cfg = SweepConfig::new(cfg.mode.into(), cfg.iterations, cfg.seed);
    sweep_cfg.h_max_over_gamma2 = r.h_max_t2;
    sweep_cfg.horizon_t2 = cfg.horizon_t2.unwrap_or(DEFAULT_HORIZON_T2);
    if let Some(drift) = &cfg.t2_drift {
        sweep_cfg.t2_scale = drift.clone();
    }

    let records = run_detuning_sweep(&init, &r.params, &deltas, &plan, &sweep_cfg)?;
    let estimate = chunked_ratio_estimate(&records, cfg.chunks, cfg.mode.into())?;
    let analytic = match cfg.mode {
        Mode::PerShot => improvement_rv(v_x0, &r.params)?,
        Mode::PerRootTime => improvement_rs(v_x0, &r.params)?,
    };

    // pooled zero-intercept slope per protocol, for the frequency figures
    let slope_of = |protocol: ProtocolKind| -> Result<f64, AppError> {
        let xs: Vec<f64> = records
            .iter()
            .filter(|rec| rec.protocol == protocol)
            .map(|rec| rec.delta_t2())
            .collect();
        let ys: Vec<f64> = records
            .iter()
            .filter(|rec| rec.protocol == protocol)
            .map(|rec| rec.sample.contrast_vy_estimate())
            .collect();
        Ok(SlopeFit::fit(&xs, &ys, false)?.slope)
    };
    let slope_stab = slope_of(ProtocolKind::Stabilized)?;
    let slope_ram = slope_of(ProtocolKind::Ramsey)?;

    let mut meta = io::tool_meta("shots");
    meta.extend(cfg.params.echo(&r));
    meta.push(("v_x0".into(), fmt_float(v_x0)));
    meta.push(("shots_per_point".into(), cfg.shots_per_point.to_string()));
    meta.push(("iterations".into(), cfg.iterations.to_string()));
    meta.push(("seed".into(), cfg.seed.to_string()));
    meta.push(("rng".into(), shots::RNG_ALGORITHM.into()));
    let delta_col = match r.scale {
        UnitScale::Dimensionless => "delta_t2_nominal",
        UnitScale::Si { .. } => "delta_hz",
    };
    let t2_col = match r.scale {
        UnitScale::Dimensionless => "t2_actual_over_t2",
        UnitScale::Si { .. } => "t2_actual_us",
    };
    let mut table = CsvTable::new(
        meta,
        &[
            "protocol",
            "iteration",
            delta_col,
            r.scale.time_col(),
            t2_col,
            "n_shots",
            "k_plus",
            "seed",
        ],
    );
    for rec in &records {
        let delta_out = match r.scale {
            UnitScale::Dimensionless => rec.delta,
            UnitScale::Si { t2_us } => rec.delta / (std::f64::consts::TAU * t2_us * 1e-6),
        };
        table.push_row(vec![
            match rec.protocol {
                ProtocolKind::Ramsey => "ramsey".into(),
                ProtocolKind::Stabilized => "stabilized".into(),
            },
            rec.iteration.to_string(),
            fmt_float(delta_out),
            fmt_float(r.scale.time_out(rec.t_meas)),
            fmt_float(r.scale.time_out(rec.t2_actual)),
            rec.sample.n_shots.to_string(),
            rec.sample.k_plus.to_string(),
            rec.sample.seed.to_string(),
        ]);
    }
    table.write(out_records)?;

    // sqrt(N) * delta(Delta) in units of gamma_2 = 1/T2 (the fit abscissa
    // is Delta*T2); SI conversion to ordinary frequency divides by 2 pi
    let uncertainty = |slope: f64| -> Result<serde_json::Value, AppError> {
        let fit = SlopeFit { slope, intercept: None, residual_rms: 0.0, n_points: records.len() };
        let u_t2 = sensitivity::frequency_uncertainty(
            &fit,
            &plan,
            UncertaintyNormalization::PerRootShots,
            1.0,
        )?;
        Ok(match r.scale {
            UnitScale::Dimensionless => json!({ "sqrt_shots_delta_uncertainty_t2": u_t2 }),
            UnitScale::Si { t2_us } => json!({
                "sqrt_shots_delta_uncertainty_t2": u_t2,
                "sqrt_shots_frequency_uncertainty_hz": u_t2 / (std::f64::consts::TAU * t2_us * 1e-6),
            }),
        })
    };

    let summary = json!({
        "tool": format!("stabsense {}", env!("CARGO_PKG_VERSION")),
        "command": "shots",
        "unit_system": match r.scale.system() {
            UnitSystem::Dimensionless => "dimensionless",
            UnitSystem::Si => "si",
        },
        "mode": match cfg.mode { Mode::PerShot => "per_shot", Mode::PerRootTime => "per_root_time" },
        "v_x0": v_x0,
        "t1_over_t2": r.params.t1_over_t2(),
        "eta": r.params.eta(),
        "shots_per_point": cfg.shots_per_point,
        "iterations": cfg.iterations,
        "n_chunks": estimate.n_chunks,
        "contrast": cfg.contrast,
        "master_seed": cfg.seed,
        "rng": shots::RNG_ALGORITHM,
        "ratio_mean": estimate.mean,
        "ratio_std_error": estimate.std_error,
        "analytic_ratio": analytic,
        "slope_stabilized_per_delta_t2": slope_stab,
        "slope_ramsey_per_delta_t2": slope_ram,
        "ramsey": uncertainty(slope_ram)?,
        "stabilized": uncertainty(slope_stab)?,
    });
    io::write_json(out_summary, &summary)?;
    Ok(format!(
        "wrote {} and {} (ratio = {:.4} +- {:.4}, analytic {:.4})",
        out_records.display(),
        out_summary.display(),
        estimate.mean,
        estimate.std_error,
        analytic
    ))
}

// ── waveform ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformConfig {
    pub params: ParamsConfig,
    pub initial_state: InitialStateConfig,
    pub t_max_t2: Option<f64>,
    pub t_max_us: Option<f64>,
    pub dt_t2: Option<f64>,
    pub dt_us: Option<f64>,
    pub out: Option<String>,
}

pub fn cmd_waveform(cfg: &WaveformConfig, out: &Path) -> Result<String, AppError> {
    let r = cfg.params.resolve(DEFAULT_DELTA_T2)?;
    let v_x0 = cfg.initial_state.v_x0()?.ok_or_else(|| {
        AppError::config("waveform needs `initial_state.v_x0` or `theta_over_pi`")
    })?;
    let t_max = resolve_t_max(cfg.t_max_t2, cfg.t_max_us, &r.scale, 10.0)?;
    let dt = match r.scale {
        UnitScale::Dimensionless => {
            if cfg.dt_us.is_some() {
                return Err(AppError::config(
                    "field `dt_us` is an SI input; dimensionless runs take dt_t2",
                ));
            }
            cfg.dt_t2.unwrap_or(0.01)
        }
        UnitScale::Si { t2_us } => {
            if cfg.dt_t2.is_some() {
                return Err(AppError::config(
                    "field `dt_t2` is a dimensionless input; SI runs take dt_us",
                ));
            }
            cfg.dt_us.map(|d| d / t2_us).unwrap_or(0.01)
        }
    };
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(AppError::config(format!(
            "sampling needs positive t_max and dt (got {t_max}, {dt})"
        )));
    }

    let init = InitialState::from_v_x0(v_x0)?;
    let schedule = build_schedule(&init, &r.params, r.h_max_t2)?;

    let mut meta = io::tool_meta("waveform");
    meta.extend(cfg.params.echo(&r));
    meta.push(("v_x0".into(), fmt_float(v_x0)));
    meta.push(("dt_over_t2".into(), fmt_float(dt)));
    match schedule.cutoff_time() {
        Some(c) => meta.push(("cutoff_time_over_t2".into(), fmt_float(c))),
        None => meta.push(("cutoff_time_over_t2".into(), "none".into())),
    }

    let n = (t_max / dt).round() as usize + 1;
    let mut table = CsvTable::new(meta, &[r.scale.time_col(), r.scale.drive_col()]);
    for i in 0..n {
        let t = i as f64 * dt;
        table.push_row(vec![
            fmt_float(r.scale.time_out(t)),
            fmt_float(r.scale.drive_out(schedule.h_y(t))),
        ]);
    }
    table.write(out)?;
    Ok(format!("wrote {} ({n} samples)", out.display()))
}
