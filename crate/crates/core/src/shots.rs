//! Monte Carlo measurement shots and the end-to-end slope-ratio
//! estimation pipeline.
//!
//! Measuring along y maps the Bloch component onto a |+i⟩ probability
//! `P = (1 + C v_y)/2`; a batch of N shots is a binomial draw. Detuning
//! sweeps interleave the stabilized and Ramsey protocols, and the ratio of
//! fitted slopes estimates the improvement ratio together with a
//! chunk-resampled standard error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::{evolve, BlochState, DecoherenceParams};
use crate::error::{Error, Result};
use crate::protocols::{optimal_time, OptimizeMode};
use crate::schedule::ControlSchedule;
use crate::sensitivity::{ShotPlan, SlopeFit};
use crate::stabilization::{build_schedule, InitialState, DEFAULT_H_MAX_OVER_GAMMA2};

/// Identifier of the random source, recorded in output metadata so runs
/// can be reproduced bit for bit.
pub const RNG_ALGORITHM: &str = "chacha8/splitmix64-cells/binomial-inversion-or-normal-cc";

/// Shot counts at or below this size are sampled by exact CDF inversion;
/// larger batches use the normal approximation with continuity correction
/// unless exact sampling is forced.
pub const EXACT_SAMPLING_MAX_N: u64 = 1000;

/// Which protocol produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Ramsey,
    Stabilized,
}

/// Outcome of one batch of measurement shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSample {
    pub n_shots: u64,
    /// Count of |+i⟩ outcomes, `0 <= k_plus <= n_shots`.
    pub k_plus: u64,
    /// Seed of the generator that produced this batch.
    pub seed: u64,
}

impl ShotSample {
    /// Unbiased estimator of `C v_y`: `2 k/N - 1`.
    pub fn contrast_vy_estimate(&self) -> f64 {
        2.0 * self.k_plus as f64 / self.n_shots as f64 - 1.0
    }
}

/// One labeled measurement batch within a detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub protocol: ProtocolKind,
    /// Sweep iteration this record belongs to.
    pub iteration: usize,
    /// Detuning (angular rate, lab units).
    pub delta: f64,
    /// Measurement time.
    pub t_meas: f64,
    /// T2 in effect during this iteration (drift-aware).
    pub t2_actual: f64,
    pub sample: ShotSample,
}

impl ShotRecord {
    /// Dimensionless fit abscissa `Δ·T2` of this record's iteration.
    pub fn delta_t2(&self) -> f64 {
        self.delta * self.t2_actual
    }
}

/// Draw the |+i⟩ count for a batch of shots: `k ~ Binomial(N, P)` with
/// `P = (1 + C v_y)/2`, deterministic in the seed.
pub fn sample_shots(v_y: f64, n_shots: u64, contrast: f64, seed: u64) -> Result<ShotSample> {
    sample_shots_with(v_y, n_shots, contrast, seed, false)
}

/// As [`sample_shots`], with `exact = true` forcing CDF-inversion sampling
/// at any batch size (slower, exactly binomial).
pub fn sample_shots_with(
    v_y: f64,
    n_shots: u64,
    contrast: f64,
    seed: u64,
    exact: bool,
) -> Result<ShotSample> {
    if v_y.abs() > 1.0 {
        return Err(Error::Domain(format!("|v_y| must be <= 1 (got {v_y})")));
    }
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(Error::Domain(format!("contrast must lie in (0, 1] (got {contrast})")));
    }
    if n_shots == 0 {
        return Err(Error::Domain("n_shots must be >= 1".into()));
    }
    let p = (1.0 + contrast * v_y) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_plus = draw_binomial(n_shots, p, &mut rng, exact);
    Ok(ShotSample { n_shots, k_plus, seed })
}

fn draw_binomial(n: u64, p: f64, rng: &mut ChaCha8Rng, exact: bool) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if exact || n <= EXACT_SAMPLING_MAX_N {
        // exact sampling decomposes large batches into chunks small enough
        // that (1-p)^n stays inside f64 range
        let mut total = 0;
        let mut remaining = n;
        while remaining > 0 {
            let chunk = remaining.min(EXACT_SAMPLING_MAX_N);
            total += binomial_inversion(chunk, p, rng);
            remaining -= chunk;
        }
        total
    } else {
        binomial_normal_approx(n, p, rng)
    }
}

/// CDF inversion: walk the pmf recurrence until the uniform draw is
/// covered. Mirrors p > 1/2 to keep the walk short and the pmf start
/// representable.
fn binomial_inversion(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if p > 0.5 {
        return n - binomial_inversion(n, 1.0 - p, rng);
    }
    let u: f64 = rng.random();
    let q = 1.0 - p;
    let ratio = p / q;
    let mut pmf = q.powi(n as i32);
    let mut cdf = pmf;
    let mut k = 0u64;
    while cdf < u && k < n {
        k += 1;
        pmf *= ratio * (n - k + 1) as f64 / k as f64;
        cdf += pmf;
    }
    k
}

/// Normal approximation with continuity correction, adequate for the
/// N ≥ 10³ batches used in sweeps (relative moment errors ≪ the
/// statistical tolerances tested).
fn binomial_normal_approx(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let z = standard_normal(rng);
    let k = (mean + sd * z + 0.5).floor();
    k.clamp(0.0, n as f64) as u64
}

/// Box-Muller transform on the ChaCha stream.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// SplitMix64 output mixer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent per-cell seed derived from the master seed and the cell
/// index, so results do not depend on evaluation order.
fn cell_seed(master: u64, iteration: usize, delta_index: usize, protocol: ProtocolKind) -> u64 {
    let tag = match protocol {
        ProtocolKind::Ramsey => 1u64,
        ProtocolKind::Stabilized => 2u64,
    };
    let mut z = mix64(master.wrapping_add(0x9E3779B97F4A7C15));
    z = mix64(z ^ (iteration as u64).wrapping_add(1));
    z = mix64(z ^ (delta_index as u64).wrapping_add(1));
    mix64(z ^ tag)
}

/// Configuration of a simulated detuning sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Figure of merit deciding the measurement times.
    pub mode: OptimizeMode,
    /// Sweep iterations (each visits every detuning once per protocol).
    pub iterations: usize,
    /// Per-iteration scale factor applied to both T1 and T2, emulating
    /// slow drift of the coherence times. Measurement times follow the
    /// drift (they are chosen in units of the iteration's T2). Empty for
    /// no drift.
    pub t2_scale: Vec<f64>,
    /// Amplitude cap in units of γ2.
    pub h_max_over_gamma2: f64,
    /// Horizon replacing infinite per-shot optima, in units of T2.
    pub horizon_t2: f64,
    /// Master seed; per-record seeds derive from it and the cell index.
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(mode: OptimizeMode, iterations: usize, seed: u64) -> Self {
        Self {
            mode,
            iterations,
            t2_scale: Vec::new(),
            h_max_over_gamma2: DEFAULT_H_MAX_OVER_GAMMA2,
            horizon_t2: crate::protocols::DEFAULT_STABLE_HORIZON_T2,
            seed,
        }
    }
}

/// Simulate interleaved stabilized/Ramsey measurements across a detuning
/// sweep.
///
/// For each iteration and detuning, both protocols are simulated with the
/// full Bloch dynamics at their closed-form optimal measurement times and
/// sampled with `plan.n_shots` shots. Records are emitted in a fixed
/// deterministic order (iteration → detuning → Ramsey, stabilized), and
/// every record's seed derives from the master seed and its cell index, so
/// the output is independent of evaluation order.
pub fn run_detuning_sweep(
    init: &InitialState,
    params: &DecoherenceParams,
    deltas: &[f64],
    plan: &ShotPlan,
    config: &SweepConfig,
) -> Result<Vec<ShotRecord>> {
    if deltas.is_empty() {
        return Err(Error::Domain("need at least one detuning".into()));
    }
    if config.iterations == 0 {
        return Err(Error::Domain("need at least one iteration".into()));
    }
    if !config.t2_scale.is_empty() && config.t2_scale.len() != config.iterations {
        return Err(Error::Domain(format!(
            "t2_scale has {} entries for {} iterations",
            config.t2_scale.len(),
            config.iterations
        )));
    }
    let max_delta_t2 = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs())) * params.t2();
    if max_delta_t2 > 0.05 {
        return Err(Error::Domain(format!(
            "detunings exceed the small-detuning validity window (max |Δ| T2 = {max_delta_t2})"
        )));
    }

    let mut records = Vec::with_capacity(config.iterations * deltas.len() * 2);
    // cache of delta index -> simulated (ramsey, stabilized) v_y; the
    // dynamics are deterministic, so cells repeat until the drift scale
    // changes
    let mut cache: Vec<Option<(f64, f64)>> = vec![None; deltas.len()];
    let mut scale_of_cache = f64::NAN;

    for iter_idx in 0..config.iterations {
        let scale = config.t2_scale.get(iter_idx).copied().unwrap_or(1.0);
        if !(scale > 0.0) {
            return Err(Error::Domain(format!("t2 scale must be positive (got {scale})")));
        }
        if scale != scale_of_cache {
            cache.fill(None);
            scale_of_cache = scale;
        }
        // both coherence times scale together; the ratio is preserved
        let actual = DecoherenceParams::from_rates(
            params.gamma_1() / scale,
            params.gamma_2() / scale,
            params.eta(),
        )?;
        let schedule = build_schedule(init, &actual, config.h_max_over_gamma2 * actual.gamma_2())?;
        let timing = optimal_time(init.v_x0(), &actual, config.mode)?;
        let t_prot = timing.resolve(config.horizon_t2 * actual.t2());
        let t_ram = match config.mode {
            OptimizeMode::PerShot => actual.t2(),
            OptimizeMode::PerRootTime => actual.t2() / 2.0,
        };

        for (d_idx, &delta) in deltas.iter().enumerate() {
            let (vy_ram, vy_prot) = match cache[d_idx] {
                Some(pair) => pair,
                None => {
                    let vr = evolve(
                        BlochState::new(1.0, 0.0, 0.0),
                        &actual,
                        &ControlSchedule::free(),
                        delta,
                        t_ram,
                    )?
                    .v_y;
                    let vp = evolve(init.bloch(), &actual, &schedule, delta, t_prot)?.v_y;
                    cache[d_idx] = Some((vr, vp));
                    (vr, vp)
                }
            };
            for (protocol, v_y, t_meas) in [
                (ProtocolKind::Ramsey, vy_ram, t_ram),
                (ProtocolKind::Stabilized, vy_prot, t_prot),
            ] {
                let seed = cell_seed(config.seed, iter_idx, d_idx, protocol);
                let sample = sample_shots(v_y, plan.n_shots, plan.contrast, seed)?;
                records.push(ShotRecord {
                    protocol,
                    iteration: iter_idx,
                    delta,
                    t_meas,
                    t2_actual: actual.t2(),
                    sample,
                });
            }
        }
    }
    Ok(records)
}

/// Ratio estimate with a chunked standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_chunks: usize,
}

/// Estimate the improvement ratio from sweep records, chunk by chunk.
///
/// Iterations are partitioned into `n_chunks` interspersed chunks
/// (iteration i joins chunk i mod n). Within a chunk, each protocol's
/// shot estimates are fitted (zero intercept) against the iteration's
/// rescaled `Δ·T2` axis; in per-root-time mode each slope is divided by
/// `√(t/T2)` of its own iteration before the ratio. The mean of the
/// per-chunk ratios and `std/√n_chunks` are returned.
pub fn chunked_ratio_estimate(
    records: &[ShotRecord],
    n_chunks: usize,
    mode: OptimizeMode,
) -> Result<RatioEstimate> {
    if n_chunks == 0 {
        return Err(Error::Domain("need at least one chunk".into()));
    }
    let n_iterations = records.iter().map(|r| r.iteration + 1).max().unwrap_or(0);
    if n_iterations < 2 * n_chunks {
        return Err(Error::Fit(format!(
            "need at least {} iterations for {} chunks (got {n_iterations})",
            2 * n_chunks,
            n_chunks
        )));
    }

    let mut ratios = Vec::with_capacity(n_chunks);
    for chunk in 0..n_chunks {
        let slope_of = |protocol: ProtocolKind| -> Result<f64> {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in records {
                if r.protocol != protocol || r.iteration % n_chunks != chunk {
                    continue;
                }
                let weight = match mode {
                    OptimizeMode::PerShot => 1.0,
                    // normalize each point by sqrt(t/T2) of its iteration
                    OptimizeMode::PerRootTime => (r.t_meas / r.t2_actual).sqrt(),
                };
                xs.push(r.delta_t2());
                ys.push(r.sample.contrast_vy_estimate() / weight);
            }
            let distinct = {
                let mut s = xs.clone();
                s.sort_by(f64::total_cmp);
                s.dedup();
                s.len()
            };
            if distinct < 3 {
                return Err(Error::Fit(format!(
                    "chunk {chunk}: need >= 3 distinct detunings (got {distinct})"
                )));
            }
            Ok(SlopeFit::fit(&xs, &ys, false)?.slope)
        };
        let a_stab = slope_of(ProtocolKind::Stabilized)?;
        let a_ram = slope_of(ProtocolKind::Ramsey)?;
        if a_ram == 0.0 {
            return Err(Error::Fit(format!("chunk {chunk}: Ramsey slope is zero")));
        }
        ratios.push(a_stab / a_ram);
    }

    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok(RatioEstimate { mean, std_error: (var / n).sqrt(), n_chunks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shots_deterministic_in_seed() {
        let a = sample_shots(0.02, 100_000, 1.0, 42).unwrap();
        let b = sample_shots(0.02, 100_000, 1.0, 42).unwrap();
        let c = sample_shots(0.02, 100_000, 1.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.k_plus, c.k_plus);
    }

    #[test]
    fn deterministic_outcomes_at_the_poles() {
        let s = sample_shots(1.0, 5000, 1.0, 7).unwrap();
        assert_eq!(s.k_plus, 5000);
        let s = sample_shots(-1.0, 5000, 1.0, 7).unwrap();
        assert_eq!(s.k_plus, 0);
    }

    #[test]
    fn estimator_unbiased_at_zero_signal() {
        // 5 sigma bound: |v_hat| < 5 * 2 sqrt(P(1-P)/N) = 5e-3 at N = 1e6
        let s = sample_shots(0.0, 1_000_000, 1.0, 11).unwrap();
        assert!(s.contrast_vy_estimate().abs() < 5e-3);
    }

    #[test]
    fn exact_and_approximate_sampling_agree_in_moments() {
        let n = 40_000u64;
        let p_target = 0.5f64;
        let reps = 400;
        let sd_expected = 2.0 * (p_target * (1.0 - p_target) / n as f64).sqrt();
        for exact in [false, true] {
            let mut est = Vec::with_capacity(reps);
            for i in 0..reps {
                let s = sample_shots_with(0.0, n, 1.0, 1000 + i as u64, exact).unwrap();
                est.push(s.contrast_vy_estimate());
            }
            let mean = est.iter().sum::<f64>() / reps as f64;
            let sd = (est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                / (reps - 1) as f64)
                .sqrt();
            assert!(mean.abs() < 4.0 * sd_expected / (reps as f64).sqrt() + 1e-6);
            assert!(
                (sd - sd_expected).abs() / sd_expected < 0.15,
                "exact={exact}: sd {sd} vs expected {sd_expected}"
            );
        }
    }

    #[test]
    fn inversion_matches_binomial_variance_small_n() {
        // empirical std of v_hat over seeded repeats at P = 1/2, N = 1e4,
        // sampled exactly, must match 2 sqrt(P(1-P)/N) = 0.01 within 10%
        let reps = 1000;
        let mut est = Vec::with_capacity(reps);
        for i in 0..reps {
            let s = sample_shots_with(0.0, 10_000, 1.0, i as u64, true).unwrap();
            est.push(s.contrast_vy_estimate());
        }
        let mean = est.iter().sum::<f64>() / reps as f64;
        let sd = (est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (reps - 1) as f64)
            .sqrt();
        assert!((sd - 0.01).abs() / 0.01 < 0.10, "sd = {sd}");
    }

    #[test]
    fn cell_seeds_do_not_collide_across_axes() {
        let mut seen = std::collections::HashSet::new();
        for it in 0..50 {
            for d in 0..7 {
                for p in [ProtocolKind::Ramsey, ProtocolKind::Stabilized] {
                    assert!(seen.insert(cell_seed(99, it, d, p)), "collision at {it},{d},{p:?}");
                }
            }
        }
    }

    #[test]
    fn sweep_rejects_out_of_window_detunings() {
        let params = DecoherenceParams::from_t1_over_t2(1.0).unwrap();
        let init = InitialState::from_v_x0(0.6).unwrap();
        let plan = ShotPlan::new(100, 1.0, 0.0, 1.0).unwrap();
        let cfg = SweepConfig::new(OptimizeMode::PerShot, 2, 1);
        let err = run_detuning_sweep(&init, &params, &[0.2], &plan, &cfg);
        assert!(err.is_err());
    }

    #[test]
    fn chunked_estimate_zero_error_on_identical_chunks() {
        // synthetic records: exact linear signal, same in every iteration
        let deltas = [-0.02, -0.01, 0.01, 0.02];
        let mut records = Vec::new();
        for iteration in 0..8 {
            for &delta in &deltas {
                for (protocol, slope) in
                    [(ProtocolKind::Ramsey, 0.3), (ProtocolKind::Stabilized, 0.45)]
                {
                    let v_y = slope * delta;
                    let n = 1_000_000u64;
                    let k = ((1.0 + v_y) / 2.0 * n as f64).round() as u64;
                    records.push(ShotRecord {
                        protocol,
                        iteration,
                        delta,
                        t_meas: 1.0,
                        t2_actual: 1.0,
                        sample: ShotSample { n_shots: n, k_plus: k, seed: 0 },
                    });
                }
            }
        }
        let est = chunked_ratio_estimate(&records, 4, OptimizeMode::PerShot).unwrap();
        assert!((est.mean - 1.5).abs() < 1e-4, "mean = {}", est.mean);
        assert!(est.std_error < 1e-6);
        // too few iterations for the chunk count
        assert!(chunked_ratio_estimate(&records, 5, OptimizeMode::PerShot).is_err());
    }
}
