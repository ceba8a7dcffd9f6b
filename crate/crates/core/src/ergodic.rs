//! Growth-rate estimators and the time-based decision criterion.
//!
//! The time average partitions one long utility path into `M` blocks of
//! length `δt`; the ensemble average pools `N` independent increments over
//! the same span. For a utility that turns the dynamic into Brownian motion
//! the two agree.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::{ItoProcess, UtilityFunction};
use crate::numeric::stats::{wilson_interval, Moments};
use crate::sde::{derive_seed, simulate, transform_path, Recording, SamplePath, SimConfig};

pub const MIN_BLOCKS: usize = 10;
/// Standard errors allowed between two rates before they count as different.
pub const COMPATIBILITY_SIGMAS: f64 = 3.0;
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Two-sided 95% normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;
const FAMILY_TOL: f64 = 1e-6;
const FAMILY_GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TimeAverage,
    EnsembleAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthEstimate {
    pub rate: f64,
    pub std_error: f64,
    pub method: Method,
    pub delta_t: f64,
    pub n: usize,
}

impl GrowthEstimate {
    /// Standard error of the difference of two independent estimates.
    pub fn combined_se(&self, other: &GrowthEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

fn same_span(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// `r̄ ≈ (1/M) Σ δu_m / δt` over non-overlapping blocks of length `block_dt`.
pub fn time_average_rate(path: &SamplePath, block_dt: f64) -> Result<GrowthEstimate> {
    if !(block_dt >= path.dt * (1.0 - 1e-9)) || !block_dt.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "block length {block_dt} is shorter than the path step {}",
            path.dt
        )));
    }
    let k = (block_dt / path.dt).round() as usize;
    if !same_span(k as f64 * path.dt, block_dt) {
        return Err(Error::InvalidConfig(format!(
            "block length {block_dt} is not a whole number of path steps {}",
            path.dt
        )));
    }
    let blocks = (path.len() - 1) / k;
    if blocks < MIN_BLOCKS {
        return Err(Error::TooFewBlocks {
            blocks,
            required: MIN_BLOCKS,
        });
    }
    let v = &path.values;
    let m: Moments = (0..blocks).map(|i| (v[(i + 1) * k] - v[i * k]) / block_dt).collect();
    // telescoped mean is free of the rounding in the running sum
    let rate = (v[blocks * k] - v[0]) / (blocks as f64 * block_dt);
    Ok(GrowthEstimate {
        rate,
        std_error: m.std_dev() / (blocks as f64).sqrt(),
        method: Method::TimeAverage,
        delta_t: block_dt,
        n: blocks,
    })
}

/// `⟨r⟩ ≈ (1/N) Σ Δu_n / Δt`.
pub fn ensemble_average_rate(increments: &[f64], delta_t: f64) -> Result<GrowthEstimate> {
    if increments.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 increments, got {}",
            increments.len()
        )));
    }
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(Error::InvalidConfig(format!("delta_t must be positive, got {delta_t}")));
    }
    let m: Moments = increments.iter().copied().collect();
    let n = increments.len();
    Ok(GrowthEstimate {
        rate: m.mean() / delta_t,
        std_error: m.std_dev() / ((n as f64).sqrt() * delta_t),
        method: Method::EnsembleAverage,
        delta_t,
        n,
    })
}

/// First-to-last increments of `paths` and their common span.
pub fn collect_increments(paths: &[SamplePath]) -> Result<(Vec<f64>, f64)> {
    let Some(first) = paths.first() else {
        return Err(Error::InvalidConfig("no paths".into()));
    };
    let span = first.duration();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        if !same_span(p.duration(), span) {
            return Err(Error::MismatchedDeltaT);
        }
        out.push(p.terminal() - p.values[0]);
    }
    Ok((out, span))
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub time_rate: GrowthEstimate,
    pub ensemble_rate: GrowthEstimate,
    pub difference: f64,
    pub combined_se: f64,
    pub compatible: bool,
    pub time_seed: u64,
    pub ensemble_seed: u64,
    /// Ensemble paths that aborted and were left out.
    pub failed_paths: usize,
}

/// Compare the time average of `u(x)` along one path of length
/// `cfg.horizon` with the ensemble average over `cfg.n_paths` increments of
/// length `delta_t`. The two simulations use independent seeds derived from
/// `cfg.seed`.
pub fn ergodicity_check(
    p: &ItoProcess,
    u: &UtilityFunction,
    cfg: &SimConfig,
    delta_t: f64,
) -> Result<ErgodicityReport> {
    let time_seed = derive_seed(cfg.seed, 1);
    let ensemble_seed = derive_seed(cfg.seed, 2);
    let long = SimConfig {
        n_paths: 1,
        seed: time_seed,
        recording: Recording::Every(1),
        ..*cfg
    };
    let path = simulate(p, &long)?.into_single()?;
    let time_rate = time_average_rate(&transform_path(&path, u)?, delta_t)?;
    let short = SimConfig {
        horizon: delta_t,
        seed: ensemble_seed,
        recording: Recording::Terminal,
        ..*cfg
    };
    let ensemble = simulate(p, &short)?;
    let u_paths = ensemble
        .paths
        .iter()
        .map(|q| transform_path(q, u))
        .collect::<Result<Vec<_>>>()?;
    let (increments, span) = collect_increments(&u_paths)?;
    let ensemble_rate = ensemble_average_rate(&increments, span)?;
    let difference = time_rate.rate - ensemble_rate.rate;
    let combined_se = time_rate.combined_se(&ensemble_rate);
    Ok(ErgodicityReport {
        time_rate,
        ensemble_rate,
        difference,
        combined_se,
        compatible: difference.abs() <= COMPATIBILITY_SIGMAS * combined_se,
        time_seed,
        ensemble_seed,
        failed_paths: ensemble.failures.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Separate noise per process.
    #[default]
    Independent,
    /// Both processes driven by the same normals (variance reduction).
    Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecideMode {
    /// Require both processes to make `u` a Brownian motion with drift.
    #[default]
    Checked,
    /// Skip the family check.
    PureSimulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecideConfig {
    /// `dt`, `n_paths` (pairs), `seed`, boundary policy; `horizon` caps the
    /// Δt ladder.
    pub sim: SimConfig,
    pub epsilon: f64,
    /// Length of the single path behind each time-average rate.
    pub rate_horizon: f64,
    pub block_dt: f64,
    pub noise: NoiseMode,
    pub mode: DecideMode,
}

impl DecideConfig {
    pub fn new(sim: SimConfig) -> Self {
        Self {
            sim,
            epsilon: DEFAULT_EPSILON,
            rate_horizon: 1000.0,
            block_dt: 1.0,
            noise: NoiseMode::Independent,
            mode: DecideMode::Checked,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rung {
    pub delta_t: f64,
    pub p_dominance: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub pairs: usize,
}

/// Drift and volatility that a process induces on `u`, if constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpliedBrownian {
    pub a_u: f64,
    pub b_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecisionResult {
    /// `None` when the rates cannot be told apart at this horizon.
    pub chosen: Option<Choice>,
    /// Estimated `P(Δx > Δx*)`.
    pub p_dominance: f64,
    pub delta_t_used: f64,
    pub epsilon: f64,
    /// `r̄ − r̄*` from the `u`-transformed time averages.
    pub rate_gap: f64,
    pub rate_gap_se: f64,
    /// Whether some rung's Wilson interval cleared `1 − ε` for the chosen process.
    pub converged: bool,
    pub rate: GrowthEstimate,
    pub rate_star: GrowthEstimate,
    pub ladder: Vec<Rung>,
    pub implied: Option<(ImpliedBrownian, ImpliedBrownian)>,
    pub seeds: DecisionSeeds,
    pub failed_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionSeeds {
    pub rate: u64,
    pub rate_star: u64,
    pub ladder: u64,
    pub ladder_star: u64,
}

/// The constant `(a_u, b_u)` with `u(x(t))` Brownian, or an error naming
/// where the coefficients vary.
pub fn implied_brownian(p: &ItoProcess, u: &UtilityFunction) -> Result<ImpliedBrownian> {
    let lo = p.domain().lo.max(u.domain().lo);
    let hi = p.domain().hi.min(u.domain().hi);
    let common = crate::functions::Interval::new(lo, hi)
        .map_err(|_| Error::NotInFamily(format!("`{}` and `{}` share no domain", p.label(), u.label())))?;
    let mut a = Vec::with_capacity(FAMILY_GRID);
    let mut b = Vec::with_capacity(FAMILY_GRID);
    for x in common.sample_grid(FAMILY_GRID) {
        let (up, upp) = (u.prime(x)?, u.double_prime(x)?);
        let bx = p.diffusion(x)?;
        a.push(p.drift(x)? * up + 0.5 * bx * bx * upp);
        b.push(bx * up);
    }
    let spread = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let dev = v.iter().map(|x| (x - m).abs()).fold(0.0, f64::max);
        (m, dev <= FAMILY_TOL * (1.0 + m.abs()))
    };
    let (a_u, a_ok) = spread(&a);
    let (b_u, b_ok) = spread(&b);
    if !(a_ok && b_ok) {
        return Err(Error::NotInFamily(format!(
            "`{}` does not make `{}` a Brownian motion with constant drift and volatility",
            p.label(),
            u.label()
        )));
    }
    Ok(ImpliedBrownian { a_u, b_u })
}

fn rate_of(p: &ItoProcess, u: &UtilityFunction, cfg: &DecideConfig, seed: u64) -> Result<GrowthEstimate> {
    let long = SimConfig {
        horizon: cfg.rate_horizon,
        n_paths: 1,
        seed,
        recording: Recording::Every(1),
        ..cfg.sim
    };
    let path = simulate(p, &long)?.into_single()?;
    time_average_rate(&transform_path(&path, u)?, cfg.block_dt)
}

/// Rungs `1, 2, 4, …` not exceeding `horizon`.
pub fn ladder(horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut dt = 1.0;
    while dt <= horizon * (1.0 + 1e-12) {
        out.push(dt);
        dt *= 2.0;
    }
    out
}

/// Decide between `p` and `p_star` by their `u`-transformed time-average
/// growth rates, and estimate `P(Δx > Δx*)` over a ladder of Δt.
pub fn decide(p: &ItoProcess, p_star: &ItoProcess, u: &UtilityFunction, cfg: &DecideConfig) -> Result<DecisionResult> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    if cfg.sim.horizon < 1.0 {
        return Err(Error::InvalidConfig(
            "the Δt ladder needs a horizon of at least 1".into(),
        ));
    }
    let steps_per_unit = (1.0 / cfg.sim.dt).round();
    if !same_span(steps_per_unit * cfg.sim.dt, 1.0) {
        return Err(Error::InvalidConfig(format!(
            "dt = {} does not divide the unit time",
            cfg.sim.dt
        )));
    }
    let rungs = ladder(cfg.sim.horizon);
    let horizon = *rungs.last().expect("non-empty ladder");
    cfg.sim.with_horizon(horizon).validate()?;
    let implied = match cfg.mode {
        DecideMode::Checked => Some((implied_brownian(p, u)?, implied_brownian(p_star, u)?)),
        DecideMode::PureSimulation => None,
    };
    let seeds = match cfg.noise {
        NoiseMode::Independent => DecisionSeeds {
            rate: derive_seed(cfg.sim.seed, 11),
            rate_star: derive_seed(cfg.sim.seed, 12),
            ladder: derive_seed(cfg.sim.seed, 21),
            ladder_star: derive_seed(cfg.sim.seed, 22),
        },
        NoiseMode::Common => DecisionSeeds {
            rate: derive_seed(cfg.sim.seed, 11),
            rate_star: derive_seed(cfg.sim.seed, 11),
            ladder: derive_seed(cfg.sim.seed, 21),
            ladder_star: derive_seed(cfg.sim.seed, 21),
        },
    };
    let rate = rate_of(p, u, cfg, seeds.rate)?;
    let rate_star = rate_of(p_star, u, cfg, seeds.rate_star)?;
    let rate_gap = rate.rate - rate_star.rate;
    let rate_gap_se = rate.combined_se(&rate_star);
    let chosen = if rate_gap.abs() < COMPATIBILITY_SIGMAS * rate_gap_se || rate_gap == 0.0 {
        None
    } else if rate_gap > 0.0 {
        Some(Choice::First)
    } else {
        Some(Choice::Second)
    };

    let sim = SimConfig {
        horizon,
        recording: Recording::Every(steps_per_unit as usize),
        ..cfg.sim
    };
    let ens = simulate(p, &sim.with_seed(seeds.ladder))?;
    let ens_star = simulate(p_star, &sim.with_seed(seeds.ladder_star))?;
    let lookup_star: std::collections::HashMap<usize, &SamplePath> =
        ens_star.indices.iter().copied().zip(ens_star.paths.iter()).collect();
    let pairs: Vec<(&SamplePath, &SamplePath)> = ens
        .indices
        .iter()
        .zip(&ens.paths)
        .filter_map(|(i, a)| lookup_star.get(i).map(|b| (a, *b)))
        .collect();
    let failed_pairs = cfg.sim.n_paths - pairs.len();
    if pairs.is_empty() {
        return Err(Error::PathAborted {
            path: 0,
            step: 0,
            reason: "every simulated pair failed".into(),
        });
    }
    let ladder: Vec<Rung> = rungs
        .iter()
        .map(|&dt| {
            let k = dt as usize;
            let wins = pairs
                .iter()
                .filter(|(a, b)| a.values[k] - a.values[0] > b.values[k] - b.values[0])
                .count();
            let (lo, hi) = wilson_interval(wins as u64, pairs.len() as u64, WILSON_Z);
            Rung {
                delta_t: dt,
                p_dominance: wins as f64 / pairs.len() as f64,
                wilson_lo: lo,
                wilson_hi: hi,
                pairs: pairs.len(),
            }
        })
        .collect();
    let clears = |r: &Rung| match chosen {
        Some(Choice::First) => r.wilson_lo > 1.0 - cfg.epsilon,
        Some(Choice::Second) => r.wilson_hi < cfg.epsilon,
        None => false,
    };
    let (reported, converged) = match ladder.iter().rev().find(|r| clears(r)) {
        Some(r) => (*r, true),
        None => (*ladder.last().expect("non-empty ladder"), false),
    };
    Ok(DecisionResult {
        chosen,
        p_dominance: reported.p_dominance,
        delta_t_used: reported.delta_t,
        epsilon: cfg.epsilon,
        rate_gap,
        rate_gap_se,
        converged,
        rate,
        rate_star,
        ladder,
        implied,
        seeds,
        failed_pairs,
    })
}
