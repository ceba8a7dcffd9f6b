//! Euler–Maruyama simulation of Itô processes.
//!
//! Every path draws its normals from its own ChaCha8 stream: the key comes
//! from the run seed and the stream id is the path index, so a path's
//! trajectory does not depend on how paths are scheduled across threads.

use std::io::{self, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::{BrownianDrift, ItoProcess, UtilityFunction};
use crate::numeric::stats::normal_quantile;

/// Discretised trajectory sampled at `t0 + k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "path needs finite t0 and dt > 0 (t0 = {t0}, dt = {dt})"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidConfig("a path needs at least two values".into()));
        }
        if let Some(step) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutsideDomain {
                step,
                value: values[step],
            });
        }
        Ok(Self { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Elapsed time from the first to the last value.
    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

/// What happens when a step lands on or beyond a finite domain endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Mirror the step back into the domain, keeping at least `epsilon`
    /// (default `1e-12·(1+|x0|)`) from the endpoint.
    ReflectAtEpsilon { epsilon: Option<f64> },
    /// Drop the path and report it.
    RejectPath,
}

impl Default for BoundaryPolicy {
    fn default() -> Self {
        BoundaryPolicy::ReflectAtEpsilon { epsilon: None }
    }
}

/// Which states are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    /// Every `k`-th step, starting with the initial state.
    Every(usize),
    /// Initial and final state only.
    Terminal,
}

impl Default for Recording {
    fn default() -> Self {
        Recording::Every(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub boundary: BoundaryPolicy,
    pub recording: Recording,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            dt,
            horizon,
            n_paths,
            seed,
            scheme: Scheme::EulerMaruyama,
            boundary: BoundaryPolicy::default(),
            recording: Recording::default(),
        }
    }

    pub fn with_recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    /// Number of integration steps; the horizon must be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "horizon {} must be finite and at least dt = {}",
                self.horizon, self.dt
            )));
        }
        let n = (self.horizon / self.dt).round();
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        let steps = self.steps()?;
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        if let Recording::Every(k) = self.recording {
            if k == 0 || steps % k != 0 {
                return Err(Error::InvalidConfig(format!(
                    "recording stride {k} must divide the {steps} steps"
                )));
            }
        }
        if let BoundaryPolicy::ReflectAtEpsilon { epsilon: Some(e) } = self.boundary {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "boundary epsilon must be positive, got {e}"
                )));
            }
        }
        Ok(steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFailure {
    pub index: usize,
    pub step: usize,
    pub reason: String,
}

/// Simulated paths in path-index order, plus the paths that did not finish.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub paths: Vec<SamplePath>,
    /// Index of each entry of `paths` within the run.
    pub indices: Vec<usize>,
    pub failures: Vec<PathFailure>,
    /// Total number of boundary reflections over all paths.
    pub reflections: u64,
}

impl Ensemble {
    /// The single path of a one-path run, or the failure that ended it.
    pub fn into_single(mut self) -> Result<SamplePath> {
        if let Some(f) = self.failures.first() {
            return Err(Error::PathAborted {
                path: f.index,
                step: f.step,
                reason: f.reason.clone(),
            });
        }
        self.paths
            .pop()
            .ok_or_else(|| Error::InvalidConfig("no path was simulated".into()))
    }

    pub fn terminals(&self) -> Vec<f64> {
        self.paths.iter().map(SamplePath::terminal).collect()
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seed for an independent sub-run, derived from `seed` and a `salt`.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Standard normal variates from one counter-based stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }
}

enum StepFailure {
    Rejected(usize, String),
}

fn run_path(
    p: &ItoProcess,
    cfg: &SimConfig,
    steps: usize,
    index: usize,
) -> (std::result::Result<Vec<f64>, StepFailure>, u64) {
    let mut normals = NormalStream::new(cfg.seed, index as u64);
    let domain = p.domain();
    let x0 = p.x0();
    let eps = match cfg.boundary {
        BoundaryPolicy::ReflectAtEpsilon { epsilon } => epsilon.unwrap_or(1e-12 * (1.0 + x0.abs())),
        BoundaryPolicy::RejectPath => 0.0,
    };
    let stride = match cfg.recording {
        Recording::Every(k) => k,
        Recording::Terminal => steps,
    };
    let sqrt_dt = cfg.dt.sqrt();
    let mut out = Vec::with_capacity(steps / stride + 1);
    out.push(x0);
    let mut x = x0;
    let mut reflections = 0;
    for k in 1..=steps {
        let z = normals.normal();
        let (a, b) = match (p.drift(x), p.diffusion(x)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return (Err(StepFailure::Rejected(k, e.to_string())), reflections),
        };
        let mut next = x + a * cfg.dt + b * sqrt_dt * z;
        if !next.is_finite() {
            return (
                Err(StepFailure::Rejected(
                    k,
                    format!("state became non-finite from x = {x}"),
                )),
                reflections,
            );
        }
        if !domain.contains(next) {
            match cfg.boundary {
                BoundaryPolicy::RejectPath => {
                    return (
                        Err(StepFailure::Rejected(k, format!("left the domain {domain} at {next}"))),
                        reflections,
                    )
                }
                BoundaryPolicy::ReflectAtEpsilon { .. } => {
                    reflections += 1;
                    if next <= domain.lo {
                        next = (2.0 * domain.lo - next).max(domain.lo + eps);
                    }
                    if next >= domain.hi {
                        next = (2.0 * domain.hi - next).min(domain.hi - eps);
                    }
                    if !domain.contains(next) {
                        return (
                            Err(StepFailure::Rejected(
                                k,
                                format!("could not reflect {next} into {domain}"),
                            )),
                            reflections,
                        );
                    }
                }
            }
        }
        x = next;
        if k % stride == 0 {
            out.push(x);
        }
    }
    (Ok(out), reflections)
}

/// Simulate `cfg.n_paths` independent paths of `p` from `p.x0()`.
pub fn simulate(p: &ItoProcess, cfg: &SimConfig) -> Result<Ensemble> {
    let steps = cfg.validate()?;
    let record_dt = match cfg.recording {
        Recording::Every(k) => k as f64 * cfg.dt,
        Recording::Terminal => steps as f64 * cfg.dt,
    };
    let results: Vec<_> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_path(p, cfg, steps, i))
        .collect();
    let mut ensemble = Ensemble {
        paths: Vec::with_capacity(cfg.n_paths),
        indices: Vec::with_capacity(cfg.n_paths),
        failures: Vec::new(),
        reflections: 0,
    };
    for (index, (result, reflections)) in results.into_iter().enumerate() {
        ensemble.reflections += reflections;
        match result {
            Ok(values) => {
                ensemble.paths.push(SamplePath {
                    t0: 0.0,
                    dt: record_dt,
                    values,
                });
                ensemble.indices.push(index);
            }
            Err(StepFailure::Rejected(step, reason)) => ensemble.failures.push(PathFailure { index, step, reason }),
        }
    }
    Ok(ensemble)
}

/// Simulate the utility Brownian motion `du = a_u dt + b_u dW` from `u0`.
pub fn simulate_brownian(bd: BrownianDrift, u0: f64, cfg: &SimConfig) -> Result<Ensemble> {
    bd.require_noise()?;
    let p = crate::functions::catalog::additive_dynamic(bd.a_u, bd.b_u, u0)?;
    simulate(&p, cfg)
}

/// Apply `u` to every value of a wealth path.
pub fn transform_path(path: &SamplePath, u: &UtilityFunction) -> Result<SamplePath> {
    let domain = u.domain();
    let values = path
        .values
        .iter()
        .enumerate()
        .map(|(step, &x)| {
            if !domain.contains(x) {
                return Err(Error::OutsideDomain { step, value: x });
            }
            u.value(x).map_err(|_| Error::OutsideDomain { step, value: x })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplePath {
        t0: path.t0,
        dt: path.dt,
        values,
    })
}

/// Write paths as CSV: `t,value` for one path, `t,path_0,...` otherwise.
/// All paths must share `t0`, `dt` and length.
pub fn write_csv<W: Write>(paths: &[SamplePath], mut w: W) -> io::Result<()> {
    let Some(first) = paths.first() else {
        return writeln!(w, "t,value");
    };
    if paths
        .iter()
        .any(|p| p.len() != first.len() || p.dt != first.dt || p.t0 != first.t0)
    {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "paths do not share a time grid",
        ));
    }
    if paths.len() == 1 {
        writeln!(w, "t,value")?;
    } else {
        let names: Vec<String> = (0..paths.len()).map(|i| format!("path_{i}")).collect();
        writeln!(w, "t,{}", names.join(","))?;
    }
    let mut line = String::new();
    for k in 0..first.len() {
        line.clear();
        line.push_str(&first.time(k).to_string());
        for p in paths {
            line.push(',');
            line.push_str(&p.values[k].to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::catalog;
    use crate::numeric::stats::Moments;

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0.0, 1.0, 1, 0).validate().is_err());
        assert!(SimConfig::new(0.1, 0.05, 1, 0).validate().is_err());
        assert!(SimConfig::new(0.1, 1.0, 0, 0).validate().is_err());
        assert!(SimConfig::new(0.3, 1.0, 1, 0).validate().is_err());
        assert_eq!(SimConfig::new(0.01, 1.0, 1, 0).validate().unwrap(), 100);
        assert!(SimConfig::new(0.01, 1.0, 1, 0)
            .with_recording(Recording::Every(7))
            .validate()
            .is_err());
    }

    #[test]
    fn uniforms_are_open_and_streams_differ() {
        let mut a = NormalStream::new(1, 0);
        let mut b = NormalStream::new(1, 1);
        let xs: Vec<f64> = (0..1000).map(|_| a.uniform()).collect();
        assert!(xs.iter().all(|&u| u > 0.0 && u < 1.0));
        let ys: Vec<f64> = (0..1000).map(|_| b.uniform()).collect();
        assert_ne!(xs, ys);
        let mut c = NormalStream::new(1, 0);
        assert_eq!(c.uniform(), xs[0]);
    }

    #[test]
    fn additive_increments_have_brownian_moments() {
        let p = catalog::additive_dynamic(0.3, 0.5, 0.0).unwrap();
        let cfg = SimConfig::new(0.01, 100.0, 1, 42);
        let path = simulate(&p, &cfg).unwrap().into_single().unwrap();
        assert_eq!(path.len(), 10_001);
        let m: Moments = path.increments().collect();
        let n = m.count() as f64;
        let se_mean = (0.25f64 * 0.01 / n).sqrt();
        assert!((m.mean() - 0.003).abs() < 4.0 * se_mean);
        let se_var = 0.0025 * (2.0 / n).sqrt();
        assert!((m.variance() - 0.0025).abs() < 4.0 * se_var);
    }

    #[test]
    fn recording_stride_and_terminal() {
        let p = catalog::gbm_dynamic(0.05, 0.2, 1.0).unwrap();
        let every = simulate(
            &p,
            &SimConfig::new(0.01, 1.0, 3, 7).with_recording(Recording::Every(10)),
        )
        .unwrap();
        let full = simulate(&p, &SimConfig::new(0.01, 1.0, 3, 7)).unwrap();
        let term = simulate(&p, &SimConfig::new(0.01, 1.0, 3, 7).with_recording(Recording::Terminal)).unwrap();
        for i in 0..3 {
            assert_eq!(every.paths[i].len(), 11);
            assert!((every.paths[i].dt - 0.1).abs() < 1e-15);
            assert_eq!(every.paths[i].terminal(), full.paths[i].terminal());
            assert_eq!(term.paths[i].values, vec![1.0, full.paths[i].terminal()]);
            assert_eq!(every.paths[i].values[3], full.paths[i].values[30]);
        }
    }

    #[test]
    fn boundary_policies() {
        // strongly negative drift pushes GBM-like dynamics across 0 under Euler
        let p = catalog::cramer_dynamic(-3.0, 1.0, 0.05).unwrap();
        let cfg = SimConfig::new(0.05, 5.0, 50, 3);
        let reflected = simulate(&p, &cfg).unwrap();
        assert!(reflected.reflections > 0);
        assert!(reflected.failures.is_empty());
        assert!(reflected.paths.iter().all(|q| q.values.iter().all(|&x| x > 0.0)));
        let rejected = simulate(&p, &cfg.with_boundary(BoundaryPolicy::RejectPath)).unwrap();
        assert!(!rejected.failures.is_empty());
        assert_eq!(rejected.paths.len() + rejected.failures.len(), 50);
        assert!(rejected.failures.iter().all(|f| f.step >= 1));
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let p = ItoProcess::from_exprs(
            crate::expr::parse("x^3").unwrap(),
            crate::expr::parse("1").unwrap(),
            crate::functions::Interval::real_line(),
            2.0,
        )
        .unwrap();
        let err = simulate(&p, &SimConfig::new(0.1, 10.0, 1, 0))
            .unwrap()
            .into_single()
            .unwrap_err();
        assert!(matches!(err, Error::PathAborted { path: 0, .. }));
    }

    #[test]
    fn transform_path_identity_and_domain_errors() {
        let path = SamplePath::new(0.0, 0.5, vec![1.0, -2.0, 3.0]).unwrap();
        let id = catalog::linear_utility(0.0);
        assert_eq!(transform_path(&path, &id).unwrap(), path);
        let err = transform_path(&path, &catalog::log_utility(0.0)).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { step: 1, value } if value == -2.0));
    }

    #[test]
    fn csv_layouts() {
        let a = SamplePath::new(0.0, 0.5, vec![1.0, 2.0]).unwrap();
        let b = SamplePath::new(0.0, 0.5, vec![3.0, 4.5]).unwrap();
        let mut single = Vec::new();
        write_csv(std::slice::from_ref(&a), &mut single).unwrap();
        assert_eq!(String::from_utf8(single).unwrap(), "t,value\n0,1\n0.5,2\n");
        let mut both = Vec::new();
        write_csv(&[a.clone(), b], &mut both).unwrap();
        assert_eq!(String::from_utf8(both).unwrap(), "t,path_0,path_1\n0,1,3\n0.5,2,4.5\n");
        let short = SamplePath::new(0.0, 0.5, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(write_csv(&[a, short], Vec::new()).is_err());
    }
}
