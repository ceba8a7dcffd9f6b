//! `ergo`: derive dynamics and utilities, check consistency, simulate,
//! estimate growth rates, decide between processes and tabulate densities.
//!
//! Exit codes: 0 success, 2 invalid input, 3 mathematical or domain
//! failure, 4 no decision.

mod output;
mod spec;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ergo_core::dist::{validate_density, wealth_density_with_law, VarianceLaw};
use ergo_core::duality::{check_consistency, dynamic_from_utility, utility_from_dynamic};
use ergo_core::ergodic::{
    collect_increments, decide, ensemble_average_rate, ergodicity_check, time_average_rate, DecideConfig, DecideMode,
    NoiseMode,
};
use ergo_core::functions::{BrownianDrift, ItoProcess, UtilityFunction};
use ergo_core::sde::{derive_seed, simulate, transform_path, write_csv, BoundaryPolicy, Recording, SimConfig};
use serde_json::json;

use output::Sink;
use spec::Defaults;

#[derive(Parser)]
#[command(
    name = "ergo",
    version,
    about = "Utility functions as ergodicity transforms of wealth dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Drift of the utility Brownian motion.
    #[arg(long = "a_u")]
    a_u: Option<f64>,
    /// Volatility of the utility Brownian motion.
    #[arg(long = "b_u", default_value_t = 1.0)]
    b_u: f64,
    /// Starting wealth.
    #[arg(long)]
    x0: Option<f64>,
    /// Domain `lo,hi` for `expr:` specs, e.g. `0,inf`.
    #[arg(long)]
    domain: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_A_U: f64 = 0.5;

impl Common {
    fn a_u(&self) -> f64 {
        self.a_u.unwrap_or(DEFAULT_A_U)
    }

    fn defaults(&self) -> Result<Defaults, CliError> {
        Ok(Defaults {
            a_u: self.a_u(),
            b_u: self.b_u,
            x0: self.x0,
            domain: self.domain.as_deref().map(spec::parse_domain).transpose()?,
        })
    }

    fn drift(&self) -> Result<BrownianDrift, CliError> {
        Ok(BrownianDrift::new(self.a_u(), self.b_u)?)
    }

    fn sink(&self) -> Sink {
        Sink::new(self.out.clone())
    }
}

#[derive(Args, Clone, Copy)]
struct Sim {
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop a path when it leaves the domain instead of reflecting it.
    #[arg(long)]
    reject: bool,
}

impl Sim {
    fn config(&self, horizon: f64, paths: usize) -> SimConfig {
        let boundary = if self.reject {
            BoundaryPolicy::RejectPath
        } else {
            BoundaryPolicy::default()
        };
        SimConfig::new(self.dt, horizon, paths, self.seed).with_boundary(boundary)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum GrowthMode {
    Time,
    Ensemble,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variance {
    Linear,
    Quadratic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    Independent,
    Common,
}

#[derive(Subcommand)]
enum Command {
    /// Wealth dynamic that makes a utility a Brownian motion with drift.
    DeriveDynamic {
        #[arg(long)]
        utility: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Whether a dynamic has a utility representation.
    Check {
        #[arg(long)]
        dynamic: String,
        #[command(flatten)]
        common: Common,
    },
    /// Utility that turns a consistent dynamic into a Brownian motion.
    DeriveUtility {
        #[arg(long)]
        dynamic: String,
        /// Wealth at which the utility is zero.
        #[arg(long = "x_ref")]
        x_ref: Option<f64>,
        /// Table range `lo,hi`; the domain's sample grid when absent.
        #[arg(long)]
        range: Option<String>,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Euler–Maruyama paths of a dynamic.
    Simulate {
        #[arg(long)]
        dynamic: String,
        /// Apply this utility to every path before writing.
        #[arg(long)]
        utility: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// Record every `stride`-th step.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        sim: Sim,
        #[command(flatten)]
        common: Common,
    },
    /// Time-average and ensemble-average growth rates of a utility.
    Growth {
        #[arg(long)]
        dynamic: String,
        #[arg(long, default_value = "linear")]
        utility: String,
        /// Length of the path behind the time average.
        #[arg(long, default_value_t = 1000.0)]
        horizon: f64,
        /// Number of ensemble increments.
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Block length and ensemble span.
        #[arg(long = "delta_t", default_value_t = 1.0)]
        delta_t: f64,
        #[arg(long, value_enum, default_value_t = GrowthMode::Both)]
        mode: GrowthMode,
        #[command(flatten)]
        sim: Sim,
        #[command(flatten)]
        common: Common,
    },
    /// Choose between two dynamics by the time-based criterion.
    Decide {
        /// The two dynamics, first then second.
        #[arg(long, num_args = 1, required = true)]
        dynamic: Vec<String>,
        #[arg(long, default_value = "log")]
        utility: String,
        #[arg(long, default_value_t = ergo_core::ergodic::DEFAULT_EPSILON)]
        epsilon: f64,
        /// Largest Δt of the ladder.
        #[arg(long, default_value_t = 64.0)]
        horizon: f64,
        /// Simulated pairs per ladder rung.
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        /// Length of the path behind each time-average rate.
        #[arg(long = "rate_horizon", default_value_t = 1000.0)]
        rate_horizon: f64,
        #[arg(long = "delta_t", default_value_t = 1.0)]
        delta_t: f64,
        #[arg(long, value_enum, default_value_t = Noise::Independent)]
        noise: Noise,
        /// Skip the check that `u` makes both dynamics Brownian.
        #[arg(long)]
        pure_simulation: bool,
        #[command(flatten)]
        sim: Sim,
        #[command(flatten)]
        common: Common,
    },
    /// Wealth density implied by a utility at time t.
    Density {
        #[arg(long)]
        utility: String,
        #[arg(long, default_value_t = 5.0)]
        t: f64,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        /// Half-width of the tabulated window in utility standard deviations.
        #[arg(long, default_value_t = 4.0)]
        window: f64,
        #[arg(long, value_enum, default_value_t = Variance::Linear)]
        variance: Variance,
        /// Also simulate this many paths of the derived dynamic and report a
        /// KS test against the density on stderr.
        #[arg(long = "ks_paths")]
        ks_paths: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        sim: Sim,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Math(String),
    NoDecision,
}

impl From<ergo_core::Error> for CliError {
    fn from(e: ergo_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Math(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Math(format!("output failed: {e}"))
    }
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

const DENSITY_X0: f64 = 3.5;
const TABLE_POINTS: usize = 33;

fn derive_dynamic(utility: &str, format: Format, c: &Common) -> Result<(), CliError> {
    let u = spec::utility(utility, &c.defaults()?)?;
    let x0 = c.x0.unwrap_or_else(|| u.domain().reference_point());
    let p = dynamic_from_utility(&u, c.drift()?, x0)?;
    let symbolic = p.symbolic().map(|(a, b)| (a.to_string(), b.to_string()));
    let table = coefficient_table(&p)?;
    match format {
        Format::Json => c.sink().json(&json!({
            "utility": u.label(),
            "a_u": c.a_u(),
            "b_u": c.b_u,
            "x0": x0,
            "drift": symbolic.as_ref().map(|s| &s.0),
            "diffusion": symbolic.as_ref().map(|s| &s.1),
            "table": table,
        }))?,
        Format::Text | Format::Csv => c.sink().emit(|w| match (&symbolic, format) {
            (Some((a, b)), Format::Text) => writeln!(w, "a_x = {a}\nb_x = {b}"),
            _ => {
                writeln!(w, "x,a_x,b_x")?;
                for [x, a, b] in &table {
                    writeln!(w, "{x},{a},{b}")?;
                }
                Ok(())
            }
        })?,
    }
    Ok(())
}

fn coefficient_table(p: &ItoProcess) -> Result<Vec<[f64; 3]>, CliError> {
    p.domain()
        .sample_grid(TABLE_POINTS)
        .into_iter()
        .map(|x| Ok([x, p.drift(x)?, p.diffusion(x)?]))
        .collect::<Result<_, ergo_core::Error>>()
        .map_err(CliError::from)
}

fn check(dynamic: &str, c: &Common) -> Result<(), CliError> {
    let p = spec::dynamic(dynamic, &c.defaults()?)?;
    let r = check_consistency(&p)?;
    c.sink().json(&json!({
        "dynamic": p.label(),
        "consistent": r.consistent,
        "ratio": r.inferred_a_u_over_b_u,
        "median_ratio": r.median_ratio,
        "residual": r.residual,
        "tolerance": r.tolerance,
    }))?;
    Ok(())
}

fn derive_utility(
    dynamic: &str,
    x_ref: Option<f64>,
    range: Option<&str>,
    grid: usize,
    format: Format,
    c: &Common,
) -> Result<(), CliError> {
    let p = spec::dynamic(dynamic, &c.defaults()?)?;
    let a_u = match c.a_u {
        Some(a) => a,
        None => {
            let r = check_consistency(&p)?;
            match r.inferred_a_u_over_b_u {
                Some(ratio) => ratio * c.b_u,
                None => return Err(ergo_core::Error::Inconsistent(Box::new(r)).into()),
            }
        }
    };
    let bd = BrownianDrift::new(a_u, c.b_u)?;
    let x_ref = x_ref.unwrap_or_else(|| p.domain().reference_point());
    let u = utility_from_dynamic(&p, bd, x_ref)?;
    let xs = match range {
        Some(text) => {
            let r = spec::parse_domain(text)?;
            if !(r.is_bounded() && grid >= 2) {
                return Err(validation("--range must be bounded and --grid at least 2"));
            }
            (0..grid)
                .map(|i| r.lo + (r.hi - r.lo) * i as f64 / (grid - 1) as f64)
                .collect()
        }
        None => u.domain().sample_grid(grid),
    };
    let rows = xs
        .into_iter()
        .map(|x| Ok([x, u.value(x)?]))
        .collect::<Result<Vec<_>, ergo_core::Error>>()?;
    match format {
        Format::Json => c.sink().json(&json!({
            "dynamic": p.label(),
            "a_u": a_u,
            "b_u": c.b_u,
            "x_ref": x_ref,
            "lower": u.lower_end(),
            "upper": u.upper_end(),
            "table": rows,
        }))?,
        _ => c.sink().emit(|w| {
            writeln!(w, "x,u")?;
            for [x, v] in &rows {
                writeln!(w, "{x},{v}")?;
            }
            Ok(())
        })?,
    }
    Ok(())
}

struct SimulateArgs<'a> {
    dynamic: &'a str,
    utility: Option<&'a str>,
    horizon: f64,
    paths: usize,
    stride: usize,
    format: Format,
}

fn simulate_cmd(a: SimulateArgs, sim: Sim, c: &Common) -> Result<(), CliError> {
    let d = c.defaults()?;
    let p = spec::dynamic(a.dynamic, &d)?;
    let u = a.utility.map(|s| spec::utility(s, &d)).transpose()?;
    let cfg = sim
        .config(a.horizon, a.paths)
        .with_recording(Recording::Every(a.stride));
    cfg.validate()?;
    let ens = simulate(&p, &cfg)?;
    for f in &ens.failures {
        eprintln!("path {} rejected at step {}: {}", f.index, f.step, f.reason);
    }
    if ens.paths.is_empty() {
        return Err(CliError::Math("every path was rejected".into()));
    }
    let paths = match &u {
        Some(u) => ens
            .paths
            .iter()
            .map(|q| transform_path(q, u))
            .collect::<Result<Vec<_>, _>>()?,
        None => ens.paths.clone(),
    };
    match a.format {
        Format::Json => c.sink().json(&json!({
            "dynamic": p.label(),
            "utility": u.as_ref().map(UtilityFunction::label),
            "seed": cfg.seed,
            "config": cfg,
            "dt": paths[0].dt,
            "indices": ens.indices,
            "paths": paths.iter().map(|q| &q.values).collect::<Vec<_>>(),
            "failures": ens.failures,
            "reflections": ens.reflections,
        }))?,
        _ => c.sink().emit(|w| write_csv(&paths, w))?,
    }
    Ok(())
}

struct GrowthArgs<'a> {
    dynamic: &'a str,
    utility: &'a str,
    horizon: f64,
    paths: usize,
    delta_t: f64,
    mode: GrowthMode,
}

fn growth(a: GrowthArgs, sim: Sim, c: &Common) -> Result<(), CliError> {
    let d = c.defaults()?;
    let p = spec::dynamic(a.dynamic, &d)?;
    let u = spec::utility(a.utility, &d)?;
    let (delta_t, cfg) = (a.delta_t, sim.config(a.horizon, a.paths));
    let head = json!({
        "dynamic": p.label(),
        "utility": u.label(),
        "seed": cfg.seed,
        "config": cfg,
        "delta_t": delta_t,
    });
    let body = match a.mode {
        GrowthMode::Both => serde_json::to_value(ergodicity_check(&p, &u, &cfg, delta_t)?).expect("report serializes"),
        GrowthMode::Time => {
            let seed = derive_seed(cfg.seed, 1);
            let long = SimConfig {
                n_paths: 1,
                seed,
                ..cfg
            };
            let path = simulate(&p, &long)?.into_single()?;
            let est = time_average_rate(&transform_path(&path, &u)?, delta_t)?;
            json!({"time_rate": est, "time_seed": seed})
        }
        GrowthMode::Ensemble => {
            let seed = derive_seed(cfg.seed, 2);
            let short = SimConfig {
                horizon: delta_t,
                seed,
                recording: Recording::Terminal,
                ..cfg
            };
            let ens = simulate(&p, &short)?;
            let u_paths = ens
                .paths
                .iter()
                .map(|q| transform_path(q, &u))
                .collect::<Result<Vec<_>, _>>()?;
            let (inc, span) = collect_increments(&u_paths)?;
            let est = ensemble_average_rate(&inc, span)?;
            json!({"ensemble_rate": est, "ensemble_seed": seed, "failed_paths": ens.failures.len()})
        }
    };
    let mut out = head;
    if let (Some(o), serde_json::Value::Object(b)) = (out.as_object_mut(), body) {
        o.extend(b);
    }
    c.sink().json(&out)?;
    Ok(())
}

struct DecideArgs<'a> {
    dynamics: &'a [String],
    utility: &'a str,
    epsilon: f64,
    horizon: f64,
    paths: usize,
    rate_horizon: f64,
    delta_t: f64,
    noise: Noise,
    pure_simulation: bool,
}

fn decide_cmd(a: DecideArgs, sim: Sim, c: &Common) -> Result<(), CliError> {
    let [first, second] = a.dynamics else {
        return Err(validation(format!(
            "decide needs exactly two --dynamic flags, got {}",
            a.dynamics.len()
        )));
    };
    let d = c.defaults()?;
    let p = spec::dynamic(first, &d)?;
    let q = spec::dynamic(second, &d)?;
    let u = spec::utility(a.utility, &d)?;
    let cfg = DecideConfig {
        sim: sim.config(a.horizon, a.paths),
        epsilon: a.epsilon,
        rate_horizon: a.rate_horizon,
        block_dt: a.delta_t,
        noise: match a.noise {
            Noise::Independent => NoiseMode::Independent,
            Noise::Common => NoiseMode::Common,
        },
        mode: if a.pure_simulation {
            DecideMode::PureSimulation
        } else {
            DecideMode::Checked
        },
    };
    let r = decide(&p, &q, &u, &cfg)?;
    let mut out = json!({
        "dynamics": [p.label(), q.label()],
        "utility": u.label(),
        "seed": cfg.sim.seed,
        "config": cfg,
    });
    if let (Some(o), serde_json::Value::Object(b)) = (
        out.as_object_mut(),
        serde_json::to_value(&r).expect("result serializes"),
    ) {
        o.extend(b);
    }
    c.sink().json(&out)?;
    if r.chosen.is_none() {
        return Err(CliError::NoDecision);
    }
    Ok(())
}

struct DensityArgs<'a> {
    utility: &'a str,
    t: f64,
    grid: usize,
    window: f64,
    variance: Variance,
    ks_paths: Option<usize>,
    format: Format,
}

fn density(a: DensityArgs, sim: Sim, c: &Common) -> Result<(), CliError> {
    let u = spec::utility(a.utility, &c.defaults()?)?;
    let bd = c.drift()?;
    let x0 = c.x0.unwrap_or(DENSITY_X0);
    if !(a.window > 0.0 && a.grid >= 2) {
        return Err(validation("--window must be positive and --grid at least 2"));
    }
    let law = match a.variance {
        Variance::Linear => VarianceLaw::Linear,
        Variance::Quadratic => VarianceLaw::Quadratic,
    };
    let dens = wealth_density_with_law(&u, bd, x0, a.t, law).map_err(|e| match e {
        ergo_core::Error::Normalization { .. } => CliError::Math(format!("{e}; try a larger --x0")),
        other => other.into(),
    })?;
    let ks = match a.ks_paths {
        None => None,
        Some(n) => {
            let p = dynamic_from_utility(&u, bd, x0)?;
            let cfg = sim.config(a.t, n).with_recording(Recording::Terminal);
            let ens = simulate(&p, &cfg)?;
            let report = validate_density(&dens, &ens.terminals())?;
            let line = json!({"seed": cfg.seed, "ks": report, "failed_paths": ens.failures.len()});
            eprintln!("{line}");
            Some(line)
        }
    };
    let grid = dens.plot_grid(a.grid, a.window);
    match a.format {
        Format::Json => c.sink().json(&json!({
            "utility": u.label(),
            "a_u": bd.a_u,
            "b_u": bd.b_u,
            "x0": x0,
            "t": a.t,
            "variance_law": law,
            "mass": dens.mass(),
            "validation": ks,
            "points": grid.iter().map(|&x| [x, dens.pdf(x)]).collect::<Vec<_>>(),
        }))?,
        _ => c.sink().emit(|w| dens.write_csv(&grid, w))?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::DeriveDynamic {
            utility,
            format,
            common,
        } => derive_dynamic(&utility, format, &common),
        Command::Check { dynamic, common } => check(&dynamic, &common),
        Command::DeriveUtility {
            dynamic,
            x_ref,
            range,
            grid,
            format,
            common,
        } => derive_utility(&dynamic, x_ref, range.as_deref(), grid, format, &common),
        Command::Simulate {
            dynamic,
            utility,
            horizon,
            paths,
            stride,
            format,
            sim,
            common,
        } => simulate_cmd(
            SimulateArgs {
                dynamic: &dynamic,
                utility: utility.as_deref(),
                horizon,
                paths,
                stride,
                format,
            },
            sim,
            &common,
        ),
        Command::Growth {
            dynamic,
            utility,
            horizon,
            paths,
            delta_t,
            mode,
            sim,
            common,
        } => growth(
            GrowthArgs {
                dynamic: &dynamic,
                utility: &utility,
                horizon,
                paths,
                delta_t,
                mode,
            },
            sim,
            &common,
        ),
        Command::Decide {
            dynamic,
            utility,
            epsilon,
            horizon,
            paths,
            rate_horizon,
            delta_t,
            noise,
            pure_simulation,
            sim,
            common,
        } => decide_cmd(
            DecideArgs {
                dynamics: &dynamic,
                utility: &utility,
                epsilon,
                horizon,
                paths,
                rate_horizon,
                delta_t,
                noise,
                pure_simulation,
            },
            sim,
            &common,
        ),
        Command::Density {
            utility,
            t,
            grid,
            window,
            variance,
            ks_paths,
            format,
            sim,
            common,
        } => density(
            DensityArgs {
                utility: &utility,
                t,
                grid,
                window,
                variance,
                ks_paths,
                format,
            },
            sim,
            &common,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Math(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::NoDecision) => {
            eprintln!("no decision at this horizon");
            ExitCode::from(4)
        }
    }
}
