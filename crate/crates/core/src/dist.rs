//! Utility and wealth densities at a fixed time.
//!
//! `u(t)` is normal with mean `u(x0) + a_u t`. Its variance is `b_u² t` for a
//! Brownian motion; [`VarianceLaw::Quadratic`] gives the `b_u² t²` variant
//! for comparison. The wealth density follows by change of variables,
//! `P_x(x) = P_u(u(x)) u'(x)`.

use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::{BrownianDrift, Interval, UtilityFunction};
use crate::numeric::quad::{integrate, QuadOptions};
use crate::numeric::root::invert_monotone;
use crate::numeric::stats::normal_pdf;

pub const NORMALIZATION_TOL: f64 = 1e-6;
pub const MIN_KS_SAMPLES: usize = 1000;
/// KS critical value coefficient at α ≈ 0.01.
pub const KS_COEFFICIENT: f64 = 1.63;
/// Standard deviations of the utility normal covered by the knot grid.
const KNOT_SPAN: f64 = 12.0;
const KNOTS: usize = 481;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceLaw {
    /// `Var u(t) = b_u² t`.
    #[default]
    Linear,
    /// `Var u(t) = b_u² t²`.
    Quadratic,
}

impl VarianceLaw {
    pub fn variance(self, b_u: f64, t: f64) -> f64 {
        match self {
            VarianceLaw::Linear => b_u * b_u * t,
            VarianceLaw::Quadratic => b_u * b_u * t * t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityParams {
    pub a_u: f64,
    pub b_u: f64,
    /// Additive constant of the utility.
    pub c: f64,
    /// `u(x0)`.
    pub u0: f64,
}

type Pdf = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Density {
    pdf: Pdf,
    pub support: Interval,
    pub t: f64,
    pub params: DensityParams,
    pub variance_law: VarianceLaw,
    /// Mean and standard deviation of the underlying utility normal.
    pub u_mean: f64,
    pub u_sd: f64,
    mass: f64,
    /// `(x, ∫_{lo}^{x} pdf)` at increasing knots.
    knots: Vec<(f64, f64)>,
    utility: Option<UtilityFunction>,
}

impl std::fmt::Debug for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Density")
            .field("support", &self.support)
            .field("t", &self.t)
            .field("params", &self.params)
            .field("variance_law", &self.variance_law)
            .field("mass", &self.mass)
            .finish()
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        max_subdivisions: 4000,
    }
}

fn check_inputs(bd: BrownianDrift, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param("t", "must be positive and finite"));
    }
    bd.require_noise()
}

impl Density {
    #[allow(clippy::too_many_arguments)]
    fn build(
        pdf: Pdf,
        support: Interval,
        t: f64,
        params: DensityParams,
        variance_law: VarianceLaw,
        u_mean: f64,
        u_sd: f64,
        utility: Option<UtilityFunction>,
    ) -> Result<Self> {
        let mut points: Vec<f64> = (0..KNOTS)
            .map(|i| u_mean + u_sd * KNOT_SPAN * (2.0 * i as f64 / (KNOTS - 1) as f64 - 1.0))
            .filter_map(|v| match &utility {
                None => Some(v),
                Some(u) => {
                    let (lo, hi) = u.range();
                    if v > lo && v < hi {
                        u.inverse(v).ok()
                    } else {
                        None
                    }
                }
            })
            .filter(|x| support.contains(*x))
            .collect();
        points.dedup();
        if points.is_empty() {
            return Err(Error::Normalization { total: 0.0 });
        }
        let opts = quad_opts();
        let f = |x: f64| pdf(x);
        let mut knots = Vec::with_capacity(points.len());
        let mut acc = integrate(f, support.lo, points[0], &opts)?.value;
        knots.push((points[0], acc));
        for w in points.windows(2) {
            acc += integrate(f, w[0], w[1], &opts)?.value;
            knots.push((w[1], acc));
        }
        let last = *points.last().expect("non-empty");
        let mass = acc + integrate(f, last, support.hi, &opts)?.value;
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization { total: mass });
        }
        Ok(Self {
            pdf,
            support,
            t,
            params,
            variance_law,
            u_mean,
            u_sd,
            mass,
            knots,
            utility,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }

    /// Total probability by quadrature over the support.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= self.support.lo {
            return Ok(0.0);
        }
        if x >= self.support.hi {
            return Ok(self.mass);
        }
        let f = |y: f64| (self.pdf)(y);
        let opts = quad_opts();
        let i = self.knots.partition_point(|k| k.0 <= x);
        let v = if i == 0 {
            integrate(f, self.support.lo, x, &opts)?.value
        } else {
            let (kx, kc) = self.knots[i - 1];
            kc + integrate(f, kx, x, &opts)?.value
        };
        Ok(v.clamp(0.0, self.mass))
    }

    /// CDF at each point of an increasing sequence, integrating only
    /// between neighbours.
    pub fn cdf_sorted(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let Some(&first) = xs.first() else {
            return Ok(Vec::new());
        };
        let f = |y: f64| (self.pdf)(y);
        let opts = quad_opts();
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = self.cdf(first)?;
        out.push(acc);
        for w in xs.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidConfig("cdf_sorted needs increasing input".into()));
            }
            if w[1] > w[0] {
                acc += integrate(f, w[0], w[1], &opts)?.value;
            }
            out.push(acc.min(self.mass));
        }
        Ok(out)
    }

    /// `x` with `cdf(x) = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param("p", "must lie in (0, 1)"));
        }
        let reference = self.knots[self.knots.len() / 2].0;
        let f = |x: f64| self.cdf(x).ok();
        Ok(invert_monotone(&f, p, reference, self.support.lo, self.support.hi)?)
    }

    /// Interval holding the central `±z` standard deviations of the
    /// utility normal, mapped to the density's variable and clipped to the
    /// support.
    pub fn window(&self, z: f64) -> (f64, f64) {
        let (lo_u, hi_u) = (self.u_mean - z * self.u_sd, self.u_mean + z * self.u_sd);
        let map = |v: f64, fallback: f64| match &self.utility {
            None => v,
            Some(u) => {
                let (rlo, rhi) = u.range();
                let v = v.clamp(rlo, rhi);
                if v > rlo && v < rhi {
                    u.inverse(v).unwrap_or(fallback)
                } else {
                    fallback
                }
            }
        };
        let first = self.knots[0].0;
        let last = self.knots[self.knots.len() - 1].0;
        (map(lo_u, first), map(hi_u, last))
    }

    /// `n` evenly spaced points across `window(z)`.
    pub fn plot_grid(&self, n: usize, z: f64) -> Vec<f64> {
        let (lo, hi) = self.window(z);
        let n = n.max(2);
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, grid: &[f64], mut w: W) -> io::Result<()> {
        writeln!(w, "x,pdf")?;
        for &x in grid {
            writeln!(w, "{x},{}", self.pdf(x))?;
        }
        Ok(())
    }
}

/// Normal density of `u(t)` started from `u0`.
pub fn utility_density(bd: BrownianDrift, u0: f64, t: f64) -> Result<Density> {
    utility_density_with_law(bd, u0, t, VarianceLaw::Linear)
}

pub fn utility_density_with_law(bd: BrownianDrift, u0: f64, t: f64, law: VarianceLaw) -> Result<Density> {
    check_inputs(bd, t)?;
    if !u0.is_finite() {
        return Err(Error::param("u0", "must be finite"));
    }
    let mean = u0 + bd.a_u * t;
    let sd = law.variance(bd.b_u, t).sqrt();
    let pdf: Pdf = Arc::new(move |v| normal_pdf((v - mean) / sd) / sd);
    let params = DensityParams {
        a_u: bd.a_u,
        b_u: bd.b_u,
        c: 0.0,
        u0,
    };
    Density::build(pdf, Interval::real_line(), t, params, law, mean, sd, None)
}

/// Wealth density `P_u(u(x), t) u'(x)` for `u(t)` started at `u(x0)`.
pub fn wealth_density(u: &UtilityFunction, bd: BrownianDrift, x0: f64, t: f64) -> Result<Density> {
    wealth_density_with_law(u, bd, x0, t, VarianceLaw::Linear)
}

pub fn wealth_density_with_law(
    u: &UtilityFunction,
    bd: BrownianDrift,
    x0: f64,
    t: f64,
    law: VarianceLaw,
) -> Result<Density> {
    check_inputs(bd, t)?;
    let domain = u.domain();
    if !domain.contains(x0) {
        return Err(Error::param("x0", format!("{x0} is outside the domain {domain}")));
    }
    let u0 = u.value(x0)?;
    let mean = u0 + bd.a_u * t;
    let sd = law.variance(bd.b_u, t).sqrt();
    let uf = u.clone();
    let pdf: Pdf = Arc::new(move |x| {
        if !domain.contains(x) {
            return 0.0;
        }
        match (uf.value(x), uf.prime(x)) {
            (Ok(v), Ok(d)) => {
                let p = normal_pdf((v - mean) / sd) / sd * d;
                if p.is_finite() {
                    p
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    });
    let params = DensityParams {
        a_u: bd.a_u,
        b_u: bd.b_u,
        c: u.offset(),
        u0,
    };
    Density::build(pdf, domain, t, params, law, mean, sd, Some(u.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub ks_statistic: f64,
    pub critical: f64,
    pub n: usize,
    pub pass: bool,
}

/// Two-sided Kolmogorov–Smirnov test of `samples` against `d`; passes when
/// `D < 1.63/√n`.
pub fn validate_density(d: &Density, samples: &[f64]) -> Result<KsReport> {
    let n = samples.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "need at least {MIN_KS_SAMPLES} samples, got {n}"
        )));
    }
    if let Some(&bad) = samples.iter().find(|&&s| !d.support.contains(s)) {
        return Err(Error::OutsideSupport { value: bad });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cdf = d.cdf_sorted(&sorted)?;
    let nf = n as f64;
    let ks_statistic = cdf
        .iter()
        .enumerate()
        .map(|(i, &f)| ((i + 1) as f64 / nf - f).max(f - i as f64 / nf))
        .fold(0.0, f64::max);
    let critical = KS_COEFFICIENT / nf.sqrt();
    Ok(KsReport {
        ks_statistic,
        critical,
        n,
        pass: ks_statistic < critical,
    })
}
