use statrs::function::erf;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Running moments via Welford updates.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n as f64 - 1.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn skewness(&self) -> f64 {
        if self.m2 == 0.0 {
            return 0.0;
        }
        (self.n as f64).sqrt() * self.m3 / self.m2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        if self.m2 == 0.0 {
            return 0.0;
        }
        self.n as f64 * self.m4 / (self.m2 * self.m2) - 3.0
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&ranks(xs), &ranks(ys))
}

/// Central difference step `cbrt(eps)·(1+|x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.abs())
}

pub fn central_difference<F: Fn(f64) -> Option<f64>>(f: F, x: f64) -> Option<f64> {
    let h = fd_step(x);
    Some((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// Least-squares fit `target ≈ slope·source + intercept`; returns
/// `(slope, intercept, max_i |residual_i| / (1 + |target_i|))`.
pub fn affine_fit(source: &[f64], target: &[f64]) -> (f64, f64, f64) {
    let n = source.len() as f64;
    let ms = source.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut sst, mut sss) = (0.0, 0.0);
    for (s, t) in source.iter().zip(target) {
        sst += (s - ms) * (t - mt);
        sss += (s - ms) * (s - ms);
    }
    let slope = if sss == 0.0 { 0.0 } else { sst / sss };
    let intercept = mt - slope * ms;
    let dev = source
        .iter()
        .zip(target)
        .map(|(s, t)| (slope * s + intercept - t).abs() / (1.0 + t.abs()))
        .fold(0.0, f64::max);
    (slope, intercept, dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_quantile_inverts_cdf() {
        for p in [1e-10, 0.001, 0.025, 0.3, 0.5, 0.9, 0.975, 1.0 - 1e-9] {
            assert_relative_eq!(normal_cdf(normal_quantile(p)), p, max_relative = 1e-9);
        }
        assert_relative_eq!(normal_quantile(0.975), 1.959_963_984_540_054, max_relative = 1e-12);
    }

    #[test]
    fn moments_of_small_sample() {
        let m: Moments = [1.0, 2.0, 3.0, 4.0, 10.0].into_iter().collect();
        assert_relative_eq!(m.mean(), 4.0);
        assert_relative_eq!(m.variance(), 12.5);
        // population central moments by hand: m2 = 50/5, m3 = 180/5, m4 = 1394/5
        let m2 = 10.0_f64;
        let m3 = 180.0 / 5.0;
        let m4 = 1394.0 / 5.0;
        assert_relative_eq!(m.skewness(), m3 / m2.powf(1.5), max_relative = 1e-12);
        assert_relative_eq!(m.excess_kurtosis(), m4 / (m2 * m2) - 3.0, max_relative = 1e-12);
    }

    #[test]
    fn wilson_known_value() {
        // 8/10 at z = 1.96: (0.4902, 0.9433)
        let (lo, hi) = wilson_interval(8, 10, 1.96);
        assert!((lo - 0.4902).abs() < 1e-4);
        assert!((hi - 0.9433).abs() < 1e-4);
    }

    #[test]
    fn spearman_monotone_and_ties() {
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.5, 0.51, 9.0]), 1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]), -1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[0.2, 0.1, 0.3, 0.4]), 0.8);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn affine_fit_recovers_line() {
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let t: Vec<f64> = s.iter().map(|v| 3.0 * v - 2.0).collect();
        let (a, b, dev) = affine_fit(&s, &t);
        assert_relative_eq!(a, 3.0, max_relative = 1e-14);
        assert_relative_eq!(b, -2.0, max_relative = 1e-13);
        assert!(dev < 1e-14);
    }
}
