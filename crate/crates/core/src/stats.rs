//! One-sample Kolmogorov–Smirnov statistic and a running mean/standard-error accumulator.

/// sup_x |F_n(x) − F(x)| for the empirical CDF of `samples` against `cdf`.
///
/// Returns 0 for an empty sample.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// Asymptotic Kolmogorov critical value at significance `alpha` for sample size `n`:
/// √(−ln(α/2)/2) / √n.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Welford accumulator for the mean and its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation over √n; zero with fewer than two samples.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.n - 1) as f64;
        (var / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_perfect_uniform_grid() {
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_shift() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0 + 0.2).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.2).abs() < 2e-3);
        assert_eq!(ks_statistic(&[], |x| x), 0.0);
    }

    #[test]
    fn critical_value_at_one_percent() {
        // Kolmogorov quantile K(0.99) ≈ 1.6276
        let c = ks_critical_value(1, 0.01);
        assert!((c - 1.627_623_6).abs() < 1e-6, "{c}");
        assert!((ks_critical_value(50_000, 0.01) - c / 50_000f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn accumulator_mean_and_error() {
        let acc: MeanAccumulator = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(acc.count(), 4);
        assert!((acc.mean() - 2.5).abs() < 1e-15);
        // sample var = 5/3
        assert!((acc.std_error() - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let constant: MeanAccumulator = std::iter::repeat(0.0).take(10).collect();
        assert_eq!(constant.std_error(), 0.0);
    }
}
