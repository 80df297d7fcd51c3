//! Statistical verification helpers: Kolmogorov-Smirnov distances,
//! chi-square goodness of fit, and binomial error bars.

use crate::real::Real;

/// One-sample KS statistic of `samples` against the model CDF.
///
/// `cdf` must be the exact cumulative distribution of the model being
/// tested; the samples are sorted internally.
pub fn ks_statistic<R: Real, F: Fn(R) -> R>(samples: &[R], cdf: F) -> R {
    assert!(!samples.is_empty(), "KS statistic of an empty sample");
    let mut xs: Vec<R> = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = R::of(xs.len() as f64);
    let mut sup = R::zero();
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let hi = (R::of((i + 1) as f64) / n - f).abs();
        let lo = (R::of(i as f64) / n - f).abs();
        sup = sup.max(hi).max(lo);
    }
    sup
}

/// Asymptotic 1% critical value for the one-sample KS statistic.
pub fn ks_critical_1pct<R: Real>(n_samples: usize) -> R {
    R::of(1.63) / R::of(n_samples as f64).sqrt()
}

/// Pearson chi-square statistic for observed counts against expected counts.
///
/// Bins with expected count below `min_expected` are merged into their right
/// neighbour (last bin merges left) so the asymptotic distribution applies.
/// Returns `(statistic, degrees_of_freedom)` with dof = merged bins - 1.
pub fn chi2_statistic<R: Real>(observed: &[R], expected: &[R], min_expected: R) -> (R, usize) {
    assert_eq!(observed.len(), expected.len());
    let mut merged: Vec<(R, R)> = Vec::new();
    let mut acc_o = R::zero();
    let mut acc_e = R::zero();
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o = acc_o + o;
        acc_e = acc_e + e;
        if acc_e >= min_expected {
            merged.push((acc_o, acc_e));
            acc_o = R::zero();
            acc_e = R::zero();
        }
    }
    if acc_e > R::zero() {
        if let Some(last) = merged.last_mut() {
            last.0 = last.0 + acc_o;
            last.1 = last.1 + acc_e;
        } else {
            merged.push((acc_o, acc_e));
        }
    }
    let stat = merged
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum::<R>();
    (stat, merged.len().saturating_sub(1))
}

/// 99th-percentile chi-square quantile via the Wilson-Hilferty approximation,
/// accurate to well under 1% for dof >= 3.
pub fn chi2_critical_99<R: Real>(dof: usize) -> R {
    let k = dof as f64;
    let z = 2.326_347_874_040_841; // Phi^{-1}(0.99)
    let h = 2.0 / (9.0 * k);
    R::of(k * (1.0 - h + z * h.sqrt()).powi(3))
}

/// Standard error of a binomial proportion estimated from `n` trials.
pub fn binomial_se<R: Real>(p: R, n: usize) -> R {
    (p * (R::one() - p) / R::of(n as f64)).sqrt()
}

/// Probability distribution over uniform grid cells with a piecewise-linear
/// CDF (probability uniform within each cell).
///
/// This is both the sampling kernel (inverse-CDF cell pick plus uniform
/// within-cell jitter) and the model CDF used by KS comparisons, so sampled
/// positions follow the CDF exactly by construction.
#[derive(Debug, Clone)]
pub struct CellDistribution<R: Real> {
    cumulative: Vec<R>,
    x_left: R,
    dx: R,
    total: R,
}

impl<R: Real> CellDistribution<R> {
    /// Builds from per-cell probability masses; `x_left` is the left edge of
    /// the first cell. Masses are normalized internally.
    pub fn from_masses(masses: &[R], x_left: R, dx: R) -> Self {
        assert!(!masses.is_empty() && dx > R::zero());
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = R::zero();
        for &m in masses {
            acc = acc + m.max(R::zero());
            cumulative.push(acc);
        }
        Self {
            cumulative,
            x_left,
            dx,
            total: acc,
        }
    }

    pub fn total_mass(&self) -> R {
        self.total
    }

    /// CDF value at `x`, clamped to [0, 1].
    pub fn cdf(&self, x: R) -> R {
        if self.total <= R::zero() {
            return R::zero();
        }
        let u = (x - self.x_left) / self.dx;
        if u <= R::zero() {
            return R::zero();
        }
        let cell = u.floor().as_f64() as usize;
        if cell >= self.cumulative.len() {
            return R::one();
        }
        let below = if cell == 0 {
            R::zero()
        } else {
            self.cumulative[cell - 1]
        };
        let inside = self.cumulative[cell] - below;
        ((below + inside * (u - u.floor())) / self.total).min(R::one())
    }

    /// Cell index drawn by inverse CDF.
    pub fn sample_cell(&self, rng: &mut rand_chacha::ChaCha8Rng) -> usize {
        let u = crate::rng::uniform::<R>(rng) * self.total;
        self.cumulative.partition_point(|&c| c < u).min(self.cumulative.len() - 1)
    }

    /// Position drawn by inverse CDF with uniform jitter within the cell.
    pub fn sample(&self, rng: &mut rand_chacha::ChaCha8Rng) -> R {
        let cell = self.sample_cell(rng);
        let jitter = crate::rng::uniform::<R>(rng);
        self.x_left + self.dx * (R::of(cell as f64) + jitter)
    }

    /// Center coordinate of cell `j`.
    pub fn cell_center(&self, j: usize) -> R {
        self.x_left + self.dx * (R::of(j as f64) + R::of(0.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ks_of_exact_grid_is_small() {
        // Deterministic stratified uniform sample: KS ~ 1/(2n).
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.5 / n as f64 + 1e-12, "d = {d}");
    }

    #[test]
    fn ks_detects_wrong_model() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) / n as f64).powi(2)).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d > 0.2, "d = {d}");
    }

    #[test]
    fn ks_uniform_sample_passes_critical_value() {
        let mut rng = crate::rng::stream(5, crate::rng::StreamTag::Test, 1);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d < ks_critical_1pct::<f64>(n), "d = {d}");
    }

    #[test]
    fn chi2_matches_tabulated_quantiles() {
        // Tabulated chi2_{0.99}: dof 10 -> 23.209, dof 30 -> 50.892.
        assert!((chi2_critical_99::<f64>(10) - 23.209).abs() < 0.15);
        assert!((chi2_critical_99::<f64>(30) - 50.892).abs() < 0.2);
    }

    #[test]
    fn chi2_merges_sparse_bins() {
        let observed = [1.0, 0.0, 2.0, 50.0, 47.0];
        let expected = [1.0, 1.0, 1.0, 50.0, 47.0];
        let (_stat, dof) = chi2_statistic(&observed, &expected, 5.0);
        assert!(dof < 4);
    }

    #[test]
    fn cell_distribution_samples_follow_its_own_cdf() {
        let masses = [0.1f64, 0.4, 0.0, 0.5];
        let dist = CellDistribution::from_masses(&masses, -2.0f64, 1.0);
        assert!(dist.cdf(-2.0).abs() < 1e-15);
        assert!((dist.cdf(-1.0) - 0.1).abs() < 1e-15);
        assert!((dist.cdf(-0.5) - 0.3).abs() < 1e-15);
        assert!((dist.cdf(2.0) - 1.0).abs() < 1e-15);
        let mut rng = crate::rng::stream(9, crate::rng::StreamTag::Test, 2);
        let n = 40_000;
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        // No sample may land in the zero-mass cell.
        assert!(xs.iter().all(|&x| !(0.0..1.0).contains(&x)));
        let d = ks_statistic(&xs, |x| dist.cdf(x));
        assert!(d < ks_critical_1pct::<f64>(n), "d = {d}");
    }
}
