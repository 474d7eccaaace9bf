//! Fits and hypothesis tests used by the verification sweeps and Monte Carlo experiments.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Ordinary least squares fit `y ≈ intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of log|y| against log x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    ols(&lx, &ly).0
}

pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof).expect("positive dof");
    1.0 - d.cdf(statistic)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Weighted sample mean and the delta-method covariance of that ratio estimator.
pub fn weighted_mean_cov(samples: &[Vec<f64>], weights: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = samples[0].len();
    let wsum: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(d);
    for (v, w) in samples.iter().zip(weights) {
        for k in 0..d {
            mean[k] += w * v[k];
        }
    }
    mean /= wsum;
    let mut cov = DMatrix::zeros(d, d);
    for (v, w) in samples.iter().zip(weights) {
        let r = DVector::from_iterator(d, v.iter().zip(mean.iter()).map(|(a, m)| a - m));
        cov += (w * w) * &r * r.transpose();
    }
    cov /= wsum * wsum;
    (mean, cov)
}

/// Wald test that two (possibly weighted) samples of vectors share their mean.
///
/// Uses the pseudo-inverse of the pooled covariance so that linearly
/// constrained statistics (for example histogram frequencies, which sum to one)
/// are handled with the correct number of degrees of freedom.
pub fn weighted_mean_test(
    a: &[Vec<f64>],
    wa: &[f64],
    b: &[Vec<f64>],
    wb: &[f64],
) -> TestResult {
    let (ma, ca) = weighted_mean_cov(a, wa);
    let (mb, cb) = weighted_mean_cov(b, wb);
    let diff = ma - mb;
    let pooled = ca + cb;
    let eig = pooled.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut stat = 0.0;
    let mut rank = 0;
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > 1e-10 * max_ev && ev > 0.0 {
            let proj = eig.eigenvectors.column(k).dot(&diff);
            stat += proj * proj / ev;
            rank += 1;
        }
    }
    TestResult {
        statistic: stat,
        dof: rank,
        p_value: chi_square_sf(stat, rank as f64),
    }
}

/// Kish effective sample size.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    s * s / s2
}

/// Groups sorted integer categories into bins with pooled expected count at least `min_count`.
/// Returns the bin index of every category value in `lo..=hi`.
pub fn merge_bins(pooled_counts: &[f64], min_count: f64) -> Vec<usize> {
    let mut bins = vec![0; pooled_counts.len()];
    let mut current = 0;
    let mut acc = 0.0;
    for (i, c) in pooled_counts.iter().enumerate() {
        bins[i] = current;
        acc += c;
        if acc >= min_count && i + 1 < pooled_counts.len() {
            let rest: f64 = pooled_counts[i + 1..].iter().sum();
            if rest >= min_count {
                current += 1;
                acc = 0.0;
            }
        }
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ols_exact_line() {
        let (s, i) = ols(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-14 && (i - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chi_square_median() {
        // median of chi-square with 2 dof is 2 ln 2
        assert!((chi_square_sf(2.0 * 2f64.ln(), 2.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn same_distribution_is_not_rejected() {
        let mut rng = crate::rng::stream(1, 0);
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| {
                    let k = rng.random_range(0..4usize);
                    let mut v = vec![0.0; 4];
                    v[k] = 1.0;
                    v
                })
                .collect()
        };
        let a = draw(4000);
        let b = draw(4000);
        let w = vec![1.0; 4000];
        let t = weighted_mean_test(&a, &w, &b, &w);
        assert_eq!(t.dof, 3);
        assert!(t.p_value > 0.001);
    }

    #[test]
    fn merged_bins_are_large_enough() {
        let bins = merge_bins(&[1.0, 2.0, 10.0, 3.0, 4.0, 0.5], 5.0);
        assert_eq!(bins, vec![0, 0, 0, 1, 1, 1]);
    }
}
