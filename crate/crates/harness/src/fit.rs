//! Log-log rate fits.

use anyhow::{ensure, Result};
use serde::{Deserialize, Serialize};

use crate::config::Metric;
use crate::runner::values_by_size;
use crate::store::{mean_and_std_err, RunRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeStat {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub std_err: f64,
}

/// Least-squares line through `(log n, log mean)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
    pub sizes: Vec<SizeStat>,
}

impl RateFit {
    /// Fitted mean at size `n`.
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.ln()).exp()
    }
}

pub fn fit_rate(records: &[RunRecord], metric: Metric) -> Result<RateFit> {
    let by_size = values_by_size(records, metric);
    let sizes: Vec<SizeStat> = by_size
        .iter()
        .map(|(&n, v)| {
            let (mean, std_err) = mean_and_std_err(v);
            SizeStat { n, replicas: v.len(), mean, std_err }
        })
        .collect();
    fit_means(sizes)
}

/// Fit over precomputed per-size statistics.
pub fn fit_means(sizes: Vec<SizeStat>) -> Result<RateFit> {
    ensure!(sizes.len() >= 3, "a rate fit needs at least 3 sizes, got {}", sizes.len());
    ensure!(
        sizes.iter().all(|s| s.mean > 0.0 && s.mean.is_finite()),
        "a rate fit needs positive finite means"
    );
    // Logs of ratios to the first mean: a common positive factor cancels
    // before rounding, so the slope is unchanged under rescaling by 2^k.
    let base = sizes[0].mean;
    let x: Vec<f64> = sizes.iter().map(|s| (s.n as f64).ln()).collect();
    let y: Vec<f64> = sizes.iter().map(|s| (s.mean / base).ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let offset = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    let points = x.iter().zip(&sizes).map(|(a, s)| (*a, s.mean.ln())).collect();
    Ok(RateFit { slope, intercept: offset + base.ln(), r_squared, points, sizes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::synthetic;
    use proptest::prelude::*;

    const SIZES: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];

    fn records(f: impl Fn(f64) -> f64, replicas: usize) -> Vec<RunRecord> {
        SIZES
            .iter()
            .flat_map(|&n| (0..replicas).map(move |r| (n, r)))
            .map(|(n, r)| synthetic(Metric::W1Sd, n, r, f(n as f64)))
            .collect()
    }

    /// Least squares by Cramer's rule on the raw normal equations.
    fn normal_equations(points: &[(f64, f64)]) -> (f64, f64) {
        let k = points.len() as f64;
        let (sx, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let det = k * sxx - sx * sx;
        ((k * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    }

    #[test]
    fn exact_power_law() {
        let fit = fit_rate(&records(|n| 0.7 * n.powf(-0.5), 3), Metric::W1Sd).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12, "{}", fit.slope);
        assert!((fit.intercept - 0.7f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.sizes.len(), SIZES.len());
        assert!(fit.sizes.iter().all(|s| s.replicas == 3 && s.std_err <= 1e-15 * s.mean));
        assert!((fit.predict(100.0) - 0.07).abs() < 1e-12);
    }

    #[test]
    fn log_factor_flattens_the_slope() {
        let model = |n: f64| 1.3 * (n.ln() / n).sqrt();
        let fit = fit_rate(&records(model, 1), Metric::W1Sd).unwrap();
        let points: Vec<(f64, f64)> = SIZES.iter().map(|&n| ((n as f64).ln(), model(n as f64).ln())).collect();
        let (slope, intercept) = normal_equations(&points);
        assert!((fit.slope - slope).abs() < 1e-12);
        assert!((fit.intercept - intercept).abs() < 1e-12);
        assert!(fit.slope > -0.5 && fit.slope < -0.35, "{}", fit.slope);
    }

    #[test]
    fn constant_values() {
        let fit = fit_rate(&records(|_| 0.25, 2), Metric::W1Sd).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn needs_three_sizes() {
        let rows: Vec<RunRecord> = [16, 32].iter().map(|&n| synthetic(Metric::W1Sd, n, 0, 1.0)).collect();
        assert!(fit_rate(&rows, Metric::W1Sd).is_err());
        assert!(fit_rate(&records(|n| n, 1), Metric::DP).is_err());
        let mut rows = records(|n| 1.0 / n, 1);
        rows.push(synthetic(Metric::W1Sd, 2048, 0, f64::NAN));
        assert_eq!(fit_rate(&rows, Metric::W1Sd).unwrap().sizes.len(), SIZES.len());
    }

    #[test]
    fn per_size_standard_errors() {
        let rows: Vec<RunRecord> = SIZES
            .iter()
            .flat_map(|&n| [1.0, 3.0].map(|v| synthetic(Metric::W1Sd, n, v as usize, v / n as f64)))
            .collect();
        let fit = fit_rate(&rows, Metric::W1Sd).unwrap();
        for s in &fit.sizes {
            // values 1/n and 3/n: mean 2/n, standard error 1/n
            assert!((s.mean - 2.0 / s.n as f64).abs() < 1e-15);
            assert!((s.std_err - 1.0 / s.n as f64).abs() < 1e-15);
        }
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn slope_invariant_under_scaling(values in prop::collection::vec(0.01f64..10.0, 7), k in -20i32..20, c in 0.001f64..1000.0) {
            let base: Vec<RunRecord> = SIZES.iter().zip(&values).map(|(&n, &v)| synthetic(Metric::W1Sd, n, 0, v)).collect();
            let scaled = |f: f64| -> Vec<RunRecord> {
                SIZES.iter().zip(&values).map(|(&n, &v)| synthetic(Metric::W1Sd, n, 0, v * f)).collect()
            };
            let s0 = fit_rate(&base, Metric::W1Sd).unwrap().slope;
            prop_assert_eq!(fit_rate(&scaled(2f64.powi(k)), Metric::W1Sd).unwrap().slope, s0);
            prop_assert!((fit_rate(&scaled(c), Metric::W1Sd).unwrap().slope - s0).abs() < 1e-12);
        }
    }
}
