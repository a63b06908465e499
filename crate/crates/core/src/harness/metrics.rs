use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::train::RunReport;

/// Share of samples within 2% of a center before the mode counts as covered.
pub const COVERAGE_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered: usize,
    /// Fraction of all samples strictly inside `radius` of each center.
    pub fractions: Vec<f64>,
}

/// A sample counts toward its nearest center only, so the fractions sum to
/// at most 1.
pub fn mode_coverage(samples: ArrayView2<f64>, centers: &[[f64; 2]], radius: f64) -> Coverage {
    let mut hits = vec![0usize; centers.len()];
    for row in samples.rows() {
        let nearest = centers
            .iter()
            .enumerate()
            .map(|(k, c)| (k, (row[0] - c[0]).hypot(row[1] - c[1])))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((k, dist)) = nearest {
            if dist < radius {
                hits[k] += 1;
            }
        }
    }
    let n = samples.nrows().max(1) as f64;
    let fractions: Vec<f64> = hits.iter().map(|&h| h as f64 / n).collect();
    Coverage {
        covered: fractions
            .iter()
            .filter(|&&f| f >= COVERAGE_THRESHOLD)
            .count(),
        fractions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    /// max − min of the mean critic output on generated samples.
    pub output_range: f64,
    /// Largest rolling std of that mean critic output.
    pub rolling_std_max: f64,
    /// Largest rolling std of the mean style reward.
    pub reward_std_max: f64,
}

/// Largest population std over all length-`window` windows. A window longer
/// than the series shrinks to the series.
pub fn rolling_std_max(series: &[f64], window: usize) -> f64 {
    let w = window.clamp(1, series.len().max(1));
    series
        .windows(w)
        .map(|s| {
            let mean = s.iter().sum::<f64>() / w as f64;
            (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64).sqrt()
        })
        .fold(0.0, f64::max)
}

pub fn series_range(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

pub fn stability_metrics(report: &RunReport, window: usize) -> Stability {
    let output: Vec<f64> = report.steps.iter().map(|s| s.d_fake_mean).collect();
    let reward: Vec<f64> = report.steps.iter().map(|s| s.reward_mean).collect();
    Stability {
        output_range: series_range(&output),
        rolling_std_max: rolling_std_max(&output, window),
        reward_std_max: rolling_std_max(&reward, window),
    }
}

/// Median of finite and infinite values alike; NaN sorts last.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::Mixture;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collapsed_samples_cover_one_mode() {
        let ring = Mixture::ring8();
        let x = Array2::from_shape_fn((500, 2), |(_, k)| ring.centers[3][k]);
        let c = mode_coverage(x.view(), &ring.centers, 0.15);
        assert_eq!(c.covered, 1);
        assert_eq!(c.fractions[3], 1.0);
    }

    #[test]
    fn true_mixture_covers_all_modes() {
        let ring = Mixture::ring8();
        let x = ring.sample(10_000, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(
            mode_coverage(x.view(), &ring.centers, 3.0 * ring.sigma).covered,
            8
        );
    }

    #[test]
    fn zero_radius_covers_nothing() {
        let ring = Mixture::ring8();
        let x = Array2::from_shape_fn((10, 2), |(_, k)| ring.centers[0][k]);
        assert_eq!(mode_coverage(x.view(), &ring.centers, 0.0).covered, 0);
    }

    #[test]
    fn rolling_std_closed_forms() {
        assert_eq!(rolling_std_max(&[2.5; 30], 5), 0.0);
        assert_eq!(series_range(&[2.5; 30]), 0.0);
        let alt: Vec<f64> = (0..20)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(rolling_std_max(&alt, 2), 1.0);
        assert_eq!(rolling_std_max(&[], 4), 0.0);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn single_point_covers_at_most_one(x in -4.0..4.0f64, y in -4.0..4.0f64, r in 0.0..3.0f64) {
            let ring = Mixture::ring8();
            let s = Array2::from_shape_vec((1, 2), vec![x, y]).unwrap();
            prop_assert!(mode_coverage(s.view(), &ring.centers, r).covered <= 1);
        }
    }
}
