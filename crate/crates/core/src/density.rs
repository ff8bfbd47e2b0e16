//! Isotropic Gaussian kernel density estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::squared_l2;
use crate::error::{check_dim, Error, Result};

/// Lower bound on the mean per-coordinate standard deviation used by Scott's rule.
const MIN_SPREAD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    support: Vec<Vec<f64>>,
    bandwidth: f64,
    dim: usize,
}

/// Scott's rule `n^(-1/(d+4)) * mean_std`, with the spread floored at 1e-3.
pub fn scott_bandwidth(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    let mean_std = if n < 2 || dim == 0 {
        0.0
    } else {
        (0..dim)
            .map(|j| {
                let mean = points.iter().map(|p| p[j]).sum::<f64>() / n as f64;
                let var =
                    points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                var.sqrt()
            })
            .sum::<f64>()
            / dim as f64
    };
    (n.max(1) as f64).powf(-1.0 / (dim as f64 + 4.0)) * mean_std.max(MIN_SPREAD)
}

/// Fits a KDE. Without an explicit bandwidth, Scott's rule is used.
pub fn fit_kde(points: &[Vec<f64>], bandwidth: Option<f64>) -> Result<DensityModel> {
    let first = points.first().ok_or(Error::EmptySupport)?;
    let dim = first.len();
    for p in points {
        check_dim(dim, p.len())?;
    }
    let bandwidth = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {h}"
            )))
        }
        None => scott_bandwidth(points),
    };
    Ok(DensityModel {
        support: points.to_vec(),
        bandwidth,
        dim,
    })
}

impl DensityModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    /// `log((1/n) Σ_i N(x; p_i, h² I))`, evaluated with log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let h2 = self.bandwidth * self.bandwidth;
        let inv = -0.5 / h2;
        let max = self
            .support
            .iter()
            .map(|p| inv * squared_l2(p, x))
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .support
            .iter()
            .map(|p| (inv * squared_l2(p, x) - max).exp())
            .sum();
        let n = self.support.len() as f64;
        let norm = -0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * h2).ln();
        Ok(max + sum.ln() - n.ln() + norm)
    }

    pub fn log_density_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.log_density(x)).collect()
    }

    /// `max(exp(log_density(x)), floor)`.
    pub fn density_floor(&self, x: &[f64], floor: f64) -> Result<f64> {
        Ok(self.log_density(x)?.exp().max(floor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct summation without any stabilization.
    fn naive_density(points: &[Vec<f64>], h: f64, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        let c = (2.0 * std::f64::consts::PI * h * h).powf(-d / 2.0);
        points
            .iter()
            .map(|p| {
                let s: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                c * (-s / (2.0 * h * h)).exp()
            })
            .sum::<f64>()
            / points.len() as f64
    }

    #[test]
    fn single_point_closed_form() {
        let m = fit_kde(&[vec![0.3, 0.7]], Some(1.0)).unwrap();
        let expected = -(2.0 * std::f64::consts::PI).ln();
        assert!((m.log_density(&[0.3, 0.7]).unwrap() - expected).abs() < 1e-12);
        assert!((expected + 1.8379).abs() < 1e-4);
    }

    #[test]
    fn symmetric_support_gives_equal_density() {
        let m = fit_kde(&[vec![-1.0, 0.5], vec![1.0, -0.5]], Some(0.7)).unwrap();
        let a = m.log_density(&[-1.0, 0.5]).unwrap();
        let b = m.log_density(&[1.0, -0.5]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn density_decays_far_from_support() {
        let m = fit_kde(&[vec![0.0], vec![0.1]], Some(0.05)).unwrap();
        assert!(m.log_density(&[0.6]).unwrap() < m.log_density(&[0.0]).unwrap());
        assert!(m.log_density(&[1e3]).unwrap().is_finite());
    }

    #[test]
    fn translation_invariance() {
        let pts = vec![vec![0.1, 0.2], vec![0.4, 0.3], vec![0.9, 0.5]];
        let shift = [2.5, -1.25];
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![p[0] + shift[0], p[1] + shift[1]])
            .collect();
        let a = fit_kde(&pts, Some(0.2)).unwrap();
        let b = fit_kde(&moved, Some(0.2)).unwrap();
        let x = [0.33, 0.44];
        let y = [x[0] + shift[0], x[1] + shift[1]];
        assert!((a.log_density(&x).unwrap() - b.log_density(&y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn integrates_to_one_in_1d() {
        let pts = vec![vec![0.2], vec![0.25], vec![0.7]];
        let m = fit_kde(&pts, Some(0.1)).unwrap();
        // midpoint rule on [-2, 3]
        let n = 50_000;
        let (lo, hi) = (-2.0, 3.0);
        let dx = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| m.log_density(&[lo + (i as f64 + 0.5) * dx]).unwrap().exp() * dx)
            .sum();
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let m = fit_kde(&pts, Some(0.3)).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let naive = naive_density(&pts, 0.3, &x).ln();
            assert!((m.log_density(&x).unwrap() - naive).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_support_point_raises_density() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let mut more = pts.clone();
        more.push(vec![0.0, 0.0]);
        let a = fit_kde(&pts, Some(0.2)).unwrap();
        let b = fit_kde(&more, Some(0.2)).unwrap();
        assert!(b.log_density(&[0.0, 0.0]).unwrap() > a.log_density(&[0.0, 0.0]).unwrap());
    }

    #[test]
    fn floor_behaviour() {
        let m = fit_kde(&[vec![0.0, 0.0]], Some(0.01)).unwrap();
        assert_eq!(m.density_floor(&[5.0, 5.0], 1e-12).unwrap(), 1e-12);
        let at = m.log_density(&[0.0, 0.0]).unwrap().exp();
        assert_eq!(m.density_floor(&[0.0, 0.0], 1e-12).unwrap(), at);
        assert!(m.density_floor(&[0.01, 0.0], 1e-3).unwrap() >= 1e-3);
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_kde(&[], None), Err(Error::EmptySupport)));
        let m = fit_kde(&[vec![0.0, 0.0]], None).unwrap();
        assert!(matches!(
            m.log_density(&[0.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn scott_rule_value() {
        let pts = vec![vec![0.0], vec![1.0]];
        // n = 2, d = 1, sample std = sqrt(0.5)
        let expected = 2f64.powf(-0.2) * 0.5f64.sqrt();
        assert!((scott_bandwidth(&pts) - expected).abs() < 1e-12);
        assert!((scott_bandwidth(&[vec![0.5]]) - 1e-3).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn log_density_is_finite(
                pts in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 2), 1..20),
                x in proptest::collection::vec(-1e3f64..1e3, 2),
                h in 1e-3f64..5.0,
            ) {
                let m = fit_kde(&pts, Some(h)).unwrap();
                let v = m.log_density(&x).unwrap();
                prop_assert!(v.is_finite());
            }
        }
    }
}
