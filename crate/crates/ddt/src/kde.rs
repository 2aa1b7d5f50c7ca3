//! Gaussian kernel density estimation for the continuous second-level
//! stability distributions.

use serde::{Deserialize, Serialize};

/// Silverman's rule of thumb, robustified with the interquartile range:
/// h = 0.9 min(sd, IQR/1.34) n^(-1/5).
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < sorted.len() {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianKde {
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl GaussianKde {
    pub fn new(values: Vec<f64>) -> Self {
        let bandwidth = silverman_bandwidth(&values);
        Self { values, bandwidth }
    }

    pub fn density(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        if self.bandwidth <= 0.0 {
            // degenerate sample: a point mass
            return if self.values.contains(&x) { f64::INFINITY } else { 0.0 };
        }
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * self.bandwidth);
        let sum: f64 = self
            .values
            .iter()
            .map(|v| {
                let z = (x - v) / self.bandwidth;
                (-0.5 * z * z).exp()
            })
            .sum();
        norm * sum / self.values.len() as f64
    }

    /// Mode found on a 512-point grid over the sample range padded by 3h;
    /// a degenerate (zero-bandwidth) sample returns its most frequent value.
    pub fn mode(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        let lo = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if self.bandwidth <= 0.0 || lo == hi {
            let mut sorted = self.values.clone();
            sorted.sort_by(f64::total_cmp);
            let (mut best, mut best_run, mut run) = (sorted[0], 1usize, 1usize);
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    run += 1;
                    if run > best_run {
                        best_run = run;
                        best = w[1];
                    }
                } else {
                    run = 1;
                }
            }
            return best;
        }
        let pad = 3.0 * self.bandwidth;
        let (start, end) = (lo - pad, hi + pad);
        let step = (end - start) / 511.0;
        let mut best_x = start;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..512 {
            let x = start + i as f64 * step;
            let d = self.density(x);
            if d > best_d {
                best_d = d;
                best_x = x;
            }
        }
        best_x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mode_of_tight_cluster_is_its_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let values: Vec<f64> = (0..200).map(|_| 1.0 + rng.random_range(-0.002..0.002)).collect();
        let kde = GaussianKde::new(values);
        assert!((kde.mode() - 1.0).abs() < 0.002, "mode {}", kde.mode());
    }

    #[test]
    fn mode_picks_the_heavier_of_two_bumps() {
        let mut values = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            values.push(2.0 + rng.random_range(-0.05..0.05));
        }
        for _ in 0..100 {
            values.push(5.0 + rng.random_range(-0.05..0.05));
        }
        let kde = GaussianKde::new(values);
        assert!((kde.mode() - 2.0).abs() < 0.2);
    }

    #[test]
    fn degenerate_sample_returns_point_mass() {
        let kde = GaussianKde::new(vec![3.0, 3.0, 3.0]);
        assert_eq!(kde.mode(), 3.0);
        let single = GaussianKde::new(vec![7.0]);
        assert_eq!(single.mode(), 7.0);
    }

    #[test]
    fn density_integrates_to_about_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..1.0)).collect();
        let kde = GaussianKde::new(values);
        let mut integral = 0.0;
        let (a, b, steps) = (-1.0, 2.0, 3000);
        let h = (b - a) / steps as f64;
        for i in 0..steps {
            integral += kde.density(a + (i as f64 + 0.5) * h) * h;
        }
        assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
    }
}
