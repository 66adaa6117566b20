use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    pub seed: u64,
    pub n_samples: usize,
    /// Regressed `(u, v)` pairs per sample.
    pub n_points: usize,
    pub feature_dim: usize,
    pub outlier_frac: f64,
    /// Outlier coordinates move by this many target ranges.
    pub outlier_scale: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            seed: 42,
            n_samples: 32,
            n_points: 196,
            feature_dim: 8,
            outlier_frac: 0.05,
            outlier_scale: 10.0,
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be at least 1"));
        }
        if self.n_points == 0 {
            return Err(Error::invalid("n_points", "must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim", "must be at least 1"));
        }
        if !(self.outlier_frac >= 0.0 && self.outlier_frac < 1.0) {
            return Err(Error::invalid("outlier_frac", "must lie in [0, 1)"));
        }
        if !(self.outlier_scale.is_finite() && self.outlier_scale > 1.0) {
            return Err(Error::invalid(
                "outlier_scale",
                "must be finite and greater than 1",
            ));
        }
        Ok(())
    }

    pub fn n_outliers(&self) -> usize {
        (self.outlier_frac * (self.n_samples * self.n_points) as f64).floor() as usize
    }
}

/// Generated regression data. All matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub params: TaskParams,
    /// `n_samples × feature_dim` standard normal features.
    pub features: Vec<f64>,
    /// `n_samples × 2·n_points`, laid out `u0, v0, u1, v1, …`.
    pub targets: Vec<f64>,
    /// Binary labels of the auxiliary classification head.
    pub labels: Vec<f64>,
    /// Sorted `(sample, point)` pairs whose coordinates were displaced.
    pub displaced: Vec<(usize, usize)>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Two-class labels that are separated, through the origin of the
/// bias-augmented features, by their own class-mean difference direction
/// `Σ (y_i − ½)·x̃_i`.
///
/// Starting from the sign of the first feature, labels are reassigned to the
/// side of that direction each point falls on until they stop changing. With
/// such labels a zero-initialised logistic head classifies every sample
/// correctly after its first gradient step, whatever the step size.
pub fn mean_split_labels(features: &[f64], n: usize, d: usize) -> Vec<f64> {
    let augmented = |i: usize, k: usize| if k < d { features[i * d + k] } else { 1.0 };
    let mut labels: Vec<f64> = (0..n)
        .map(|i| if features[i * d] > 0.0 { 1.0 } else { 0.0 })
        .collect();
    for _ in 0..256 {
        let dir: Vec<f64> = (0..=d)
            .map(|k| (0..n).map(|i| (labels[i] - 0.5) * augmented(i, k)).sum())
            .collect();
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = (0..=d).map(|k| dir[k] * augmented(i, k)).sum();
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

impl SyntheticTask {
    /// Deterministic in `params`: the same parameters give bitwise-identical data.
    ///
    /// Clean targets are `sigmoid(x·A_c / sqrt(d))` for a fixed random map `A`,
    /// so they lie in `(0, 1)`. Outlier pairs have both coordinates pushed by
    /// `±outlier_scale` with independent random signs. Labels come from
    /// [`mean_split_labels`].
    pub fn generate(params: &TaskParams) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let (n, d, m) = (params.n_samples, params.feature_dim, params.n_points);
        let cols = 2 * m;

        let features: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let map: Vec<f64> = (0..d * cols).map(|_| rng.sample(StandardNormal)).collect();

        let scale = 1.0 / (d as f64).sqrt();
        let mut targets = vec![0.0; n * cols];
        for i in 0..n {
            let x = &features[i * d..(i + 1) * d];
            for c in 0..cols {
                let z: f64 = (0..d).map(|k| x[k] * map[k * cols + c]).sum();
                targets[i * cols + c] = sigmoid(z * scale);
            }
        }

        let labels = mean_split_labels(&features, n, d);

        let mut displaced: Vec<(usize, usize)> =
            index::sample(&mut rng, n * m, params.n_outliers())
                .into_iter()
                .map(|flat| (flat / m, flat % m))
                .collect();
        displaced.sort_unstable();
        for &(i, j) in &displaced {
            for c in [2 * j, 2 * j + 1] {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                targets[i * cols + c] += sign * params.outlier_scale;
            }
        }

        Ok(SyntheticTask {
            params: params.clone(),
            features,
            targets,
            labels,
            displaced,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.params.n_samples
    }

    pub fn feature_dim(&self) -> usize {
        self.params.feature_dim
    }

    pub fn n_outputs(&self) -> usize {
        2 * self.params.n_points
    }
}
