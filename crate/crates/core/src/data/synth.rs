use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, SampleMatrix};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Parameters of [`synth_classes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub features: usize,
    pub per_class: usize,
    /// Distance between any two class means.
    pub separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Mean of `class`: `offset·1 + (separation/√2)·e_class`, with the
    /// offset `4σ` keeping most of the noise above the clipping point.
    pub fn class_mean(&self, class: usize) -> Vec<f64> {
        let offset = 4.0 * self.noise_sigma;
        let mut m = vec![offset; self.features];
        m[class] += self.separation / std::f64::consts::SQRT_2;
        m
    }
}

/// Gaussian blobs around scaled, shifted basis vectors, clipped at zero.
/// Samples are ordered class by class.
pub fn synth_classes(spec: &SynthSpec) -> Result<Dataset> {
    let SynthSpec { classes, features, per_class, separation, noise_sigma, seed } = *spec;
    if classes == 0 || features == 0 || per_class == 0 {
        return Err(Error::InvalidParameter("class, feature and per-class counts must be >= 1".into()));
    }
    if classes > features {
        return Err(Error::InvalidParameter(format!(
            "{classes} classes need at least as many features, got {features}"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite() && noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "separation and noise_sigma must be finite and >= 0 (got {separation}, {noise_sigma})"
        )));
    }
    let normal = Normal::new(0.0, noise_sigma).expect("sigma validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = classes * per_class;
    let mut x = Matrix::zeros(features, total);
    let mut labels = Vec::with_capacity(total);
    for class in 0..classes {
        let mean = spec.class_mean(class);
        for s in 0..per_class {
            let j = class * per_class + s;
            for (i, m) in mean.iter().enumerate() {
                x[(i, j)] = (m + normal.sample(&mut rng)).max(0.0);
            }
            labels.push(class);
        }
    }
    Dataset::new(SampleMatrix::new(x, None)?, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec { classes: 3, features: 5, per_class: 4, separation: 10.0, noise_sigma: 1.0, seed: 9 }
    }

    #[test]
    fn means_pairwise_separated() {
        let s = spec();
        let (a, b) = (s.class_mean(0), s.class_mean(2));
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((d - 10.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_classes_constant() {
        let ds = synth_classes(&SynthSpec { noise_sigma: 0.0, ..spec() }).unwrap();
        let x = ds.samples.x();
        for j in 1..4 {
            assert_eq!(x.column(j), x.column(0));
        }
        assert_eq!(ds.labels, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn nonnegative_and_deterministic() {
        let a = synth_classes(&spec()).unwrap();
        assert!(a.samples.x().iter().all(|&v| v >= 0.0));
        assert_eq!(a, synth_classes(&spec()).unwrap());
        assert!(synth_classes(&SynthSpec { classes: 6, ..spec() }).is_err());
    }
}
