//! Performance measures: neighborhood-count mean absolute difference,
//! out-of-sample log-likelihood, classification accuracy, and a
//! product-Gaussian KDE baseline with Silverman bandwidths.

use crate::datagen::Dataset;
use crate::predictive::{Classifier, DensityModel};
use crate::specfun::log_sum_exp;
use crate::{Error, LogValue, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Mean absolute difference of neighborhood counts, per radius delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadReport {
    pub deltas: Vec<f64>,
    pub mad: Vec<f64>,
    pub n_refs: usize,
    pub seed: u64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For each of `n_refs` reference points resampled from the training set,
/// counts training and predictive points within each delta and averages the
/// absolute count differences.
pub fn mad_delta<R: Rng + ?Sized>(
    train: &[Vec<f64>],
    predictive_points: &[Vec<f64>],
    deltas: &[f64],
    n_refs: usize,
    seed: u64,
    rng: &mut R,
) -> Result<MadReport> {
    if train.is_empty() || predictive_points.len() != train.len() {
        return Err(Error::Domain(format!(
            "need |predictive| = |train| >= 1, got {} and {}",
            predictive_points.len(),
            train.len()
        )));
    }
    if n_refs == 0 {
        return Err(Error::Domain("need at least one reference point".into()));
    }
    let mut mad = vec![0.0; deltas.len()];
    for _ in 0..n_refs {
        let z = &train[rng.gen_range(0..train.len())];
        for (j, &delta) in deltas.iter().enumerate() {
            let d2 = delta * delta;
            let w_x = train.iter().filter(|p| sq_dist(p, z) <= d2).count() as f64;
            let w_z = predictive_points
                .iter()
                .filter(|p| sq_dist(p, z) <= d2)
                .count() as f64;
            mad[j] += (w_z - w_x).abs() / n_refs as f64;
        }
    }
    Ok(MadReport {
        deltas: deltas.to_vec(),
        mad,
        n_refs,
        seed,
    })
}

/// Sum of predictive log densities over a test set.
pub fn test_loglik(model: &DensityModel, test: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for x in test {
        total += model.logpdf(x)?.0;
    }
    Ok(total)
}

/// Fraction of test points whose predicted class matches the label.
pub fn classification_accuracy(clf: &Classifier, test: &Dataset) -> Result<f64> {
    let labels = test
        .labels
        .as_ref()
        .ok_or_else(|| Error::Domain("test set has no labels".into()))?;
    if test.points.is_empty() {
        return Err(Error::Domain("empty test set".into()));
    }
    let mut correct = 0usize;
    for (x, &label) in test.points.iter().zip(labels) {
        if clf.classify(x)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.points.len() as f64)
}

/// Product-Gaussian kernel density estimate with per-dimension Silverman
/// bandwidths h_j = 1.06 sd_j n^{-1/(d+4)} (floored at 1e-6).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeBaseline {
    train: Vec<Vec<f64>>,
    bandwidths: Vec<f64>,
}

impl KdeBaseline {
    pub fn fit(train: &[Vec<f64>]) -> Result<Self> {
        let n = train.len();
        if n < 2 {
            return Err(Error::Domain("KDE needs n >= 2".into()));
        }
        let d = train[0].len();
        let factor = 1.06 * (n as f64).powf(-1.0 / (d as f64 + 4.0));
        let bandwidths = (0..d)
            .map(|j| {
                let mean = train.iter().map(|p| p[j]).sum::<f64>() / n as f64;
                let var = train.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>()
                    / (n - 1) as f64;
                (factor * var.sqrt()).max(1e-6)
            })
            .collect();
        Ok(Self {
            train: train.to_vec(),
            bandwidths,
        })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<LogValue> {
        let d = self.bandwidths.len();
        if x.len() != d {
            return Err(Error::DimMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let log_norm: f64 = self
            .bandwidths
            .iter()
            .map(|h| -(h * (2.0 * std::f64::consts::PI).sqrt()).ln())
            .sum();
        let terms: Vec<f64> = self
            .train
            .iter()
            .map(|p| {
                let q: f64 = (0..d)
                    .map(|j| ((x[j] - p[j]) / self.bandwidths[j]).powi(2))
                    .sum();
                log_norm - 0.5 * q
            })
            .collect();
        Ok(LogValue(
            log_sum_exp(&terms) - (self.train.len() as f64).ln(),
        ))
    }

    /// Draws one point from the KDE: a uniformly chosen training point plus
    /// per-dimension bandwidth-scaled Gaussian noise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let p = &self.train[rng.gen_range(0..self.train.len())];
        p.iter()
            .zip(&self.bandwidths)
            .map(|(x, h)| x + h * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}
