//! Posterior predictive density, sampling, and classification.
//!
//! A fitted chain is collapsed into a [`DensityModel`]: for each retained
//! trace state the predictive mixes the occupied sphere blocks with weights
//! n^l / (n + alpha) and, optionally, a fresh block drawn from the base
//! measure with weight alpha / (n + alpha) (approximated by Monte Carlo
//! over `n_prior_draws` base draws). The final density averages over trace
//! states.

use crate::gibbs::sphere_mixture_loglik;
use crate::model_state::{draw_sphere_from_base, BaseMeasure, SphereBlock, Trace};
use crate::specfun::log_sum_exp;
use crate::{Error, LogValue, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Options controlling how the predictive is assembled from a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveOptions {
    /// include the alpha/(n+alpha) fresh-sphere term
    pub include_new_sphere: bool,
    /// Monte Carlo draws from the base measure for the fresh-sphere term
    pub n_prior_draws: usize,
}

impl Default for PredictiveOptions {
    fn default() -> Self {
        Self {
            include_new_sphere: true,
            n_prior_draws: 100,
        }
    }
}

/// One mixture component of the flattened predictive: a sphere block with
/// its own noise variance and mixing weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WeightedBlock {
    log_weight: f64,
    sigma2: f64,
    sphere: SphereBlock,
}

/// Posterior predictive density assembled from a fitted chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    dim: usize,
    components: Vec<WeightedBlock>,
}

impl DensityModel {
    /// Collapses a trace into a flat mixture over (state, sphere) pairs.
    pub fn from_trace<R: Rng + ?Sized>(
        trace: &Trace,
        options: &PredictiveOptions,
        rng: &mut R,
    ) -> Result<Self> {
        if trace.states.is_empty() {
            return Err(Error::Domain("empty trace".into()));
        }
        let base = BaseMeasure::new(trace.dim, trace.hyper.clone())?;
        let n = trace.n_obs as f64;
        let alpha = trace.hyper.alpha;
        let log_state_weight = -(trace.states.len() as f64).ln();
        let mut components = Vec::new();
        for st in &trace.states {
            let mut counts = vec![0usize; st.spheres.len()];
            for &l in &st.s {
                counts[l] += 1;
            }
            for (l, sphere) in st.spheres.iter().enumerate() {
                components.push(WeightedBlock {
                    log_weight: log_state_weight + (counts[l] as f64 / (n + alpha)).ln(),
                    sigma2: st.sigma2,
                    sphere: sphere.clone(),
                });
            }
            if options.include_new_sphere && options.n_prior_draws > 0 {
                let lw = log_state_weight
                    + (alpha / (n + alpha)).ln()
                    - (options.n_prior_draws as f64).ln();
                for _ in 0..options.n_prior_draws {
                    components.push(WeightedBlock {
                        log_weight: lw,
                        sigma2: st.sigma2,
                        sphere: draw_sphere_from_base(&base, rng),
                    });
                }
            }
        }
        Ok(Self {
            dim: trace.dim,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Predictive log density at x.
    pub fn logpdf(&self, x: &[f64]) -> Result<LogValue> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut terms = Vec::with_capacity(self.components.len());
        for c in &self.components {
            terms.push(c.log_weight + sphere_mixture_loglik(x, &c.sphere, c.sigma2)?);
        }
        Ok(LogValue(log_sum_exp(&terms)))
    }

    /// Draws one point from the predictive mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        // categorical over components by weight
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut idx = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.log_weight.exp();
            if u <= acc {
                idx = i;
                break;
            }
        }
        let c = &self.components[idx];
        // kernel within the sphere block
        let v: f64 = rng.gen();
        let mut k = c.sphere.weights.len() - 1;
        let mut wacc = 0.0;
        for (i, w) in c.sphere.weights.iter().enumerate() {
            wacc += w;
            if v <= wacc {
                k = i;
                break;
            }
        }
        let y = crate::directional::vmf_sample(&c.sphere.kernels[k], rng);
        let sd = c.sigma2.sqrt();
        Ok((0..self.dim)
            .map(|j| {
                c.sphere.center[j]
                    + c.sphere.radius * y.coords()[j]
                    + sd * rng.sample::<f64, _>(StandardNormal)
            })
            .collect())
    }
}

/// One-density-per-class generative classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    /// class densities in class-index order
    pub models: Vec<DensityModel>,
    /// log prior class probabilities (class frequencies in training data)
    pub log_priors: Vec<f64>,
}

impl Classifier {
    pub fn new(models: Vec<DensityModel>, class_counts: &[usize]) -> Result<Self> {
        if models.len() != class_counts.len() || models.is_empty() {
            return Err(Error::Domain("need one model and count per class".into()));
        }
        let total: usize = class_counts.iter().sum();
        if total == 0 {
            return Err(Error::Domain("empty training set".into()));
        }
        let log_priors = class_counts
            .iter()
            .map(|&c| (c as f64 / total as f64).ln())
            .collect();
        Ok(Self { models, log_priors })
    }

    /// Per-class unnormalized log posterior probabilities at x.
    pub fn log_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.models
            .iter()
            .zip(&self.log_priors)
            .map(|(m, lp)| Ok(lp + m.logpdf(x)?.0))
            .collect()
    }

    /// Predicted class index: argmax of the posterior scores, lowest index
    /// on ties.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        let scores = self.log_scores(x)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directional::{UnitVector, VmfParams};
    use crate::model_state::{Hyperparams, TraceState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn unit_sphere_block(center: Vec<f64>, radius: f64, tau: f64) -> SphereBlock {
        let d = center.len();
        SphereBlock {
            center,
            radius,
            weights: vec![1.0],
            kernels: vec![VmfParams::new(UnitVector::e1(d), tau).unwrap()],
        }
    }

    fn toy_trace(states: Vec<TraceState>, n_obs: usize, dim: usize) -> Trace {
        Trace {
            states,
            hyper: Hyperparams::default_for_dim(dim),
            seed: 0,
            n_obs,
            dim,
        }
    }

    fn toy_state(iter: usize, spheres: Vec<SphereBlock>, s: Vec<usize>, sigma2: f64) -> TraceState {
        let n = s.len();
        TraceState {
            iter,
            sigma2,
            spheres,
            s,
            k: vec![0; n],
            y: None,
        }
    }

    #[test]
    fn single_state_single_sphere_matches_kernel_density() {
        // no new-sphere term: predictive = n/(n+alpha) * FG, a fixed offset
        let sphere = unit_sphere_block(vec![0.2, -0.1], 1.3, 2.0);
        let st = toy_state(0, vec![sphere.clone()], vec![0; 10], 0.05);
        let trace = toy_trace(vec![st], 10, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let opts = PredictiveOptions {
            include_new_sphere: false,
            n_prior_draws: 0,
        };
        let model = DensityModel::from_trace(&trace, &opts, &mut rng).unwrap();
        let offset = (10.0 / (10.0 + trace.hyper.alpha)).ln();
        for x in [[1.5, 0.0], [0.0, 0.7], [-2.0, 1.0]] {
            let got = model.logpdf(&x).unwrap().0;
            let p = crate::fg_kernel::FgParams::new(
                sphere.center.clone(),
                sphere.radius,
                sphere.kernels[0].clone(),
                0.05,
            )
            .unwrap();
            let want = offset + crate::fg_kernel::fg_logpdf(&x, &p).unwrap().0;
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn state_average_matches_hand_mixture() {
        let s1 = unit_sphere_block(vec![0.0, 0.0], 1.0, 1.0);
        let s2 = unit_sphere_block(vec![2.0, 0.0], 0.7, 3.0);
        let trace = toy_trace(
            vec![
                toy_state(0, vec![s1.clone()], vec![0; 8], 0.04),
                toy_state(1, vec![s2.clone()], vec![0; 8], 0.09),
            ],
            8,
            2,
        );
        let opts = PredictiveOptions {
            include_new_sphere: false,
            n_prior_draws: 0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let model = DensityModel::from_trace(&trace, &opts, &mut rng).unwrap();
        let x = [1.0, 0.3];
        let w = 8.0 / (8.0 + trace.hyper.alpha);
        let f = |sp: &SphereBlock, sig: f64| {
            let p = crate::fg_kernel::FgParams::new(
                sp.center.clone(),
                sp.radius,
                sp.kernels[0].clone(),
                sig,
            )
            .unwrap();
            crate::fg_kernel::fg_logpdf(&x, &p).unwrap().0.exp()
        };
        let want = (0.5 * w * f(&s1, 0.04) + 0.5 * w * f(&s2, 0.09)).ln();
        assert!((model.logpdf(&x).unwrap().0 - want).abs() < 1e-12);
    }

    #[test]
    fn predictive_normalizes_without_new_sphere_term() {
        // n/(n+alpha) with alpha -> 0 makes the predictive a proper density;
        // Monte Carlo over a box should integrate to ~1
        let sphere = unit_sphere_block(vec![0.0, 0.0], 1.0, 1.5);
        let st = toy_state(0, vec![sphere], vec![0; 20], 0.05);
        let mut trace = toy_trace(vec![st], 20, 2);
        trace.hyper.alpha = 1e-12;
        let opts = PredictiveOptions {
            include_new_sphere: false,
            n_prior_draws: 0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let model = DensityModel::from_trace(&trace, &opts, &mut rng).unwrap();
        let (lo, hi) = (-3.0, 3.0);
        let n = 400;
        let h = (hi - lo) / n as f64;
        let mut mass = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h];
                mass += model.logpdf(&x).unwrap().0.exp() * h * h;
            }
        }
        assert!((mass - 1.0).abs() < 5e-3, "mass = {mass}");
    }

    #[test]
    fn samples_follow_the_density_moments() {
        let sphere = unit_sphere_block(vec![1.0, -0.5], 2.0, 0.0); // uniform circle
        let st = toy_state(0, vec![sphere], vec![0; 20], 0.01);
        let mut trace = toy_trace(vec![st], 20, 2);
        trace.hyper.alpha = 1e-12;
        let opts = PredictiveOptions {
            include_new_sphere: false,
            n_prior_draws: 0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let model = DensityModel::from_trace(&trace, &opts, &mut rng).unwrap();
        let n = 50_000;
        let mut mean = [0.0; 2];
        let mut sq = 0.0;
        for _ in 0..n {
            let x = model.sample(&mut rng).unwrap();
            mean[0] += x[0] / n as f64;
            mean[1] += x[1] / n as f64;
            sq += ((x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2)) / n as f64;
        }
        // E[x] = c (tau = 0), E||x-c||^2 = r^2 + d sigma^2
        assert!((mean[0] - 1.0).abs() < 0.03, "{:?}", mean);
        assert!((mean[1] + 0.5).abs() < 0.03, "{:?}", mean);
        assert!((sq - (4.0 + 2.0 * 0.01)).abs() < 0.05, "sq = {sq}");
    }

    #[test]
    fn new_sphere_term_adds_mass_where_occupied_blocks_have_none() {
        let sphere = unit_sphere_block(vec![0.0, 0.0], 1.0, 5.0);
        let st = toy_state(0, vec![sphere], vec![0; 5], 0.01);
        let trace = toy_trace(vec![st], 5, 2);
        let far = [30.0, 30.0];
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let without = DensityModel::from_trace(
            &trace,
            &PredictiveOptions {
                include_new_sphere: false,
                n_prior_draws: 0,
            },
            &mut rng,
        )
        .unwrap();
        let with = DensityModel::from_trace(&trace, &PredictiveOptions::default(), &mut rng)
            .unwrap();
        assert!(with.logpdf(&far).unwrap().0 >= without.logpdf(&far).unwrap().0 - 1e-9);
        assert_eq!(
            with.n_components(),
            without.n_components() + 100,
            "fresh-sphere Monte Carlo draws missing"
        );
    }

    #[test]
    fn classifier_argmax_and_tie_break() {
        let m1 = {
            let sphere = unit_sphere_block(vec![0.0, 0.0], 1.0, 0.0);
            let st = toy_state(0, vec![sphere], vec![0; 10], 0.05);
            let trace = toy_trace(vec![st], 10, 2);
            let mut rng = ChaCha12Rng::seed_from_u64(6);
            DensityModel::from_trace(
                &trace,
                &PredictiveOptions {
                    include_new_sphere: false,
                    n_prior_draws: 0,
                },
                &mut rng,
            )
            .unwrap()
        };
        let m2 = {
            let sphere = unit_sphere_block(vec![5.0, 0.0], 1.0, 0.0);
            let st = toy_state(0, vec![sphere], vec![0; 10], 0.05);
            let trace = toy_trace(vec![st], 10, 2);
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            DensityModel::from_trace(
                &trace,
                &PredictiveOptions {
                    include_new_sphere: false,
                    n_prior_draws: 0,
                },
                &mut rng,
            )
            .unwrap()
        };
        let clf = Classifier::new(vec![m1.clone(), m2], &[10, 10]).unwrap();
        assert_eq!(clf.classify(&[1.0, 0.0]).unwrap(), 0);
        assert_eq!(clf.classify(&[4.0, 0.0]).unwrap(), 1);
        // identical models: tie resolves to class 0
        let tie = Classifier::new(vec![m1.clone(), m1], &[10, 10]).unwrap();
        assert_eq!(tie.classify(&[1.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn classifier_priors_reflect_class_counts() {
        let model = {
            let sphere = unit_sphere_block(vec![0.0, 0.0], 1.0, 0.0);
            let st = toy_state(0, vec![sphere], vec![0; 4], 0.05);
            let trace = toy_trace(vec![st], 4, 2);
            let mut rng = ChaCha12Rng::seed_from_u64(8);
            DensityModel::from_trace(
                &trace,
                &PredictiveOptions {
                    include_new_sphere: false,
                    n_prior_draws: 0,
                },
                &mut rng,
            )
            .unwrap()
        };
        let clf = Classifier::new(vec![model.clone(), model], &[30, 10]).unwrap();
        assert!((clf.log_priors[0] - 0.75f64.ln()).abs() < 1e-14);
        assert!((clf.log_priors[1] - 0.25f64.ln()).abs() < 1e-14);
        // identical densities: the larger prior wins everywhere
        assert_eq!(clf.classify(&[0.3, 0.3]).unwrap(), 0);
    }
}
