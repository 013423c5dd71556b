//! Latent state of the two-layer FG mixture: per-sphere parameter blocks,
//! allocation labels, latent spherical coordinates, hyperparameters, and the
//! joint log-likelihood bookkeeping.

use crate::directional::{
    norm, uniform_sphere, vmf_logpdf, vmf_sample, TauPriorGrid, UnitVector, VmfParams,
};
use crate::specfun::LogValue;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// Parameters of one occupied sphere: center, radius, kernel weights, and
/// the M vMF kernels living on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereBlock {
    #[serde(rename = "c")]
    pub center: Vec<f64>,
    #[serde(rename = "r")]
    pub radius: f64,
    #[serde(rename = "pi")]
    pub weights: Vec<f64>,
    pub kernels: Vec<VmfParams>,
}

impl SphereBlock {
    pub fn n_kernels(&self) -> usize {
        self.kernels.len()
    }
}

/// Full latent state of one MCMC sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub spheres: Vec<SphereBlock>,
    /// sphere label s_i per observation
    pub sphere_labels: Vec<usize>,
    /// kernel label k_i per observation, in 0..M
    pub kernel_labels: Vec<usize>,
    /// latent spherical coordinate y_i per observation
    pub latent: Vec<UnitVector>,
    pub sigma2: f64,
}

impl ModelState {
    pub fn n_obs(&self) -> usize {
        self.sphere_labels.len()
    }

    /// Observation counts per sphere, n^l.
    pub fn sphere_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.spheres.len()];
        for &s in &self.sphere_labels {
            counts[s] += 1;
        }
        counts
    }

    /// Observation counts per kernel within sphere `l`, n^l_k.
    pub fn kernel_counts(&self, l: usize) -> Vec<usize> {
        let m = self.spheres[l].n_kernels();
        let mut counts = vec![0usize; m];
        for (&s, &k) in self.sphere_labels.iter().zip(&self.kernel_labels) {
            if s == l {
                counts[k] += 1;
            }
        }
        counts
    }

    /// Validates every structural invariant: label ranges, occupancy,
    /// simplex weights, positive scales, unit latent coordinates.
    pub fn check_consistency(&self) -> Result<()> {
        let n = self.n_obs();
        if self.kernel_labels.len() != n || self.latent.len() != n {
            return Err(Error::Inconsistent("label/latent length mismatch".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Inconsistent(format!("sigma2 {} <= 0", self.sigma2)));
        }
        let counts = self.sphere_counts();
        for (l, sphere) in self.spheres.iter().enumerate() {
            if counts[l] == 0 {
                return Err(Error::Inconsistent(format!("sphere {l} is empty")));
            }
            if !(sphere.radius > 0.0) {
                return Err(Error::Inconsistent(format!("radius of sphere {l} <= 0")));
            }
            let sum: f64 = sphere.weights.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || sphere.weights.iter().any(|&w| w < 0.0) {
                return Err(Error::Inconsistent(format!(
                    "weights of sphere {l} are not a simplex (sum {sum})"
                )));
            }
            if sphere.kernels.len() != sphere.weights.len() {
                return Err(Error::Inconsistent(format!(
                    "sphere {l}: {} kernels vs {} weights",
                    sphere.kernels.len(),
                    sphere.weights.len()
                )));
            }
        }
        for i in 0..n {
            if self.sphere_labels[i] >= self.spheres.len() {
                return Err(Error::Inconsistent(format!("s_{i} out of range")));
            }
            let m = self.spheres[self.sphere_labels[i]].n_kernels();
            if self.kernel_labels[i] >= m {
                return Err(Error::Inconsistent(format!("k_{i} out of range")));
            }
            let yn = norm(self.latent[i].coords());
            if (yn - 1.0).abs() > 1e-12 {
                return Err(Error::Inconsistent(format!("y_{i} norm {yn}")));
            }
        }
        Ok(())
    }
}

/// Fixed prior constants and run controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// DP concentration
    pub alpha: f64,
    /// number of auxiliary empty spheres per reassignment (Neal Alg. 8)
    pub j_aux: usize,
    /// number of vMF kernels per sphere
    pub m_kernels: usize,
    /// Dirichlet parameter for the kernel weights
    pub a0: f64,
    /// vMF conjugate-prior direction
    pub mu0: UnitVector,
    /// vMF conjugate-prior exponent, a > b
    pub a: f64,
    /// vMF conjugate-prior linear coefficient, 0 < b < a
    pub b: f64,
    /// prior variance of sphere centers
    pub sigma_c2: f64,
    /// prior location of radii
    pub mu_r: f64,
    /// prior variance of radii
    pub sigma_r2: f64,
    /// inverse-gamma shape for sigma^2
    pub a_sigma: f64,
    /// inverse-gamma rate for sigma^2
    pub b_sigma: f64,
    /// cap for the concentration plug-in and prior grid
    pub tau_cap: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Hyperparams {
    /// Defaults for data of dimension `d`.
    pub fn default_for_dim(d: usize) -> Self {
        let mu0 = UnitVector::new(vec![1.0 / (d as f64).sqrt(); d]).expect("d >= 2");
        Hyperparams {
            alpha: 1.0,
            j_aux: 1,
            m_kernels: 10,
            a0: 1.0,
            mu0,
            a: 1.0,
            b: 0.1,
            sigma_c2: 1.0,
            mu_r: 1.0,
            sigma_r2: 25.0,
            a_sigma: 1.0,
            b_sigma: 0.01,
            tau_cap: 1e4,
            n_iter: 5000,
            burn_in: 2000,
            thin: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > self.b && self.b > 0.0) {
            return Err(Error::Config(format!(
                "need a > b > 0, got a={} b={}",
                self.a, self.b
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("a0", self.a0),
            ("sigma_c2", self.sigma_c2),
            ("sigma_r2", self.sigma_r2),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
            ("tau_cap", self.tau_cap),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.j_aux < 1 || self.m_kernels < 1 {
            return Err(Error::Config("J and M must be >= 1".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn_in {} must be < n_iter {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        Ok(())
    }
}

/// One recorded posterior snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceState {
    pub iter: usize,
    pub sigma2: f64,
    pub spheres: Vec<SphereBlock>,
    pub s: Vec<usize>,
    pub k: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<Vec<UnitVector>>,
}

/// Thinned post-burn-in sequence of snapshots; the posterior representation
/// consumed by prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub states: Vec<TraceState>,
    pub hyper: Hyperparams,
    pub seed: u64,
    pub n_obs: usize,
    pub dim: usize,
}

/// The DP base measure with the precomputed concentration-prior grid.
#[derive(Debug, Clone)]
pub struct BaseMeasure {
    pub dim: usize,
    pub hyper: Hyperparams,
    tau_grid: TauPriorGrid,
}

impl BaseMeasure {
    pub fn new(dim: usize, hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        if hyper.mu0.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: hyper.mu0.dim(),
            });
        }
        let tau_grid = TauPriorGrid::new(dim, hyper.a, hyper.b, hyper.tau_cap)?;
        Ok(BaseMeasure {
            dim,
            hyper,
            tau_grid,
        })
    }

    pub fn tau_grid(&self) -> &TauPriorGrid {
        &self.tau_grid
    }
}

/// Positive-truncated normal draw. Plain rejection from the untruncated
/// normal when mu/sigma > -4, translated-exponential rejection (Robert 1995)
/// in the deep tail.
pub fn sample_truncated_normal_positive<R: Rng + ?Sized>(
    mu: f64,
    sigma: f64,
    rng: &mut R,
) -> f64 {
    if mu / sigma > -4.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = mu + sigma * z;
            if x > 0.0 {
                return x;
            }
        }
    }
    // sample z ~ N(0,1 | z > alpha) with alpha = -mu/sigma, map back
    let alpha = -mu / sigma;
    let lambda = (alpha + (alpha * alpha + 4.0).sqrt()) / 2.0;
    loop {
        let e: f64 = rng.gen::<f64>();
        let z = alpha - e.ln() / lambda;
        let u: f64 = rng.gen();
        if u.ln() <= -(z - lambda) * (z - lambda) / 2.0 {
            return mu + sigma * z;
        }
    }
}

/// Dirichlet draw via normalized gammas.
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut draws: Vec<f64> = alphas
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("alpha > 0").sample(rng))
            .collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            for v in draws.iter_mut() {
                *v /= sum;
            }
            // exact renormalization keeps the 1e-12 simplex invariant
            let s: f64 = draws.iter().sum();
            let last = draws.len() - 1;
            draws[last] += 1.0 - s;
            if draws[last] >= 0.0 {
                return draws;
            }
        }
    }
}

/// Dirichlet(a0, ..., a0) draw of length m.
pub fn sample_symmetric_dirichlet<R: Rng + ?Sized>(a0: f64, m: usize, rng: &mut R) -> Vec<f64> {
    sample_dirichlet(&vec![a0; m], rng)
}

/// Draws a complete sphere block from the base measure:
/// c ~ N(0, sigma_c^2 I), r ~ N_+(mu_r, sigma_r^2), pi ~ Dir(a0),
/// tau_k from the marginal prior grid, mu_k | tau_k ~ vMF(mu0, b tau_k).
pub fn draw_sphere_from_base<R: Rng + ?Sized>(base: &BaseMeasure, rng: &mut R) -> SphereBlock {
    let h = &base.hyper;
    let sd_c = h.sigma_c2.sqrt();
    let center: Vec<f64> = (0..base.dim)
        .map(|_| sd_c * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let radius = sample_truncated_normal_positive(h.mu_r, h.sigma_r2.sqrt(), rng);
    let weights = sample_symmetric_dirichlet(h.a0, h.m_kernels, rng);
    let kernels = (0..h.m_kernels)
        .map(|_| {
            let tau = base.tau_grid.sample(rng);
            let prior = VmfParams::new(h.mu0.clone(), h.b * tau).expect("valid prior");
            let mu = if h.b * tau < 1e-10 {
                uniform_sphere(base.dim, rng)
            } else {
                vmf_sample(&prior, rng)
            };
            VmfParams::new(mu, tau).expect("valid kernel")
        })
        .collect();
    SphereBlock {
        center,
        radius,
        weights,
        kernels,
    }
}

/// Joint log-likelihood of the data given the full latent state:
/// sum_i log phi_{sigma^2}(x_i - c_{s_i} - r_{s_i} y_i)
///   + sum_i log vMF(y_i | kernel of (s_i, k_i)).
pub fn joint_data_loglik(state: &ModelState, data: &[Vec<f64>]) -> Result<LogValue> {
    let n = state.n_obs();
    if data.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: data.len(),
        });
    }
    state.check_consistency()?;
    let d = if n > 0 { data[0].len() } else { 0 };
    let mut total = 0.0;
    let log_norm = -(d as f64 / 2.0) * (2.0 * std::f64::consts::PI * state.sigma2).ln();
    for i in 0..n {
        let sphere = &state.spheres[state.sphere_labels[i]];
        let y = &state.latent[i];
        let mut resid2 = 0.0;
        for j in 0..d {
            let r = data[i][j] - sphere.center[j] - sphere.radius * y.coords()[j];
            resid2 += r * r;
        }
        total += log_norm - resid2 / (2.0 * state.sigma2);
        total += vmf_logpdf(y, &sphere.kernels[state.kernel_labels[i]])?.0;
    }
    Ok(LogValue(total))
}

/// Overdispersed initialization: random assignment to ceil(sqrt(n)) spheres,
/// centers at cluster means, radii at mean distances, latent coordinates by
/// radial projection, kernel labels uniform, sigma^2 = b_sigma / a_sigma.
pub fn init_state<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    base: &BaseMeasure,
    rng: &mut R,
) -> Result<ModelState> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Domain("need at least 2 observations".into()));
    }
    let d = data[0].len();
    if d < 2 || data.iter().any(|x| x.len() != d) {
        return Err(Error::Domain("data must be n x d with d >= 2".into()));
    }
    let h = &base.hyper;
    let n_init = (n as f64).sqrt().ceil() as usize;
    // random assignment, then drop empty clusters
    let raw: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_init)).collect();
    let mut remap = vec![usize::MAX; n_init];
    let mut next = 0usize;
    let mut sphere_labels = vec![0usize; n];
    for (i, &c) in raw.iter().enumerate() {
        if remap[c] == usize::MAX {
            remap[c] = next;
            next += 1;
        }
        sphere_labels[i] = remap[c];
    }
    let n_spheres = next;
    let mut spheres = Vec::with_capacity(n_spheres);
    let mut latent: Vec<Option<UnitVector>> = vec![None; n];
    for l in 0..n_spheres {
        let members: Vec<usize> = (0..n).filter(|&i| sphere_labels[i] == l).collect();
        let mut center = vec![0.0; d];
        for &i in &members {
            for (c, x) in center.iter_mut().zip(&data[i]) {
                *c += x / members.len() as f64;
            }
        }
        let mut radius = 0.0;
        for &i in &members {
            let diff: Vec<f64> = data[i].iter().zip(&center).map(|(x, c)| x - c).collect();
            radius += norm(&diff) / members.len() as f64;
        }
        if !(radius > 1e-8) {
            radius = h.mu_r.max(1e-3);
        }
        for &i in &members {
            let diff: Vec<f64> = data[i].iter().zip(&center).map(|(x, c)| x - c).collect();
            latent[i] = Some(match UnitVector::new(diff) {
                Ok(u) => u,
                Err(_) => uniform_sphere(d, rng),
            });
        }
        // kernels and weights from the prior
        let proto = draw_sphere_from_base(base, rng);
        spheres.push(SphereBlock {
            center,
            radius,
            weights: proto.weights,
            kernels: proto.kernels,
        });
    }
    let kernel_labels = (0..n).map(|_| rng.gen_range(0..h.m_kernels)).collect();
    let state = ModelState {
        spheres,
        sphere_labels,
        kernel_labels,
        latent: latent.into_iter().map(|y| y.expect("assigned")).collect(),
        sigma2: h.b_sigma / h.a_sigma,
    };
    state.check_consistency()?;
    Ok(state)
}
