//! Metropolis-within-Gibbs sampler for the two-layer FG mixture.
//!
//! A sweep runs the six update steps in fixed order: sphere labels (Neal's
//! Algorithm 8 with J auxiliary blocks), centers, radii, kernel allocations
//! and weights, latent spherical coordinates, the noise variance, and the
//! vMF parameters (conjugate mean direction, independence-sampler
//! concentration).

use crate::directional::{norm, uniform_sphere, vmf_sample, UnitVector, VmfParams};
use crate::fg_kernel::fg_logpdf_raw;
use crate::model_state::{
    draw_sphere_from_base, init_state, joint_data_loglik, sample_dirichlet,
    sample_truncated_normal_positive, BaseMeasure, Hyperparams, ModelState, SphereBlock, Trace,
    TraceState,
};
use crate::specfun::{log_bessel_i, log_sum_exp};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// Per-sweep sampler diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub sweep: usize,
    pub n_spheres: usize,
    pub loglik: f64,
    /// acceptance indicator (0/1) of the concentration move, one entry per
    /// occupied sphere-kernel pair in (l, k) order
    pub tau_accept: Vec<f64>,
}

/// Everything produced by one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub trace: Trace,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Mixture log-likelihood of a point under one sphere block:
/// logsumexp_k [ log pi_k + log FG(x | c, r, mu_k, tau_k) ].
pub fn sphere_mixture_loglik(x: &[f64], sphere: &SphereBlock, sigma2: f64) -> Result<f64> {
    let mut terms = Vec::with_capacity(sphere.n_kernels());
    for (w, kernel) in sphere.weights.iter().zip(&sphere.kernels) {
        let lw = if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
        terms.push(lw + fg_logpdf_raw(x, &sphere.center, sphere.radius, kernel, sigma2)?);
    }
    Ok(log_sum_exp(&terms))
}

/// Unnormalized log allocation weights for one observation: each candidate
/// carries its prior mass (n_{-i}^l for occupied spheres, alpha/J for the
/// auxiliary blocks) and its block.
pub fn sphere_allocation_log_weights(
    x: &[f64],
    candidates: &[(f64, &SphereBlock)],
    sigma2: f64,
) -> Result<Vec<f64>> {
    candidates
        .iter()
        .map(|(prior, sphere)| {
            let lp = if *prior > 0.0 {
                prior.ln()
            } else {
                f64::NEG_INFINITY
            };
            Ok(lp + sphere_mixture_loglik(x, sphere, sigma2)?)
        })
        .collect()
}

/// Draws an index proportional to exp(log_weights); None if all weights
/// are -inf or non-finite.
fn sample_categorical_log<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let weights: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return Some(i);
        }
    }
    Some(weights.len() - 1)
}

/// Step 1: resample every sphere label with Neal's Algorithm 8. Auxiliary
/// blocks are refreshed per observation; if unassigning an observation
/// empties its sphere, the removed block occupies the first auxiliary slot.
pub fn update_sphere_labels<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &[Vec<f64>],
    base: &BaseMeasure,
    rng: &mut R,
) -> Result<()> {
    let n = state.n_obs();
    let j_aux = base.hyper.j_aux;
    let mut counts = state.sphere_counts();
    for i in 0..n {
        let li = state.sphere_labels[i];
        counts[li] -= 1;
        let mut recycled: Option<SphereBlock> = None;
        if counts[li] == 0 {
            recycled = Some(state.spheres.remove(li));
            counts.remove(li);
            for s in state.sphere_labels.iter_mut() {
                if *s > li {
                    *s -= 1;
                }
            }
        }
        let mut fresh: Vec<SphereBlock> = Vec::with_capacity(j_aux);
        if let Some(block) = recycled {
            fresh.push(block);
        }
        while fresh.len() < j_aux {
            fresh.push(draw_sphere_from_base(base, rng));
        }
        let n_occ = state.spheres.len();
        let mut candidates: Vec<(f64, &SphereBlock)> = Vec::with_capacity(n_occ + j_aux);
        for (l, sphere) in state.spheres.iter().enumerate() {
            candidates.push((counts[l] as f64, sphere));
        }
        let aux_mass = base.hyper.alpha / j_aux as f64;
        for block in &fresh {
            candidates.push((aux_mass, block));
        }
        let logw = sphere_allocation_log_weights(&data[i], &candidates, state.sigma2)?;
        let choice = match sample_categorical_log(&logw, rng) {
            Some(c) => c,
            None => {
                // all likelihoods underflowed: fall back to the prior masses
                log::warn!("degenerate allocation weights for observation {i}; using prior masses");
                let prior_logw: Vec<f64> = candidates
                    .iter()
                    .map(|(p, _)| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                    .collect();
                sample_categorical_log(&prior_logw, rng)
                    .ok_or_else(|| Error::Inconsistent("no allocation candidates".into()))?
            }
        };
        if choice < n_occ {
            state.sphere_labels[i] = choice;
            counts[choice] += 1;
        } else {
            let block = fresh.swap_remove(choice - n_occ);
            state.spheres.push(block);
            counts.push(1);
            state.sphere_labels[i] = n_occ;
        }
    }
    Ok(())
}

/// Conditional posterior (mean, variance) of sphere center l.
pub fn center_posterior(
    state: &ModelState,
    data: &[Vec<f64>],
    hyper: &Hyperparams,
    l: usize,
) -> (Vec<f64>, f64) {
    let d = data[0].len();
    let sphere = &state.spheres[l];
    let mut n_l = 0usize;
    let mut sum = vec![0.0; d];
    for i in 0..state.n_obs() {
        if state.sphere_labels[i] == l {
            n_l += 1;
            let y = state.latent[i].coords();
            for j in 0..d {
                sum[j] += data[i][j] - sphere.radius * y[j];
            }
        }
    }
    let var = 1.0 / (n_l as f64 / state.sigma2 + 1.0 / hyper.sigma_c2);
    let mean = sum.iter().map(|s| var * s / state.sigma2).collect();
    (mean, var)
}

/// Step 2a: Gaussian update of every sphere center.
pub fn update_centers<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &[Vec<f64>],
    hyper: &Hyperparams,
    rng: &mut R,
) {
    for l in 0..state.spheres.len() {
        let (mean, var) = center_posterior(state, data, hyper, l);
        let sd = var.sqrt();
        state.spheres[l].center = mean
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
    }
}

/// Conditional posterior (location, scale^2) of sphere radius l.
pub fn radius_posterior(
    state: &ModelState,
    data: &[Vec<f64>],
    hyper: &Hyperparams,
    l: usize,
) -> (f64, f64) {
    let sphere = &state.spheres[l];
    let mut n_l = 0usize;
    let mut proj = 0.0;
    for i in 0..state.n_obs() {
        if state.sphere_labels[i] == l {
            n_l += 1;
            let y = state.latent[i].coords();
            for j in 0..data[0].len() {
                proj += y[j] * (data[i][j] - sphere.center[j]);
            }
        }
    }
    let var = 1.0 / (n_l as f64 / state.sigma2 + 1.0 / hyper.sigma_r2);
    let mean = var * (hyper.mu_r / hyper.sigma_r2 + proj / state.sigma2);
    (mean, var)
}

/// Step 2b: positive-truncated Gaussian update of every radius.
pub fn update_radii<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &[Vec<f64>],
    hyper: &Hyperparams,
    rng: &mut R,
) {
    for l in 0..state.spheres.len() {
        let (mean, var) = radius_posterior(state, data, hyper, l);
        state.spheres[l].radius = sample_truncated_normal_positive(mean, var.sqrt(), rng);
    }
}

/// Unnormalized log weights of the kernel allocation of observation i.
pub fn kernel_allocation_log_weights(
    x: &[f64],
    sphere: &SphereBlock,
    sigma2: f64,
) -> Result<Vec<f64>> {
    sphere
        .weights
        .iter()
        .zip(&sphere.kernels)
        .map(|(w, kernel)| {
            let lw = if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
            Ok(lw + fg_logpdf_raw(x, &sphere.center, sphere.radius, kernel, sigma2)?)
        })
        .collect()
}

/// Step 3a: categorical update of every kernel label.
pub fn update_kernel_allocations<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &[Vec<f64>],
    rng: &mut R,
) -> Result<()> {
    for i in 0..state.n_obs() {
        let sphere = &state.spheres[state.sphere_labels[i]];
        let logw = kernel_allocation_log_weights(&data[i], sphere, state.sigma2)?;
        let choice = match sample_categorical_log(&logw, rng) {
            Some(c) => c,
            None => {
                let prior: Vec<f64> = sphere.weights.iter().map(|w| w.ln()).collect();
                sample_categorical_log(&prior, rng)
                    .ok_or_else(|| Error::Inconsistent("degenerate kernel weights".into()))?
            }
        };
        state.kernel_labels[i] = choice;
    }
    Ok(())
}

/// Step 3b: Dirichlet(a0 + n^l_1, ..., a0 + n^l_M) update of the kernel
/// weights of every sphere.
pub fn update_kernel_weights<R: Rng + ?Sized>(
    state: &mut ModelState,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    for l in 0..state.spheres.len() {
        let counts = state.kernel_counts(l);
        let alphas: Vec<f64> = counts.iter().map(|&c| hyper.a0 + c as f64).collect();
        state.spheres[l].weights = sample_dirichlet(&alphas, rng);
    }
}

/// Conditional vMF posterior of the latent spherical coordinate y_i.
pub fn latent_posterior(state: &ModelState, data: &[Vec<f64>], i: usize) -> Result<VmfParams> {
    let sphere = &state.spheres[state.sphere_labels[i]];
    let kernel = &sphere.kernels[state.kernel_labels[i]];
    let d = data[0].len();
    let scale = sphere.radius / state.sigma2;
    let v: Vec<f64> = (0..d)
        .map(|j| scale * (data[i][j] - sphere.center[j]) + kernel.tau * kernel.mu.coords()[j])
        .collect();
    let tau_post = norm(&v);
    if tau_post < 1e-12 {
        // uniform limit
        return VmfParams::new(kernel.mu.clone(), 0.0);
    }
    VmfParams::new(UnitVector::new(v)?, tau_post)
}

/// Step 4: vMF update of every latent spherical coordinate.
pub fn update_latent_y<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &[Vec<f64>],
    rng: &mut R,
) -> Result<()> {
    for i in 0..state.n_obs() {
        let post = latent_posterior(state, data, i)?;
        state.latent[i] = vmf_sample(&post, rng);
    }
    Ok(())
}

/// Inverse-gamma posterior (shape, rate) of the noise variance.
pub fn sigma2_posterior(state: &ModelState, data: &[Vec<f64>], hyper: &Hyperparams) -> (f64, f64) {
    let n = state.n_obs();
    let d = data[0].len();
    let mut ssq = 0.0;
    for i in 0..n {
        let sphere = &state.spheres[state.sphere_labels[i]];
        let y = state.latent[i].coords();
        for j in 0..d {
            let r = data[i][j] - sphere.center[j] - sphere.radius * y[j];
            ssq += r * r;
        }
    }
    (
        hyper.a_sigma + (n * d) as f64 / 2.0,
        hyper.b_sigma + 0.5 * ssq,
    )
}

/// Step 5: inverse-gamma update of sigma^2.
pub fn update_sigma2<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &[Vec<f64>],
    hyper: &Hyperparams,
    rng: &mut R,
) {
    let (shape, rate) = sigma2_posterior(state, data, hyper);
    let g = Gamma::new(shape, 1.0 / rate).expect("valid inverse-gamma parameters");
    state.sigma2 = 1.0 / g.sample(rng);
}

/// Step 6a: conjugate vMF update of every kernel mean direction.
pub fn update_vmf_mu<R: Rng + ?Sized>(
    state: &mut ModelState,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    let d = hyper.mu0.dim();
    for l in 0..state.spheres.len() {
        for k in 0..state.spheres[l].n_kernels() {
            let mut data_sum = vec![0.0; d];
            for i in 0..state.n_obs() {
                if state.sphere_labels[i] == l && state.kernel_labels[i] == k {
                    for (s, c) in data_sum.iter_mut().zip(state.latent[i].coords()) {
                        *s += c;
                    }
                }
            }
            let tau = state.spheres[l].kernels[k].tau;
            let post = crate::directional::vmf_conjugate_posterior(
                &hyper.mu0, hyper.b, tau, &data_sum,
            )?;
            let mu = if post.tau < 1e-10 {
                uniform_sphere(d, rng)
            } else {
                vmf_sample(&post, rng)
            };
            state.spheres[l].kernels[k].mu = mu;
        }
    }
    Ok(())
}

/// log of the unnormalized conditional posterior of a kernel concentration:
/// (a + n^l_k)(nu log tau - log I_nu(tau)) + tau * (b mu0 + sum y_i)' mu.
pub fn tau_log_target(d: usize, exponent: f64, linear_coef: f64, tau: f64) -> Result<f64> {
    if tau <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nu = d as f64 / 2.0 - 1.0;
    let li = log_bessel_i(nu, tau)?.0;
    Ok(exponent * (nu * tau.ln() - li) + linear_coef * tau)
}

/// Step 6b: independence-sampler Metropolis-Hastings update of every kernel
/// concentration. The proposal is Gamma(shape 2, rate 2/tau_hat) with
/// tau_hat the ML plug-in from that kernel's members; empty kernels propose
/// from the marginal prior grid instead. Returns one 0/1 acceptance
/// indicator per (l, k) pair.
pub fn update_vmf_tau<R: Rng + ?Sized>(
    state: &mut ModelState,
    base: &BaseMeasure,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let hyper = &base.hyper;
    let d = hyper.mu0.dim();
    let mut accepts = Vec::new();
    for l in 0..state.spheres.len() {
        for k in 0..state.spheres[l].n_kernels() {
            let mut y_sum = vec![0.0; d];
            let mut n_k = 0usize;
            for i in 0..state.n_obs() {
                if state.sphere_labels[i] == l && state.kernel_labels[i] == k {
                    n_k += 1;
                    for (s, c) in y_sum.iter_mut().zip(state.latent[i].coords()) {
                        *s += c;
                    }
                }
            }
            let kernel = &state.spheres[l].kernels[k];
            let mu = kernel.mu.coords();
            let linear_coef = (0..d)
                .map(|j| (hyper.b * hyper.mu0.coords()[j] + y_sum[j]) * mu[j])
                .sum::<f64>();
            let exponent = hyper.a + n_k as f64;
            let tau_cur = kernel.tau;

            let resultant = if n_k > 0 { norm(&y_sum) / n_k as f64 } else { 0.0 };
            let plugin = crate::directional::vmf_tau_plugin(resultant, d, hyper.tau_cap);

            let (tau_prop, log_q_prop, log_q_cur) = if n_k == 0 || plugin.tau <= 0.0 {
                let t = base.tau_grid().sample(rng);
                (t, base.tau_grid().log_pdf(t), base.tau_grid().log_pdf(tau_cur))
            } else {
                let rate = 2.0 / plugin.tau;
                let g = Gamma::new(2.0, 1.0 / rate).expect("valid gamma proposal");
                let t: f64 = g.sample(rng);
                let log_q = |x: f64| {
                    if x > 0.0 {
                        2.0 * rate.ln() + x.ln() - rate * x
                    } else {
                        f64::NEG_INFINITY
                    }
                };
                (t, log_q(t), log_q(tau_cur))
            };

            let log_ratio = tau_log_target(d, exponent, linear_coef, tau_prop)?
                - tau_log_target(d, exponent, linear_coef, tau_cur)?
                + log_q_cur
                - log_q_prop;
            let accept = log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio;
            if accept && tau_prop > 0.0 && tau_prop.is_finite() {
                state.spheres[l].kernels[k].tau = tau_prop;
                accepts.push(1.0);
            } else {
                accepts.push(0.0);
            }
        }
    }
    Ok(accepts)
}

/// One full sweep: Steps 1-6 in order.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &[Vec<f64>],
    base: &BaseMeasure,
    rng: &mut R,
) -> Result<Vec<f64>> {
    update_sphere_labels(state, data, base, rng)?;
    update_centers(state, data, &base.hyper, rng);
    update_radii(state, data, &base.hyper, rng);
    update_kernel_allocations(state, data, rng)?;
    update_kernel_weights(state, &base.hyper, rng);
    update_latent_y(state, data, rng)?;
    update_sigma2(state, data, &base.hyper, rng);
    update_vmf_mu(state, &base.hyper, rng)?;
    update_vmf_tau(state, base, rng)
}

/// Runs one chain from a fresh seeded RNG and records the thinned
/// post-burn-in trace.
pub fn run_chain(data: &[Vec<f64>], hyper: &Hyperparams, seed: u64) -> Result<ChainRun> {
    run_chain_opts(data, hyper, seed, false)
}

pub fn run_chain_opts(
    data: &[Vec<f64>],
    hyper: &Hyperparams,
    seed: u64,
    save_latent: bool,
) -> Result<ChainRun> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Domain("need n >= 2 observations".into()));
    }
    let d = data[0].len();
    if d < 2 {
        return Err(Error::Domain("need d >= 2".into()));
    }
    let base = BaseMeasure::new(d, hyper.clone())?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state = init_state(data, &base, &mut rng)?;
    let mut states = Vec::new();
    let mut diagnostics = Vec::with_capacity(hyper.n_iter);
    for s in 0..hyper.n_iter {
        let tau_accept = sweep(&mut state, data, &base, &mut rng)?;
        state.check_consistency()?;
        let loglik = joint_data_loglik(&state, data)?.0;
        if !loglik.is_finite() {
            log::error!(
                "sampler abort at sweep {s}; state dump: {}",
                serde_json::to_string(&state).unwrap_or_else(|_| "<unserializable>".into())
            );
            return Err(Error::SamplerAbort {
                sweep: s,
                reason: format!("non-finite joint log-likelihood {loglik}"),
            });
        }
        diagnostics.push(StepDiagnostics {
            sweep: s,
            n_spheres: state.spheres.len(),
            loglik,
            tau_accept,
        });
        if s >= hyper.burn_in && (s - hyper.burn_in) % hyper.thin == 0 {
            states.push(TraceState {
                iter: s,
                sigma2: state.sigma2,
                spheres: state.spheres.clone(),
                s: state.sphere_labels.clone(),
                k: state.kernel_labels.clone(),
                y: save_latent.then(|| state.latent.clone()),
            });
        }
    }
    Ok(ChainRun {
        trace: Trace {
            states,
            hyper: hyper.clone(),
            seed,
            n_obs: n,
            dim: d,
        },
        diagnostics,
    })
}
