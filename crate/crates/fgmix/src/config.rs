//! Flat dotted-key run configuration.
//!
//! The config file is line-oriented: `key = value`, `#` comments, blank
//! lines ignored. Unknown keys are rejected so typos fail loudly.

use crate::model_state::Hyperparams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which synthetic dataset to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// euler_spiral | olympic_rings | torus | two_spirals
    pub name: String,
    pub n: usize,
    pub noise_sd: f64,
    pub noise_var: f64,
    pub big_r: f64,
    pub small_r: f64,
    pub n_per_class: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            name: String::new(),
            n: 500,
            noise_sd: 0.001,
            noise_var: 0.1,
            big_r: 3.0,
            small_r: 1.0,
            n_per_class: 100,
        }
    }
}

/// Everything a command run needs beyond the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub generator: GeneratorSpec,
    /// training data CSV (for fit/eval/classify)
    pub data_path: Option<String>,
    /// test data CSV (for eval/classify)
    pub test_path: Option<String>,
    /// trace file (for sample/eval)
    pub trace_path: Option<String>,
    /// model hyperparameters; the vMF prior direction is fixed at the
    /// dimension-appropriate default
    pub alpha: f64,
    pub j_aux: usize,
    pub m_kernels: usize,
    pub a0: f64,
    pub a: f64,
    pub b: f64,
    pub sigma_c2: f64,
    pub mu_r: f64,
    pub sigma_r2: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub tau_cap: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub save_latent: bool,
    /// evaluation options
    pub deltas: Vec<f64>,
    pub n_refs: usize,
    pub n_prior_draws: usize,
    pub include_new_sphere: bool,
    /// number of predictive draws for the sample command
    pub n_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = Hyperparams::default_for_dim(2);
        Self {
            generator: GeneratorSpec::default(),
            data_path: None,
            test_path: None,
            trace_path: None,
            alpha: h.alpha,
            j_aux: h.j_aux,
            m_kernels: h.m_kernels,
            a0: h.a0,
            a: h.a,
            b: h.b,
            sigma_c2: h.sigma_c2,
            mu_r: h.mu_r,
            sigma_r2: h.sigma_r2,
            a_sigma: h.a_sigma,
            b_sigma: h.b_sigma,
            tau_cap: h.tau_cap,
            n_iter: h.n_iter,
            burn_in: h.burn_in,
            thin: h.thin,
            chains: 1,
            save_latent: false,
            deltas: vec![0.02, 0.03],
            n_refs: 2000,
            n_prior_draws: 100,
            include_new_sphere: true,
            n_samples: 500,
        }
    }
}

impl RunConfig {
    /// Materializes the hyperparameter block for a given data dimension.
    pub fn hyperparams(&self, dim: usize) -> Result<Hyperparams> {
        let mut h = Hyperparams::default_for_dim(dim);
        h.alpha = self.alpha;
        h.j_aux = self.j_aux;
        h.m_kernels = self.m_kernels;
        h.a0 = self.a0;
        h.a = self.a;
        h.b = self.b;
        h.sigma_c2 = self.sigma_c2;
        h.mu_r = self.mu_r;
        h.sigma_r2 = self.sigma_r2;
        h.a_sigma = self.a_sigma;
        h.b_sigma = self.b_sigma;
        h.tau_cap = self.tau_cap;
        h.n_iter = self.n_iter;
        h.burn_in = self.burn_in;
        h.thin = self.thin;
        h.validate()?;
        Ok(h)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_flat(&text)
    }

    /// Parses the flat dotted-key format.
    pub fn from_str_flat(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: e.to_string(),
                })?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::Config(format!("invalid value `{value}` for key `{key}`"))
            })
        }
        match key {
            "generator.name" => self.generator.name = value.to_string(),
            "generator.n" => self.generator.n = num(key, value)?,
            "generator.noise_sd" => self.generator.noise_sd = num(key, value)?,
            "generator.noise_var" => self.generator.noise_var = num(key, value)?,
            "generator.R" => self.generator.big_r = num(key, value)?,
            "generator.r" => self.generator.small_r = num(key, value)?,
            "generator.n_per_class" => self.generator.n_per_class = num(key, value)?,
            "data.path" => self.data_path = Some(value.to_string()),
            "data.test_path" => self.test_path = Some(value.to_string()),
            "data.trace_path" => self.trace_path = Some(value.to_string()),
            "model.alpha" => self.alpha = num(key, value)?,
            "model.j_aux" => self.j_aux = num(key, value)?,
            "model.m_kernels" => self.m_kernels = num(key, value)?,
            "model.a0" => self.a0 = num(key, value)?,
            "model.a" => self.a = num(key, value)?,
            "model.b" => self.b = num(key, value)?,
            "model.sigma_c2" => self.sigma_c2 = num(key, value)?,
            "model.mu_r" => self.mu_r = num(key, value)?,
            "model.sigma_r2" => self.sigma_r2 = num(key, value)?,
            "model.a_sigma" => self.a_sigma = num(key, value)?,
            "model.b_sigma" => self.b_sigma = num(key, value)?,
            "model.tau_cap" => self.tau_cap = num(key, value)?,
            "mcmc.n_iter" => self.n_iter = num(key, value)?,
            "mcmc.burn_in" => self.burn_in = num(key, value)?,
            "mcmc.thin" => self.thin = num(key, value)?,
            "mcmc.chains" => self.chains = num(key, value)?,
            "mcmc.save_latent" => self.save_latent = num(key, value)?,
            "eval.deltas" => {
                self.deltas = value
                    .split(',')
                    .map(|v| num("eval.deltas", v.trim()))
                    .collect::<Result<_>>()?;
            }
            "eval.n_refs" => self.n_refs = num(key, value)?,
            "predictive.n_prior_draws" => self.n_prior_draws = num(key, value)?,
            "predictive.include_new_sphere" => self.include_new_sphere = num(key, value)?,
            "sample.n" => self.n_samples = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }
}
