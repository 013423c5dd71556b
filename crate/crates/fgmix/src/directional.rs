//! von Mises-Fisher distribution on the unit (d-1)-sphere: density, exact
//! sampling, conjugate-prior arithmetic, and the concentration plug-in.

use crate::specfun::{log_bessel_i, log_cd, LogValue};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const UNIT_TOL: f64 = 1e-12;

/// A point on the unit sphere, ||coords|| = 1 within 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `coords` onto the unit sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain("unit vector needs d >= 2".into()));
        }
        let norm = norm(&coords);
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::Domain("cannot normalize zero/non-finite vector".into()));
        }
        Ok(UnitVector(coords.iter().map(|c| c / norm).collect()))
    }

    /// Wraps coordinates that are already unit-norm.
    pub fn from_unit(coords: Vec<f64>) -> Result<Self> {
        let norm = norm(&coords);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain(format!("vector norm {norm} is not 1")));
        }
        Ok(UnitVector(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, other.0.as_slice())
    }

    /// Canonical first basis vector e1.
    pub fn e1(d: usize) -> Self {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        UnitVector(v)
    }
}

/// vMF parameters: mean direction and concentration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmfParams {
    pub mu: UnitVector,
    pub tau: f64,
}

impl VmfParams {
    pub fn new(mu: UnitVector, tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::Domain(format!("vMF concentration {tau} invalid")));
        }
        Ok(VmfParams { mu, tau })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// log vMF density w.r.t. the surface measure:
/// log C_d(tau) + tau <mu, y>.
pub fn vmf_logpdf(y: &UnitVector, p: &VmfParams) -> Result<LogValue> {
    if y.dim() != p.mu.dim() {
        return Err(Error::DimMismatch {
            expected: p.mu.dim(),
            got: y.dim(),
        });
    }
    let d = y.dim();
    Ok(LogValue(log_cd(d, p.tau)?.0 + p.tau * y.dot(&p.mu)))
}

/// Uniform draw on the unit (d-1)-sphere.
pub fn uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitVector {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = UnitVector::new(v) {
            return u;
        }
    }
}

/// Exact vMF draw via Wood's rejection scheme for the component along mu,
/// a uniform sub-sphere direction for the orthogonal part, and a Householder
/// reflection taking e1 to mu.
pub fn vmf_sample<R: Rng + ?Sized>(p: &VmfParams, rng: &mut R) -> UnitVector {
    let d = p.mu.dim();
    if p.tau < 1e-10 {
        return uniform_sphere(d, rng);
    }
    let t = sample_tangent_component(p.tau, d, rng);
    // uniform direction in the (d-1)-dim orthogonal complement, e1-frame
    let mut y = vec![0.0; d];
    y[0] = t;
    let scale = (1.0 - t * t).max(0.0).sqrt();
    if d == 2 {
        y[1] = if rng.gen::<bool>() { scale } else { -scale };
    } else {
        let v = uniform_sphere(d - 1, rng);
        for (yi, vi) in y[1..].iter_mut().zip(v.coords()) {
            *yi = scale * vi;
        }
    }
    // reflect e1 onto mu
    let mu = p.mu.coords();
    let mut u: Vec<f64> = mu.to_vec();
    u[0] -= 1.0;
    let un = norm(&u);
    if un > 1e-12 {
        let proj = 2.0 * dot(&u, &y) / (un * un);
        for (yi, ui) in y.iter_mut().zip(&u) {
            *yi -= proj * ui;
        }
    }
    // renormalize to keep the 1e-12 unit-norm invariant under rounding
    UnitVector::new(y).expect("vMF draw has positive norm")
}

/// Wood (1994) rejection sampler for t = <mu, y>.
fn sample_tangent_component<R: Rng + ?Sized>(tau: f64, d: usize, rng: &mut R) -> f64 {
    let dm1 = (d - 1) as f64;
    let b = (-2.0 * tau + (4.0 * tau * tau + dm1 * dm1).sqrt()) / dm1;
    let x0 = (1.0 - b) / (1.0 + b);
    let c = tau * x0 + dm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(dm1 / 2.0, dm1 / 2.0).expect("valid Beta parameters");
    loop {
        let z: f64 = beta.sample(rng);
        let t = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.gen::<f64>();
        if tau * t + dm1 * (1.0 - x0 * t).ln() - c >= u.ln() {
            return t;
        }
    }
}

/// Result of the maximum-likelihood concentration plug-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauPlugin {
    pub tau: f64,
    pub capped: bool,
}

/// Approximate ML estimate tau_hat = t_bar (d - t_bar) / (1 - t_bar^2) from
/// the mean resultant length, capped at `tau_cap` near the singular limit.
pub fn vmf_tau_plugin(resultant_mean_length: f64, d: usize, tau_cap: f64) -> TauPlugin {
    let t = resultant_mean_length;
    if t >= 1.0 {
        return TauPlugin {
            tau: tau_cap,
            capped: true,
        };
    }
    let tau = t * (d as f64 - t) / (1.0 - t * t);
    if tau > tau_cap {
        TauPlugin {
            tau: tau_cap,
            capped: true,
        }
    } else {
        TauPlugin { tau, capped: false }
    }
}

/// Conjugate vMF posterior for the mean direction given the concentration:
/// w = tau (b mu0 + sum_i y_i), posterior = vMF(w/||w||, ||w||).
pub fn vmf_conjugate_posterior(
    mu0: &UnitVector,
    b: f64,
    tau: f64,
    data_sum: &[f64],
) -> Result<VmfParams> {
    if data_sum.len() != mu0.dim() {
        return Err(Error::DimMismatch {
            expected: mu0.dim(),
            got: data_sum.len(),
        });
    }
    let w: Vec<f64> = mu0
        .coords()
        .iter()
        .zip(data_sum)
        .map(|(m0, s)| tau * (b * m0 + s))
        .collect();
    let wn = norm(&w);
    if wn < 1e-12 {
        // degenerate: uniform posterior
        return VmfParams::new(mu0.clone(), 0.0);
    }
    VmfParams::new(UnitVector::new(w)?, wn)
}

/// Inverse-CDF sampler for the marginal prior of the vMF concentration,
/// p(tau) propto [tau^{d/2-1} / I_{d/2-1}(tau)]^a exp(b tau), tabulated on a
/// log-spaced grid over (0, tau_cap].
#[derive(Debug, Clone)]
pub struct TauPriorGrid {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    log_density: Vec<f64>, // normalized log density at nodes
}

const TAU_GRID_NODES: usize = 2048;

impl TauPriorGrid {
    pub fn new(d: usize, a: f64, b: f64, tau_cap: f64) -> Result<Self> {
        if !(a > b && b > 0.0) {
            return Err(Error::Domain(format!("need a > b > 0, got a={a} b={b}")));
        }
        let nu = d as f64 / 2.0 - 1.0;
        let lo = (tau_cap * 1e-8).min(1e-4);
        let ratio = (tau_cap / lo).ln() / (TAU_GRID_NODES - 1) as f64;
        let nodes: Vec<f64> = (0..TAU_GRID_NODES)
            .map(|i| lo * (ratio * i as f64).exp())
            .collect();
        let mut logp = Vec::with_capacity(TAU_GRID_NODES);
        for &t in &nodes {
            let li = log_bessel_i(nu, t)?.0;
            logp.push(a * (nu * t.ln() - li) + b * t);
        }
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // trapezoid masses per cell
        let mut cdf = Vec::with_capacity(TAU_GRID_NODES);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 1..TAU_GRID_NODES {
            let h = nodes[i] - nodes[i - 1];
            acc += 0.5 * h * ((logp[i] - max).exp() + (logp[i - 1] - max).exp());
            cdf.push(acc);
        }
        let total = acc;
        for c in cdf.iter_mut() {
            *c /= total;
        }
        let log_total = total.ln() + max;
        let log_density = logp.iter().map(|lp| lp - log_total).collect();
        Ok(TauPriorGrid {
            nodes,
            cdf,
            log_density,
        })
    }

    /// Inverse-CDF draw with linear interpolation inside a grid cell.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let idx = match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&u).expect("finite cdf"))
        {
            Ok(i) => i,
            Err(i) => i,
        };
        if idx == 0 {
            return self.nodes[0];
        }
        let i = idx.min(self.nodes.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[i - 1] + frac * (self.nodes[i] - self.nodes[i - 1])
    }

    /// log of the (grid-normalized) prior density at `tau`, used when the
    /// grid serves as an MH independence proposal.
    pub fn log_pdf(&self, tau: f64) -> f64 {
        let n = self.nodes.len();
        if tau <= self.nodes[0] {
            return self.log_density[0];
        }
        if tau >= self.nodes[n - 1] {
            return self.log_density[n - 1];
        }
        let i = self
            .nodes
            .partition_point(|&x| x < tau)
            .clamp(1, n - 1);
        let (t0, t1) = (self.nodes[i - 1], self.nodes[i]);
        let frac = (tau - t0) / (t1 - t0);
        self.log_density[i - 1] * (1.0 - frac) + self.log_density[i] * frac
    }
}
