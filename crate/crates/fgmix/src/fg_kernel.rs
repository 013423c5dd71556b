//! The Fisher-Gaussian density: closed-form log-density, generative
//! sampling, and the Gaussian sandwich bounds.

use crate::directional::{vmf_sample, VmfParams};
use crate::specfun::{log_cd, LogValue};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Parameters of one FG kernel: sphere center and radius, vMF location and
/// concentration on the sphere, and the isotropic noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgParams {
    pub center: Vec<f64>,
    pub radius: f64,
    pub vmf: VmfParams,
    pub sigma2: f64,
}

impl FgParams {
    /// `sigma2 = 0` is admitted for noiseless sampling; the density itself
    /// requires `sigma2 > 0`.
    pub fn new(center: Vec<f64>, radius: f64, vmf: VmfParams, sigma2: f64) -> Result<Self> {
        if center.len() != vmf.mu.dim() {
            return Err(Error::DimMismatch {
                expected: center.len(),
                got: vmf.mu.dim(),
            });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("radius {radius} must be positive")));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("sigma2 {sigma2} must be >= 0")));
        }
        Ok(FgParams {
            center,
            radius,
            vmf,
            sigma2,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// log FG density:
/// log C_d(tau) - log C_d(||tau mu + r (x - c) / sigma^2||)
///   - (d/2) log(2 pi sigma^2) - (||x - c||^2 + r^2) / (2 sigma^2).
pub fn fg_logpdf(x: &[f64], p: &FgParams) -> Result<LogValue> {
    if x.len() != p.dim() {
        return Err(Error::DimMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    Ok(LogValue(fg_logpdf_raw(
        x, &p.center, p.radius, &p.vmf, p.sigma2,
    )?))
}

/// Allocation-free form used by the sampler's hot loops.
pub(crate) fn fg_logpdf_raw(
    x: &[f64],
    center: &[f64],
    radius: f64,
    vmf: &VmfParams,
    sigma2: f64,
) -> Result<f64> {
    let d = center.len();
    if x.len() != d || vmf.mu.dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite input coordinate".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain("fg_logpdf requires sigma2 > 0".into()));
    }
    let tau = vmf.tau;
    let mu = vmf.mu.coords();
    let scale = radius / sigma2;
    let mut dist2 = 0.0;
    let mut kappa2 = 0.0;
    for i in 0..d {
        let diff = x[i] - center[i];
        dist2 += diff * diff;
        let w = tau * mu[i] + scale * diff;
        kappa2 += w * w;
    }
    let kappa = kappa2.sqrt();
    // the normalizer has a removable limit at kappa = 0
    let log_c_kappa = if kappa < 1e-12 {
        log_cd(d, 0.0)?.0
    } else {
        log_cd(d, kappa)?.0
    };
    let half_d = d as f64 / 2.0;
    Ok(log_cd(d, tau)?.0
        - log_c_kappa
        - half_d * (2.0 * std::f64::consts::PI * sigma2).ln()
        - (dist2 + radius * radius) / (2.0 * sigma2))
}

/// Generative draws: x = c + r y + eps with y ~ vMF and eps ~ N(0, sigma^2 I).
pub fn fg_sample<R: Rng + ?Sized>(p: &FgParams, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = p.dim();
    let sd = p.sigma2.sqrt();
    (0..n)
        .map(|_| {
            let y = vmf_sample(&p.vmf, rng);
            (0..d)
                .map(|i| {
                    let eps: f64 = rng.sample(StandardNormal);
                    p.center[i] + p.radius * y.coords()[i] + sd * eps
                })
                .collect()
        })
        .collect()
}

/// Gaussian envelope of the FG density (log scale):
/// lower = -(d/2) log(2 pi sigma^2) - (||x-c|| + r)^2 / (2 sigma^2)
/// upper = log 2 - (d/2) log(2 pi sigma^2) - (||x-c|| - r)^2 / (2 sigma^2),
/// each corrected by exp(-2 tau) / exp(2 tau) when d = 2.
pub fn fg_bounds(x: &[f64], p: &FgParams) -> Result<(LogValue, LogValue)> {
    let d = p.dim();
    if x.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let dist = x
        .iter()
        .zip(&p.center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let base = -(d as f64 / 2.0) * (2.0 * std::f64::consts::PI * p.sigma2).ln();
    let corr = if d == 2 { 2.0 * p.vmf.tau } else { 0.0 };
    let lower = base - (dist + p.radius).powi(2) / (2.0 * p.sigma2) - corr;
    let upper = base + std::f64::consts::LN_2 - (dist - p.radius).powi(2) / (2.0 * p.sigma2) + corr;
    Ok((LogValue(lower), LogValue(upper)))
}
