//! Seeded generators for the synthetic manifold datasets used in the
//! experiments: Euler spiral, Olympic rings, torus, and the two-spiral
//! classification problem.

use crate::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// A generated point cloud, optionally labeled, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    /// generator name and parameter string, for config echoes
    pub meta: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }
}

fn add_noise<R: Rng + ?Sized>(points: &mut [Vec<f64>], sd: f64, rng: &mut R) {
    if sd == 0.0 {
        return;
    }
    for p in points.iter_mut() {
        for x in p.iter_mut() {
            *x += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// Fresnel-type integrals (C(t), S(t)) = (int_0^t cos(s^2/2) ds,
/// int_0^t sin(s^2/2) ds), by composite Simpson's rule. The resulting curve
/// is unit-speed with curvature kappa(s) = s.
fn fresnel(t: f64) -> (f64, f64) {
    if t == 0.0 {
        return (0.0, 0.0);
    }
    let steps = ((t.abs() * 400.0).ceil() as usize).max(8) * 2;
    let h = t / steps as f64;
    let f = |s: f64| {
        let a = 0.5 * s * s;
        (a.cos(), a.sin())
    };
    let (mut c, mut s_acc) = (f(0.0).0 + f(t).0, f(0.0).1 + f(t).1);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        let (fc, fs) = f(i as f64 * h);
        c += w * fc;
        s_acc += w * fs;
    }
    (c * h / 3.0, s_acc * h / 3.0)
}

/// Euler spiral: a unit-speed planar curve whose curvature grows linearly
/// with arc length, sampled at arc-length-uniform parameters on [0, 4].
pub fn euler_spiral<R: Rng + ?Sized>(n: usize, noise_sd: f64, rng: &mut R) -> Result<Dataset> {
    let t_max = 4.0;
    let mut points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = if n == 1 {
                0.0
            } else {
                t_max * i as f64 / (n - 1) as f64
            };
            let (c, s) = fresnel(t);
            vec![c, s]
        })
        .collect();
    add_noise(&mut points, noise_sd, rng);
    Ok(Dataset {
        points,
        labels: None,
        meta: format!("euler_spiral n={n} noise_sd={noise_sd}"),
    })
}

/// Ring centers of the Olympic-rings dataset.
pub const RING_CENTERS: [[f64; 2]; 5] = [
    [0.0, 0.0],
    [2.125, 0.0],
    [4.25, 0.0],
    [1.125, -1.0],
    [3.25, -1.0],
];

/// Olympic rings: five unit circles, ring i contributing i*100 points,
/// labeled by ring index (0-based).
pub fn olympic_rings<R: Rng + ?Sized>(noise_sd: f64, rng: &mut R) -> Result<Dataset> {
    let mut points = Vec::with_capacity(1500);
    let mut labels = Vec::with_capacity(1500);
    for (ring, center) in RING_CENTERS.iter().enumerate() {
        for _ in 0..(ring + 1) * 100 {
            let th = rng.gen_range(0.0..TAU);
            points.push(vec![center[0] + th.cos(), center[1] + th.sin()]);
            labels.push(ring);
        }
    }
    add_noise(&mut points, noise_sd, rng);
    Ok(Dataset {
        points,
        labels: Some(labels),
        meta: format!("olympic_rings noise_sd={noise_sd}"),
    })
}

/// Torus with tube radius r around a circle of radius big_r, angles uniform,
/// plus isotropic Gaussian noise of variance noise_var.
pub fn torus<R: Rng + ?Sized>(
    n: usize,
    big_r: f64,
    r: f64,
    noise_var: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if !(big_r > r && r > 0.0) {
        return Err(crate::Error::Domain(format!(
            "torus needs R > r > 0, got R={big_r}, r={r}"
        )));
    }
    let mut points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let u = rng.gen_range(0.0..TAU);
            let v = rng.gen_range(0.0..TAU);
            vec![
                (big_r + r * v.cos()) * u.cos(),
                (big_r + r * v.cos()) * u.sin(),
                r * v.sin(),
            ]
        })
        .collect();
    add_noise(&mut points, noise_var.sqrt(), rng);
    Ok(Dataset {
        points,
        labels: None,
        meta: format!("torus n={n} R={big_r} r={r} noise_var={noise_var}"),
    })
}

/// Two interleaved Archimedean spirals; class 1 is class 0 rotated by pi.
/// The spirals meet only at the origin.
pub fn two_spirals<R: Rng + ?Sized>(
    n_per_class: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<Dataset> {
    let theta_max = 3.0 * PI;
    let scale = 2.0 / theta_max; // max radius 2
    let mut points = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2usize {
        let rot = class as f64 * PI;
        for i in 0..n_per_class {
            let th = if n_per_class == 1 {
                0.0
            } else {
                theta_max * i as f64 / (n_per_class - 1) as f64
            };
            let rho = scale * th;
            points.push(vec![rho * (th + rot).cos(), rho * (th + rot).sin()]);
            labels.push(class);
        }
    }
    add_noise(&mut points, noise_sd, rng);
    Ok(Dataset {
        points,
        labels: Some(labels),
        meta: format!("two_spirals n_per_class={n_per_class} noise_sd={noise_sd}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn euler_spiral_starts_at_origin_and_is_reproducible() {
        let d = euler_spiral(500, 0.001, &mut rng(1)).unwrap();
        let d2 = euler_spiral(500, 0.001, &mut rng(1)).unwrap();
        assert_eq!(d, d2);
        assert_eq!(d.n(), 500);
        let noiseless = euler_spiral(500, 0.0, &mut rng(1)).unwrap();
        assert!(noiseless.points[0][0].abs() < 1e-14);
        assert!(noiseless.points[0][1].abs() < 1e-14);
        assert!(d.points.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn euler_spiral_curvature_is_affine_in_arclength() {
        // finite-difference curvature against arc length: affine, R^2 > 0.999
        let d = euler_spiral(500, 0.0, &mut rng(2)).unwrap();
        let p = &d.points;
        let h = 4.0 / 499.0; // arc-length step of the parameter grid
        let mut xs = Vec::new();
        let mut ks = Vec::new();
        for i in 1..p.len() - 1 {
            let d1 = [
                (p[i + 1][0] - p[i - 1][0]) / (2.0 * h),
                (p[i + 1][1] - p[i - 1][1]) / (2.0 * h),
            ];
            let d2 = [
                (p[i + 1][0] - 2.0 * p[i][0] + p[i - 1][0]) / (h * h),
                (p[i + 1][1] - 2.0 * p[i][1] + p[i - 1][1]) / (h * h),
            ];
            let cross = d1[0] * d2[1] - d1[1] * d2[0];
            let speed2 = d1[0] * d1[0] + d1[1] * d1[1];
            xs.push(i as f64 * h);
            ks.push(cross / speed2.powf(1.5));
        }
        let n = xs.len() as f64;
        let (mx, mk) = (
            xs.iter().sum::<f64>() / n,
            ks.iter().sum::<f64>() / n,
        );
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxk: f64 = xs
            .iter()
            .zip(&ks)
            .map(|(x, k)| (x - mx) * (k - mk))
            .sum();
        let skk: f64 = ks.iter().map(|k| (k - mk) * (k - mk)).sum();
        let r2 = sxk * sxk / (sxx * skk);
        assert!(r2 > 0.999, "R^2 = {r2}");
        // slope ~ 1: curvature equals arc length
        let slope = sxk / sxx;
        assert!((slope - 1.0).abs() < 0.01, "slope = {slope}");
    }

    #[test]
    fn olympic_rings_counts_and_radii() {
        let d = olympic_rings(0.0, &mut rng(3)).unwrap();
        assert_eq!(d.n(), 1500);
        let labels = d.labels.as_ref().unwrap();
        let mut counts = [0usize; 5];
        for (&l, p) in labels.iter().zip(&d.points) {
            counts[l] += 1;
            let c = RING_CENTERS[l];
            let r = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert_eq!(counts, [100, 200, 300, 400, 500]);
    }

    #[test]
    fn olympic_rings_noisy_mean_radius() {
        let d = olympic_rings(0.01, &mut rng(4)).unwrap();
        let labels = d.labels.as_ref().unwrap();
        for ring in 0..5 {
            let rs: Vec<f64> = d
                .points
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == ring)
                .map(|(p, &l)| {
                    let c = RING_CENTERS[l];
                    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
                })
                .collect();
            let n = rs.len() as f64;
            let mean = rs.iter().sum::<f64>() / n;
            // noisy radius has mean 1 + O(noise^2) and sd ~ noise
            let se = 0.01 / n.sqrt();
            assert!((mean - 1.0).abs() < 3.0 * se + 1e-4, "ring {ring}: {mean}");
        }
    }

    #[test]
    fn torus_implicit_equation_and_moments() {
        let d = torus(100_000, 3.0, 1.0, 0.0, &mut rng(5)).unwrap();
        let mut mean_rho = 0.0;
        for p in &d.points {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let resid = (rho - 3.0).powi(2) + p[2] * p[2] - 1.0;
            assert!(resid.abs() < 1e-12);
            assert!(p[2].abs() <= 1.0 + 1e-12);
            mean_rho += rho / d.n() as f64;
        }
        // E[rho] = R + r E[cos v] = R; sd of cos v is 1/sqrt(2)
        let se = (0.5f64 / d.n() as f64).sqrt();
        assert!((mean_rho - 3.0).abs() < 3.0 * se, "{mean_rho}");
        assert!(torus(10, 1.0, 3.0, 0.0, &mut rng(5)).is_err());
    }

    #[test]
    fn two_spirals_rotation_symmetry() {
        let d = two_spirals(200, 0.0, &mut rng(6)).unwrap();
        assert_eq!(d.n(), 400);
        // class 1 = class 0 rotated by pi, i.e. negated coordinates
        for i in 0..200 {
            assert!((d.points[i][0] + d.points[200 + i][0]).abs() < 1e-12);
            assert!((d.points[i][1] + d.points[200 + i][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_spirals_classes_separate_away_from_origin() {
        let noise_sd = 0.02;
        let d = two_spirals(300, noise_sd, &mut rng(7)).unwrap();
        for i in 0..300 {
            let a = &d.points[i];
            // nearest cross-class distance
            let mut nn = f64::INFINITY;
            for j in 300..600 {
                let b = &d.points[j];
                let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                nn = nn.min(dist);
            }
            let radius = (a[0] * a[0] + a[1] * a[1]).sqrt();
            if nn < 2.0 * noise_sd {
                assert!(radius < 0.3, "close cross-class pair at radius {radius}");
            }
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        assert_eq!(
            olympic_rings(0.01, &mut rng(8)).unwrap(),
            olympic_rings(0.01, &mut rng(8)).unwrap()
        );
        assert_eq!(
            torus(50, 3.0, 1.0, 0.1, &mut rng(8)).unwrap(),
            torus(50, 3.0, 1.0, 0.1, &mut rng(8)).unwrap()
        );
        assert_eq!(
            two_spirals(50, 0.02, &mut rng(8)).unwrap(),
            two_spirals(50, 0.02, &mut rng(8)).unwrap()
        );
    }
}
