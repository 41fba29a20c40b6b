//! Clean/contaminated segment separation: five amplitude statistics per
//! segment, standardized, projected to two principal components, and split
//! at the gate threshold that maximizes the Bhattacharyya distance.

use nalgebra::{Matrix2, SMatrix, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_GATING_SEGMENTS: usize = 10;
pub const FALLBACK_THETA: f64 = 0.5;

/// Each side of a candidate split needs at least this many segments for a
/// two-dimensional Gaussian fit.
const MIN_GROUP: usize = 3;

/// Diagonal loading for group covariances, relative to the mean variance of
/// the projected features.
const RIDGE_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub mean_power: f64,
    pub max_amplitude: f64,
    pub std: f64,
    /// Non-excess: a Gaussian gives 3.
    pub kurtosis: f64,
    pub skewness: f64,
    /// Set when some channel had zero variance and the moment rule applied.
    pub degenerate: bool,
}

impl SegmentStats {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.mean_power,
            self.max_amplitude,
            self.std,
            self.kurtosis,
            self.skewness,
        ]
    }
}

pub fn channel_stats(x: &[f64]) -> SegmentStats {
    let n = x.len().max(1) as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mean_power = x.iter().map(|v| v * v).sum::<f64>() / n;
    let max_amplitude = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let scale = mean_power.max(mean * mean);
    let degenerate = !(m2 > scale * 1e-24) || m2 == 0.0;
    let (kurtosis, skewness) = if degenerate {
        (3.0, 0.0)
    } else {
        (m4 / (m2 * m2), m3 / m2.powf(1.5))
    };
    SegmentStats {
        mean_power,
        max_amplitude,
        std: if degenerate { 0.0 } else { m2.sqrt() },
        kurtosis,
        skewness,
        degenerate,
    }
}

/// Statistics of each channel, averaged into one vector.
pub fn averaged_stats(channels: &[&[f64]]) -> SegmentStats {
    let per: Vec<SegmentStats> = channels.iter().map(|c| channel_stats(c)).collect();
    let k = per.len().max(1) as f64;
    let avg = |f: fn(&SegmentStats) -> f64| per.iter().map(f).sum::<f64>() / k;
    SegmentStats {
        mean_power: avg(|s| s.mean_power),
        max_amplitude: avg(|s| s.max_amplitude),
        std: avg(|s| s.std),
        kurtosis: avg(|s| s.kurtosis),
        skewness: avg(|s| s.skewness),
        degenerate: per.iter().any(|s| s.degenerate),
    }
}

/// Closed-form Bhattacharyya distance between two bivariate Gaussians.
pub fn bhattacharyya_gaussian(
    mu1: Vector2<f64>,
    cov1: Matrix2<f64>,
    mu2: Vector2<f64>,
    cov2: Matrix2<f64>,
) -> Result<f64> {
    let cov = (cov1 + cov2) * 0.5;
    let inv = cov
        .try_inverse()
        .ok_or_else(|| Error::Numeric("pooled covariance is singular".into()))?;
    let (d, d1, d2) = (cov.determinant(), cov1.determinant(), cov2.determinant());
    if !(d > 0.0 && d1 > 0.0 && d2 > 0.0) {
        return Err(Error::Numeric("covariance is not positive definite".into()));
    }
    let diff = mu1 - mu2;
    let mahal = (diff.transpose() * inv * diff)[0];
    Ok(mahal / 8.0 + 0.5 * (d.ln() - 0.5 * (d1.ln() + d2.ln())))
}

fn gaussian_fit(points: &[Vector2<f64>], ridge: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let n = points.len() as f64;
    let mu = points.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mut cov = points
        .iter()
        .fold(Matrix2::zeros(), |a, p| a + (p - mu) * (p - mu).transpose())
        / n;
    cov += Matrix2::identity() * ridge;
    (mu, cov)
}

/// Standardize the feature rows and project them onto the top two
/// principal axes. `None` when every feature is constant.
pub fn project_features(features: &[[f64; 5]]) -> Option<Vec<Vector2<f64>>> {
    let n = features.len() as f64;
    let mut mean = [0.0; 5];
    for f in features {
        for j in 0..5 {
            mean[j] += f[j] / n;
        }
    }
    let mut sd = [0.0; 5];
    for f in features {
        for j in 0..5 {
            sd[j] += (f[j] - mean[j]).powi(2) / n;
        }
    }
    let sd = sd.map(|v| v.sqrt());
    if sd
        .iter()
        .all(|&s| !(s > 1e-12 * (1.0 + mean.iter().map(|m| m.abs()).sum::<f64>())))
    {
        return None;
    }
    let z: Vec<[f64; 5]> = features
        .iter()
        .map(|f| {
            let mut r = [0.0; 5];
            for j in 0..5 {
                r[j] = if sd[j] > 0.0 {
                    (f[j] - mean[j]) / sd[j]
                } else {
                    0.0
                };
            }
            r
        })
        .collect();
    let mut cov = SMatrix::<f64, 5, 5>::zeros();
    for r in &z {
        for i in 0..5 {
            for j in 0..5 {
                cov[(i, j)] += r[i] * r[j] / n;
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let axes: Vec<[f64; 5]> = order[..2]
        .iter()
        .map(|&c| {
            let mut v = [0.0; 5];
            for i in 0..5 {
                v[i] = eig.eigenvectors[(i, c)];
            }
            // Fix the eigenvector sign so projections are reproducible.
            let lead = v
                .iter()
                .cloned()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Some(
        z.iter()
            .map(|r| {
                let dot = |a: &[f64; 5]| (0..5).map(|i| a[i] * r[i]).sum::<f64>();
                Vector2::new(dot(&axes[0]), dot(&axes[1]))
            })
            .collect(),
    )
}

/// θ grid `0.05, 0.10, …, 0.95`.
pub fn theta_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateDecision {
    pub theta: f64,
    /// Bhattacharyya distance per grid θ; `None` where a side was too small.
    pub distances: Vec<(f64, Option<f64>)>,
    pub warning: Option<String>,
}

/// Pick the gate threshold separating clean from motion-contaminated
/// segments. `g` is the mean gate per segment.
pub fn gate_threshold(stats: &[SegmentStats], g: &[f64]) -> Result<GateDecision> {
    if stats.len() != g.len() {
        return Err(Error::invalid(format!(
            "{} segment statistics but {} gate values",
            stats.len(),
            g.len()
        )));
    }
    if stats.len() < MIN_GATING_SEGMENTS {
        return Err(Error::InsufficientData(format!(
            "gating needs at least {MIN_GATING_SEGMENTS} segments, got {}",
            stats.len()
        )));
    }
    let features: Vec<[f64; 5]> = stats.iter().map(|s| s.as_array()).collect();
    let fallback = |distances, why: &str| GateDecision {
        theta: FALLBACK_THETA,
        distances,
        warning: Some(why.to_string()),
    };
    let Some(points) = project_features(&features) else {
        return Ok(fallback(Vec::new(), "all segments have identical features"));
    };
    let spread = points.iter().map(|p| p.norm_squared()).sum::<f64>() / points.len() as f64;
    let ridge = RIDGE_REL * (spread / 2.0).max(1e-300);

    let mut distances = Vec::with_capacity(19);
    let mut best: Option<(f64, f64)> = None;
    for theta in theta_grid() {
        let (lo, hi): (Vec<_>, Vec<_>) = points.iter().zip(g).partition(|(_, &gv)| gv < theta);
        if lo.len() < MIN_GROUP || hi.len() < MIN_GROUP {
            distances.push((theta, None));
            continue;
        }
        let lo: Vec<Vector2<f64>> = lo.into_iter().map(|(p, _)| *p).collect();
        let hi: Vec<Vector2<f64>> = hi.into_iter().map(|(p, _)| *p).collect();
        let (m1, c1) = gaussian_fit(&lo, ridge);
        let (m2, c2) = gaussian_fit(&hi, ridge);
        let d = bhattacharyya_gaussian(m1, c1, m2, c2).ok();
        if let Some(d) = d {
            if best.map_or(true, |(_, bd)| d > bd) {
                best = Some((theta, d));
            }
        }
        distances.push((theta, d));
    }
    Ok(match best {
        None => fallback(distances, "no threshold leaves both groups populated"),
        Some((_, d)) if !(d > 1e-12) => fallback(distances, "groups are not separable"),
        Some((theta, _)) => GateDecision {
            theta,
            distances,
            warning: None,
        },
    })
}

/// Clean mask at threshold θ: segments with `g < θ`.
pub fn clean_mask(g: &[f64], theta: f64) -> Vec<bool> {
    g.iter().map(|&v| v < theta).collect()
}
