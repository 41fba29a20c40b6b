//! Affective curve: exact Gaussian-process regression of arousal on valence,
//! plus the SAM 0–6 mapping and the nine-way affective state partition.
//!
//! The prior is `A(v) = β0 + β1·v + f(v)` with `f ~ GP(0, σf²·exp(−(v−v')²/2ℓ²))`
//! and i.i.d. observation noise σn². β is estimated by generalized least
//! squares and its uncertainty is folded into the predictive variance.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::util::{mean, median};
use crate::{Error, Result};

pub const LENGTH_SCALE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    /// Kernel length scale; `None` uses the median pairwise |ΔV|.
    pub length_scale: Option<f64>,
    pub noise_variance: f64,
    /// Pick (length scale, noise) from a 9×5 grid by marginal likelihood.
    pub optimize: bool,
    /// Larger label series are decimated uniformly in time before fitting.
    pub max_points: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            length_scale: None,
            noise_variance: 1e-2,
            optimize: false,
            max_points: 1000,
        }
    }
}

#[derive(Debug, Clone)]
struct GpState {
    length_scale: f64,
    signal_variance: f64,
    noise_variance: f64,
    beta: Vector2<f64>,
    /// K⁻¹ (y − Hβ)
    alpha: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// (Hᵀ K⁻¹ H)⁻¹
    basis_cov: Matrix2<f64>,
    log_marginal: f64,
}

#[derive(Debug, Clone)]
pub struct AffectiveCurve {
    train_v: Vec<f64>,
    train_a: Vec<f64>,
    gp: Option<GpState>,
    constant: f64,
    constant_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub v: f64,
    pub mean_a: f64,
    pub var_a: f64,
}

fn se(v1: f64, v2: f64, ell: f64) -> f64 {
    let d = (v1 - v2) / ell;
    (-0.5 * d * d).exp()
}

fn default_length_scale(vs: &[f64]) -> f64 {
    let mut d = Vec::with_capacity(vs.len() * (vs.len() - 1) / 2);
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            d.push((vs[i] - vs[j]).abs());
        }
    }
    median(&d).max(LENGTH_SCALE_FLOOR)
}

/// Variance of the ordinary-least-squares residuals of `a` on `[1, v]`.
fn ols_residual_variance(vs: &[f64], a: &[f64]) -> f64 {
    let mv = mean(vs);
    let ma = mean(a);
    let sxx: f64 = vs.iter().map(|v| (v - mv).powi(2)).sum();
    let sxy: f64 = vs.iter().zip(a).map(|(v, y)| (v - mv) * (y - ma)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let res: Vec<f64> = vs
        .iter()
        .zip(a)
        .map(|(v, y)| (y - ma - slope * (v - mv)).powi(2))
        .collect();
    mean(&res)
}

fn fit_gp(vs: &[f64], a: &[f64], ell: f64, sf2: f64, sn2: f64) -> Result<GpState> {
    let n = vs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        sf2 * se(vs[i], vs[j], ell) + if i == j { sn2 } else { 0.0 }
    });
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::Numeric("GP covariance is not positive definite".into()))?;
    let h = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { vs[i] });
    let y = DVector::from_column_slice(a);
    let kinv_h = chol.solve(&h);
    let kinv_y = chol.solve(&y);
    let hkh = h.transpose() * &kinv_h;
    let hkh = Matrix2::new(hkh[(0, 0)], hkh[(0, 1)], hkh[(1, 0)], hkh[(1, 1)]);
    let basis_cov = hkh
        .try_inverse()
        .ok_or_else(|| Error::SingularFit("linear basis is rank deficient".into()))?;
    let hky = h.transpose() * &kinv_y;
    let beta = basis_cov * Vector2::new(hky[0], hky[1]);
    let resid = &y - &h * DVector::from_column_slice(beta.as_slice());
    let alpha = chol.solve(&resid);
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let log_marginal = -0.5 * resid.dot(&alpha)
        - 0.5 * log_det
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(GpState {
        length_scale: ell,
        signal_variance: sf2,
        noise_variance: sn2,
        beta,
        alpha,
        chol,
        basis_cov,
        log_marginal,
    })
}

/// Keep at most `max` points, evenly spaced in sequence order.
fn decimate(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if max == 0 || points.len() <= max {
        return points.to_vec();
    }
    let n = points.len();
    (0..max)
        .map(|k| points[k * (n - 1) / (max - 1).max(1)])
        .collect()
}

/// Fit the affective curve to time-ordered (V, A) label points.
///
/// If every V is identical the result is a constant curve at mean A with
/// [`AffectiveCurve::is_degenerate`] set.
pub fn fit_affective_curve(points: &[(f64, f64)], cfg: &CurveConfig) -> Result<AffectiveCurve> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "affective curve needs at least 2 points, got {}",
            points.len()
        )));
    }
    if !(cfg.noise_variance > 0.0) {
        return Err(Error::invalid("GP noise variance must be positive"));
    }
    if points.iter().any(|(v, a)| !v.is_finite() || !a.is_finite()) {
        return Err(Error::invalid("non-finite label point"));
    }
    let pts = decimate(points, cfg.max_points);
    let vs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let a: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (vmin, vmax) = crate::util::min_max(&vs);
    let constant = mean(&a);
    let constant_var = mean(&a.iter().map(|x| (x - constant).powi(2)).collect::<Vec<_>>());
    if !(vmax - vmin > 1e-12) {
        return Ok(AffectiveCurve {
            train_v: vs,
            train_a: a,
            gp: None,
            constant,
            constant_var,
        });
    }

    let base_ell = match cfg.length_scale {
        Some(l) if l > 0.0 => l,
        Some(l) => return Err(Error::invalid(format!("length scale {l} must be positive"))),
        None => default_length_scale(&vs),
    };
    let sf2 = ols_residual_variance(&vs, &a);
    let gp = if cfg.optimize {
        let mut best: Option<GpState> = None;
        for k in 0..9 {
            let ell = base_ell * 2f64.powf((k as f64 - 4.0) / 2.0);
            for e in 0..5 {
                let sn2 = 10f64.powi(e - 4);
                if let Ok(state) = fit_gp(&vs, &a, ell, sf2, sn2) {
                    if best
                        .as_ref()
                        .map_or(true, |b| state.log_marginal > b.log_marginal)
                    {
                        best = Some(state);
                    }
                }
            }
        }
        best.ok_or_else(|| Error::Numeric("no hyperparameter grid point could be fitted".into()))?
    } else {
        fit_gp(&vs, &a, base_ell, sf2, cfg.noise_variance)?
    };
    Ok(AffectiveCurve {
        train_v: vs,
        train_a: a,
        gp: Some(gp),
        constant,
        constant_var,
    })
}

impl AffectiveCurve {
    pub fn is_degenerate(&self) -> bool {
        self.gp.is_none()
    }

    pub fn training_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.train_v
            .iter()
            .copied()
            .zip(self.train_a.iter().copied())
    }

    pub fn length_scale(&self) -> Option<f64> {
        self.gp.as_ref().map(|g| g.length_scale)
    }

    pub fn signal_variance(&self) -> Option<f64> {
        self.gp.as_ref().map(|g| g.signal_variance)
    }

    pub fn noise_variance(&self) -> Option<f64> {
        self.gp.as_ref().map(|g| g.noise_variance)
    }

    /// Intercept and slope of the linear mean function.
    pub fn basis_weights(&self) -> [f64; 2] {
        match &self.gp {
            Some(g) => [g.beta[0], g.beta[1]],
            None => [self.constant, 0.0],
        }
    }

    pub fn log_marginal_likelihood(&self) -> Option<f64> {
        self.gp.as_ref().map(|g| g.log_marginal)
    }

    fn cross_cov(&self, g: &GpState, v: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.train_v.len(),
            self.train_v
                .iter()
                .map(|&vi| g.signal_variance * se(v, vi, g.length_scale)),
        )
    }

    /// Posterior mean of A at `v`.
    pub fn mean(&self, v: f64) -> f64 {
        match &self.gp {
            None => self.constant,
            Some(g) => g.beta[0] + g.beta[1] * v + self.cross_cov(g, v).dot(&g.alpha),
        }
    }

    /// Analytic derivative of the posterior mean with respect to `v`.
    pub fn mean_gradient(&self, v: f64) -> f64 {
        match &self.gp {
            None => 0.0,
            Some(g) => {
                let l2 = g.length_scale * g.length_scale;
                let kernel_part: f64 = self
                    .train_v
                    .iter()
                    .zip(g.alpha.iter())
                    .map(|(&vi, &ai)| {
                        ai * g.signal_variance * se(v, vi, g.length_scale) * (-(v - vi) / l2)
                    })
                    .sum();
                g.beta[1] + kernel_part
            }
        }
    }

    /// Posterior variance of the latent curve at `v` (noise excluded),
    /// including the uncertainty of the basis weights. Never negative.
    pub fn variance(&self, v: f64) -> f64 {
        match &self.gp {
            None => self.constant_var,
            Some(g) => {
                let ks = self.cross_cov(g, v);
                let kinv_ks = g.chol.solve(&ks);
                let gp_var = g.signal_variance - ks.dot(&kinv_ks);
                // R = h* − Hᵀ K⁻¹ k*
                let sum: f64 = kinv_ks.iter().sum();
                let wsum: f64 = kinv_ks
                    .iter()
                    .zip(&self.train_v)
                    .map(|(k, vi)| k * vi)
                    .sum();
                let r = Vector2::new(1.0 - sum, v - wsum);
                let basis_var = (r.transpose() * g.basis_cov * r)[0];
                (gp_var + basis_var).max(0.0)
            }
        }
    }
}

pub fn sample_curve(curve: &AffectiveCurve, v_grid: &[f64]) -> Vec<CurveSample> {
    v_grid
        .iter()
        .map(|&v| CurveSample {
            v,
            mean_a: curve.mean(v),
            var_a: curve.variance(v),
        })
        .collect()
}

/// `n` evenly spaced points on [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `v,mean_a,var_a` rows with header.
pub fn curve_csv(samples: &[CurveSample]) -> String {
    let mut s = String::from("v,mean_a,var_a\n");
    for c in samples {
        let _ = writeln!(s, "{},{},{}", c.v, c.mean_a, c.var_a);
    }
    s
}

/// Valence/arousal on the 0–6 rating scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamScalePair {
    pub v6: f64,
    pub a6: f64,
}

/// `v6 = 3(V+1)`, `a6 = 6A`.
pub fn to_sam_scale(valence: f64, arousal: f64) -> Result<SamScalePair> {
    if !(-1.0..=1.0).contains(&valence) {
        return Err(Error::invalid(format!("valence {valence} outside [-1,1]")));
    }
    if !(0.0..=1.0).contains(&arousal) {
        return Err(Error::invalid(format!("arousal {arousal} outside [0,1]")));
    }
    Ok(SamScalePair {
        v6: 3.0 * (valence + 1.0),
        a6: 6.0 * arousal,
    })
}

/// Inverse of [`to_sam_scale`].
pub fn from_sam_scale(pair: SamScalePair) -> (f64, f64) {
    (pair.v6 / 3.0 - 1.0, pair.a6 / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AffectiveState {
    #[serde(rename = "LANV")]
    LowNegative,
    #[serde(rename = "LAUV")]
    LowNeutral,
    #[serde(rename = "LAPV")]
    LowPositive,
    #[serde(rename = "MANV")]
    MidNegative,
    #[serde(rename = "MAUV")]
    MidNeutral,
    #[serde(rename = "MAPV")]
    MidPositive,
    #[serde(rename = "HANV")]
    HighNegative,
    #[serde(rename = "HAUV")]
    HighNeutral,
    #[serde(rename = "HAPV")]
    HighPositive,
}

impl AffectiveState {
    pub const ALL: [AffectiveState; 9] = [
        AffectiveState::LowNegative,
        AffectiveState::LowNeutral,
        AffectiveState::LowPositive,
        AffectiveState::MidNegative,
        AffectiveState::MidNeutral,
        AffectiveState::MidPositive,
        AffectiveState::HighNegative,
        AffectiveState::HighNeutral,
        AffectiveState::HighPositive,
    ];

    /// Row-major in (arousal level, valence level), each 0..3.
    fn from_levels(arousal: usize, valence: usize) -> Self {
        Self::ALL[arousal * 3 + valence]
    }

    pub fn code(self) -> &'static str {
        match self {
            AffectiveState::LowNegative => "LANV",
            AffectiveState::LowNeutral => "LAUV",
            AffectiveState::LowPositive => "LAPV",
            AffectiveState::MidNegative => "MANV",
            AffectiveState::MidNeutral => "MAUV",
            AffectiveState::MidPositive => "MAPV",
            AffectiveState::HighNegative => "HANV",
            AffectiveState::HighNeutral => "HAUV",
            AffectiveState::HighPositive => "HAPV",
        }
    }
}

impl fmt::Display for AffectiveState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Lower edges of the middle and upper bins on the 0–6 scale, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateThresholds {
    pub arousal: [f64; 2],
    pub valence: [f64; 2],
}

impl Default for StateThresholds {
    fn default() -> Self {
        Self {
            arousal: [2.0, 4.0],
            valence: [2.0, 4.0],
        }
    }
}

impl StateThresholds {
    pub fn validate(&self) -> Result<()> {
        for t in [self.arousal, self.valence] {
            if !(t[0] < t[1]) {
                return Err(Error::invalid(format!(
                    "state thresholds {t:?} are not increasing"
                )));
            }
        }
        Ok(())
    }
}

fn level(x: f64, t: [f64; 2]) -> usize {
    if x < t[0] {
        0
    } else if x < t[1] {
        1
    } else {
        2
    }
}

/// Nine-way partition of the 0–6 plane; a value on a threshold belongs to
/// the upper bin.
pub fn bin_state(pair: SamScalePair, thresholds: &StateThresholds) -> AffectiveState {
    AffectiveState::from_levels(
        level(pair.a6, thresholds.arousal),
        level(pair.v6, thresholds.valence),
    )
}
