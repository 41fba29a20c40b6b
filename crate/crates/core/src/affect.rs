//! Contentment and the arousal/valence label model.
//!
//! Per frame:
//!
//! ```text
//! l = λ1·ln(t_elapsed + 1) + λ3                      (contentment)
//! a = α1·m/m_max + α2·l/l_max  → smooth → min–max    (arousal A)
//! r = sign(l)·A
//! v = ν1·r/r_max + ν2·exp(log_o − log_o_max) → smooth → clamp [-1,1]
//! ```
//!
//! The maxima are taken over a normalization batch of situations, so labels
//! from different situations in the same batch are comparable.

use serde::{Deserialize, Serialize};

use crate::util::{median, min_max};
use crate::{Error, Result};

/// Floor applied to every normalization maximum.
pub const MAXIMA_FLOOR: f64 = 1e-9;
/// Largest exponent fed to `exp` for the motivation term.
const MAX_EXPONENT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffectParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha1: f64,
    pub nu1: f64,
    /// Moving-average window (s).
    pub smoothing_window_s: f64,
}

impl Default for AffectParams {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 2.0,
            lambda3: -1.0,
            alpha1: 0.75,
            nu1: 0.5,
            smoothing_window_s: 5.0,
        }
    }
}

impl AffectParams {
    pub fn alpha2(&self) -> f64 {
        1.0 - self.alpha1
    }

    pub fn nu2(&self) -> f64 {
        1.0 - self.nu1
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha1) || !(0.0..=1.0).contains(&self.nu1) {
            return Err(Error::invalid("alpha1 and nu1 must lie in [0,1]"));
        }
        if !(self.lambda1 > 0.0) || !self.lambda2.is_finite() || !self.lambda3.is_finite() {
            return Err(Error::invalid(
                "lambda1 must be positive and lambda2/lambda3 finite",
            ));
        }
        if !(self.smoothing_window_s >= 0.0) {
            return Err(Error::invalid("smoothing window must be non-negative"));
        }
        Ok(())
    }
}

/// Per-frame components of one situation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentSeries {
    pub timestamps: Vec<f64>,
    /// Motion component in [0,1].
    pub m: Vec<f64>,
    /// Log of the motivation component.
    pub log_o: Vec<f64>,
    /// Contentment component.
    pub l: Vec<f64>,
}

impl ComponentSeries {
    pub fn new(timestamps: Vec<f64>, m: Vec<f64>, log_o: Vec<f64>, l: Vec<f64>) -> Result<Self> {
        let n = timestamps.len();
        if m.len() != n || log_o.len() != n || l.len() != n {
            return Err(Error::invalid("component series lengths differ"));
        }
        if let Some(x) = m.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!(
                "motion component {x} outside [0,1]"
            )));
        }
        Ok(Self {
            timestamps,
            m,
            log_o,
            l,
        })
    }

    /// Fill `l` from the timestamps (elapsed time since the first frame).
    pub fn with_contentment(
        timestamps: Vec<f64>,
        m: Vec<f64>,
        log_o: Vec<f64>,
        params: &AffectParams,
    ) -> Result<Self> {
        let l = contentment_series(&timestamps, params);
        Self::new(timestamps, m, log_o, l)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maxima {
    pub m_max: f64,
    pub l_max: f64,
    pub r_max: f64,
    pub log_o_max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelSeries {
    pub timestamps: Vec<f64>,
    /// Valence in [-1,1].
    pub valence: Vec<f64>,
    /// Arousal in [0,1].
    pub arousal: Vec<f64>,
}

impl LabelSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// `λ1·ln(δ − λ2) + λ3` with `δ = t_elapsed + λ2 + 1`; negative elapsed time
/// is treated as 0.
pub fn contentment_component(t_elapsed: f64, params: &AffectParams) -> f64 {
    let delta = t_elapsed.max(0.0) + params.lambda2 + 1.0;
    params.lambda1 * (delta - params.lambda2).ln() + params.lambda3
}

pub fn contentment_series(timestamps: &[f64], params: &AffectParams) -> Vec<f64> {
    let t0 = timestamps.first().copied().unwrap_or(0.0);
    timestamps
        .iter()
        .map(|&t| contentment_component(t - t0, params))
        .collect()
}

/// Odd moving-average length (frames) covering `window_s` at the series'
/// median frame interval.
pub fn window_frames(timestamps: &[f64], window_s: f64) -> usize {
    let dts: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    let dt = median(&dts);
    if !(dt > 0.0) {
        return 1;
    }
    let len = (window_s / dt).round().max(1.0) as usize;
    len | 1
}

/// Moving average of length `len` centered on each sample. Near the ends the
/// window slides inward instead of shrinking, so every output averages
/// `min(len, n)` real samples and consecutive outputs differ by at most
/// `(max − min)/len`.
pub fn moving_average(xs: &[f64], len: usize) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let len = len.clamp(1, n);
    let half = len / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in xs {
        acc += x;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - len);
            (prefix[start + len] - prefix[start]) / len as f64
        })
        .collect()
}

/// Min–max normalize jointly over all series; a constant batch maps to 0.5.
fn normalize_batch(series: &mut [Vec<f64>]) {
    let (lo, hi) = series
        .iter()
        .map(|s| min_max(s))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| {
            (a.min(c), b.max(d))
        });
    let span = hi - lo;
    let constant = !(span > 1e-12 * hi.abs().max(lo.abs()).max(1.0));
    for s in series.iter_mut() {
        for x in s.iter_mut() {
            *x = if constant {
                0.5
            } else {
                ((*x - lo) / span).clamp(0.0, 1.0)
            };
        }
    }
}

/// Unsmoothed `α1·m/m_max + α2·l/l_max`.
pub fn raw_arousal(comp: &ComponentSeries, params: &AffectParams, maxima: &Maxima) -> Vec<f64> {
    comp.m
        .iter()
        .zip(&comp.l)
        .map(|(&m, &l)| params.alpha1 * m / maxima.m_max + params.alpha2() * l / maxima.l_max)
        .collect()
}

fn check_maxima(maxima: &Maxima) -> Result<()> {
    if [maxima.m_max, maxima.l_max, maxima.r_max, maxima.log_o_max]
        .iter()
        .all(|&x| x > 0.0 && x.is_finite())
    {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "normalization maxima must be positive: {maxima:?}"
        )))
    }
}

/// Smoothed arousal for every series of a batch, min–max normalized over the
/// whole batch.
pub fn arousal_batch(
    batch: &[&ComponentSeries],
    params: &AffectParams,
    maxima: &Maxima,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    check_maxima(maxima)?;
    if batch.iter().any(|c| c.is_empty()) || batch.is_empty() {
        return Err(Error::InsufficientData("empty component series".into()));
    }
    let mut out: Vec<Vec<f64>> = batch
        .iter()
        .map(|c| {
            let w = window_frames(&c.timestamps, params.smoothing_window_s);
            moving_average(&raw_arousal(c, params, maxima), w)
        })
        .collect();
    normalize_batch(&mut out);
    Ok(out)
}

/// Arousal of a single situation normalized on its own.
pub fn arousal_series(
    comp: &ComponentSeries,
    params: &AffectParams,
    maxima: &Maxima,
) -> Result<Vec<f64>> {
    Ok(arousal_batch(&[comp], params, maxima)?.remove(0))
}

/// `sign(l)·A` with `sign(0) = 0`.
pub fn range_dependence(l: f64, arousal: f64) -> f64 {
    if l > 0.0 {
        arousal
    } else if l < 0.0 {
        -arousal
    } else {
        0.0
    }
}

/// Smoothed, clamped valence from the range-dependence series `r` and the
/// log motivation of `comp` (which also supplies the frame clock).
pub fn valence_series(
    r: &[f64],
    comp: &ComponentSeries,
    params: &AffectParams,
    maxima: &Maxima,
) -> Result<Vec<f64>> {
    params.validate()?;
    check_maxima(maxima)?;
    if r.is_empty() || r.len() != comp.len() {
        return Err(Error::InsufficientData(
            "valence needs a non-empty r series matching the components".into(),
        ));
    }
    let raw: Vec<f64> = r
        .iter()
        .zip(&comp.log_o)
        .map(|(&r, &lo)| {
            let motivation = (lo - maxima.log_o_max).min(MAX_EXPONENT).exp();
            params.nu1 * r / maxima.r_max + params.nu2() * motivation
        })
        .collect();
    let w = window_frames(&comp.timestamps, params.smoothing_window_s);
    Ok(moving_average(&raw, w)
        .into_iter()
        .map(|v| v.clamp(-1.0, 1.0))
        .collect())
}

/// Batch maxima: `max m`, `max |l|`, `max |r|`, `max log_o`, each floored at
/// [`MAXIMA_FLOOR`]. `r_series` may be empty when only the arousal maxima are
/// needed yet.
pub fn compute_maxima(batch: &[&ComponentSeries], r_series: &[&[f64]]) -> Result<Maxima> {
    if batch.is_empty() {
        return Err(Error::InsufficientData(
            "maxima need a non-empty batch".into(),
        ));
    }
    let fold =
        |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max).max(MAXIMA_FLOOR);
    Ok(Maxima {
        m_max: fold(&mut batch.iter().flat_map(|c| c.m.iter().copied())),
        l_max: fold(&mut batch.iter().flat_map(|c| c.l.iter().map(|x| x.abs()))),
        r_max: fold(&mut r_series.iter().flat_map(|r| r.iter().map(|x| x.abs()))),
        log_o_max: fold(&mut batch.iter().flat_map(|c| c.log_o.iter().copied())),
    })
}

/// Full label computation for a normalization batch: maxima, arousal,
/// range dependence, valence.
pub fn label_batch(
    batch: &[&ComponentSeries],
    params: &AffectParams,
) -> Result<(Maxima, Vec<LabelSeries>)> {
    let pre = compute_maxima(batch, &[])?;
    let arousal = arousal_batch(batch, params, &pre)?;
    let r: Vec<Vec<f64>> = batch
        .iter()
        .zip(&arousal)
        .map(|(c, a)| {
            c.l.iter()
                .zip(a)
                .map(|(&l, &a)| range_dependence(l, a))
                .collect()
        })
        .collect();
    let r_refs: Vec<&[f64]> = r.iter().map(|v| v.as_slice()).collect();
    let maxima = compute_maxima(batch, &r_refs)?;
    let mut labels = Vec::with_capacity(batch.len());
    for ((c, a), r) in batch.iter().zip(arousal).zip(&r) {
        let valence = valence_series(r, c, params, &maxima)?;
        labels.push(LabelSeries {
            timestamps: c.timestamps.clone(),
            valence,
            arousal: a,
        });
    }
    Ok((maxima, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_maxima() -> Maxima {
        Maxima {
            m_max: 1.0,
            l_max: 1.0,
            r_max: 1.0,
            log_o_max: MAXIMA_FLOOR,
        }
    }

    fn frames(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / 30.0).collect()
    }

    #[test]
    fn contentment_anchors() {
        let p = AffectParams::default();
        assert_eq!(contentment_component(0.0, &p), -1.0);
        let zero = std::f64::consts::E.powi(2) - 1.0;
        assert!(contentment_component(zero, &p).abs() < 1e-12);
        assert!(contentment_component(3.0, &p) < contentment_component(3.1, &p));
    }

    #[test]
    fn raw_arousal_arithmetic() {
        let p = AffectParams::default();
        let c = ComponentSeries::new(vec![0.0], vec![0.8], vec![0.0], vec![0.4]).unwrap();
        let a = raw_arousal(&c, &p, &unit_maxima());
        assert!((a[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn constant_arousal_normalizes_to_half() {
        let n = 90;
        let c = ComponentSeries::new(frames(n), vec![1.0; n], vec![0.0; n], vec![1.0; n]).unwrap();
        let a = arousal_series(&c, &AffectParams::default(), &unit_maxima()).unwrap();
        assert!(a.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn step_becomes_monotone_ramp_of_one_window() {
        let n = 600;
        let p = AffectParams {
            alpha1: 1.0,
            ..Default::default()
        };
        let m: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
        let c = ComponentSeries::new(frames(n), m, vec![0.0; n], vec![0.0; n]).unwrap();
        let w = window_frames(&c.timestamps, p.smoothing_window_s);
        assert_eq!(w, 151);
        let s = moving_average(&raw_arousal(&c, &p, &unit_maxima()), w);
        assert!(s.windows(2).all(|x| x[1] >= x[0]));
        let ramp: Vec<usize> = (0..n).filter(|&i| s[i] > 0.0 && s[i] < 1.0).collect();
        assert_eq!(ramp.len(), w - 1);
        assert_eq!(*ramp.first().unwrap(), n / 2 - w / 2);
    }

    #[test]
    fn moving_average_edges_slide() {
        let xs = [0.0, 0.0, 0.0, 3.0, 6.0];
        assert_eq!(moving_average(&xs, 3), vec![0.0, 0.0, 1.0, 3.0, 3.0]);
        assert_eq!(moving_average(&xs, 9), vec![1.8; 5]);
        assert_eq!(moving_average(&xs, 1), xs.to_vec());
        assert!(moving_average(&[], 3).is_empty());
    }

    #[test]
    fn range_dependence_signs() {
        assert_eq!(range_dependence(0.3, 0.4), 0.4);
        assert_eq!(range_dependence(-0.3, 0.4), -0.4);
        assert_eq!(range_dependence(0.0, 0.4), 0.0);
    }

    #[test]
    fn valence_raw_cases() {
        let p = AffectParams {
            smoothing_window_s: 0.0,
            ..Default::default()
        };
        let mx = Maxima {
            log_o_max: 2.0,
            r_max: 0.8,
            ..unit_maxima()
        };
        let c = ComponentSeries::new(vec![0.0, 0.1], vec![0.0; 2], vec![2.0, -60.0], vec![0.0; 2])
            .unwrap();
        let v = valence_series(&[0.8, -0.8], &c, &p, &mx).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_r_and_zero_motivation_gives_half() {
        let n = 40;
        let c = ComponentSeries::new(frames(n), vec![0.0; n], vec![0.0; n], vec![0.0; n]).unwrap();
        let mx = compute_maxima(&[&c], &[&vec![0.0; n]]).unwrap();
        assert_eq!(mx.log_o_max, MAXIMA_FLOOR);
        let v = valence_series(&vec![0.0; n], &c, &AffectParams::default(), &mx).unwrap();
        assert!(v.iter().all(|&x| (x - 0.5).abs() < 1e-8));
    }

    #[test]
    fn maxima_cases() {
        let a = ComponentSeries::new(vec![0.0, 1.0], vec![0.2, 0.6], vec![1.2, 0.0], vec![0.0; 2])
            .unwrap();
        let b = ComponentSeries::new(
            vec![0.0, 1.0],
            vec![0.1, 0.3],
            vec![-1.0, 2.0],
            vec![0.0; 2],
        )
        .unwrap();
        let mx = compute_maxima(&[&a], &[]).unwrap();
        assert_eq!(mx.m_max, 0.6);
        assert_eq!(mx.l_max, MAXIMA_FLOOR);
        assert_eq!(mx.r_max, MAXIMA_FLOOR);
        let mx = compute_maxima(&[&a, &b], &[&[0.3, -0.9]]).unwrap();
        assert_eq!(mx.log_o_max, 2.0);
        assert_eq!(mx.r_max, 0.9);
        assert!(compute_maxima(&[], &[]).is_err());
    }

    #[test]
    fn errors_on_empty_or_bad_maxima() {
        let empty = ComponentSeries::default();
        assert!(arousal_series(&empty, &AffectParams::default(), &unit_maxima()).is_err());
        let c = ComponentSeries::new(vec![0.0], vec![0.5], vec![0.0], vec![0.0]).unwrap();
        let bad = Maxima {
            m_max: 0.0,
            ..unit_maxima()
        };
        assert!(arousal_series(&c, &AffectParams::default(), &bad).is_err());
        assert!(valence_series(&[], &c, &AffectParams::default(), &unit_maxima()).is_err());
    }
}
