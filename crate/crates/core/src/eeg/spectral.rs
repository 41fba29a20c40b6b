//! Welch power spectral density and segment-averaged bicoherence.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Band, BicoherenceNorm};
use crate::{Error, Result};

pub const MIN_BICOHERENCE_SEGMENTS: usize = 8;

/// Cells whose power falls below this fraction of the peak mean power are
/// treated as having no power.
const POWER_FLOOR_REL: f64 = 1e-12;

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

struct Windowed {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Windowed {
    fn new(n: usize) -> Self {
        Self {
            window: hann(n),
            fft: FftPlanner::new().plan_fft_forward(n),
        }
    }

    /// Mean-removed, windowed spectrum of one segment.
    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(&self.window)
            .map(|(v, w)| Complex64::new((v - m) * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf
    }
}

fn check_segments(segments: &[&[f64]]) -> Result<usize> {
    let n = segments
        .first()
        .map(|s| s.len())
        .ok_or_else(|| Error::InsufficientData("no segments for spectral estimate".into()))?;
    if n < 2 {
        return Err(Error::InsufficientData(
            "segments shorter than 2 samples".into(),
        ));
    }
    if let Some(bad) = segments.iter().find(|s| s.len() != n) {
        return Err(Error::invalid(format!(
            "segments differ in length: {n} and {} samples",
            bad.len()
        )));
    }
    Ok(n)
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub bin_hz: f64,
    pub values: Vec<f64>,
}

impl Psd {
    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }

    /// Mean density over bins whose frequency lies in `[lo, hi]`.
    pub fn band_power(&self, band: &Band) -> Result<f64> {
        let top = self.freq(self.values.len() - 1);
        if band.lo < 0.0 || band.hi > top + 1e-9 || band.lo > band.hi {
            return Err(Error::invalid(format!(
                "band {} [{}, {}] Hz outside PSD support [0, {top}] Hz",
                band.name, band.lo, band.hi
            )));
        }
        let bins: Vec<f64> = (0..self.values.len())
            .filter(|&k| band.contains(self.freq(k)))
            .map(|k| self.values[k])
            .collect();
        if bins.is_empty() {
            return Err(Error::invalid(format!(
                "band {} contains no PSD bins",
                band.name
            )));
        }
        Ok(bins.iter().sum::<f64>() / bins.len() as f64)
    }

    /// Σ PSD · Δf, comparable to the mean squared signal.
    pub fn total_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.bin_hz
    }
}

/// Welch estimate over equal-length, non-overlapping segments.
pub fn welch_psd(segments: &[&[f64]], sample_rate: f64) -> Result<Psd> {
    let n = check_segments(segments)?;
    let w = Windowed::new(n);
    let win_power: f64 = w.window.iter().map(|v| v * v).sum();
    let half = n / 2;
    let mut acc = vec![0.0; half + 1];
    for seg in segments {
        let x = w.spectrum(seg);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += x[k].norm_sqr();
        }
    }
    let scale = 1.0 / (sample_rate * win_power * segments.len() as f64);
    for (k, a) in acc.iter_mut().enumerate() {
        *a *= scale;
        if k != 0 && !(n % 2 == 0 && k == half) {
            *a *= 2.0;
        }
    }
    Ok(Psd {
        bin_hz: sample_rate / n as f64,
        values: acc,
    })
}

/// Bicoherence on the principal domain `f1 ≥ f2 ≥ 1`, `f1 + f2 ≤ Nyquist`,
/// indexed by bin. Cells without power are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bicoherence {
    pub bin_hz: f64,
    nyquist_bin: usize,
    cells: Vec<Option<f64>>,
}

impl Bicoherence {
    fn idx(&self, k1: usize, k2: usize) -> usize {
        k1 * (self.nyquist_bin + 1) + k2
    }

    pub fn nyquist_bin(&self) -> usize {
        self.nyquist_bin
    }

    pub fn in_principal_domain(&self, k1: usize, k2: usize) -> bool {
        k2 >= 1 && k1 >= k2 && k1 + k2 <= self.nyquist_bin
    }

    /// Value at bin pair `(k1, k2)` in either order.
    pub fn get(&self, k1: usize, k2: usize) -> Option<f64> {
        let (a, b) = if k1 >= k2 { (k1, k2) } else { (k2, k1) };
        if !self.in_principal_domain(a, b) {
            return None;
        }
        self.cells[self.idx(a, b)]
    }

    /// Value at a frequency pair in Hz, rounded to the nearest bins.
    pub fn at_hz(&self, f1: f64, f2: f64) -> Option<f64> {
        let k = |f: f64| (f / self.bin_hz).round();
        let (k1, k2) = (k(f1), k(f2));
        if k1 < 0.0 || k2 < 0.0 {
            return None;
        }
        self.get(k1 as usize, k2 as usize)
    }

    pub fn defined_cells(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let m = self.nyquist_bin + 1;
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, c)| c.map(|v| ((i / m, i % m), v)))
    }
}

pub fn bicoherence(
    segments: &[&[f64]],
    sample_rate: f64,
    norm: BicoherenceNorm,
) -> Result<Bicoherence> {
    if segments.len() < MIN_BICOHERENCE_SEGMENTS {
        return Err(Error::InsufficientData(format!(
            "bicoherence needs at least {MIN_BICOHERENCE_SEGMENTS} segments, got {}",
            segments.len()
        )));
    }
    let n = check_segments(segments)?;
    let w = Windowed::new(n);
    let half = n / 2;
    let spectra: Vec<Vec<Complex64>> = segments.iter().map(|s| w.spectrum(s)).collect();
    let count = spectra.len() as f64;

    let mut power = vec![0.0; half + 1];
    for x in &spectra {
        for (k, p) in power.iter_mut().enumerate() {
            *p += x[k].norm_sqr();
        }
    }
    power.iter_mut().for_each(|p| *p /= count);
    let floor = power.iter().cloned().fold(0.0, f64::max) * POWER_FLOOR_REL;
    let has_power = |k: usize| power[k] > floor;

    let m = half + 1;
    let mut cells = vec![None; m * m];
    for k1 in 1..=half {
        for k2 in 1..=k1.min(half - k1) {
            let k3 = k1 + k2;
            if !(has_power(k1) && has_power(k2) && has_power(k3)) {
                continue;
            }
            let mut b = Complex64::new(0.0, 0.0);
            let mut pair = 0.0;
            for x in &spectra {
                let x12 = x[k1] * x[k2];
                b += x12 * x[k3].conj();
                pair += x12.norm_sqr();
            }
            let denom = match norm {
                BicoherenceNorm::CauchySchwarz => (pair / count * power[k3]).sqrt(),
                BicoherenceNorm::PowerProduct => (power[k1] * power[k2] * power[k3]).sqrt(),
            };
            if denom > 0.0 {
                cells[k1 * m + k2] = Some((b / count).norm() / denom);
            }
        }
    }
    Ok(Bicoherence {
        bin_hz: sample_rate / n as f64,
        nyquist_bin: half,
        cells,
    })
}

/// Bin indices whose centre frequency falls in `band`.
fn band_bins(bc: &Bicoherence, band: &Band) -> Vec<usize> {
    (0..=bc.nyquist_bin)
        .filter(|&k| band.contains(k as f64 * bc.bin_hz))
        .collect()
}

/// Principal-domain cells covered by the `q1 × q2` rectangle, each counted
/// once regardless of which ordering reaches it.
pub fn band_cells(bc: &Bicoherence, q1: &Band, q2: &Band) -> BTreeSet<(usize, usize)> {
    let (b1, b2) = (band_bins(bc, q1), band_bins(bc, q2));
    let mut cells = BTreeSet::new();
    for &k1 in &b1 {
        for &k2 in &b2 {
            let (a, b) = if k1 >= k2 { (k1, k2) } else { (k2, k1) };
            if bc.in_principal_domain(a, b) {
                cells.insert((a, b));
            }
        }
    }
    cells
}

/// Number of raw `(f1, f2)` pairs in the rectangle before folding.
pub fn band_candidate_count(bc: &Bicoherence, q1: &Band, q2: &Band) -> usize {
    band_bins(bc, q1).len() * band_bins(bc, q2).len()
}

/// Mean of the defined cells in the band rectangle.
pub fn band_mean_bicoherence(bc: &Bicoherence, q1: &Band, q2: &Band) -> Result<f64> {
    let vals: Vec<f64> = band_cells(bc, q1, q2)
        .into_iter()
        .filter_map(|(a, b)| bc.get(a, b))
        .collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no defined bicoherence cells for ({}, {})",
            q1.name, q2.name
        )));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
pub(crate) fn from_cells(
    bin_hz: f64,
    nyquist_bin: usize,
    f: impl Fn(usize, usize) -> Option<f64>,
) -> Bicoherence {
    let m = nyquist_bin + 1;
    let mut cells = vec![None; m * m];
    for k1 in 0..m {
        for k2 in 0..m {
            if k2 >= 1 && k1 >= k2 && k1 + k2 <= nyquist_bin {
                cells[k1 * m + k2] = f(k1, k2);
            }
        }
    }
    Bicoherence {
        bin_hz,
        nyquist_bin,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eeg::BandDefs;

    fn sine(freq: f64, fs: usize, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs as f64 + phase).sin())
            .collect()
    }

    #[test]
    fn psd_of_sine_lands_in_alpha() {
        let x = sine(10.0, 250, 250 * 20, 0.3);
        let segs: Vec<&[f64]> = x.chunks(250).collect();
        let psd = welch_psd(&segs, 250.0).unwrap();
        assert_eq!(psd.values.len(), 126);
        let peak = (0..psd.values.len())
            .max_by(|&a, &b| psd.values[a].total_cmp(&psd.values[b]))
            .unwrap();
        assert_eq!(peak, 10);
        let bands = BandDefs::default();
        assert!(psd.band_power(&bands.theta).unwrap() < 1e-20);
        assert!(psd.band_power(&bands.alpha).unwrap() > 0.0);
        assert!((psd.total_power() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_signal_zero_psd() {
        let x = vec![0.0; 500];
        let segs: Vec<&[f64]> = x.chunks(250).collect();
        let psd = welch_psd(&segs, 250.0).unwrap();
        assert!(psd.values.iter().all(|&v| v == 0.0));
        assert!(welch_psd(&[], 250.0).is_err());
    }

    #[test]
    fn flat_psd_band_power() {
        let psd = Psd {
            bin_hz: 1.0,
            values: vec![2.0; 126],
        };
        let bands = BandDefs::default();
        for b in bands.all() {
            assert_eq!(psd.band_power(b).unwrap(), 2.0);
        }
        let alpha_bins = (0..126).filter(|&k| bands.alpha.contains(k as f64)).count();
        assert_eq!(alpha_bins, 6);
        let short = Psd {
            bin_hz: 1.0,
            values: vec![1.0; 20],
        };
        assert!(short.band_power(&bands.gamma).is_err());
    }

    #[test]
    fn single_segment_rejected() {
        let x = vec![1.0; 250];
        assert!(bicoherence(&[&x[..]], 250.0, BicoherenceNorm::CauchySchwarz).is_err());
    }

    #[test]
    fn band_means() {
        let bands = BandDefs::default();
        let bc = from_cells(1.0, 125, |_, _| Some(0.5));
        assert_eq!(
            band_mean_bicoherence(&bc, &bands.alpha, &bands.beta).unwrap(),
            0.5
        );
        let bc = from_cells(1.0, 125, |a, _| if a % 2 == 0 { None } else { Some(0.4) });
        assert!(
            (band_mean_bicoherence(&bc, &bands.alpha, &bands.theta).unwrap() - 0.4).abs() < 1e-15
        );
        assert_eq!(band_candidate_count(&bc, &bands.theta, &bands.theta), 16);
        assert_eq!(band_cells(&bc, &bands.theta, &bands.theta).len(), 10);
        let empty = from_cells(1.0, 125, |_, _| None);
        assert!(band_mean_bicoherence(&empty, &bands.alpha, &bands.alpha).is_err());
    }

    #[test]
    fn lookup_is_symmetric() {
        let bc = from_cells(1.0, 125, |a, b| Some((a * 1000 + b) as f64));
        assert_eq!(bc.get(6, 10), bc.get(10, 6));
        assert_eq!(bc.at_hz(6.0, 10.0), Some(10006.0));
        assert_eq!(bc.get(100, 50), None);
    }

    fn triad(coupled: bool, seed: u64) -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..64)
            .map(|_| {
                let p6 = rng.gen_range(0.0..2.0 * PI);
                let p10 = rng.gen_range(0.0..2.0 * PI);
                let p16 = if coupled {
                    p6 + p10
                } else {
                    rng.gen_range(0.0..2.0 * PI)
                };
                (0..250)
                    .map(|i| {
                        let t = i as f64 / 250.0;
                        (2.0 * PI * 6.0 * t + p6).cos()
                            + (2.0 * PI * 10.0 * t + p10).cos()
                            + (2.0 * PI * 16.0 * t + p16).cos()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn triad_coupling() {
        for norm in [
            BicoherenceNorm::CauchySchwarz,
            BicoherenceNorm::PowerProduct,
        ] {
            let c = triad(true, 1);
            let refs: Vec<&[f64]> = c.iter().map(|v| v.as_slice()).collect();
            let bc = bicoherence(&refs, 250.0, norm).unwrap();
            assert!(bc.at_hz(6.0, 10.0).unwrap() >= 0.9);
            let u = triad(false, 2);
            let refs: Vec<&[f64]> = u.iter().map(|v| v.as_slice()).collect();
            let bu = bicoherence(&refs, 250.0, norm).unwrap();
            assert!(bu.at_hz(10.0, 6.0).unwrap() <= 0.3);
        }
    }
}
