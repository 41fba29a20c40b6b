//! EEG preprocessing and features: 2 Hz high-pass, 1-s segmentation with
//! motion gating, Welch band powers and band-pair bicoherence.

mod filter;
mod gating;
mod spectral;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use filter::{butter_highpass, filtfilt, magnitude_response, Biquad};
pub use gating::{
    averaged_stats, bhattacharyya_gaussian, channel_stats, clean_mask, gate_threshold,
    project_features, theta_grid, GateDecision, SegmentStats, FALLBACK_THETA, MIN_GATING_SEGMENTS,
};
pub use spectral::{
    band_candidate_count, band_cells, band_mean_bicoherence, bicoherence, hann, welch_psd,
    Bicoherence, Psd, MIN_BICOHERENCE_SEGMENTS,
};

use crate::ingest::EegRecording;
use crate::util::interp_linear;
use crate::{Error, Result};

pub const CHANNEL_NAMES: [&str; 2] = ["F3", "F4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
        }
    }

    /// Inclusive on both edges.
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo - 1e-9 && f <= self.hi + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandDefs {
    pub theta: Band,
    pub alpha: Band,
    pub beta: Band,
    pub gamma: Band,
}

impl Default for BandDefs {
    fn default() -> Self {
        Self {
            theta: Band::new("theta", 4.0, 7.0),
            alpha: Band::new("alpha", 8.0, 13.0),
            beta: Band::new("beta", 14.0, 29.0),
            gamma: Band::new("gamma", 30.0, 45.0),
        }
    }
}

impl BandDefs {
    pub fn all(&self) -> [&Band; 4] {
        [&self.theta, &self.alpha, &self.beta, &self.gamma]
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.all();
        for (i, band) in b.iter().enumerate() {
            if !(band.lo >= 0.0 && band.lo <= band.hi) {
                return Err(Error::invalid(format!("band {} has lo > hi", band.name)));
            }
            if i > 0 && !(b[i - 1].hi < band.lo) {
                return Err(Error::invalid(format!(
                    "bands {} and {} overlap or are out of order",
                    b[i - 1].name,
                    band.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicoherenceNorm {
    /// `|ΣB| / sqrt(Σ|X1X2|² · Σ|X3|²)`, bounded by 1.
    CauchySchwarz,
    /// `|mean B| / sqrt(P1 P2 P3)` with segment-averaged powers.
    PowerProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatingChannels {
    Average,
    F3,
    F4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EegConfig {
    pub highpass_hz: f64,
    pub filter_order: usize,
    pub bands: BandDefs,
    pub bicoherence_norm: BicoherenceNorm,
    pub gating_channels: GatingChannels,
}

impl Default for EegConfig {
    fn default() -> Self {
        Self {
            highpass_hz: 2.0,
            filter_order: 4,
            bands: BandDefs::default(),
            bicoherence_norm: BicoherenceNorm::CauchySchwarz,
            gating_channels: GatingChannels::Average,
        }
    }
}

impl EegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.filter_order == 0 || self.filter_order % 2 != 0 {
            return Err(Error::Config(format!(
                "eeg.filter_order must be even and positive, got {}",
                self.filter_order
            )));
        }
        self.bands.validate()
    }
}

/// High-pass both channels with a zero-phase Butterworth filter.
pub fn highpass(eeg: &EegRecording, cutoff_hz: f64, order: usize) -> Result<EegRecording> {
    if cutoff_hz >= eeg.sample_rate / 2.0 {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz is at or above Nyquist for {} Hz",
            eeg.sample_rate
        )));
    }
    let sos = butter_highpass(order, cutoff_hz, eeg.sample_rate)?;
    let channels = [
        filtfilt(&sos, &eeg.channels[0]),
        filtfilt(&sos, &eeg.channels[1]),
    ];
    EegRecording::with_flags(
        eeg.timestamps.clone(),
        channels,
        eeg.sample_rate,
        eeg.filled.clone(),
    )
}

/// One second of both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct EegSegment {
    pub start: f64,
    pub channels: [Vec<f64>; 2],
    /// Mean motion gate over the window.
    pub g: f64,
    pub clean: bool,
}

fn samples_per_second(sample_rate: f64) -> Result<usize> {
    let n = sample_rate.round();
    if !(n >= 2.0) || (sample_rate - n).abs() > 1e-6 * n {
        return Err(Error::invalid(format!(
            "1-s segments need an integer sample rate, got {sample_rate}"
        )));
    }
    Ok(n as usize)
}

/// Cut the recording into consecutive non-overlapping 1-s segments and
/// attach the mean of the gate `(gate_t, gate_g)` interpolated at each
/// sample. The trailing partial second is dropped.
pub fn segment(eeg: &EegRecording, gate_t: &[f64], gate_g: &[f64]) -> Result<Vec<EegSegment>> {
    let per = samples_per_second(eeg.sample_rate)?;
    if eeg.len() < per {
        return Err(Error::InsufficientData(format!(
            "EEG recording has {} samples, shorter than 1 s at {} Hz",
            eeg.len(),
            eeg.sample_rate
        )));
    }
    if gate_t.is_empty() || gate_t.len() != gate_g.len() {
        return Err(Error::invalid("gate series is empty or ragged"));
    }
    let count = eeg.len() / per;
    Ok((0..count)
        .map(|s| {
            let r = s * per..(s + 1) * per;
            let g = eeg.timestamps[r.clone()]
                .iter()
                .map(|&t| interp_linear(gate_t, gate_g, t))
                .sum::<f64>()
                / per as f64;
            EegSegment {
                start: eeg.timestamps[r.start],
                channels: [
                    eeg.channels[0][r.clone()].to_vec(),
                    eeg.channels[1][r].to_vec(),
                ],
                g,
                clean: true,
            }
        })
        .collect())
}

/// Five statistics for a segment, per the channel mode.
pub fn segment_stats(seg: &EegSegment, mode: GatingChannels) -> SegmentStats {
    match mode {
        GatingChannels::Average => averaged_stats(&[&seg.channels[0], &seg.channels[1]]),
        GatingChannels::F3 => channel_stats(&seg.channels[0]),
        GatingChannels::F4 => channel_stats(&seg.channels[1]),
    }
}

fn clean_channel(segments: &[EegSegment], channel: usize) -> Vec<&[f64]> {
    segments
        .iter()
        .filter(|s| s.clean)
        .map(|s| s.channels[channel].as_slice())
        .collect()
}

/// Welch PSD over the clean segments of one channel.
pub fn segments_psd(segments: &[EegSegment], channel: usize, sample_rate: f64) -> Result<Psd> {
    let clean = clean_channel(segments, channel);
    if clean.is_empty() {
        return Err(Error::InsufficientData("no clean EEG segments".into()));
    }
    welch_psd(&clean, sample_rate)
}

pub fn segments_bicoherence(
    segments: &[EegSegment],
    channel: usize,
    sample_rate: f64,
    norm: BicoherenceNorm,
) -> Result<Bicoherence> {
    bicoherence(&clean_channel(segments, channel), sample_rate, norm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EegFeatureSet {
    /// `[channel][band]` mean PSD, µV²/Hz.
    pub psd: [[f64; 4]; 2],
    /// `[channel][q1][q2]` band-mean bicoherence; `None` when unavailable.
    pub bicoherence: [[[Option<f64>; 4]; 4]; 2],
}

#[derive(Debug, Clone)]
pub struct EegAnalysis {
    pub segments: Vec<EegSegment>,
    pub gate: GateDecision,
    pub features: EegFeatureSet,
    pub warnings: Vec<String>,
}

/// Full EEG path for one situation.
pub fn analyze(
    eeg: &EegRecording,
    gate_t: &[f64],
    gate_g: &[f64],
    cfg: &EegConfig,
) -> Result<EegAnalysis> {
    cfg.validate()?;
    let filtered = highpass(eeg, cfg.highpass_hz, cfg.filter_order)?;
    let mut segments = segment(&filtered, gate_t, gate_g)?;
    let mut warnings = Vec::new();

    let stats: Vec<SegmentStats> = segments
        .iter()
        .map(|s| segment_stats(s, cfg.gating_channels))
        .collect();
    let g: Vec<f64> = segments.iter().map(|s| s.g).collect();
    let gate = if segments.len() < MIN_GATING_SEGMENTS {
        warnings.push(format!(
            "only {} segments; gating skipped and all segments kept",
            segments.len()
        ));
        GateDecision {
            theta: f64::INFINITY,
            distances: Vec::new(),
            warning: None,
        }
    } else {
        gate_threshold(&stats, &g)?
    };
    if let Some(w) = &gate.warning {
        warnings.push(format!("gating: {w}"));
    }
    for (seg, clean) in segments.iter_mut().zip(clean_mask(&g, gate.theta)) {
        seg.clean = clean;
    }
    let degenerate = stats.iter().filter(|s| s.degenerate).count();
    if degenerate > 0 {
        warnings.push(format!("{degenerate} zero-variance segments"));
    }

    let bands = cfg.bands.all();
    let mut psd = [[0.0; 4]; 2];
    let mut bic = [[[None; 4]; 4]; 2];
    for ch in 0..2 {
        let p = segments_psd(&segments, ch, filtered.sample_rate)?;
        for (b, band) in bands.iter().enumerate() {
            psd[ch][b] = p.band_power(band)?;
        }
        match segments_bicoherence(&segments, ch, filtered.sample_rate, cfg.bicoherence_norm) {
            Ok(bc) => {
                for (i, q1) in bands.iter().enumerate() {
                    for (j, q2) in bands.iter().enumerate() {
                        bic[ch][i][j] = band_mean_bicoherence(&bc, q1, q2).ok();
                    }
                }
            }
            Err(e) => warnings.push(format!(
                "{} bicoherence unavailable: {e}",
                CHANNEL_NAMES[ch]
            )),
        }
    }
    Ok(EegAnalysis {
        segments,
        gate,
        features: EegFeatureSet {
            psd,
            bicoherence: bic,
        },
        warnings,
    })
}

pub const PSD_CSV_HEADER: &str = "situation,channel,band,psd_mean";
pub const BICOHERENCE_CSV_HEADER: &str = "situation,channel,q1,q2,bicoherence_mean";
pub const GATE_CSV_HEADER: &str = "segment_start,g,clean";

pub fn psd_rows(out: &mut String, situation: &str, f: &EegFeatureSet, bands: &BandDefs) {
    for (ch, name) in CHANNEL_NAMES.iter().enumerate() {
        for (b, band) in bands.all().iter().enumerate() {
            let _ = writeln!(out, "{situation},{name},{},{}", band.name, f.psd[ch][b]);
        }
    }
}

/// Undefined band pairs are written as `NA`.
pub fn bicoherence_rows(out: &mut String, situation: &str, f: &EegFeatureSet, bands: &BandDefs) {
    let all = bands.all();
    for (ch, name) in CHANNEL_NAMES.iter().enumerate() {
        for (i, q1) in all.iter().enumerate() {
            for (j, q2) in all.iter().enumerate() {
                let v = f.bicoherence[ch][i][j].map_or("NA".to_string(), |v| v.to_string());
                let _ = writeln!(out, "{situation},{name},{},{},{v}", q1.name, q2.name);
            }
        }
    }
}

pub fn gate_csv(segments: &[EegSegment]) -> String {
    let mut s = format!("{GATE_CSV_HEADER}\n");
    for seg in segments {
        let _ = writeln!(s, "{},{},{}", seg.start, seg.g, seg.clean as u8);
    }
    s
}
