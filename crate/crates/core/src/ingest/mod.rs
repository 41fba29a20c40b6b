//! Loading and aligning the three input streams of a situation.

mod pgm;
mod series;

use std::fs;
use std::path::{Path, PathBuf};

pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm, GrayImage};
pub use series::{
    load_accel_csv, load_csv_series, load_eeg_csv, write_accel_csv, write_eeg_csv, SensorSeries,
    SeriesKind,
};

use crate::util::{interp_linear, median};
use crate::{Error, Result};

pub const DEFAULT_FPS: f64 = 30.0;
/// Name of the optional per-directory frame timestamp file.
pub const TIMESTAMP_SIDECAR: &str = "timestamps.txt";
/// Timestamps closer than this are considered equal.
pub const ALIGN_TOL_S: f64 = 1e-6;
/// Sensor gaps longer than this abort assembly.
pub const MAX_GAP_S: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub frames: Vec<GrayImage>,
    pub timestamps: Vec<f64>,
    /// Numeric index parsed from each file name (used to find saliency maps).
    pub indices: Vec<u64>,
    pub nominal_fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayImage>, timestamps: Vec<f64>, nominal_fps: f64) -> Result<Self> {
        let indices = (0..frames.len() as u64).collect();
        Self::with_indices(frames, timestamps, indices, nominal_fps)
    }

    pub fn with_indices(
        frames: Vec<GrayImage>,
        timestamps: Vec<f64>,
        indices: Vec<u64>,
        nominal_fps: f64,
    ) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a frame sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if timestamps.len() != frames.len() || indices.len() != frames.len() {
            return Err(Error::invalid("frame, timestamp and index counts differ"));
        }
        let dims = frames[0].dims();
        if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: f.dims(),
            });
        }
        if timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "frame timestamps must be strictly increasing",
            ));
        }
        Ok(Self {
            frames,
            timestamps,
            indices,
            nominal_fps,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccelSeries {
    pub timestamps: Vec<f64>,
    /// (ax, ay, az) in m/s².
    pub samples: Vec<[f64; 3]>,
}

impl AccelSeries {
    pub fn new(timestamps: Vec<f64>, samples: Vec<[f64; 3]>) -> Result<Self> {
        if timestamps.len() != samples.len() {
            return Err(Error::invalid(
                "accelerometer timestamps and samples differ in length",
            ));
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid(
                "accelerometer timestamps must be non-decreasing",
            ));
        }
        Ok(Self {
            timestamps,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Euclidean norm of every sample.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|a| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt())
            .collect()
    }

    /// Linearly interpolated sample at `t` (end values held).
    pub fn at(&self, t: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let ys: Vec<f64> = self.samples.iter().map(|s| s[k]).collect();
            *o = interp_linear(&self.timestamps, &ys, t);
        }
        out
    }
}

/// Two-channel frontal EEG (F3, F4) in µV.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub timestamps: Vec<f64>,
    pub channels: [Vec<f64>; 2],
    pub sample_rate: f64,
    /// True for samples synthesized by gap filling.
    pub filled: Vec<bool>,
}

impl EegRecording {
    pub fn new(timestamps: Vec<f64>, channels: [Vec<f64>; 2], sample_rate: f64) -> Result<Self> {
        let filled = vec![false; timestamps.len()];
        Self::with_flags(timestamps, channels, sample_rate, filled)
    }

    pub fn with_flags(
        timestamps: Vec<f64>,
        channels: [Vec<f64>; 2],
        sample_rate: f64,
        filled: Vec<bool>,
    ) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!(
                "EEG sample rate must be positive, got {sample_rate}"
            )));
        }
        let n = timestamps.len();
        if channels[0].len() != n || channels[1].len() != n || filled.len() != n {
            return Err(Error::invalid(
                "EEG channels and timestamps differ in length",
            ));
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("EEG timestamps must be non-decreasing"));
        }
        Ok(Self {
            timestamps,
            channels,
            sample_rate,
            filled,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }
}

/// One spatiotemporal situation with all streams aligned to the frames.
#[derive(Debug, Clone)]
pub struct Situation {
    pub id: String,
    pub frames: FrameSequence,
    pub accel_at_frames: AccelSeries,
    pub eeg: EegRecording,
    pub duration_s: f64,
}

/// Glob match supporting at most one `*`.
fn match_pattern(pattern: &str, name: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == name,
        Some((pre, post)) => {
            name.len() >= pre.len() + post.len() && name.starts_with(pre) && name.ends_with(post)
        }
    }
}

/// Last run of ASCII digits in the file stem.
fn parse_index(name: &str) -> Option<u64> {
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    let bytes = stem.as_bytes();
    let end = bytes.iter().rposition(|b| b.is_ascii_digit())? + 1;
    let start = bytes[..end]
        .iter()
        .rposition(|b| !b.is_ascii_digit())
        .map_or(0, |p| p + 1);
    stem[start..end].parse().ok()
}

fn read_sidecar(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Csv {
                path: path.to_path_buf(),
                reason: format!("line {}: not a number: {:?}", i + 1, l.trim()),
            })
        })
        .collect()
}

/// Files in `dir` matching `pattern` (one `*` wildcard), ordered by the
/// numeric index in the name; names without digits sort last.
pub fn list_indexed_files(dir: &Path, pattern: &str) -> Result<Vec<(u64, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(u64, String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !match_pattern(pattern, &name) {
            continue;
        }
        let idx = parse_index(&name).unwrap_or(u64::MAX);
        files.push((idx, name, entry.path()));
    }
    if files.is_empty() {
        return Err(Error::EmptyDirectory {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }
    files.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(files.into_iter().map(|(i, _, p)| (i, p)).collect())
}

/// Load every PGM in `dir` matching `pattern`, ordered as by
/// [`list_indexed_files`]. Timestamps come from `timestamps.txt` when
/// present, otherwise `index_position / nominal_fps`.
pub fn load_frames(dir: &Path, pattern: &str, nominal_fps: f64) -> Result<FrameSequence> {
    if !(nominal_fps > 0.0) {
        return Err(Error::invalid("nominal fps must be positive"));
    }
    let files = list_indexed_files(dir, pattern)?;

    let mut frames = Vec::with_capacity(files.len());
    for (_, path) in &files {
        let img = read_pgm(path)?;
        if let Some(first) = frames.first() {
            let first: &GrayImage = first;
            if first.dims() != img.dims() {
                return Err(Error::DimensionMismatch {
                    expected: first.dims(),
                    found: img.dims(),
                });
            }
        }
        frames.push(img);
    }

    let sidecar = dir.join(TIMESTAMP_SIDECAR);
    let timestamps = if sidecar.is_file() {
        let ts = read_sidecar(&sidecar)?;
        if ts.len() != frames.len() {
            return Err(Error::Csv {
                path: sidecar,
                reason: format!("{} timestamps for {} frames", ts.len(), frames.len()),
            });
        }
        ts
    } else {
        (0..frames.len()).map(|i| i as f64 / nominal_fps).collect()
    };
    let indices = files.iter().map(|f| f.0).collect();
    FrameSequence::with_indices(frames, timestamps, indices, nominal_fps)
}

fn check_overlap(what: &'static str, ts: &[f64], lo: f64, hi: f64) -> Result<()> {
    match (ts.first(), ts.last()) {
        (Some(&a), Some(&b)) if a <= hi + ALIGN_TOL_S && b >= lo - ALIGN_TOL_S => Ok(()),
        _ => Err(Error::NoOverlap { what }),
    }
}

/// Length of the sensor dropout that `t` falls into, or 0 when `t` is
/// covered at the stream's normal cadence. An interval counts as a dropout
/// when it exceeds 1.5 nominal periods; beyond the sampled range the distance
/// to the nearest end is the dropout.
fn dropout_at(ts: &[f64], nominal: f64, t: f64) -> f64 {
    let n = ts.len();
    if t < ts[0] - ALIGN_TOL_S {
        return ts[0] - t;
    }
    if t > ts[n - 1] + ALIGN_TOL_S {
        return t - ts[n - 1];
    }
    let hi = ts.partition_point(|&x| x <= t).clamp(1, n - 1);
    let gap = ts[hi] - ts[hi - 1];
    if gap > 1.5 * nominal {
        gap
    } else {
        0.0
    }
}

fn align_accel(frames: &FrameSequence, accel: &AccelSeries) -> Result<AccelSeries> {
    let ft = &frames.timestamps;
    check_overlap("accelerometer", &accel.timestamps, ft[0], ft[ft.len() - 1])?;
    let dts: Vec<f64> = accel.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    let nominal = median(&dts);
    let cols: [Vec<f64>; 3] = std::array::from_fn(|k| accel.samples.iter().map(|s| s[k]).collect());
    let mut samples = Vec::with_capacity(ft.len());
    for &t in ft {
        let gap = dropout_at(&accel.timestamps, nominal, t);
        if gap > MAX_GAP_S {
            return Err(Error::SensorGap {
                what: "accelerometer",
                gap_s: gap,
                limit_s: MAX_GAP_S,
                at: t,
            });
        }
        samples.push(std::array::from_fn(|k| {
            interp_linear(&accel.timestamps, &cols[k], t)
        }));
    }
    AccelSeries::new(ft.clone(), samples)
}

fn align_eeg(frames: &FrameSequence, eeg: &EegRecording) -> Result<EegRecording> {
    let ft = &frames.timestamps;
    let (lo, hi) = (ft[0], ft[ft.len() - 1]);
    check_overlap("EEG", &eeg.timestamps, lo, hi)?;
    let period = 1.0 / eeg.sample_rate;

    let keep: Vec<usize> = (0..eeg.len())
        .filter(|&i| {
            let t = eeg.timestamps[i];
            t >= lo - ALIGN_TOL_S && t <= hi + ALIGN_TOL_S
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::NoOverlap { what: "EEG" });
    }

    let mut ts = Vec::with_capacity(keep.len());
    let mut ch: [Vec<f64>; 2] = [
        Vec::with_capacity(keep.len()),
        Vec::with_capacity(keep.len()),
    ];
    let mut filled = Vec::with_capacity(keep.len());
    let mut prev: Option<usize> = None;
    for &i in &keep {
        let t = eeg.timestamps[i];
        if let Some(p) = prev {
            let t0 = eeg.timestamps[p];
            let dt = t - t0;
            // one missing sample leaves a gap of two periods
            if dt > 1.5 * period {
                if dt > MAX_GAP_S {
                    return Err(Error::SensorGap {
                        what: "EEG",
                        gap_s: dt,
                        limit_s: MAX_GAP_S,
                        at: t0,
                    });
                }
                let missing = (dt / period).round() as usize - 1;
                for k in 1..=missing {
                    let tk = t0 + k as f64 * period;
                    let w = (tk - t0) / dt;
                    ts.push(tk);
                    for c in 0..2 {
                        let a = eeg.channels[c][p];
                        let b = eeg.channels[c][i];
                        ch[c].push(a + (b - a) * w);
                    }
                    filled.push(true);
                }
            }
        }
        ts.push(t);
        ch[0].push(eeg.channels[0][i]);
        ch[1].push(eeg.channels[1][i]);
        filled.push(eeg.filled[i]);
        prev = Some(i);
    }
    EegRecording::with_flags(ts, ch, eeg.sample_rate, filled)
}

/// Align accelerometer and EEG to the frame clock.
///
/// The accelerometer is linearly interpolated to every frame timestamp; EEG
/// is trimmed to the frame range and internal dropouts are filled linearly on
/// the nominal sample grid (filled samples are flagged). Any dropout longer
/// than [`MAX_GAP_S`] is an error.
pub fn assemble_situation(
    id: impl Into<String>,
    frames: FrameSequence,
    accel: &AccelSeries,
    eeg: &EegRecording,
) -> Result<Situation> {
    let accel_at_frames = align_accel(&frames, accel)?;
    let eeg = align_eeg(&frames, eeg)?;
    let ft = &frames.timestamps;
    let duration_s = ft[ft.len() - 1] - ft[0];
    Ok(Situation {
        id: id.into(),
        frames,
        accel_at_frames,
        eeg,
        duration_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames_at(ts: &[f64]) -> FrameSequence {
        let frames = ts
            .iter()
            .map(|_| GrayImage::from_fn(4, 4, |_, _| 0))
            .collect();
        FrameSequence::new(frames, ts.to_vec(), DEFAULT_FPS).unwrap()
    }

    fn eeg(ts: Vec<f64>, f3: Vec<f64>, rate: f64) -> EegRecording {
        let f4 = f3.clone();
        EegRecording::new(ts, [f3, f4], rate).unwrap()
    }

    #[test]
    fn pattern_and_index_parsing() {
        assert!(match_pattern("frame_*.pgm", "frame_0003.pgm"));
        assert!(!match_pattern("frame_*.pgm", "saliency_0003.pgm"));
        assert!(!match_pattern("frame_*.pgm", "frame_0003.png"));
        assert_eq!(parse_index("frame_0012.pgm"), Some(12));
        assert_eq!(parse_index("cam2_frame_07.pgm"), Some(7));
        assert_eq!(parse_index("frame.pgm"), None);
    }

    #[test]
    fn accel_midpoint_interpolation() {
        let frames = frames_at(&[0.0, 1.0, 2.0]);
        let accel =
            AccelSeries::new(vec![0.0, 2.0], vec![[0.0, 0.0, 0.0], [2.0, 2.0, 2.0]]).unwrap();
        let e = eeg(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0], 1.0);
        let s = assemble_situation("s", frames, &accel, &e).unwrap();
        assert_eq!(s.accel_at_frames.samples[1], [1.0, 1.0, 1.0]);
        assert_eq!(s.duration_s, 2.0);
    }

    #[test]
    fn accel_without_overlap_is_rejected() {
        let frames = frames_at(&[0.0, 1.0]);
        let accel = AccelSeries::new(vec![10.0, 20.0], vec![[0.0; 3], [0.0; 3]]).unwrap();
        let e = eeg(vec![0.0, 0.5, 1.0], vec![0.0; 3], 2.0);
        let err = assemble_situation("s", frames, &accel, &e).unwrap_err();
        assert!(matches!(
            err,
            Error::NoOverlap {
                what: "accelerometer"
            }
        ));
    }

    #[test]
    fn single_missing_eeg_sample_is_filled_and_flagged() {
        let frames = frames_at(&[0.0, 0.016]);
        let accel = AccelSeries::new(vec![0.0, 0.016], vec![[0.0; 3], [0.0; 3]]).unwrap();
        // 250 Hz with the sample at 0.008 missing
        let e = eeg(
            vec![0.0, 0.004, 0.012, 0.016],
            vec![2.0, 4.0, 6.0, 8.0],
            250.0,
        );
        let s = assemble_situation("s", frames, &accel, &e).unwrap();
        assert_eq!(s.eeg.len(), 5);
        assert!((s.eeg.channels[0][2] - 5.0).abs() < 1e-12);
        assert!((s.eeg.timestamps[2] - 0.008).abs() < 1e-12);
        assert_eq!(s.eeg.filled, vec![false, false, true, false, false]);
    }

    #[test]
    fn accel_dropout_longer_than_limit_aborts() {
        let frames = frames_at(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let ts = vec![
            0.0, 0.1, 0.2, 0.3, 2.8, 2.9, 3.0, 3.1, 3.2, 3.3, 3.4, 3.5, 4.0,
        ];
        let accel = AccelSeries::new(ts.clone(), vec![[0.0; 3]; ts.len()]).unwrap();
        let e = eeg(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0; 5], 1.0);
        let err = assemble_situation("s", frames, &accel, &e).unwrap_err();
        assert!(matches!(
            err,
            Error::SensorGap {
                what: "accelerometer",
                ..
            }
        ));
    }

    #[test]
    fn long_eeg_dropout_aborts() {
        let frames = frames_at(&[0.0, 3.0]);
        let accel = AccelSeries::new(vec![0.0, 3.0], vec![[0.0; 3], [0.0; 3]]).unwrap();
        let e = eeg(vec![0.0, 0.5, 2.0, 2.5], vec![0.0; 4], 2.0);
        let err = assemble_situation("s", frames, &accel, &e).unwrap_err();
        assert!(matches!(err, Error::SensorGap { what: "EEG", .. }));
    }

    #[test]
    fn eeg_trimmed_to_frame_range() {
        let frames = frames_at(&[1.0, 2.0]);
        let accel = AccelSeries::new(vec![0.0, 3.0], vec![[0.0; 3], [0.0; 3]]).unwrap();
        let ts: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
        let e = eeg(ts.clone(), ts.clone(), 4.0);
        let s = assemble_situation("s", frames, &accel, &e).unwrap();
        assert_eq!(s.eeg.timestamps.first(), Some(&1.0));
        assert_eq!(s.eeg.timestamps.last(), Some(&2.0));
        assert_eq!(s.eeg.len(), 5);
    }

    #[test]
    fn frame_sequence_invariants() {
        let a = GrayImage::from_fn(4, 4, |_, _| 0);
        let b = GrayImage::from_fn(5, 4, |_, _| 0);
        assert!(matches!(
            FrameSequence::new(vec![a.clone(), b], vec![0.0, 1.0], 30.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(FrameSequence::new(vec![a.clone(), a.clone()], vec![1.0, 1.0], 30.0).is_err());
        assert!(FrameSequence::new(vec![a], vec![0.0], 30.0).is_err());
    }
}
