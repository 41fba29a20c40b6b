//! Deterministic synthetic situations: a camera moving over a tileable
//! texture (still, pan, approach, retreat, shaky walk), a matching
//! accelerometer trace, two-channel EEG with alpha activity and
//! motion artifacts, per-frame saliency maps, ratings and a config file.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{PipelineConfig, SituationSpec};
use crate::ingest::{
    write_accel_csv, write_eeg_csv, write_pgm, AccelSeries, EegRecording, GrayImage,
};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const RATINGS_FILE: &str = "ratings.csv";

const TILE: usize = 512;
const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub situations: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub eeg_rate: f64,
    pub accel_rate: f64,
    pub saliency: bool,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            situations: 1,
            frames: 1000,
            width: 320,
            height: 240,
            fps: 30.0,
            eeg_rate: 250.0,
            accel_rate: 50.0,
            saliency: true,
            seed: 0,
        }
    }
}

/// Periodic multi-octave value noise, `TILE`×`TILE`, values in 0..=255.
fn texture(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut tex = vec![0.0; TILE * TILE];
    let octaves = [
        (64usize, 0.3),
        (32, 0.22),
        (16, 0.18),
        (8, 0.14),
        (4, 0.1),
        (2, 0.06),
    ];
    for (cell, weight) in octaves {
        let g = TILE / cell;
        let grid: Vec<f64> = (0..g * g).map(|_| rng.gen::<f64>()).collect();
        for y in 0..TILE {
            let (gy, fy) = (y / cell, (y % cell) as f64 / cell as f64);
            let sy = fy * fy * (3.0 - 2.0 * fy);
            for x in 0..TILE {
                let (gx, fx) = (x / cell, (x % cell) as f64 / cell as f64);
                let sx = fx * fx * (3.0 - 2.0 * fx);
                let at = |i: usize, j: usize| grid[(j % g) * g + (i % g)];
                let top = at(gx, gy) * (1.0 - sx) + at(gx + 1, gy) * sx;
                let bot = at(gx, gy + 1) * (1.0 - sx) + at(gx + 1, gy + 1) * sx;
                tex[y * TILE + x] += weight * (top * (1.0 - sy) + bot * sy);
            }
        }
    }
    tex.iter_mut().for_each(|v| *v *= 255.0);
    tex
}

fn sample_tile(tex: &[f64], x: f64, y: f64) -> f64 {
    let t = TILE as f64;
    let (x, y) = (x.rem_euclid(t), y.rem_euclid(t));
    let (x0, y0) = (x.floor() as usize % TILE, y.floor() as usize % TILE);
    let (x1, y1) = ((x0 + 1) % TILE, (y0 + 1) % TILE);
    let (fx, fy) = (x - x.floor(), y - y.floor());
    let top = tex[y0 * TILE + x0] * (1.0 - fx) + tex[y0 * TILE + x1] * fx;
    let bot = tex[y1 * TILE + x0] * (1.0 - fx) + tex[y1 * TILE + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    cx: f64,
    cy: f64,
    zoom: f64,
}

/// Phase of the scripted camera motion at fraction `u` of the situation.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Still,
    Pan,
    Approach,
    Pause,
    Retreat,
    Walk,
}

fn phase(u: f64) -> Phase {
    match u {
        u if u < 0.15 => Phase::Still,
        u if u < 0.35 => Phase::Pan,
        u if u < 0.55 => Phase::Approach,
        u if u < 0.65 => Phase::Pause,
        u if u < 0.85 => Phase::Retreat,
        _ => Phase::Walk,
    }
}

/// Device shaking: a short burst early on and the final walking phase.
fn shaking(u: f64) -> bool {
    (0.05..0.09).contains(&u) || phase(u) == Phase::Walk
}

fn camera_path(n: usize, rng: &mut ChaCha8Rng) -> Vec<Pose> {
    let jitter = Normal::new(0.0, 1.5).unwrap();
    let mut pose = Pose {
        cx: TILE as f64 / 2.0,
        cy: TILE as f64 / 2.0,
        zoom: 1.0,
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let u = k as f64 / n as f64;
        match phase(u) {
            Phase::Still | Phase::Pause => {}
            Phase::Pan => pose.cx += 3.0,
            Phase::Approach => pose.zoom *= 1.012,
            Phase::Retreat => pose.zoom /= 1.012,
            Phase::Walk => {
                pose.cx -= 2.0;
                pose.cy += 1.0;
            }
        }
        let mut p = pose;
        if shaking(u) {
            p.cx += jitter.sample(rng);
            p.cy += jitter.sample(rng);
        }
        out.push(p);
    }
    out
}

fn render(tex: &[f64], pose: Pose, w: usize, h: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let (hw, hh) = (w as f64 / 2.0, h as f64 / 2.0);
    let sensor = Normal::new(0.0, 2.0).unwrap();
    GrayImage::from_fn(w, h, |x, y| {
        let wx = pose.cx + (x as f64 - hw) / pose.zoom;
        let wy = pose.cy + (y as f64 - hh) / pose.zoom;
        let v = sample_tile(tex, wx, wy) + sensor.sample(rng);
        v.round().clamp(0.0, 255.0) as u8
    })
}

fn saliency_map(w: usize, h: usize, u: f64) -> GrayImage {
    // a fixation blob drifting on a slow ellipse around the center
    let cx = w as f64 * (0.5 + 0.15 * (2.0 * PI * u).cos());
    let cy = h as f64 * (0.5 + 0.12 * (2.0 * PI * u).sin());
    let s = 0.3 * w.min(h) as f64;
    GrayImage::from_fn(w, h, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (255.0 * (-d2 / (2.0 * s * s)).exp()).round() as u8
    })
}

fn accel_trace(duration: f64, rate: f64, rng: &mut ChaCha8Rng) -> AccelSeries {
    let quiet = Normal::new(0.0, 0.03).unwrap();
    let shake = Normal::new(0.0, 2.5).unwrap();
    let n = (duration * rate).ceil() as usize + 1;
    let mut ts = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        let u = t / duration;
        let noise = if shaking(u) { &shake } else { &quiet };
        ts.push(t);
        samples.push([
            noise.sample(rng),
            noise.sample(rng),
            GRAVITY + noise.sample(rng),
        ]);
    }
    AccelSeries::new(ts, samples).expect("synthetic accel is well formed")
}

fn eeg_trace(duration: f64, rate: f64, rng: &mut ChaCha8Rng) -> EegRecording {
    let noise = Normal::new(0.0, 3.0).unwrap();
    let artifact = Normal::new(0.0, 40.0).unwrap();
    let n = (duration * rate).ceil() as usize + 1;
    let phases: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut ts = Vec::with_capacity(n);
    let mut ch = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut drift = [0.0f64; 2];
    for i in 0..n {
        let t = i as f64 / rate;
        let u = t / duration;
        ts.push(t);
        let alpha_amp = 8.0 + 4.0 * (2.0 * PI * 0.05 * t).sin();
        for c in 0..2 {
            let p = &phases[c * 3..c * 3 + 3];
            let mut v = 40.0
                + 15.0 * (2.0 * PI * 0.3 * t + p[0]).sin()
                + alpha_amp * (2.0 * PI * 10.2 * t + p[1]).sin()
                + 4.0 * (2.0 * PI * 6.3 * t + p[2]).sin()
                + 2.0 * (2.0 * PI * 21.4 * t).sin()
                + noise.sample(rng);
            if shaking(u) {
                drift[c] = 0.95 * drift[c] + artifact.sample(rng);
                v += drift[c];
            } else {
                drift[c] *= 0.9;
                v += drift[c];
            }
            ch[c].push(v);
        }
    }
    EegRecording::new(ts, ch, rate).expect("synthetic EEG is well formed")
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Write `opts.situations` synthetic situations under `out` together with
/// `ratings.csv` and a `config.json` that points at them. Returns the config
/// with paths relative to `out`.
pub fn generate(out: &Path, opts: &SynthOptions) -> Result<PipelineConfig> {
    if opts.frames < 2 || opts.situations == 0 {
        return Err(Error::invalid(
            "synthesis needs at least 2 frames and 1 situation",
        ));
    }
    if opts.width < 32 || opts.height < 32 {
        return Err(Error::invalid("synthetic frames must be at least 32x32"));
    }
    mkdir(out)?;
    let mut cfg = PipelineConfig {
        fps: opts.fps,
        ratings: Some(PathBuf::from(RATINGS_FILE)),
        ..Default::default()
    };
    let mut ratings = String::from("situation_id,valence,arousal\n");
    let duration = (opts.frames - 1) as f64 / opts.fps;

    for s in 0..opts.situations {
        let id = format!("s{:02}", s + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(s as u64 + 1);
        let dir = out.join(&id);
        let frames_dir = dir.join("frames");
        let sal_dir = dir.join("saliency");
        mkdir(&frames_dir)?;

        let tex = texture(&mut rng);
        let path = camera_path(opts.frames, &mut rng);
        for (k, pose) in path.iter().enumerate() {
            let img = render(&tex, *pose, opts.width, opts.height, &mut rng);
            write_pgm(&frames_dir.join(format!("frame_{k:04}.pgm")), &img)?;
        }
        if opts.saliency {
            mkdir(&sal_dir)?;
            for k in 0..opts.frames {
                let u = k as f64 / opts.frames as f64;
                let map = saliency_map(opts.width, opts.height, u);
                write_pgm(&sal_dir.join(format!("saliency_{k:04}.pgm")), &map)?;
            }
        }
        // sensors run slightly past the last frame, as a real logger would
        let accel = accel_trace(duration + 0.5, opts.accel_rate, &mut rng);
        write_accel_csv(&dir.join("accel.csv"), &accel)?;
        let eeg = eeg_trace(duration + 0.5, opts.eeg_rate, &mut rng);
        write_eeg_csv(&dir.join("eeg.csv"), &eeg)?;

        for _ in 0..3 {
            let v: i32 = rng.gen_range(-3..=3);
            let a: i32 = rng.gen_range(0..=6);
            let _ = writeln!(ratings, "{id},{v},{a}");
        }
        cfg.situations.push(SituationSpec {
            id: id.clone(),
            frames: PathBuf::from(&id).join("frames"),
            saliency: opts.saliency.then(|| PathBuf::from(&id).join("saliency")),
            accel: PathBuf::from(&id).join("accel.csv"),
            eeg: PathBuf::from(&id).join("eeg.csv"),
        });
    }
    let rpath = out.join(RATINGS_FILE);
    fs::write(&rpath, ratings).map_err(|e| Error::io(&rpath, e))?;
    let cpath = out.join(CONFIG_FILE);
    fs::write(&cpath, cfg.to_json()).map_err(|e| Error::io(&cpath, e))?;
    Ok(cfg)
}
