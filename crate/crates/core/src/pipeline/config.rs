//! Run configuration: one JSON file holding the situation list and every
//! tunable. Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::affect::AffectParams;
use crate::curve::{CurveConfig, StateThresholds};
use crate::eeg::EegConfig;
use crate::flow::FlowConfig;
use crate::ingest::DEFAULT_FPS;
use crate::motivation::MotivationConfig;
use crate::saliency::{DEFAULT_SIGMA_FRAC, DEFAULT_THRESHOLD};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SituationSpec {
    pub id: String,
    /// Directory of PGM frames (optional `timestamps.txt` sidecar).
    pub frames: PathBuf,
    /// Directory of per-frame PGM saliency maps; center prior when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency: Option<PathBuf>,
    /// CSV `t,ax,ay,az`.
    pub accel: PathBuf,
    /// CSV `t,f3,f4`.
    pub eeg: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencySettings {
    pub threshold: f64,
    /// Center-prior std as a fraction of min(W, H).
    pub center_sigma_frac: f64,
}

impl Default for SaliencySettings {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            center_sigma_frac: DEFAULT_SIGMA_FRAC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSettings {
    pub fit: CurveConfig,
    /// Valence grid for the sampled curve, spanning [-1, 1].
    pub grid_points: usize,
    pub thresholds: StateThresholds,
}

impl Default for CurveSettings {
    fn default() -> Self {
        Self {
            fit: CurveConfig::default(),
            grid_points: 201,
            thresholds: StateThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub plots: bool,
    /// Per-window affine fits for every frame.
    pub motivation_debug: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            plots: true,
            motivation_debug: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub situations: Vec<SituationSpec>,
    /// CSV `situation_id,valence,arousal`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratings: Option<PathBuf>,
    pub fps: f64,
    pub frame_pattern: String,
    pub saliency_pattern: String,
    /// Std of the Gaussian smoothing in the accelerometer gate (s).
    pub gate_sigma_s: f64,
    pub workers: usize,
    pub flow: FlowConfig,
    pub saliency: SaliencySettings,
    pub motivation: MotivationConfig,
    pub affect: AffectParams,
    pub curve: CurveSettings,
    pub eeg: EegConfig,
    pub output: OutputSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            situations: Vec::new(),
            ratings: None,
            fps: DEFAULT_FPS,
            frame_pattern: "frame_*.pgm".into(),
            saliency_pattern: "saliency_*.pgm".into(),
            gate_sigma_s: 0.5,
            workers: 1,
            flow: FlowConfig::default(),
            saliency: SaliencySettings::default(),
            motivation: MotivationConfig::default(),
            affect: AffectParams::default(),
            curve: CurveSettings::default(),
            eeg: EegConfig::default(),
            output: OutputSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse `path` and resolve every relative path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.situations {
            fix(&mut s.frames);
            fix(&mut s.accel);
            fix(&mut s.eeg);
            if let Some(p) = s.saliency.as_mut() {
                fix(p);
            }
        }
        if let Some(p) = self.ratings.as_mut() {
            fix(p);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.situations.is_empty() {
            return bad("no situations configured".into());
        }
        let mut ids: Vec<&str> = self.situations.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate situation id {:?}", w[0]));
        }
        for id in ids {
            if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
                return bad(format!("situation id {id:?} is not a valid directory name"));
            }
        }
        if !(self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if !(self.gate_sigma_s > 0.0) {
            return bad("gate_sigma_s must be positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.saliency.threshold > 0.0 && self.saliency.threshold < 1.0) {
            return bad("saliency.threshold must lie in (0,1)".into());
        }
        if !(self.saliency.center_sigma_frac > 0.0) {
            return bad("saliency.center_sigma_frac must be positive".into());
        }
        if self.curve.grid_points < 2 {
            return bad("curve.grid_points must be at least 2".into());
        }
        let stage =
            |r: Result<()>, what: &str| r.map_err(|e| Error::Config(format!("{what}: {e}")));
        stage(self.flow.validate(), "flow")?;
        stage(self.motivation.validate(), "motivation")?;
        stage(self.affect.validate(), "affect")?;
        stage(self.curve.thresholds.validate(), "curve.thresholds")?;
        stage(self.eeg.validate(), "eeg")?;
        Ok(())
    }
}
