//! Orchestration: per-situation component extraction (parallel), the batch
//! normalization barrier, then per-situation labels, curves, states, EEG
//! features and plots, and finally the evaluation report.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{PipelineConfig, SituationSpec};
use super::plot;
use crate::affect::{label_batch, ComponentSeries, LabelSeries, Maxima};
use crate::curve::{
    bin_state, curve_csv, fit_affective_curve, linspace, sample_curve, to_sam_scale,
    AffectiveState, SamScalePair,
};
use crate::eeg::{self, EegAnalysis};
use crate::eval::{evaluate, load_ratings, situation_label_summary, BandPowers, EvalReport};
use crate::flow::{artifact_gate, estimate_flow, motion_activity, motion_component};
use crate::ingest::{
    assemble_situation, list_indexed_files, load_accel_csv, load_eeg_csv, load_frames, EegRecording,
};
use crate::motivation::{debug_rows, motivation_component, DEBUG_CSV_HEADER};
use crate::saliency::{attentive_region, binarize, center_prior, load_saliency, SaliencyMap};
use crate::{Error, Result};

pub const COMPONENTS_CSV: &str = "components.csv";
pub const LABELS_CSV: &str = "labels.csv";
pub const CURVE_CSV: &str = "curve.csv";
pub const STATES_JSON: &str = "states.json";
pub const EEG_PSD_CSV: &str = "eeg_psd.csv";
pub const EEG_BICOHERENCE_CSV: &str = "eeg_bicoherence.csv";
pub const EEG_GATE_CSV: &str = "eeg_gate.csv";
pub const MOTIVATION_DEBUG_CSV: &str = "motivation_debug.csv";
pub const VA_SVG: &str = "va.svg";
pub const COMPONENTS_SVG: &str = "components.svg";
pub const EVAL_REPORT_JSON: &str = "eval_report.json";
pub const RUN_SUMMARY_JSON: &str = "run_summary.json";

/// Label used for failures that concern the whole run.
pub const RUN_SCOPE: &str = "*";

/// A module error attributed to a situation and pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub situation: String,
    pub stage: String,
    pub message: String,
}

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "situation {} [{}]: {}",
            self.situation, self.stage, self.message
        )
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SituationSummary {
    pub id: String,
    pub frames: usize,
    pub duration_s: f64,
    pub eeg_filled_samples: usize,
    pub saliency_fallback_frames: usize,
    pub empty_region_frames: usize,
    pub gate_theta: Option<f64>,
    pub clean_segments: Option<usize>,
    pub curve_degenerate: Option<bool>,
    pub label_summary: Option<SamScalePair>,
    pub warnings: Vec<String>,
    pub completed: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub maxima: Option<Maxima>,
    pub situations: Vec<SituationSummary>,
    pub failures: Vec<StageFailure>,
    #[serde(skip)]
    pub eval: Option<EvalReport>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

trait StageExt<T> {
    fn stage(self, name: &'static str) -> Staged<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, name: &'static str) -> Staged<T> {
        self.map_err(|e| (name, e))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Streams of one situation after alignment, frames dropped.
struct Aligned {
    frame_times: Vec<f64>,
    eeg: EegRecording,
    gate: Vec<f64>,
}

struct Prepared {
    components: ComponentSeries,
    aligned: Aligned,
    debug: Option<String>,
    summary: SituationSummary,
}

fn saliency_lookup(spec: &SituationSpec, cfg: &PipelineConfig) -> Result<HashMap<u64, PathBuf>> {
    match &spec.saliency {
        None => Ok(HashMap::new()),
        Some(dir) => Ok(list_indexed_files(dir, &cfg.saliency_pattern)?
            .into_iter()
            .collect()),
    }
}

fn load_aligned(
    spec: &SituationSpec,
    cfg: &PipelineConfig,
) -> Staged<(crate::ingest::Situation, Vec<f64>)> {
    let frames = load_frames(&spec.frames, &cfg.frame_pattern, cfg.fps).stage("load")?;
    let accel = load_accel_csv(&spec.accel).stage("load")?;
    let eeg = load_eeg_csv(&spec.eeg).stage("load")?;
    let situation = assemble_situation(spec.id.clone(), frames, &accel, &eeg).stage("align")?;
    let gate = artifact_gate(&situation.accel_at_frames, cfg.gate_sigma_s).stage("gate")?;
    Ok((situation, gate))
}

fn prepare(spec: &SituationSpec, cfg: &PipelineConfig) -> Staged<Prepared> {
    let (situation, gate) = load_aligned(spec, cfg)?;
    let frames = &situation.frames;
    let n = frames.len();
    let dims = frames.dims();
    let mut summary = SituationSummary {
        id: spec.id.clone(),
        frames: n,
        duration_s: situation.duration_s,
        eeg_filled_samples: situation.eeg.filled_count(),
        ..Default::default()
    };

    let maps = saliency_lookup(spec, cfg).stage("saliency")?;
    let prior = center_prior(dims, cfg.saliency.center_sigma_frac).stage("saliency")?;
    let v_max = cfg.flow.max_displacement() as f64;
    let mut m = vec![0.0; n];
    let mut log_o = vec![0.0; n];
    let mut debug = cfg
        .output
        .motivation_debug
        .then(|| DEBUG_CSV_HEADER.to_string());

    // Frame k carries the motion from k-1 to k; frame 0 repeats frame 1.
    for k in 1..n {
        let flow =
            estimate_flow(&frames.frames[k - 1], &frames.frames[k], &cfg.flow).stage("flow")?;
        let m_bar = motion_activity(&flow, v_max).stage("flow")?;
        m[k] = motion_component(m_bar, gate[k]).stage("flow")?;

        let loaded: Option<SaliencyMap> = match maps.get(&frames.indices[k - 1]) {
            Some(path) => Some(load_saliency(path, dims).stage("saliency")?),
            None => None,
        };
        if loaded.is_none() {
            summary.saliency_fallback_frames += 1;
        }
        let map = loaded.as_ref().unwrap_or(&prior);
        let mask = binarize(map, cfg.saliency.threshold).stage("saliency")?;
        let region = attentive_region(&mask);
        if region.fallback {
            summary.empty_region_frames += 1;
        }
        let mot = motivation_component(&flow, &region, &cfg.motivation).stage("motivation")?;
        log_o[k] = mot.log_o;
        if let Some(d) = debug.as_mut() {
            debug_rows(k, &mot, d);
        }
    }
    if n > 1 {
        m[0] = m[1];
        log_o[0] = log_o[1];
    }
    if spec.saliency.is_some() && summary.saliency_fallback_frames > 0 {
        summary.warnings.push(format!(
            "{} frames had no saliency map; center prior used",
            summary.saliency_fallback_frames
        ));
    }
    let components =
        ComponentSeries::with_contentment(frames.timestamps.clone(), m, log_o, &cfg.affect)
            .stage("components")?;
    Ok(Prepared {
        aligned: Aligned {
            frame_times: frames.timestamps.clone(),
            eeg: situation.eeg,
            gate,
        },
        components,
        debug,
        summary,
    })
}

pub fn components_csv(c: &ComponentSeries, labels: &LabelSeries) -> String {
    let mut s = String::from("t,m,log_o,l,A,V\n");
    for i in 0..c.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.timestamps[i], c.m[i], c.log_o[i], c.l[i], labels.arousal[i], labels.valence[i]
        );
    }
    s
}

pub fn labels_csv(labels: &LabelSeries) -> String {
    let mut s = String::from("t,valence,arousal\n");
    for i in 0..labels.timestamps.len() {
        let _ = writeln!(
            s,
            "{},{},{}",
            labels.timestamps[i], labels.valence[i], labels.arousal[i]
        );
    }
    s
}

/// Read a labels CSV written by [`labels_csv`].
pub fn read_labels_csv(path: &Path) -> Result<LabelSeries> {
    let csv_err = |reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => csv_err(format!("{other:?}")),
    })?;
    let mut out = LabelSeries::default();
    for (i, rec) in rdr.deserialize::<(f64, f64, f64)>().enumerate() {
        let (t, v, a) = rec.map_err(|e| csv_err(format!("line {}: {e}", i + 2)))?;
        out.timestamps.push(t);
        out.valence.push(v);
        out.arousal.push(a);
    }
    Ok(out)
}

#[derive(Serialize)]
struct StatePoint {
    t: f64,
    v6: f64,
    a6: f64,
    state: AffectiveState,
}

#[derive(Serialize)]
struct StateSummary<'a> {
    situation_id: &'a str,
    points: Vec<StatePoint>,
    state_histogram: BTreeMap<String, usize>,
}

pub fn states_json(id: &str, labels: &LabelSeries, cfg: &PipelineConfig) -> Result<String> {
    let mut hist: BTreeMap<String, usize> = AffectiveState::ALL
        .iter()
        .map(|s| (s.code().to_string(), 0))
        .collect();
    let mut points = Vec::with_capacity(labels.timestamps.len());
    for i in 0..labels.timestamps.len() {
        let pair = to_sam_scale(labels.valence[i], labels.arousal[i])?;
        let state = bin_state(pair, &cfg.curve.thresholds);
        *hist.entry(state.code().to_string()).or_default() += 1;
        points.push(StatePoint {
            t: labels.timestamps[i],
            v6: pair.v6,
            a6: pair.a6,
            state,
        });
    }
    let summary = StateSummary {
        situation_id: id,
        points,
        state_histogram: hist,
    };
    Ok(serde_json::to_string_pretty(&summary).map_err(|e| Error::Numeric(e.to_string()))? + "\n")
}

fn eeg_outputs(
    dir: &Path,
    id: &str,
    aligned: &Aligned,
    cfg: &PipelineConfig,
    summary: &mut SituationSummary,
) -> Result<BandPowers> {
    let analysis: EegAnalysis =
        eeg::analyze(&aligned.eeg, &aligned.frame_times, &aligned.gate, &cfg.eeg)?;
    let mut psd = format!("{}\n", eeg::PSD_CSV_HEADER);
    eeg::psd_rows(&mut psd, id, &analysis.features, &cfg.eeg.bands);
    let mut bic = format!("{}\n", eeg::BICOHERENCE_CSV_HEADER);
    eeg::bicoherence_rows(&mut bic, id, &analysis.features, &cfg.eeg.bands);
    write_file(&dir.join(EEG_PSD_CSV), &psd)?;
    write_file(&dir.join(EEG_BICOHERENCE_CSV), &bic)?;
    write_file(&dir.join(EEG_GATE_CSV), &eeg::gate_csv(&analysis.segments))?;
    summary.gate_theta = analysis
        .gate
        .theta
        .is_finite()
        .then_some(analysis.gate.theta);
    summary.clean_segments = Some(analysis.segments.iter().filter(|s| s.clean).count());
    summary
        .warnings
        .extend(analysis.warnings.iter().map(|w| format!("eeg: {w}")));
    let mut powers = BandPowers::new();
    for (ch, name) in eeg::CHANNEL_NAMES.iter().enumerate() {
        for (b, band) in cfg.eeg.bands.all().iter().enumerate() {
            powers.insert(
                (name.to_string(), band.name.clone()),
                analysis.features.psd[ch][b],
            );
        }
    }
    Ok(powers)
}

/// Read back an `eeg_psd.csv` written by the pipeline.
pub fn read_psd_csv(path: &Path) -> Result<BandPowers> {
    let csv_err = |reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => csv_err(format!("{other:?}")),
    })?;
    let mut out = BandPowers::new();
    for (i, rec) in rdr
        .deserialize::<(String, String, String, f64)>()
        .enumerate()
    {
        let (_, ch, band, v) = rec.map_err(|e| csv_err(format!("line {}: {e}", i + 2)))?;
        out.insert((ch, band), v);
    }
    Ok(out)
}

struct Finished {
    summary: SituationSummary,
    label_summary: Option<SamScalePair>,
    powers: Option<BandPowers>,
    failures: Vec<StageFailure>,
}

fn finish(out: &Path, prepared: Prepared, labels: &LabelSeries, cfg: &PipelineConfig) -> Finished {
    let Prepared {
        components,
        aligned,
        debug,
        mut summary,
    } = prepared;
    let id = summary.id.clone();
    let dir = out.join(&id);
    let mut failures = Vec::new();
    let mut fail = |stage: &str, e: Error| {
        failures.push(StageFailure {
            situation: id.clone(),
            stage: stage.to_string(),
            message: e.to_string(),
        })
    };

    let written = || -> Result<()> {
        write_file(
            &dir.join(COMPONENTS_CSV),
            &components_csv(&components, labels),
        )?;
        write_file(&dir.join(LABELS_CSV), &labels_csv(labels))?;
        if let Some(d) = &debug {
            write_file(&dir.join(MOTIVATION_DEBUG_CSV), d)?;
        }
        Ok(())
    };
    if let Err(e) = written() {
        fail("write", e);
    }

    let label_summary = match situation_label_summary(labels) {
        Ok(s) => Some(s),
        Err(e) => {
            fail("labels", e);
            None
        }
    };
    summary.label_summary = label_summary;

    match states_json(&id, labels, cfg).and_then(|s| write_file(&dir.join(STATES_JSON), &s)) {
        Ok(()) => {}
        Err(e) => fail("states", e),
    }

    let points: Vec<(f64, f64)> = labels
        .valence
        .iter()
        .copied()
        .zip(labels.arousal.iter().copied())
        .collect();
    let grid = linspace(-1.0, 1.0, cfg.curve.grid_points);
    let samples = match fit_affective_curve(&points, &cfg.curve.fit) {
        Ok(curve) => {
            summary.curve_degenerate = Some(curve.is_degenerate());
            if curve.is_degenerate() {
                summary
                    .warnings
                    .push("all valence values identical; constant curve".into());
            }
            let samples = sample_curve(&curve, &grid);
            if let Err(e) = write_file(&dir.join(CURVE_CSV), &curve_csv(&samples)) {
                fail("write", e);
            }
            samples
        }
        Err(e) => {
            fail("curve", e);
            Vec::new()
        }
    };

    if cfg.output.plots {
        let r = write_file(&dir.join(VA_SVG), &plot::va_plot(labels, &samples)).and_then(|_| {
            write_file(
                &dir.join(COMPONENTS_SVG),
                &plot::components_plot(&components, labels),
            )
        });
        if let Err(e) = r {
            fail("plot", e);
        }
    }

    let powers = match eeg_outputs(&dir, &id, &aligned, cfg, &mut summary) {
        Ok(p) => Some(p),
        Err(e) => {
            fail("eeg", e);
            None
        }
    };
    summary.completed = failures.is_empty();
    Finished {
        summary,
        label_summary,
        powers,
        failures,
    }
}

fn failure(situation: &str, (stage, e): (&str, Error)) -> StageFailure {
    StageFailure {
        situation: situation.to_string(),
        stage: stage.to_string(),
        message: e.to_string(),
    }
}

fn write_summary(out: &Path, report: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Numeric(e.to_string()))?;
    write_file(&out.join(RUN_SUMMARY_JSON), &(text + "\n"))
}

fn write_eval(out: &Path, report: &EvalReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Numeric(e.to_string()))?;
    write_file(&out.join(EVAL_REPORT_JSON), &(text + "\n"))
}

fn run_evaluation(
    out: &Path,
    cfg: &PipelineConfig,
    predicted: &BTreeMap<String, SamScalePair>,
    powers: &BTreeMap<String, BandPowers>,
    report: &mut RunReport,
) {
    let Some(path) = &cfg.ratings else { return };
    let result = load_ratings(path)
        .and_then(|r| evaluate(predicted, &r, powers))
        .and_then(|e| write_eval(out, &e).map(|_| e));
    match result {
        Ok(e) => report.eval = Some(e),
        Err(e) => report.failures.push(failure(RUN_SCOPE, ("evaluate", e))),
    }
}

/// Full pipeline over every configured situation. Per-situation failures are
/// collected in the report; `Err` is reserved for problems that stop the
/// whole run (bad worker count, unwritable output directory).
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pool = thread_pool(cfg.workers)?;
    let mut report = RunReport::default();

    let prepared: Vec<Staged<Prepared>> =
        pool.install(|| cfg.situations.par_iter().map(|s| prepare(s, cfg)).collect());
    let mut ready = Vec::new();
    for (spec, p) in cfg.situations.iter().zip(prepared) {
        match p {
            Ok(p) => ready.push(p),
            Err(e) => {
                report.failures.push(failure(&spec.id, e));
                report.situations.push(SituationSummary {
                    id: spec.id.clone(),
                    ..Default::default()
                });
            }
        }
    }

    let mut predicted = BTreeMap::new();
    let mut powers = BTreeMap::new();
    if !ready.is_empty() {
        let batch: Vec<&ComponentSeries> = ready.iter().map(|p| &p.components).collect();
        match label_batch(&batch, &cfg.affect) {
            Err(e) => {
                let message = e.to_string();
                for p in &ready {
                    report.failures.push(StageFailure {
                        situation: p.summary.id.clone(),
                        stage: "labels".into(),
                        message: message.clone(),
                    });
                    report.situations.push(p.summary.clone());
                }
            }
            Ok((maxima, labels)) => {
                report.maxima = Some(maxima);
                let finished: Vec<Finished> = pool.install(|| {
                    ready
                        .into_par_iter()
                        .zip(labels.par_iter())
                        .map(|(p, l)| finish(out, p, l, cfg))
                        .collect()
                });
                for f in finished {
                    if let Some(s) = f.label_summary {
                        predicted.insert(f.summary.id.clone(), s);
                    }
                    if let Some(p) = f.powers {
                        powers.insert(f.summary.id.clone(), p);
                    }
                    report.failures.extend(f.failures);
                    report.situations.push(f.summary);
                }
            }
        }
    }
    sort_report(cfg, &mut report);
    run_evaluation(out, cfg, &predicted, &powers, &mut report);
    write_summary(out, &report)?;
    Ok(report)
}

fn sort_report(cfg: &PipelineConfig, report: &mut RunReport) {
    let order: HashMap<&str, usize> = cfg
        .situations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let key = |id: &str| order.get(id).copied().unwrap_or(usize::MAX);
    report.situations.sort_by_key(|s| key(&s.id));
    report.failures.sort_by_key(|f| key(&f.situation));
}

/// EEG features only: alignment, accelerometer gate, EEG analysis.
pub fn run_eeg_features(cfg: &PipelineConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pool = thread_pool(cfg.workers)?;
    let results: Vec<(SituationSummary, Option<StageFailure>)> = pool.install(|| {
        cfg.situations
            .par_iter()
            .map(|spec| {
                let mut summary = SituationSummary {
                    id: spec.id.clone(),
                    ..Default::default()
                };
                let r = load_aligned(spec, cfg).and_then(|(sit, gate)| {
                    summary.frames = sit.frames.len();
                    summary.duration_s = sit.duration_s;
                    summary.eeg_filled_samples = sit.eeg.filled_count();
                    let aligned = Aligned {
                        frame_times: sit.frames.timestamps.clone(),
                        eeg: sit.eeg,
                        gate,
                    };
                    eeg_outputs(&out.join(&spec.id), &spec.id, &aligned, cfg, &mut summary)
                        .stage("eeg")
                });
                summary.completed = r.is_ok();
                (summary, r.err().map(|e| failure(&spec.id, e)))
            })
            .collect()
    });
    let mut report = RunReport::default();
    for (s, f) in results {
        report.situations.push(s);
        report.failures.extend(f);
    }
    write_summary(out, &report)?;
    Ok(report)
}

/// Evaluation from artifacts of an earlier `compute` run in `out`.
pub fn run_evaluate(cfg: &PipelineConfig, out: &Path) -> Result<EvalReport> {
    let ratings_path = cfg
        .ratings
        .as_ref()
        .ok_or_else(|| Error::Config("evaluation needs a ratings file in the config".into()))?;
    let ratings = load_ratings(ratings_path)?;
    let mut predicted = BTreeMap::new();
    let mut powers = BTreeMap::new();
    for spec in &cfg.situations {
        let dir = out.join(&spec.id);
        let labels = read_labels_csv(&dir.join(LABELS_CSV))?;
        predicted.insert(spec.id.clone(), situation_label_summary(&labels)?);
        let psd = dir.join(EEG_PSD_CSV);
        if psd.is_file() {
            powers.insert(spec.id.clone(), read_psd_csv(&psd)?);
        }
    }
    let report = evaluate(&predicted, &ratings, &powers)?;
    write_eval(out, &report)?;
    Ok(report)
}
