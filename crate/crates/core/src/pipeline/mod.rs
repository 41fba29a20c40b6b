//! End-to-end runs driven by a JSON config, plus the synthetic data
//! generator used for smoke and determinism testing.

mod config;
mod plot;
mod run;
mod synth;

pub use config::{CurveSettings, OutputSettings, PipelineConfig, SaliencySettings, SituationSpec};
pub use plot::{components_plot, va_plot};
pub use run::*;
pub use synth::{generate, SynthOptions, CONFIG_FILE, RATINGS_FILE};
