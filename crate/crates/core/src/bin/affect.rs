//! `affect` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use affect_core::pipeline::{self, PipelineConfig, RunReport, SynthOptions};

#[derive(Parser)]
#[command(
    name = "affect",
    version,
    about = "Situation-based affective labeling from frames, accelerometer and EEG"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config listing situations and parameters.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline.
    Compute(RunArgs),
    /// Compute EEG gating, band powers and bicoherence only.
    EegFeatures(RunArgs),
    /// Score labels from an earlier `compute` run against ratings.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the `compute` outputs; the report is written here.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate synthetic situations, ratings and a config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        situations: usize,
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        /// Skip per-frame saliency maps (the center prior is used instead).
        #[arg(long)]
        no_saliency: bool,
    },
}

fn load(args: &RunArgs) -> Result<PipelineConfig, affect_core::Error> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn report(r: &RunReport) -> ExitCode {
    for s in &r.situations {
        for w in &s.warnings {
            eprintln!("warning: situation {}: {w}", s.id);
        }
    }
    for f in &r.failures {
        eprintln!("error: {f}");
    }
    let done = r.situations.iter().filter(|s| s.completed).count();
    eprintln!("{done}/{} situations completed", r.situations.len());
    if r.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compute(args) => {
            load(&args).and_then(|cfg| pipeline::run_pipeline(&cfg, &args.out))
        }
        Command::EegFeatures(args) => {
            load(&args).and_then(|cfg| pipeline::run_eeg_features(&cfg, &args.out))
        }
        Command::Evaluate { config, out } => {
            return match PipelineConfig::load(&config)
                .and_then(|c| pipeline::run_evaluate(&c, &out))
            {
                Ok(rep) => {
                    for w in &rep.warnings {
                        eprintln!("warning: {w}");
                    }
                    if let Some(r) = rep.rmse {
                        println!("rmse valence {:.4} arousal {:.4}", r.valence, r.arousal);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
        Command::Synth {
            out,
            seed,
            situations,
            frames,
            width,
            height,
            no_saliency,
        } => {
            let opts = SynthOptions {
                situations,
                frames,
                width,
                height,
                saliency: !no_saliency,
                seed,
                ..Default::default()
            };
            return match pipeline::generate(&out, &opts) {
                Ok(_) => {
                    println!("{}", out.join(pipeline::CONFIG_FILE).display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
    };
    match result {
        Ok(r) => report(&r),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
