//! Command-line surface. Exit codes: 0 success, 1 usage error, 2 data or
//! configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use firescope_core::ca::ca_run_from;
use firescope_core::metrics;
use firescope_core::mtt::mtt_simulate;
use firescope_core::raster::io::{
    read_event, read_f32_grid, read_json, read_mask, write_f32_grid, write_json, write_mask,
};
use firescope_core::{Field, FireEvent};
use firescope_nn::fidn::predict;
use serde::de::DeserializeOwned;

use crate::bench::{self, parse_models, BenchConfig, ModelKind, Predictor, OBSERVED_DAYS};
use crate::dataset::{self, load_scenario, load_split, SplitName, SplitRatio};
use crate::synth::{self, Generator, ScenarioConfig};
use crate::training::{self, TrainSettings};
use crate::{render, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "firescope", version, about = "Final burnt-area prediction workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with chronological split manifests.
    Gen(GenArgs),
    /// Train the network on a dataset's train split.
    Train(TrainArgs),
    /// Predict the final burnt area of one event.
    Predict(PredictArgs),
    /// Run a physics baseline from an event's day-2 mask.
    Simulate(SimulateArgs),
    /// Score predictions against true masks.
    Evaluate(EvaluateArgs),
    /// Benchmark models on one split.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 303)]
    events: usize,
    /// Train/validation/test weights; proportions unless they sum to --events.
    #[arg(long, default_value = "243/30/30")]
    split: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    generator: Option<GeneratorArg>,
    /// ScenarioConfig JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GeneratorArg {
    Ca,
    Mtt,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TrainSettings JSON ({"model": ..., "train": ..., "augment": ...}).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Path to an event.json.
    #[arg(long)]
    event: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// ModelConfig JSON; defaults to the checkpoint path with a .json extension.
    #[arg(long)]
    model_config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SimModel {
    Ca,
    Mtt,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: SimModel,
    /// Path to an event.json.
    #[arg(long)]
    event: PathBuf,
    /// Output mask (PGM).
    #[arg(long)]
    out: PathBuf,
    /// Days after day 2; defaults to the event duration minus three.
    #[arg(long)]
    days: Option<u32>,
    /// CaConfig or MttParams JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CA random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// MTT only: write the arrival field (minutes, f32) here.
    #[arg(long)]
    arrival: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// True mask (PGM); repeat together with --pred or --pred-f32.
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    /// Predicted mask (PGM).
    #[arg(long)]
    pred: Vec<PathBuf>,
    /// Predicted probability field (f32 grid of the truth's size).
    #[arg(long, conflicts_with = "pred")]
    pred_f32: Vec<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint; required when fidn is benchmarked.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long, default_value = "fidn,ca,mtt,persistence")]
    models: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// BenchConfig JSON; defaults to the dataset's generating CA and MTT settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    no_panels: bool,
}

/// Parses `argv` (program name first) and runs it, printing results to
/// `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().ansi().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a, out),
        Command::Train(a) => train(a, out, err),
        Command::Predict(a) => predict_cmd(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Bench(a) => bench_cmd(a, out),
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(read_json(p)?),
        None => Ok(T::default()),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text).map_err(|e| Error::io("<stdout>", e))
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg: ScenarioConfig = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(g) = a.generator {
        cfg.generator = match g {
            GeneratorArg::Ca => Generator::Ca,
            GeneratorArg::Mtt => Generator::Mtt,
        };
    }
    let ratio: SplitRatio = a.split.parse()?;
    ratio.allocate(a.events)?;
    let events = synth::generate(&cfg, a.events)?;
    let s = dataset::write_dataset(&a.out, &cfg, events, ratio)?;
    say(
        out,
        format_args!(
            "wrote {} events to {} (train {}, validation {}, test {})\n",
            s.train + s.validation + s.test,
            a.out.display(),
            s.train,
            s.validation,
            s.test
        ),
    )
}

fn train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut settings: TrainSettings = load_config(a.config.as_deref())?;
    if let Some(e) = a.epochs {
        settings.train.epochs = e;
    }
    if let Some(s) = a.seed {
        settings.train.seed = s;
        settings.model.seed = s;
    }
    if a.no_augment {
        settings.augment = false;
    }
    let report = training::train_dataset(&a.dataset, &settings, &a.out, |r| {
        let _ = writeln!(
            err,
            "epoch {:>3} {:<10} bce {:.5} mse {:.5} rrmse {:.5} ssim {:.5} psnr {:.3}",
            r.epoch,
            format!("{:?}", r.split).to_lowercase(),
            r.bce,
            r.mse,
            r.rrmse,
            r.ssim,
            r.psnr
        );
    })?;
    say(
        out,
        format_args!(
            "best epoch {} (bce {:.5}), {} steps in {:.1} s; wrote {}\n",
            report.best_epoch,
            report.best_bce,
            report.steps,
            report.seconds,
            a.out.display()
        ),
    )
}

fn predict_cmd(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let (model, params) = training::load_model(&a.ckpt, a.model_config.as_deref())?;
    let event = read_event(&a.event)?;
    let p = predict(&model, &params, &event)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_mask(&a.out.join("mask.pgm"), &p.mask)?;
    write_f32_grid(&a.out.join("probability.f32"), &p.probability)?;
    render::save_rgb(
        &a.out.join("prediction.png"),
        &render::prediction_image(&p.probability, &p.mask),
    )?;
    say(
        out,
        format_args!(
            "{}: {} px predicted burnt; wrote {}\n",
            event.name,
            p.mask.count(),
            a.out.display()
        ),
    )
}

fn remaining_days(event: &FireEvent, days: Option<u32>) -> u32 {
    days.unwrap_or(event.duration_days.saturating_sub(OBSERVED_DAYS))
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let event = read_event(&a.event)?;
    let days = remaining_days(&event, a.days);
    let mask = match a.model {
        SimModel::Ca => {
            if a.arrival.is_some() {
                return Err(Error::Config("--arrival applies to the mtt model only".into()));
            }
            let mut cfg: firescope_core::ca::CaConfig = load_config(a.config.as_deref())?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            ca_run_from(event.day2(), &event.env, &cfg, days)?
        }
        SimModel::Mtt => {
            let params: firescope_core::mtt::MttParams = load_config(a.config.as_deref())?;
            let (arrival, mask) =
                mtt_simulate(event.day2(), &event.env, &params, days as f64 * params.minutes_per_day)?;
            if let Some(path) = &a.arrival {
                write_f32_grid(path, &arrival.to_f32_field())?;
            }
            mask
        }
    };
    write_mask(&a.out, &mask)?;
    say(
        out,
        format_args!(
            "{}: {} px burnt after {days} days; wrote {}\n",
            event.name,
            mask.count(),
            a.out.display()
        ),
    )
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let preds = if a.pred_f32.is_empty() { &a.pred } else { &a.pred_f32 };
    if preds.len() != a.truth.len() {
        return Err(Error::Config(format!(
            "{} truth files but {} predictions",
            a.truth.len(),
            preds.len()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let sink = Path::new("<csv>");
    w.write_record(["name", "bce", "mse", "rrmse", "ssim", "psnr", "runtime_s"])
        .map_err(|e| Error::csv(sink, e))?;
    for (truth_path, pred_path) in a.truth.iter().zip(preds) {
        let truth = read_mask(truth_path)?;
        let field: Field<f64> = if a.pred_f32.is_empty() {
            read_mask(pred_path)?.to_field()
        } else {
            let (h, wd) = truth.spec().dims();
            read_f32_grid(pred_path, h, wd)?.map(|v| v as f64)
        };
        let start = Instant::now();
        let m = metrics::evaluate(&truth, &field)?;
        let runtime = start.elapsed().as_secs_f64();
        let name = truth_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        w.serialize((name, m.bce, m.mse, m.rrmse, m.ssim, m.psnr, runtime))
            .map_err(|e| Error::csv(sink, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(sink, e.into_error()))?;
    match &a.out {
        Some(p) => std::fs::write(p, &bytes).map_err(|e| Error::io(p, e)),
        None => out.write_all(&bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn bench_cmd(a: BenchArgs, out: &mut dyn Write) -> Result<()> {
    let models = parse_models(&a.models)?;
    let split: SplitName = a.split.parse()?;
    let mut cfg = match &a.config {
        Some(p) => read_json(p)?,
        None => {
            let scenario = load_scenario(&a.dataset)?;
            BenchConfig {
                ca: scenario.ca,
                mtt: scenario.mtt,
                ..BenchConfig::default()
            }
        }
    };
    if a.no_panels {
        cfg.panels = false;
    }
    let mut predictors = Vec::with_capacity(models.len());
    for m in &models {
        predictors.push(match m {
            ModelKind::Fidn => {
                let ckpt = a
                    .ckpt
                    .as_deref()
                    .ok_or_else(|| Error::Config("--ckpt is required to benchmark fidn".into()))?;
                let (model, params) = training::load_model(ckpt, a.model_config.as_deref())?;
                Predictor::Fidn { model, params }
            }
            ModelKind::Ca => Predictor::Ca(cfg.ca.clone()),
            ModelKind::Mtt => Predictor::Mtt(cfg.mtt.clone()),
            ModelKind::Persistence => Predictor::Persistence,
        });
    }
    let events = load_split(&a.dataset, split)?;
    let report = bench::bench(split.as_str(), &events, &predictors, &cfg, Some(&a.out))?;
    write_json(&a.out.join("bench_config.json"), &cfg)?;
    say(
        out,
        format_args!(
            "benchmarked {} models on {} {} events; wrote {}\n",
            report.models.len(),
            report.events.len(),
            split,
            a.out.display()
        ),
    )
}
