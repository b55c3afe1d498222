//! Training a model on a dataset directory and reloading it.

use std::path::{Path, PathBuf};

use firescope_core::raster::io::{read_json, write_json};
use firescope_core::FireEvent;
use firescope_nn::checkpoint;
use firescope_nn::fidn::{self, EpochRecord, Fidn, ModelConfig, Sample, TrainConfig, TrainReport};
use firescope_nn::ParamStore;
use serde::{Deserialize, Serialize};

use crate::dataset::{augment, load_split, SplitName};
use crate::{Error, Result};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const MODEL_CONFIG_FILE: &str = "model.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const REPORT_FILE: &str = "train_report.json";

/// Model topology and optimiser settings, read from one JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Add the three rotations of every training event.
    pub augment: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            model: ModelConfig::desk(),
            train: TrainConfig::default(),
            augment: true,
        }
    }
}

/// Trains on `train` (augmented when asked), keeping the epoch with the
/// lowest validation BCE. `on_epoch` sees every curve record.
pub fn train_events(
    settings: &TrainSettings,
    train: &[FireEvent],
    validation: &[FireEvent],
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Fidn, ParamStore<f32>, TrainReport)> {
    let model = Fidn::new(settings.model.clone())?;
    let augmented;
    let train = if settings.augment {
        augmented = augment(train)?;
        &augmented[..]
    } else {
        train
    };
    let samples = |events: &[FireEvent]| -> Result<Vec<Sample<f32>>> {
        events.iter().map(|e| Ok(Sample::from_event(e, &model)?)).collect()
    };
    let (train_set, val_set) = (samples(train)?, samples(validation)?);
    let mut params = model.init_params::<f32>()?;
    let report = fidn::train(&model, &mut params, &settings.train, &train_set, &val_set, on_epoch)?;
    Ok((model, params, report))
}

/// Trains on a dataset's train split, validating on its validation split,
/// and writes the checkpoint, model config, curves and report into `out`.
pub fn train_dataset(
    dataset: &Path,
    settings: &TrainSettings,
    out: &Path,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    let train = load_split(dataset, SplitName::Train)?;
    let validation = load_split(dataset, SplitName::Validation)?;
    let (_, params, report) = train_events(settings, &train, &validation, on_epoch)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    checkpoint::save(&out.join(CHECKPOINT_FILE), &params)?;
    write_json(&out.join(MODEL_CONFIG_FILE), &settings.model)?;
    write_curves_csv(&out.join(CURVES_FILE), &report.curves)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Columns: epoch, split, bce, mse, rrmse, ssim, psnr.
pub fn write_curves_csv(path: &Path, curves: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in curves {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// The model config stored next to a checkpoint: `model.ckpt` → `model.json`.
pub fn sibling_config(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("json")
}

/// Loads a checkpoint for inference. The config defaults to the sibling
/// `.json` file written by training.
pub fn load_model(ckpt: &Path, config: Option<&Path>) -> Result<(Fidn, ParamStore<f32>)> {
    if !ckpt.is_file() {
        return Err(Error::Config(format!("checkpoint {} not found", ckpt.display())));
    }
    let cfg_path = config.map(Path::to_path_buf).unwrap_or_else(|| sibling_config(ckpt));
    let cfg: ModelConfig = read_json(&cfg_path)?;
    let model = Fidn::new(cfg)?;
    let mut params = model.init_params::<f32>()?;
    checkpoint::load_into(ckpt, &mut params)?;
    Ok((model, params))
}
