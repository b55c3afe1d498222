//! Benchmark harness.
//!
//! Every model sees the same observation per event: the day 0–2 masks and
//! the env stack, from which the day-2 mask starts every forecast. The
//! simulators also receive the true duration and run the remaining
//! `duration − 3` days; the network and the persistence floor do not. Each
//! row hashes the exact observation the model consumed so the report
//! itself shows that inputs were identical.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use firescope_core::ca::{ca_run_from, CaConfig};
use firescope_core::metrics;
use firescope_core::mtt::{mtt_run_from, MttParams};
use firescope_core::raster::io::{field_to_f32_bytes, mask_to_pgm, write_json};
use firescope_core::{BurntMask, EnvStack, Field, FireEvent};
use firescope_nn::fidn::{encode_inputs, predict_input, Fidn};
use firescope_nn::ParamStore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::render;
use crate::stats::{summarize, Summary};
use crate::{Error, Result};

/// Days already observed when a forecast starts (days 0, 1 and 2).
pub const OBSERVED_DAYS: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fidn,
    Ca,
    Mtt,
    Persistence,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Fidn, ModelKind::Ca, ModelKind::Mtt, ModelKind::Persistence];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fidn => "fidn",
            ModelKind::Ca => "ca",
            ModelKind::Mtt => "mtt",
            ModelKind::Persistence => "persistence",
        }
    }

    /// Whether the protocol hands this model the true event duration.
    pub fn receives_duration(self) -> bool {
        matches!(self, ModelKind::Ca | ModelKind::Mtt)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}; expected fidn, ca, mtt or persistence")))
    }
}

/// Parses `fidn,ca,mtt` and always appends the persistence floor.
pub fn parse_models(list: &str) -> Result<Vec<ModelKind>> {
    let mut models = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: ModelKind = part.parse()?;
        if !models.contains(&m) {
            models.push(m);
        }
    }
    if !models.contains(&ModelKind::Persistence) {
        models.push(ModelKind::Persistence);
    }
    Ok(models)
}

/// What a model may look at.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub day_masks: &'a [BurntMask; 3],
    pub env: &'a EnvStack,
}

impl<'a> Observation<'a> {
    pub fn of(event: &'a FireEvent) -> Self {
        Observation {
            day_masks: &event.day_masks,
            env: &event.env,
        }
    }

    pub fn day2(&self) -> &'a BurntMask {
        &self.day_masks[2]
    }

    /// SHA-256 of the day-2 mask in its PGM encoding.
    pub fn day2_sha256(&self) -> String {
        hex::encode(Sha256::digest(mask_to_pgm(self.day2()).as_bytes()))
    }

    /// SHA-256 over the grid size, then each channel's name and raw
    /// little-endian f32 values in stack order.
    pub fn env_sha256(&self) -> String {
        let mut h = Sha256::new();
        let (rows, cols) = self.env.spec().dims();
        h.update((rows as u64).to_le_bytes());
        h.update((cols as u64).to_le_bytes());
        h.update(self.env.spec().pixel_area.to_le_bytes());
        for (ch, values) in self.env.channels() {
            h.update(ch.name().as_bytes());
            h.update([0]);
            h.update(field_to_f32_bytes(values));
        }
        hex::encode(h.finalize())
    }
}

/// A predicted final state: the scored field and its binary mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    pub field: Field<f32>,
    pub mask: BurntMask,
}

impl Forecast {
    fn binary(mask: BurntMask) -> Self {
        Forecast {
            field: mask.to_field(),
            mask,
        }
    }
}

pub enum Predictor {
    Fidn { model: Fidn, params: ParamStore<f32> },
    Ca(CaConfig),
    Mtt(MttParams),
    Persistence,
}

impl Predictor {
    pub fn kind(&self) -> ModelKind {
        match self {
            Predictor::Fidn { .. } => ModelKind::Fidn,
            Predictor::Ca(_) => ModelKind::Ca,
            Predictor::Mtt(_) => ModelKind::Mtt,
            Predictor::Persistence => ModelKind::Persistence,
        }
    }

    /// Forecast from `obs`. `duration` must be given exactly to the models
    /// that receive it.
    pub fn predict(&self, obs: &Observation<'_>, duration: Option<u32>) -> Result<Forecast> {
        let remaining = || -> Result<u32> {
            let d = duration.ok_or_else(|| Error::Config(format!("{} needs the event duration", self.kind())))?;
            Ok(d.saturating_sub(OBSERVED_DAYS))
        };
        match self {
            Predictor::Fidn { model, params } => {
                let [d0, d1, d2] = obs.day_masks;
                let input = encode_inputs([d0, d1, d2], obs.env, model.config())?;
                let p = predict_input(model, params, &input, d2)?;
                Ok(Forecast {
                    field: p.field,
                    mask: p.mask,
                })
            }
            Predictor::Ca(cfg) => Ok(Forecast::binary(ca_run_from(obs.day2(), obs.env, cfg, remaining()?)?)),
            Predictor::Mtt(params) => Ok(Forecast::binary(mtt_run_from(
                obs.day2(),
                obs.env,
                params,
                remaining()?,
            )?)),
            Predictor::Persistence => Ok(Forecast::binary(obs.day2().clone())),
        }
    }
}

/// One (event, model) result. Metrics are empty when the model failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub event: String,
    pub model: ModelKind,
    pub bce: Option<f64>,
    pub mse: Option<f64>,
    pub mse_km2: Option<f64>,
    pub rrmse: Option<f64>,
    pub ssim: Option<f64>,
    pub psnr: Option<f64>,
    /// Wall-clock seconds of the predict call alone.
    pub runtime_s: Option<f64>,
    pub true_duration: u32,
    /// Duration handed to the model, empty when withheld.
    pub duration_given: Option<u32>,
    pub day2_sha256: String,
    pub env_sha256: String,
    pub error: Option<String>,
}

/// Summarised row columns, with their table headings.
pub const METRICS: [(&str, &str); 7] = [
    ("bce", "BCE"),
    ("mse", "MSE"),
    ("mse_km2", "MSE (km²)"),
    ("rrmse", "RRMSE"),
    ("ssim", "SSIM"),
    ("psnr", "PSNR (dB)"),
    ("runtime_s", "Runtime (s)"),
];

impl BenchRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "bce" => self.bce,
            "mse" => self.mse,
            "mse_km2" => self.mse_km2,
            "rrmse" => self.rrmse,
            "ssim" => self.ssim,
            "psnr" => self.psnr,
            "runtime_s" => self.runtime_s,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub metric: String,
    #[serde(flatten)]
    pub stats: Summary,
}

/// FIDN inference against a CA run over the event's whole duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedRecord {
    pub event: String,
    pub fidn_seconds: f64,
    pub ca_full_duration_seconds: f64,
    pub ca_steps: u64,
    /// `ca_full_duration_seconds / fidn_seconds`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub split: String,
    pub events: Vec<String>,
    pub models: Vec<ModelKind>,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<SummaryRow>,
    pub speed: Vec<SpeedRecord>,
    pub ca_steps_per_day: u32,
    pub speed_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub ca: CaConfig,
    pub mtt: MttParams,
    /// Write per-event PNG panels.
    pub panels: bool,
    /// Speed ratio the FIDN must reach against the full-duration CA run.
    pub speed_threshold: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ca: CaConfig::default(),
            mtt: MttParams::default(),
            panels: true,
            speed_threshold: 10.0,
        }
    }
}

fn score(truth: &BurntMask, forecast: &Forecast) -> Result<metrics::MetricReport<f64>> {
    Ok(metrics::evaluate(truth, &forecast.field.map(|v| v as f64))?)
}

/// Runs `predictors` on every event, writing artifacts into `out` when
/// given (rows.csv, summary.md, report.json and panels/).
pub fn bench(
    split: &str,
    events: &[FireEvent],
    predictors: &[Predictor],
    cfg: &BenchConfig,
    out: Option<&Path>,
) -> Result<BenchReport> {
    if events.is_empty() {
        return Err(Error::Config("no events to benchmark".into()));
    }
    let panels_dir = out.filter(|_| cfg.panels).map(|o| o.join("panels"));
    if let Some(dir) = &panels_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rows = Vec::new();
    let mut speed = Vec::new();
    for event in events {
        let obs = Observation::of(event);
        let mut fidn_seconds = None;
        for p in predictors {
            let kind = p.kind();
            let duration_given = kind.receives_duration().then_some(event.duration_days);
            let mut row = BenchRow {
                event: event.name.clone(),
                model: kind,
                bce: None,
                mse: None,
                mse_km2: None,
                rrmse: None,
                ssim: None,
                psnr: None,
                runtime_s: None,
                true_duration: event.duration_days,
                duration_given,
                day2_sha256: obs.day2_sha256(),
                env_sha256: obs.env_sha256(),
                error: None,
            };
            let start = Instant::now();
            let forecast = p.predict(&obs, duration_given);
            let elapsed = start.elapsed().as_secs_f64();
            match forecast.and_then(|f| score(&event.final_mask, &f).map(|m| (f, m))) {
                Ok((f, m)) => {
                    row.bce = Some(m.bce);
                    row.mse = Some(m.mse);
                    row.mse_km2 = Some(m.mse_km2);
                    row.rrmse = Some(m.rrmse);
                    row.ssim = Some(m.ssim);
                    row.psnr = Some(m.psnr);
                    row.runtime_s = Some(elapsed);
                    if kind == ModelKind::Fidn {
                        fidn_seconds = Some(elapsed);
                    }
                    if let Some(dir) = &panels_dir {
                        let img = render::panel(obs.day2(), &event.final_mask, &f.mask)?;
                        render::save_rgb(&dir.join(format!("{}_{}.png", event.name, kind)), &img)?;
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
        if let Some(fidn_seconds) = fidn_seconds {
            let start = Instant::now();
            ca_run_from(obs.day2(), obs.env, &cfg.ca, event.duration_days)?;
            let ca = start.elapsed().as_secs_f64();
            speed.push(SpeedRecord {
                event: event.name.clone(),
                fidn_seconds,
                ca_full_duration_seconds: ca,
                ca_steps: event.duration_days as u64 * cfg.ca.steps_per_day as u64,
                ratio: ca / fidn_seconds,
            });
        }
    }
    let models: Vec<ModelKind> = predictors.iter().map(Predictor::kind).collect();
    let report = BenchReport {
        split: split.to_string(),
        events: events.iter().map(|e| e.name.clone()).collect(),
        summary: summary_rows(&rows, &models),
        models,
        rows,
        speed,
        ca_steps_per_day: cfg.ca.steps_per_day,
        speed_threshold: cfg.speed_threshold,
    };
    if let Some(out) = out {
        write_report(out, &report)?;
    }
    Ok(report)
}

/// Per-model statistics over the rows that succeeded.
pub fn summary_rows(rows: &[BenchRow], models: &[ModelKind]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &model in models {
        for (metric, _) in METRICS {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.model == model)
                .filter_map(|r| r.metric(metric))
                .collect();
            if let Some(stats) = summarize(&values) {
                out.push(SummaryRow {
                    model,
                    metric: metric.to_string(),
                    stats,
                });
            }
        }
    }
    out
}

impl BenchReport {
    pub fn rows_for(&self, model: ModelKind) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(move |r| r.model == model)
    }

    pub fn stat(&self, model: ModelKind, metric: &str) -> Option<&Summary> {
        self.summary
            .iter()
            .find(|s| s.model == model && s.metric == metric)
            .map(|s| &s.stats)
    }

    /// Checks the protocol from the rows alone: every model has one row
    /// per event, all rows of an event carry the same input hashes, and
    /// exactly the simulators were given the true duration.
    pub fn verify_protocol(&self) -> std::result::Result<(), String> {
        for name in &self.events {
            let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| &r.event == name).collect();
            for m in &self.models {
                let n = rows.iter().filter(|r| r.model == *m).count();
                if n != 1 {
                    return Err(format!("{name}: {n} rows for {m}"));
                }
            }
            let Some(&first) = rows.first() else {
                return Err(format!("{name}: no rows"));
            };
            for r in &rows {
                if r.day2_sha256 != first.day2_sha256 || r.env_sha256 != first.env_sha256 {
                    return Err(format!(
                        "{name}: {} consumed different inputs than {}",
                        r.model, first.model
                    ));
                }
                let expected = r.model.receives_duration().then_some(r.true_duration);
                if r.duration_given != expected {
                    return Err(format!("{name}: {} was given duration {:?}", r.model, r.duration_given));
                }
            }
        }
        Ok(())
    }

    pub fn min_speed_ratio(&self) -> Option<f64> {
        self.speed.iter().map(|s| s.ratio).min_by(f64::total_cmp)
    }
}

pub fn write_report(out: &Path, report: &BenchReport) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_rows_csv(&out.join("rows.csv"), &report.rows)?;
    write_json(&out.join("report.json"), report)?;
    let md = out.join("summary.md");
    std::fs::write(&md, summary_markdown(report)).map_err(|e| Error::io(&md, e))
}

pub fn write_rows_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if v.is_nan() {
        "n/a".to_string()
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

/// Markdown tables of mean ± std and median [IQR] per model and metric.
pub fn summary_markdown(report: &BenchReport) -> String {
    let mut s = String::new();
    let n_events = report.events.len();
    s.push_str(&format!(
        "# Benchmark summary\n\nSplit: {}. Events: {n_events}.\n\n",
        report.split
    ));
    s.push_str(
        "Every model starts from the day-2 mask. CA and MTT run for the true remaining duration; \
         FIDN and persistence are not told the duration. Synthetic events are generated by the CA \
         engine, which favours the CA row.\n\n",
    );
    for (title, cell) in [
        ("Mean ± standard deviation", 0usize),
        ("Median [interquartile range]", 1),
    ] {
        s.push_str(&format!("## {title}\n\n| Model | n |"));
        for (_, h) in METRICS {
            s.push_str(&format!(" {h} |"));
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---|".repeat(METRICS.len()));
        s.push('\n');
        for &m in &report.models {
            let ok = report.rows_for(m).filter(|r| r.error.is_none()).count();
            s.push_str(&format!("| {m} | {ok} |"));
            for (metric, _) in METRICS {
                let text = match report.stat(m, metric) {
                    Some(st) if cell == 0 => format!("{} ± {}", fmt_num(st.mean), fmt_num(st.std)),
                    Some(st) => format!("{} [{}]", fmt_num(st.median), fmt_num(st.iqr)),
                    None => "n/a".to_string(),
                };
                s.push_str(&format!(" {text} |"));
            }
            s.push('\n');
        }
        s.push('\n');
    }
    let failed: Vec<&BenchRow> = report.rows.iter().filter(|r| r.error.is_some()).collect();
    if !failed.is_empty() {
        s.push_str("## Failed rows\n\n");
        for r in failed {
            s.push_str(&format!(
                "- {} / {}: {}\n",
                r.event,
                r.model,
                r.error.as_deref().unwrap_or("")
            ));
        }
        s.push('\n');
    }
    if !report.speed.is_empty() {
        let ratios: Vec<f64> = report.speed.iter().map(|r| r.ratio).collect();
        let fidn: Vec<f64> = report.speed.iter().map(|r| r.fidn_seconds).collect();
        let ca: Vec<f64> = report.speed.iter().map(|r| r.ca_full_duration_seconds).collect();
        let (r, f, c) = (
            summarize(&ratios).unwrap(),
            summarize(&fidn).unwrap(),
            summarize(&ca).unwrap(),
        );
        let passing = ratios.iter().filter(|&&x| x >= report.speed_threshold).count();
        s.push_str(&format!(
            "## Relative speed\n\nCA over the full event duration at {} steps per day against FIDN inference.\n\n\
             | | mean | median | min |\n|---|---|---|---|\n\
             | FIDN inference (s) | {} | {} | {} |\n\
             | CA full duration (s) | {} | {} | {} |\n\
             | ratio CA / FIDN | {} | {} | {} |\n\n\
             Events at or above the {}× threshold: {passing} of {}.\n",
            report.ca_steps_per_day,
            fmt_num(f.mean),
            fmt_num(f.median),
            fmt_num(fidn.iter().copied().fold(f64::INFINITY, f64::min)),
            fmt_num(c.mean),
            fmt_num(c.median),
            fmt_num(ca.iter().copied().fold(f64::INFINITY, f64::min)),
            fmt_num(r.mean),
            fmt_num(r.median),
            fmt_num(ratios.iter().copied().fold(f64::INFINITY, f64::min)),
            report.speed_threshold,
            ratios.len(),
        ));
    }
    s
}

/// Output paths written by [`bench`] into `out`.
pub fn artifact_paths(out: &Path) -> [PathBuf; 3] {
    [out.join("rows.csv"), out.join("summary.md"), out.join("report.json")]
}
