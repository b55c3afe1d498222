//! On-disk datasets.
//!
//! ```text
//! D/scenario.json                  generating configuration
//! D/events/<name>/event.json ...   one directory per event
//! D/train.json                     split manifests listing event.json
//! D/validation.json                paths relative to D
//! D/test.json
//! ```
//!
//! Splits are chronological: events are ordered by (year, name) and the
//! earliest go to training, the latest to test.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use firescope_core::raster::io::{read_event, read_json, write_event, write_json};
use firescope_core::raster::rotate_event;
use firescope_core::FireEvent;
use serde::{Deserialize, Serialize};

use crate::synth::ScenarioConfig;
use crate::{Error, Result};

pub const SCENARIO_FILE: &str = "scenario.json";
pub const EVENTS_DIR: &str = "events";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }

    pub fn manifest_path(self, dataset: &Path) -> PathBuf {
        dataset.join(format!("{}.json", self.as_str()))
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitName::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?}; expected train, validation or test")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split: SplitName,
    /// `event.json` paths relative to the dataset root.
    pub events: Vec<String>,
}

/// Train/validation/test weights such as `243/30/30`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio(pub [usize; 3]);

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio([243, 30, 30])
    }
}

impl FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        let bad = || Error::Config(format!("split {s:?} must look like 243/30/30"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut w = [0usize; 3];
        for (slot, p) in w.iter_mut().zip(parts) {
            *slot = p.trim().parse().map_err(|_| bad())?;
        }
        if w[0] == 0 {
            return Err(Error::Config(format!("split {s:?} leaves no training events")));
        }
        Ok(SplitRatio(w))
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{a}/{b}/{c}")
    }
}

impl SplitRatio {
    /// Split sizes for `n` events. Weights summing to `n` are taken
    /// literally; otherwise they are proportions, rounded by largest
    /// remainder with ties going to the later split.
    pub fn allocate(&self, n: usize) -> Result<[usize; 3]> {
        let total: usize = self.0.iter().sum();
        if total == 0 {
            return Err(Error::Config("split weights sum to zero".into()));
        }
        if total == n {
            return Ok(self.0);
        }
        let mut sizes = [0usize; 3];
        let mut rema = [0usize; 3];
        for i in 0..3 {
            let q = n * self.0[i];
            sizes[i] = q / total;
            rema[i] = q % total;
        }
        let mut left = n - sizes.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| rema[b].cmp(&rema[a]).then(b.cmp(&a)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        if sizes[0] == 0 {
            return Err(Error::Config(format!(
                "{n} events leave no training events under split {self}"
            )));
        }
        Ok(sizes)
    }
}

/// Orders events by (year, name).
pub fn chronological(events: &mut [FireEvent]) {
    events.sort_by(|a, b| a.year.cmp(&b.year).then_with(|| a.name.cmp(&b.name)));
}

/// Chronological train/validation/test partition.
pub fn split_events(mut events: Vec<FireEvent>, ratio: SplitRatio) -> Result<[Vec<FireEvent>; 3]> {
    let [a, b, _] = ratio.allocate(events.len())?;
    chronological(&mut events);
    let mut test = events.split_off(a);
    let tail = test.split_off(b);
    Ok([events, test, tail])
}

/// Each event followed by its 90°, 180° and 270° rotations.
pub fn augment(events: &[FireEvent]) -> Result<Vec<FireEvent>> {
    let mut out = Vec::with_capacity(events.len() * 4);
    for e in events {
        out.push(e.clone());
        for k in 1..=3 {
            out.push(rotate_event(e, k)?);
        }
    }
    Ok(out)
}

/// Split sizes actually written.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Writes the scenario, every event and the three manifests into `dir`.
pub fn write_dataset(
    dir: &Path,
    scenario: &ScenarioConfig,
    events: Vec<FireEvent>,
    ratio: SplitRatio,
) -> Result<DatasetSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(SCENARIO_FILE), scenario)?;
    let splits = split_events(events, ratio)?;
    for (name, events) in SplitName::ALL.into_iter().zip(&splits) {
        let mut paths = Vec::with_capacity(events.len());
        for e in events {
            write_event(&dir.join(EVENTS_DIR).join(&e.name), e)?;
            paths.push(format!("{EVENTS_DIR}/{}/event.json", e.name));
        }
        write_json(
            &name.manifest_path(dir),
            &SplitManifest {
                split: name,
                events: paths,
            },
        )?;
    }
    Ok(DatasetSummary {
        train: splits[0].len(),
        validation: splits[1].len(),
        test: splits[2].len(),
    })
}

pub fn read_manifest(dataset: &Path, split: SplitName) -> Result<SplitManifest> {
    let m: SplitManifest = read_json(&split.manifest_path(dataset))?;
    if m.split != split {
        return Err(Error::Config(format!(
            "{} declares split {} instead of {split}",
            split.manifest_path(dataset).display(),
            m.split
        )));
    }
    Ok(m)
}

/// Loads every event of one split, in manifest order.
pub fn load_split(dataset: &Path, split: SplitName) -> Result<Vec<FireEvent>> {
    read_manifest(dataset, split)?
        .events
        .iter()
        .map(|rel| Ok(read_event(&dataset.join(rel))?))
        .collect()
}

/// The dataset's generating scenario, or the default when the file is absent.
pub fn load_scenario(dataset: &Path) -> Result<ScenarioConfig> {
    let path = dataset.join(SCENARIO_FILE);
    if path.exists() {
        Ok(read_json(&path)?)
    } else {
        Ok(ScenarioConfig::default())
    }
}
