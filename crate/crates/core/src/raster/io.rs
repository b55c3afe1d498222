//! On-disk formats.
//!
//! * Masks: ASCII PGM (`P2`), maxval 1, row-major, top-left origin, with a
//!   `# pixel_area=<km²>` comment line.
//! * Real grids: raw little-endian `f32`, row-major, no header.
//! * Env stacks: one raw `f32` file per channel plus a JSON sidecar listing
//!   each channel's name, units and file, and the grid's height, width and
//!   pixel_area.
//! * Events: a JSON manifest with `name`, `year`, `duration_days` and paths
//!   (relative to the manifest) of the day-0/1/2 masks, final mask and env
//!   sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::env::{Channel, EnvStack};
use super::event::FireEvent;
use super::grid::{BurntMask, Field, GridSpec};
use crate::{Error, Result};

pub fn mask_to_pgm(mask: &BurntMask) -> String {
    let spec = mask.spec();
    let mut out = String::with_capacity(spec.len() * 2 + 64);
    let _ = writeln!(out, "P2");
    let _ = writeln!(out, "# pixel_area={}", spec.pixel_area);
    let _ = writeln!(out, "{} {}", spec.width, spec.height);
    let _ = writeln!(out, "1");
    for row in mask.cells().chunks(spec.width) {
        let mut first = true;
        for &c in row {
            if !first {
                out.push(' ');
            }
            out.push(if c { '1' } else { '0' });
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Parses an ASCII PGM mask. Any maxval is accepted; cells are burnt when
/// their value is non-zero. Without a `pixel_area` comment the pixel area
/// defaults to 1 km².
pub fn mask_from_pgm(text: &str, origin: &Path) -> Result<BurntMask> {
    let mut pixel_area = None;
    let mut tokens = Vec::new();
    for line in text.lines() {
        let (content, comment) = match line.find('#') {
            Some(i) => (&line[..i], Some(&line[i + 1..])),
            None => (line, None),
        };
        if let Some(comment) = comment {
            if let Some(v) = comment.trim().strip_prefix("pixel_area=") {
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(origin, format!("bad pixel_area `{v}`")))?;
                pixel_area = Some(v);
            }
        }
        tokens.extend(content.split_whitespace());
    }
    let mut it = tokens.into_iter();
    if it.next() != Some("P2") {
        return Err(Error::parse(origin, "missing P2 magic"));
    }
    let mut number = |what: &str| -> Result<u64> {
        let tok = it
            .next()
            .ok_or_else(|| Error::parse(origin, format!("truncated before {what}")))?;
        tok.parse()
            .map_err(|_| Error::parse(origin, format!("bad {what} `{tok}`")))
    };
    let width = number("width")? as usize;
    let height = number("height")? as usize;
    let maxval = number("maxval")?;
    if maxval == 0 {
        return Err(Error::parse(origin, "maxval must be positive"));
    }
    let spec = GridSpec::new(height, width, pixel_area.unwrap_or(1.0))?;
    let mut cells = Vec::with_capacity(spec.len());
    for _ in 0..spec.len() {
        let v = number("pixel")?;
        if v > maxval {
            return Err(Error::parse(origin, format!("pixel {v} exceeds maxval {maxval}")));
        }
        cells.push(v > 0);
    }
    BurntMask::from_cells(spec, cells)
}

pub fn write_mask(path: &Path, mask: &BurntMask) -> Result<()> {
    fs::write(path, mask_to_pgm(mask)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path) -> Result<BurntMask> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    mask_from_pgm(&text, path)
}

pub fn field_to_f32_bytes(field: &Field<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.as_slice().len() * 4);
    for v in field.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn field_from_f32_bytes(bytes: &[u8], height: usize, width: usize, origin: &Path) -> Result<Field<f32>> {
    if bytes.len() != height * width * 4 {
        return Err(Error::parse(
            origin,
            format!(
                "expected {} bytes for {height}x{width} f32 grid, got {}",
                height * width * 4,
                bytes.len()
            ),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Field::from_vec(height, width, data)
}

pub fn write_f32_grid(path: &Path, field: &Field<f32>) -> Result<()> {
    fs::write(path, field_to_f32_bytes(field)).map_err(|e| Error::io(path, e))
}

pub fn read_f32_grid(path: &Path, height: usize, width: usize) -> Result<Field<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    field_from_f32_bytes(&bytes, height, width, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub name: String,
    pub units: String,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSidecar {
    pub height: usize,
    pub width: usize,
    pub pixel_area: f64,
    pub channels: Vec<ChannelEntry>,
}

/// Writes `env` as `<dir>/<channel>.f32` files plus the sidecar at
/// `sidecar` (which must live in `dir`).
pub fn write_env(sidecar: &Path, env: &EnvStack) -> Result<()> {
    let dir = parent_dir(sidecar);
    let spec = env.spec();
    let mut entries = Vec::new();
    for (ch, values) in env.channels() {
        let file = format!("{}.f32", ch.name());
        write_f32_grid(&dir.join(&file), values)?;
        entries.push(ChannelEntry {
            name: ch.name().to_string(),
            units: ch.units().to_string(),
            file,
        });
    }
    let doc = EnvSidecar {
        height: spec.height,
        width: spec.width,
        pixel_area: spec.pixel_area,
        channels: entries,
    };
    write_json(sidecar, &doc)
}

pub fn read_env(sidecar: &Path) -> Result<EnvStack> {
    let doc: EnvSidecar = read_json(sidecar)?;
    let dir = parent_dir(sidecar);
    let spec = GridSpec::new(doc.height, doc.width, doc.pixel_area)?;
    let mut channels = Vec::with_capacity(doc.channels.len());
    for entry in &doc.channels {
        let ch: Channel = entry.name.parse()?;
        let values = read_f32_grid(&dir.join(&entry.file), doc.height, doc.width)?;
        channels.push((ch, values));
    }
    EnvStack::new(spec, channels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventManifest {
    pub name: String,
    pub year: i32,
    pub duration_days: u32,
    pub day_masks: [String; 3],
    pub final_mask: String,
    pub env: String,
}

/// Writes an event into `dir` (created if needed) and returns the manifest
/// path `<dir>/event.json`.
pub fn write_event(dir: &Path, event: &FireEvent) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let day_files = ["day0.pgm", "day1.pgm", "day2.pgm"];
    for (file, mask) in day_files.iter().zip(&event.day_masks) {
        write_mask(&dir.join(file), mask)?;
    }
    write_mask(&dir.join("final.pgm"), &event.final_mask)?;
    write_env(&dir.join("env.json"), &event.env)?;
    let manifest = EventManifest {
        name: event.name.clone(),
        year: event.year,
        duration_days: event.duration_days,
        day_masks: day_files.map(String::from),
        final_mask: "final.pgm".into(),
        env: "env.json".into(),
    };
    let path = dir.join("event.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn read_event(manifest_path: &Path) -> Result<FireEvent> {
    let m: EventManifest = read_json(manifest_path)?;
    let dir = parent_dir(manifest_path);
    let day_masks = [
        read_mask(&dir.join(&m.day_masks[0]))?,
        read_mask(&dir.join(&m.day_masks[1]))?,
        read_mask(&dir.join(&m.day_masks[2]))?,
    ];
    let final_mask = read_mask(&dir.join(&m.final_mask))?;
    let env = read_env(&dir.join(&m.env))?;
    FireEvent::new(m.name, m.year, m.duration_days, day_masks, final_mask, env)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
