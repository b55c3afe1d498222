use serde::{Deserialize, Serialize};

use super::env::{Channel, EnvStack};
use super::event::FireEvent;
use super::grid::{BurntMask, Field, GridSpec};
use crate::{Error, Result, Scalar};

/// Default decision threshold applied to probability maps.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    Nearest,
    Bilinear,
}

/// Marks a cell burnt iff its value is `>= threshold`.
pub fn binarize<T: Scalar>(values: &Field<T>, threshold: T, spec: GridSpec) -> Result<BurntMask> {
    super::grid::check_dims(spec.dims(), values.dims())?;
    if !threshold.is_finite() {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("must be finite, got {threshold}"),
        });
    }
    let w = values.width();
    let mut cells = Vec::with_capacity(spec.len());
    for (i, &v) in values.as_slice().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i / w, col: i % w });
        }
        cells.push(v >= threshold);
    }
    BurntMask::from_cells(spec, cells)
}

/// Resamples `src` onto a `dst_height`×`dst_width` grid covering the same
/// footprint. Sample points are cell centres; bilinear sampling clamps to
/// the edge cells.
pub fn resample<T: Scalar>(
    src: &Field<T>,
    dst_height: usize,
    dst_width: usize,
    mode: ResampleMode,
) -> Result<Field<T>> {
    if dst_height == 0 || dst_width == 0 {
        return Err(Error::InvalidGrid(format!(
            "target grid must be non-empty, got {dst_height}x{dst_width}"
        )));
    }
    let (sh, sw) = src.dims();
    if (sh, sw) == (dst_height, dst_width) {
        return Ok(src.clone());
    }
    let out = match mode {
        ResampleMode::Nearest => {
            let rows: Vec<usize> = (0..dst_height).map(|i| nearest_index(i, sh, dst_height)).collect();
            let cols: Vec<usize> = (0..dst_width).map(|j| nearest_index(j, sw, dst_width)).collect();
            Field::from_fn(dst_height, dst_width, |r, c| src.get(rows[r], cols[c]))
        }
        ResampleMode::Bilinear => {
            let rows: Vec<(usize, usize, T)> = (0..dst_height).map(|i| linear_taps(i, sh, dst_height)).collect();
            let cols: Vec<(usize, usize, T)> = (0..dst_width).map(|j| linear_taps(j, sw, dst_width)).collect();
            Field::from_fn(dst_height, dst_width, |r, c| {
                let (r0, r1, fr) = rows[r];
                let (c0, c1, fc) = cols[c];
                let top = lerp(src.get(r0, c0), src.get(r0, c1), fc);
                let bottom = lerp(src.get(r1, c0), src.get(r1, c1), fc);
                lerp(top, bottom, fr)
            })
        }
    };
    Ok(out)
}

/// Source index whose cell contains the centre of destination cell `i`.
#[inline]
fn nearest_index(i: usize, src_len: usize, dst_len: usize) -> usize {
    ((2 * i + 1) * src_len / (2 * dst_len)).min(src_len - 1)
}

fn linear_taps<T: Scalar>(i: usize, src_len: usize, dst_len: usize) -> (usize, usize, T) {
    let pos = (i as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
    let pos = pos.clamp(0.0, (src_len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, T::of(pos - i0 as f64))
}

/// `a + (b - a) t`, kept inside `[min(a,b), max(a,b)]` so rounding never
/// leaves the source range.
#[inline]
fn lerp<T: Scalar>(a: T, b: T, t: T) -> T {
    let v = a + (b - a) * t;
    v.max(a.min(b)).min(a.max(b))
}

/// Wind components after `k` counter-clockwise quarter turns:
/// each turn maps `(u, v)` to `(-v, u)`.
pub fn rotate_wind(u: f32, v: f32, k: u8) -> (f32, f32) {
    let (mut u, mut v) = (u, v);
    for _ in 0..(k % 4) {
        (u, v) = (-v, u);
    }
    (u, v)
}

/// Rotates masks and every env channel by `k`·90° counter-clockwise and
/// remaps the wind vector to match.
pub fn rotate_event(event: &FireEvent, k: u8) -> Result<FireEvent> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParameter {
            name: "k_quarter_turns",
            reason: format!("must be 1, 2 or 3, got {k}"),
        });
    }
    let env = rotate_env(&event.env, k)?;
    let day_masks = [
        event.day_masks[0].rotate_ccw(k),
        event.day_masks[1].rotate_ccw(k),
        event.day_masks[2].rotate_ccw(k),
    ];
    FireEvent::new(
        format!("{}_r{}", event.name, 90 * k as u32),
        event.year,
        event.duration_days,
        day_masks,
        event.final_mask.rotate_ccw(k),
        env,
    )
}

/// Same as the env half of [`rotate_event`]; also accepts `k == 0`.
pub fn rotate_env(env: &EnvStack, k: u8) -> Result<EnvStack> {
    let k = k % 4;
    let u = env.get(Channel::WindU);
    let v = env.get(Channel::WindV);
    let spec = env.spec().rotated(k);
    env.map_channels(spec, |ch, values| {
        let spatial = match (ch, u, v) {
            (Channel::WindU, Some(u), Some(v)) => {
                Field::from_fn(u.height(), u.width(), |r, c| rotate_wind(u.get(r, c), v.get(r, c), k).0)
            }
            (Channel::WindV, Some(u), Some(v)) => {
                Field::from_fn(u.height(), u.width(), |r, c| rotate_wind(u.get(r, c), v.get(r, c), k).1)
            }
            _ => values.clone(),
        };
        Ok(spatial.rotate_ccw(k))
    })
}

/// Resamples every channel of `env` onto `dst` (bilinear).
pub fn resample_env(env: &EnvStack, dst: GridSpec) -> Result<EnvStack> {
    env.map_channels(dst, |_, values| {
        resample(values, dst.height, dst.width, ResampleMode::Bilinear)
    })
}

/// Burnt area of `mask` in km².
pub fn burnt_area_km2(mask: &BurntMask) -> f64 {
    mask.burnt_area_km2()
}
