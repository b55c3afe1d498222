//! Synthetic fire events.
//!
//! Each candidate draws a coarse landscape (fractal terrain, smoothed-noise
//! vegetation, optional water bodies, a constant wind and a precipitation
//! field), ignites a small cluster on the fine grid and runs the generating
//! engine (the cellular automaton by default, minimum travel time as the
//! alternate mode) until the fire dies out or the day cap is reached.
//! Candidates lasting too briefly or burning too little are redrawn.

use firescope_core::ca::{is_non_combustible, CaConfig, CaSim, SplitMix64};
use firescope_core::mtt::{mtt_simulate, MttParams};
use firescope_core::raster::{resample_env, MIN_DURATION_EXCLUSIVE};
use firescope_core::{BurntMask, Channel, EnvStack, Field, FireEvent, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Engine that produces the ground-truth spread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Ca,
    Mtt,
}

/// Where the first ignition cell may fall on the fine grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Inside the central half of each axis.
    Central,
    /// Anywhere at least two cells from the border.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainConfig {
    /// Elevation range, m.
    pub amplitude_m: f64,
    /// Amplitude ratio between successive octaves.
    pub roughness: f64,
    pub octaves: u32,
    /// Lattice spacing of the first octave, coarse cells.
    pub scale_cells: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig {
            amplitude_m: 150.0,
            roughness: 0.5,
            octaves: 3,
            scale_cells: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VegetationConfig {
    /// Lattice spacing of the vegetation noise, coarse cells.
    pub scale_cells: f64,
    /// Combustible density (tree + grass) spans `[min_density, max_density]`;
    /// the rest of each cell is bare ground.
    pub min_density: f64,
    pub max_density: f64,
}

impl Default for VegetationConfig {
    fn default() -> Self {
        VegetationConfig {
            scale_cells: 3.0,
            min_density: 0.2,
            max_density: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindConfig {
    /// Speed range, m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Direction the wind blows toward, degrees counter-clockwise from east;
    /// `None` draws it uniformly.
    pub direction_deg: Option<f64>,
    /// Half-width of the uniform jitter around `direction_deg`.
    pub direction_jitter_deg: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        WindConfig {
            speed_min: 1.0,
            speed_max: 8.0,
            direction_deg: None,
            direction_jitter_deg: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgnitionConfig {
    /// Largest ignition cluster, cells; each event draws 1..=cells.
    pub cells: usize,
    pub placement: Placement,
}

impl Default for IgnitionConfig {
    fn default() -> Self {
        IgnitionConfig {
            cells: 3,
            placement: Placement::Central,
        }
    }
}

/// Everything that defines a synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Side of the square mask grid.
    pub fine_res: usize,
    /// Side of the square env grid.
    pub coarse_res: usize,
    /// Area of one fine pixel, km².
    pub pixel_area_km2: f64,
    pub terrain: TerrainConfig,
    pub vegetation: VegetationConfig,
    /// Largest number of water bodies; each event draws 0..=water_bodies.
    pub water_bodies: usize,
    /// Precipitation spans `[0, precipitation_max_mm]`, mm/day.
    pub precipitation_max_mm: f64,
    pub wind: WindConfig,
    pub ignition: IgnitionConfig,
    pub generator: Generator,
    /// Generating automaton; its seed is replaced per event. The default
    /// p_h of 0.3 lets most fires die out inside the 64-cell grid within
    /// the day cap.
    pub ca: CaConfig,
    /// Generating growth model for [`Generator::Mtt`].
    pub mtt: MttParams,
    /// Fires still burning after this many days stop here.
    pub day_cap: u32,
    /// Accepted events burn strictly more pixels than this.
    pub area_floor_px: usize,
    /// Years are spread evenly over `[start_year, start_year + years)`
    /// in generation order.
    pub start_year: i32,
    pub years: u32,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            fine_res: 64,
            coarse_res: 16,
            pixel_area_km2: 0.026,
            terrain: TerrainConfig::default(),
            vegetation: VegetationConfig::default(),
            water_bodies: 2,
            precipitation_max_mm: 10.0,
            wind: WindConfig::default(),
            ignition: IgnitionConfig::default(),
            generator: Generator::Ca,
            ca: CaConfig {
                p_h: 0.3,
                steps_per_day: 2,
                ..CaConfig::default()
            },
            mtt: MttParams {
                r0: 0.3,
                ..MttParams::default()
            },
            day_cap: 20,
            area_floor_px: 100,
            start_year: 2001,
            years: 20,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.coarse_res < 2 || self.fine_res < self.coarse_res || !self.fine_res.is_multiple_of(self.coarse_res) {
            return bad(format!(
                "fine_res {} must be a multiple of coarse_res {} (>= 2)",
                self.fine_res, self.coarse_res
            ));
        }
        if !(self.pixel_area_km2 > 0.0 && self.pixel_area_km2.is_finite()) {
            return bad(format!("pixel_area_km2 must be positive, got {}", self.pixel_area_km2));
        }
        let t = &self.terrain;
        if !(t.amplitude_m >= 0.0 && t.roughness >= 0.0 && t.octaves >= 1 && t.scale_cells > 0.0) {
            return bad("terrain needs amplitude_m >= 0, roughness >= 0, octaves >= 1, scale_cells > 0".into());
        }
        let v = &self.vegetation;
        if !(v.scale_cells > 0.0 && 0.0 <= v.min_density && v.min_density <= v.max_density && v.max_density <= 1.0) {
            return bad("vegetation needs scale_cells > 0 and 0 <= min_density <= max_density <= 1".into());
        }
        let w = &self.wind;
        if !(0.0 <= w.speed_min
            && w.speed_min <= w.speed_max
            && w.speed_max.is_finite()
            && w.direction_jitter_deg >= 0.0)
        {
            return bad("wind needs 0 <= speed_min <= speed_max and a non-negative jitter".into());
        }
        if self.ignition.cells == 0 {
            return bad("ignition.cells must be >= 1".into());
        }
        if self.precipitation_max_mm.is_nan() || self.precipitation_max_mm < 0.0 {
            return bad("precipitation_max_mm must be >= 0".into());
        }
        if self.day_cap <= MIN_DURATION_EXCLUSIVE {
            return bad(format!("day_cap must exceed {MIN_DURATION_EXCLUSIVE}"));
        }
        if self.years == 0 {
            return bad("years must be >= 1".into());
        }
        self.ca.validate()?;
        self.mtt.validate()?;
        Ok(())
    }

    pub fn fine_spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.fine_res, self.fine_res, self.pixel_area_km2)?)
    }

    pub fn coarse_spec(&self) -> Result<GridSpec> {
        let ratio = (self.fine_res / self.coarse_res) as f64;
        Ok(GridSpec::new(
            self.coarse_res,
            self.coarse_res,
            self.pixel_area_km2 * ratio * ratio,
        )?)
    }
}

/// Generates `n_events` accepted events named `evt0000`, `evt0001`, ...
///
/// Candidate `i` (1-based) is drawn from `SplitMix64::at(seed, i)`, so a
/// fixed seed reproduces the corpus exactly. More than 99% rejected
/// candidates is reported as a configuration error.
pub fn generate(cfg: &ScenarioConfig, n_events: usize) -> Result<Vec<FireEvent>> {
    cfg.validate()?;
    if n_events == 0 {
        return Err(Error::Config("need at least one event".into()));
    }
    let max_candidates = n_events as u64 * 100;
    let mut drafts = Vec::with_capacity(n_events);
    let mut candidate = 0u64;
    while drafts.len() < n_events {
        if candidate >= max_candidates {
            return Err(Error::Config(format!(
                "only {} of {candidate} candidate events were accepted (over 99% rejected); \
                 loosen area_floor_px or day_cap, or raise the spread rate",
                drafts.len()
            )));
        }
        candidate += 1;
        if let Some(d) = draft_event(cfg, SplitMix64::at(cfg.seed, candidate))? {
            drafts.push(d);
        }
    }
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let year = cfg.start_year + (i as u64 * cfg.years as u64 / n_events as u64) as i32;
            Ok(FireEvent::new(
                format!("evt{i:04}"),
                year,
                d.duration,
                d.days,
                d.final_mask,
                d.env,
            )?)
        })
        .collect()
}

struct Draft {
    days: [BurntMask; 3],
    final_mask: BurntMask,
    duration: u32,
    env: EnvStack,
}

fn draft_event(cfg: &ScenarioConfig, seed: u64) -> Result<Option<Draft>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = synth_env(cfg, &mut rng)?;
    let fine = cfg.fine_spec()?;
    let fine_env = resample_env(&env, fine)?;
    let Some(ignition) = ignite(cfg, &fine_env, &mut rng)? else {
        return Ok(None);
    };
    let (masks, duration) = match cfg.generator {
        Generator::Ca => run_ca(cfg, &ignition, &env, seed)?,
        Generator::Mtt => run_mtt(cfg, &ignition, &env, &mut rng)?,
    };
    let Some((days, final_mask)) = masks else {
        return Ok(None);
    };
    if duration <= MIN_DURATION_EXCLUSIVE || final_mask.count() <= cfg.area_floor_px {
        return Ok(None);
    }
    Ok(Some(Draft {
        days,
        final_mask,
        duration,
        env,
    }))
}

type Masks = Option<([BurntMask; 3], BurntMask)>;

/// Day `d` is the state after `(d + 1) * steps_per_day` steps; the duration
/// counts days up to and including the one in which the fire died.
fn run_ca(cfg: &ScenarioConfig, ignition: &BurntMask, env: &EnvStack, seed: u64) -> Result<(Masks, u32)> {
    let ca = CaConfig { seed, ..cfg.ca.clone() };
    let mut sim = CaSim::new(ignition, env, &ca)?;
    let mut days = Vec::with_capacity(3);
    let mut duration = cfg.day_cap;
    for day in 0..cfg.day_cap {
        sim.run_steps(ca.steps_per_day as u64)?;
        if days.len() < 3 {
            days.push(sim.burnt_mask());
        }
        if sim.is_extinct() {
            duration = day + 1;
            break;
        }
    }
    let Ok(days) = <[BurntMask; 3]>::try_from(days) else {
        return Ok((None, duration));
    };
    Ok((Some((days, sim.burnt_mask())), duration))
}

/// Day `d` holds the cells reached within `d + 1` days. Growth never stops
/// by itself, so each event draws its duration uniformly from
/// `(MIN_DURATION_EXCLUSIVE, day_cap]`, cut short when the last reachable
/// cell is reached earlier.
fn run_mtt(cfg: &ScenarioConfig, ignition: &BurntMask, env: &EnvStack, rng: &mut ChaCha8Rng) -> Result<(Masks, u32)> {
    let (arrival, _) = mtt_simulate(ignition, env, &cfg.mtt, f64::INFINITY)?;
    let day = cfg.mtt.minutes_per_day;
    let last = arrival
        .minutes()
        .iter()
        .copied()
        .filter(|t| t.is_finite())
        .fold(0.0f64, f64::max);
    let drawn = rng.random_range(MIN_DURATION_EXCLUSIVE + 1..=cfg.day_cap);
    let duration = ((last / day).ceil() as u32).clamp(1, drawn);
    let at = |days: u32| arrival.reached_by(days as f64 * day).union(ignition);
    let days = [at(1)?, at(2)?, at(3)?];
    Ok((Some((days, at(duration)?)), duration))
}

fn ignite(cfg: &ScenarioConfig, fine_env: &EnvStack, rng: &mut ChaCha8Rng) -> Result<Option<BurntMask>> {
    let n = cfg.fine_res;
    let (lo, hi) = match cfg.ignition.placement {
        Placement::Central => (n / 4, (3 * n / 4).max(n / 4 + 1)),
        Placement::Uniform => (2.min(n - 1), n.saturating_sub(2).max(3.min(n))),
    };
    let burnable = |r: usize, c: usize| !is_non_combustible(fine_env, r, c);
    let Some(first) = (0..20)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(lo..hi)))
        .find(|&(r, c)| burnable(r, c))
    else {
        return Ok(None);
    };
    let mut mask = BurntMask::empty(cfg.fine_spec()?);
    mask.set(first.0, first.1, true);
    let mut cells = vec![first];
    let target = rng.random_range(1..=cfg.ignition.cells);
    for _ in 0..4 * target {
        if cells.len() >= target {
            break;
        }
        let (r, c) = cells[rng.random_range(0..cells.len())];
        let (dr, dc) = [(-1isize, 0isize), (0, 1), (1, 0), (0, -1)][rng.random_range(0..4)];
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nc < 0 || nr >= n as isize || nc >= n as isize {
            continue;
        }
        let (nr, nc) = (nr as usize, nc as usize);
        if burnable(nr, nc) && !mask.get(nr, nc) {
            mask.set(nr, nc, true);
            cells.push((nr, nc));
        }
    }
    Ok(Some(mask))
}

/// Smoothly interpolated lattice noise in `[0, 1)`, row-major.
pub fn value_noise(height: usize, width: usize, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    let gh = (height as f64 / scale).ceil() as usize + 2;
    let gw = (width as f64 / scale).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.random::<f64>()).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        let y = (r as f64 + 0.5) / scale;
        let (y0, ty) = (y.floor() as usize, smooth(y.fract()));
        for c in 0..width {
            let x = (c as f64 + 0.5) / scale;
            let (x0, tx) = (x.floor() as usize, smooth(x.fract()));
            let at = |i: usize, j: usize| lattice[i * gw + j];
            let top = at(y0, x0) + (at(y0, x0 + 1) - at(y0, x0)) * tx;
            let bottom = at(y0 + 1, x0) + (at(y0 + 1, x0 + 1) - at(y0 + 1, x0)) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    out
}

/// Octave sum of [`value_noise`], normalised back to `[0, 1)`.
pub fn fractal_noise(height: usize, width: usize, terrain: &TerrainConfig, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = vec![0.0; height * width];
    let (mut amp, mut total, mut scale) = (1.0, 0.0, terrain.scale_cells);
    for _ in 0..terrain.octaves {
        for (o, v) in out.iter_mut().zip(value_noise(height, width, scale, rng)) {
            *o += amp * v;
        }
        total += amp;
        amp *= terrain.roughness;
        scale = (scale / 2.0).max(1.0);
    }
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Slope magnitude in degrees from central differences (one-sided at the
/// border) of an elevation grid with square cells of `cell_m` metres.
pub fn slope_degrees(elevation: &[f64], height: usize, width: usize, cell_m: f64) -> Vec<f64> {
    let at = |r: usize, c: usize| elevation[r * width + c];
    let diff = |lo: f64, hi: f64, span: usize| {
        if span == 0 {
            0.0
        } else {
            (hi - lo) / (span as f64 * cell_m)
        }
    };
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let (c0, c1) = (c.saturating_sub(1), (c + 1).min(width - 1));
            let (r0, r1) = (r.saturating_sub(1), (r + 1).min(height - 1));
            let gx = diff(at(r, c0), at(r, c1), c1 - c0);
            let gy = diff(at(r0, c), at(r1, c), r1 - r0);
            out.push(gx.hypot(gy).atan().to_degrees());
        }
    }
    out
}

/// Coarse environmental stack for one candidate, all eleven model inputs
/// plus elevation.
pub fn synth_env(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<EnvStack> {
    let spec = cfg.coarse_spec()?;
    let n = cfg.coarse_res;
    let field = |v: Vec<f64>| Field::from_vec(n, n, v.into_iter().map(|x| x as f32).collect());

    let elevation: Vec<f64> = fractal_noise(n, n, &cfg.terrain, rng)
        .into_iter()
        .map(|v| v * cfg.terrain.amplitude_m)
        .collect();
    let slope = slope_degrees(&elevation, n, n, spec.cell_size_m());

    let veg = &cfg.vegetation;
    let share = value_noise(n, n, veg.scale_cells, rng);
    let density = value_noise(n, n, veg.scale_cells * 1.5, rng);
    let mut water = vec![0.0; n * n];
    for _ in 0..rng.random_range(0..=cfg.water_bodies) {
        let (cr, cc) = (rng.random_range(0.0..n as f64), rng.random_range(0.0..n as f64));
        let radius: f64 = rng.random_range(0.8..2.0);
        for r in 0..n {
            for c in 0..n {
                if (r as f64 + 0.5 - cr).hypot(c as f64 + 0.5 - cc) <= radius {
                    water[r * n + c] = 1.0;
                }
            }
        }
    }
    let total: Vec<f64> = density
        .iter()
        .zip(&water)
        .map(|(&d, &w)| {
            if w > 0.0 {
                0.0
            } else {
                veg.min_density + (veg.max_density - veg.min_density) * d
            }
        })
        .collect();
    let tree: Vec<f64> = total.iter().zip(&share).map(|(t, s)| t * s).collect();
    let grass: Vec<f64> = total.iter().zip(&share).map(|(t, s)| t * (1.0 - s)).collect();
    let bare: Vec<f64> = total
        .iter()
        .zip(&water)
        .map(|(t, w)| (1.0 - t - w).clamp(0.0, 1.0))
        .collect();
    let above: Vec<f64> = tree.iter().zip(&grass).map(|(t, g)| 150.0 * t + 20.0 * g).collect();
    let below: Vec<f64> = above.iter().map(|a| 0.25 * a).collect();

    let w = &cfg.wind;
    let speed = if w.speed_max > w.speed_min {
        rng.random_range(w.speed_min..w.speed_max)
    } else {
        w.speed_min
    };
    let direction = match w.direction_deg {
        Some(d) if w.direction_jitter_deg > 0.0 => {
            d + rng.random_range(-w.direction_jitter_deg..w.direction_jitter_deg)
        }
        Some(d) => d,
        None => rng.random_range(0.0..360.0),
    };
    let (u, v) = (
        speed * direction.to_radians().cos(),
        speed * direction.to_radians().sin(),
    );
    let precipitation: Vec<f64> = value_noise(n, n, veg.scale_cells * 2.0, rng)
        .into_iter()
        .map(|p| p * cfg.precipitation_max_mm)
        .collect();

    let channels = vec![
        (Channel::BiomassAbove, field(above)?),
        (Channel::BiomassBelow, field(below)?),
        (Channel::Slope, field(slope)?),
        (Channel::Tree, field(tree)?),
        (Channel::Grass, field(grass)?),
        (Channel::Bare, field(bare)?),
        (Channel::Snow, Field::filled(n, n, 0.0)),
        (Channel::Water, field(water)?),
        (Channel::WindU, Field::filled(n, n, u as f32)),
        (Channel::WindV, Field::filled(n, n, v as f32)),
        (Channel::Precipitation, field(precipitation)?),
        (Channel::Elevation, field(elevation)?),
    ];
    Ok(EnvStack::new(spec, channels)?)
}
