//! Stochastic cellular-automaton fire spread.
//!
//! Each cell is non-combustible, combustible, burning or burnt. In one step
//! every burning cell burns out, and every combustible cell gets one
//! independent ignition trial per burning neighbour with probability
//!
//! ```text
//! p_burn = clamp(p_h (1 + p_veg)(1 + p_den) p_w p_s, 0, 1)
//! p_w    = exp(c1 V) exp(c2 V (cos θ - 1))
//! p_s    = exp(a θ_s)
//! ```
//!
//! `V` is the wind speed at the burning cell, `θ` the angle between the
//! wind and the spread direction, and `θ_s` the terrain slope along the
//! spread direction in degrees (uphill positive). Directional slope needs
//! an elevation channel; without one `p_s = 1`.
//!
//! Random draws come from [`SplitMix64`] seeded with `CaConfig::seed`.
//! Targets are visited in row-major order and, for each, its burning
//! neighbours in [`Neighborhood::offsets`] order; every such pair consumes
//! exactly one draw `u` and ignites the target when `u < p_burn`.

mod rng;

pub use rng::SplitMix64;

use serde::{Deserialize, Serialize};

use crate::raster::{resample_env, BurntMask, Channel, EnvStack};
use crate::{Error, FireEvent, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellState {
    NonCombustible,
    Combustible,
    Burning,
    Burnt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    VonNeumann4,
    Moore8,
}

const OFFSETS: [(isize, isize); 8] = [(-1, 0), (0, 1), (1, 0), (0, -1), (-1, 1), (1, 1), (1, -1), (-1, -1)];

impl Neighborhood {
    /// `(d_row, d_col)` offsets: N, E, S, W, then NE, SE, SW, NW.
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::VonNeumann4 => &OFFSETS[..4],
            Neighborhood::Moore8 => &OFFSETS,
        }
    }
}

/// Piecewise-constant lookup: `factors[i]` applies below `edges[i]`, the
/// last factor at or above the last edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorBins {
    pub edges: Vec<f64>,
    pub factors: Vec<f64>,
}

impl FactorBins {
    pub fn constant(factor: f64) -> Self {
        FactorBins {
            edges: Vec::new(),
            factors: vec![factor],
        }
    }

    pub fn lookup(&self, x: f64) -> f64 {
        let i = self.edges.iter().take_while(|&&e| x >= e).count();
        self.factors[i]
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        let ok = self.factors.len() == self.edges.len() + 1
            && self.edges.windows(2).all(|w| w[0] < w[1])
            && self.edges.iter().chain(&self.factors).all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter {
                name,
                reason: "need finite increasing edges and one more factor than edges".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaConfig {
    /// Ignition probability under neutral vegetation, no wind, flat ground.
    pub p_h: f64,
    /// Wind coefficient, per m/s.
    pub c1: f64,
    /// Wind-direction coefficient, per m/s.
    pub c2: f64,
    /// Slope coefficient, per degree.
    pub a: f64,
    /// Factor keyed on tree share `tree / (tree + grass)`.
    pub veg_factors: FactorBins,
    /// Factor keyed on combustible density `min(tree + grass, 1)`.
    pub den_factors: FactorBins,
    pub steps_per_day: u32,
    pub neighborhood: Neighborhood,
    pub seed: u64,
}

impl Default for CaConfig {
    fn default() -> Self {
        CaConfig {
            p_h: 0.58,
            c1: 0.045,
            c2: 0.131,
            a: 0.078,
            veg_factors: FactorBins {
                edges: vec![1.0 / 3.0, 2.0 / 3.0],
                factors: vec![-0.3, 0.0, 0.4],
            },
            den_factors: FactorBins {
                edges: vec![1.0 / 3.0, 2.0 / 3.0],
                factors: vec![-0.4, 0.0, 0.3],
            },
            steps_per_day: 8,
            neighborhood: Neighborhood::Moore8,
            seed: 0,
        }
    }
}

impl CaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_h) {
            return Err(Error::InvalidParameter {
                name: "p_h",
                reason: format!("must lie in [0,1], got {}", self.p_h),
            });
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("a", self.a)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        if self.steps_per_day == 0 {
            return Err(Error::InvalidParameter {
                name: "steps_per_day",
                reason: "must be at least 1".into(),
            });
        }
        self.veg_factors.validate("veg_factors")?;
        self.den_factors.validate("den_factors")
    }
}

/// Max of water, snow and bare density above this makes a cell non-combustible.
pub const NON_COMBUSTIBLE_DENSITY: f32 = 0.5;

pub fn is_non_combustible(env: &EnvStack, row: usize, col: usize) -> bool {
    [Channel::Water, Channel::Snow, Channel::Bare]
        .iter()
        .map(|&c| env.value_or_zero(c, row, col))
        .fold(0.0f32, f32::max)
        > NON_COMBUSTIBLE_DENSITY
}

/// Per-cell quantities the automaton reads, derived once from an env stack
/// on the simulation grid.
#[derive(Clone, Debug)]
pub struct Landscape {
    height: usize,
    width: usize,
    cell_size_m: f64,
    non_combustible: Vec<bool>,
    /// `(1 + p_veg)(1 + p_den)` per cell.
    fuel_factor: Vec<f64>,
    wind: Vec<(f64, f64)>,
    elevation: Option<Vec<f64>>,
}

impl Landscape {
    pub fn from_env(env: &EnvStack, cfg: &CaConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = env.spec();
        let (h, w) = spec.dims();
        let mut non_combustible = Vec::with_capacity(spec.len());
        let mut fuel_factor = Vec::with_capacity(spec.len());
        let mut wind = Vec::with_capacity(spec.len());
        for r in 0..h {
            for c in 0..w {
                non_combustible.push(is_non_combustible(env, r, c));
                let tree = env.value_or_zero(Channel::Tree, r, c) as f64;
                let grass = env.value_or_zero(Channel::Grass, r, c) as f64;
                let total = tree + grass;
                let share = if total > 0.0 { tree / total } else { 0.0 };
                let p_veg = cfg.veg_factors.lookup(share);
                let p_den = cfg.den_factors.lookup(total.min(1.0));
                fuel_factor.push((1.0 + p_veg) * (1.0 + p_den));
                wind.push((
                    env.value_or_zero(Channel::WindU, r, c) as f64,
                    env.value_or_zero(Channel::WindV, r, c) as f64,
                ));
            }
        }
        let elevation = env
            .get(Channel::Elevation)
            .map(|f| f.as_slice().iter().map(|&v| v as f64).collect());
        Ok(Landscape {
            height: h,
            width: w,
            cell_size_m: spec.cell_size_m(),
            non_combustible,
            fuel_factor,
            wind,
            elevation,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn is_non_combustible(&self, row: usize, col: usize) -> bool {
        self.non_combustible[row * self.width + col]
    }

    /// Ignition probability for spread from burning cell `from` into `to`.
    pub fn burn_probability(&self, cfg: &CaConfig, from: (usize, usize), to: (usize, usize)) -> f64 {
        let fi = from.0 * self.width + from.1;
        let ti = to.0 * self.width + to.1;
        let dx = to.1 as f64 - from.1 as f64;
        let dy = from.0 as f64 - to.0 as f64;
        let dist_cells = dx.hypot(dy);

        let (u, v) = self.wind[fi];
        let speed = u.hypot(v);
        let p_w = if speed > 0.0 {
            let cos_theta = (u * dx + v * dy) / (speed * dist_cells);
            (cfg.c1 * speed).exp() * (cfg.c2 * speed * (cos_theta - 1.0)).exp()
        } else {
            1.0
        };
        let p_s = match &self.elevation {
            Some(elev) => {
                let rise = elev[ti] - elev[fi];
                let slope_deg = (rise / (dist_cells * self.cell_size_m)).atan().to_degrees();
                (cfg.a * slope_deg).exp()
            }
            None => 1.0,
        };
        (cfg.p_h * self.fuel_factor[ti] * p_w * p_s).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaGrid {
    height: usize,
    width: usize,
    cells: Vec<CellState>,
}

impl CaGrid {
    /// All cells combustible or non-combustible per `land`, with `ignition`
    /// cells burning.
    pub fn ignite(land: &Landscape, ignition: &BurntMask) -> Result<Self> {
        if ignition.spec().dims() != land.dims() {
            return Err(Error::DimensionMismatch {
                expected: land.dims(),
                actual: ignition.spec().dims(),
            });
        }
        let cells = ignition
            .cells()
            .iter()
            .zip(&land.non_combustible)
            .map(|(&lit, &nc)| match (lit, nc) {
                (true, _) => CellState::Burning,
                (false, true) => CellState::NonCombustible,
                (false, false) => CellState::Combustible,
            })
            .collect();
        Ok(CaGrid {
            height: land.height,
            width: land.width,
            cells,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> CellState {
        self.cells[row * self.width + col]
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn burning_count(&self) -> usize {
        self.cells.iter().filter(|&&s| s == CellState::Burning).count()
    }

    /// Burning or burnt cells.
    pub fn burnt_mask(&self, spec: crate::GridSpec) -> Result<BurntMask> {
        let cells = self
            .cells
            .iter()
            .map(|&s| matches!(s, CellState::Burning | CellState::Burnt))
            .collect();
        BurntMask::from_cells(spec, cells)
    }
}

/// One synchronous automaton step.
pub fn ca_step(grid: &CaGrid, land: &Landscape, cfg: &CaConfig, rng: &mut SplitMix64) -> Result<CaGrid> {
    cfg.validate()?;
    if grid.dims() != land.dims() {
        return Err(Error::DimensionMismatch {
            expected: land.dims(),
            actual: grid.dims(),
        });
    }
    let (h, w) = grid.dims();
    let offsets = cfg.neighborhood.offsets();
    let mut next = grid.cells.clone();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            match grid.cells[i] {
                CellState::Burning => next[i] = CellState::Burnt,
                CellState::Combustible => {
                    let mut ignited = false;
                    for &(dr, dc) in offsets {
                        let (nr, nc) = (r as isize + dr, c as isize + dc);
                        if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if grid.cells[nr * w + nc] != CellState::Burning {
                            continue;
                        }
                        let p = land.burn_probability(cfg, (nr, nc), (r, c));
                        if rng.next_f64() < p {
                            ignited = true;
                        }
                    }
                    if ignited {
                        next[i] = CellState::Burning;
                    }
                }
                CellState::NonCombustible | CellState::Burnt => {}
            }
        }
    }
    Ok(CaGrid {
        height: h,
        width: w,
        cells: next,
    })
}

/// A running automaton: landscape, state and generator bundled together.
#[derive(Clone, Debug)]
pub struct CaSim {
    land: Landscape,
    grid: CaGrid,
    cfg: CaConfig,
    rng: SplitMix64,
    spec: crate::GridSpec,
    steps: u64,
}

impl CaSim {
    /// Starts from `ignition` burning; `env` is resampled to the mask grid
    /// when their dimensions differ.
    pub fn new(ignition: &BurntMask, env: &EnvStack, cfg: &CaConfig) -> Result<Self> {
        let spec = *ignition.spec();
        let env = if env.spec().dims() != spec.dims() {
            resample_env(env, spec)?
        } else {
            env.clone()
        };
        let land = Landscape::from_env(&env, cfg)?;
        let grid = CaGrid::ignite(&land, ignition)?;
        Ok(CaSim {
            land,
            grid,
            cfg: cfg.clone(),
            rng: SplitMix64::new(cfg.seed),
            spec,
            steps: 0,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        self.grid = ca_step(&self.grid, &self.land, &self.cfg, &mut self.rng)?;
        self.steps += 1;
        Ok(())
    }

    /// Advances `n` steps, stopping early once nothing is burning.
    pub fn run_steps(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            if self.is_extinct() {
                break;
            }
            self.step()?;
        }
        Ok(())
    }

    pub fn is_extinct(&self) -> bool {
        self.grid.burning_count() == 0
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn grid(&self) -> &CaGrid {
        &self.grid
    }

    pub fn landscape(&self) -> &Landscape {
        &self.land
    }

    pub fn burnt_mask(&self) -> BurntMask {
        self.grid.burnt_mask(self.spec).expect("grid matches its own spec")
    }
}

/// Runs the automaton for `days` from `ignition`.
pub fn ca_run_from(ignition: &BurntMask, env: &EnvStack, cfg: &CaConfig, days: u32) -> Result<BurntMask> {
    let mut sim = CaSim::new(ignition, env, cfg)?;
    sim.run_steps(days as u64 * cfg.steps_per_day as u64)?;
    Ok(sim.burnt_mask())
}

/// Runs the automaton for `days` starting from the event's day-2 mask.
pub fn ca_run(event: &FireEvent, cfg: &CaConfig, days: u32) -> Result<BurntMask> {
    ca_run_from(event.day2(), &event.env, cfg, days)
}
