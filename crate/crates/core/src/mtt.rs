//! Minimum-travel-time fire growth.
//!
//! Cells are nodes of a grid network. Travelling from node `m` to
//! neighbour `n` takes
//!
//! ```text
//! edge_time(m, n) = dist(m, n) / (harmonic_mean(ros(m), ros(n)) * dir(m -> n))
//! ```
//!
//! minutes, where `dir` is the wind/slope multiplier evaluated at `m` along
//! the edge (1 when the field carries no directional data). Edges touching a
//! zero rate of spread are absent. Arrival times are exact shortest paths
//! from the ignition set, computed with Dijkstra's algorithm.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::ca::is_non_combustible;
use crate::raster::{resample_env, BurntMask, Channel, EnvStack};
use crate::{Error, FireEvent, GridSpec, Result};

pub const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MttNeighborhood {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
    /// 8-neighbourhood plus the eight knight moves.
    #[serde(rename = "16")]
    Sixteen,
}

const STEPS16: [(isize, isize); 16] = [
    (-1, 0),
    (0, 1),
    (1, 0),
    (0, -1),
    (-1, 1),
    (1, 1),
    (1, -1),
    (-1, -1),
    (-2, 1),
    (-1, 2),
    (1, 2),
    (2, 1),
    (2, -1),
    (1, -2),
    (-1, -2),
    (-2, -1),
];

impl MttNeighborhood {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            MttNeighborhood::Four => &STEPS16[..4],
            MttNeighborhood::Eight => &STEPS16[..8],
            MttNeighborhood::Sixteen => &STEPS16,
        }
    }
}

/// Wind and terrain used for the directional edge multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalSpread {
    /// `(u east, v north)` in m/s per cell.
    pub wind: Vec<(f64, f64)>,
    /// Metres per cell; `None` disables the slope term.
    pub elevation: Option<Vec<f64>>,
    pub k_wind: f64,
    pub k_slope: f64,
    pub min_multiplier: f64,
    pub max_multiplier: f64,
}

/// Rate of spread in m/min per cell (0 = unburnable).
#[derive(Clone, Debug, PartialEq)]
pub struct RosField {
    spec: GridSpec,
    ros: Vec<f64>,
    directional: Option<DirectionalSpread>,
}

impl RosField {
    pub fn new(spec: GridSpec, ros: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if ros.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "ros needs {} values, got {}",
                spec.len(),
                ros.len()
            )));
        }
        if let Some(i) = ros.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "ros",
                reason: format!(
                    "must be finite and >= 0, got {} at row {}, col {}",
                    ros[i],
                    i / spec.width,
                    i % spec.width
                ),
            });
        }
        Ok(RosField {
            spec,
            ros,
            directional: None,
        })
    }

    pub fn with_directional(mut self, d: DirectionalSpread) -> Result<Self> {
        if d.wind.len() != self.spec.len() || d.elevation.as_ref().is_some_and(|e| e.len() != self.spec.len()) {
            return Err(Error::InvalidGrid("directional data size differs from ros grid".into()));
        }
        self.directional = Some(d);
        Ok(self)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn ros(&self) -> &[f64] {
        &self.ros
    }

    pub fn directional(&self) -> Option<&DirectionalSpread> {
        self.directional.as_ref()
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = RosField::new(self.spec, self.ros.iter().map(|r| r * factor).collect())?;
        out.directional = self.directional.clone();
        Ok(out)
    }

    /// Wind/slope multiplier for spread from cell `from` by `(dr, dc)`.
    pub fn multiplier(&self, from: usize, dr: isize, dc: isize) -> f64 {
        let Some(d) = &self.directional else {
            return 1.0;
        };
        let dx = dc as f64;
        let dy = -dr as f64;
        let len = dx.hypot(dy);
        let (u, v) = d.wind[from];
        let along_wind = (u * dx + v * dy) / len;
        let grade = match &d.elevation {
            Some(e) => {
                let w = self.spec.width as isize;
                let to = (from as isize + dr * w + dc) as usize;
                (e[to] - e[from]) / (len * self.spec.cell_size_m())
            }
            None => 0.0,
        };
        ((d.k_wind * along_wind).exp() * (d.k_slope * grade).exp()).clamp(d.min_multiplier, d.max_multiplier)
    }

    /// Travel time in minutes from cell `from` to its neighbour at
    /// `(dr, dc)`, or `None` when either end cannot burn.
    pub fn edge_time(&self, from: usize, dr: isize, dc: isize) -> Option<f64> {
        let w = self.spec.width as isize;
        let to = (from as isize + dr * w + dc) as usize;
        let (a, b) = (self.ros[from], self.ros[to]);
        if a <= 0.0 || b <= 0.0 {
            return None;
        }
        let harmonic = 2.0 * a * b / (a + b);
        let dist = (dr as f64).hypot(dc as f64) * self.spec.cell_size_m();
        Some(dist / (harmonic * self.multiplier(from, dr, dc)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MttParams {
    /// Base rate of spread in fully vegetated cells, m/min.
    pub r0: f64,
    pub w_tree: f64,
    pub w_grass: f64,
    /// Per m/s of wind along the spread direction.
    pub k_wind: f64,
    /// Per unit grade (rise over run) along the spread direction.
    pub k_slope: f64,
    pub min_multiplier: f64,
    pub max_multiplier: f64,
    pub neighborhood: MttNeighborhood,
    pub minutes_per_day: f64,
}

impl Default for MttParams {
    fn default() -> Self {
        MttParams {
            r0: 1.5,
            w_tree: 0.6,
            w_grass: 1.0,
            k_wind: 0.15,
            k_slope: 2.0,
            min_multiplier: 0.05,
            max_multiplier: 20.0,
            neighborhood: MttNeighborhood::Sixteen,
            minutes_per_day: MINUTES_PER_DAY,
        }
    }
}

impl MttParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("r0", self.r0),
            ("w_tree", self.w_tree),
            ("w_grass", self.w_grass),
            ("k_wind", self.k_wind),
            ("k_slope", self.k_slope),
            ("minutes_per_day", self.minutes_per_day),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        if self.r0 < 0.0 || self.w_tree < 0.0 || self.w_grass < 0.0 {
            return Err(Error::InvalidParameter {
                name: "r0",
                reason: "rate and vegetation weights must be >= 0".into(),
            });
        }
        if !(self.min_multiplier > 0.0 && self.min_multiplier <= self.max_multiplier) {
            return Err(Error::InvalidParameter {
                name: "min_multiplier",
                reason: "need 0 < min_multiplier <= max_multiplier".into(),
            });
        }
        Ok(())
    }
}

/// Rate of spread from vegetation, zero on non-combustible cells, with the
/// env's wind and elevation attached as directional data.
pub fn build_ros(env: &EnvStack, params: &MttParams) -> Result<RosField> {
    params.validate()?;
    let spec = *env.spec();
    let (h, w) = spec.dims();
    let mut ros = Vec::with_capacity(spec.len());
    let mut wind = Vec::with_capacity(spec.len());
    for r in 0..h {
        for c in 0..w {
            let fuel = params.w_tree * env.value_or_zero(Channel::Tree, r, c) as f64
                + params.w_grass * env.value_or_zero(Channel::Grass, r, c) as f64;
            ros.push(if is_non_combustible(env, r, c) {
                0.0
            } else {
                params.r0 * fuel
            });
            wind.push((
                env.value_or_zero(Channel::WindU, r, c) as f64,
                env.value_or_zero(Channel::WindV, r, c) as f64,
            ));
        }
    }
    let elevation = env
        .get(Channel::Elevation)
        .map(|f| f.as_slice().iter().map(|&v| v as f64).collect());
    RosField::new(spec, ros)?.with_directional(DirectionalSpread {
        wind,
        elevation,
        k_wind: params.k_wind,
        k_slope: params.k_slope,
        min_multiplier: params.min_multiplier,
        max_multiplier: params.max_multiplier,
    })
}

/// Arrival time in minutes per cell; `+inf` where the fire never arrives.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalField {
    spec: GridSpec,
    minutes: Vec<f64>,
}

impl ArrivalField {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn minutes(&self) -> &[f64] {
        &self.minutes
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.minutes[row * self.spec.width + col]
    }

    /// Cells reached within `horizon` minutes.
    pub fn reached_by(&self, horizon: f64) -> BurntMask {
        let cells = self.minutes.iter().map(|&t| t.is_finite() && t <= horizon).collect();
        BurntMask::from_cells(self.spec, cells).expect("arrival grid is valid")
    }

    /// Arrival times as `f32` for the raw grid format.
    pub fn to_f32_field(&self) -> crate::Field32 {
        crate::Field::from_vec(
            self.spec.height,
            self.spec.width,
            self.minutes.iter().map(|&t| t as f32).collect(),
        )
        .expect("arrival grid is valid")
    }
}

#[derive(PartialEq)]
struct Entry {
    time: f64,
    cell: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on time, ties broken by cell index for determinism.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path arrival times from the ignition set.
pub fn mtt_arrival(ros: &RosField, ignition: &BurntMask, neighborhood: MttNeighborhood) -> Result<ArrivalField> {
    let spec = *ros.spec();
    if ignition.spec().dims() != spec.dims() {
        return Err(Error::DimensionMismatch {
            expected: spec.dims(),
            actual: ignition.spec().dims(),
        });
    }
    if ignition.is_empty_mask() {
        return Err(Error::EmptyIgnition);
    }
    let (h, w) = (spec.height as isize, spec.width as isize);
    let mut minutes = vec![f64::INFINITY; spec.len()];
    let mut done = vec![false; spec.len()];
    let mut heap = BinaryHeap::new();
    for (i, _) in ignition.cells().iter().enumerate().filter(|(_, &b)| b) {
        minutes[i] = 0.0;
        heap.push(Entry { time: 0.0, cell: i });
    }
    while let Some(Entry { time, cell }) = heap.pop() {
        if done[cell] {
            continue;
        }
        done[cell] = true;
        let (r, c) = ((cell / spec.width) as isize, (cell % spec.width) as isize);
        for &(dr, dc) in neighborhood.offsets() {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= h || nc >= w {
                continue;
            }
            let next = (nr * w + nc) as usize;
            if done[next] {
                continue;
            }
            if let Some(dt) = ros.edge_time(cell, dr, dc) {
                let t = time + dt;
                if t < minutes[next] {
                    minutes[next] = t;
                    heap.push(Entry { time: t, cell: next });
                }
            }
        }
    }
    Ok(ArrivalField { spec, minutes })
}

/// Cells reached within `days` of growth from `ignition`, unioned with it.
pub fn mtt_run_from(ignition: &BurntMask, env: &EnvStack, params: &MttParams, days: u32) -> Result<BurntMask> {
    let (_, mask) = mtt_simulate(ignition, env, params, days as f64 * params.minutes_per_day)?;
    Ok(mask)
}

/// Arrival field and burnt mask for a horizon in minutes (may be `+inf`).
pub fn mtt_simulate(
    ignition: &BurntMask,
    env: &EnvStack,
    params: &MttParams,
    horizon_minutes: f64,
) -> Result<(ArrivalField, BurntMask)> {
    let spec = *ignition.spec();
    let env = if env.spec().dims() != spec.dims() {
        resample_env(env, spec)?
    } else {
        env.clone()
    };
    let mut ros = build_ros(&env, params)?;
    ros.spec = spec;
    let arrival = mtt_arrival(&ros, ignition, params.neighborhood)?;
    let mask = arrival.reached_by(horizon_minutes).union(ignition)?;
    Ok((arrival, mask))
}

/// Growth for `days` from the event's day-2 mask.
pub fn mtt_run(event: &FireEvent, params: &MttParams, days: u32) -> Result<BurntMask> {
    mtt_run_from(event.day2(), &event.env, params, days)
}
