//! Grid data model shared by all predictors.

mod env;
mod event;
mod grid;
pub mod io;
mod ops;

pub use env::{Channel, EnvStack};
pub use event::{FireEvent, MIN_DURATION_EXCLUSIVE};
pub use grid::{BurntMask, Field, GridSpec};
pub use ops::{
    binarize, burnt_area_km2, resample, resample_env, rotate_env, rotate_event, rotate_wind, ResampleMode,
    DEFAULT_THRESHOLD,
};
