//! Synthetic data, dataset assembly, the benchmark harness and the
//! `firescope` command line.
//!
//! * [`synth`] draws landscapes and runs a spread engine to produce events.
//! * [`dataset`] writes and reads dataset directories, splits them
//!   chronologically and augments training events by rotation.
//! * [`training`] trains the network on a dataset and reloads checkpoints.
//! * [`bench`] scores FIDN, CA, MTT and persistence on identical inputs.
//! * [`cli`] is the command-line surface.

pub mod bench;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod render;
pub mod stats;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
