//! Minimal tensor and reverse-mode differentiation engine, and the dense
//! encoder-decoder burnt-area model built on it.
//!
//! * [`Tensor`] is a dense NCHW array; [`Graph`] records ops on a tape and
//!   differentiates a scalar loss.
//! * [`ParamStore`] holds named parameters and batch-norm buffers;
//!   [`checkpoint`] serialises it; [`Adam`] updates it.
//! * [`fidn`] defines the architecture, training and prediction.
//!
//! Everything is generic over [`Real`] (`f32` for training and inference,
//! `f64` for gradient checks).

pub mod checkpoint;
mod error;
pub mod fidn;
pub mod gradcheck;
mod graph;
pub mod kernels;
mod optim;
mod params;
mod real;
mod tensor;

pub use error::{NnError, Result};
pub use graph::{BnBatchStats, Gradients, Graph, Mode, Var};
pub use kernels::Padding;
pub use optim::{Adam, AdamConfig};
pub use params::{Init, ParamSpec, ParamStore};
pub use real::{gemm, Real};
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Graph32 = Graph<f32>;
pub type Graph64 = Graph<f64>;
pub type ParamStore32 = ParamStore<f32>;
pub type ParamStore64 = ParamStore<f64>;
