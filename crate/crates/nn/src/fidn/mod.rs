//! Dense encoder-decoder predicting the final burnt area of a fire from its
//! first three daily masks and a coarse environmental stack.
//!
//! One Encoder-512 reads the stacked day 0/1/2 masks at fine resolution;
//! six Encoder-128 instances read channel groups of the coarse stack. Both
//! families reduce to the same bottleneck size (fine / 64), their outputs
//! are concatenated along channels and a decoder upsamples back to the fine
//! grid.

pub mod arch;
mod backend;
mod input;
mod predict;
pub mod shape;
mod train;

use serde::{Deserialize, Serialize};

pub use arch::{Backend, Trace, ENV_GROUPS, MASK_CHANNELS};
pub use backend::GraphBackend;
pub use input::{channel_scale, encode_event, encode_inputs, encode_target, ModelInput};
pub use predict::{predict, predict_input, Prediction};
pub use shape::ShapeTracer;
pub use train::{
    evaluate_samples, train, train_step, EpochRecord, MetricMeans, Sample, Split, TrainConfig, TrainReport,
};

use crate::graph::{Graph, Mode, Var};
use crate::params::ParamSpec;
use crate::{NnError, ParamStore, Real, Result};

/// Network topology and resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Side of the square mask grid.
    pub fine_res: usize,
    /// Side of the square env grid; must be `fine_res / 4`.
    pub coarse_res: usize,
    /// Channels added by every bottleneck (k).
    pub growth_rate: usize,
    pub enc512_blocks: Vec<usize>,
    pub enc128_blocks: Vec<usize>,
    /// Width of the 1x1 bottleneck stage, in multiples of k.
    pub bottleneck_factor: usize,
    /// Channel fraction kept by each transition.
    pub compression: f64,
    pub stem_kernel: usize,
    /// Stem output channels; `None` means `2k`.
    pub stem_width: Option<usize>,
    /// Upsampling stages; `None` derives `log2(fine_res / bottleneck)`.
    /// A value that disagrees with the resolutions is rejected.
    pub decoder_stages: Option<usize>,
    /// Width of the first decoder stage, halved at every later stage.
    pub decoder_width: usize,
    pub decoder_min_width: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            fine_res: 64,
            coarse_res: 16,
            growth_rate: 8,
            enc512_blocks: vec![6, 12, 24, 6],
            enc128_blocks: vec![6, 12],
            bottleneck_factor: 4,
            compression: 0.5,
            stem_kernel: 7,
            stem_width: None,
            decoder_stages: None,
            decoder_width: 128,
            decoder_min_width: 8,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
            seed: 0,
        }
    }
}

/// Resolution-derived sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geometry {
    /// Spatial side shared by every encoder output.
    pub bottleneck: usize,
    pub decoder_stages: usize,
}

impl ModelConfig {
    /// Desk-scale configuration: 64 px masks, 16 px env, k = 8.
    pub fn desk() -> Self {
        Self::default()
    }

    /// Full-resolution configuration: 512 px masks, 128 px env, k = 32.
    pub fn full() -> Self {
        ModelConfig {
            fine_res: 512,
            coarse_res: 128,
            growth_rate: 32,
            decoder_width: 512,
            decoder_min_width: 16,
            ..Self::default()
        }
    }

    pub fn stem_width(&self) -> usize {
        self.stem_width.unwrap_or(2 * self.growth_rate)
    }

    pub fn decoder_stage_width(&self, stage: usize) -> usize {
        (self.decoder_width >> stage.min(63)).max(self.decoder_min_width)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let bad = |m: String| Err(NnError::Config(m));
        if self.enc512_blocks.len() != 4 {
            return bad(format!(
                "enc512_blocks needs 4 entries, got {}",
                self.enc512_blocks.len()
            ));
        }
        if self.enc128_blocks.len() != 2 {
            return bad(format!(
                "enc128_blocks needs 2 entries, got {}",
                self.enc128_blocks.len()
            ));
        }
        if self.growth_rate == 0 || self.bottleneck_factor == 0 || self.stem_kernel == 0 {
            return bad("growth_rate, bottleneck_factor and stem_kernel must be >= 1".into());
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return bad(format!("compression must be in (0, 1], got {}", self.compression));
        }
        if self.decoder_width == 0 || self.decoder_min_width == 0 {
            return bad("decoder widths must be >= 1".into());
        }
        if !(self.bn_momentum >= 0.0 && self.bn_momentum < 1.0) || self.bn_eps.is_nan() || self.bn_eps <= 0.0 {
            return bad("bn_momentum must be in [0, 1) and bn_eps > 0".into());
        }
        // Stem stride and pooling halve twice; every transition halves once.
        let fine_div = 1usize << (2 + self.enc512_blocks.len());
        let coarse_div = 1usize << (2 + self.enc128_blocks.len());
        if self.fine_res == 0 || !self.fine_res.is_multiple_of(fine_div) {
            return bad(format!(
                "fine_res {} is not a positive multiple of {fine_div}",
                self.fine_res
            ));
        }
        if self.coarse_res == 0 || !self.coarse_res.is_multiple_of(coarse_div) {
            return bad(format!(
                "coarse_res {} is not a positive multiple of {coarse_div}",
                self.coarse_res
            ));
        }
        let bottleneck = self.fine_res / fine_div;
        if self.coarse_res / coarse_div != bottleneck {
            return bad(format!(
                "encoders disagree: fine {} -> {bottleneck}, coarse {} -> {}",
                self.fine_res,
                self.coarse_res,
                self.coarse_res / coarse_div
            ));
        }
        let ratio = self.fine_res / bottleneck;
        if !ratio.is_power_of_two() {
            return bad(format!("fine/bottleneck ratio {ratio} is not a power of two"));
        }
        let stages = ratio.trailing_zeros() as usize;
        if let Some(s) = self.decoder_stages {
            if s != stages {
                return bad(format!(
                    "decoder_stages {s} cannot map {bottleneck}x{bottleneck} to {}x{}; {stages} needed",
                    self.fine_res, self.fine_res
                ));
            }
        }
        Ok(Geometry {
            bottleneck,
            decoder_stages: stages,
        })
    }
}

/// Shapes of every sub-network output for a given batch size.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeReport {
    pub enc512: [usize; 4],
    pub enc128: Vec<[usize; 4]>,
    pub features: [usize; 4],
    pub output: [usize; 4],
    pub trainable: usize,
    pub macs: u64,
}

/// A validated architecture together with its declared parameters.
#[derive(Clone, Debug)]
pub struct Fidn {
    cfg: ModelConfig,
    geometry: Geometry,
    specs: Vec<ParamSpec>,
}

impl Fidn {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        let geometry = cfg.geometry()?;
        let mut tracer = ShapeTracer::new();
        trace_into(&cfg, &mut tracer, 1)?;
        Ok(Fidn {
            cfg,
            geometry,
            specs: tracer.params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    /// Fresh parameters drawn with the configured seed.
    pub fn init_params<T: Real>(&self) -> Result<ParamStore<T>> {
        ParamStore::init(&self.specs, self.cfg.seed)
    }

    /// Symbolic shapes for a batch of `batch` events.
    pub fn trace_shapes(&self, batch: usize) -> Result<ShapeReport> {
        let mut tracer = ShapeTracer::new();
        let t = trace_into(&self.cfg, &mut tracer, batch)?;
        Ok(ShapeReport {
            enc512: t.enc512,
            enc128: t.enc128,
            features: t.features,
            output: t.output,
            trainable: tracer
                .params
                .iter()
                .filter(|p| p.trainable)
                .map(|p| p.shape.iter().product::<usize>())
                .sum(),
            macs: tracer.macs,
        })
    }

    /// Records the forward pass on `graph` and returns the probability map.
    pub fn forward<T: Real>(
        &self,
        graph: &mut Graph<T>,
        params: &ParamStore<T>,
        mode: Mode,
        input: &ModelInput<T>,
    ) -> Result<Var> {
        Ok(self.forward_trace(graph, params, mode, input)?.output)
    }

    pub fn forward_trace<T: Real>(
        &self,
        graph: &mut Graph<T>,
        params: &ParamStore<T>,
        mode: Mode,
        input: &ModelInput<T>,
    ) -> Result<Trace<Var>> {
        input.check(&self.cfg)?;
        let masks = graph.input(input.masks.clone());
        let env: Vec<Var> = input.env.iter().map(|t| graph.input(t.clone())).collect();
        let mut b = GraphBackend {
            graph,
            params,
            mode,
            bn_eps: T::of(self.cfg.bn_eps),
        };
        arch::forward(&mut b, &self.cfg, masks, &env)
    }
}

fn trace_into(cfg: &ModelConfig, tracer: &mut ShapeTracer, batch: usize) -> Result<Trace<[usize; 4]>> {
    let masks = [batch, MASK_CHANNELS, cfg.fine_res, cfg.fine_res];
    let env: Vec<[usize; 4]> = ENV_GROUPS
        .iter()
        .map(|(_, chans)| [batch, chans.len(), cfg.coarse_res, cfg.coarse_res])
        .collect();
    arch::forward(tracer, cfg, masks, &env)
}
