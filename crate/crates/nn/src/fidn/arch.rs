//! The dense encoder-decoder, written once against [`Backend`] so that
//! shape tracing, parameter declaration and real computation share one
//! definition.

use firescope_core::Channel;

use super::ModelConfig;
use crate::Result;

/// Layer vocabulary the architecture is written in. Every convolution uses
/// same-padding.
pub trait Backend {
    type V: Copy;

    fn dims(&self, v: Self::V) -> [usize; 4];
    fn conv(
        &mut self,
        name: &str,
        x: Self::V,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        bias: bool,
    ) -> Result<Self::V>;
    /// Kernel 2, stride 2, with bias.
    fn conv_transpose2(&mut self, name: &str, x: Self::V, out_ch: usize) -> Result<Self::V>;
    fn batch_norm(&mut self, name: &str, x: Self::V) -> Result<Self::V>;
    fn relu(&mut self, x: Self::V) -> Result<Self::V>;
    fn sigmoid(&mut self, x: Self::V) -> Result<Self::V>;
    fn avg_pool2(&mut self, x: Self::V) -> Result<Self::V>;
    fn concat(&mut self, xs: &[Self::V]) -> Result<Self::V>;
}

/// The six coarse channel groups, each read by its own Encoder-128.
pub const ENV_GROUPS: [(&str, &[Channel]); 6] = [
    ("biomass_above", &[Channel::BiomassAbove]),
    ("biomass_below", &[Channel::BiomassBelow]),
    ("slope", &[Channel::Slope]),
    (
        "landcover",
        &[
            Channel::Tree,
            Channel::Grass,
            Channel::Bare,
            Channel::Snow,
            Channel::Water,
        ],
    ),
    ("wind", &[Channel::WindU, Channel::WindV]),
    ("precipitation", &[Channel::Precipitation]),
];

/// Input channels of the fine-resolution encoder: burnt masks of days 0, 1, 2.
pub const MASK_CHANNELS: usize = 3;

/// BN -> ReLU -> conv.
pub fn conv_block<B: Backend>(b: &mut B, name: &str, x: B::V, out_ch: usize, kernel: usize) -> Result<B::V> {
    let y = b.batch_norm(&format!("{name}.bn"), x)?;
    let y = b.relu(y)?;
    b.conv(&format!("{name}.conv"), y, out_ch, kernel, 1, false)
}

/// 1x1 conv block to `bottleneck_factor * k` channels, then 3x3 conv block
/// to `k` channels.
pub fn bottleneck<B: Backend>(b: &mut B, cfg: &ModelConfig, name: &str, x: B::V) -> Result<B::V> {
    let k = cfg.growth_rate;
    let y = conv_block(b, &format!("{name}.reduce"), x, cfg.bottleneck_factor * k, 1)?;
    conv_block(b, &format!("{name}.grow"), y, k, 3)
}

/// `layers` bottlenecks, each reading the concatenation of the block input
/// and every earlier bottleneck output. Output has `C + layers * k` channels.
pub fn dense_block<B: Backend>(b: &mut B, cfg: &ModelConfig, name: &str, x: B::V, layers: usize) -> Result<B::V> {
    let mut features = vec![x];
    for l in 0..layers {
        let input = if features.len() == 1 {
            features[0]
        } else {
            b.concat(&features)?
        };
        let y = bottleneck(b, cfg, &format!("{name}.layer{l}"), input)?;
        features.push(y);
    }
    if features.len() == 1 {
        Ok(features[0])
    } else {
        b.concat(&features)
    }
}

/// Compressing 1x1 conv block followed by 2x2 average pooling.
pub fn transition<B: Backend>(b: &mut B, cfg: &ModelConfig, name: &str, x: B::V) -> Result<B::V> {
    let c = b.dims(x)[1];
    let out = ((c as f64 * cfg.compression).floor() as usize).max(1);
    let y = conv_block(b, name, x, out, 1)?;
    b.avg_pool2(y)
}

/// Strided stem conv, BN, ReLU and pooling, then dense blocks each followed
/// by a transition.
pub fn encoder<B: Backend>(b: &mut B, cfg: &ModelConfig, name: &str, x: B::V, blocks: &[usize]) -> Result<B::V> {
    let y = b.conv(
        &format!("{name}.stem.conv"),
        x,
        cfg.stem_width(),
        cfg.stem_kernel,
        2,
        false,
    )?;
    let y = b.batch_norm(&format!("{name}.stem.bn"), y)?;
    let y = b.relu(y)?;
    let mut y = b.avg_pool2(y)?;
    for (i, &layers) in blocks.iter().enumerate() {
        y = dense_block(b, cfg, &format!("{name}.dense{i}"), y, layers)?;
        y = transition(b, cfg, &format!("{name}.trans{i}"), y)?;
    }
    Ok(y)
}

/// Upsampling stages (transposed conv, 3x3 conv, BN, ReLU), then a 1x1 conv
/// and sigmoid to a one-channel probability map.
pub fn decoder<B: Backend>(b: &mut B, cfg: &ModelConfig, x: B::V, stages: usize) -> Result<B::V> {
    let mut y = x;
    for i in 0..stages {
        let w = cfg.decoder_stage_width(i);
        y = b.conv_transpose2(&format!("dec{i}.up"), y, w)?;
        y = b.conv(&format!("dec{i}.conv"), y, w, 3, 1, false)?;
        y = b.batch_norm(&format!("dec{i}.bn"), y)?;
        y = b.relu(y)?;
    }
    let y = b.conv("head.conv", y, 1, 1, 1, true)?;
    b.sigmoid(y)
}

/// Outputs of every sub-network, for inspection.
pub struct Trace<V> {
    pub enc512: V,
    pub enc128: Vec<V>,
    pub features: V,
    pub output: V,
}

/// Full forward pass: Encoder-512 over the masks, one Encoder-128 per
/// channel group, channel concatenation, decoder.
pub fn forward<B: Backend>(b: &mut B, cfg: &ModelConfig, masks: B::V, env: &[B::V]) -> Result<Trace<B::V>> {
    if env.len() != ENV_GROUPS.len() {
        return Err(crate::NnError::shape(
            "fidn",
            format!("expected {} env groups, got {}", ENV_GROUPS.len(), env.len()),
        ));
    }
    let stages = cfg.geometry()?.decoder_stages;
    let enc512 = encoder(b, cfg, "enc512", masks, &cfg.enc512_blocks)?;
    let mut parts = vec![enc512];
    let mut enc128 = Vec::with_capacity(env.len());
    for ((group, _), &x) in ENV_GROUPS.iter().zip(env) {
        let y = encoder(b, cfg, &format!("enc128.{group}"), x, &cfg.enc128_blocks)?;
        enc128.push(y);
        parts.push(y);
    }
    let spatial = b.dims(enc512)[2..].to_vec();
    for &p in &enc128 {
        if b.dims(p)[2..] != spatial[..] {
            return Err(crate::NnError::shape(
                "fidn",
                format!("encoder outputs disagree: {:?} vs {:?}", b.dims(enc512), b.dims(p)),
            ));
        }
    }
    let features = b.concat(&parts)?;
    let output = decoder(b, cfg, features, stages)?;
    Ok(Trace {
        enc512,
        enc128,
        features,
        output,
    })
}
