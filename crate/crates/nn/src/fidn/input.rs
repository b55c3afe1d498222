use firescope_core::{BurntMask, Channel, EnvStack, FireEvent};

use super::{ModelConfig, ENV_GROUPS, MASK_CHANNELS};
use crate::{NnError, Real, Result, Tensor};

/// Fixed factor bringing each env channel to roughly unit range before it
/// enters the network.
pub fn channel_scale(channel: Channel) -> f32 {
    match channel {
        Channel::BiomassAbove | Channel::BiomassBelow => 0.01,
        Channel::Slope => 1.0 / 45.0,
        Channel::WindU | Channel::WindV => 0.1,
        Channel::Precipitation => 0.02,
        Channel::Elevation => 0.001,
        Channel::Tree | Channel::Grass | Channel::Bare | Channel::Snow | Channel::Water => 1.0,
    }
}

/// Network input for one event or a batch of events.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput<T> {
    /// `[n, 3, fine, fine]` burnt masks of days 0, 1, 2.
    pub masks: Tensor<T>,
    /// One `[n, c, coarse, coarse]` tensor per channel group, in
    /// [`ENV_GROUPS`] order.
    pub env: Vec<Tensor<T>>,
}

impl<T: Real> ModelInput<T> {
    pub fn batch_size(&self) -> usize {
        self.masks.shape()[0]
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let n = self.batch_size();
        let want = [n, MASK_CHANNELS, cfg.fine_res, cfg.fine_res];
        if self.masks.shape() != want {
            return Err(NnError::shape(
                "fidn input",
                format!("masks are {:?}, model needs {want:?}", self.masks.shape()),
            ));
        }
        if self.env.len() != ENV_GROUPS.len() {
            return Err(NnError::shape(
                "fidn input",
                format!("{} env groups, model needs {}", self.env.len(), ENV_GROUPS.len()),
            ));
        }
        for (t, (group, chans)) in self.env.iter().zip(ENV_GROUPS) {
            let want = [n, chans.len(), cfg.coarse_res, cfg.coarse_res];
            if t.shape() != want {
                return Err(NnError::shape(
                    "fidn input",
                    format!("group {group} is {:?}, model needs {want:?}", t.shape()),
                ));
            }
        }
        Ok(())
    }

    /// Concatenates inputs along the batch axis.
    pub fn stack(items: &[&ModelInput<T>]) -> Result<ModelInput<T>> {
        let masks = Tensor::stack_batch(&items.iter().map(|i| &i.masks).collect::<Vec<_>>())?;
        let env = (0..ENV_GROUPS.len())
            .map(|g| Tensor::stack_batch(&items.iter().map(|i| &i.env[g]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelInput { masks, env })
    }
}

fn mask_plane<T: Real>(mask: &BurntMask) -> impl Iterator<Item = T> + '_ {
    mask.cells().iter().map(|&b| if b { T::one() } else { T::zero() })
}

/// Builds the single-event input from the day 0/1/2 masks and the env stack.
pub fn encode_inputs<T: Real>(day_masks: [&BurntMask; 3], env: &EnvStack, cfg: &ModelConfig) -> Result<ModelInput<T>> {
    let f = cfg.fine_res;
    for (d, m) in day_masks.iter().enumerate() {
        if m.spec().dims() != (f, f) {
            return Err(NnError::Config(format!(
                "day {d} mask is {:?}, model expects {f}x{f}",
                m.spec().dims()
            )));
        }
    }
    let c = cfg.coarse_res;
    if env.spec().dims() != (c, c) {
        return Err(NnError::Config(format!(
            "env is {:?}, model expects {c}x{c}",
            env.spec().dims()
        )));
    }
    let masks: Vec<T> = day_masks.iter().flat_map(|m| mask_plane(m)).collect();
    let masks = Tensor::new([1, MASK_CHANNELS, f, f], masks)?;
    let mut groups = Vec::with_capacity(ENV_GROUPS.len());
    for (_, chans) in ENV_GROUPS {
        let mut data = Vec::with_capacity(chans.len() * c * c);
        for &ch in chans {
            let field = env.require(ch)?;
            let s = channel_scale(ch);
            data.extend(field.as_slice().iter().map(|&v| T::of((v * s) as f64)));
        }
        groups.push(Tensor::new([1, chans.len(), c, c], data)?);
    }
    Ok(ModelInput { masks, env: groups })
}

pub fn encode_event<T: Real>(event: &FireEvent, cfg: &ModelConfig) -> Result<ModelInput<T>> {
    let [d0, d1, d2] = &event.day_masks;
    encode_inputs([d0, d1, d2], &event.env, cfg)
}

/// `[1, 1, h, w]` target tensor from a burnt mask.
pub fn encode_target<T: Real>(mask: &BurntMask) -> Result<Tensor<T>> {
    let (h, w) = mask.spec().dims();
    Tensor::new([1, 1, h, w], mask_plane(mask).collect())
}
