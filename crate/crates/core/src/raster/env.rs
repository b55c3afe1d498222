use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::{Field, GridSpec};
use crate::{Error, Result};

/// Environmental and meteorological driver channels.
///
/// The first eleven variants are the model's environmental inputs in their
/// canonical order. [`Channel::Elevation`] is auxiliary: the physics
/// baselines need it to tell uphill from downhill, the learned model ignores it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    BiomassAbove,
    BiomassBelow,
    Slope,
    Tree,
    Grass,
    Bare,
    Snow,
    Water,
    WindU,
    WindV,
    Precipitation,
    Elevation,
}

impl Channel {
    /// The eleven model-input channels in canonical order.
    pub const MODEL_INPUTS: [Channel; 11] = [
        Channel::BiomassAbove,
        Channel::BiomassBelow,
        Channel::Slope,
        Channel::Tree,
        Channel::Grass,
        Channel::Bare,
        Channel::Snow,
        Channel::Water,
        Channel::WindU,
        Channel::WindV,
        Channel::Precipitation,
    ];

    pub const DENSITIES: [Channel; 5] = [
        Channel::Tree,
        Channel::Grass,
        Channel::Bare,
        Channel::Snow,
        Channel::Water,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::BiomassAbove => "biomass_above",
            Channel::BiomassBelow => "biomass_below",
            Channel::Slope => "slope",
            Channel::Tree => "tree",
            Channel::Grass => "grass",
            Channel::Bare => "bare",
            Channel::Snow => "snow",
            Channel::Water => "water",
            Channel::WindU => "wind_u",
            Channel::WindV => "wind_v",
            Channel::Precipitation => "precipitation",
            Channel::Elevation => "elevation",
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            Channel::BiomassAbove | Channel::BiomassBelow => "Mg C/ha",
            Channel::Slope => "deg",
            Channel::Tree | Channel::Grass | Channel::Bare | Channel::Snow | Channel::Water => "fraction",
            Channel::WindU | Channel::WindV => "m/s",
            Channel::Precipitation => "mm",
            Channel::Elevation => "m",
        }
    }

    pub fn is_density(self) -> bool {
        Channel::DENSITIES.contains(&self)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::MODEL_INPUTS
            .iter()
            .chain(std::iter::once(&Channel::Elevation))
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidChannel {
                channel: s.to_string(),
                reason: "unknown channel name".into(),
            })
    }
}

/// Multi-channel environmental raster sharing one [`GridSpec`].
///
/// Wind is carried as `(wind_u, wind_v)`: u positive toward increasing
/// column (east), v positive toward decreasing row (north).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvStack {
    spec: GridSpec,
    channels: Vec<(Channel, Field<f32>)>,
}

impl EnvStack {
    pub fn new(spec: GridSpec, channels: Vec<(Channel, Field<f32>)>) -> Result<Self> {
        spec.validate()?;
        let mut seen = Vec::with_capacity(channels.len());
        for (ch, values) in &channels {
            if seen.contains(ch) {
                return Err(Error::InvalidChannel {
                    channel: ch.name().into(),
                    reason: "duplicate channel".into(),
                });
            }
            seen.push(*ch);
            if values.dims() != spec.dims() {
                return Err(Error::InvalidChannel {
                    channel: ch.name().into(),
                    reason: format!("shape {:?} differs from stack shape {:?}", values.dims(), spec.dims()),
                });
            }
            validate_channel(*ch, values)?;
        }
        Ok(EnvStack { spec, channels })
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn channels(&self) -> &[(Channel, Field<f32>)] {
        &self.channels
    }

    pub fn get(&self, channel: Channel) -> Option<&Field<f32>> {
        self.channels.iter().find(|(c, _)| *c == channel).map(|(_, f)| f)
    }

    /// Like [`EnvStack::get`] but reports a missing channel as an error.
    pub fn require(&self, channel: Channel) -> Result<&Field<f32>> {
        self.get(channel).ok_or_else(|| Error::InvalidChannel {
            channel: channel.name().into(),
            reason: "missing from env stack".into(),
        })
    }

    /// Value of `channel` at a cell, or 0 when the channel is absent.
    #[inline]
    pub fn value_or_zero(&self, channel: Channel, row: usize, col: usize) -> f32 {
        self.get(channel).map_or(0.0, |f| f.get(row, col))
    }

    /// Maps every channel through `f`, keeping names; used for resampling
    /// and rotation.
    pub fn map_channels(
        &self,
        spec: GridSpec,
        mut f: impl FnMut(Channel, &Field<f32>) -> Result<Field<f32>>,
    ) -> Result<EnvStack> {
        let channels = self
            .channels
            .iter()
            .map(|(c, v)| Ok((*c, f(*c, v)?)))
            .collect::<Result<Vec<_>>>()?;
        EnvStack::new(spec, channels)
    }
}

fn validate_channel(channel: Channel, values: &Field<f32>) -> Result<()> {
    let w = values.width();
    for (i, &v) in values.as_slice().iter().enumerate() {
        let bad = |reason: String| Error::InvalidChannel {
            channel: channel.name().into(),
            reason: format!("{reason} at row {}, col {}", i / w, i % w),
        };
        if !v.is_finite() {
            return Err(bad(format!("non-finite value {v}")));
        }
        if channel.is_density() && !(0.0..=1.0).contains(&v) {
            return Err(bad(format!("density {v} outside [0,1]")));
        }
        if channel == Channel::Slope && !(0.0..90.0).contains(&v) {
            return Err(bad(format!("slope {v} outside [0,90)")));
        }
    }
    Ok(())
}
