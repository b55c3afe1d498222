use firescope_core::raster::{binarize, DEFAULT_THRESHOLD};
use firescope_core::{BurntMask, Field, FireEvent};

use super::{encode_event, Fidn, ModelInput};
use crate::graph::{Graph, Mode};
use crate::{NnError, ParamStore, Real, Result};

/// Model output for one event.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Raw sigmoid output.
    pub probability: Field<f32>,
    /// `max(probability, day-2 mask)`: the scored field. A cell burnt by
    /// day 2 stays burnt.
    pub field: Field<f32>,
    /// Probability binarised at 0.5, unioned with the day-2 mask.
    pub mask: BurntMask,
}

/// Inference on one encoded event with frozen (eval-mode) statistics.
pub fn predict_input<T: Real>(
    model: &Fidn,
    params: &ParamStore<T>,
    input: &ModelInput<T>,
    day2: &BurntMask,
) -> Result<Prediction> {
    if input.batch_size() != 1 {
        return Err(NnError::shape(
            "predict",
            format!("expects one event, got {}", input.batch_size()),
        ));
    }
    let mut g = Graph::new();
    let out = model.forward(&mut g, params, Mode::Eval, input)?;
    let t = g.value(out)?;
    let [_, _, h, w] = t.shape();
    if day2.spec().dims() != (h, w) {
        return Err(NnError::shape(
            "predict",
            format!("day-2 mask {:?} vs output {h}x{w}", day2.spec().dims()),
        ));
    }
    let probability = Field::from_vec(h, w, t.data().iter().map(|v| v.to_f64_lossless() as f32).collect())?;
    let field = Field::from_vec(
        h,
        w,
        probability
            .as_slice()
            .iter()
            .zip(day2.cells())
            .map(|(&p, &d)| if d { 1.0 } else { p })
            .collect(),
    )?;
    let mask = binarize(&probability, DEFAULT_THRESHOLD as f32, *day2.spec())?.union(day2)?;
    Ok(Prediction {
        probability,
        field,
        mask,
    })
}

pub fn predict<T: Real>(model: &Fidn, params: &ParamStore<T>, event: &FireEvent) -> Result<Prediction> {
    let input = encode_event(event, model.config())?;
    predict_input(model, params, &input, event.day2())
}
