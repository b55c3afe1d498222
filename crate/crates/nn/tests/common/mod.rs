#![allow(dead_code)]

use firescope_core::{BurntMask, Channel, EnvStack, Field, FireEvent, GridSpec};
use firescope_nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

pub fn disc(res: usize, center: (f64, f64), radius: f64) -> BurntMask {
    let spec = GridSpec::new(res, res, 0.026).unwrap();
    let cells = (0..res * res)
        .map(|i| {
            let (r, c) = ((i / res) as f64, (i % res) as f64);
            (r - center.0).hypot(c - center.1) <= radius
        })
        .collect();
    BurntMask::from_cells(spec, cells).unwrap()
}

pub fn env(res: usize, wind: (f32, f32), seed: u64) -> EnvStack {
    let spec = GridSpec::new(res, res, 0.026 * 16.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree: f32 = rng.random_range(0.2..0.6);
    let chans = Channel::MODEL_INPUTS
        .iter()
        .map(|&ch| {
            let f = match ch {
                Channel::Tree => Field::from_fn(res, res, |r, _| tree * (r as f32 / res as f32)),
                Channel::Grass => Field::filled(res, res, 0.3),
                Channel::Bare | Channel::Snow | Channel::Water => Field::filled(res, res, 0.0),
                Channel::WindU => Field::filled(res, res, wind.0),
                Channel::WindV => Field::filled(res, res, wind.1),
                Channel::Slope => Field::from_fn(res, res, |r, c| ((r + c) % 7) as f32),
                Channel::BiomassAbove => Field::filled(res, res, 80.0),
                Channel::BiomassBelow => Field::filled(res, res, 20.0),
                Channel::Precipitation => Field::filled(res, res, 2.0),
                Channel::Elevation => unreachable!(),
            };
            (ch, f)
        })
        .collect();
    EnvStack::new(spec, chans).unwrap()
}

/// Concentric-disc event whose final extent is stretched downwind.
pub fn disc_event(name: &str, fine: usize, coarse: usize, center: (f64, f64), growth: f64, seed: u64) -> FireEvent {
    let wind = ((seed % 3) as f32 - 1.0, 1.0);
    let days = [
        disc(fine, center, 1.5),
        disc(fine, center, 2.5),
        disc(fine, center, 3.5),
    ];
    let shifted = (center.0 - wind.1 as f64 * 2.0, center.1 + wind.0 as f64 * 2.0);
    let grown = disc(fine, shifted, 3.5 + growth);
    let fin = grown.union(&days[2]).unwrap();
    FireEvent::new(name, 2000, 6, days, fin, env(coarse, wind, seed)).unwrap()
}
