use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use firescope_core::raster::io::*;
use firescope_core::raster::*;
use firescope_core::{BurntMask, Channel, EnvStack, Error, Field, FireEvent, GridSpec};

fn spec(h: usize, w: usize) -> GridSpec {
    GridSpec::new(h, w, 0.026).unwrap()
}

fn random_field(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Field<f64> {
    Field::from_fn(h, w, |_, _| rng.random::<f64>())
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, p: f64) -> BurntMask {
    let cells = (0..h * w).map(|_| rng.random_bool(p)).collect();
    BurntMask::from_cells(spec(h, w), cells).unwrap()
}

pub(crate) fn sample_env(h: usize, w: usize, seed: u64) -> EnvStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = Channel::MODEL_INPUTS
        .iter()
        .chain(std::iter::once(&Channel::Elevation))
        .map(|&ch| {
            let f = Field::from_fn(h, w, |_, _| {
                let u: f32 = rng.random();
                match ch {
                    Channel::Slope => u * 60.0,
                    Channel::WindU | Channel::WindV => u * 10.0 - 5.0,
                    Channel::BiomassAbove | Channel::BiomassBelow => u * 150.0,
                    Channel::Precipitation => u * 40.0,
                    Channel::Elevation => u * 900.0,
                    _ => u,
                }
            });
            (ch, f)
        })
        .collect();
    EnvStack::new(spec(h, w), channels).unwrap()
}

fn sample_event(n: usize, seed: u64) -> FireEvent {
    let s = spec(n, n);
    let mut d0 = BurntMask::empty(s);
    d0.set(n / 2, n / 2, true);
    let mut d1 = d0.clone();
    d1.set(n / 2, n / 2 + 1, true);
    let mut d2 = d1.clone();
    d2.set(n / 2 - 1, n / 2, true);
    let mut fin = d2.clone();
    for c in 0..n {
        fin.set(0, c, true);
    }
    FireEvent::new("sample", 2018, 7, [d0, d1, d2], fin, sample_env(n / 2, n / 2, seed)).unwrap()
}

#[test]
fn binarize_boundary_is_inclusive() {
    let f = Field::from_rows(&[[0.2, 0.7], [0.5, 0.5]]).unwrap();
    let m = binarize(&f, 0.5, spec(2, 2)).unwrap();
    assert_eq!(m, BurntMask::from_rows(&[[0u8, 1], [1, 1]], 0.026).unwrap());
}

#[test]
fn binarize_all_zero() {
    let f = Field::filled(4, 4, 0.0f64);
    let m = binarize(&f, 0.5, spec(4, 4)).unwrap();
    assert!(m.is_empty_mask());
}

#[test]
fn binarize_matches_cell_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = random_field(&mut rng, 64, 64);
    let m = binarize(&f, 0.5, spec(64, 64)).unwrap();
    for r in 0..64 {
        for c in 0..64 {
            let expect = f.get(r, c) >= 0.5;
            assert_eq!(m.get(r, c), expect, "cell ({r},{c})");
        }
    }
}

#[test]
fn binarize_rejects_non_finite_with_index() {
    let mut f = Field::filled(3, 3, 0.0f32);
    f.set(1, 2, f32::NAN);
    match binarize(&f, 0.5, spec(3, 3)) {
        Err(Error::NonFinite { row: 1, col: 2 }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn nearest_upsample_replicates_blocks() {
    let f = Field::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let up = resample(&f, 4, 4, ResampleMode::Nearest).unwrap();
    let expect = Field::from_rows(&[
        [1.0, 1.0, 2.0, 2.0],
        [1.0, 1.0, 2.0, 2.0],
        [3.0, 3.0, 4.0, 4.0],
        [3.0, 3.0, 4.0, 4.0],
    ])
    .unwrap();
    assert_eq!(up, expect);
}

#[test]
fn constant_field_stays_constant() {
    for mode in [ResampleMode::Nearest, ResampleMode::Bilinear] {
        for (h, w) in [(1, 1), (3, 7), (16, 16), (64, 5)] {
            let f = Field::filled(5, 9, 0.3f64);
            let out = resample(&f, h, w, mode).unwrap();
            assert!(out.as_slice().iter().all(|&v| v == 0.3), "{mode:?} {h}x{w}");
        }
    }
}

#[test]
fn nearest_downsample_matches_index_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mask = random_mask(&mut rng, 512, 512, 0.3).to_field::<f64>();
    let down = resample(&mask, 128, 128, ResampleMode::Nearest).unwrap();
    // Centre of destination cell i sits in source cell 4i + 2.
    for r in 0..128 {
        for c in 0..128 {
            assert_eq!(down.get(r, c), mask.get(4 * r + 2, 4 * c + 2));
        }
    }
}

#[test]
fn resample_rejects_empty_target() {
    let f = Field::filled(2, 2, 1.0f64);
    assert!(resample(&f, 0, 3, ResampleMode::Bilinear).is_err());
}

#[test]
fn wind_quarter_turn() {
    assert_eq!(rotate_wind(1.0, 0.0, 1), (0.0, 1.0));
    assert_eq!(rotate_wind(0.0, 1.0, 1), (-1.0, 0.0));
}

#[test]
fn single_cell_rotation_matches_coordinate_oracle() {
    let mut m = BurntMask::empty(spec(3, 3));
    m.set(0, 2, true);
    let r = m.rotate_ccw(1);
    // CCW with east = +col and north = -row: (row, col) -> (W-1-col, row).
    let oracle = |row: usize, col: usize| (3 - 1 - col, row);
    assert_eq!(oracle(0, 2), (0, 0));
    assert!(r.get(0, 0));
    assert_eq!(r.count(), 1);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_mask(&mut rng, 4, 7, 0.4);
    let r = m.rotate_ccw(1);
    assert_eq!(r.spec().dims(), (7, 4));
    for row in 0..4 {
        for col in 0..7 {
            let (nr, nc) = (7 - 1 - col, row);
            assert_eq!(r.get(nr, nc), m.get(row, col));
        }
    }
}

#[test]
fn four_quarter_turns_is_identity() {
    let e = sample_event(8, 1);
    let mut cur = e.clone();
    for _ in 0..4 {
        cur = rotate_event(&cur, 1).unwrap();
    }
    assert_eq!(cur.day_masks, e.day_masks);
    assert_eq!(cur.final_mask, e.final_mask);
    assert_eq!(cur.env, e.env);
}

#[test]
fn rotate_event_rejects_bad_k() {
    let e = sample_event(8, 1);
    assert!(rotate_event(&e, 0).is_err());
    assert!(rotate_event(&e, 4).is_err());
}

#[test]
fn rotation_preserves_areas_and_channel_multisets() {
    let e = sample_event(8, 9);
    for k in 1..=3 {
        let r = rotate_event(&e, k).unwrap();
        assert_eq!(r.final_mask.burnt_area_km2(), e.final_mask.burnt_area_km2());
        for (a, b) in e.day_masks.iter().zip(&r.day_masks) {
            assert_eq!(a.count(), b.count());
        }
        for (ch, values) in e.env.channels() {
            if matches!(ch, Channel::WindU | Channel::WindV) {
                continue;
            }
            let mut x: Vec<f32> = values.as_slice().to_vec();
            let mut y: Vec<f32> = r.env.get(*ch).unwrap().as_slice().to_vec();
            x.sort_by(f32::total_cmp);
            y.sort_by(f32::total_cmp);
            assert_eq!(x, y, "{ch}");
        }
        // Wind speed multiset is preserved too.
        let speeds = |env: &EnvStack| {
            let u = env.get(Channel::WindU).unwrap().as_slice();
            let v = env.get(Channel::WindV).unwrap().as_slice();
            let mut s: Vec<f32> = u.iter().zip(v).map(|(a, b)| a.hypot(*b)).collect();
            s.sort_by(f32::total_cmp);
            s
        };
        assert_eq!(speeds(&e.env), speeds(&r.env));
    }
}

#[test]
fn burnt_area_examples() {
    assert_eq!(BurntMask::empty(spec(4, 4)).burnt_area_km2(), 0.0);
    let mut m = BurntMask::empty(spec(4, 4));
    for i in 0..10 {
        m.set(i / 4, i % 4, true);
    }
    assert!((burnt_area_km2(&m) - 0.26).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m = random_mask(&mut rng, 33, 21, 0.37);
    let mut count = 0usize;
    for r in 0..33 {
        for c in 0..21 {
            if m.get(r, c) {
                count += 1;
            }
        }
    }
    assert_eq!(burnt_area_km2(&m), count as f64 * 0.026);
}

#[test]
fn event_rejects_short_duration_and_non_monotone_masks() {
    let e = sample_event(8, 2);
    let mut short = e.clone();
    short.duration_days = 4;
    assert!(short.validate().is_err());

    let mut broken = e.clone();
    broken.day_masks[1] = BurntMask::empty(spec(8, 8));
    assert!(broken.validate().is_err());
}

#[test]
fn env_rejects_out_of_range_values() {
    let s = spec(2, 2);
    let bad_density = vec![(Channel::Tree, Field::filled(2, 2, 1.5f32))];
    assert!(EnvStack::new(s, bad_density).is_err());
    let bad_slope = vec![(Channel::Slope, Field::filled(2, 2, 90.0f32))];
    assert!(EnvStack::new(s, bad_slope).is_err());
    let wrong_shape = vec![(Channel::Grass, Field::filled(3, 2, 0.5f32))];
    assert!(EnvStack::new(s, wrong_shape).is_err());
}

#[test]
fn pgm_layout() {
    let m = BurntMask::from_rows(&[[0u8, 1, 0], [1, 1, 0]], 0.026).unwrap();
    let text = mask_to_pgm(&m);
    assert_eq!(text, "P2\n# pixel_area=0.026\n3 2\n1\n0 1 0\n1 1 0\n");
    assert_eq!(mask_from_pgm(&text, Path::new("mem")).unwrap(), m);
}

#[test]
fn event_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let e = sample_event(8, 4);
    let manifest = write_event(&dir.path().join("ev"), &e).unwrap();
    let back = read_event(&manifest).unwrap();
    assert_eq!(back, e);
}

proptest! {
    #[test]
    fn mask_pgm_round_trip(h in 1usize..12, w in 1usize..12, bits in proptest::collection::vec(any::<bool>(), 144), area in 1e-6f64..1e3) {
        let s = GridSpec::new(h, w, area).unwrap();
        let m = BurntMask::from_cells(s, bits[..h * w].to_vec()).unwrap();
        let back = mask_from_pgm(&mask_to_pgm(&m), Path::new("mem")).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn f32_grid_round_trip(h in 1usize..9, w in 1usize..9, vals in proptest::collection::vec(any::<f32>(), 81)) {
        let f = Field::from_vec(h, w, vals[..h * w].to_vec()).unwrap();
        let back = field_from_f32_bytes(&field_to_f32_bytes(&f), h, w, Path::new("mem")).unwrap();
        let same = f.as_slice().iter().zip(back.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn nearest_is_idempotent_on_same_spec(h in 1usize..10, w in 1usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&mut rng, h, w);
        let out = resample(&f, h, w, ResampleMode::Nearest).unwrap();
        prop_assert_eq!(out, f);
    }

    #[test]
    fn bilinear_stays_in_source_range(sh in 1usize..9, sw in 1usize..9, dh in 1usize..20, dw in 1usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&mut rng, sh, sw);
        let lo = f.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = resample(&f, dh, dw, ResampleMode::Bilinear).unwrap();
        prop_assert_eq!(out.dims(), (dh, dw));
        prop_assert!(out.as_slice().iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn nearest_preserves_value_set(sh in 1usize..9, sw in 1usize..9, dh in 1usize..20, dw in 1usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&mut rng, sh, sw);
        let out = resample(&f, dh, dw, ResampleMode::Nearest).unwrap();
        prop_assert!(out.as_slice().iter().all(|v| f.as_slice().contains(v)));
    }

    #[test]
    fn wind_remap_four_times_is_identity(u in -50f32..50.0, v in -50f32..50.0) {
        prop_assert_eq!(rotate_wind(u, v, 4), (u, v));
        let (mut a, mut b) = (u, v);
        for _ in 0..4 {
            (a, b) = rotate_wind(a, b, 1);
        }
        prop_assert_eq!((a, b), (u, v));
    }
}
