use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use firescope_core::metrics::*;
use firescope_core::{BurntMask, Error, Field, GridSpec};

fn mask(rows: &[[u8; 2]]) -> BurntMask {
    BurntMask::from_rows(rows, 1.0).unwrap()
}

fn full(h: usize, w: usize, v: bool) -> BurntMask {
    BurntMask::from_cells(GridSpec::new(h, w, 1.0).unwrap(), vec![v; h * w]).unwrap()
}

fn random_pair(seed: u64, n: usize) -> (BurntMask, Field<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..n * n).map(|_| rng.random_bool(0.4)).collect();
    let t = BurntMask::from_cells(GridSpec::new(n, n, 0.026).unwrap(), cells).unwrap();
    let p = Field::from_fn(n, n, |_, _| rng.random::<f64>());
    (t, p)
}

#[test]
fn bce_half_on_all_burnt_is_ln2() {
    let t = full(3, 3, true);
    let p = Field::filled(3, 3, 0.5f64);
    assert!((bce(&t, &p).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn bce_perfect_prediction_hits_epsilon_floor() {
    let t = mask(&[[0, 1], [1, 0]]);
    let v = bce(&t, &t.to_field::<f64>()).unwrap();
    assert!(v > 0.0 && v <= 1.1e-7, "{v}");
}

#[test]
fn bce_matches_loop_oracle() {
    let (t, p) = random_pair(1, 8);
    let mut acc = 0.0;
    for r in 0..8 {
        for c in 0..8 {
            let y = if t.get(r, c) { 1.0 } else { 0.0 };
            let q = p.get(r, c).clamp(1e-7, 1.0 - 1e-7);
            acc += y * q.ln() + (1.0 - y) * (1.0 - q).ln();
        }
    }
    assert!((bce(&t, &p).unwrap() - (-acc / 64.0)).abs() < 1e-12);
}

#[test]
fn mse_examples() {
    assert_eq!(mse(&full(2, 2, false), &Field::filled(2, 2, 1.0f64)).unwrap(), 1.0);
    let t = mask(&[[0, 1], [1, 0]]);
    assert_eq!(mse(&t, &t.to_field::<f64>()).unwrap(), 0.0);
    assert_eq!(mse(&t, &Field::filled(2, 2, 0.5f64)).unwrap(), 0.25);
}

#[test]
fn rrmse_examples() {
    let t = full(2, 2, true);
    assert_eq!(rrmse(&t, &Field::filled(2, 2, 0.5f64)).unwrap(), 0.5);
    assert_eq!(rrmse(&t, &t.to_field::<f64>()).unwrap(), 0.0);
    assert!(matches!(
        rrmse(&t, &Field::filled(2, 2, 0.0f64)),
        Err(Error::ZeroPredictionEnergy)
    ));
}

#[test]
fn rrmse_matches_literal_formula() {
    let (t, p) = random_pair(2, 4);
    let mut se = 0.0;
    let mut energy = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            let y = if t.get(r, c) { 1.0 } else { 0.0 };
            se += (y - p.get(r, c)).powi(2);
            energy += p.get(r, c).powi(2);
        }
    }
    let expect = ((se / 16.0) / energy).sqrt();
    assert!((rrmse(&t, &p).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn ssim_identity_and_opposites() {
    let (_, p) = random_pair(3, 16);
    assert!((ssim(&p, &p).unwrap() - 1.0).abs() < 1e-15);
    let zeros = Field::filled(4, 4, 0.0f64);
    let ones = Field::filled(4, 4, 1.0f64);
    let c1: f64 = 1e-4;
    let expect = c1 / (1.0 + c1);
    let got = ssim(&zeros, &ones).unwrap();
    assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
    assert!((got - 9.999e-5).abs() < 1e-8);
}

#[test]
fn psnr_examples() {
    assert!((psnr_from_mse(1.0f64, 0.01) - 20.0).abs() < 1e-12);
    let t = mask(&[[0, 1], [1, 0]]);
    assert_eq!(psnr(&t, &t.to_field::<f64>()).unwrap(), f64::INFINITY);
    assert!(matches!(
        psnr(&full(2, 2, false), &Field::filled(2, 2, 0.1f64)),
        Err(Error::EmptyTruth)
    ));
}

#[test]
fn dimension_mismatch_is_reported() {
    let t = full(2, 2, true);
    let p = Field::filled(2, 3, 0.5f64);
    assert!(matches!(bce(&t, &p), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(mse(&t, &p), Err(Error::DimensionMismatch { .. })));
    assert!(ssim(&t.to_field(), &p).is_err());
}

#[test]
fn bce_minimised_at_truth_mean_among_constants() {
    let (t, _) = random_pair(4, 16);
    let mean = t.count() as f64 / 256.0;
    let at = |p: f64| bce(&t, &Field::filled(16, 16, p)).unwrap();
    let best = at(mean);
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        assert!(at(p) >= best - 1e-12, "p={p}");
    }
}

#[test]
fn works_in_single_precision() {
    let t = mask(&[[0, 1], [1, 0]]);
    let v: f32 = mse(&t, &Field::filled(2, 2, 0.5f32)).unwrap();
    assert_eq!(v, 0.25);
}

proptest! {
    #[test]
    fn ssim_symmetric_and_bounded(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Field<f64> = Field::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
        let y: Field<f64> = Field::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
        let a = ssim(&x, &y).unwrap();
        let b = ssim(&y, &x).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn psnr_decreases_with_mse(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(psnr_from_mse(1.0, lo) > psnr_from_mse(1.0, hi));
    }
}
