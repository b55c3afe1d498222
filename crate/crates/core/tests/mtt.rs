use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use firescope_core::mtt::*;
use firescope_core::{BurntMask, Channel, EnvStack, Error, Field, GridSpec};

fn unit_spec(n: usize) -> GridSpec {
    // 1 m cells.
    GridSpec::new(n, n, 1e-6).unwrap()
}

fn seed_at(n: usize, r: usize, c: usize) -> BurntMask {
    let mut m = BurntMask::empty(unit_spec(n));
    m.set(r, c, true);
    m
}

#[test]
fn uniform_eight_neighbour_arrival_is_octile_distance() {
    let ros = RosField::new(unit_spec(7), vec![1.0; 49]).unwrap();
    let t = mtt_arrival(&ros, &seed_at(7, 0, 0), MttNeighborhood::Eight).unwrap();
    assert!((t.get(1, 1) - 2f64.sqrt()).abs() < 1e-12);
    for r in 0..7 {
        for c in 0..7 {
            let (a, b) = (r.max(c) as f64, r.min(c) as f64);
            let octile = (a - b) + b * 2f64.sqrt();
            assert!((t.get(r, c) - octile).abs() < 1e-9);
        }
    }
}

#[test]
fn uniform_four_neighbour_arrival_is_manhattan_distance() {
    let ros = RosField::new(unit_spec(6), vec![1.0; 36]).unwrap();
    let t = mtt_arrival(&ros, &seed_at(6, 2, 3), MttNeighborhood::Four).unwrap();
    for r in 0..6 {
        for c in 0..6 {
            let d = (r as f64 - 2.0).abs() + (c as f64 - 3.0).abs();
            assert!((t.get(r, c) - d).abs() < 1e-12);
        }
    }
    assert_eq!(t.get(2, 3), 0.0);
}

#[test]
fn zero_ros_cells_are_unreachable() {
    let mut ros = vec![1.0; 25];
    for r in 0..5 {
        ros[r * 5 + 2] = 0.0;
    }
    let ros = RosField::new(unit_spec(5), ros).unwrap();
    let t = mtt_arrival(&ros, &seed_at(5, 0, 0), MttNeighborhood::Eight).unwrap();
    assert!(t.get(0, 4).is_infinite());
    assert!(t.get(4, 1).is_finite());
}

#[test]
fn empty_ignition_is_an_error() {
    let ros = RosField::new(unit_spec(3), vec![1.0; 9]).unwrap();
    let empty = BurntMask::empty(unit_spec(3));
    assert!(matches!(
        mtt_arrival(&ros, &empty, MttNeighborhood::Four),
        Err(Error::EmptyIgnition)
    ));
}

#[test]
fn negative_ros_is_rejected() {
    assert!(RosField::new(unit_spec(2), vec![1.0, -1.0, 0.0, 2.0]).is_err());
}

fn env_from(n: usize, tree: impl Fn(usize, usize) -> f32) -> EnvStack {
    EnvStack::new(
        GridSpec::new(n, n, 0.01).unwrap(),
        vec![
            (Channel::Tree, Field::from_fn(n, n, tree)),
            (Channel::Grass, Field::filled(n, n, 0.0)),
            (Channel::WindU, Field::filled(n, n, 0.0)),
            (Channel::WindV, Field::filled(n, n, 0.0)),
            (Channel::Elevation, Field::filled(n, n, 10.0)),
        ],
    )
    .unwrap()
}

#[test]
fn build_ros_examples() {
    let p = MttParams::default();
    let bare = build_ros(&env_from(4, |_, _| 0.0), &p).unwrap();
    assert!(bare.ros().iter().all(|&r| r == 0.0));

    let calm = build_ros(&env_from(4, |_, _| 0.5), &p).unwrap();
    for from in 0..16 {
        let (r, c) = (from / 4, from % 4);
        for &(dr, dc) in MttNeighborhood::Sixteen.offsets() {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if (0..4).contains(&nr) && (0..4).contains(&nc) {
                assert_eq!(calm.multiplier(from, dr, dc), 1.0);
            }
        }
    }

    let base = build_ros(&env_from(5, |_, _| 0.4), &p).unwrap();
    let bumped = build_ros(&env_from(5, |r, c| if (r, c) == (2, 3) { 0.9 } else { 0.4 }), &p).unwrap();
    for i in 0..25 {
        if i == 2 * 5 + 3 {
            assert!(bumped.ros()[i] > base.ros()[i]);
        } else {
            assert_eq!(bumped.ros()[i], base.ros()[i]);
        }
    }
}

#[test]
fn downwind_spread_is_faster() {
    let n = 9;
    let spec = GridSpec::new(n, n, 0.01).unwrap();
    let env = EnvStack::new(
        spec,
        vec![
            (Channel::Tree, Field::filled(n, n, 0.5)),
            (Channel::WindU, Field::filled(n, n, 5.0)),
            (Channel::WindV, Field::filled(n, n, 0.0)),
        ],
    )
    .unwrap();
    let ros = build_ros(&env, &MttParams::default()).unwrap();
    let mut ign = BurntMask::empty(spec);
    ign.set(4, 4, true);
    let t = mtt_arrival(&ros, &ign, MttNeighborhood::Eight).unwrap();
    assert!(t.get(4, 8) < t.get(4, 0));
}

/// Relaxes every edge until nothing changes.
fn bellman_ford(ros: &RosField, ign: &BurntMask, nb: MttNeighborhood) -> Vec<f64> {
    let spec = *ros.spec();
    let (h, w) = (spec.height as isize, spec.width as isize);
    let mut t: Vec<f64> = ign
        .cells()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    loop {
        let mut changed = false;
        for m in 0..spec.len() {
            if t[m].is_infinite() {
                continue;
            }
            let (r, c) = ((m / spec.width) as isize, (m % spec.width) as isize);
            for &(dr, dc) in nb.offsets() {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h || nc >= w {
                    continue;
                }
                let n = (nr * w + nc) as usize;
                let (a, b) = (ros.ros()[m], ros.ros()[n]);
                if a == 0.0 || b == 0.0 {
                    continue;
                }
                let dist = ((dr * dr + dc * dc) as f64).sqrt() * spec.cell_size_m();
                let cand = t[m] + dist * (a + b) / (2.0 * a * b) / ros.multiplier(m, dr, dc);
                if cand < t[n] {
                    t[n] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            return t;
        }
    }
}

#[test]
fn heterogeneous_field_matches_bellman_ford() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let spec = unit_spec(5);
    let ros: Vec<f64> = (0..25)
        .map(|_| {
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random_range(0.1..5.0)
            }
        })
        .collect();
    let ros = RosField::new(spec, ros).unwrap();
    let mut ign = BurntMask::empty(spec);
    ign.set(0, 0, true);
    ign.set(3, 4, true);
    for nb in [MttNeighborhood::Four, MttNeighborhood::Eight, MttNeighborhood::Sixteen] {
        let t = mtt_arrival(&ros, &ign, nb).unwrap();
        let o = bellman_ford(&ros, &ign, nb);
        for (a, b) in t.minutes().iter().zip(&o) {
            assert!((a == b) || (a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn fixpoint_holds_with_tight_incoming_edge() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = GridSpec::new(10, 10, 0.02).unwrap();
    let env = EnvStack::new(
        spec,
        vec![
            (Channel::Tree, Field::from_fn(10, 10, |_, _| rng.random_range(0.0..1.0))),
            (
                Channel::Water,
                Field::from_fn(10, 10, |_, _| if rng.random_bool(0.1) { 1.0 } else { 0.0 }),
            ),
            (Channel::WindU, Field::filled(10, 10, 2.0)),
            (Channel::WindV, Field::filled(10, 10, 1.0)),
            (
                Channel::Elevation,
                Field::from_fn(10, 10, |_, _| rng.random_range(0.0..50.0)),
            ),
        ],
    )
    .unwrap();
    let ros = build_ros(&env, &MttParams::default()).unwrap();
    let mut ign = BurntMask::empty(spec);
    ign.set(5, 5, true);
    let nb = MttNeighborhood::Sixteen;
    let t = mtt_arrival(&ros, &ign, nb).unwrap();
    let w = 10isize;
    for n in 0..100usize {
        if t.minutes()[n].is_infinite() || ign.cells()[n] {
            continue;
        }
        let (r, c) = ((n / 10) as isize, (n % 10) as isize);
        let mut tight = false;
        for &(dr, dc) in nb.offsets() {
            // Incoming edge m -> n with m = n - (dr, dc).
            let (mr, mc) = (r - dr, c - dc);
            if mr < 0 || mc < 0 || mr >= w || mc >= w {
                continue;
            }
            let m = (mr * w + mc) as usize;
            if let Some(dt) = ros.edge_time(m, dr, dc) {
                let bound = t.minutes()[m] + dt;
                assert!(t.minutes()[n] <= bound + 1e-9);
                if (t.minutes()[n] - bound).abs() <= 1e-9 * bound.max(1.0) {
                    tight = true;
                }
            }
        }
        assert!(tight, "cell {n} has no tight incoming edge");
    }
}

#[test]
fn scaling_ros_scales_arrival_inversely() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = unit_spec(8);
    let ros = RosField::new(spec, (0..64).map(|_| rng.random_range(0.2..3.0)).collect()).unwrap();
    let mut ign = BurntMask::empty(spec);
    ign.set(1, 6, true);
    let base = mtt_arrival(&ros, &ign, MttNeighborhood::Sixteen).unwrap();
    // Powers of two keep the scaling exact in binary floating point.
    for lambda in [0.5, 2.0, 8.0] {
        let scaled = mtt_arrival(&ros.scaled(lambda).unwrap(), &ign, MttNeighborhood::Sixteen).unwrap();
        for (a, b) in base.minutes().iter().zip(scaled.minutes()) {
            assert_eq!(*b, *a / lambda);
        }
    }
}

#[test]
fn horizon_behaviour() {
    let spec = GridSpec::new(6, 6, 0.01).unwrap();
    let env = EnvStack::new(
        spec,
        vec![
            (Channel::Tree, Field::filled(6, 6, 0.7)),
            (
                Channel::Water,
                Field::from_fn(6, 6, |_, c| if c == 3 { 1.0 } else { 0.0 }),
            ),
        ],
    )
    .unwrap();
    let mut ign = BurntMask::empty(spec);
    ign.set(2, 1, true);
    let p = MttParams {
        neighborhood: MttNeighborhood::Eight,
        ..MttParams::default()
    };
    assert_eq!(mtt_run_from(&ign, &env, &p, 0).unwrap(), ign);
    let (_, all) = mtt_simulate(&ign, &env, &p, f64::INFINITY).unwrap();
    for r in 0..6 {
        for c in 0..6 {
            assert_eq!(all.get(r, c), c < 3, "({r},{c})");
        }
    }
    let mut prev = ign.clone();
    for d in 0..6 {
        let m = mtt_run_from(&ign, &env, &p, d).unwrap();
        assert!(prev.is_subset_of(&m));
        prev = m;
    }
}
