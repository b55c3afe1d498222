use firescope_nn::checkpoint::{self, from_bytes, to_bytes, MAGIC};
use firescope_nn::{Adam, AdamConfig, Graph, NnError, ParamStore, Tensor};
use firescope_nn::{Init, ParamSpec};

fn specs() -> Vec<ParamSpec> {
    vec![
        ParamSpec {
            name: "conv.weight".into(),
            shape: [4, 3, 3, 3],
            init: Init::FanInUniform { fan_in: 27 },
            trainable: true,
        },
        ParamSpec {
            name: "bn.gamma".into(),
            shape: [1, 4, 1, 1],
            init: Init::Ones,
            trainable: true,
        },
        ParamSpec {
            name: "bn.running_mean".into(),
            shape: [1, 4, 1, 1],
            init: Init::Zeros,
            trainable: false,
        },
    ]
}

#[test]
fn fan_in_init_is_seeded_and_bounded() {
    let a = ParamStore::<f64>::init(&specs(), 3).unwrap();
    let b = ParamStore::<f64>::init(&specs(), 3).unwrap();
    let c = ParamStore::<f64>::init(&specs(), 4).unwrap();
    assert_eq!(a.get("conv.weight").unwrap(), b.get("conv.weight").unwrap());
    assert_ne!(a.get("conv.weight").unwrap(), c.get("conv.weight").unwrap());
    let bound = (6.0f64 / 27.0).sqrt();
    assert!(a.get("conv.weight").unwrap().data().iter().all(|v| v.abs() <= bound));
    assert!(a.get("bn.gamma").unwrap().data().iter().all(|&v| v == 1.0));
    assert!(a.get("bn.running_mean").unwrap().data().iter().all(|&v| v == 0.0));
    assert_eq!(a.num_trainable(), 108 + 4);
    assert!(!a.is_trainable("bn.running_mean").unwrap());
}

#[test]
fn unknown_parameter_is_reported() {
    let a = ParamStore::<f64>::init(&specs(), 0).unwrap();
    assert!(matches!(a.get("nope"), Err(NnError::UnknownParam(_))));
}

#[test]
fn adam_first_step_moves_each_weight_by_lr_against_the_gradient() {
    let mut store = ParamStore::<f64>::default();
    store
        .insert("w", Tensor::new([1, 1, 1, 3], vec![1.0, -2.0, 0.5]).unwrap(), true)
        .unwrap();
    let mut g = Graph::new();
    let w = g.param_shared("w", store.get_shared("w").unwrap().clone());
    let coef = g.input(Tensor::new([1, 1, 1, 3], vec![3.0, -0.25, 1e-3]).unwrap());
    let prod = g.mul(w, coef).unwrap();
    let loss = g.sum(prod).unwrap();
    let grads = g.backward(loss).unwrap();
    store.set_grads(&grads).unwrap();
    let mut adam = Adam::new(AdamConfig {
        lr: 0.01,
        ..AdamConfig::default()
    });
    adam.step(&mut store);
    assert_eq!(adam.steps(), 1);
    // bias-corrected m / sqrt(v) is sign(g) up to eps
    let got = store.get("w").unwrap().data();
    let want = [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-7, "{got:?}");
    }
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let store = ParamStore::<f32>::init(&specs(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&path, &store).unwrap();
    let mut other = ParamStore::<f32>::init(&specs(), 10).unwrap();
    checkpoint::load_into(&path, &mut other).unwrap();
    for ((na, a), (nb, b)) in store.iter().zip(other.iter()) {
        assert_eq!(na, nb);
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(
        store.is_trainable("bn.gamma").unwrap(),
        other.is_trainable("bn.gamma").unwrap()
    );
}

#[test]
fn checkpoint_layout_matches_documented_bytes() {
    let mut store = ParamStore::<f64>::default();
    store
        .insert("b", Tensor::new([1, 1, 1, 2], vec![1.5, -2.0]).unwrap(), true)
        .unwrap();
    let bytes = to_bytes(&store);
    let mut want = Vec::new();
    want.extend_from_slice(b"FIDNCKPT");
    want.extend_from_slice(&1u32.to_le_bytes());
    want.extend_from_slice(&1u32.to_le_bytes());
    want.extend_from_slice(&1u32.to_le_bytes());
    want.push(b'b');
    want.push(2);
    want.push(4);
    for d in [1u64, 1, 1, 2] {
        want.extend_from_slice(&d.to_le_bytes());
    }
    want.extend_from_slice(&1.5f64.to_le_bytes());
    want.extend_from_slice(&(-2.0f64).to_le_bytes());
    assert_eq!(bytes, want);
}

#[test]
fn lower_rank_tensors_gain_leading_unit_dims() {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.push(b'v');
    bytes.push(1);
    bytes.push(1);
    bytes.extend_from_slice(&3u64.to_le_bytes());
    for v in [1.0f32, 2.0, 3.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let t = from_bytes::<f64>(&bytes).unwrap();
    assert_eq!(t[0].1.shape(), [1, 1, 1, 3]);
    assert_eq!(t[0].1.data(), &[1.0, 2.0, 3.0]);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let store = ParamStore::<f64>::init(&specs(), 1).unwrap();
    let good = to_bytes(&store);
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(from_bytes::<f64>(&bad_magic).is_err());
    assert!(from_bytes::<f64>(&good[..good.len() - 3]).is_err());
    let mut trailing = good.clone();
    trailing.push(0);
    assert!(from_bytes::<f64>(&trailing).is_err());
    let mut bad_version = good.clone();
    bad_version[8] = 9;
    assert!(from_bytes::<f64>(&bad_version).is_err());
    // dtype byte of the first tensor: after header (16), name_len (4), name
    let name_len = u32::from_le_bytes(good[16..20].try_into().unwrap()) as usize;
    let mut bad_dtype = good.clone();
    bad_dtype[20 + name_len] = 7;
    assert!(from_bytes::<f64>(&bad_dtype).is_err());
}

#[test]
fn loading_into_a_different_architecture_fails() {
    let store = ParamStore::<f64>::init(&specs(), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&path, &store).unwrap();
    let mut other = ParamStore::<f64>::init(&specs()[..2], 1).unwrap();
    assert!(checkpoint::load_into(&path, &mut other).is_err());
    let mut reshaped = specs();
    reshaped[0].shape = [4, 3, 1, 1];
    let mut other = ParamStore::<f64>::init(&reshaped, 1).unwrap();
    assert!(checkpoint::load_into(&path, &mut other).is_err());
    assert!(checkpoint::load_into(&dir.path().join("missing"), &mut other).is_err());
}
