use firescope_core::raster::{rotate_event, MIN_DURATION_EXCLUSIVE};
use firescope_core::FireEvent;
use firescope_workbench::dataset::{
    augment, chronological, load_scenario, load_split, read_manifest, split_events, write_dataset, SplitName,
    SplitRatio,
};
use firescope_workbench::synth::{generate, ScenarioConfig};
use firescope_workbench::Error;
use proptest::prelude::*;

fn small_events(n: usize, seed: u64) -> Vec<FireEvent> {
    let cfg = ScenarioConfig {
        fine_res: 32,
        coarse_res: 8,
        area_floor_px: 20,
        seed,
        ..ScenarioConfig::default()
    };
    generate(&cfg, n).unwrap()
}

#[test]
fn split_weights_summing_to_the_event_count_are_exact() {
    assert_eq!(SplitRatio([243, 30, 30]).allocate(303).unwrap(), [243, 30, 30]);
}

#[test]
fn split_weights_otherwise_act_as_proportions() {
    assert_eq!(SplitRatio([243, 30, 30]).allocate(300).unwrap(), [240, 30, 30]);
    assert_eq!(SplitRatio([8, 1, 1]).allocate(10).unwrap(), [8, 1, 1]);
    assert_eq!(SplitRatio([8, 1, 1]).allocate(100).unwrap(), [80, 10, 10]);
    assert_eq!(SplitRatio([1, 1, 1]).allocate(4).unwrap(), [1, 1, 2]);
}

#[test]
fn split_parsing_and_degenerate_splits() {
    assert_eq!("243/30/30".parse::<SplitRatio>().unwrap(), SplitRatio([243, 30, 30]));
    assert_eq!(SplitRatio([243, 30, 30]).to_string(), "243/30/30");
    for bad in ["243/30", "a/b/c", "0/5/5", "1/2/3/4", ""] {
        assert!(bad.parse::<SplitRatio>().is_err(), "{bad:?}");
    }
    assert!(matches!(SplitRatio([1, 100, 100]).allocate(2), Err(Error::Config(_))));
}

#[test]
fn splits_are_chronological_by_year_then_name() {
    let mut events = small_events(12, 1);
    events.reverse();
    let [train, val, test] = split_events(events, SplitRatio([8, 2, 2])).unwrap();
    assert_eq!((train.len(), val.len(), test.len()), (8, 2, 2));
    let key = |e: &FireEvent| (e.year, e.name.clone());
    let max_train = train.iter().map(key).max().unwrap();
    let min_val = val.iter().map(key).min().unwrap();
    let max_val = val.iter().map(key).max().unwrap();
    let min_test = test.iter().map(key).min().unwrap();
    assert!(max_train < min_val && max_val < min_test);

    let mut shuffled = small_events(6, 2);
    shuffled.swap(0, 5);
    chronological(&mut shuffled);
    assert!(shuffled.windows(2).all(|w| key(&w[0]) <= key(&w[1])));
}

#[test]
fn one_event_augments_to_itself_and_three_rotations() {
    let e = small_events(1, 3).remove(0);
    let aug = augment(std::slice::from_ref(&e)).unwrap();
    assert_eq!(aug.len(), 4);
    assert_eq!(aug[0], e);
    for k in 1..=3u8 {
        assert_eq!(aug[k as usize], rotate_event(&e, k).unwrap());
        aug[k as usize].validate().unwrap();
    }
    let names: Vec<&str> = aug.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["evt0000", "evt0000_r90", "evt0000_r180", "evt0000_r270"]);
    assert_eq!(aug[2].final_mask.count(), e.final_mask.count());
}

#[test]
fn two_hundred_forty_three_events_augment_to_nine_hundred_seventy_two() {
    let base = small_events(9, 4);
    let train: Vec<FireEvent> = (0..243)
        .map(|i| FireEvent {
            name: format!("e{i:03}"),
            ..base[i % base.len()].clone()
        })
        .collect();
    let aug = augment(&train).unwrap();
    assert_eq!(aug.len(), 972);
    for e in &aug {
        e.validate().unwrap();
        assert!(e.duration_days > MIN_DURATION_EXCLUSIVE);
    }
    let unique: std::collections::HashSet<&str> = aug.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(unique.len(), 972);
}

#[test]
fn written_datasets_load_back_split_by_split() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig {
        seed: 8,
        ..ScenarioConfig::default()
    };
    let events = generate(&cfg, 10).unwrap();
    let summary = write_dataset(dir.path(), &cfg, events.clone(), SplitRatio([6, 2, 2])).unwrap();
    assert_eq!((summary.train, summary.validation, summary.test), (6, 2, 2));
    let [train, val, test] = split_events(events, SplitRatio([6, 2, 2])).unwrap();
    assert_eq!(load_split(dir.path(), SplitName::Train).unwrap(), train);
    assert_eq!(load_split(dir.path(), SplitName::Validation).unwrap(), val);
    assert_eq!(load_split(dir.path(), SplitName::Test).unwrap(), test);
    assert_eq!(load_scenario(dir.path()).unwrap(), cfg);
    let m = read_manifest(dir.path(), SplitName::Test).unwrap();
    assert_eq!(m.events[0], format!("events/{}/event.json", test[0].name));
}

#[test]
fn mislabelled_or_missing_manifests_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_split(dir.path(), SplitName::Train).is_err());
    std::fs::write(dir.path().join("test.json"), r#"{"split":"train","events":[]}"#).unwrap();
    assert!(matches!(
        read_manifest(dir.path(), SplitName::Test),
        Err(Error::Config(_))
    ));
    assert!("holdout".parse::<SplitName>().is_err());
    assert_eq!(load_scenario(dir.path()).unwrap(), ScenarioConfig::default());
}

proptest! {
    #[test]
    fn allocation_always_covers_every_event(a in 1usize..300, b in 0usize..60, c in 0usize..60, n in 1usize..1000) {
        if let Ok(sizes) = SplitRatio([a, b, c]).allocate(n) {
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes[0] >= 1);
            let total = (a + b + c) as f64;
            for (s, w) in sizes.iter().zip([a, b, c]) {
                prop_assert!((*s as f64 - n as f64 * w as f64 / total).abs() < 1.0 + 1e-9);
            }
        }
    }
}
