use firescope_core::metrics;
use firescope_core::mtt::MttParams;
use firescope_core::FireEvent;
use firescope_nn::fidn::{Fidn, ModelConfig};
use firescope_workbench::bench::{
    bench, parse_models, read_rows_csv, summary_rows, write_rows_csv, BenchConfig, BenchRow, ModelKind, Observation,
    Predictor,
};
use firescope_workbench::render::{error_color, panel, FALSE_NEGATIVE, FALSE_POSITIVE, SCALE};
use firescope_workbench::stats::{quantile_sorted, summarize};
use firescope_workbench::synth::{generate, ScenarioConfig};
use proptest::prelude::*;

fn events(n: usize) -> Vec<FireEvent> {
    generate(
        &ScenarioConfig {
            seed: 21,
            ..ScenarioConfig::default()
        },
        n,
    )
    .unwrap()
}

fn tiny_fidn() -> Predictor {
    let model = Fidn::new(ModelConfig {
        growth_rate: 2,
        enc512_blocks: vec![1, 1, 1, 1],
        enc128_blocks: vec![1, 1],
        decoder_width: 8,
        decoder_min_width: 4,
        ..ModelConfig::desk()
    })
    .unwrap();
    let params = model.init_params::<f32>().unwrap();
    Predictor::Fidn { model, params }
}

fn all_predictors() -> Vec<Predictor> {
    let scenario = ScenarioConfig::default();
    vec![
        tiny_fidn(),
        Predictor::Ca(scenario.ca.clone()),
        Predictor::Mtt(scenario.mtt.clone()),
        Predictor::Persistence,
    ]
}

#[test]
fn persistence_is_always_benchmarked() {
    assert_eq!(
        parse_models("fidn,ca").unwrap(),
        [ModelKind::Fidn, ModelKind::Ca, ModelKind::Persistence]
    );
    assert_eq!(
        parse_models("persistence,mtt,mtt").unwrap(),
        [ModelKind::Persistence, ModelKind::Mtt]
    );
    assert!(parse_models("fidn,convlstm").is_err());
}

#[test]
fn persistence_rows_score_the_day_two_mask() {
    let evs = events(3);
    let r = bench("test", &evs, &[Predictor::Persistence], &BenchConfig::default(), None).unwrap();
    for (row, e) in r.rows.iter().zip(&evs) {
        let m = metrics::evaluate::<f64>(&e.final_mask, &e.day2().to_field()).unwrap();
        assert_eq!(row.mse, Some(m.mse));
        assert_eq!(row.ssim, Some(m.ssim));
        assert_eq!(row.psnr, Some(m.psnr));
        assert!(row.runtime_s.unwrap() >= 0.0);
    }
    assert!(r.speed.is_empty());
}

#[test]
fn every_model_consumes_identical_inputs_and_only_simulators_get_durations() {
    let evs = events(3);
    let r = bench("test", &evs, &all_predictors(), &BenchConfig::default(), None).unwrap();
    assert_eq!(r.rows.len(), 12);
    r.verify_protocol().unwrap();
    for row in &r.rows {
        let e = evs.iter().find(|e| e.name == row.event).unwrap();
        assert_eq!(row.day2_sha256, Observation::of(e).day2_sha256());
        assert_eq!(row.true_duration, e.duration_days);
        match row.model {
            ModelKind::Ca | ModelKind::Mtt => assert_eq!(row.duration_given, Some(e.duration_days)),
            _ => assert_eq!(row.duration_given, None),
        }
        assert!(row.error.is_none(), "{:?}", row.error);
    }
    let hashes: std::collections::HashSet<&str> = r.rows.iter().map(|r| r.env_sha256.as_str()).collect();
    assert_eq!(hashes.len(), 3, "one env hash per event");

    let mut tampered = r.clone();
    tampered.rows[1].day2_sha256 = "0".repeat(64);
    assert!(tampered.verify_protocol().is_err());
    let mut leaked = r.clone();
    leaked.rows[0].duration_given = Some(leaked.rows[0].true_duration);
    assert!(leaked.verify_protocol().is_err());
}

#[test]
fn speed_records_pair_fidn_inference_with_a_full_duration_ca_run() {
    let evs = events(2);
    let r = bench("test", &evs, &all_predictors(), &BenchConfig::default(), None).unwrap();
    assert_eq!(r.speed.len(), 2);
    for s in &r.speed {
        let e = evs.iter().find(|e| e.name == s.event).unwrap();
        assert_eq!(
            s.ca_steps,
            e.duration_days as u64 * BenchConfig::default().ca.steps_per_day as u64
        );
        assert!(s.fidn_seconds > 0.0 && s.ca_full_duration_seconds > 0.0);
        assert_eq!(s.ratio, s.ca_full_duration_seconds / s.fidn_seconds);
    }
    assert!(r.min_speed_ratio().is_some());
}

#[test]
fn model_failure_is_a_row_error_not_an_abort() {
    let evs = events(2);
    let broken = MttParams {
        r0: -1.0,
        ..MttParams::default()
    };
    let r = bench(
        "test",
        &evs,
        &[Predictor::Mtt(broken), Predictor::Persistence],
        &BenchConfig::default(),
        None,
    )
    .unwrap();
    for row in &r.rows {
        match row.model {
            ModelKind::Mtt => {
                assert!(row.error.as_deref().unwrap().contains("r0"));
                assert_eq!(row.mse, None);
            }
            _ => assert!(row.error.is_none()),
        }
    }
    assert!(r.stat(ModelKind::Mtt, "mse").is_none());
    assert_eq!(r.stat(ModelKind::Persistence, "mse").unwrap().n, 2);
}

#[test]
fn simulators_refuse_to_run_without_a_duration() {
    let e = &events(1)[0];
    let ca = Predictor::Ca(ScenarioConfig::default().ca);
    assert!(ca.predict(&Observation::of(e), None).is_err());
    let f = ca.predict(&Observation::of(e), Some(e.duration_days)).unwrap();
    assert!(e.day2().is_subset_of(&f.mask));
}

#[test]
fn summary_statistics_match_an_independent_second_pass() {
    let evs = events(5);
    let r = bench("test", &evs, &all_predictors(), &BenchConfig::default(), None).unwrap();
    for s in &r.summary {
        let values: Vec<f64> = r
            .rows
            .iter()
            .filter(|row| row.model == s.model)
            .map(|row| row.metric(&s.metric).unwrap())
            .collect();
        // Welford's single-pass recurrence as the independent oracle.
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, v) in values.iter().enumerate() {
            let d = v - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (v - mean);
        }
        let std = (m2 / (values.len() - 1) as f64).sqrt();
        let tol = |x: f64| 1e-12 * x.abs().max(1.0);
        assert_eq!(s.stats.n, values.len());
        if mean.is_finite() {
            assert!(
                (s.stats.mean - mean).abs() <= tol(mean),
                "{} {}: {} vs {mean}",
                s.model,
                s.metric,
                s.stats.mean
            );
            assert!((s.stats.std - std).abs() <= tol(std), "{} {}", s.model, s.metric);
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted.len() % 2, 1);
        assert_eq!(s.stats.median, sorted[sorted.len() / 2]);
    }
}

#[test]
fn quantiles_interpolate_linearly_between_order_statistics() {
    let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!((s.median, s.q1, s.q3, s.iqr), (2.5, 1.75, 3.25, 1.5));
    assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    let one = summarize(&[7.0]).unwrap();
    assert_eq!((one.mean, one.median, one.iqr), (7.0, 7.0, 0.0));
    assert!(one.std.is_nan());
    assert!(summarize(&[]).is_none());
    assert_eq!(quantile_sorted(&[0.0, 10.0], 0.3), 3.0);
}

#[test]
fn rows_csv_round_trips_exactly() {
    let evs = events(2);
    let mut r = bench("test", &evs, &all_predictors(), &BenchConfig::default(), None).unwrap();
    r.rows[0].psnr = Some(f64::INFINITY);
    r.rows[1].error = Some("boom, with \"quotes\"".into());
    r.rows[1].bce = None;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    write_rows_csv(&path, &r.rows).unwrap();
    let back = read_rows_csv(&path).unwrap();
    assert_eq!(back, r.rows);
    for (a, b) in back.iter().zip(&r.rows) {
        for m in ["bce", "mse", "rrmse", "ssim", "runtime_s"] {
            if let (Some(x), Some(y)) = (a.metric(m), b.metric(m)) {
                assert!((x - y).abs() <= 1e-12 * y.abs());
            }
        }
    }
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("event,model,bce,mse,mse_km2,rrmse,ssim,psnr,runtime_s,"));
}

#[test]
fn bench_writes_tables_rows_and_one_panel_per_event_and_model() {
    let evs = events(2);
    let dir = tempfile::tempdir().unwrap();
    let r = bench(
        "test",
        &evs,
        &all_predictors(),
        &BenchConfig::default(),
        Some(dir.path()),
    )
    .unwrap();
    let md = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
    for m in ["fidn", "ca", "mtt", "persistence"] {
        assert!(md.contains(&format!("| {m} | 2 |")), "{m} row missing:\n{md}");
    }
    assert!(md.contains("Relative speed"));
    assert_eq!(read_rows_csv(&dir.path().join("rows.csv")).unwrap(), r.rows);
    let panels: Vec<_> = std::fs::read_dir(dir.path().join("panels")).unwrap().collect();
    assert_eq!(panels.len(), 8);
    let img = image::open(dir.path().join("panels").join(format!("{}_fidn.png", evs[0].name)))
        .unwrap()
        .to_rgb8();
    assert_eq!(img.dimensions(), (4 * 64 * SCALE + 3 * 4, 64 * SCALE));
    let recomputed = summary_rows(&r.rows, &r.models);
    assert_eq!(recomputed, r.summary);
}

#[test]
fn error_panel_marks_false_positives_and_negatives_distinctly() {
    assert_eq!(error_color(true, false), FALSE_POSITIVE);
    assert_eq!(error_color(false, true), FALSE_NEGATIVE);
    assert_ne!(FALSE_POSITIVE, FALSE_NEGATIVE);
    let e = &events(1)[0];
    let img = panel(e.day2(), &e.final_mask, e.day2()).unwrap();
    let (r, c) = (0..64 * 64)
        .map(|i| (i / 64, i % 64))
        .find(|&(r, c)| e.final_mask.get(r, c) && !e.day2().get(r, c))
        .unwrap();
    let x = 3 * (64 * SCALE + 4) + c as u32 * SCALE;
    assert_eq!(*img.get_pixel(x, r as u32 * SCALE), FALSE_NEGATIVE);
}

#[test]
fn empty_event_sets_are_rejected() {
    assert!(bench("test", &[], &[Predictor::Persistence], &BenchConfig::default(), None).is_err());
}

fn row_strategy() -> impl Strategy<Value = BenchRow> {
    let metric = prop_oneof![
        Just(None),
        any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Some)
    ];
    (metric.clone(), metric.clone(), metric, "[a-z0-9_]{1,12}", 5u32..40).prop_map(|(bce, mse, ssim, event, d)| {
        BenchRow {
            event,
            model: ModelKind::Ca,
            bce,
            mse,
            mse_km2: mse.map(|m| m * 106.496),
            rrmse: None,
            ssim,
            psnr: Some(f64::INFINITY),
            runtime_s: Some(1.0 / 3.0),
            true_duration: d,
            duration_given: Some(d),
            day2_sha256: "ab".repeat(32),
            env_sha256: "cd".repeat(32),
            error: None,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_rows_survive_csv(rows in prop::collection::vec(row_strategy(), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_rows_csv(&path, &rows).unwrap();
        prop_assert_eq!(read_rows_csv(&path).unwrap(), rows);
    }
}
