use sbmeter_core::harness::{
    decode_path_logits, emit_report, encode_path_logits, read_report, run_measurement, run_sweep, save_model,
    summarize_path_logits, write_path_logits, ExperimentConfig, LabeledDataset, ModelSpec, SweepParameter, SweepSpec,
};
use sbmeter_core::models::{fixture_encoder, Activation, FixtureKind, TextAnchors};
use sbmeter_core::sbmetrics::{acc_contribution, tv_sensitivity, PathLogits};
use sbmeter_core::{BandSpec, PairId, SensitivityReport};

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        pairs: 8,
        steps: 5,
        runs: 2,
        seed: Some(3),
        ..Default::default()
    }
}

#[test]
fn hand_built_two_step_record() {
    let rec = PathLogits::new(
        vec![0.0, 1.0],
        vec![vec![0.0], vec![4.0]],
        0,
        PairId::default(),
        "full",
        2.0,
    )
    .unwrap();
    let bytes = encode_path_logits(&[rec]).unwrap();
    let back = decode_path_logits(&bytes).unwrap();
    assert_eq!(tv_sensitivity(&back).unwrap().value, 2.0);
}

#[test]
fn reference_only_sweep_has_unit_decay() {
    let ds = LabeledDataset::synthetic(1, 3, 3, [3, 8, 8]).unwrap();
    let model = ModelSpec::Smoothing {
        cutoff: 0.6,
        seed: 2,
        embed_dim: 4,
    }
    .build(ds.image_shape())
    .unwrap();
    let anchors = TextAnchors::seeded(4, 3, 4).unwrap();
    let cfg = ExperimentConfig {
        sweep: Some(SweepSpec {
            parameter: SweepParameter::Cutoff,
            values: vec![1.0],
        }),
        ..small_config()
    };
    let s = run_sweep(&cfg, &model, &ds, &anchors).unwrap();
    assert_eq!(s.reports.len(), 1);
    let d = s.reports[0].decay.as_ref().unwrap();
    assert_eq!(d.baseline, Some(1.0));
    assert_eq!(d.low, Some(1.0));
    assert_eq!(d.mid, Some(1.0));
    assert_eq!(d.high, Some(1.0));
}

#[test]
fn beta_sweep_reproduces_table_layout() {
    let ds = LabeledDataset::synthetic(5, 2, 4, [3, 8, 8]).unwrap();
    let model = fixture_encoder(
        FixtureKind::TinyCnn {
            seed: 6,
            activation: Activation::Relu,
            embed_dim: 4,
        },
        [3, 8, 8],
    )
    .unwrap();
    let anchors = TextAnchors::seeded(7, 2, 4).unwrap();
    let betas = vec![1.0, 0.9, 0.8, 0.7, 0.6];
    let cfg = ExperimentConfig {
        sweep: Some(SweepSpec {
            parameter: SweepParameter::Beta,
            values: betas.clone(),
        }),
        ..small_config()
    };
    let s = run_sweep(&cfg, &model, &ds, &anchors).unwrap();
    let got: Vec<f64> = s.reports.iter().map(|r| r.modulation.as_ref().unwrap().value).collect();
    assert_eq!(got, betas);
    for r in &s.reports {
        assert!(r.mean.low.is_some() && r.mean.high.is_some() && r.mean.ratio.is_some());
    }
}

#[test]
fn gamma_sweep_on_prenorm_block() {
    let ds = LabeledDataset::synthetic(8, 2, 3, [3, 8, 8]).unwrap();
    let model = ModelSpec::TinyPrenormBlock {
        seed: 9,
        embed_dim: 4,
        gamma_s: 1.0,
        patch: 4,
    }
    .build(ds.image_shape())
    .unwrap();
    let anchors = TextAnchors::seeded(10, 2, 4).unwrap();
    let cfg = ExperimentConfig {
        sweep: Some(SweepSpec {
            parameter: SweepParameter::GammaS,
            values: vec![0.5, 2.0],
        }),
        ..small_config()
    };
    let s = run_sweep(&cfg, &model, &ds, &anchors).unwrap();
    assert_eq!(s.reports.len(), 3);
    assert_eq!(s.reports[0].modulation.as_ref().unwrap().value, 1.0);

    let bad = ExperimentConfig {
        sweep: Some(SweepSpec {
            parameter: SweepParameter::Cutoff,
            values: vec![0.5],
        }),
        ..cfg
    };
    let err = run_sweep(&bad, &model, &ds, &anchors).unwrap_err().to_string();
    assert!(err.contains("ln0") && err.contains("act0"), "{err}");
}

#[test]
fn report_emit_then_parse() {
    let ds = LabeledDataset::synthetic(11, 2, 3, [1, 8, 8]).unwrap();
    let model = ModelSpec::Linear { seed: 1, embed_dim: 3 }
        .build(ds.image_shape())
        .unwrap();
    let anchors = TextAnchors::seeded(2, 2, 3).unwrap();
    let report = run_measurement(&small_config(), &model, &ds, &anchors).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    emit_report(&report, &path).unwrap();
    let back: SensitivityReport = read_report(&path).unwrap();
    assert_eq!(back, report);
}

#[test]
fn model_file_and_logits_export() {
    let dir = tempfile::tempdir().unwrap();
    let ds = LabeledDataset::synthetic(12, 2, 3, [3, 8, 8]).unwrap();
    let model = ModelSpec::TinyCnn {
        seed: 13,
        embed_dim: 4,
        activation: Some(Activation::BetaRelu { beta: 0.7 }),
    }
    .build(ds.image_shape())
    .unwrap();
    let mpath = dir.path().join("m.sbm");
    save_model(&mpath, &model).unwrap();
    let loaded = ModelSpec::File { path: mpath }.build(ds.image_shape()).unwrap();
    assert_eq!(loaded, model);

    let cfg = ExperimentConfig {
        runs: 1,
        ..small_config()
    };
    let exp = sbmeter_core::Experiment::new(cfg, ds, loaded, TextAnchors::seeded(1, 2, 4).unwrap()).unwrap();
    let m = exp.measure_with_logits().unwrap();
    let lpath = dir.path().join("l.sbp");
    write_path_logits(&lpath, &m.path_logits).unwrap();
    let again = summarize_path_logits(&sbmeter_core::harness::ingest_path_logits(&lpath).unwrap());
    assert_eq!(again.values, m.report.per_run[0].values);
}

#[test]
fn accuracy_contributions_telescope_on_a_model() {
    let ds = LabeledDataset::synthetic(14, 3, 4, [3, 8, 8]).unwrap();
    let model = ModelSpec::Linear { seed: 15, embed_dim: 3 }
        .build(ds.image_shape())
        .unwrap();
    let anchors = TextAnchors::seeded(16, 3, 3).unwrap();
    let spec = BandSpec::default();
    let acc = acc_contribution(&model, &anchors, &ds, &spec).unwrap();
    assert_eq!(acc.total, 12);
    let sum: i64 = (0..3).map(|i| acc.gain_count(i)).sum();
    assert_eq!(sum as usize, *acc.prefix_correct.last().unwrap());
}
