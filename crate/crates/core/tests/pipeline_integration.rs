//! End-to-end pipeline behavior on the synthetic world.

mod common;

use carbontwin_core::dataset::{MinMaxScaler, SplitSpec, WindowSpec};
use carbontwin_core::nn::TrainConfig;
use carbontwin_core::pipeline::{
    counterfactual, left_riemann_total, proxy_validate, save_checkpoint, train_emissions_model,
    train_feature_model, train_model, FitSpec, MeasuredActuation, ModelRole, PipelineError,
};
use carbontwin_core::schema::{Domain, HarmonizedSample, Trip};

fn quick_spec(seed: u64, epochs: usize, hidden: usize) -> FitSpec {
    FitSpec {
        hidden_units: hidden,
        lstm_layers: 1,
        train: TrainConfig {
            epochs,
            base_lr: 5e-3,
            batch_size: 64,
            ..TrainConfig::default()
        },
        window: WindowSpec::default(),
        split: SplitSpec {
            seed,
            ..SplitSpec::default()
        },
        seed,
    }
}

#[test]
fn emissions_model_learns_synthetic_map() {
    let trips = common::ev_world(12, 90, 101);
    let outcome = train_emissions_model(Domain::Ev, &trips, &quick_spec(7, 12, 16)).unwrap();
    // noisy targets bound achievable error from below; the check here is
    // only that learning happened at all
    assert!(
        outcome.val_mae[0] < 0.08,
        "validation MAE {} g/s",
        outcome.val_mae[0]
    );
    assert_eq!(outcome.history.len(), 12);
    assert_eq!(outcome.manifest.len(), 12);
}

#[test]
fn zero_variance_targets_predict_the_constant() {
    let trips = common::ev_world(7, 60, 33);
    let constant: Vec<Trip> = trips
        .iter()
        .map(|t| {
            let samples: Vec<HarmonizedSample> = t
                .samples()
                .iter()
                .map(|s| HarmonizedSample {
                    co2_rate_gs: 0.25,
                    ..s.clone()
                })
                .collect();
            Trip::try_new(t.trip_id(), t.domain(), t.vehicle(), samples).unwrap()
        })
        .collect();
    let outcome = train_emissions_model(Domain::Ev, &constant, &quick_spec(3, 2, 8)).unwrap();
    // degenerate target channel inverts to its constant, so the error
    // vanishes identically
    assert_eq!(outcome.val_mae[0], 0.0);
}

#[test]
fn replaying_measured_actuation_equals_direct() {
    let trips = common::ev_world(10, 70, 55);
    let outcome = train_emissions_model(Domain::Ev, &trips, &quick_spec(5, 4, 8)).unwrap();
    let g = outcome.model;
    let replay = MeasuredActuation {
        window_len: g.window.length,
    };
    let report = proxy_validate(&replay, &g, &trips[..4]).unwrap();
    for row in &report.rows {
        assert_eq!(
            row.proxy_mae, row.direct_mae,
            "substitution identity must be exact for {}",
            row.trip_id
        );
        assert_eq!(row.torque_mae, 0.0);
        assert_eq!(row.throttle_mae, 0.0);
    }
    assert_eq!(report.proxy_not_worse, report.rows.len());
}

#[test]
fn proxy_validate_rejects_domain_mismatch() {
    let ev = common::ev_world(7, 60, 21);
    let icev = common::icev_world(7, 60, 22);
    let g = train_emissions_model(Domain::Ev, &ev, &quick_spec(9, 2, 8))
        .unwrap()
        .model;
    let f = train_feature_model(Domain::Icev, &icev, &quick_spec(9, 2, 8))
        .unwrap()
        .model;
    assert!(matches!(
        proxy_validate(&f, &g, &ev),
        Err(PipelineError::DomainMismatch { .. })
    ));
}

#[test]
fn constant_context_trip_gives_constant_counterfactual() {
    let ev = common::ev_world(8, 70, 77);
    let g = train_emissions_model(Domain::Ev, &ev, &quick_spec(11, 3, 8))
        .unwrap()
        .model;
    let f = train_feature_model(Domain::Ev, &ev, &quick_spec(12, 3, 8))
        .unwrap()
        .model;

    // zero velocity and fixed context throughout
    let samples: Vec<HarmonizedSample> = (0..40)
        .map(|t| HarmonizedSample {
            time_s: t as f64,
            velocity_kmh: 0.0,
            throttle_pct: 0.0,
            motor_torque_nm: 0.0,
            ambient_temp_c: 20.0,
            cabin_temp_c: 22.0,
            heat_exchanger_temp_c: None,
            longitudinal_accel_ms2: 0.0,
            co2_rate_gs: 0.5,
        })
        .collect();
    let trip = Trip::try_new("flat", Domain::Icev, "synth-icev", samples).unwrap();
    let result = counterfactual(&trip, &f, &g).unwrap();

    let first = result.counterfactual_rate_gs[0];
    for v in &result.counterfactual_rate_gs {
        assert_eq!(*v, first, "identical windows must predict identically");
    }

    // constant series: the left-Riemann rule and a trapezoidal oracle
    // agree to float noise
    let trapezoid: f64 = result
        .time_s
        .windows(2)
        .zip(result.gap_gs.windows(2))
        .map(|(t, g)| 0.5 * (g[0] + g[1]) * (t[1] - t[0]))
        .sum();
    assert!((result.gap_total_g - trapezoid).abs() < 1e-9);

    // totals are plain rate * dt sums
    let expected_total = left_riemann_total(&result.time_s, &result.counterfactual_rate_gs);
    assert_eq!(result.counterfactual_total_g, expected_total);
    assert_eq!(
        result.gap_total_g,
        result.counterfactual_total_g - result.observed_total_g
    );
}

#[test]
fn counterfactual_needs_both_cascade_windows() {
    let ev = common::ev_world(8, 70, 88);
    let g = train_emissions_model(Domain::Ev, &ev, &quick_spec(13, 2, 8))
        .unwrap()
        .model;
    let f = train_feature_model(Domain::Ev, &ev, &quick_spec(14, 2, 8))
        .unwrap()
        .model;
    let short = common::icev_world(1, 15, 5).pop().unwrap(); // < 2*10-1
    assert!(matches!(
        counterfactual(&short, &f, &g),
        Err(PipelineError::TripTooShort { needed: 19, .. })
    ));
    // swapped roles are rejected
    assert!(matches!(
        counterfactual(&short, &g, &f),
        Err(PipelineError::RoleMismatch { .. })
    ));
}

#[test]
fn scaling_targets_by_powers_of_two_scales_errors_exactly() {
    let trips = common::ev_world(10, 70, 61);
    let spec = quick_spec(17, 4, 8);
    let base = train_emissions_model(Domain::Ev, &trips, &spec).unwrap();
    for c in [2.0, 0.5] {
        let scaled_trips = common::scale_co2(&trips, c);
        let scaled = train_emissions_model(Domain::Ev, &scaled_trips, &spec).unwrap();
        let expected = c * base.val_mae[0];
        assert!(
            (scaled.val_mae[0] - expected).abs() <= expected * 1e-12 + 1e-15,
            "c={c}: {} vs {}",
            scaled.val_mae[0],
            expected
        );
    }
    // non-dyadic factors stay within float noise of linear scaling
    let c = 1.7;
    let scaled = train_emissions_model(Domain::Ev, &common::scale_co2(&trips, c), &spec).unwrap();
    assert!(scaled.val_mae[0] <= c * base.val_mae[0] + 1e-6);
}

#[test]
fn no_leakage_scaler_ignores_heldout_trips() {
    let trips = common::ev_world(10, 60, 91);
    let spec = SplitSpec {
        seed: 4,
        ..SplitSpec::default()
    };
    let split = carbontwin_core::dataset::split_by_trip(&trips, &spec).unwrap();
    let train_refs: Vec<&Trip> = split.train.iter().map(|&i| &trips[i]).collect();
    let channels = ModelRole::Emissions.input_channels();
    let before = MinMaxScaler::fit(&train_refs, channels).unwrap();

    // blow up the held-out trips; the fitted parameters must not move
    let mut mutated = trips.clone();
    for &i in split.val.iter().chain(&split.test) {
        let t = &mutated[i];
        let samples: Vec<HarmonizedSample> = t
            .samples()
            .iter()
            .map(|s| HarmonizedSample {
                velocity_kmh: s.velocity_kmh * 1000.0,
                motor_torque_nm: s.motor_torque_nm * -50.0,
                ..s.clone()
            })
            .collect();
        mutated[i] = Trip::try_new(t.trip_id(), t.domain(), t.vehicle(), samples).unwrap();
    }
    let train_refs_after: Vec<&Trip> = split.train.iter().map(|&i| &mutated[i]).collect();
    let after = MinMaxScaler::fit(&train_refs_after, channels).unwrap();
    assert_eq!(before, after);
}

#[test]
fn training_is_deterministic_and_checkpoints_byte_identical() {
    let trips = common::ev_world(8, 60, 42);
    let spec = quick_spec(23, 3, 8);
    let a = train_model(ModelRole::Emissions, Domain::Ev, &trips, &spec).unwrap();
    let b = train_model(ModelRole::Emissions, Domain::Ev, &trips, &spec).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);

    let dir = tempfile::tempdir().unwrap();
    let pa = dir.path().join("a.ckpt");
    let pb = dir.path().join("b.ckpt");
    save_checkpoint(&a.model, &pa, &["seed = 23".to_string()]).unwrap();
    save_checkpoint(&b.model, &pb, &["seed = 23".to_string()]).unwrap();
    assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
}

#[test]
fn feature_model_learns_affine_actuation() {
    // torque is affine in (v, a) and throttle constant: both should be
    // recovered nearly exactly without noise
    let base = common::ev_world(10, 80, 19);
    let clean: Vec<Trip> = base
        .iter()
        .map(|t| {
            let samples: Vec<HarmonizedSample> = t
                .samples()
                .iter()
                .map(|s| HarmonizedSample {
                    motor_torque_nm: 10.0 + 0.5 * s.velocity_kmh + 8.0 * s.longitudinal_accel_ms2,
                    throttle_pct: 35.0,
                    ..s.clone()
                })
                .collect();
            Trip::try_new(t.trip_id(), t.domain(), t.vehicle(), samples).unwrap()
        })
        .collect();
    let mut spec = quick_spec(29, 100, 16);
    spec.train.base_lr = 1e-2;
    spec.train.batch_size = 32;
    let outcome = train_feature_model(Domain::Ev, &clean, &spec).unwrap();
    assert!(
        outcome.val_mae[0] < 0.5,
        "torque MAE {} Nm",
        outcome.val_mae[0]
    );
    assert!(
        outcome.val_mae[1] < 0.5,
        "throttle MAE {} %",
        outcome.val_mae[1]
    );
}
