#![allow(dead_code)] // shared fixtures; each test binary uses a subset

//! Synthetic driving world with known closed-form maps.
//!
//! Both domains share the context generator; the EV actuation and rate
//! maps are smooth and known exactly, so cascaded model predictions can
//! be checked against a closed-form oracle. Observed channels carry
//! bounded uniform noise.

use carbontwin_core::rng::SplitMix64;
use carbontwin_core::schema::{Domain, HarmonizedSample, Trip};

/// Half-widths of the bounded uniform observation noise.
pub const EV_TORQUE_NOISE: f64 = 2.0; // Nm
pub const EV_THROTTLE_NOISE: f64 = 1.5; // percentage points
pub const EV_RATE_NOISE: f64 = 0.02; // g/s

/// Mean absolute value of U(-b, b) is b/2: the error floor any predictor
/// of the noisy rate faces.
pub const EV_RATE_NOISE_FLOOR: f64 = EV_RATE_NOISE / 2.0;
pub const EV_TORQUE_NOISE_FLOOR: f64 = EV_TORQUE_NOISE / 2.0;

/// True EV actuation map: smooth functions of the shared context.
pub fn true_ev_actuation(v_kmh: f64, cabin_c: f64, accel_ms2: f64) -> (f64, f64) {
    let torque = 15.0 + 0.8 * v_kmh + 35.0 * accel_ms2 + 0.5 * (cabin_c - 20.0);
    let throttle = 100.0 / (1.0 + (-(torque - 40.0) / 30.0).exp());
    (torque, throttle)
}

/// True EV emission-rate map over [velocity, torque, throttle].
pub fn true_ev_rate(v_kmh: f64, torque_nm: f64, throttle_pct: f64) -> f64 {
    0.06 + 0.004 * v_kmh + 0.0012 * torque_nm + 0.0008 * throttle_pct
}

/// ICEV observed maps; only used to fill the measured channels of the
/// counterfactual source trips.
fn icev_actuation(v_kmh: f64, accel_ms2: f64) -> (f64, f64) {
    let torque = 25.0 + 1.1 * v_kmh + 28.0 * accel_ms2;
    let throttle = 100.0 / (1.0 + (-(torque - 60.0) / 35.0).exp());
    (torque, throttle)
}

fn icev_rate(v_kmh: f64, torque_nm: f64) -> f64 {
    0.30 + 0.009 * v_kmh + 0.0015 * torque_nm
}

struct ContextTrace {
    velocity: Vec<f64>,
    ambient: Vec<f64>,
    cabin: Vec<f64>,
    accel: Vec<f64>,
}

fn gen_context(len: usize, rng: &mut SplitMix64) -> ContextTrace {
    let base = rng.uniform(35.0, 55.0);
    let a1 = rng.uniform(10.0, 20.0);
    let p1 = rng.uniform(80.0, 120.0);
    let ph1 = rng.uniform(0.0, std::f64::consts::TAU);
    let a2 = rng.uniform(4.0, 10.0);
    let p2 = rng.uniform(17.0, 29.0);
    let ph2 = rng.uniform(0.0, std::f64::consts::TAU);
    let amb0 = rng.uniform(12.0, 32.0);
    let cab0 = rng.uniform(18.0, 26.0);
    let cab_ph = rng.uniform(0.0, std::f64::consts::TAU);

    let velocity: Vec<f64> = (0..len)
        .map(|t| {
            let t = t as f64;
            base + a1 * (std::f64::consts::TAU * t / p1 + ph1).sin()
                + a2 * (std::f64::consts::TAU * t / p2 + ph2).sin()
        })
        .collect();
    let ambient: Vec<f64> = (0..len)
        .map(|t| amb0 + 0.5 * (std::f64::consts::TAU * t as f64 / 200.0).sin())
        .collect();
    let cabin: Vec<f64> = (0..len)
        .map(|t| cab0 + 0.3 * (std::f64::consts::TAU * t as f64 / 150.0 + cab_ph).sin())
        .collect();
    let mut accel = vec![0.0; len];
    for t in 1..len {
        accel[t] = (velocity[t] - velocity[t - 1]) / 3.6; // dt = 1 s
    }
    ContextTrace {
        velocity,
        ambient,
        cabin,
        accel,
    }
}

fn build_trip(
    id: String,
    domain: Domain,
    vehicle: &str,
    ctx: &ContextTrace,
    torque: Vec<f64>,
    throttle: Vec<f64>,
    co2: Vec<f64>,
) -> Trip {
    let samples: Vec<HarmonizedSample> = (0..ctx.velocity.len())
        .map(|t| HarmonizedSample {
            time_s: t as f64,
            velocity_kmh: ctx.velocity[t],
            throttle_pct: throttle[t],
            motor_torque_nm: torque[t],
            ambient_temp_c: ctx.ambient[t],
            cabin_temp_c: ctx.cabin[t],
            heat_exchanger_temp_c: None,
            longitudinal_accel_ms2: ctx.accel[t],
            co2_rate_gs: co2[t],
        })
        .collect();
    Trip::try_new(id, domain, vehicle, samples).unwrap()
}

/// EV trips: true maps plus bounded noise on actuation and rate.
pub fn ev_world(n_trips: usize, len: usize, seed: u64) -> Vec<Trip> {
    let mut rng = SplitMix64::new(seed);
    (0..n_trips)
        .map(|k| {
            let ctx = gen_context(len, &mut rng);
            let mut torque = Vec::with_capacity(len);
            let mut throttle = Vec::with_capacity(len);
            let mut co2 = Vec::with_capacity(len);
            for t in 0..len {
                let (tq, th) = true_ev_actuation(ctx.velocity[t], ctx.cabin[t], ctx.accel[t]);
                let tq_obs = tq + rng.uniform(-EV_TORQUE_NOISE, EV_TORQUE_NOISE);
                let th_obs = th + rng.uniform(-EV_THROTTLE_NOISE, EV_THROTTLE_NOISE);
                let e = true_ev_rate(ctx.velocity[t], tq_obs, th_obs)
                    + rng.uniform(-EV_RATE_NOISE, EV_RATE_NOISE);
                torque.push(tq_obs);
                throttle.push(th_obs);
                co2.push(e);
            }
            build_trip(
                format!("ev{k:03}"),
                Domain::Ev,
                "synth-ev",
                &ctx,
                torque,
                throttle,
                co2,
            )
        })
        .collect()
}

/// ICEV trips drawn from the same context distribution; their measured
/// actuation and rate follow the combustion maps.
pub fn icev_world(n_trips: usize, len: usize, seed: u64) -> Vec<Trip> {
    let mut rng = SplitMix64::new(seed);
    (0..n_trips)
        .map(|k| {
            let ctx = gen_context(len, &mut rng);
            let mut torque = Vec::with_capacity(len);
            let mut throttle = Vec::with_capacity(len);
            let mut co2 = Vec::with_capacity(len);
            for t in 0..len {
                let (tq, th) = icev_actuation(ctx.velocity[t], ctx.accel[t]);
                let tq_obs = tq + rng.uniform(-3.0, 3.0);
                let th_obs = th + rng.uniform(-2.0, 2.0);
                let e = icev_rate(ctx.velocity[t], tq_obs) + rng.uniform(-0.05, 0.05);
                torque.push(tq_obs);
                throttle.push(th_obs);
                co2.push(e.max(0.0));
            }
            build_trip(
                format!("icev{k:03}"),
                Domain::Icev,
                "synth-icev",
                &ctx,
                torque,
                throttle,
                co2,
            )
        })
        .collect()
}

/// Closed-form counterfactual: the true EV maps applied to a trip's
/// observed context, noise-free, one value per sample.
pub fn ev_counterfactual_oracle(trip: &Trip) -> Vec<f64> {
    trip.samples()
        .iter()
        .map(|s| {
            let (tq, th) =
                true_ev_actuation(s.velocity_kmh, s.cabin_temp_c, s.longitudinal_accel_ms2);
            true_ev_rate(s.velocity_kmh, tq, th)
        })
        .collect()
}

/// Rebuilds trips with the emission channel scaled by `c`.
pub fn scale_co2(trips: &[Trip], c: f64) -> Vec<Trip> {
    trips
        .iter()
        .map(|trip| {
            let samples: Vec<HarmonizedSample> = trip
                .samples()
                .iter()
                .map(|s| HarmonizedSample {
                    co2_rate_gs: s.co2_rate_gs * c,
                    ..s.clone()
                })
                .collect();
            Trip::try_new(trip.trip_id(), trip.domain(), trip.vehicle(), samples).unwrap()
        })
        .collect()
}
