//! Shared input builders for the criterion benches.

use carbontwin_core::rng::SplitMix64;
use carbontwin_core::schema::{Domain, HarmonizedSample, Trip};

/// Random scaled windows and scalar targets for the sequence kernels.
pub fn random_windows(
    count: usize,
    window_len: usize,
    input_dim: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = SplitMix64::new(seed);
    let windows = (0..count)
        .map(|_| {
            (0..window_len * input_dim)
                .map(|_| rng.next_f64())
                .collect()
        })
        .collect();
    let targets = (0..count).map(|_| vec![rng.next_f64()]).collect();
    (windows, targets)
}

/// One long harmonized trip with plausible ranges for the filter benches.
pub fn long_trip(len: usize, seed: u64) -> Trip {
    let mut rng = SplitMix64::new(seed);
    let samples: Vec<HarmonizedSample> = (0..len)
        .map(|i| HarmonizedSample {
            time_s: i as f64,
            velocity_kmh: rng.uniform(0.0, 130.0),
            throttle_pct: rng.uniform(0.0, 100.0),
            motor_torque_nm: rng.uniform(0.0, 350.0),
            ambient_temp_c: rng.uniform(10.0, 35.0),
            cabin_temp_c: rng.uniform(18.0, 27.0),
            heat_exchanger_temp_c: None,
            longitudinal_accel_ms2: rng.uniform(-4.0, 4.0),
            co2_rate_gs: rng.uniform(0.01, 8.0),
        })
        .collect();
    Trip::try_new("bench", Domain::Icev, "qx50", samples).unwrap()
}
