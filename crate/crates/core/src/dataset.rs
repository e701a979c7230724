//! Scaling, windowing, and trip-level splitting.
//!
//! Scaler parameters are fitted on the training split only; transforming
//! never clamps, so out-of-range test values pass through linearly and
//! the inverse stays exact on non-degenerate channels.

use thiserror::Error;

use crate::rng::SplitMix64;
use crate::schema::{HarmonizedSample, Trip};

/// Named modeling channel of a harmonized sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Velocity,
    Throttle,
    MotorTorque,
    AmbientTemp,
    CabinTemp,
    LongitudinalAccel,
    Co2Rate,
}

impl Channel {
    pub fn value(&self, s: &HarmonizedSample) -> f64 {
        match self {
            Channel::Velocity => s.velocity_kmh,
            Channel::Throttle => s.throttle_pct,
            Channel::MotorTorque => s.motor_torque_nm,
            Channel::AmbientTemp => s.ambient_temp_c,
            Channel::CabinTemp => s.cabin_temp_c,
            Channel::LongitudinalAccel => s.longitudinal_accel_ms2,
            Channel::Co2Rate => s.co2_rate_gs,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Channel::Velocity => "velocity",
            Channel::Throttle => "throttle",
            Channel::MotorTorque => "torque",
            Channel::AmbientTemp => "ambient_temp",
            Channel::CabinTemp => "cabin_temp",
            Channel::LongitudinalAccel => "accel",
            Channel::Co2Rate => "co2",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "velocity" => Some(Channel::Velocity),
            "throttle" => Some(Channel::Throttle),
            "torque" => Some(Channel::MotorTorque),
            "ambient_temp" => Some(Channel::AmbientTemp),
            "cabin_temp" => Some(Channel::CabinTemp),
            "accel" => Some(Channel::LongitudinalAccel),
            "co2" => Some(Channel::Co2Rate),
            _ => None,
        }
    }
}

/// Extracts per-sample rows of the named channels from a trip.
pub fn channel_rows(trip: &Trip, channels: &[Channel]) -> Vec<Vec<f64>> {
    trip.samples()
        .iter()
        .map(|s| channels.iter().map(|c| c.value(s)).collect())
        .collect()
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot fit a scaler on empty data (channel {channel})")]
    EmptyFit { channel: usize },
    #[error("non-finite value while fitting channel {channel}")]
    NonFiniteFit { channel: usize },
    #[error("row has {found} channels, scaler expects {expected}")]
    ChannelCount { found: usize, expected: usize },
    #[error("window length and stride must be at least 1")]
    BadWindowSpec,
    #[error("split fractions sum to {sum}, expected 1")]
    BadFractions { sum: f64 },
    #[error("{n} trips cannot populate the requested splits ({detail})")]
    TooFewTrips { n: usize, detail: String },
    #[error("split manifest names unknown trip `{trip_id}`")]
    UnknownTrip { trip_id: String },
    #[error("trip `{trip_id}` missing from the split manifest")]
    MissingFromManifest { trip_id: String },
}

/// Per-channel min-max parameters observed on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn from_parts(mins: Vec<f64>, maxs: Vec<f64>) -> MinMaxScaler {
        debug_assert_eq!(mins.len(), maxs.len());
        MinMaxScaler { mins, maxs }
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    pub fn n_channels(&self) -> usize {
        self.mins.len()
    }

    /// Fits per-channel min/max over every sample of every trip given.
    /// Callers pass the training split only.
    pub fn fit(trips: &[&Trip], channels: &[Channel]) -> Result<MinMaxScaler, DatasetError> {
        let mut mins = vec![f64::INFINITY; channels.len()];
        let mut maxs = vec![f64::NEG_INFINITY; channels.len()];
        for trip in trips {
            for s in trip.samples() {
                for (k, ch) in channels.iter().enumerate() {
                    let v = ch.value(s);
                    if !v.is_finite() {
                        return Err(DatasetError::NonFiniteFit { channel: k });
                    }
                    mins[k] = mins[k].min(v);
                    maxs[k] = maxs[k].max(v);
                }
            }
        }
        for (k, m) in mins.iter().enumerate() {
            if !m.is_finite() {
                return Err(DatasetError::EmptyFit { channel: k });
            }
        }
        Ok(MinMaxScaler { mins, maxs })
    }

    /// Fits from raw rows (one Vec per sample). Used by tests and callers
    /// that assemble rows themselves.
    pub fn fit_rows(rows: &[Vec<f64>], n_channels: usize) -> Result<MinMaxScaler, DatasetError> {
        let mut mins = vec![f64::INFINITY; n_channels];
        let mut maxs = vec![f64::NEG_INFINITY; n_channels];
        for row in rows {
            if row.len() != n_channels {
                return Err(DatasetError::ChannelCount {
                    found: row.len(),
                    expected: n_channels,
                });
            }
            for (k, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DatasetError::NonFiniteFit { channel: k });
                }
                mins[k] = mins[k].min(v);
                maxs[k] = maxs[k].max(v);
            }
        }
        for (k, m) in mins.iter().enumerate() {
            if !m.is_finite() {
                return Err(DatasetError::EmptyFit { channel: k });
            }
        }
        Ok(MinMaxScaler { mins, maxs })
    }

    /// (x - min) / (max - min), unclamped. Degenerate channels
    /// (max == min) map to 0.
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, DatasetError> {
        if row.len() != self.mins.len() {
            return Err(DatasetError::ChannelCount {
                found: row.len(),
                expected: self.mins.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.maxs[k] - self.mins[k];
                if span == 0.0 {
                    0.0
                } else {
                    (v - self.mins[k]) / span
                }
            })
            .collect())
    }

    /// Inverse of [`Self::transform`]; exact to 1e-12 of the channel
    /// span on non-degenerate channels, while degenerate channels return
    /// their constant.
    pub fn inverse(&self, row: &[f64]) -> Result<Vec<f64>, DatasetError> {
        if row.len() != self.mins.len() {
            return Err(DatasetError::ChannelCount {
                found: row.len(),
                expected: self.mins.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(k, &y)| {
                let span = self.maxs[k] - self.mins[k];
                if span == 0.0 {
                    self.mins[k]
                } else {
                    y * span + self.mins[k]
                }
            })
            .collect())
    }
}

/// Sliding-window geometry; targets align with each window's final
/// timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            length: 10,
            stride: 1,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.length < 1 || self.stride < 1 {
            return Err(DatasetError::BadWindowSpec);
        }
        Ok(())
    }
}

/// Number of windows produced from `n` samples: max(0, floor((n-L)/s)+1).
pub fn window_count(n: usize, length: usize, stride: usize) -> usize {
    if n < length {
        0
    } else {
        (n - length) / stride + 1
    }
}

/// Aligned (windows, targets) lists, flattened window first.
pub type WindowPairs = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Cuts aligned (window, target) pairs out of per-sample rows. Window
/// `i` covers samples [i*s, i*s + L) flattened row-major (time, channel);
/// its target is the target row at the window's final sample. A series
/// shorter than one window yields no pairs; the caller records the skip.
pub fn make_windows(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    spec: &WindowSpec,
) -> Result<WindowPairs, DatasetError> {
    spec.validate()?;
    debug_assert_eq!(inputs.len(), targets.len());
    let count = window_count(inputs.len(), spec.length, spec.stride);
    let mut windows = Vec::with_capacity(count);
    let mut out_targets = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * spec.stride;
        let end = start + spec.length;
        let mut flat = Vec::with_capacity(spec.length * inputs[start].len());
        for row in &inputs[start..end] {
            flat.extend_from_slice(row);
        }
        windows.push(flat);
        out_targets.push(targets[end - 1].clone());
    }
    Ok((windows, out_targets))
}

/// Split assignment of one trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Trip-level split protocol: seeded shuffle, then floor-sized train and
/// val partitions with the remainder going to test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.70,
            val_frac: 0.15,
            test_frac: 0.15,
            seed: 0,
        }
    }
}

/// Indices into the caller's trip slice, one split per trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions whole trips. Windows never cross splits because splitting
/// precedes windowing.
pub fn split_by_trip(trips: &[Trip], spec: &SplitSpec) -> Result<SplitIndices, DatasetError> {
    let sum = spec.train_frac + spec.val_frac + spec.test_frac;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadFractions { sum });
    }
    let n = trips.len();
    if n < 3 {
        return Err(DatasetError::TooFewTrips {
            n,
            detail: "at least 3 trips are required".to_string(),
        });
    }
    let n_train = (n as f64 * spec.train_frac).floor() as usize;
    let n_val = (n as f64 * spec.val_frac).floor() as usize;
    let n_test = n - n_train - n_val;
    for (name, frac, size) in [
        ("train", spec.train_frac, n_train),
        ("val", spec.val_frac, n_val),
        ("test", spec.test_frac, n_test),
    ] {
        if frac > 0.0 && size == 0 {
            return Err(DatasetError::TooFewTrips {
                n,
                detail: format!("{name} split would be empty at fraction {frac}"),
            });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(spec.seed);
    rng.shuffle(&mut order);
    Ok(SplitIndices {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// Builds split indices from an explicit `(trip_id, split)` manifest.
/// Every trip must appear exactly once.
pub fn split_from_manifest(
    trips: &[Trip],
    manifest: &[(String, Split)],
) -> Result<SplitIndices, DatasetError> {
    let mut by_id: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (i, t) in trips.iter().enumerate() {
        by_id.insert(t.trip_id(), i);
    }
    let mut seen = vec![false; trips.len()];
    let mut out = SplitIndices {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for (id, split) in manifest {
        let &i = by_id
            .get(id.as_str())
            .ok_or_else(|| DatasetError::UnknownTrip {
                trip_id: id.clone(),
            })?;
        seen[i] = true;
        match split {
            Split::Train => out.train.push(i),
            Split::Val => out.val.push(i),
            Split::Test => out.test.push(i),
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(DatasetError::MissingFromManifest {
            trip_id: trips[i].trip_id().to_string(),
        });
    }
    Ok(out)
}
