//! The three-stage framework: per-domain training, proxy validation, and
//! test-time counterfactual composition.
//!
//! Stage 1 trains, within each domain, an emissions model g mapping
//! [velocity, torque, throttle] windows to the instantaneous rate, and a
//! feature model f mapping shared context windows to [torque, throttle].
//! Stage 2 checks that feeding f's predictions into g barely moves the
//! error. Stage 3 composes f and g from one domain over another domain's
//! observed trip to produce the embedded counterfactual rate series.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};

use thiserror::Error;

use crate::dataset::{
    channel_rows, split_by_trip, window_count, Channel, DatasetError, MinMaxScaler, Split,
    SplitIndices, SplitSpec, WindowSpec,
};
use crate::nn::{train, EpochLoss, ModelConfig, NnError, SequenceNet, TrainConfig};
use crate::report::{aggregate, AggregateStats, ReportError};
use crate::schema::{Domain, Trip};

/// What a sequence model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRole {
    /// g: [velocity, torque, throttle] -> CO2 rate
    Emissions,
    /// f: shared context -> [torque, throttle]
    Feature,
}

impl ModelRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelRole::Emissions => "emissions",
            ModelRole::Feature => "feature",
        }
    }

    pub fn parse(s: &str) -> Option<ModelRole> {
        match s {
            "emissions" => Some(ModelRole::Emissions),
            "feature" => Some(ModelRole::Feature),
            _ => None,
        }
    }

    pub fn input_channels(&self) -> &'static [Channel] {
        match self {
            ModelRole::Emissions => &[Channel::Velocity, Channel::MotorTorque, Channel::Throttle],
            ModelRole::Feature => &[
                Channel::Velocity,
                Channel::AmbientTemp,
                Channel::CabinTemp,
                Channel::LongitudinalAccel,
            ],
        }
    }

    pub fn target_channels(&self) -> &'static [Channel] {
        match self {
            ModelRole::Emissions => &[Channel::Co2Rate],
            ModelRole::Feature => &[Channel::MotorTorque, Channel::Throttle],
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("domain mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("role mismatch: expected {expected}, found {found}")]
    RoleMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("trip `{trip_id}` has {len} samples, but the composition needs {needed}")]
    TripTooShort {
        trip_id: String,
        len: usize,
        needed: usize,
    },
    #[error("series length mismatch: {what}")]
    LengthMismatch { what: String },
    #[error("split `{split}` produced no usable windows")]
    EmptySplit { split: &'static str },
    #[error("no trips given")]
    NoTrips,
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained (f or g) regressor with its scalers and window geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub role: ModelRole,
    pub domain: Domain,
    pub vehicle: String,
    pub net: SequenceNet,
    pub input_scaler: MinMaxScaler,
    pub target_scaler: MinMaxScaler,
    pub window: WindowSpec,
    pub seed: u64,
}

/// Dense per-timestep predictions in natural units. `values[j]` belongs
/// to trip sample index `start + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSeries {
    pub start: usize,
    pub values: Vec<Vec<f64>>,
}

impl PredictionSeries {
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }
}

impl SequenceModel {
    /// Sliding stride-1 predictions over a whole trip, inverse-transformed
    /// to natural units. The first prediction sits at sample
    /// `window.length - 1`.
    pub fn predict_trip(&self, trip: &Trip) -> Result<PredictionSeries, PipelineError> {
        let length = self.window.length;
        if trip.len() < length {
            return Err(PipelineError::TripTooShort {
                trip_id: trip.trip_id().to_string(),
                len: trip.len(),
                needed: length,
            });
        }
        let rows = channel_rows(trip, self.role.input_channels());
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| self.input_scaler.transform(r))
            .collect::<Result<_, _>>()?;
        self.predict_scaled_rows(&scaled)
    }

    /// Same as [`Self::predict_trip`] but over caller-assembled natural
    /// rows in this model's input-channel order.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<PredictionSeries, PipelineError> {
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| self.input_scaler.transform(r))
            .collect::<Result<_, _>>()?;
        self.predict_scaled_rows(&scaled)
    }

    fn predict_scaled_rows(&self, scaled: &[Vec<f64>]) -> Result<PredictionSeries, PipelineError> {
        let length = self.window.length;
        let dim = self.net.config.input_dim;
        let count = window_count(scaled.len(), length, 1);
        if count == 0 {
            return Err(PipelineError::TripTooShort {
                trip_id: "<rows>".to_string(),
                len: scaled.len(),
                needed: length,
            });
        }
        let mut values = Vec::with_capacity(count);
        let mut flat = vec![0.0; length * dim];
        for i in 0..count {
            for (t, row) in scaled[i..i + length].iter().enumerate() {
                flat[t * dim..(t + 1) * dim].copy_from_slice(row);
            }
            let pred = self.net.forward(&flat)?;
            values.push(self.target_scaler.inverse(&pred)?);
        }
        Ok(PredictionSeries {
            start: length - 1,
            values,
        })
    }
}

/// Architecture and optimization settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub hidden_units: usize,
    pub lstm_layers: usize,
    pub train: TrainConfig,
    pub window: WindowSpec,
    pub split: SplitSpec,
    pub seed: u64,
}

impl FitSpec {
    /// Per-domain defaults: 32 hidden units, one LSTM layer and 20 epochs
    /// for the EV side; 64 units, two layers and 50 epochs for the ICEV
    /// side.
    pub fn for_domain(domain: Domain, seed: u64) -> FitSpec {
        let (hidden, layers, epochs) = match domain {
            Domain::Ev => (32, 1, 20),
            Domain::Icev => (64, 2, 50),
        };
        FitSpec {
            hidden_units: hidden,
            lstm_layers: layers,
            train: TrainConfig {
                epochs,
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
}

/// Everything a training run produces besides the model itself.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SequenceModel,
    pub history: Vec<EpochLoss>,
    pub manifest: Vec<(String, Split)>,
    /// Validation MAE per output, inverse-transformed to natural units.
    pub val_mae: Vec<f64>,
    /// Validation MSE per output in natural units.
    pub val_mse: Vec<f64>,
    /// Trips shorter than one window, skipped with no windows emitted.
    pub skipped_trips: Vec<String>,
}

pub fn train_emissions_model(
    domain: Domain,
    trips: &[Trip],
    spec: &FitSpec,
) -> Result<TrainOutcome, PipelineError> {
    train_model(ModelRole::Emissions, domain, trips, spec)
}

pub fn train_feature_model(
    domain: Domain,
    trips: &[Trip],
    spec: &FitSpec,
) -> Result<TrainOutcome, PipelineError> {
    train_model(ModelRole::Feature, domain, trips, spec)
}

pub fn train_model(
    role: ModelRole,
    domain: Domain,
    trips: &[Trip],
    spec: &FitSpec,
) -> Result<TrainOutcome, PipelineError> {
    let split = split_by_trip(trips, &spec.split)?;
    train_model_with_split(role, domain, trips, spec, &split)
}

/// Training with an explicit split, e.g. from a stored manifest.
pub fn train_model_with_split(
    role: ModelRole,
    domain: Domain,
    trips: &[Trip],
    spec: &FitSpec,
    split: &SplitIndices,
) -> Result<TrainOutcome, PipelineError> {
    if trips.is_empty() {
        return Err(PipelineError::NoTrips);
    }
    for trip in trips {
        if trip.domain() != domain {
            return Err(PipelineError::DomainMismatch {
                expected: domain,
                found: trip.domain(),
            });
        }
    }
    spec.window.validate()?;

    // deterministic concatenation order: trip id, then window index
    let by_sorted_id = |indices: &[usize]| -> Vec<&Trip> {
        let mut list: Vec<&Trip> = indices.iter().map(|&i| &trips[i]).collect();
        list.sort_by(|a, b| a.trip_id().cmp(b.trip_id()));
        list
    };
    let train_trips = by_sorted_id(&split.train);
    let val_trips = by_sorted_id(&split.val);
    if train_trips.is_empty() {
        return Err(PipelineError::EmptySplit { split: "train" });
    }

    let input_channels = role.input_channels();
    let target_channels = role.target_channels();
    let input_scaler = MinMaxScaler::fit(&train_trips, input_channels)?;
    let target_scaler = MinMaxScaler::fit(&train_trips, target_channels)?;

    let mut skipped_trips = Vec::new();
    let mut build = |list: &[&Trip]| -> Result<crate::dataset::WindowPairs, PipelineError> {
        let mut windows = Vec::new();
        let mut targets = Vec::new();
        for trip in list {
            let inputs: Vec<Vec<f64>> = channel_rows(trip, input_channels)
                .iter()
                .map(|r| input_scaler.transform(r))
                .collect::<Result<_, _>>()?;
            let outs: Vec<Vec<f64>> = channel_rows(trip, target_channels)
                .iter()
                .map(|r| target_scaler.transform(r))
                .collect::<Result<_, _>>()?;
            let (w, t) = crate::dataset::make_windows(&inputs, &outs, &spec.window)?;
            if w.is_empty() {
                skipped_trips.push(trip.trip_id().to_string());
                continue;
            }
            windows.extend(w);
            targets.extend(t);
        }
        Ok((windows, targets))
    };

    let (train_w, train_t) = build(&train_trips)?;
    if train_w.is_empty() {
        return Err(PipelineError::EmptySplit { split: "train" });
    }
    let (val_w, val_t) = build(&val_trips)?;

    let model_cfg = ModelConfig {
        input_dim: input_channels.len(),
        hidden_units: spec.hidden_units,
        lstm_layers: spec.lstm_layers,
        head_units: spec.hidden_units,
        output_dim: target_channels.len(),
        window_len: spec.window.length,
        seed: spec.seed,
    };
    let val_ref = if val_w.is_empty() {
        None
    } else {
        Some((val_w.as_slice(), val_t.as_slice()))
    };
    let (net, history) = train(&model_cfg, &spec.train, &train_w, &train_t, val_ref)?;

    let model = SequenceModel {
        role,
        domain,
        vehicle: trips[0].vehicle().to_string(),
        net,
        input_scaler,
        target_scaler,
        window: spec.window,
        seed: spec.seed,
    };

    // validation error in natural units
    let out_dim = target_channels.len();
    let (val_mae, val_mse) = if val_w.is_empty() {
        (vec![], vec![])
    } else {
        let mut abs_sum = vec![0.0; out_dim];
        let mut sq_sum = vec![0.0; out_dim];
        for (w, t) in val_w.iter().zip(&val_t) {
            let pred = model.net.forward(w)?;
            let pred_nat = model.target_scaler.inverse(&pred)?;
            let t_nat = model.target_scaler.inverse(t)?;
            for k in 0..out_dim {
                let d = pred_nat[k] - t_nat[k];
                abs_sum[k] += d.abs();
                sq_sum[k] += d * d;
            }
        }
        let n = val_w.len() as f64;
        (
            abs_sum.iter().map(|s| s / n).collect(),
            sq_sum.iter().map(|s| s / n).collect(),
        )
    };

    let mut manifest = Vec::with_capacity(trips.len());
    for (i, trip) in trips.iter().enumerate() {
        let s = if split.train.contains(&i) {
            Split::Train
        } else if split.val.contains(&i) {
            Split::Val
        } else {
            Split::Test
        };
        manifest.push((trip.trip_id().to_string(), s));
    }

    Ok(TrainOutcome {
        model,
        history,
        manifest,
        val_mae,
        val_mse,
        skipped_trips,
    })
}

/// Mean absolute error in natural units.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, PipelineError> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(PipelineError::LengthMismatch {
            what: format!("{} predictions vs {} truths", pred.len(), truth.len()),
        });
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Left-Riemann time integral: sum of rate_i * (t_{i+1} - t_i).
pub fn left_riemann_total(time_s: &[f64], rate: &[f64]) -> f64 {
    debug_assert_eq!(time_s.len(), rate.len());
    let mut total = 0.0;
    for i in 0..time_s.len().saturating_sub(1) {
        total += rate[i] * (time_s[i + 1] - time_s[i]);
    }
    total
}

/// Supplies per-timestep actuation for the proxy cascade: either a
/// feature model or a replay of the measured channels.
pub trait ActuationPredictor {
    fn domain(&self) -> Option<Domain> {
        None
    }
    /// Predictions must start at sample `window_len - 1` so the cascade
    /// grid matches the emissions model's own lead-in.
    fn predict_actuation(&self, trip: &Trip) -> Result<PredictionSeries, PipelineError>;
}

impl ActuationPredictor for SequenceModel {
    fn domain(&self) -> Option<Domain> {
        Some(self.domain)
    }

    fn predict_actuation(&self, trip: &Trip) -> Result<PredictionSeries, PipelineError> {
        if self.role != ModelRole::Feature {
            return Err(PipelineError::RoleMismatch {
                expected: "feature",
                found: self.role.as_str(),
            });
        }
        self.predict_trip(trip)
    }
}

/// Replays measured torque/throttle on the model grid; substituting it
/// for a feature model must reproduce the direct error exactly.
pub struct MeasuredActuation {
    pub window_len: usize,
}

impl ActuationPredictor for MeasuredActuation {
    fn predict_actuation(&self, trip: &Trip) -> Result<PredictionSeries, PipelineError> {
        let start = self.window_len - 1;
        if trip.len() < self.window_len {
            return Err(PipelineError::TripTooShort {
                trip_id: trip.trip_id().to_string(),
                len: trip.len(),
                needed: self.window_len,
            });
        }
        Ok(PredictionSeries {
            start,
            values: trip.samples()[start..]
                .iter()
                .map(|s| vec![s.motor_torque_nm, s.throttle_pct])
                .collect(),
        })
    }
}

/// One held-out trip's proxy-validation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyRow {
    pub trip_id: String,
    pub direct_mae: f64,
    pub proxy_mae: f64,
    pub torque_mae: f64,
    pub throttle_mae: f64,
}

/// Per-trip rows plus aggregates over the held-out trips.
#[derive(Debug, Clone)]
pub struct ProxyReport {
    pub rows: Vec<ProxyRow>,
    pub skipped: Vec<String>,
    pub direct: AggregateStats,
    pub proxy: AggregateStats,
    /// proxy minus direct, per trip
    pub delta: AggregateStats,
    pub torque: AggregateStats,
    pub throttle: AggregateStats,
    /// number of trips where the proxy MAE is no worse than the direct
    pub proxy_not_worse: usize,
}

/// Builds the emissions-model input series (velocity plus actuation) and
/// predicts through `g`. Returns predictions starting at trip index
/// `actuation.start + window_len - 1`.
fn cascade_predict(
    g: &SequenceModel,
    trip: &Trip,
    actuation: &PredictionSeries,
) -> Result<PredictionSeries, PipelineError> {
    let samples = trip.samples();
    let rows: Vec<Vec<f64>> = samples[actuation.start..]
        .iter()
        .zip(&actuation.values)
        .map(|(s, u)| vec![s.velocity_kmh, u[0], u[1]])
        .collect();
    let mut series = g.predict_rows(&rows)?;
    series.start += actuation.start;
    Ok(series)
}

/// Within-domain substitution check: for each held-out trip, the direct
/// error (g on measured actuation) and the proxy error (g on f's
/// predictions) are computed over the common cascade-valid grid.
pub fn proxy_validate(
    f: &dyn ActuationPredictor,
    g: &SequenceModel,
    trips: &[Trip],
) -> Result<ProxyReport, PipelineError> {
    if g.role != ModelRole::Emissions {
        return Err(PipelineError::RoleMismatch {
            expected: "emissions",
            found: g.role.as_str(),
        });
    }
    if let Some(fd) = f.domain() {
        if fd != g.domain {
            return Err(PipelineError::DomainMismatch {
                expected: g.domain,
                found: fd,
            });
        }
    }
    let length = g.window.length;
    let needed = 2 * length - 1;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for trip in trips {
        if trip.domain() != g.domain {
            return Err(PipelineError::DomainMismatch {
                expected: g.domain,
                found: trip.domain(),
            });
        }
        if trip.len() < needed {
            skipped.push(trip.trip_id().to_string());
            continue;
        }
        let actuation = f.predict_actuation(trip)?;
        let proxy = cascade_predict(g, trip, &actuation)?;
        let direct_full = g.predict_trip(trip)?;
        let base = proxy.start;
        let samples = trip.samples();
        let truth: Vec<f64> = samples[base..].iter().map(|s| s.co2_rate_gs).collect();
        let direct: Vec<f64> = direct_full.values[base - direct_full.start..]
            .iter()
            .map(|v| v[0])
            .collect();
        let proxy_vals = proxy.component(0);

        let measured_torque: Vec<f64> = samples[actuation.start..]
            .iter()
            .map(|s| s.motor_torque_nm)
            .collect();
        let measured_throttle: Vec<f64> = samples[actuation.start..]
            .iter()
            .map(|s| s.throttle_pct)
            .collect();

        rows.push(ProxyRow {
            trip_id: trip.trip_id().to_string(),
            direct_mae: mae(&direct, &truth)?,
            proxy_mae: mae(&proxy_vals, &truth)?,
            torque_mae: mae(&actuation.component(0), &measured_torque)?,
            throttle_mae: mae(&actuation.component(1), &measured_throttle)?,
        });
    }
    if rows.is_empty() {
        return Err(PipelineError::EmptySplit { split: "test" });
    }
    summarize_proxy_rows(rows, skipped)
}

/// Aggregates prepared per-trip rows; also the entry point for replaying
/// stored per-trip metrics through the same reporting path.
pub fn summarize_proxy_rows(
    rows: Vec<ProxyRow>,
    skipped: Vec<String>,
) -> Result<ProxyReport, PipelineError> {
    let direct_vals: Vec<f64> = rows.iter().map(|r| r.direct_mae).collect();
    let proxy_vals: Vec<f64> = rows.iter().map(|r| r.proxy_mae).collect();
    let delta_vals: Vec<f64> = rows.iter().map(|r| r.proxy_mae - r.direct_mae).collect();
    let torque_vals: Vec<f64> = rows.iter().map(|r| r.torque_mae).collect();
    let throttle_vals: Vec<f64> = rows.iter().map(|r| r.throttle_mae).collect();
    let proxy_not_worse = delta_vals.iter().filter(|d| **d <= 0.0).count();
    Ok(ProxyReport {
        direct: aggregate(&direct_vals)?,
        proxy: aggregate(&proxy_vals)?,
        delta: aggregate(&delta_vals)?,
        torque: aggregate(&torque_vals)?,
        throttle: aggregate(&throttle_vals)?,
        proxy_not_worse,
        rows,
        skipped,
    })
}

/// The embedded counterfactual: paired rate series on a shared time base
/// with pointwise gaps and time-integrated totals.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualResult {
    pub trip_id: String,
    /// Index of the first composed sample within the source trip.
    pub start: usize,
    pub time_s: Vec<f64>,
    pub velocity_kmh: Vec<f64>,
    pub pred_torque_nm: Vec<f64>,
    pub pred_throttle_pct: Vec<f64>,
    /// Embedded counterfactual rate series.
    pub counterfactual_rate_gs: Vec<f64>,
    /// Observed rate series of the source trip.
    pub observed_rate_gs: Vec<f64>,
    pub gap_gs: Vec<f64>,
    pub counterfactual_total_g: f64,
    pub observed_total_g: f64,
    pub gap_total_g: f64,
}

/// Composes `f` and `g` (same domain, canonically the EV pair) over an
/// observed trip from the other domain: u = f(context), e = g(v, u).
/// Series are reported on the grid where both cascaded predictions
/// exist, i.e. from sample 2*(window_len - 1) on.
pub fn counterfactual(
    trip: &Trip,
    f: &SequenceModel,
    g: &SequenceModel,
) -> Result<CounterfactualResult, PipelineError> {
    if f.role != ModelRole::Feature {
        return Err(PipelineError::RoleMismatch {
            expected: "feature",
            found: f.role.as_str(),
        });
    }
    if g.role != ModelRole::Emissions {
        return Err(PipelineError::RoleMismatch {
            expected: "emissions",
            found: g.role.as_str(),
        });
    }
    if f.domain != g.domain {
        return Err(PipelineError::DomainMismatch {
            expected: g.domain,
            found: f.domain,
        });
    }
    let length = g.window.length;
    let needed = 2 * length - 1;
    if trip.len() < needed {
        return Err(PipelineError::TripTooShort {
            trip_id: trip.trip_id().to_string(),
            len: trip.len(),
            needed,
        });
    }

    let actuation = f.predict_trip(trip)?;
    let composed = cascade_predict(g, trip, &actuation)?;
    let base = composed.start;
    let samples = trip.samples();

    let time_s: Vec<f64> = samples[base..].iter().map(|s| s.time_s).collect();
    let velocity_kmh: Vec<f64> = samples[base..].iter().map(|s| s.velocity_kmh).collect();
    let observed: Vec<f64> = samples[base..].iter().map(|s| s.co2_rate_gs).collect();
    let counterfactual_rate = composed.component(0);
    let gap: Vec<f64> = counterfactual_rate
        .iter()
        .zip(&observed)
        .map(|(a, b)| a - b)
        .collect();

    // actuation aligned with the composed grid
    let offset = base - actuation.start;
    let pred_torque: Vec<f64> = actuation.values[offset..].iter().map(|v| v[0]).collect();
    let pred_throttle: Vec<f64> = actuation.values[offset..].iter().map(|v| v[1]).collect();

    let counterfactual_total = left_riemann_total(&time_s, &counterfactual_rate);
    let observed_total = left_riemann_total(&time_s, &observed);
    let gap_total = left_riemann_total(&time_s, &gap);

    Ok(CounterfactualResult {
        trip_id: trip.trip_id().to_string(),
        start: base,
        time_s,
        velocity_kmh,
        pred_torque_nm: pred_torque,
        pred_throttle_pct: pred_throttle,
        counterfactual_rate_gs: counterfactual_rate,
        observed_rate_gs: observed,
        gap_gs: gap,
        counterfactual_total_g: counterfactual_total,
        observed_total_g: observed_total,
        gap_total_g: gap_total,
    })
}
