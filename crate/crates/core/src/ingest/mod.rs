//! Vehicle-specific adapters: parse raw source tables, apply integrity
//! filters and unit conversions, derive features, and emit harmonized
//! trips with emission targets attached.

mod frame;
mod profiles;

pub use frame::{
    integrity_filter, missing_columns, read_raw_table, IntegrityOptions, RawFrame, RawRow, RawTable,
};
pub use profiles::{SourceLayout, VehicleProfile};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::emissions::{EmissionFactors, EmissionsError};
use crate::report::quantile_type7;
use crate::schema::{HarmonizedSample, SchemaError, Trip};

/// Exact mile-to-kilometre factor.
pub const MPH_TO_KMH: f64 = 1.609344;

/// Wheel revolutions per minute per km/h of vehicle speed for the QX50's
/// 19-inch wheel/tire combination.
pub const QX50_RPM_PER_KMH: f64 = 7.150;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unknown vehicle profile `{name}`")]
    UnknownProfile { name: String },
    #[error("no input files found under {path}")]
    NoInputFiles { path: String },
    #[error("source file `{file}` has no header row")]
    EmptyTable { file: String },
    #[error("every row was dropped by the filters")]
    EmptyAfterFilter,
    #[error("time base not strictly increasing at index {index} (internal)")]
    BadTimeBase { index: usize },
    #[error("series length mismatch: {what}")]
    LengthMismatch { what: String },
    #[error("invalid profile: {0}")]
    BadProfile(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Emissions(#[from] EmissionsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row accounting across all filter stages.
///
/// Invariant: `rows_in == rows_out + dropped_total()`; rows of rejected
/// files are never counted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    pub rows_in: usize,
    pub rows_out: usize,
    pub dropped: BTreeMap<String, usize>,
    pub trips_dropped: Vec<String>,
    pub files_rejected: Vec<(String, String)>,
}

impl FilterReport {
    pub fn new(rows_in: usize) -> FilterReport {
        FilterReport {
            rows_in,
            rows_out: rows_in,
            ..FilterReport::default()
        }
    }

    pub fn drop_row(&mut self, rule: &str) {
        *self.dropped.entry(rule.to_string()).or_insert(0) += 1;
        self.rows_out -= 1;
    }

    pub fn drop_rows(&mut self, rule: &str, count: usize) {
        if count > 0 {
            *self.dropped.entry(rule.to_string()).or_insert(0) += count;
            self.rows_out -= count;
        }
    }

    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }

    pub fn reconciles(&self) -> bool {
        self.rows_in == self.rows_out + self.dropped_total()
    }

    /// Folds a later stage into this report. The stage must have consumed
    /// exactly the rows this report emitted.
    pub fn absorb(&mut self, stage: FilterReport) {
        debug_assert_eq!(self.rows_out, stage.rows_in);
        self.rows_out = stage.rows_out;
        for (rule, count) in stage.dropped {
            *self.dropped.entry(rule).or_insert(0) += count;
        }
        self.trips_dropped.extend(stage.trips_dropped);
        self.files_rejected.extend(stage.files_rejected);
    }

    /// Structured text: one `rule = count` line per rule.
    pub fn write_to<W: Write>(&self, mut w: W, provenance: &[String]) -> std::io::Result<()> {
        for line in provenance {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "rows_in = {}", self.rows_in)?;
        writeln!(w, "rows_out = {}", self.rows_out)?;
        for (rule, count) in &self.dropped {
            writeln!(w, "dropped.{rule} = {count}")?;
        }
        for id in &self.trips_dropped {
            writeln!(w, "trip_dropped = {id}")?;
        }
        for (file, reason) in &self.files_rejected {
            writeln!(w, "file_rejected = {file}: {reason}")?;
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>, provenance: &[String]) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w, provenance)?;
        w.flush()
    }
}

/// mph to km/h, exactly v * 1.609344.
pub fn convert_speed_mph_to_kmh(v_mph: f64) -> f64 {
    v_mph * MPH_TO_KMH
}

/// Wheel RPM from vehicle speed for the QX50 wheel geometry.
pub fn derive_wheel_rpm(velocity_kmh: f64) -> f64 {
    QX50_RPM_PER_KMH * velocity_kmh
}

/// Effective rolling radius implied by the QX50 RPM factor, in metres.
pub fn qx50_wheel_radius_m() -> f64 {
    // v [km/h] * 1000/60 m/min spread over 2*pi*R per revolution
    1000.0 / (60.0 * 2.0 * std::f64::consts::PI * QX50_RPM_PER_KMH)
}

/// Motor torque from dyno tractive force and wheel radius.
/// Negative force rows must have been filtered upstream.
pub fn torque_from_tractive_force(force_n: f64, radius_m: f64) -> f64 {
    debug_assert!(radius_m > 0.0);
    force_n * radius_m
}

/// Finite-difference longitudinal acceleration on the true (possibly
/// irregular) time base, first sample set to 0 m/s2, no smoothing.
pub fn derive_acceleration(time_s: &[f64], velocity_kmh: &[f64]) -> Result<Vec<f64>, IngestError> {
    if time_s.len() != velocity_kmh.len() {
        return Err(IngestError::LengthMismatch {
            what: format!(
                "{} times vs {} velocities",
                time_s.len(),
                velocity_kmh.len()
            ),
        });
    }
    let mut accel = Vec::with_capacity(time_s.len());
    for i in 0..time_s.len() {
        if i == 0 {
            accel.push(0.0);
            continue;
        }
        let dt = time_s[i] - time_s[i - 1];
        if dt <= 0.0 {
            return Err(IngestError::BadTimeBase { index: i });
        }
        accel.push((velocity_kmh[i] - velocity_kmh[i - 1]) / 3.6 / dt);
    }
    Ok(accel)
}

/// Per-trip throttle proxy: min-max normalization of fuel flow scaled to
/// [0, 100]. A constant flow maps to all zeros so the proxy stays defined
/// on idle segments.
pub fn throttle_proxy_from_fuel_flow(flow: &[f64]) -> Vec<f64> {
    if flow.is_empty() {
        return Vec::new();
    }
    let min = flow.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = flow.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if span == 0.0 {
        return vec![0.0; flow.len()];
    }
    flow.iter().map(|f| (f - min) / span * 100.0).collect()
}

const RULE_BOUND_SPEED: &str = "bound_speed";
const RULE_BOUND_THROTTLE: &str = "bound_throttle";
const RULE_BOUND_TORQUE: &str = "bound_torque";
const RULE_BOUND_CO2: &str = "bound_co2";
const RULE_ACCEL_LIMIT: &str = "accel_limit";
const RULE_IQR_OUTLIER: &str = "iqr_outlier";

/// Strict-variant filter: physical bounds, an acceleration plausibility
/// cut, then global 3-IQR outlier removal per channel over the whole
/// dataset (no winsorization). The IQR rule iterates until no row moves,
/// so the filter as a whole is idempotent.
pub fn strict_filter(trips: Vec<Trip>) -> Result<(Vec<Trip>, FilterReport), IngestError> {
    let rows_in: usize = trips.iter().map(|t| t.len()).sum();
    let mut report = FilterReport::new(rows_in);

    // working representation: (trip meta, samples)
    let mut working: Vec<(String, crate::schema::Domain, String, Vec<HarmonizedSample>)> = trips
        .into_iter()
        .map(|t| {
            let id = t.trip_id().to_string();
            let domain = t.domain();
            let vehicle = t.vehicle().to_string();
            let samples = t.samples().to_vec();
            (id, domain, vehicle, samples)
        })
        .collect();

    // (a) physical bounds
    for (_, _, _, samples) in working.iter_mut() {
        samples.retain(|s| {
            let rule = if !(0.0..=250.0).contains(&s.velocity_kmh) {
                Some(RULE_BOUND_SPEED)
            } else if !(0.0..=100.0).contains(&s.throttle_pct) {
                Some(RULE_BOUND_THROTTLE)
            } else if !(0.0..=1200.0).contains(&s.motor_torque_nm) {
                Some(RULE_BOUND_TORQUE)
            } else if s.co2_rate_gs <= 0.0 {
                Some(RULE_BOUND_CO2)
            } else {
                None
            };
            match rule {
                Some(rule) => {
                    report.drop_row(rule);
                    false
                }
                None => true,
            }
        });
    }

    // (b) acceleration plausibility
    for (_, _, _, samples) in working.iter_mut() {
        samples.retain(|s| {
            if s.longitudinal_accel_ms2.abs() > 10.0 {
                report.drop_row(RULE_ACCEL_LIMIT);
                false
            } else {
                true
            }
        });
    }

    // (c) global IQR rule per channel, iterated to a fixed point
    let channel_values = |s: &HarmonizedSample| {
        [
            s.velocity_kmh,
            s.throttle_pct,
            s.motor_torque_nm,
            s.ambient_temp_c,
            s.cabin_temp_c,
            s.longitudinal_accel_ms2,
            s.co2_rate_gs,
        ]
    };
    loop {
        let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); 7];
        for (_, _, _, samples) in &working {
            for s in samples {
                for (k, v) in channel_values(s).into_iter().enumerate() {
                    pooled[k].push(v);
                }
            }
        }
        if pooled[0].is_empty() {
            return Err(IngestError::EmptyAfterFilter);
        }
        let fences: Vec<(f64, f64)> = pooled
            .iter()
            .map(|vals| {
                let q1 = quantile_type7(vals, 0.25);
                let q3 = quantile_type7(vals, 0.75);
                let iqr = q3 - q1;
                let lo = q1 - 3.0 * iqr;
                let hi = q3 + 3.0 * iqr;
                // tolerance keeps near-constant channels (zero IQR up to
                // float dust) from ejecting rows on last-bit differences
                let tol = 1e-9 * lo.abs().max(hi.abs()).max(1.0);
                (lo - tol, hi + tol)
            })
            .collect();
        let mut dropped_this_round = 0usize;
        for (_, _, _, samples) in working.iter_mut() {
            samples.retain(|s| {
                let outlier = channel_values(s)
                    .into_iter()
                    .zip(&fences)
                    .any(|(v, (lo, hi))| v < *lo || v > *hi);
                if outlier {
                    dropped_this_round += 1;
                    false
                } else {
                    true
                }
            });
        }
        report.drop_rows(RULE_IQR_OUTLIER, dropped_this_round);
        if dropped_this_round == 0 {
            break;
        }
    }

    let mut out = Vec::new();
    for (id, domain, vehicle, samples) in working {
        if samples.is_empty() {
            report.trips_dropped.push(id);
        } else {
            out.push(Trip::try_new(id, domain, vehicle, samples)?);
        }
    }
    if out.is_empty() {
        return Err(IngestError::EmptyAfterFilter);
    }
    Ok((out, report))
}

/// Parses every source file for `profile` under `path` (a directory or a
/// single file), applies the profile's filter and conversion pipeline,
/// and returns harmonized trips sorted by trip id plus the filter report.
/// Emission targets are computed with `factors`.
pub fn ingest(
    path: impl AsRef<Path>,
    profile: &VehicleProfile,
    factors: &EmissionFactors,
) -> Result<(Vec<Trip>, FilterReport), IngestError> {
    profiles::run(path.as_ref(), profile, factors)
}
