//! Unified data model shared by every other module.
//!
//! A [`Trip`] is an ordered sequence of [`HarmonizedSample`]s with a domain
//! tag; it is the unit of train/test splitting. The harmonized text format
//! carries one header row with a fixed column set and one row per sample.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Powertrain domain of a trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Ev,
    Icev,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Ev => "ev",
            Domain::Icev => "icev",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        match s.to_ascii_lowercase().as_str() {
            "ev" => Some(Domain::Ev),
            "icev" => Some(Domain::Icev),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timestep of the unified schema.
///
/// Units are fixed: seconds, km/h, percent, Nm, degrees Celsius, m/s2 and
/// g/s. The heat-exchanger temperature is optional; only some sources
/// record it and no model consumes it.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizedSample {
    pub time_s: f64,
    pub velocity_kmh: f64,
    pub throttle_pct: f64,
    pub motor_torque_nm: f64,
    pub ambient_temp_c: f64,
    pub cabin_temp_c: f64,
    pub heat_exchanger_temp_c: Option<f64>,
    pub longitudinal_accel_ms2: f64,
    pub co2_rate_gs: f64,
}

impl HarmonizedSample {
    /// Checks per-sample invariants: finite required channels,
    /// non-negative velocity and emission rate.
    fn validate(&self, trip_id: &str, index: usize) -> Result<(), SchemaError> {
        let channels = [
            ("Time [s]", self.time_s),
            ("Velocity [km/h]", self.velocity_kmh),
            ("Throttle [%]", self.throttle_pct),
            ("Motor Torque [Nm]", self.motor_torque_nm),
            ("Ambient Temperature [C]", self.ambient_temp_c),
            ("Cabin Temperature [C]", self.cabin_temp_c),
            (
                "Longitudinal Acceleration [m/s2]",
                self.longitudinal_accel_ms2,
            ),
            ("CO2 [g/s]", self.co2_rate_gs),
        ];
        for (name, value) in channels {
            if !value.is_finite() {
                return Err(SchemaError::NonFinite {
                    trip_id: trip_id.to_string(),
                    channel: name.to_string(),
                    index,
                });
            }
        }
        if let Some(h) = self.heat_exchanger_temp_c {
            if !h.is_finite() {
                return Err(SchemaError::NonFinite {
                    trip_id: trip_id.to_string(),
                    channel: "Heat Exchanger Temperature [C]".to_string(),
                    index,
                });
            }
        }
        if self.velocity_kmh < 0.0 {
            return Err(SchemaError::NegativeChannel {
                trip_id: trip_id.to_string(),
                channel: "Velocity [km/h]".to_string(),
                index,
            });
        }
        if self.co2_rate_gs < 0.0 {
            return Err(SchemaError::NegativeChannel {
                trip_id: trip_id.to_string(),
                channel: "CO2 [g/s]".to_string(),
                index,
            });
        }
        Ok(())
    }
}

/// Ordered sample sequence with identity and domain tag.
///
/// Construction validates the schema invariants (non-empty, strictly
/// increasing timestamps, finite channels); a `Trip` is immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    trip_id: String,
    domain: Domain,
    vehicle: String,
    samples: Vec<HarmonizedSample>,
}

impl Trip {
    pub fn try_new(
        trip_id: impl Into<String>,
        domain: Domain,
        vehicle: impl Into<String>,
        samples: Vec<HarmonizedSample>,
    ) -> Result<Trip, SchemaError> {
        let trip_id = trip_id.into();
        if samples.is_empty() {
            return Err(SchemaError::EmptyTrip { trip_id });
        }
        for (index, sample) in samples.iter().enumerate() {
            sample.validate(&trip_id, index)?;
            if index > 0 && sample.time_s <= samples[index - 1].time_s {
                return Err(SchemaError::NonMonotonicTime { trip_id, index });
            }
        }
        Ok(Trip {
            trip_id,
            domain,
            vehicle: vehicle.into(),
            samples,
        })
    }

    pub fn trip_id(&self) -> &str {
        &self.trip_id
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn vehicle(&self) -> &str {
        &self.vehicle
    }

    pub fn samples(&self) -> &[HarmonizedSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Shared context channels: the conditioning set common to both domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextVector {
    pub velocity_kmh: f64,
    pub ambient_temp_c: f64,
    pub cabin_temp_c: f64,
    pub longitudinal_accel_ms2: f64,
}

/// Domain-specific actuation channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationVector {
    pub motor_torque_nm: f64,
    pub throttle_pct: f64,
}

/// Projects the shared context channels out of a trip, one vector per
/// sample in order. Velocity appears in both this projection and the
/// emissions-model input triplet; no other channel overlaps.
pub fn context_of(trip: &Trip) -> Vec<ContextVector> {
    trip.samples()
        .iter()
        .map(|s| ContextVector {
            velocity_kmh: s.velocity_kmh,
            ambient_temp_c: s.ambient_temp_c,
            cabin_temp_c: s.cabin_temp_c,
            longitudinal_accel_ms2: s.longitudinal_accel_ms2,
        })
        .collect()
}

/// Projects the actuation channels out of a trip, order preserved.
pub fn actuation_of(trip: &Trip) -> Vec<ActuationVector> {
    trip.samples()
        .iter()
        .map(|s| ActuationVector {
            motor_torque_nm: s.motor_torque_nm,
            throttle_pct: s.throttle_pct,
        })
        .collect()
}

/// Column set of the harmonized trip file, in order.
pub const HARMONIZED_COLUMNS: [&str; 10] = [
    "Time [s]",
    "Velocity [km/h]",
    "Throttle [%]",
    "Motor Torque [Nm]",
    "Ambient Temperature [C]",
    "Cabin Temperature [C]",
    "Heat Exchanger Temperature [C]",
    "Longitudinal Acceleration [m/s2]",
    "CO2 [g/s]",
    "Trip",
];

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("trip `{trip_id}` has no samples")]
    EmptyTrip { trip_id: String },
    #[error("missing required channel `{channel}`")]
    MissingChannel { channel: String },
    #[error("non-finite value in channel `{channel}` of trip `{trip_id}` at sample {index}")]
    NonFinite {
        trip_id: String,
        channel: String,
        index: usize,
    },
    #[error("negative value in channel `{channel}` of trip `{trip_id}` at sample {index}")]
    NegativeChannel {
        trip_id: String,
        channel: String,
        index: usize,
    },
    #[error("time not strictly increasing in trip `{trip_id}` at sample {index}")]
    NonMonotonicTime { trip_id: String, index: usize },
    #[error("trip id `{trip_id}` contains the column delimiter")]
    DelimiterInTripId { trip_id: String },
    #[error("harmonized file header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("unparseable value `{value}` in column `{column}` at line {line}")]
    BadValue {
        value: String,
        column: String,
        line: usize,
    },
    #[error("row at line {line} has {found} fields, expected {expected}")]
    FieldCount {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that round-trips: reparsing recovers the
    // exact bit pattern, which the file-format round-trip contract needs.
    format!("{v}")
}

/// Writes trips to the harmonized text format. Optional `provenance`
/// lines are emitted first as `# `-prefixed comments, then the single
/// header row, then one row per sample.
pub fn write_trips_to<W: Write>(
    mut w: W,
    trips: &[Trip],
    provenance: &[String],
) -> Result<(), SchemaError> {
    for line in provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", HARMONIZED_COLUMNS.join(","))?;
    for trip in trips {
        if trip.trip_id().contains(',') {
            return Err(SchemaError::DelimiterInTripId {
                trip_id: trip.trip_id().to_string(),
            });
        }
        for s in trip.samples() {
            let heat = s.heat_exchanger_temp_c.map(fmt_f64).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(s.time_s),
                fmt_f64(s.velocity_kmh),
                fmt_f64(s.throttle_pct),
                fmt_f64(s.motor_torque_nm),
                fmt_f64(s.ambient_temp_c),
                fmt_f64(s.cabin_temp_c),
                heat,
                fmt_f64(s.longitudinal_accel_ms2),
                fmt_f64(s.co2_rate_gs),
                trip.trip_id(),
            )?;
        }
    }
    Ok(())
}

pub fn write_trips(
    path: impl AsRef<Path>,
    trips: &[Trip],
    provenance: &[String],
) -> Result<(), SchemaError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_trips_to(&mut w, trips, provenance)?;
    w.flush()?;
    Ok(())
}

fn parse_cell(cell: &str, column: &str, line: usize) -> Result<f64, SchemaError> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| SchemaError::BadValue {
            value: cell.to_string(),
            column: column.to_string(),
            line,
        })
}

/// Reads harmonized trips back. Rows are grouped by the `Trip` column in
/// order of first appearance; leading `# ` comment lines are skipped.
pub fn read_trips_from<R: Read>(
    r: R,
    domain: Domain,
    vehicle: &str,
) -> Result<Vec<Trip>, SchemaError> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines();
    let expected = HARMONIZED_COLUMNS.join(",");

    let mut header: Option<String> = None;
    let mut line_no = 0usize;
    for line in lines.by_ref() {
        let line = line?;
        line_no += 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        header = Some(line);
        break;
    }
    let header = header.ok_or_else(|| SchemaError::HeaderMismatch {
        expected: expected.clone(),
        found: String::new(),
    })?;
    let normalized: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if normalized != HARMONIZED_COLUMNS {
        return Err(SchemaError::HeaderMismatch {
            expected,
            found: header,
        });
    }

    // (trip_id, samples) in first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<HarmonizedSample>> =
        std::collections::HashMap::new();

    for line in lines {
        let line = line?;
        line_no += 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != HARMONIZED_COLUMNS.len() {
            return Err(SchemaError::FieldCount {
                line: line_no,
                found: cells.len(),
                expected: HARMONIZED_COLUMNS.len(),
            });
        }
        let heat = {
            let cell = cells[6].trim();
            if cell.is_empty() {
                None
            } else {
                Some(parse_cell(cell, HARMONIZED_COLUMNS[6], line_no)?)
            }
        };
        let sample = HarmonizedSample {
            time_s: parse_cell(cells[0], HARMONIZED_COLUMNS[0], line_no)?,
            velocity_kmh: parse_cell(cells[1], HARMONIZED_COLUMNS[1], line_no)?,
            throttle_pct: parse_cell(cells[2], HARMONIZED_COLUMNS[2], line_no)?,
            motor_torque_nm: parse_cell(cells[3], HARMONIZED_COLUMNS[3], line_no)?,
            ambient_temp_c: parse_cell(cells[4], HARMONIZED_COLUMNS[4], line_no)?,
            cabin_temp_c: parse_cell(cells[5], HARMONIZED_COLUMNS[5], line_no)?,
            heat_exchanger_temp_c: heat,
            longitudinal_accel_ms2: parse_cell(cells[7], HARMONIZED_COLUMNS[7], line_no)?,
            co2_rate_gs: parse_cell(cells[8], HARMONIZED_COLUMNS[8], line_no)?,
        };
        let id = cells[9].trim().to_string();
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(sample);
    }

    order
        .into_iter()
        .map(|id| {
            let samples = groups.remove(&id).expect("group exists");
            Trip::try_new(id, domain, vehicle, samples)
        })
        .collect()
}

pub fn read_trips(
    path: impl AsRef<Path>,
    domain: Domain,
    vehicle: &str,
) -> Result<Vec<Trip>, SchemaError> {
    let file = std::fs::File::open(path)?;
    read_trips_from(file, domain, vehicle)
}
