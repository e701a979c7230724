//! Built-in vehicle profiles and their harmonization adapters.
//!
//! Source column names per profile are documented in the repository
//! README; headers are validated against each profile's expected schema
//! and incompatible files are rejected by name rather than aborting the
//! whole ingest.

use std::path::{Path, PathBuf};

use super::frame::{
    integrity_filter, missing_columns, parse_cell, read_raw_table, IntegrityOptions, RawFrame,
    RawRow, RawTable,
};
use super::{
    convert_speed_mph_to_kmh, derive_acceleration, qx50_wheel_radius_m, strict_filter,
    throttle_proxy_from_fuel_flow, torque_from_tractive_force, FilterReport, IngestError,
};
use crate::emissions::{
    co2_volume_to_mass, efficiency_k, ev_rate, fuel_flow_from_maf, icev_rate, ElectricalSample,
    EmissionFactors,
};
use crate::schema::{Domain, HarmonizedSample, Trip};

const RULE_MISSING_VALUE: &str = "missing_value";
const RULE_NEGATIVE_VELOCITY: &str = "negative_velocity";
const RULE_NEGATIVE_CO2_VOLUME: &str = "negative_co2_volume";
const RULE_OUTLIER_TORQUE: &str = "outlier_torque";
const RULE_OUTLIER_CO2: &str = "outlier_co2";
const RULE_CORRUPTED_TRIP: &str = "corrupted_trip";

/// How a profile's raw data is laid out on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLayout {
    /// One file per driving session; trip ids come from file names.
    FilePerTrip,
    /// One combined table; trip ids come from an identifier column.
    Combined,
}

/// Parsing and filtering rules of one vehicle source.
#[derive(Debug, Clone)]
pub struct VehicleProfile {
    pub name: String,
    pub vehicle: String,
    pub domain: Domain,
    pub layout: SourceLayout,
    pub required_columns: Vec<String>,
    /// Fuel channels in preference order; at least one must be present
    /// in a source file for ICEV profiles that compute fuel-based rates.
    pub fuel_columns: Vec<String>,
    pub optional_columns: Vec<String>,
    pub trip_id_column: Option<String>,
    pub strip_id_suffixes: Vec<String>,
    pub wheel_radius_m: Option<f64>,
    pub strict: bool,
    pub co2_density_g_per_m3: f64,
    pub dilution: f64,
    pub id_fill_cap: usize,
    pub corrupt_trip_ids: Vec<String>,
}

impl VehicleProfile {
    pub fn names() -> [&'static str; 5] {
        ["i3", "blazer", "pacifica", "qx50", "qx50-strict"]
    }

    pub fn builtin(name: &str) -> Result<VehicleProfile, IngestError> {
        let base = |vehicle: &str, domain, layout| VehicleProfile {
            name: name.to_string(),
            vehicle: vehicle.to_string(),
            domain,
            layout,
            required_columns: vec![],
            fuel_columns: vec![],
            optional_columns: vec![],
            trip_id_column: None,
            strip_id_suffixes: vec![],
            wheel_radius_m: None,
            strict: false,
            co2_density_g_per_m3: 1800.0,
            dilution: 1.0,
            id_fill_cap: 50,
            corrupt_trip_ids: vec![],
        };
        let profile = match name {
            "i3" => {
                let mut p = base("i3", Domain::Ev, SourceLayout::FilePerTrip);
                p.required_columns = [
                    "Time [s]",
                    "Velocity [km/h]",
                    "Throttle [%]",
                    "Motor Torque [Nm]",
                    "Ambient Temperature [C]",
                    "Cabin Temperature Sensor [C]",
                    "Heat Exchanger Temperature [C]",
                    "Longitudinal Acceleration [m/s2]",
                    "Battery Voltage [V]",
                    "Battery Current [A]",
                ]
                .map(String::from)
                .to_vec();
                p
            }
            "qx50" | "qx50-strict" => {
                let mut p = base("qx50", Domain::Icev, SourceLayout::Combined);
                p.required_columns = [
                    "Time [s]",
                    "Trip",
                    "Dyno_Spd [mph]",
                    "Pedal_accel_CAN2_per [%]",
                    "Eng_torque_TCM [Nm]",
                    "Cell_Temp [C]",
                    "Cabin_Temp [C]",
                ]
                .map(String::from)
                .to_vec();
                p.fuel_columns = [
                    "Eng_MAF_ECM [g/s]",
                    "Eng_FuelFlow_Direct2 [gps]",
                    "Eng_FuelFlow_Direct [ccps]",
                ]
                .map(String::from)
                .to_vec();
                p.optional_columns = vec!["Heat_Exchanger_Temp [C]".to_string()];
                p.trip_id_column = Some("Trip".to_string());
                p.strip_id_suffixes = vec![" Test Data".to_string(), "Test Data".to_string()];
                p.wheel_radius_m = Some(qx50_wheel_radius_m());
                p.strict = name == "qx50-strict";
                p
            }
            "blazer" => {
                let mut p = base("blazer", Domain::Icev, SourceLayout::Combined);
                p.required_columns = [
                    "Time [s]",
                    "Test_ID",
                    "Dyno_Spd [mph]",
                    "Pedal_accel_CAN2_per [%]",
                    "Eng_torque_TCM [Nm]",
                    "Cell_Temp [C]",
                    "Cabin_Temp [C]",
                ]
                .map(String::from)
                .to_vec();
                p.fuel_columns = ["Eng_FuelFlow_Direct [gps]", "Eng_MAF_total_ECM [g/s]"]
                    .map(String::from)
                    .to_vec();
                p.trip_id_column = Some("Test_ID".to_string());
                p.corrupt_trip_ids = vec!["61177923.13997565".to_string()];
                p
            }
            "pacifica" => {
                let mut p = base("pacifica", Domain::Icev, SourceLayout::FilePerTrip);
                p.required_columns = [
                    "Time [s]",
                    "Dyno_Spd [mph]",
                    "Cell_Temp [C]",
                    "Radiator_Air_Outlet_Temp [C]",
                    "Cabin_Temp [C]",
                    "Dyno_TractiveForce [N]",
                    "Eng_FuelFlow_Direct [gps]",
                    "Emissions_CO2_Vol [m3/min]",
                ]
                .map(String::from)
                .to_vec();
                p.optional_columns = vec!["Eng_torque_TCM [Nm]".to_string()];
                p.wheel_radius_m = Some(0.3);
                p
            }
            other => {
                return Err(IngestError::UnknownProfile {
                    name: other.to_string(),
                })
            }
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.required_columns.is_empty() {
            return Err(IngestError::BadProfile(
                "required_columns must not be empty".to_string(),
            ));
        }
        if let Some(r) = self.wheel_radius_m {
            if !r.is_finite() || r <= 0.0 {
                return Err(IngestError::BadProfile(format!("wheel radius {r} <= 0")));
            }
        }
        if !self.co2_density_g_per_m3.is_finite() || self.co2_density_g_per_m3 <= 0.0 {
            return Err(IngestError::BadProfile(
                "co2 density must be positive".to_string(),
            ));
        }
        if !self.dilution.is_finite() || self.dilution <= 0.0 || self.dilution > 1.0 {
            return Err(IngestError::BadProfile(format!(
                "dilution {} outside (0, 1]",
                self.dilution
            )));
        }
        Ok(())
    }

    /// Columns carried into the working frame, fixed order.
    fn interest_columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        for c in self
            .required_columns
            .iter()
            .chain(&self.fuel_columns)
            .chain(&self.optional_columns)
        {
            if !cols.contains(c) {
                cols.push(c.clone());
            }
        }
        cols
    }

    fn integrity_options(&self) -> IntegrityOptions {
        IntegrityOptions {
            id_fill_cap: self.id_fill_cap,
            engine_torque_column: match self.vehicle.as_str() {
                "qx50" | "blazer" | "pacifica" => Some("Eng_torque_TCM [Nm]".to_string()),
                _ => None,
            },
            tractive_force_column: match self.vehicle.as_str() {
                "pacifica" => Some("Dyno_TractiveForce [N]".to_string()),
                _ => None,
            },
        }
    }

    fn normalize_id(&self, raw: &str) -> String {
        let mut id = raw.trim();
        for suffix in &self.strip_id_suffixes {
            if let Some(stripped) = id.strip_suffix(suffix.as_str()) {
                id = stripped.trim_end();
            }
        }
        id.to_string()
    }
}

fn file_stem(path_like: &str) -> String {
    let name = Path::new(path_like)
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| path_like.to_string());
    name
}

fn list_input_files(path: &Path) -> Result<Vec<PathBuf>, IngestError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(IngestError::NoInputFiles {
            path: path.display().to_string(),
        });
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("csv") | Some("txt")
                )
        })
        .collect();
    // lexicographic order keeps output independent of directory order
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    if files.is_empty() {
        return Err(IngestError::NoInputFiles {
            path: path.display().to_string(),
        });
    }
    Ok(files)
}

fn table_to_rows(table: &RawTable, profile: &VehicleProfile, interest: &[String]) -> Vec<RawRow> {
    let src_idx: Vec<Option<usize>> = interest
        .iter()
        .map(|name| table.columns.iter().position(|c| c == name))
        .collect();
    let time_pos = table
        .columns
        .iter()
        .position(|c| c == "Time [s]")
        .expect("validated header");
    let id_pos = profile
        .trip_id_column
        .as_ref()
        .and_then(|name| table.columns.iter().position(|c| c == name));
    let stem_id = match profile.layout {
        SourceLayout::FilePerTrip => Some(file_stem(&table.source)),
        SourceLayout::Combined => None,
    };
    table
        .rows
        .iter()
        .map(|cells| {
            let trip_id = match profile.layout {
                SourceLayout::FilePerTrip => stem_id.clone(),
                SourceLayout::Combined => id_pos.and_then(|i| {
                    let raw = cells[i].trim();
                    if raw.is_empty() {
                        None
                    } else {
                        Some(profile.normalize_id(raw))
                    }
                }),
            };
            RawRow {
                trip_id,
                time_s: parse_cell(&cells[time_pos]),
                vals: src_idx
                    .iter()
                    .map(|pos| pos.and_then(|i| parse_cell(&cells[i])))
                    .collect(),
            }
        })
        .collect()
}

/// Entry point behind [`super::ingest`].
pub(super) fn run(
    path: &Path,
    profile: &VehicleProfile,
    factors: &EmissionFactors,
) -> Result<(Vec<Trip>, FilterReport), IngestError> {
    profile.validate()?;
    factors.validate()?;
    let files = list_input_files(path)?;
    let interest = profile.interest_columns();

    let mut report = FilterReport::default();
    let mut rows: Vec<RawRow> = Vec::new();
    for file in &files {
        let table = read_raw_table(file)?;
        let mut missing = missing_columns(&table, &profile.required_columns);
        let fuel_ok = profile.fuel_columns.is_empty()
            || profile
                .fuel_columns
                .iter()
                .any(|c| table.columns.iter().any(|tc| tc == c));
        if !fuel_ok {
            missing.push(format!("one of [{}]", profile.fuel_columns.join(", ")));
        }
        if !missing.is_empty() {
            report.files_rejected.push((
                table.source.clone(),
                format!("missing columns: {}", missing.join("; ")),
            ));
            continue;
        }
        report.rows_in += table.rows.len();
        report.rows_out += table.rows.len();
        rows.extend(table_to_rows(&table, profile, &interest));
    }

    if rows.is_empty() {
        // every file was rejected (or all were empty): zero trips, and the
        // report names the offenders
        return Ok((Vec::new(), report));
    }

    let frame = RawFrame {
        columns: interest,
        rows,
    };
    let (frame, stage) = integrity_filter(frame, &profile.integrity_options())?;
    report.absorb(stage);

    let mut trips = harmonize(frame, profile, factors, &mut report)?;

    if profile.strict {
        let (filtered, stage) = strict_filter(trips)?;
        report.absorb(stage);
        trips = filtered;
    }

    trips.sort_by(|a, b| a.trip_id().cmp(b.trip_id()));
    Ok((trips, report))
}

/// Groups rows by trip id in first-appearance order.
fn group_by_trip(frame: &RawFrame) -> Vec<(String, Vec<&RawRow>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<&RawRow>> =
        std::collections::HashMap::new();
    for row in &frame.rows {
        let id = row.trip_id.clone().expect("integrity filter resolves ids");
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(row);
    }
    order
        .into_iter()
        .map(|id| {
            let rows = groups.remove(&id).expect("group exists");
            (id, rows)
        })
        .collect()
}

/// Partially harmonized row: everything except acceleration, which is
/// derived per trip after all row-level drops.
struct PendingSample {
    time_s: f64,
    velocity_kmh: f64,
    throttle_pct: f64,
    motor_torque_nm: f64,
    ambient_temp_c: f64,
    cabin_temp_c: f64,
    heat_exchanger_temp_c: Option<f64>,
    accel_from_source: Option<f64>,
    co2_rate_gs: f64,
}

fn harmonize(
    frame: RawFrame,
    profile: &VehicleProfile,
    factors: &EmissionFactors,
    report: &mut FilterReport,
) -> Result<Vec<Trip>, IngestError> {
    let idx = |name: &str| frame.column_index(name);
    let need = |name: &str| -> usize { idx(name).expect("validated column") };

    let groups = group_by_trip(&frame);
    let mut trips: Vec<Trip> = Vec::new();

    for (trip_id, rows) in groups {
        if profile.corrupt_trip_ids.contains(&trip_id) {
            report.drop_rows(RULE_CORRUPTED_TRIP, rows.len());
            report.trips_dropped.push(trip_id);
            continue;
        }

        let pending = match profile.vehicle.as_str() {
            "i3" => harmonize_i3(&rows, &frame, factors, report, need)?,
            "qx50" => harmonize_fuel_icev(
                &rows,
                profile,
                factors,
                report,
                FuelIcevColumns {
                    velocity_mph: need("Dyno_Spd [mph]"),
                    throttle: need("Pedal_accel_CAN2_per [%]"),
                    torque: need("Eng_torque_TCM [Nm]"),
                    ambient: need("Cell_Temp [C]"),
                    cabin: need("Cabin_Temp [C]"),
                    heat: idx("Heat_Exchanger_Temp [C]"),
                    fuel: resolve_fuel_columns(profile, &frame),
                },
            )?,
            "blazer" => harmonize_fuel_icev(
                &rows,
                profile,
                factors,
                report,
                FuelIcevColumns {
                    velocity_mph: need("Dyno_Spd [mph]"),
                    throttle: need("Pedal_accel_CAN2_per [%]"),
                    torque: need("Eng_torque_TCM [Nm]"),
                    ambient: need("Cell_Temp [C]"),
                    cabin: need("Cabin_Temp [C]"),
                    heat: None,
                    fuel: resolve_fuel_columns(profile, &frame),
                },
            )?,
            "pacifica" => harmonize_pacifica(&rows, profile, report, need)?,
            other => {
                return Err(IngestError::UnknownProfile {
                    name: other.to_string(),
                })
            }
        };

        if pending.is_empty() {
            report.trips_dropped.push(trip_id);
            continue;
        }

        // acceleration on the surviving time base
        let times: Vec<f64> = pending.iter().map(|p| p.time_s).collect();
        let velocities: Vec<f64> = pending.iter().map(|p| p.velocity_kmh).collect();
        let derived = derive_acceleration(&times, &velocities)?;
        let samples: Vec<HarmonizedSample> = pending
            .into_iter()
            .zip(derived)
            .map(|(p, a)| HarmonizedSample {
                time_s: p.time_s,
                velocity_kmh: p.velocity_kmh,
                throttle_pct: p.throttle_pct,
                motor_torque_nm: p.motor_torque_nm,
                ambient_temp_c: p.ambient_temp_c,
                cabin_temp_c: p.cabin_temp_c,
                heat_exchanger_temp_c: p.heat_exchanger_temp_c,
                longitudinal_accel_ms2: p.accel_from_source.unwrap_or(a),
                co2_rate_gs: p.co2_rate_gs,
            })
            .collect();
        trips.push(Trip::try_new(
            trip_id,
            profile.domain,
            &profile.vehicle,
            samples,
        )?);
    }

    if trips.is_empty() {
        return Err(IngestError::EmptyAfterFilter);
    }
    Ok(trips)
}

/// Fuel flow conversion attached to one source column.
#[derive(Debug, Clone, Copy)]
enum FuelKind {
    /// mass air flow in g/s of air
    Maf,
    /// direct fuel mass flow in g/s
    DirectGps,
    /// direct fuel volume flow in cc/s
    DirectCcps,
}

fn fuel_kind(column: &str) -> FuelKind {
    if column.contains("MAF") {
        FuelKind::Maf
    } else if column.contains("[ccps]") {
        FuelKind::DirectCcps
    } else {
        FuelKind::DirectGps
    }
}

fn resolve_fuel_columns(profile: &VehicleProfile, frame: &RawFrame) -> Vec<(usize, FuelKind)> {
    profile
        .fuel_columns
        .iter()
        .filter_map(|name| frame.column_index(name).map(|i| (i, fuel_kind(name))))
        .collect()
}

/// Fuel volume flow in L/h from the first usable cell in preference
/// order. Usable means present, finite, and non-negative.
fn fuel_flow_l_per_h(
    row: &RawRow,
    fuel: &[(usize, FuelKind)],
    factors: &EmissionFactors,
) -> Option<f64> {
    for (idx, kind) in fuel {
        if let Some(Some(v)) = row.vals.get(*idx) {
            if *v >= 0.0 {
                return Some(match kind {
                    FuelKind::Maf => fuel_flow_from_maf(*v, factors),
                    FuelKind::DirectGps => v / factors.fuel_density_g_per_l * 3600.0,
                    FuelKind::DirectCcps => v / 1000.0 * 3600.0,
                });
            }
        }
    }
    None
}

fn cell(row: &RawRow, idx: usize) -> Option<f64> {
    row.vals.get(idx).copied().flatten()
}

fn harmonize_i3(
    rows: &[&RawRow],
    frame: &RawFrame,
    factors: &EmissionFactors,
    report: &mut FilterReport,
    _need: impl Fn(&str) -> usize,
) -> Result<Vec<PendingSample>, IngestError> {
    let idx = |name: &str| frame.column_index(name).expect("validated column");
    let velocity = idx("Velocity [km/h]");
    let throttle = idx("Throttle [%]");
    let torque = idx("Motor Torque [Nm]");
    let ambient = idx("Ambient Temperature [C]");
    let cabin = idx("Cabin Temperature Sensor [C]");
    let heat = idx("Heat Exchanger Temperature [C]");
    let accel = idx("Longitudinal Acceleration [m/s2]");
    let voltage = idx("Battery Voltage [V]");
    let current = idx("Battery Current [A]");

    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let cells = [
            cell(row, velocity),
            cell(row, throttle),
            cell(row, torque),
            cell(row, ambient),
            cell(row, cabin),
            cell(row, heat),
            cell(row, accel),
            cell(row, voltage),
            cell(row, current),
        ];
        let [Some(v), Some(thr), Some(trq), Some(amb), Some(cab), Some(hx), Some(acc), Some(volt), Some(curr)] =
            cells
        else {
            report.drop_row(RULE_MISSING_VALUE);
            continue;
        };
        if v < 0.0 {
            report.drop_row(RULE_NEGATIVE_VELOCITY);
            continue;
        }
        let co2 = ev_rate(
            ElectricalSample {
                battery_voltage_v: volt,
                battery_current_a: curr,
            },
            factors,
        )?;
        out.push(PendingSample {
            time_s: row.time_s.expect("integrity filter keeps timed rows"),
            velocity_kmh: v,
            throttle_pct: thr,
            motor_torque_nm: trq,
            ambient_temp_c: amb,
            cabin_temp_c: cab,
            heat_exchanger_temp_c: Some(hx),
            accel_from_source: Some(acc),
            co2_rate_gs: co2,
        });
    }
    Ok(out)
}

struct FuelIcevColumns {
    velocity_mph: usize,
    throttle: usize,
    torque: usize,
    ambient: usize,
    cabin: usize,
    heat: Option<usize>,
    fuel: Vec<(usize, FuelKind)>,
}

/// QX50/Blazer: mph conversion, fuel-flow preference cascade, and the
/// fuel-based rate with zero emissions at idle (zero speed or zero flow).
fn harmonize_fuel_icev(
    rows: &[&RawRow],
    _profile: &VehicleProfile,
    factors: &EmissionFactors,
    report: &mut FilterReport,
    cols: FuelIcevColumns,
) -> Result<Vec<PendingSample>, IngestError> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let (Some(v_mph), Some(thr), Some(trq), Some(amb), Some(cab)) = (
            cell(row, cols.velocity_mph),
            cell(row, cols.throttle),
            cell(row, cols.torque),
            cell(row, cols.ambient),
            cell(row, cols.cabin),
        ) else {
            report.drop_row(RULE_MISSING_VALUE);
            continue;
        };
        let Some(flow_l_per_h) = fuel_flow_l_per_h(row, &cols.fuel, factors) else {
            report.drop_row(RULE_MISSING_VALUE);
            continue;
        };
        let v = convert_speed_mph_to_kmh(v_mph);
        if v < 0.0 {
            report.drop_row(RULE_NEGATIVE_VELOCITY);
            continue;
        }
        let co2 = if flow_l_per_h <= 0.0 || v == 0.0 {
            0.0
        } else {
            let k = efficiency_k(v, flow_l_per_h)?;
            icev_rate(v, k, factors)?
        };
        out.push(PendingSample {
            time_s: row.time_s.expect("integrity filter keeps timed rows"),
            velocity_kmh: v,
            throttle_pct: thr,
            motor_torque_nm: trq,
            ambient_temp_c: amb,
            cabin_temp_c: cab,
            heat_exchanger_temp_c: cols.heat.and_then(|i| cell(row, i)),
            accel_from_source: None,
            co2_rate_gs: co2,
        });
    }
    Ok(out)
}

/// Pacifica: torque from tractive force, throttle proxy from fuel flow,
/// mass rate from dilute CO2 volume flow, and the platform outlier rule.
fn harmonize_pacifica(
    rows: &[&RawRow],
    profile: &VehicleProfile,
    report: &mut FilterReport,
    need: impl Fn(&str) -> usize,
) -> Result<Vec<PendingSample>, IngestError> {
    let velocity = need("Dyno_Spd [mph]");
    let ambient = need("Cell_Temp [C]");
    let cabin = need("Cabin_Temp [C]");
    let force = need("Dyno_TractiveForce [N]");
    let fuel = need("Eng_FuelFlow_Direct [gps]");
    let co2_vol = need("Emissions_CO2_Vol [m3/min]");
    let radius = profile.wheel_radius_m.expect("pacifica has a wheel radius");

    // pass 1: row-level validity, collecting the fuel-flow series the
    // throttle proxy normalizes over
    struct Valid {
        time_s: f64,
        v_kmh: f64,
        force_n: f64,
        amb: f64,
        cab: f64,
        flow_gps: f64,
        vol_m3_min: f64,
    }
    let mut valid: Vec<Valid> = Vec::with_capacity(rows.len());
    for row in rows {
        let (Some(v_mph), Some(amb), Some(cab), Some(f_n), Some(flow), Some(vol)) = (
            cell(row, velocity),
            cell(row, ambient),
            cell(row, cabin),
            cell(row, force),
            cell(row, fuel),
            cell(row, co2_vol),
        ) else {
            report.drop_row(RULE_MISSING_VALUE);
            continue;
        };
        if vol < 0.0 {
            report.drop_row(RULE_NEGATIVE_CO2_VOLUME);
            continue;
        }
        let v = convert_speed_mph_to_kmh(v_mph);
        if v < 0.0 {
            report.drop_row(RULE_NEGATIVE_VELOCITY);
            continue;
        }
        valid.push(Valid {
            time_s: row.time_s.expect("integrity filter keeps timed rows"),
            v_kmh: v,
            force_n: f_n,
            amb,
            cab,
            flow_gps: flow,
            vol_m3_min: vol,
        });
    }

    // pass 2: derived channels and the outlier rule
    let flow_series: Vec<f64> = valid.iter().map(|r| r.flow_gps).collect();
    let throttle = throttle_proxy_from_fuel_flow(&flow_series);
    let mut out = Vec::with_capacity(valid.len());
    for (r, thr) in valid.into_iter().zip(throttle) {
        let torque = torque_from_tractive_force(r.force_n, radius);
        let co2 = co2_volume_to_mass(r.vol_m3_min, profile.co2_density_g_per_m3, profile.dilution);
        if torque >= 400.0 {
            report.drop_row(RULE_OUTLIER_TORQUE);
            continue;
        }
        if co2 > 25.0 {
            report.drop_row(RULE_OUTLIER_CO2);
            continue;
        }
        out.push(PendingSample {
            time_s: r.time_s,
            velocity_kmh: r.v_kmh,
            throttle_pct: thr,
            motor_torque_nm: torque,
            ambient_temp_c: r.amb,
            cabin_temp_c: r.cab,
            heat_exchanger_temp_c: None,
            accel_from_source: None,
            co2_rate_gs: co2,
        });
    }
    Ok(out)
}
