//! Raw source-table parsing and the integrity filter.
//!
//! Source files are delimiter-separated text with vehicle-native headers.
//! Cells parse lazily: a cell that is empty or not a finite number counts
//! as missing, and the adapters decide how missing values are handled.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{FilterReport, IngestError};

/// One parsed source file: header names and raw string cells.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub source: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_raw_table(path: &Path) -> Result<RawTable, IngestError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| path.display().to_string());
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        match &columns {
            None => columns = Some(cells),
            Some(header) => {
                let mut row = cells;
                // ragged rows pad with empties so column lookups stay safe
                row.resize(header.len(), String::new());
                rows.push(row);
            }
        }
    }
    let columns = columns.ok_or_else(|| IngestError::EmptyTable {
        file: source.clone(),
    })?;
    Ok(RawTable {
        source,
        columns,
        rows,
    })
}

/// Checks that every required column is present; returns the missing set.
pub fn missing_columns(table: &RawTable, required: &[String]) -> Vec<String> {
    required
        .iter()
        .filter(|r| !table.columns.iter().any(|c| c == *r))
        .cloned()
        .collect()
}

/// One working row: extracted trip id and time plus numeric cells
/// parallel to the frame's column list. Non-finite or empty cells are
/// `None`.
#[derive(Debug, Clone)]
pub struct RawRow {
    pub trip_id: Option<String>,
    pub time_s: Option<f64>,
    pub vals: Vec<Option<f64>>,
}

/// Working frame shared by the integrity filter and the adapters.
#[derive(Debug, Clone)]
pub struct RawFrame {
    pub columns: Vec<String>,
    pub rows: Vec<RawRow>,
}

impl RawFrame {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub(crate) fn parse_cell(cell: &str) -> Option<f64> {
    if cell.is_empty() {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Integrity-filter configuration. Column names refer to the frame.
#[derive(Debug, Clone, Default)]
pub struct IntegrityOptions {
    pub id_fill_cap: usize,
    pub engine_torque_column: Option<String>,
    pub tractive_force_column: Option<String>,
}

pub(crate) const RULE_UNRESOLVED_ID: &str = "unresolved_trip_id";
pub(crate) const RULE_MISSING_TIME: &str = "missing_time";
pub(crate) const RULE_NEGATIVE_TIME: &str = "negative_time";
pub(crate) const RULE_DUPLICATE_TIMESTAMP: &str = "duplicate_timestamp";
pub(crate) const RULE_TIME_REGRESSION: &str = "time_regression";
pub(crate) const RULE_NEGATIVE_ENGINE_TORQUE: &str = "negative_engine_torque";
pub(crate) const RULE_NEGATIVE_TRACTIVE_FORCE: &str = "negative_tractive_force";

/// Drops rows that violate the shared integrity rules, in order:
/// unresolved trip ids after capped forward-fill, missing or negative
/// timestamps, duplicate or regressing timestamps within a trip, and
/// negative engine torque / tractive force where those channels exist.
///
/// Applying the filter twice equals applying it once.
pub fn integrity_filter(
    frame: RawFrame,
    opts: &IntegrityOptions,
) -> Result<(RawFrame, FilterReport), IngestError> {
    let mut report = FilterReport::new(frame.rows.len());
    let torque_idx = opts
        .engine_torque_column
        .as_deref()
        .and_then(|n| frame.column_index(n));
    let force_idx = opts
        .tractive_force_column
        .as_deref()
        .and_then(|n| frame.column_index(n));

    // capped forward-fill of trip identifiers
    let mut rows = frame.rows;
    let mut last_id: Option<String> = None;
    let mut run = 0usize;
    for row in rows.iter_mut() {
        match &row.trip_id {
            Some(id) if !id.is_empty() => {
                last_id = Some(id.clone());
                run = 0;
            }
            _ => {
                run += 1;
                if run <= opts.id_fill_cap {
                    row.trip_id = last_id.clone();
                } else {
                    row.trip_id = None;
                }
            }
        }
    }

    let mut kept: Vec<RawRow> = Vec::with_capacity(rows.len());
    let mut last_time: BTreeMap<String, f64> = BTreeMap::new();
    for row in rows {
        let id = match &row.trip_id {
            Some(id) if !id.is_empty() => id.clone(),
            _ => {
                report.drop_row(RULE_UNRESOLVED_ID);
                continue;
            }
        };
        let time = match row.time_s {
            Some(t) => t,
            None => {
                report.drop_row(RULE_MISSING_TIME);
                continue;
            }
        };
        if time < 0.0 {
            report.drop_row(RULE_NEGATIVE_TIME);
            continue;
        }
        if let Some(idx) = torque_idx {
            if matches!(row.vals.get(idx), Some(Some(v)) if *v < 0.0) {
                report.drop_row(RULE_NEGATIVE_ENGINE_TORQUE);
                continue;
            }
        }
        if let Some(idx) = force_idx {
            if matches!(row.vals.get(idx), Some(Some(v)) if *v < 0.0) {
                report.drop_row(RULE_NEGATIVE_TRACTIVE_FORCE);
                continue;
            }
        }
        match last_time.get(&id) {
            Some(&prev) if time == prev => {
                report.drop_row(RULE_DUPLICATE_TIMESTAMP);
                continue;
            }
            Some(&prev) if time < prev => {
                report.drop_row(RULE_TIME_REGRESSION);
                continue;
            }
            _ => {}
        }
        last_time.insert(id, time);
        kept.push(row);
    }

    if kept.is_empty() {
        return Err(IngestError::EmptyAfterFilter);
    }
    report.rows_out = kept.len();
    Ok((
        RawFrame {
            columns: frame.columns,
            rows: kept,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with_times(times: &[Option<f64>]) -> RawFrame {
        RawFrame {
            columns: vec![],
            rows: times
                .iter()
                .map(|t| RawRow {
                    trip_id: Some("t".to_string()),
                    time_s: *t,
                    vals: vec![],
                })
                .collect(),
        }
    }

    fn opts() -> IntegrityOptions {
        IntegrityOptions {
            id_fill_cap: 50,
            ..IntegrityOptions::default()
        }
    }

    #[test]
    fn duplicate_timestamps_dropped() {
        let frame = frame_with_times(&[Some(0.0), Some(1.0), Some(1.0), Some(2.0)]);
        let (out, report) = integrity_filter(frame, &opts()).unwrap();
        let times: Vec<f64> = out.rows.iter().map(|r| r.time_s.unwrap()).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0]);
        assert_eq!(report.dropped[RULE_DUPLICATE_TIMESTAMP], 1);
        assert!(report.reconciles());
    }

    #[test]
    fn negative_time_dropped() {
        let frame = frame_with_times(&[Some(-1.0), Some(0.0), Some(1.0)]);
        let (out, report) = integrity_filter(frame, &opts()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(report.dropped[RULE_NEGATIVE_TIME], 1);
    }

    #[test]
    fn negative_torque_rule_when_channel_exists() {
        let frame = RawFrame {
            columns: vec!["Eng_torque_TCM [Nm]".to_string()],
            rows: vec![
                RawRow {
                    trip_id: Some("t".into()),
                    time_s: Some(0.0),
                    vals: vec![Some(-5.0)],
                },
                RawRow {
                    trip_id: Some("t".into()),
                    time_s: Some(1.0),
                    vals: vec![Some(10.0)],
                },
            ],
        };
        let o = IntegrityOptions {
            id_fill_cap: 50,
            engine_torque_column: Some("Eng_torque_TCM [Nm]".to_string()),
            ..IntegrityOptions::default()
        };
        let (out, report) = integrity_filter(frame, &o).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].vals[0], Some(10.0));
        assert_eq!(report.dropped[RULE_NEGATIVE_ENGINE_TORQUE], 1);
    }

    #[test]
    fn forward_fill_capped() {
        let mut rows = vec![RawRow {
            trip_id: Some("a".into()),
            time_s: Some(0.0),
            vals: vec![],
        }];
        for i in 0..5 {
            rows.push(RawRow {
                trip_id: None,
                time_s: Some(1.0 + i as f64),
                vals: vec![],
            });
        }
        let frame = RawFrame {
            columns: vec![],
            rows,
        };
        let o = IntegrityOptions {
            id_fill_cap: 3,
            ..IntegrityOptions::default()
        };
        let (out, report) = integrity_filter(frame, &o).unwrap();
        assert_eq!(out.rows.len(), 4); // seed row + 3 filled
        assert_eq!(report.dropped[RULE_UNRESOLVED_ID], 2);
        assert!(out.rows.iter().all(|r| r.trip_id.as_deref() == Some("a")));
    }

    #[test]
    fn filter_is_idempotent() {
        let frame = frame_with_times(&[
            Some(-3.0),
            Some(0.0),
            Some(0.0),
            Some(2.0),
            Some(1.5),
            Some(4.0),
        ]);
        let (once, r1) = integrity_filter(frame, &opts()).unwrap();
        let (twice, r2) = integrity_filter(once.clone(), &opts()).unwrap();
        assert_eq!(once.rows.len(), twice.rows.len());
        assert!(r1.reconciles() && r2.reconciles());
        assert_eq!(r2.dropped_total(), 0);
    }

    #[test]
    fn all_rows_dropped_is_an_error() {
        let frame = frame_with_times(&[Some(-1.0), Some(-2.0)]);
        assert!(matches!(
            integrity_filter(frame, &opts()),
            Err(IngestError::EmptyAfterFilter)
        ));
    }
}
