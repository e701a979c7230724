//! Per-trip and aggregate statistics, tables, and plot-ready series.
//!
//! Quantiles use linear interpolation between order statistics (the
//! "type-7" convention); standard deviations are sample (n-1) values.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Summary statistics of one metric, in its natural unit.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
    pub sample_std: f64,
    /// True when n == 1 and the std is reported as 0 by convention.
    pub degenerate_std: bool,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot aggregate an empty list")]
    Empty,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("row {row} does not match the table schema: {reason}")]
    SchemaMismatch { row: usize, reason: String },
    #[error("series `{name}` has length {found}, expected {expected}")]
    MisalignedSeries {
        name: String,
        found: usize,
        expected: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Quantile by linear interpolation between order statistics.
/// `p` in [0, 1]; `values` need not be sorted.
pub fn quantile_type7(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Aggregates a non-empty list of values. Permutation-invariant.
pub fn aggregate(values: &[f64]) -> Result<AggregateStats, ReportError> {
    if values.is_empty() {
        return Err(ReportError::Empty);
    }
    for (index, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(ReportError::NonFinite { index });
        }
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let (degenerate_std, sample_std) = if n == 1 {
        (true, 0.0)
    } else {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (false, (ss / (n - 1) as f64).sqrt())
    };
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(AggregateStats {
        n,
        mean,
        median: quantile_type7(values, 0.5),
        min,
        max,
        q1: quantile_type7(values, 0.25),
        q3: quantile_type7(values, 0.75),
        sample_std,
        degenerate_std,
    })
}

/// Cell formatting of one table column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFormat {
    Text,
    /// Fixed decimal places; the tables in this project use 3 or 4.
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub name: String,
    pub format: CellFormat,
}

impl ColumnSpec {
    pub fn text(name: &str) -> ColumnSpec {
        ColumnSpec {
            name: name.to_string(),
            format: CellFormat::Text,
        }
    }

    pub fn fixed(name: &str, decimals: usize) -> ColumnSpec {
        ColumnSpec {
            name: name.to_string(),
            format: CellFormat::Fixed(decimals),
        }
    }
}

/// One table cell; numbers are formatted by the column spec on emission.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Num(v)
    }
}

fn format_cell(cell: &Cell, spec: &ColumnSpec, row: usize) -> Result<String, ReportError> {
    match (cell, spec.format) {
        (Cell::Text(s), CellFormat::Text) => Ok(s.clone()),
        (Cell::Num(v), CellFormat::Fixed(d)) => Ok(format!("{v:.d$}")),
        (Cell::Text(_), CellFormat::Fixed(_)) => Err(ReportError::SchemaMismatch {
            row,
            reason: format!("column `{}` expects a number", spec.name),
        }),
        (Cell::Num(_), CellFormat::Text) => Err(ReportError::SchemaMismatch {
            row,
            reason: format!("column `{}` expects text", spec.name),
        }),
    }
}

/// Emits a delimiter-separated table with a deterministic column order.
/// `provenance` lines go first as `# ` comments. Empty `rows` produce a
/// header-only file.
pub fn emit_table_to<W: Write>(
    mut w: W,
    schema: &[ColumnSpec],
    rows: &[Vec<Cell>],
    provenance: &[String],
) -> Result<(), ReportError> {
    for line in provenance {
        writeln!(w, "# {line}")?;
    }
    let header: Vec<&str> = schema.iter().map(|c| c.name.as_str()).collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != schema.len() {
            return Err(ReportError::SchemaMismatch {
                row: i,
                reason: format!("{} cells for {} columns", row.len(), schema.len()),
            });
        }
        let cells: Vec<String> = row
            .iter()
            .zip(schema)
            .map(|(c, s)| format_cell(c, s, i))
            .collect::<Result<_, _>>()?;
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn emit_table(
    path: impl AsRef<Path>,
    schema: &[ColumnSpec],
    rows: &[Vec<Cell>],
    provenance: &[String],
) -> Result<(), ReportError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    emit_table_to(&mut w, schema, rows, provenance)?;
    w.flush()?;
    Ok(())
}

/// Emits long-format plot data: one `(x, series, value)` row per point per
/// series, consumable by any plotting tool. All series must match the
/// length of `x`.
pub fn emit_plot_series_to<W: Write>(
    mut w: W,
    x_name: &str,
    x: &[f64],
    series: &[(&str, &[f64])],
    provenance: &[String],
) -> Result<(), ReportError> {
    for (name, values) in series {
        if values.len() != x.len() {
            return Err(ReportError::MisalignedSeries {
                name: name.to_string(),
                found: values.len(),
                expected: x.len(),
            });
        }
    }
    for line in provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{x_name},series,value")?;
    for (name, values) in series {
        for (xi, vi) in x.iter().zip(values.iter()) {
            writeln!(w, "{xi},{name},{vi}")?;
        }
    }
    Ok(())
}

pub fn emit_plot_series(
    path: impl AsRef<Path>,
    x_name: &str,
    x: &[f64],
    series: &[(&str, &[f64])],
    provenance: &[String],
) -> Result<(), ReportError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    emit_plot_series_to(&mut w, x_name, x, series, provenance)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Held-out per-trip emission MAEs of the three combustion platforms.
    pub const ICEV_TRIP_MAES: [f64; 13] = [
        0.247, 0.235, 0.317, 0.252, 0.259, 0.398, 0.071, // qx50
        0.289, 0.168, // blazer
        0.292, 0.365, 0.476, 0.304, // pacifica
    ];

    #[test]
    fn aggregate_reproduces_published_icev_summary() {
        let stats = aggregate(&ICEV_TRIP_MAES).unwrap();
        assert!((stats.mean - 0.283).abs() < 0.0005);
        assert!((stats.median - 0.289).abs() < 0.0005);
        assert!((stats.min - 0.071).abs() < 1e-12);
        assert!((stats.max - 0.476).abs() < 1e-12);
        assert!((stats.q1 - 0.247).abs() < 0.0005);
        assert!((stats.q3 - 0.317).abs() < 0.0005);
        assert!((stats.sample_std - 0.101).abs() < 0.001);
    }

    #[test]
    fn single_value_degenerates_cleanly() {
        let stats = aggregate(&[0.3]).unwrap();
        assert_eq!(stats.mean, 0.3);
        assert_eq!(stats.median, 0.3);
        assert_eq!(stats.min, 0.3);
        assert_eq!(stats.max, 0.3);
        assert_eq!(stats.sample_std, 0.0);
        assert!(stats.degenerate_std);
    }

    #[test]
    fn aggregate_rejects_empty_and_non_finite() {
        assert!(matches!(aggregate(&[]), Err(ReportError::Empty)));
        assert!(aggregate(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn quantile_type7_oracle_points() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!((quantile_type7(&v, 0.25) - 25.75).abs() < 1e-12);
        assert!((quantile_type7(&v, 0.75) - 75.25).abs() < 1e-12);
        // 5-point check with a hand-interpolated position
        let w = [10.0, 1.0, 100.0, 1000.0, 10000.0];
        assert!((quantile_type7(&w, 0.25) - 10.0).abs() < 1e-12);
        assert!((quantile_type7(&w, 0.75) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mut reversed = ICEV_TRIP_MAES;
        reversed.reverse();
        assert_eq!(
            aggregate(&ICEV_TRIP_MAES).unwrap(),
            aggregate(&reversed).unwrap()
        );
    }

    #[test]
    fn table_emission_and_round_trip() {
        let schema = [
            ColumnSpec::text("Trip"),
            ColumnSpec::fixed("CO2 MAE (g/s)", 3),
        ];
        let rows: Vec<Vec<Cell>> = [0.247, 0.235, 0.071]
            .iter()
            .enumerate()
            .map(|(i, v)| vec![Cell::text(i.to_string()), Cell::Num(*v)])
            .collect();
        let mut buf = Vec::new();
        emit_table_to(&mut buf, &schema, &rows, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Trip,CO2 MAE (g/s)");
        assert_eq!(lines[1], "0,0.247");
        assert_eq!(lines[3], "2,0.071");
        // parsing back recovers values at printed precision
        for (line, expected) in lines[1..].iter().zip([0.247, 0.235, 0.071]) {
            let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((v - expected).abs() < 5e-4);
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let schema = [ColumnSpec::text("a"), ColumnSpec::fixed("b", 3)];
        let mut buf = Vec::new();
        emit_table_to(&mut buf, &schema, &[], &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n");
    }

    #[test]
    fn table_schema_mismatch_rejected() {
        let schema = [ColumnSpec::fixed("b", 3)];
        let rows = vec![vec![Cell::text("oops")]];
        assert!(emit_table_to(&mut Vec::new(), &schema, &rows, &[]).is_err());
        let rows = vec![vec![Cell::Num(1.0), Cell::Num(2.0)]];
        assert!(emit_table_to(&mut Vec::new(), &schema, &rows, &[]).is_err());
    }

    #[test]
    fn plot_series_long_format() {
        let t = [0.0, 1.0, 2.0];
        let pred = [0.1, 0.2, 0.3];
        let truth = [0.1, 0.25, 0.28];
        let mut buf = Vec::new();
        emit_plot_series_to(
            &mut buf,
            "time_s",
            &t,
            &[("pred", &pred), ("truth", &truth)],
            &[],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        // header + 2 series x 3 points
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.lines().any(|l| l == "1,pred,0.2"));
    }

    #[test]
    fn plot_series_rejects_misaligned() {
        let t = [0.0, 1.0];
        let s = [1.0];
        assert!(emit_plot_series_to(&mut Vec::new(), "t", &t, &[("s", &s)], &[]).is_err());
    }
}
