//! `carbontwin report`: aggregate one numeric column of a stored table.

use std::path::Path;

use anyhow::{bail, Context, Result};

use carbontwin_core::report::{aggregate, emit_table_to, Cell, ColumnSpec};

use crate::config::RunConfig;

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read `{}`", path.display()))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().context("file has no header row")?;
    let names: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let idx = names
        .iter()
        .position(|n| *n == column)
        .with_context(|| format!("no column `{column}` in [{}]", names.join(", ")))?;
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let cell = cells
            .get(idx)
            .with_context(|| format!("row {} is too short", lineno + 2))?;
        values.push(
            cell.trim()
                .parse::<f64>()
                .with_context(|| format!("`{cell}` in row {} is not a number", lineno + 2))?,
        );
    }
    if values.is_empty() {
        bail!("column `{column}` has no rows");
    }
    Ok(values)
}

pub fn run(cfg: &RunConfig, input: &Path, column: &str, output: Option<&Path>) -> Result<()> {
    let values = read_column(input, column)?;
    let stats = aggregate(&values)?;

    let schema = [ColumnSpec::text("metric"), ColumnSpec::fixed("value", 4)];
    let rows: Vec<Vec<Cell>> = [
        ("n", stats.n as f64),
        ("mean", stats.mean),
        ("median", stats.median),
        ("min", stats.min),
        ("max", stats.max),
        ("q1", stats.q1),
        ("q3", stats.q3),
        ("std", stats.sample_std),
    ]
    .iter()
    .map(|(name, v)| vec![Cell::text(*name), Cell::Num(*v)])
    .collect();

    let mut provenance = cfg.provenance();
    provenance.push(format!("input = {}", input.display()));
    provenance.push(format!("column = {column}"));
    if stats.degenerate_std {
        provenance.push("std_footnote = single value, std reported as 0".to_string());
    }

    match output {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("cannot create `{}`", path.display()))?;
            let mut w = std::io::BufWriter::new(file);
            emit_table_to(&mut w, &schema, &rows, &provenance)?;
            use std::io::Write;
            w.flush()?;
            println!(
                "aggregated {} values of `{column}` -> {}",
                stats.n,
                path.display()
            );
        }
        None => {
            let mut buf = Vec::new();
            emit_table_to(&mut buf, &schema, &rows, &provenance)?;
            print!("{}", String::from_utf8_lossy(&buf));
        }
    }
    Ok(())
}
