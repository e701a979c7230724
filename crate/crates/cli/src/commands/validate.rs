//! `carbontwin validate`: within-domain proxy validation of the EV pair.

use anyhow::{bail, Context, Result};

use carbontwin_core::dataset::split_from_manifest;
use carbontwin_core::pipeline::{load_checkpoint, proxy_validate, ModelRole, ProxyReport};
use carbontwin_core::report::{emit_table, Cell, ColumnSpec};
use carbontwin_core::schema::{read_trips, Domain, Trip};

use super::{checkpoint_path, ensure_dir, harmonized_path, read_split_manifest, splits_path};
use crate::config::RunConfig;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let _lock = super::RunLock::acquire(cfg)?;
    let vehicle = cfg.require("ev.vehicle")?.to_string();
    let g_path = checkpoint_path(cfg, Domain::Ev, ModelRole::Emissions, &vehicle)?;
    let f_path = checkpoint_path(cfg, Domain::Ev, ModelRole::Feature, &vehicle)?;
    for p in [&g_path, &f_path] {
        if !p.is_file() {
            bail!(
                "missing checkpoint `{}` (run `carbontwin train` first)",
                p.display()
            );
        }
    }
    let g = load_checkpoint(&g_path)?;
    let f = load_checkpoint(&f_path)?;

    let harmonized = harmonized_path(cfg, &vehicle)?;
    let trips = read_trips(&harmonized, Domain::Ev, &vehicle)
        .with_context(|| format!("cannot read `{}`", harmonized.display()))?;

    // held-out trips come from the emissions model's stored manifest
    let manifest = read_split_manifest(&splits_path(
        cfg,
        Domain::Ev,
        ModelRole::Emissions,
        &vehicle,
    )?)?;
    let split = split_from_manifest(&trips, &manifest)?;
    let test_trips: Vec<Trip> = split.test.iter().map(|&i| trips[i].clone()).collect();
    if test_trips.is_empty() {
        bail!("the stored split manifest has no test trips");
    }

    let report = proxy_validate(&f, &g, &test_trips)?;
    write_reports(cfg, &report)?;
    println!(
        "proxy validation over {} trips: direct median {:.4} g/s, proxy median {:.4} g/s, \
         delta median {:+.4} g/s, proxy <= direct on {}/{}",
        report.rows.len(),
        report.direct.median,
        report.proxy.median,
        report.delta.median,
        report.proxy_not_worse,
        report.rows.len()
    );
    Ok(())
}

fn write_reports(cfg: &RunConfig, report: &ProxyReport) -> Result<()> {
    let reports_dir = cfg.run_dir()?.join("reports");
    ensure_dir(&reports_dir)?;
    let provenance = cfg.provenance();

    let table_schema = [
        ColumnSpec::text("Trip"),
        ColumnSpec::fixed("CO2 MAE (g/s)", 4),
        ColumnSpec::fixed("Proxy MAE (g/s)", 4),
        ColumnSpec::fixed("Torque MAE (Nm)", 3),
        ColumnSpec::fixed("Throttle MAE (%)", 3),
    ];
    let rows: Vec<Vec<Cell>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::text(r.trip_id.clone()),
                Cell::Num(r.direct_mae),
                Cell::Num(r.proxy_mae),
                Cell::Num(r.torque_mae),
                Cell::Num(r.throttle_mae),
            ]
        })
        .collect();
    emit_table(
        reports_dir.join(format!("proxy_validation-{}.csv", cfg.hash_hex())),
        &table_schema,
        &rows,
        &provenance,
    )?;

    let agg_schema = [
        ColumnSpec::text("metric"),
        ColumnSpec::fixed("mean", 4),
        ColumnSpec::fixed("median", 4),
        ColumnSpec::fixed("min", 4),
        ColumnSpec::fixed("max", 4),
        ColumnSpec::fixed("q1", 4),
        ColumnSpec::fixed("q3", 4),
        ColumnSpec::fixed("std", 4),
    ];
    let metrics = [
        ("direct_mae_gs", &report.direct),
        ("proxy_mae_gs", &report.proxy),
        ("delta_gs", &report.delta),
        ("torque_mae_nm", &report.torque),
        ("throttle_mae_pct", &report.throttle),
    ];
    let agg_rows: Vec<Vec<Cell>> = metrics
        .iter()
        .map(|(name, s)| {
            vec![
                Cell::text(*name),
                Cell::Num(s.mean),
                Cell::Num(s.median),
                Cell::Num(s.min),
                Cell::Num(s.max),
                Cell::Num(s.q1),
                Cell::Num(s.q3),
                Cell::Num(s.sample_std),
            ]
        })
        .collect();
    let mut agg_provenance = provenance.clone();
    agg_provenance.push(format!(
        "proxy_not_worse = {}/{}",
        report.proxy_not_worse,
        report.rows.len()
    ));
    if !report.skipped.is_empty() {
        agg_provenance.push(format!(
            "skipped_short_trips = {}",
            report.skipped.join(",")
        ));
    }
    emit_table(
        reports_dir.join(format!("proxy_aggregates-{}.csv", cfg.hash_hex())),
        &agg_schema,
        &agg_rows,
        &agg_provenance,
    )?;
    Ok(())
}
