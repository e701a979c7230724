//! `carbontwin ingest`: raw source tables to harmonized trip files.

use anyhow::{bail, Context, Result};

use carbontwin_core::ingest::{ingest, VehicleProfile};
use carbontwin_core::schema::write_trips;

use super::{ensure_dir, harmonized_path};
use crate::config::RunConfig;

/// Runs one or all configured profiles. Returns the names of rejected
/// source files; the caller maps a non-empty list to exit code 2.
pub fn run(cfg: &RunConfig, only_profile: Option<&str>) -> Result<Vec<String>> {
    let selected: Vec<String> = match only_profile {
        Some(name) => vec![name.to_string()],
        None => VehicleProfile::names()
            .iter()
            .filter(|n| cfg.data_path(n).is_some())
            .map(|n| n.to_string())
            .collect(),
    };
    if selected.is_empty() {
        bail!("no profiles selected: set data.<vehicle> paths in the config or pass --profile");
    }

    let _lock = super::RunLock::acquire(cfg)?;
    let factors = cfg.factors()?;
    let out_dir = cfg.run_dir()?.join("harmonized");
    ensure_dir(&out_dir)?;

    let mut rejected = Vec::new();
    for name in &selected {
        let mut profile =
            VehicleProfile::builtin(name).with_context(|| format!("profile `{name}`"))?;
        profile.co2_density_g_per_m3 = cfg.f64_of("pacifica.co2_density")?;
        profile.dilution = cfg.f64_of("pacifica.dilution")?;
        let data = cfg
            .data_path(name)
            .with_context(|| format!("config key `data.{}` is not set", profile.vehicle))?;

        let (trips, report) = ingest(&data, &profile, &factors)
            .with_context(|| format!("ingesting `{name}` from `{}`", data.display()))?;

        let provenance = {
            let mut p = cfg.provenance();
            p.push(format!("profile = {name}"));
            p
        };
        let out = harmonized_path(cfg, name)?;
        write_trips(&out, &trips, &provenance)?;
        let report_path = out_dir.join(format!("{name}.filter_report.txt"));
        report.write(&report_path, &provenance)?;

        println!(
            "{name}: {} trips, {} of {} rows kept -> {}",
            trips.len(),
            report.rows_out,
            report.rows_in,
            out.display()
        );
        for (file, reason) in &report.files_rejected {
            eprintln!("{name}: rejected {file}: {reason}");
            rejected.push(file.clone());
        }
        if trips.is_empty() {
            eprintln!("{name}: no trips survived ingestion");
            rejected.push(format!("<no trips for {name}>"));
        }
    }
    Ok(rejected)
}
