//! `carbontwin counterfact`: EV-embedded emission stream for one
//! observed ICEV trip.

use std::io::Write;

use anyhow::{bail, Context, Result};

use carbontwin_core::pipeline::{counterfactual, load_checkpoint, ModelRole};
use carbontwin_core::report::emit_plot_series;
use carbontwin_core::schema::{read_trips, Domain};

use super::{checkpoint_path, ensure_dir, harmonized_path};
use crate::config::RunConfig;

pub fn run(cfg: &RunConfig, trip_id: &str, icev_vehicle: Option<&str>) -> Result<()> {
    let _lock = super::RunLock::acquire(cfg)?;
    let ev_vehicle = cfg.require("ev.vehicle")?.to_string();
    let icev_vehicle = icev_vehicle.unwrap_or("qx50");

    let f_path = checkpoint_path(cfg, Domain::Ev, ModelRole::Feature, &ev_vehicle)?;
    let g_path = checkpoint_path(cfg, Domain::Ev, ModelRole::Emissions, &ev_vehicle)?;
    for p in [&f_path, &g_path] {
        if !p.is_file() {
            bail!(
                "missing checkpoint `{}` (run `carbontwin train` first)",
                p.display()
            );
        }
    }
    let f = load_checkpoint(&f_path)?;
    let g = load_checkpoint(&g_path)?;

    let harmonized = harmonized_path(cfg, icev_vehicle)?;
    let trips = read_trips(&harmonized, Domain::Icev, icev_vehicle)
        .with_context(|| format!("cannot read `{}`", harmonized.display()))?;
    let Some(trip) = trips.iter().find(|t| t.trip_id() == trip_id) else {
        let known: Vec<&str> = trips.iter().map(|t| t.trip_id()).collect();
        bail!(
            "unknown trip id `{trip_id}` in `{}` (known: {})",
            harmonized.display(),
            known.join(", ")
        );
    };

    let result = counterfactual(trip, &f, &g)?;

    let reports_dir = cfg.run_dir()?.join("reports");
    ensure_dir(&reports_dir)?;
    let mut provenance = cfg.provenance();
    provenance.push(format!("trip = {trip_id}"));
    provenance.push(format!("icev_vehicle = {icev_vehicle}"));

    let hash = cfg.hash_hex();
    emit_plot_series(
        reports_dir.join(format!("counterfactual_{trip_id}-{hash}.csv")),
        "time_s",
        &result.time_s,
        &[
            ("counterfactual_gs", &result.counterfactual_rate_gs),
            ("observed_gs", &result.observed_rate_gs),
            ("gap_gs", &result.gap_gs),
        ],
        &provenance,
    )?;
    emit_plot_series(
        reports_dir.join(format!("counterfactual_actuation_{trip_id}-{hash}.csv")),
        "time_s",
        &result.time_s,
        &[
            ("pred_torque_nm", &result.pred_torque_nm),
            ("pred_throttle_pct", &result.pred_throttle_pct),
        ],
        &provenance,
    )?;

    let totals_path = reports_dir.join(format!("counterfactual_totals_{trip_id}-{hash}.txt"));
    let file = std::fs::File::create(&totals_path)?;
    let mut w = std::io::BufWriter::new(file);
    for line in &provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "samples = {}", result.time_s.len())?;
    writeln!(w, "start_index = {}", result.start)?;
    writeln!(
        w,
        "counterfactual_total_g = {}",
        result.counterfactual_total_g
    )?;
    writeln!(w, "observed_total_g = {}", result.observed_total_g)?;
    writeln!(w, "gap_total_g = {}", result.gap_total_g)?;
    w.flush()?;

    println!(
        "counterfactual for trip {trip_id}: {} samples, totals {:.1} g (embedded EV) vs {:.1} g \
         (observed), gap {:+.1} g -> {}",
        result.time_s.len(),
        result.counterfactual_total_g,
        result.observed_total_g,
        result.gap_total_g,
        totals_path.display()
    );
    Ok(())
}
