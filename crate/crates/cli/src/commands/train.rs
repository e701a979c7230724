//! `carbontwin train`: fit one (domain, role) model from harmonized data.

use std::io::Write;

use anyhow::{Context, Result};

use carbontwin_core::pipeline::{save_checkpoint, train_model, ModelRole};
use carbontwin_core::schema::{read_trips, Domain};

use super::{
    artifact_stem, checkpoint_path, ensure_dir, harmonized_path, splits_path, write_split_manifest,
};
use crate::config::RunConfig;

pub fn resolve_vehicle(cfg: &RunConfig, domain: Domain, vehicle: Option<&str>) -> Result<String> {
    match (domain, vehicle) {
        (_, Some(v)) => Ok(v.to_string()),
        (Domain::Ev, None) => Ok(cfg.require("ev.vehicle")?.to_string()),
        (Domain::Icev, None) => {
            anyhow::bail!(
                "pass --vehicle for the icev domain (qx50, qx50-strict, blazer, pacifica)"
            )
        }
    }
}

pub fn run(cfg: &RunConfig, domain: Domain, role: ModelRole, vehicle: Option<&str>) -> Result<()> {
    let _lock = super::RunLock::acquire(cfg)?;
    let vehicle = resolve_vehicle(cfg, domain, vehicle)?;
    let harmonized = harmonized_path(cfg, &vehicle)?;
    let trips = read_trips(&harmonized, domain, &vehicle).with_context(|| {
        format!(
            "cannot read harmonized data `{}` (run `carbontwin ingest` first)",
            harmonized.display()
        )
    })?;

    let spec = cfg.fit_spec(domain)?;
    let outcome = train_model(role, domain, &trips, &spec)?;

    let run_dir = cfg.run_dir()?;
    ensure_dir(&run_dir.join("checkpoints"))?;
    ensure_dir(&run_dir.join("splits"))?;
    ensure_dir(&run_dir.join("loss_curves"))?;

    let provenance = cfg.provenance();
    let ckpt = checkpoint_path(cfg, domain, role, &vehicle)?;
    save_checkpoint(&outcome.model, &ckpt, &provenance)?;
    write_split_manifest(
        &splits_path(cfg, domain, role, &vehicle)?,
        &outcome.manifest,
        &provenance,
    )?;

    let curve_path = run_dir.join("loss_curves").join(format!(
        "{}.csv",
        artifact_stem(cfg, domain, role, &vehicle)
    ));
    let file = std::fs::File::create(&curve_path)?;
    let mut w = std::io::BufWriter::new(file);
    for line in &provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "epoch,train_mse,val_mse")?;
    for e in &outcome.history {
        let val = e.val_mse.map(|v| format!("{v}")).unwrap_or_default();
        writeln!(w, "{},{},{}", e.epoch, e.train_mse, val)?;
    }
    w.flush()?;

    let units: &[&str] = match role {
        ModelRole::Emissions => &["g/s"],
        ModelRole::Feature => &["Nm", "%"],
    };
    let maes: Vec<String> = outcome
        .val_mae
        .iter()
        .zip(units)
        .map(|(m, u)| format!("{m:.4} {u}"))
        .collect();
    println!(
        "trained {} {} on {}: validation MAE [{}] -> {}",
        domain.as_str(),
        role.as_str(),
        vehicle,
        maes.join(", "),
        ckpt.display()
    );
    if !outcome.skipped_trips.is_empty() {
        eprintln!("skipped short trips: {}", outcome.skipped_trips.join(", "));
    }
    Ok(())
}
