//! Subcommand implementations. Every artifact lands under the run
//! directory with the resolved config hash in its name and header.

pub mod counterfact;
pub mod ingest;
pub mod report;
pub mod train;
pub mod validate;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use carbontwin_core::dataset::Split;
use carbontwin_core::pipeline::ModelRole;
use carbontwin_core::schema::Domain;

use crate::config::RunConfig;

pub fn artifact_stem(cfg: &RunConfig, domain: Domain, role: ModelRole, vehicle: &str) -> String {
    format!(
        "{}_{}_{}-{}",
        domain.as_str(),
        role.as_str(),
        vehicle,
        cfg.hash_hex()
    )
}

/// Advisory lock on the run directory so concurrent commands cannot
/// clobber each other's checkpoints and reports. Released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(cfg: &RunConfig) -> Result<RunLock> {
        let run_dir = cfg.run_dir()?;
        ensure_dir(&run_dir)?;
        let path = run_dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(anyhow::anyhow!(
                "run directory `{}` is locked by another command (delete `{}` if that command \
                 crashed)",
                run_dir.display(),
                path.display()
            )),
            Err(e) => Err(e).with_context(|| format!("cannot create lock `{}`", path.display())),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create directory `{}`", path.display()))
}

pub fn harmonized_path(cfg: &RunConfig, profile: &str) -> Result<PathBuf> {
    Ok(cfg
        .run_dir()?
        .join("harmonized")
        .join(format!("{profile}.csv")))
}

pub fn checkpoint_path(
    cfg: &RunConfig,
    domain: Domain,
    role: ModelRole,
    vehicle: &str,
) -> Result<PathBuf> {
    Ok(cfg.run_dir()?.join("checkpoints").join(format!(
        "{}.ckpt",
        artifact_stem(cfg, domain, role, vehicle)
    )))
}

pub fn splits_path(
    cfg: &RunConfig,
    domain: Domain,
    role: ModelRole,
    vehicle: &str,
) -> Result<PathBuf> {
    Ok(cfg
        .run_dir()?
        .join("splits")
        .join(format!("{}.csv", artifact_stem(cfg, domain, role, vehicle))))
}

pub fn write_split_manifest(
    path: &Path,
    manifest: &[(String, Split)],
    provenance: &[String],
) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)
        .with_context(|| format!("cannot create `{}`", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    for line in provenance {
        writeln!(w, "# {line}")?;
    }
    for (id, split) in manifest {
        writeln!(w, "{id},{}", split.as_str())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_split_manifest(path: &Path) -> Result<Vec<(String, Split)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read split manifest `{}`", path.display()))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, split) = line
            .split_once(',')
            .with_context(|| format!("manifest line `{line}` is not `trip_id,split`"))?;
        let split = Split::parse(split.trim())
            .with_context(|| format!("unknown split `{split}` in manifest"))?;
        out.push((id.trim().to_string(), split));
    }
    Ok(out)
}
