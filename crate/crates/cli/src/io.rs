use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dualarray::report::{render_curves_csv, render_runs_jsonl, render_stats_json};
use dualarray::{ExperimentConfig, RunRecord, TrialStatistics};

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))?;
    // Temp files are created owner-only; results should read like any other file.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .with_context(|| format!("setting permissions on {}", path.display()))?;
    }
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Writes `stats.json`, `curves.csv` and `runs.jsonl` into `dir`.
pub fn emit_results(
    dir: &Path,
    config: &ExperimentConfig,
    stats: &TrialStatistics,
    records: &[RunRecord],
) -> Result<()> {
    if records.is_empty() || stats.trials == 0 {
        bail!("refusing to write results: no trials were run");
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join("stats.json"), render_stats_json(config, stats)?.as_bytes())?;
    write_atomic(&dir.join("curves.csv"), render_curves_csv(config, stats)?.as_bytes())?;
    write_atomic(&dir.join("runs.jsonl"), render_runs_jsonl(config, records)?.as_bytes())?;
    Ok(())
}
