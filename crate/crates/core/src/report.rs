//! Rendering of result files.
//!
//! * `stats.json`: provenance plus the full [`TrialStatistics`].
//! * `curves.csv`: one `#` provenance line, then
//!   `cycle,cum_success,ci_low,ci_high,mean_fill,se_fill`.
//! * `runs.jsonl`: one run record per line, each tagged with seed and config digest.
//!
//! Rendering is a pure function of its inputs so identical runs give
//! byte-identical files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assembly::RunRecord;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::montecarlo::TrialStatistics;

pub const CURVES_HEADER: &str = "cycle,cum_success,ci_low,ci_high,mean_fill,se_fill";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDocument {
    pub format: String,
    pub master_seed: u64,
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub statistics: TrialStatistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLine {
    pub master_seed: u64,
    pub config_digest: String,
    #[serde(flatten)]
    pub record: RunRecord,
}

pub fn render_stats_json(config: &ExperimentConfig, stats: &TrialStatistics) -> Result<String> {
    let doc = StatsDocument {
        format: "dualarray-stats/1".into(),
        master_seed: config.run.master_seed,
        config_digest: config.digest()?,
        config: config.provenance(),
        statistics: stats.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn render_curves_csv(config: &ExperimentConfig, stats: &TrialStatistics) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# dualarray curves master_seed={} config_sha256={} trials={}",
        config.run.master_seed,
        config.digest()?,
        stats.trials
    );
    s.push_str(CURVES_HEADER);
    s.push('\n');
    for (i, (p, f)) in stats.cumulative_success.iter().zip(&stats.mean_fill).enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            i + 1,
            p.p,
            p.ci_low,
            p.ci_high,
            f.mean,
            f.std_err
        );
    }
    Ok(s)
}

pub fn render_runs_jsonl(config: &ExperimentConfig, records: &[RunRecord]) -> Result<String> {
    let digest = config.digest()?;
    let mut s = String::new();
    for r in records {
        let line = RunLine {
            master_seed: config.run.master_seed,
            config_digest: digest.clone(),
            record: r.clone(),
        };
        s.push_str(&serde_json::to_string(&line)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn parse_runs_jsonl(text: &str) -> Result<Vec<RunLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Config(format!("runs.jsonl line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub cycle: usize,
    pub cum_success: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_fill: f64,
    pub se_fill: f64,
}

pub fn parse_curves_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CURVES_HEADER => {}
        _ => return Err(Error::Config(format!("curves.csv must start with `{CURVES_HEADER}`"))),
    }
    lines
        .map(|(i, l)| {
            let bad = || Error::Config(format!("curves.csv line {}: malformed row", i + 1));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |k: usize| f[k].trim().parse::<f64>().map_err(|_| bad());
            Ok(CurveRow {
                cycle: f[0].trim().parse().map_err(|_| bad())?,
                cum_success: num(1)?,
                ci_low: num(2)?,
                ci_high: num(3)?,
                mean_fill: num(4)?,
                se_fill: num(5)?,
            })
        })
        .collect()
}
