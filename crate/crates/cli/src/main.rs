use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dualarray::montecarlo::{load_statistics, simulate, CountSummary};
use dualarray::report::parse_curves_csv;
use dualarray::{ExperimentConfig, SuperchargeMc};

mod io;
mod plot;

#[derive(Parser)]
#[command(name = "dualarray", version, about = "Supercharged atom-array assembly simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full load → supercharge → assembly pipeline over many trials.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean region filling after one supercharge cycle.
    SuperchargeMc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Atom-number statistics of the initial loading.
    LoadStats {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write the full statistics as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Plot cumulative success and filling curves from one or more result directories.
    Plot {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Curve labels, in the order of --in. Defaults to directory names.
        #[arg(long = "label")]
        labels: Vec<String>,
    },
    /// Check a config file and exit.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the default config.
    DumpConfig,
}

enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    ExperimentConfig::from_json_str(&text).map_err(|e| {
        let msg = match e {
            dualarray::Error::Config(m) => m,
            other => other.to_string(),
        };
        Failure::Config(format!("{}: {msg}", path.display()))
    })
}

fn revalidate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            config,
            seed,
            trials,
            workers,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.run.master_seed = s;
            }
            if let Some(t) = trials {
                cfg.run.trials = t;
            }
            if let Some(w) = workers {
                cfg.run.workers = w;
            }
            revalidate(&cfg)?;
            let total = cfg.run.trials;
            let step = (total / 20).max(1);
            let progress = |done: usize| {
                if done.is_multiple_of(step) || done == total {
                    eprint!("\rtrials {done}/{total}");
                }
            };
            let (records, stats) = simulate(&cfg, &progress).context("simulation failed")?;
            eprintln!();
            io::emit_results(&out, &cfg, &stats, &records)?;
            let last = stats.cumulative_success.last();
            println!(
                "{} trials, {} cycles: initial fill {:.4}, final cumulative success {}",
                stats.trials,
                stats.max_cycles,
                stats.initial_fill.mean,
                last.map_or("n/a".to_string(), |p| format!(
                    "{:.4} [{:.4}, {:.4}]",
                    p.p, p.ci_low, p.ci_high
                )),
            );
            println!("results written to {}", out.display());
        }
        Command::SuperchargeMc {
            config,
            seed,
            trials,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.run.master_seed = s;
            }
            if let Some(t) = trials {
                cfg.run.trials = t;
            }
            revalidate(&cfg)?;
            let mc = SuperchargeMc::from_config(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
            let res = mc.run().context("supercharge Monte Carlo failed")?;
            println!(
                "region {} sites, {} trials",
                mc.region.len(),
                res.trials
            );
            println!(
                "initial fill {:.4} ± {:.4}",
                res.initial_fill.mean, res.initial_fill.std_err
            );
            println!(
                "planned insertions {:.2} (matching bound {:.2}, heuristic optimal in {:.1}% of trials)",
                res.planned.mean,
                res.oracle.mean,
                100.0 * res.optimal_rate
            );
            println!("mean fill {:.4} ± {:.4}", res.fill.mean, res.fill.std_err);
        }
        Command::LoadStats {
            config,
            trials,
            json,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(t) = trials {
                cfg.run.trials = t;
            }
            revalidate(&cfg)?;
            let stats = load_statistics(&cfg).context("loading statistics failed")?;
            println!(
                "{} trials; sites of sufficient depth: main {}, secondary {}, combined {}",
                stats.trials,
                stats.sufficient_sites_main,
                stats.sufficient_sites_secondary,
                stats.sufficient_sites_main + stats.sufficient_sites_secondary
            );
            let row = |name: &str, c: &CountSummary| {
                println!(
                    "{name:<20} mean {:8.1} sd {:6.1}   (binomial {:8.1} ± {:5.1})",
                    c.sampled.mean, c.sampled_std_dev, c.expected_mean, c.expected_std_dev
                );
            };
            row("main alone", &stats.main_alone);
            row("secondary alone", &stats.secondary_alone);
            row("main parallel", &stats.main_parallel);
            row("secondary parallel", &stats.secondary_parallel);
            row("combined parallel", &stats.combined_parallel);
            println!();
            print!("{}", plot::text_histogram(&stats.combined_parallel.histogram, 40, 16));
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&stats).context("serializing statistics")?;
                io::write_atomic(&path, text.as_bytes())?;
            }
        }
        Command::Plot {
            inputs,
            out,
            labels,
        } => {
            let mut series = Vec::new();
            for (i, dir) in inputs.iter().enumerate() {
                let path = dir.join("curves.csv");
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let rows = parse_curves_csv(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                let label = labels.get(i).cloned().unwrap_or_else(|| {
                    dir.file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_else(|| dir.display().to_string())
                });
                series.push(plot::Series { label, rows });
            }
            let svg = plot::render_svg(&series);
            io::write_atomic(&out, svg.as_bytes())?;
            println!("wrote {}", out.display());
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "{}: ok (target {}, supercharge {}, config sha256 {})",
                config.display(),
                cfg.target.name,
                if cfg.supercharge.enabled { "on" } else { "off" },
                cfg.digest().map_err(|e| Failure::Runtime(e.into()))?
            );
        }
        Command::DumpConfig => {
            let text = ExperimentConfig::default()
                .to_json_pretty()
                .context("serializing default config")?;
            println!("{text}");
        }
    }
    Ok(())
}
