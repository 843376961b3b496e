//! Trial orchestration and aggregate statistics.
//!
//! Trial `t` always draws from stream `(master_seed, t)` and results are
//! reduced in trial order, so statistics do not depend on the worker count.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::assembly::{run_experiment, Experiment, RunRecord};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::{ArrayTag, RegionMask, TrapArrayParams};
use crate::stochastic::{initial_load, LoadingModel, RngStream};

pub const Z_95: f64 = 1.96;

/// Runs `f(0..trials)` and returns results in trial order.
pub(crate) fn map_trials<T, F>(trials: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers == 1 {
            return (0..trials).map(f).collect();
        }
        let run = || (0..trials).into_par_iter().map(&f).collect::<Vec<T>>();
        if workers == 0 {
            return run();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => (0..trials).map(f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        (0..trials).map(f).collect()
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
}

impl MeanEstimate {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std_err: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { n, mean, std_err }
    }

    pub fn std_dev(&self) -> f64 {
        self.std_err * (self.n as f64).sqrt()
    }
}

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(successes: usize, trials: usize) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z_95)?;
        Ok(Self {
            successes,
            trials,
            p: successes as f64 / trials as f64,
            ci_low,
            ci_high,
        })
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("trials", "Wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(Error::invalid("successes", "cannot exceed trials"));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let margin = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let mut low = ((center - margin) / denom).clamp(0.0, 1.0);
    let mut high = ((center + margin) / denom).clamp(0.0, 1.0);
    if successes == 0 {
        low = 0.0;
    }
    if successes == trials {
        high = 1.0;
    }
    Ok((low, high))
}

/// Fraction of runs that were defect-free at least once by cycle n, n = 1..=max_cycles.
pub fn cumulative_success_curve(records: &[RunRecord]) -> Result<Vec<Proportion>> {
    let first = records.first().ok_or(Error::EmptyRecords)?;
    let cycles = first.cycles.len();
    if records.iter().any(|r| r.cycles.len() != cycles) {
        return Err(Error::invalid("records", "runs have different cycle counts"));
    }
    let mut first_hits = vec![0usize; cycles + 1];
    for r in records {
        if let Some(c) = r.first_success_cycle {
            first_hits[c] += 1;
        }
    }
    let mut acc = 0;
    (1..=cycles)
        .map(|n| {
            acc += first_hits[n];
            Proportion::new(acc, records.len())
        })
        .collect()
}

/// Analytic mean and standard deviation of the number of loaded atoms.
pub fn expected_atom_count(model: &LoadingModel, grid: &TrapArrayParams, mask: &RegionMask) -> (f64, f64) {
    let (mean, var) = mask.sites().iter().fold((0.0, 0.0), |(m, v), &s| {
        let p = model.site_probability(grid, s);
        (m + p, v + p * (1.0 - p))
    });
    (mean, var.sqrt())
}

/// Frequency of each observed count, ascending.
pub type Histogram = Vec<(usize, u64)>;

fn histogram(values: impl IntoIterator<Item = usize>) -> Histogram {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0u64) += 1;
    }
    h.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomCountHistograms {
    pub main: Histogram,
    pub secondary: Histogram,
    pub combined: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperchargeSummary {
    pub fill_after: MeanEstimate,
    pub planned: MeanEstimate,
    pub inserted: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatistics {
    pub trials: usize,
    pub max_cycles: usize,
    pub cumulative_success: Vec<Proportion>,
    /// Detected target filling after each cycle.
    pub mean_fill: Vec<MeanEstimate>,
    pub mean_fill_true: Vec<MeanEstimate>,
    /// Target filling before the first cycle (after supercharging, if any).
    pub initial_fill: MeanEstimate,
    pub initial_fill_true: MeanEstimate,
    pub mean_cycle_duration_s: f64,
    pub mean_duration_by_cycle_s: Vec<f64>,
    pub atom_count_histogram: AtomCountHistograms,
    pub supercharge: Option<SuperchargeSummary>,
}

impl TrialStatistics {
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        let cumulative_success = cumulative_success_curve(records)?;
        let max_cycles = cumulative_success.len();
        let per_cycle = |f: &dyn Fn(&RunRecord, usize) -> f64| -> Vec<MeanEstimate> {
            (0..max_cycles)
                .map(|c| MeanEstimate::from_values(records.iter().map(|r| f(r, c))))
                .collect()
        };
        let mean_fill = per_cycle(&|r, c| r.cycles[c].filling_fraction_detected);
        let mean_fill_true = per_cycle(&|r, c| r.cycles[c].filling_fraction_true);
        let mean_duration_by_cycle_s = per_cycle(&|r, c| r.cycles[c].cycle_duration_s)
            .into_iter()
            .map(|m| m.mean)
            .collect();
        let all_durations: Vec<f64> = records
            .iter()
            .flat_map(|r| r.cycles.iter().map(|c| c.cycle_duration_s))
            .collect();
        let mean_cycle_duration_s = if all_durations.is_empty() {
            0.0
        } else {
            all_durations.iter().sum::<f64>() / all_durations.len() as f64
        };

        let reports: Vec<_> = records.iter().filter_map(|r| r.supercharge_report.as_ref()).collect();
        let supercharge = (!reports.is_empty()).then(|| SuperchargeSummary {
            fill_after: MeanEstimate::from_values(reports.iter().map(|r| r.fill_fraction_after)),
            planned: MeanEstimate::from_values(reports.iter().map(|r| r.planned as f64)),
            inserted: MeanEstimate::from_values(reports.iter().map(|r| r.inserted as f64)),
        });

        Ok(Self {
            trials: records.len(),
            max_cycles,
            cumulative_success,
            mean_fill,
            mean_fill_true,
            initial_fill: MeanEstimate::from_values(records.iter().map(|r| r.initial_fill_detected)),
            initial_fill_true: MeanEstimate::from_values(records.iter().map(|r| r.initial_fill_true)),
            mean_cycle_duration_s,
            mean_duration_by_cycle_s,
            atom_count_histogram: AtomCountHistograms {
                main: histogram(records.iter().map(|r| r.initial_main_atoms)),
                secondary: histogram(records.iter().map(|r| r.initial_secondary_atoms)),
                combined: histogram(
                    records.iter().map(|r| r.initial_main_atoms + r.initial_secondary_atoms),
                ),
            },
            supercharge,
        })
    }
}

/// Runs trials `0..trials` of an experiment. `progress` receives the number
/// of completed trials after each one finishes.
pub fn run_records(
    exp: &Experiment,
    trials: usize,
    master_seed: u64,
    workers: usize,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<Vec<RunRecord>> {
    let done = AtomicUsize::new(0);
    map_trials(trials, workers, |t| {
        let mut rng = RngStream::new(master_seed, t as u64);
        let rec = run_experiment(exp, t, &mut rng);
        progress(done.fetch_add(1, Ordering::Relaxed) + 1);
        rec
    })
    .into_iter()
    .collect()
}

/// Full pipeline for a config: every run record plus the aggregate statistics.
pub fn simulate(
    config: &ExperimentConfig,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<(Vec<RunRecord>, TrialStatistics)> {
    let exp = config.resolve()?;
    let records = run_records(
        &exp,
        config.run.trials,
        config.run.master_seed,
        config.run.workers,
        progress,
    )?;
    let stats = TrialStatistics::from_records(&records)?;
    Ok((records, stats))
}

pub fn run_trials(config: &ExperimentConfig, progress: &(dyn Fn(usize) + Sync)) -> Result<TrialStatistics> {
    simulate(config, progress).map(|(_, s)| s)
}

/// Sampled and analytic atom numbers for one array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub sampled: MeanEstimate,
    pub sampled_std_dev: f64,
    pub expected_mean: f64,
    pub expected_std_dev: f64,
    pub histogram: Histogram,
}

impl CountSummary {
    fn new(counts: &[usize], expected: (f64, f64)) -> Self {
        let sampled = MeanEstimate::from_values(counts.iter().map(|&c| c as f64));
        Self {
            sampled,
            sampled_std_dev: sampled.std_dev(),
            expected_mean: expected.0,
            expected_std_dev: expected.1,
            histogram: histogram(counts.iter().copied()),
        }
    }
}

/// Loading statistics with each array operated alone and both in parallel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadStatistics {
    pub trials: usize,
    pub sufficient_sites_main: usize,
    pub sufficient_sites_secondary: usize,
    pub main_alone: CountSummary,
    pub secondary_alone: CountSummary,
    pub main_parallel: CountSummary,
    pub secondary_parallel: CountSummary,
    pub combined_parallel: CountSummary,
}

pub fn load_statistics(config: &ExperimentConfig) -> Result<LoadStatistics> {
    let exp = config.resolve()?;
    let mg = exp.layout.main();
    let sg = exp.layout.secondary();
    let all_m = RegionMask::all(mg);
    let all_s = RegionMask::all(sg);
    let factor = exp.noise.crosstalk_factor;
    let models = [
        exp.main_loading.clone(),
        exp.secondary_loading.clone(),
        exp.main_loading.scaled(factor),
        exp.secondary_loading.scaled(factor),
    ];
    let counts: Vec<[usize; 4]> = map_trials(config.run.trials, config.run.workers, |t| {
        let mut rng = RngStream::new(config.run.master_seed, t as u64);
        let mut out = [0; 4];
        for (i, model) in models.iter().enumerate() {
            let (grid, tag, mask) = if i % 2 == 0 {
                (mg, ArrayTag::Main, &all_m)
            } else {
                (sg, ArrayTag::Secondary, &all_s)
            };
            out[i] = initial_load(grid, tag, model, mask, &mut rng).count();
        }
        out
    });
    let column = |i: usize| counts.iter().map(|c| c[i]).collect::<Vec<_>>();
    let expected: Vec<(f64, f64)> = models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if i % 2 == 0 {
                expected_atom_count(m, mg, &all_m)
            } else {
                expected_atom_count(m, sg, &all_s)
            }
        })
        .collect();
    let combined: Vec<usize> = counts.iter().map(|c| c[2] + c[3]).collect();
    let combined_expected = (
        expected[2].0 + expected[3].0,
        (expected[2].1.powi(2) + expected[3].1.powi(2)).sqrt(),
    );
    let min_ratio = config.layout.min_depth_ratio;
    Ok(LoadStatistics {
        trials: config.run.trials,
        sufficient_sites_main: mg.sufficient_sites(min_ratio)?.len(),
        sufficient_sites_secondary: sg.sufficient_sites(min_ratio)?.len(),
        main_alone: CountSummary::new(&column(0), expected[0]),
        secondary_alone: CountSummary::new(&column(1), expected[1]),
        main_parallel: CountSummary::new(&column(2), expected[2]),
        secondary_parallel: CountSummary::new(&column(3), expected[3]),
        combined_parallel: CountSummary::new(&combined, combined_expected),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CycleRecord;

    /// Wilson bounds are where the score statistic |p̂ − p| / √(p(1−p)/n)
    /// equals z; find them by bisection.
    fn score_inversion(k: usize, n: usize, z: f64) -> (f64, f64) {
        let phat = k as f64 / n as f64;
        let excess = |p: f64| (phat - p).powi(2) - z * z * p * (1.0 - p) / n as f64;
        let bisect = |mut lo: f64, mut hi: f64| {
            // excess(lo) > 0 ≥ excess(hi) or the reverse; keep the sign change bracketed.
            let s_lo = excess(lo) > 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (excess(mid) > 0.0) == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let low = if k == 0 { 0.0 } else { bisect(0.0, phat) };
        let high = if k == n { 1.0 } else { bisect(1.0, phat) };
        (low, high)
    }

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(24, 100, Z_95).unwrap();
        assert!((lo - 0.16691211265459965).abs() < 1e-12, "{lo}");
        assert!((hi - 0.3323251872329213).abs() < 1e-12, "{hi}");
        assert_eq!(wilson_interval(0, 40, Z_95).unwrap().0, 0.0);
        assert_eq!(wilson_interval(40, 40, Z_95).unwrap().1, 1.0);
        assert!(wilson_interval(0, 0, Z_95).is_err());
        assert!(wilson_interval(5, 4, Z_95).is_err());
    }

    #[test]
    fn wilson_matches_score_test_inversion() {
        for n in [1, 2, 7, 30, 100, 2000] {
            for k in 0..=n {
                if n > 100 && k % 97 != 0 {
                    continue;
                }
                let (lo, hi) = wilson_interval(k, n, Z_95).unwrap();
                let (olo, ohi) = score_inversion(k, n, Z_95);
                assert!((lo - olo).abs() < 1e-9 && (hi - ohi).abs() < 1e-9, "{k}/{n}");
                let p = k as f64 / n as f64;
                assert!(lo <= p && p <= hi);
            }
        }
    }

    fn synthetic(first: Option<usize>, cycles: usize) -> RunRecord {
        RunRecord {
            trial: 0,
            initial_main_atoms: 0,
            initial_secondary_atoms: 0,
            initial_fill_true: 0.0,
            initial_fill_detected: 0.0,
            supercharge_report: None,
            cycles: (1..=cycles)
                .map(|i| CycleRecord {
                    cycle_index: i,
                    moves_planned: 0,
                    moves_succeeded: 0,
                    cycle_duration_s: 0.05,
                    filling_fraction_true: 0.0,
                    filling_fraction_detected: 0.0,
                    defect_free_detected: first.is_some_and(|f| i >= f),
                })
                .collect(),
            first_success_cycle: first,
        }
    }

    #[test]
    fn cumulative_curve_hand_count() {
        let recs: Vec<_> = [Some(1), Some(2), None, None].into_iter().map(|f| synthetic(f, 4)).collect();
        let ps: Vec<f64> = cumulative_success_curve(&recs).unwrap().iter().map(|p| p.p).collect();
        assert_eq!(ps, vec![0.25, 0.5, 0.5, 0.5]);

        let all: Vec<_> = (0..5).map(|_| synthetic(Some(1), 3)).collect();
        assert!(cumulative_success_curve(&all).unwrap().iter().all(|p| p.p == 1.0));
        let none: Vec<_> = (0..5).map(|_| synthetic(None, 3)).collect();
        assert!(cumulative_success_curve(&none).unwrap().iter().all(|p| p.p == 0.0));

        assert!(matches!(cumulative_success_curve(&[]), Err(Error::EmptyRecords)));
        assert!(cumulative_success_curve(&[synthetic(None, 3), synthetic(None, 4)]).is_err());
    }

    #[test]
    fn binomial_moments() {
        let g = TrapArrayParams::square(10);
        assert_eq!(expected_atom_count(&LoadingModel::uniform(1.0), &g, &RegionMask::all(&g)), (100.0, 0.0));
        let g48 = TrapArrayParams::default();
        let (m, s) = expected_atom_count(&LoadingModel::uniform(0.5), &g48, &RegionMask::square(&g48, 26).unwrap());
        assert_eq!((m, s), (338.0, 13.0));
        let (m, _) = expected_atom_count(&LoadingModel::plateau(0.4, 22.0), &g48, &RegionMask::all(&g48));
        assert!((m - 0.4 * 1528.0).abs() < 1e-9);
    }

    #[test]
    fn mean_estimate() {
        let m = MeanEstimate::from_values([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanEstimate::from_values([7.0]).std_err, 0.0);
    }
}
