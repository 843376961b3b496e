//! Defect-free target assembly inside the main array.
//!
//! Each cycle plans from the latest fluorescence image, moves atoms one at a
//! time with the steerable tweezer, loses atoms to the finite residence time
//! over the cycle duration, and takes a new image.

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::geometry::{ArrayTag, InterleavedLayout, RegionMask, SiteId};
use crate::plan::{Move, MoveKind, MovePlan};
use crate::stochastic::{
    apply_loss, detect, initial_load, LoadingModel, NoiseParams, OccupancyState, RngStream,
    TransportFailMode,
};
use crate::supercharge::{
    execute_insertion_detected, plan_supercharge, ReservoirPolicy, SuperchargeReport,
};

/// A set of main-array sites that must all hold an atom.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPattern {
    name: String,
    mask: RegionMask,
}

impl TargetPattern {
    /// Fails unless `mask` lies inside the transport operation range.
    pub fn new(name: impl Into<String>, mask: RegionMask, op_range: &RegionMask) -> Result<Self> {
        if mask.dims() != op_range.dims() || !mask.is_subset_of(op_range) {
            return Err(Error::MaskOutOfBounds(
                "target pattern must lie inside the operation range".into(),
            ));
        }
        if mask.is_empty() {
            return Err(Error::MaskOutOfBounds("target pattern is empty".into()));
        }
        Ok(Self {
            name: name.into(),
            mask,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    /// Duration of each of the two intensity ramps (pick-up and release).
    pub ramp_s: f64,
    pub speed_um_per_ms: f64,
    /// Fixed per-cycle time (imaging, computation). A calibration knob.
    pub cycle_overhead_s: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            ramp_s: 200e-6,
            speed_um_per_ms: 16.0,
            cycle_overhead_s: 0.05,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("ramp_s", self.ramp_s),
            ("speed_um_per_ms", self.speed_um_per_ms),
            ("cycle_overhead_s", self.cycle_overhead_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, "must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Planner {
    /// Minimum total travel distance (linear-sum assignment).
    #[default]
    Assignment,
    /// Each defect in index order takes the nearest remaining atom.
    Greedy,
}

/// Plans one assembly cycle from a detected image.
///
/// Defects are target sites seen empty; sources are atoms seen inside the
/// operation range but off the target. Atoms already on the target never
/// move. Moves are ordered by ascending travel distance.
pub fn plan_assembly(
    detected: &OccupancyState,
    target: &TargetPattern,
    op_range: &RegionMask,
    layout: &InterleavedLayout,
    planner: Planner,
) -> Result<MovePlan> {
    if !target.mask.is_subset_of(op_range) {
        return Err(Error::MaskOutOfBounds(
            "target pattern must lie inside the operation range".into(),
        ));
    }
    let needs: Vec<SiteId> = target
        .mask
        .sites()
        .iter()
        .copied()
        .filter(|&s| !detected.is_occupied(s))
        .collect();
    let sources: Vec<SiteId> = op_range
        .sites()
        .iter()
        .copied()
        .filter(|&s| detected.is_occupied(s) && !target.mask.contains(s))
        .collect();
    if needs.is_empty() || sources.is_empty() {
        return Ok(MovePlan::default());
    }

    let dist = |a: SiteId, b: SiteId| layout.distance_um((ArrayTag::Main, a), (ArrayTag::Main, b));

    let mut pairs: Vec<(f64, SiteId, SiteId)> = match planner {
        Planner::Assignment => {
            if needs.len() <= sources.len() {
                let cost = needs
                    .iter()
                    .map(|&n| sources.iter().map(|&s| dist(s, n)).collect())
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                let cols = assignment::solve(&cost);
                needs
                    .iter()
                    .zip(&cols)
                    .enumerate()
                    .map(|(i, (&n, &j))| (cost[i][j], n, sources[j]))
                    .collect()
            } else {
                let cost = sources
                    .iter()
                    .map(|&s| needs.iter().map(|&n| dist(s, n)).collect())
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                let cols = assignment::solve(&cost);
                sources
                    .iter()
                    .zip(&cols)
                    .enumerate()
                    .map(|(i, (&s, &j))| (cost[i][j], needs[j], s))
                    .collect()
            }
        }
        Planner::Greedy => {
            let mut free = vec![true; sources.len()];
            let mut out = Vec::new();
            for &n in &needs {
                let mut best: Option<(f64, usize)> = None;
                for (j, &s) in sources.iter().enumerate() {
                    if !free[j] {
                        continue;
                    }
                    let d = dist(s, n)?;
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, j));
                    }
                }
                let Some((d, j)) = best else { break };
                free[j] = false;
                out.push((d, n, sources[j]));
            }
            out
        }
    };

    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(MovePlan::new(
        pairs.into_iter().map(|(_, n, s)| Move::intra(s, n)).collect(),
    ))
}

/// Summed travel distance of a plan in µm.
pub fn plan_distance_um(plan: &MovePlan, layout: &InterleavedLayout) -> Result<f64> {
    plan.iter().try_fold(0.0, |acc, m| {
        let (a, b) = m.endpoints();
        Ok(acc + layout.distance_um(a, b)?)
    })
}

/// 2 × ramp + distance / speed, in seconds.
pub fn move_duration(mv: &Move, layout: &InterleavedLayout, timing: &TimingParams) -> Result<f64> {
    let (a, b) = mv.endpoints();
    let d = layout.distance_um(a, b)?;
    Ok(2.0 * timing.ramp_s + d / (timing.speed_um_per_ms * 1000.0))
}

/// Σ move durations in plan order, plus the per-cycle overhead.
pub fn plan_duration(plan: &MovePlan, layout: &InterleavedLayout, timing: &TimingParams) -> Result<f64> {
    let moves = plan
        .iter()
        .try_fold(0.0, |acc, m| Ok::<_, Error>(acc + move_duration(m, layout, timing)?))?;
    Ok(moves + timing.cycle_overhead_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// 1-based.
    pub cycle_index: usize,
    pub moves_planned: usize,
    pub moves_succeeded: usize,
    pub cycle_duration_s: f64,
    pub filling_fraction_true: f64,
    pub filling_fraction_detected: f64,
    pub defect_free_detected: bool,
}

/// Fixed inputs shared by every cycle of a run.
#[derive(Debug, Clone, Copy)]
pub struct CycleContext<'a> {
    pub layout: &'a InterleavedLayout,
    pub target: &'a TargetPattern,
    pub noise: &'a NoiseParams,
    pub timing: &'a TimingParams,
}

#[derive(Debug, Clone)]
pub struct CycleOutcome {
    pub state: OccupancyState,
    pub detected: OccupancyState,
    pub record: CycleRecord,
}

/// Executes one assembly cycle against the true occupancy.
///
/// A move whose true source is empty is a failed no-op. A successful move
/// into a truly occupied trap loses the delivered atom.
pub fn execute_cycle(
    true_state: &OccupancyState,
    plan: &MovePlan,
    ctx: CycleContext<'_>,
    cycle_index: usize,
    rng: &mut RngStream,
) -> Result<CycleOutcome> {
    plan.check_structure()?;
    if plan.iter().any(|m| m.kind() != MoveKind::Intra) {
        return Err(Error::InvalidPlan("assembly plans contain intra-array moves only".into()));
    }
    let duration = plan_duration(plan, ctx.layout, ctx.timing)?;
    let mut state = true_state.clone();
    let mut succeeded = 0;
    for m in plan {
        let src = m.source().1;
        let dst = m.dest().1;
        if !state.is_occupied(src) {
            continue;
        }
        if rng.bernoulli(ctx.noise.p_transport_intra) {
            succeeded += 1;
            state.set(src, false);
            state.set(dst, true);
        } else if ctx.noise.transport_fail_mode == TransportFailMode::Lost {
            state.set(src, false);
        }
    }
    let state = apply_loss(&state, duration, ctx.noise, rng)?;
    let detected = detect(&state, ctx.noise, rng);
    let mask = ctx.target.mask();
    let record = CycleRecord {
        cycle_index,
        moves_planned: plan.len(),
        moves_succeeded: succeeded,
        cycle_duration_s: duration,
        filling_fraction_true: state.fill_fraction(mask),
        filling_fraction_detected: detected.fill_fraction(mask),
        defect_free_detected: detected.count_in(mask) == mask.len(),
    };
    Ok(CycleOutcome {
        state,
        detected,
        record,
    })
}

#[derive(Debug, Clone)]
pub struct SuperchargeStage {
    pub region: RegionMask,
    pub reservoir: ReservoirPolicy,
}

/// A fully resolved experiment: masks built, parameters validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub layout: InterleavedLayout,
    pub main_loading: LoadingModel,
    pub secondary_loading: LoadingModel,
    pub noise: NoiseParams,
    pub timing: TimingParams,
    pub target: TargetPattern,
    pub op_range: RegionMask,
    pub planner: Planner,
    pub supercharge: Option<SuperchargeStage>,
    pub max_cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trial: usize,
    pub initial_main_atoms: usize,
    pub initial_secondary_atoms: usize,
    /// Target filling just before the first assembly cycle.
    pub initial_fill_true: f64,
    pub initial_fill_detected: f64,
    pub supercharge_report: Option<SuperchargeReport>,
    pub cycles: Vec<CycleRecord>,
    pub first_success_cycle: Option<usize>,
}

/// One complete experimental run: load, optionally supercharge, then run
/// every assembly cycle (no early stop).
pub fn run_experiment(exp: &Experiment, trial: usize, rng: &mut RngStream) -> Result<RunRecord> {
    let layout = &exp.layout;
    let noise = &exp.noise;
    let main_grid = layout.main();
    let sec_grid = layout.secondary();

    // Both arrays are lit only when the secondary one is needed.
    let factor = if exp.supercharge.is_some() { noise.crosstalk_factor } else { 1.0 };
    let mut state = initial_load(
        main_grid,
        ArrayTag::Main,
        &exp.main_loading.scaled(factor),
        &RegionMask::all(main_grid),
        rng,
    );
    let initial_main_atoms = state.count();
    let mut initial_secondary_atoms = 0;
    let mut supercharge_report = None;

    if let Some(sc) = &exp.supercharge {
        let sec = initial_load(
            sec_grid,
            ArrayTag::Secondary,
            &exp.secondary_loading.scaled(factor),
            &RegionMask::all(sec_grid),
            rng,
        );
        initial_secondary_atoms = sec.count();
        let seen_main = detect(&state, noise, rng);
        let seen_sec = detect(&sec, noise, rng);
        let plan = plan_supercharge(&seen_main, &seen_sec, layout, &sc.region, sc.reservoir)?;
        let (main_after, _, report) =
            execute_insertion_detected(&state, &sec, &plan, &sc.region, noise, rng)?;
        let duration = plan_duration(&plan, layout, &exp.timing)?;
        state = apply_loss(&main_after, duration, noise, rng)?;
        supercharge_report = Some(report);
    }

    let mut detected = detect(&state, noise, rng);
    let mask = exp.target.mask();
    let initial_fill_true = state.fill_fraction(mask);
    let initial_fill_detected = detected.fill_fraction(mask);

    let ctx = CycleContext {
        layout,
        target: &exp.target,
        noise,
        timing: &exp.timing,
    };
    let mut cycles = Vec::with_capacity(exp.max_cycles);
    for c in 1..=exp.max_cycles {
        let plan = plan_assembly(&detected, &exp.target, &exp.op_range, layout, exp.planner)?;
        let out = execute_cycle(&state, &plan, ctx, c, rng)?;
        state = out.state;
        detected = out.detected;
        cycles.push(out.record);
    }
    let first_success_cycle = cycles
        .iter()
        .find(|c| c.defect_free_detected)
        .map(|c| c.cycle_index);

    Ok(RunRecord {
        trial,
        initial_main_atoms,
        initial_secondary_atoms,
        initial_fill_true,
        initial_fill_detected,
        supercharge_report,
        cycles,
        first_success_cycle,
    })
}
