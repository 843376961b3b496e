//! Supercharging: one cycle of inserting reservoir atoms from the secondary
//! array into defects of the main array, after which the secondary array is
//! switched off.
//!
//! The planner walks defects in trap-index order. It first makes every
//! unambiguous assignment (a defect with exactly one remaining reservoir
//! candidate), repeating until none is left, then gives each remaining
//! defect its lowest-indexed free reservoir neighbour. An exact maximum
//! matching over the same candidate graph bounds what any planner could do.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayTag, InterleavedLayout, RegionMask, SiteId};
use crate::matching::matching_size;
use crate::montecarlo::{map_trials, MeanEstimate};
use crate::plan::{Move, MovePlan, MoveKind};
use crate::stochastic::{
    initial_load, LoadingModel, NoiseParams, OccupancyState, RngStream, TransportFailMode,
};

/// Which secondary sites may feed the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReservoirPolicy {
    /// Only secondary sites lying inside the region, i.e. whose main-array
    /// neighbours all belong to it.
    #[default]
    Interior,
    /// Any secondary site adjacent to a defect.
    Adjacent,
}

/// Defects in a region and, for each, its occupied candidate reservoir sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectGraph {
    defects: Vec<SiteId>,
    candidates: Vec<Vec<SiteId>>,
}

impl DefectGraph {
    /// Builds a graph from explicit data. Defects are sorted ascending and
    /// each candidate list is sorted and deduplicated.
    pub fn new(mut entries: Vec<(SiteId, Vec<SiteId>)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let (defects, candidates) = entries
            .into_iter()
            .map(|(d, mut c)| {
                c.sort();
                c.dedup();
                (d, c)
            })
            .unzip();
        Self { defects, candidates }
    }

    pub fn from_occupancy(
        main: &OccupancyState,
        secondary: &OccupancyState,
        layout: &InterleavedLayout,
        region: &RegionMask,
        policy: ReservoirPolicy,
    ) -> Result<Self> {
        if main.array() != ArrayTag::Main || secondary.array() != ArrayTag::Secondary {
            return Err(Error::InvalidPlan("occupancy states passed for the wrong arrays".into()));
        }
        if !region.fits(layout.main()) {
            return Err(Error::MaskOutOfBounds(
                "supercharge region must be a mask on the main array".into(),
            ));
        }
        if main.len() != layout.main().len() || secondary.len() != layout.secondary().len() {
            return Err(Error::InvalidPlan("occupancy length does not match layout".into()));
        }
        let eligible = |s: SiteId| -> bool {
            secondary.is_occupied(s)
                && match policy {
                    ReservoirPolicy::Adjacent => true,
                    ReservoirPolicy::Interior => layout
                        .main_neighbors(s)
                        .map(|ms| ms.iter().all(|&m| region.contains(m)))
                        .unwrap_or(false),
                }
        };
        let mut defects = Vec::new();
        let mut candidates = Vec::new();
        for &d in region.sites() {
            if main.is_occupied(d) {
                continue;
            }
            defects.push(d);
            candidates.push(
                layout
                    .reservoir_neighbors(d)?
                    .iter()
                    .copied()
                    .filter(|&s| eligible(s))
                    .collect(),
            );
        }
        Ok(Self { defects, candidates })
    }

    pub fn defects(&self) -> &[SiteId] {
        &self.defects
    }

    pub fn candidates(&self, i: usize) -> &[SiteId] {
        &self.candidates[i]
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    /// The trivial-then-fallback heuristic. Returns (reservoir, defect)
    /// pairs in assignment order.
    pub fn assign_heuristic(&self) -> Vec<(SiteId, SiteId)> {
        let mut used: HashSet<SiteId> = HashSet::new();
        let mut open: Vec<usize> = (0..self.defects.len()).collect();
        let mut out = Vec::new();

        loop {
            let mut progressed = false;
            open.retain(|&i| {
                let mut free = self.candidates[i].iter().filter(|s| !used.contains(s));
                match (free.next(), free.next()) {
                    (Some(&only), None) => {
                        used.insert(only);
                        out.push((only, self.defects[i]));
                        progressed = true;
                        false
                    }
                    _ => true,
                }
            });
            if !progressed {
                break;
            }
        }

        for i in open {
            if let Some(&s) = self.candidates[i].iter().find(|s| !used.contains(s)) {
                used.insert(s);
                out.push((s, self.defects[i]));
            }
        }
        out
    }

    /// Size of a maximum matching between defects and candidate reservoir sites.
    pub fn max_matching(&self) -> usize {
        let mut dense: HashMap<SiteId, usize> = HashMap::new();
        let adj: Vec<Vec<usize>> = self
            .candidates
            .iter()
            .map(|cs| {
                cs.iter()
                    .map(|s| {
                        let next = dense.len();
                        *dense.entry(*s).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        matching_size(&adj, dense.len())
    }

    pub fn to_plan(assignments: &[(SiteId, SiteId)]) -> MovePlan {
        MovePlan::new(
            assignments
                .iter()
                .map(|&(s, d)| Move::insertion(s, d))
                .collect(),
        )
    }
}

/// Plans one insertion cycle for the defects of `region`.
pub fn plan_supercharge(
    main: &OccupancyState,
    secondary: &OccupancyState,
    layout: &InterleavedLayout,
    region: &RegionMask,
    policy: ReservoirPolicy,
) -> Result<MovePlan> {
    let graph = DefectGraph::from_occupancy(main, secondary, layout, region, policy)?;
    Ok(DefectGraph::to_plan(&graph.assign_heuristic()))
}

/// Upper bound on the number of defects any one-cycle insertion plan can fill.
pub fn max_matching_oracle(
    main: &OccupancyState,
    secondary: &OccupancyState,
    layout: &InterleavedLayout,
    region: &RegionMask,
    policy: ReservoirPolicy,
) -> Result<usize> {
    Ok(DefectGraph::from_occupancy(main, secondary, layout, region, policy)?.max_matching())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperchargeReport {
    pub defects_before: usize,
    pub planned: usize,
    pub inserted: usize,
    pub defects_after: usize,
    pub fill_fraction_after: f64,
    /// Reservoir atoms still trapped when the secondary array was switched off.
    pub discarded: usize,
}

/// Executes an insertion plan that must be consistent with the true states.
///
/// Returns the new main state, the (cleared) secondary state and a report.
pub fn execute_insertion(
    main: &OccupancyState,
    secondary: &OccupancyState,
    plan: &MovePlan,
    region: &RegionMask,
    noise: &NoiseParams,
    rng: &mut RngStream,
) -> Result<(OccupancyState, OccupancyState, SuperchargeReport)> {
    plan.check_against(main, Some(secondary))?;
    run_insertion(main, secondary, plan, region, noise, rng)
}

/// Executes an insertion plan computed from detected images. Moves whose
/// true source is empty do nothing; an atom delivered to a trap that is
/// truly occupied is lost (blockade).
pub fn execute_insertion_detected(
    main: &OccupancyState,
    secondary: &OccupancyState,
    plan: &MovePlan,
    region: &RegionMask,
    noise: &NoiseParams,
    rng: &mut RngStream,
) -> Result<(OccupancyState, OccupancyState, SuperchargeReport)> {
    plan.check_structure()?;
    run_insertion(main, secondary, plan, region, noise, rng)
}

fn run_insertion(
    main: &OccupancyState,
    secondary: &OccupancyState,
    plan: &MovePlan,
    region: &RegionMask,
    noise: &NoiseParams,
    rng: &mut RngStream,
) -> Result<(OccupancyState, OccupancyState, SuperchargeReport)> {
    if plan.iter().any(|m| m.kind() != MoveKind::Insertion) {
        return Err(Error::InvalidPlan("supercharge plans contain insertion moves only".into()));
    }
    let defects_before = region.len() - main.count_in(region);
    let mut main = main.clone();
    let mut sec = secondary.clone();
    let mut inserted = 0;

    for m in plan {
        let src = m.source().1;
        let dst = m.dest().1;
        if !sec.is_occupied(src) {
            continue;
        }
        if rng.bernoulli(noise.p_insertion) {
            sec.set(src, false);
            if !main.is_occupied(dst) {
                main.set(dst, true);
                if region.contains(dst) {
                    inserted += 1;
                }
            }
        } else if noise.transport_fail_mode == TransportFailMode::Lost {
            sec.set(src, false);
        }
    }

    let discarded = sec.count();
    sec.clear();
    let defects_after = region.len() - main.count_in(region);
    let report = SuperchargeReport {
        defects_before,
        planned: plan.len(),
        inserted,
        defects_after,
        fill_fraction_after: main.fill_fraction(region),
        discarded,
    };
    Ok((main, sec, report))
}

/// Monte Carlo estimate of region filling after one supercharge cycle,
/// with loading probabilities taken as the effective combined-array values.
#[derive(Debug, Clone)]
pub struct SuperchargeMc {
    pub layout: InterleavedLayout,
    pub main_loading: LoadingModel,
    pub secondary_loading: LoadingModel,
    pub region: RegionMask,
    pub noise: NoiseParams,
    pub reservoir: ReservoirPolicy,
    pub trials: usize,
    pub master_seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperchargeMcResult {
    pub trials: usize,
    pub fill: MeanEstimate,
    pub initial_fill: MeanEstimate,
    pub planned: MeanEstimate,
    pub oracle: MeanEstimate,
    /// Fraction of trials where the heuristic plan reached the matching bound.
    pub optimal_rate: f64,
}

struct McSample {
    fill: f64,
    initial: f64,
    planned: usize,
    oracle: usize,
}

impl SuperchargeMc {
    /// Takes layout, loading, noise, region, trials and seed from a config.
    /// Loading probabilities are used as given; no crosstalk scaling.
    pub fn from_config(config: &crate::config::ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout.build()?;
        let region = config.supercharge.region.build(layout.main())?;
        Ok(Self {
            layout,
            main_loading: config.loading.main.clone(),
            secondary_loading: config.loading.secondary.clone(),
            region,
            noise: config.noise.clone(),
            reservoir: config.supercharge.reservoir,
            trials: config.run.trials,
            master_seed: config.run.master_seed,
            workers: config.run.workers,
        })
    }

    pub fn run(&self) -> Result<SuperchargeMcResult> {
        self.main_loading.validate()?;
        self.secondary_loading.validate()?;
        self.noise.validate()?;
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        let samples = map_trials(self.trials, self.workers, |t| self.trial(t))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let col = |f: &dyn Fn(&McSample) -> f64| -> MeanEstimate {
            MeanEstimate::from_values(samples.iter().map(f))
        };
        let optimal = samples.iter().filter(|s| s.planned == s.oracle).count();
        Ok(SuperchargeMcResult {
            trials: self.trials,
            fill: col(&|s| s.fill),
            initial_fill: col(&|s| s.initial),
            planned: col(&|s| s.planned as f64),
            oracle: col(&|s| s.oracle as f64),
            optimal_rate: optimal as f64 / self.trials as f64,
        })
    }

    fn trial(&self, t: usize) -> Result<McSample> {
        let mut rng = RngStream::new(self.master_seed, t as u64);
        let main_grid = self.layout.main();
        let sec_grid = self.layout.secondary();
        let main = initial_load(main_grid, ArrayTag::Main, &self.main_loading, &RegionMask::all(main_grid), &mut rng);
        let sec = initial_load(sec_grid, ArrayTag::Secondary, &self.secondary_loading, &RegionMask::all(sec_grid), &mut rng);
        let graph = DefectGraph::from_occupancy(&main, &sec, &self.layout, &self.region, self.reservoir)?;
        let plan = DefectGraph::to_plan(&graph.assign_heuristic());
        let oracle = graph.max_matching();
        let (_, _, report) = execute_insertion(&main, &sec, &plan, &self.region, &self.noise, &mut rng)?;
        Ok(McSample {
            fill: report.fill_fraction_after,
            initial: main.fill_fraction(&self.region),
            planned: plan.len(),
            oracle,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TrapArrayParams;

    fn s(i: usize) -> SiteId {
        SiteId(i)
    }

    #[test]
    fn hand_traced_trivial_pass() {
        let g = DefectGraph::new(vec![(s(5), vec![s(2), s(7)]), (s(9), vec![s(7)])]);
        assert_eq!(g.assign_heuristic(), vec![(s(7), s(9)), (s(2), s(5))]);
        assert_eq!(g.max_matching(), 2);
    }

    #[test]
    fn hand_traced_fallback_pass() {
        let g = DefectGraph::new(vec![(s(1), vec![s(1), s(2)]), (s(2), vec![s(1), s(2)])]);
        assert_eq!(g.assign_heuristic(), vec![(s(1), s(1)), (s(2), s(2))]);
    }

    #[test]
    fn shared_single_reservoir() {
        let g = DefectGraph::new(vec![(s(1), vec![s(4)]), (s(2), vec![s(4)]), (s(3), vec![s(4)])]);
        assert_eq!(g.max_matching(), 1);
        assert_eq!(g.assign_heuristic(), vec![(s(4), s(1))]);
    }

    #[test]
    fn trivial_pass_cascades() {
        // d3 forces s1, which leaves d2 with only s2, which leaves d1 with s3.
        let g = DefectGraph::new(vec![
            (s(1), vec![s(2), s(3)]),
            (s(2), vec![s(1), s(2)]),
            (s(3), vec![s(1)]),
        ]);
        assert_eq!(
            g.assign_heuristic(),
            vec![(s(1), s(3)), (s(2), s(2)), (s(3), s(1))]
        );
    }

    #[test]
    fn no_defects_no_plan() {
        let layout = InterleavedLayout::symmetric(TrapArrayParams::square(8)).unwrap();
        let g = layout.main();
        let main = OccupancyState::from_sites(ArrayTag::Main, g.len(), g.sites()).unwrap();
        let sec = OccupancyState::from_sites(ArrayTag::Secondary, g.len(), g.sites()).unwrap();
        let region = RegionMask::square(g, 6).unwrap();
        for policy in [ReservoirPolicy::Interior, ReservoirPolicy::Adjacent] {
            assert!(plan_supercharge(&main, &sec, &layout, &region, policy).unwrap().is_empty());
            assert_eq!(max_matching_oracle(&main, &sec, &layout, &region, policy).unwrap(), 0);
        }
    }

    #[test]
    fn interior_policy_excludes_border_reservoirs() {
        let layout = InterleavedLayout::symmetric(TrapArrayParams::square(8)).unwrap();
        let g = layout.main().clone();
        let region = RegionMask::square(&g, 2).unwrap(); // rows/cols 3..=4
        let main = OccupancyState::empty(ArrayTag::Main, g.len());
        let sec = OccupancyState::from_sites(ArrayTag::Secondary, g.len(), g.sites()).unwrap();
        // Only secondary (3,3) has all four main neighbours inside the region.
        let interior = DefectGraph::from_occupancy(&main, &sec, &layout, &region, ReservoirPolicy::Interior).unwrap();
        assert_eq!(interior.max_matching(), 1);
        let adjacent = DefectGraph::from_occupancy(&main, &sec, &layout, &region, ReservoirPolicy::Adjacent).unwrap();
        assert_eq!(adjacent.max_matching(), 4);
    }

    #[test]
    fn region_must_be_on_main_grid() {
        let layout = InterleavedLayout::symmetric(TrapArrayParams::square(8)).unwrap();
        let other = RegionMask::square(&TrapArrayParams::square(9), 3).unwrap();
        let main = OccupancyState::empty(ArrayTag::Main, 64);
        let sec = OccupancyState::empty(ArrayTag::Secondary, 64);
        assert!(plan_supercharge(&main, &sec, &layout, &other, ReservoirPolicy::Interior).is_err());
        assert!(plan_supercharge(&sec, &main, &layout, &RegionMask::square(layout.main(), 3).unwrap(), ReservoirPolicy::Interior).is_err());
    }

    fn d5_d9_states() -> (OccupancyState, OccupancyState, MovePlan, RegionMask) {
        let g = TrapArrayParams { rows: 1, cols: 12, ..TrapArrayParams::default() };
        let main = OccupancyState::empty(ArrayTag::Main, 12);
        let sec = OccupancyState::from_sites(ArrayTag::Secondary, 12, [s(2), s(7)]).unwrap();
        let plan = MovePlan::new(vec![Move::insertion(s(7), s(9)), Move::insertion(s(2), s(5))]);
        let region = RegionMask::from_sites(&g, [s(5), s(9)]).unwrap();
        (main, sec, plan, region)
    }

    #[test]
    fn lossless_insertion_fills_planned_defects() {
        let (main, sec, plan, region) = d5_d9_states();
        let noise = NoiseParams { p_insertion: 1.0, ..NoiseParams::default() };
        let (m2, s2, rep) = execute_insertion(&main, &sec, &plan, &region, &noise, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(rep.defects_before, 2);
        assert_eq!(rep.inserted, 2);
        assert_eq!(rep.defects_after, 0);
        assert_eq!(rep.fill_fraction_after, 1.0);
        assert_eq!(m2.count(), 2);
        assert_eq!(s2.count(), 0);
    }

    #[test]
    fn failed_insertion_modes() {
        let (main, sec, plan, region) = d5_d9_states();
        let lost = NoiseParams { p_insertion: 0.0, ..NoiseParams::default() };
        let (m2, _, rep) = execute_insertion(&main, &sec, &plan, &region, &lost, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!((rep.inserted, rep.discarded, m2.count()), (0, 0, 0));
        let returned = NoiseParams { transport_fail_mode: TransportFailMode::Returned, ..lost };
        let (_, s2, rep) = execute_insertion(&main, &sec, &plan, &region, &returned, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!((rep.inserted, rep.discarded, s2.count()), (0, 2, 0));
    }

    #[test]
    fn strict_execution_rejects_inconsistent_plans() {
        let (main, sec, _, region) = d5_d9_states();
        let bad = MovePlan::new(vec![Move::insertion(s(3), s(9))]);
        let noise = NoiseParams::default();
        assert!(execute_insertion(&main, &sec, &bad, &region, &noise, &mut RngStream::new(1, 0)).is_err());
        // The detected-image executor tolerates it and does nothing.
        let (m2, _, rep) = execute_insertion_detected(&main, &sec, &bad, &region, &noise, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!((m2.count(), rep.inserted), (0, 0));
        let intra = MovePlan::new(vec![Move::intra(s(1), s(9))]);
        assert!(execute_insertion_detected(&main, &sec, &intra, &region, &noise, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn insertion_success_rate() {
        // 10⁴ single-move trials at p = 0.78.
        let (main, sec, _, region) = d5_d9_states();
        let plan = MovePlan::new(vec![Move::insertion(s(2), s(5))]);
        let noise = NoiseParams::default();
        let mut rng = RngStream::new(99, 0);
        let n = 10_000;
        let ok = (0..n)
            .filter(|_| execute_insertion(&main, &sec, &plan, &region, &noise, &mut rng).unwrap().2.inserted == 1)
            .count();
        let sigma = (n as f64 * 0.78 * 0.22).sqrt();
        assert!((ok as f64 - 0.78 * n as f64).abs() <= 5.0 * sigma, "{ok}");
    }
}
