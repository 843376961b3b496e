//! Independent oracles shared by the property and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;

use dualarray::geometry::{InterleavedLayout, RegionMask, TrapArrayParams};
use dualarray::stochastic::{initial_load, LoadingModel};
use dualarray::supercharge::DefectGraph;
use dualarray::{ArrayTag, OccupancyState, RngStream, TargetPattern};

/// Largest number of defects that can receive distinct reservoirs, by
/// exhaustive search over every choice (memoised on the used-reservoir set).
pub fn exhaustive_matching(graph: &DefectGraph) -> usize {
    let mut dense: HashMap<usize, u32> = HashMap::new();
    let cands: Vec<Vec<u32>> = (0..graph.len())
        .map(|i| {
            graph
                .candidates(i)
                .iter()
                .map(|s| {
                    let next = dense.len() as u32;
                    *dense.entry(s.0).or_insert(next)
                })
                .collect()
        })
        .collect();
    assert!(dense.len() <= 64, "too many reservoir sites for the oracle");

    fn go(i: usize, used: u64, cands: &[Vec<u32>], memo: &mut HashMap<(usize, u64), usize>) -> usize {
        if i == cands.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let mut best = go(i + 1, used, cands, memo);
        for &c in &cands[i] {
            if used & (1 << c) == 0 {
                best = best.max(1 + go(i + 1, used | (1 << c), cands, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, &cands, &mut HashMap::new())
}

/// Minimum total cost over every injective assignment of the smaller side
/// into the larger one. Factorial; keep both sides small.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    let m = cost[0].len();
    type Cost<'a> = Box<dyn Fn(usize, usize) -> f64 + 'a>;
    let (rows, cols, at): (usize, usize, Cost) = if n <= m {
        (n, m, Box::new(|i, j| cost[i][j]))
    } else {
        (m, n, Box::new(|i, j| cost[j][i]))
    };

    fn go(i: usize, rows: usize, used: &mut Vec<bool>, acc: f64, at: &dyn Fn(usize, usize) -> f64) -> f64 {
        if i == rows {
            return acc;
        }
        let mut best = f64::INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(go(i + 1, rows, used, acc + at(i, j), at));
                used[j] = false;
            }
        }
        best
    }
    go(0, rows, &mut vec![false; cols], 0.0, &*at)
}

/// Counts sites with exp(-2 r² / w²) >= min_ratio by walking the lattice,
/// with r measured in pitches from the grid centroid.
pub fn lattice_sufficient_count(rows: usize, cols: usize, w_pitches: f64, min_ratio: f64) -> usize {
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    let mut n = 0;
    for r in 0..rows {
        for c in 0..cols {
            let dy = r as f64 - cy;
            let dx = c as f64 - cx;
            if (-2.0 * (dx * dx + dy * dy) / (w_pitches * w_pitches)).exp() >= min_ratio {
                n += 1;
            }
        }
    }
    n
}

/// Random supercharge instance: 10×10 interleaved arrays, centred 6×6 region,
/// both arrays loaded uniformly with probability `p`.
pub struct Instance {
    pub layout: InterleavedLayout,
    pub region: RegionMask,
    pub main: OccupancyState,
    pub secondary: OccupancyState,
}

pub fn supercharge_instance(seed: u64, p: f64) -> Instance {
    let grid = TrapArrayParams::square(10);
    let layout = InterleavedLayout::symmetric(grid.clone()).unwrap();
    let region = RegionMask::square(&grid, 6).unwrap();
    let all = RegionMask::all(&grid);
    let mut rng = RngStream::new(seed, 0);
    let model = LoadingModel::uniform(p);
    let main = initial_load(&grid, ArrayTag::Main, &model, &all, &mut rng);
    let secondary = initial_load(&grid, ArrayTag::Secondary, &model, &all, &mut rng);
    Instance { layout, region, main, secondary }
}

/// Whether an observed count lies within 5σ of the Binomial(n, p) mean.
pub fn within_5_sigma(successes: u64, n: u64, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (successes as f64 - mean).abs() <= 5.0 * sd
}

/// Small assembly scene: 8×8 grid, 3×3 target inside a 4×4 operation range,
/// so spare atoms number at most seven. Only the operation range is loaded.
pub fn assembly_scene(seed: u64, p: f64) -> (InterleavedLayout, TargetPattern, RegionMask, OccupancyState) {
    let grid = TrapArrayParams::square(8);
    let layout = InterleavedLayout::symmetric(grid.clone()).unwrap();
    let op = RegionMask::square(&grid, 4).unwrap();
    let target = TargetPattern::new("t", RegionMask::square(&grid, 3).unwrap(), &op).unwrap();
    let mut rng = RngStream::new(seed, 1);
    let state = initial_load(&grid, ArrayTag::Main, &LoadingModel::uniform(p), &op, &mut rng);
    (layout, target, op, state)
}
