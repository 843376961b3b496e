//! Browser bindings. Each exported function takes plain numbers and returns
//! a JSON string for the page script to draw; the logic lives in plain Rust
//! functions so it can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dualarray::geometry::RegionMask;
use dualarray::stochastic::initial_load;
use dualarray::supercharge::{execute_insertion, DefectGraph};
use dualarray::{
    run_experiment, ArrayTag, ExperimentConfig, LoadingModel, NoiseParams, OccupancyState,
    ReservoirPolicy, RngStream, TrapArrayParams,
};

#[derive(Serialize)]
pub struct DepthMap {
    pub rows: usize,
    pub cols: usize,
    pub ratios: Vec<f64>,
    pub sufficient: Vec<u8>,
    pub sufficient_count: usize,
}

pub fn depth_map(n: usize, envelope_radius_pitches: f64, min_ratio: f64) -> Result<DepthMap, String> {
    let grid = TrapArrayParams {
        envelope_radius_pitches,
        ..TrapArrayParams::square(n)
    };
    grid.validate().map_err(|e| e.to_string())?;
    let ratios = grid
        .sites()
        .map(|s| grid.depth_ratio(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mask = grid.sufficient_sites(min_ratio).map_err(|e| e.to_string())?;
    Ok(DepthMap {
        rows: grid.rows,
        cols: grid.cols,
        sufficient: grid.sites().map(|s| mask.contains(s) as u8).collect(),
        sufficient_count: mask.len(),
        ratios,
    })
}

#[derive(Serialize)]
pub struct SuperchargeShot {
    pub rows: usize,
    pub cols: usize,
    pub region: Vec<u8>,
    pub main_before: Vec<u8>,
    pub secondary_before: Vec<u8>,
    pub main_after: Vec<u8>,
    /// (secondary site, main site) pairs in plan order.
    pub moves: Vec<(usize, usize)>,
    pub defects: usize,
    pub planned: usize,
    pub max_matching: usize,
    pub inserted: usize,
    pub fill_before: f64,
    pub fill_after: f64,
}

fn bits(s: &OccupancyState) -> Vec<u8> {
    s.as_slice().iter().map(|&b| b as u8).collect()
}

/// One supercharge cycle on the default 48×48 layout.
pub fn supercharge_shot(
    seed: u64,
    p_fill: f64,
    region_k: usize,
    p_insertion: f64,
    adjacent: bool,
) -> Result<SuperchargeShot, String> {
    let cfg = ExperimentConfig::default();
    let layout = cfg.layout.build().map_err(|e| e.to_string())?;
    let grid = layout.main();
    let region = RegionMask::square(grid, region_k).map_err(|e| e.to_string())?;
    let model = LoadingModel::uniform(p_fill);
    model.validate().map_err(|e| e.to_string())?;
    let noise = NoiseParams {
        p_insertion,
        ..NoiseParams::default()
    };
    noise.validate().map_err(|e| e.to_string())?;
    let policy = if adjacent {
        ReservoirPolicy::Adjacent
    } else {
        ReservoirPolicy::Interior
    };

    let mut rng = RngStream::new(seed, 0);
    let all = RegionMask::all(grid);
    let main = initial_load(grid, ArrayTag::Main, &model, &all, &mut rng);
    let sec = initial_load(layout.secondary(), ArrayTag::Secondary, &model, &RegionMask::all(layout.secondary()), &mut rng);
    let graph = DefectGraph::from_occupancy(&main, &sec, &layout, &region, policy).map_err(|e| e.to_string())?;
    let pairs = graph.assign_heuristic();
    let plan = DefectGraph::to_plan(&pairs);
    let (after, _, report) =
        execute_insertion(&main, &sec, &plan, &region, &noise, &mut rng).map_err(|e| e.to_string())?;

    Ok(SuperchargeShot {
        rows: grid.rows,
        cols: grid.cols,
        region: grid.sites().map(|s| region.contains(s) as u8).collect(),
        main_before: bits(&main),
        secondary_before: bits(&sec),
        main_after: bits(&after),
        moves: pairs.iter().map(|&(s, d)| (s.0, d.0)).collect(),
        defects: graph.len(),
        planned: pairs.len(),
        max_matching: graph.max_matching(),
        inserted: report.inserted,
        fill_before: main.fill_fraction(&region),
        fill_after: report.fill_fraction_after,
    })
}

#[derive(Serialize)]
pub struct AssemblyCurves {
    pub trials: usize,
    pub cycles: usize,
    pub cumulative_success: Vec<f64>,
    pub mean_fill: Vec<f64>,
    pub initial_fill: f64,
    pub mean_duration_ms: Vec<f64>,
}

/// Runs `trials` full experiments with the default parameters, sequentially.
pub fn assembly_curves(
    seed: u64,
    trials: usize,
    max_cycles: usize,
    target_k: usize,
    supercharge: bool,
) -> Result<AssemblyCurves, String> {
    let mut cfg = ExperimentConfig::default();
    cfg.run.master_seed = seed;
    cfg.run.trials = trials;
    cfg.run.max_cycles = max_cycles;
    cfg.run.workers = 1;
    cfg.supercharge.enabled = supercharge;
    cfg.target.name = format!("compact-{target_k}x{target_k}");
    cfg.target.mask = dualarray::MaskSpec::Square { k: target_k };
    let exp = cfg.resolve().map_err(|e| e.to_string())?;
    let records = (0..trials)
        .map(|t| run_experiment(&exp, t, &mut RngStream::new(seed, t as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let stats = dualarray::TrialStatistics::from_records(&records).map_err(|e| e.to_string())?;
    Ok(AssemblyCurves {
        trials,
        cycles: stats.max_cycles,
        cumulative_success: stats.cumulative_success.iter().map(|p| p.p).collect(),
        mean_fill: stats.mean_fill.iter().map(|m| m.mean).collect(),
        initial_fill: stats.initial_fill.mean,
        mean_duration_ms: stats.mean_duration_by_cycle_s.iter().map(|s| s * 1e3).collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = depthMap)]
pub fn depth_map_js(n: usize, envelope_radius_pitches: f64, min_ratio: f64) -> Result<String, JsValue> {
    to_js(depth_map(n, envelope_radius_pitches, min_ratio))
}

#[wasm_bindgen(js_name = superchargeShot)]
pub fn supercharge_shot_js(
    seed: u32,
    p_fill: f64,
    region_k: usize,
    p_insertion: f64,
    adjacent: bool,
) -> Result<String, JsValue> {
    to_js(supercharge_shot(seed as u64, p_fill, region_k, p_insertion, adjacent))
}

#[wasm_bindgen(js_name = assemblyCurves)]
pub fn assembly_curves_js(
    seed: u32,
    trials: usize,
    max_cycles: usize,
    target_k: usize,
    supercharge: bool,
) -> Result<String, JsValue> {
    to_js(assembly_curves(seed as u64, trials, max_cycles, target_k, supercharge))
}
