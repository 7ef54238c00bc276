//! End-to-end pipeline and parameter sweeps.
//!
//! A cell runs selection, builds the complete tag × slot graph, prunes it
//! and hands the pruned graph to every requested allocator. Only the
//! allocator call is timed.

mod config;
mod report;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{BoundSetting, Cell, DataSource, ExperimentConfig};
pub use report::{Environment, ExperimentReport, ReportRow, STATUS_OK};

use crate::allocation::{Allocation, AllocationObjective, TagGroupInfluence};
use crate::baselines::Method;
use crate::error::{Error, Result};
use crate::graph::{build_graph_from_selection, WeightedBipartiteGraph};
use crate::influence::InfluenceEngine;
use crate::model::{
    build_exposure, expand_slots, generate_synthetic, Dataset, ExposureModel, Horizon,
};
use crate::ombm::{default_bounds, ombm_allocate};
use crate::selection::{stochastic_greedy_select, SelectionConfig, SelectionResult};

/// Loads or generates the dataset named by `source`, with its horizon.
pub fn load_source(source: &DataSource, horizon: Horizon) -> Result<(Dataset, Horizon)> {
    match source {
        DataSource::Dir(dir) => Ok((Dataset::load_dir(dir)?, horizon)),
        DataSource::Synthetic(spec) => Ok((generate_synthetic(spec)?, spec.horizon)),
    }
}

/// Slot inventory at radius `lambda_m` plus the tag catalog of `data`.
pub fn build_engine(data: &Dataset, horizon: Horizon, lambda_m: f64) -> Result<InfluenceEngine> {
    let slots = expand_slots(&data.billboards, horizon)?;
    let inventory = build_exposure(
        &slots,
        &data.billboards,
        &data.trajectories,
        horizon,
        lambda_m,
        ExposureModel::PanelSizeRatio,
    )?;
    InfluenceEngine::new(inventory, &data.affinities)
}

/// Per-tag bounds for `graph`: the default setting, then per-tag overrides.
pub fn resolve_bounds(config: &ExperimentConfig, graph: &WeightedBipartiteGraph) -> Vec<usize> {
    let base = match config.bound {
        BoundSetting::Auto => default_bounds(graph.slot_count(), graph.tag_count()),
        BoundSetting::Fixed(b) => vec![b; graph.tag_count()],
    };
    graph
        .tags()
        .iter()
        .zip(base)
        .map(|(t, b)| config.bound_overrides.get(t).copied().unwrap_or(b))
        .collect()
}

/// Runs one allocator on a pruned graph.
pub fn allocate_with(
    method: Method,
    graph: &WeightedBipartiteGraph,
    bounds: &[usize],
    seed: u64,
) -> Result<Allocation> {
    match method.baseline(seed) {
        None => ombm_allocate(graph, bounds),
        Some(kind) => kind.allocate(graph),
    }
}

/// `Σ_t I(S_t | {t})` over the slot groups of `allocation`.
pub fn allocation_influence(
    engine: &InfluenceEngine,
    graph: &WeightedBipartiteGraph,
    allocation: &Allocation,
) -> Result<f64> {
    Ok(TagGroupInfluence::new(engine, graph)?.value(allocation))
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub selection: SelectionResult,
    /// Unpruned.
    pub graph: WeightedBipartiteGraph,
    pub pruned: WeightedBipartiteGraph,
    pub bounds: Vec<usize>,
    pub allocations: BTreeMap<Method, Allocation>,
    pub rows: Vec<ReportRow>,
}

/// Runs selection, graph construction, pruning and each method on one cell.
pub fn run_cell(
    engine: &InfluenceEngine,
    config: &ExperimentConfig,
    cell: Cell,
) -> Result<CellOutcome> {
    let sel_cfg = SelectionConfig {
        full_sample: config.full_sample,
        order: config.order,
        ..SelectionConfig::new(cell.k, cell.l, cell.epsilon, config.seed)
    };
    let selection = stochastic_greedy_select(engine, &sel_cfg).map_err(|e| e.in_stage("select"))?;
    let selection_influence = selection.influence(engine)?;
    let graph = build_graph_from_selection(engine, &selection).map_err(|e| e.in_stage("graph"))?;
    let pruned = graph.prune(cell.theta).map_err(|e| e.in_stage("prune"))?;
    let bounds = resolve_bounds(config, &pruned);
    let objective = TagGroupInfluence::new(engine, &pruned)?;

    let mut allocations = BTreeMap::new();
    let mut rows = Vec::new();
    for &method in &config.methods {
        let mut total_ms = 0.0;
        let mut allocation = None;
        for _ in 0..config.repetitions {
            let start = Instant::now();
            let a = allocate_with(method, &pruned, &bounds, config.seed)
                .map_err(|e| e.in_stage("allocate"))?;
            total_ms += start.elapsed().as_secs_f64() * 1e3;
            allocation.get_or_insert(a);
        }
        let allocation = allocation.expect("at least one repetition");
        allocation
            .check_against(&pruned)
            .map_err(|e| e.in_stage("allocate"))?;
        rows.push(ReportRow {
            method,
            k: cell.k,
            l: cell.l,
            theta: cell.theta,
            epsilon: cell.epsilon,
            lambda_m: cell.lambda_m,
            matched_slots: allocation.matched_slots(),
            matched_tags: allocation.matched_tags(),
            influence: objective.value(&allocation),
            selection_influence,
            runtime_ms: total_ms / config.repetitions as f64,
            repetitions: config.repetitions,
            status: STATUS_OK.into(),
        });
        allocations.insert(method, allocation);
    }
    Ok(CellOutcome {
        cell,
        selection,
        graph,
        pruned,
        bounds,
        allocations,
        rows,
    })
}

/// First cell of the grid, first method.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<(Allocation, ReportRow)> {
    config.validate()?;
    let (data, horizon) =
        load_source(&config.source, config.horizon).map_err(|e| e.in_stage("load"))?;
    let cell = config.cells()[0];
    let engine = build_engine(&data, horizon, cell.lambda_m).map_err(|e| e.in_stage("exposure"))?;
    let mut out = run_cell(&engine, config, cell)?;
    let method = config.methods[0];
    let allocation = out.allocations.remove(&method).expect("method ran");
    Ok((allocation, out.rows.swap_remove(0)))
}

pub struct SweepOutput {
    pub report: ExperimentReport,
    /// In grid order.
    pub cells: Vec<(Cell, std::result::Result<CellOutcome, String>)>,
}

fn failed_rows(config: &ExperimentConfig, cell: Cell, message: &str) -> Vec<ReportRow> {
    config
        .methods
        .iter()
        .map(|&method| ReportRow {
            method,
            k: cell.k,
            l: cell.l,
            theta: cell.theta,
            epsilon: cell.epsilon,
            lambda_m: cell.lambda_m,
            matched_slots: 0,
            matched_tags: 0,
            influence: 0.0,
            selection_influence: 0.0,
            runtime_ms: 0.0,
            repetitions: config.repetitions,
            status: format!("error: {message}"),
        })
        .collect()
}

/// Runs every cell of the grid. A failing cell becomes error rows; loading
/// errors abort the sweep.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let (data, horizon) =
        load_source(&config.source, config.horizon).map_err(|e| e.in_stage("load"))?;
    let mut lambdas = config.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let engines: Vec<(f64, std::result::Result<InfluenceEngine, String>)> = lambdas
        .par_iter()
        .map(|&l| {
            (
                l,
                build_engine(&data, horizon, l).map_err(|e| e.in_stage("exposure").to_string()),
            )
        })
        .collect();
    let engine_for = |lambda: f64| {
        engines
            .iter()
            .find(|(l, _)| l.total_cmp(&lambda).is_eq())
            .map(|(_, e)| e)
            .expect("engine per lambda")
    };

    let cells: Vec<(Cell, std::result::Result<CellOutcome, String>)> = config
        .cells()
        .into_par_iter()
        .map(|cell| {
            let out = match engine_for(cell.lambda_m) {
                Ok(engine) => run_cell(engine, config, cell).map_err(|e| e.to_string()),
                Err(msg) => Err(msg.clone()),
            };
            (cell, out)
        })
        .collect();

    let mut rows = Vec::new();
    for (cell, out) in &cells {
        match out {
            Ok(o) => rows.extend(o.rows.iter().cloned()),
            Err(msg) => rows.extend(failed_rows(config, *cell, msg)),
        }
    }
    let mut report = ExperimentReport {
        rows,
        environment: Environment::current(config.seed),
    };
    report.sort();
    Ok(SweepOutput { report, cells })
}

/// Writes `selection.json`, `graph.json` and `allocation-<method>.json` for
/// a cell into `dir`.
pub fn write_cell(dir: &Path, out: &CellOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join("selection.json");
    std::fs::write(&p, serde_json::to_string_pretty(&out.selection)?)
        .map_err(|e| Error::io(&p, e))?;
    out.graph.save(&dir.join("graph.json"))?;
    for (method, a) in &out.allocations {
        a.save(&out.pruned, &dir.join(format!("allocation-{method}.json")))?;
    }
    Ok(())
}

/// Single-cell sweeps put the cell artifacts next to the report; larger
/// grids get one `cells/<key>/` directory per successful cell.
pub fn write_outputs(dir: &Path, out: &SweepOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if let [(_, Ok(cell))] = out.cells.as_slice() {
        write_cell(dir, cell)?;
    } else {
        for (cell, res) in &out.cells {
            if let Ok(o) = res {
                write_cell(&dir.join("cells").join(cell.key()), o)?;
            }
        }
    }
    out.report.write(dir)
}
