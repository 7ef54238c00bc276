//! Checks of matcher output against an exhaustive optimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::allocation::{Allocation, AllocationObjective, EdgeWeightSum, TagGroupInfluence};
use crate::baselines::{oracle_optimal, OracleSolution};
use crate::error::{Error, Result};
use crate::graph::{build_graph, WeightedBipartiteGraph};
use crate::influence::InfluenceEngine;
use crate::ombm::{default_bounds, ombm_allocate_traced, OmbmRun};

/// Absolute slack when comparing objective values.
pub const VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeCheck {
    pub tag: usize,
    pub slot: usize,
    /// Best value reachable while keeping this edge.
    pub best_with_edge: f64,
    pub optimum: f64,
    pub in_optimum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    /// One entry per edge admitted by the first mutual-best sweep.
    pub dominating_in_optimum: Vec<EdgeCheck>,
    pub slot_unique: bool,
    pub within_bounds: bool,
    /// Whether every tag reached its bound; only evaluated for complete
    /// graphs with at least as many slots as the bounds add up to.
    pub bounds_filled: Option<bool>,
}

impl LemmaReport {
    pub fn dominating_ok(&self) -> bool {
        self.dominating_in_optimum.iter().all(|c| c.in_optimum)
    }

    pub fn all_ok(&self) -> bool {
        self.dominating_ok()
            && self.slot_unique
            && self.within_bounds
            && self.bounds_filled.unwrap_or(true)
    }
}

/// `oracle` must maximise total edge weight under the run's bounds.
pub fn verify_lemmas(
    run: &OmbmRun,
    graph: &WeightedBipartiteGraph,
    oracle: &OracleSolution,
) -> LemmaReport {
    let alloc = &run.allocation;
    let dominating_in_optimum = run
        .first_sweep()
        .into_iter()
        .map(|(tag, slot)| {
            let best = oracle
                .best_with_edge(tag, slot)
                .unwrap_or(f64::NEG_INFINITY);
            EdgeCheck {
                tag,
                slot,
                best_with_edge: best,
                optimum: oracle.value,
                in_optimum: oracle.edge_in_optimum(tag, slot, VALUE_TOL),
            }
        })
        .collect();

    // every slot assigned at most once across the whole trace, and the
    // final array agrees with the trace
    let mut seen = vec![None; alloc.slot_count()];
    let mut slot_unique = true;
    for st in &run.trace {
        if seen[st.slot].replace(st.tag).is_some() {
            slot_unique = false;
        }
    }
    slot_unique &= seen.as_slice() == alloc.assignment();

    let within_bounds = alloc.check().is_ok() && alloc.bounds().is_some();

    let complete = graph.edges().len() == graph.tag_count() * graph.slot_count();
    let bounds_filled = alloc.bounds().and_then(|b| {
        (complete && graph.slot_count() >= b.iter().sum::<usize>()).then(|| alloc.counts() == b)
    });

    LemmaReport {
        dominating_in_optimum,
        slot_unique,
        within_bounds,
        bounds_filled,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxReport {
    /// Optimum over allocation value; 1 when both are 0, +∞ when only the
    /// allocation is 0.
    pub ratio: f64,
    /// `(K_i, δ_i)`: slots held by tag i and whether it reached its bound.
    pub per_tag: Vec<(usize, u8)>,
    /// `1 + max_i (K_i - δ_i)`.
    pub bound: f64,
    pub within_bound: bool,
}

pub fn approximation_report(
    allocation: &Allocation,
    allocation_value: f64,
    optimum: f64,
) -> ApproxReport {
    let ratio = if allocation_value > 0.0 {
        optimum / allocation_value
    } else if optimum > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let per_tag: Vec<(usize, u8)> = allocation
        .counts()
        .iter()
        .enumerate()
        .map(|(t, &k)| (k, u8::from(allocation.at_bound(t) && k > 0)))
        .collect();
    let bound = 1.0
        + per_tag
            .iter()
            .map(|&(k, d)| k - usize::from(d))
            .max()
            .unwrap_or(0) as f64;
    ApproxReport {
        ratio,
        per_tag,
        bound,
        within_bound: ratio <= bound * (1.0 + VALUE_TOL),
    }
}

/// Random instances for the exhaustive checks: a small engine, the complete
/// graph over all its slots and tags, pruned at a θ drawn from
/// `{-2, -1, 0, 1, 2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_slots: usize,
    pub max_tags: usize,
    pub max_users: usize,
    /// Draw only shapes with more slots than tags.
    pub more_slots_than_tags: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            instances: 500,
            seed: 7,
            max_slots: 8,
            max_tags: 4,
            max_users: 6,
            more_slots_than_tags: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub slots: usize,
    pub tags: usize,
    pub theta: f64,
    pub edges: usize,
    pub lemmas: LemmaReport,
    pub approx: ApproxReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub records: Vec<InstanceRecord>,
}

impl SuiteReport {
    pub fn dominating_violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !r.lemmas.dominating_ok())
            .count()
    }

    pub fn uniqueness_violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !r.lemmas.slot_unique)
            .count()
    }

    pub fn bound_violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !r.lemmas.within_bounds)
            .count()
    }

    pub fn approx_violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !r.approx.within_bound)
            .count()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.approx.ratio).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.dominating_violations() == 0
            && self.uniqueness_violations() == 0
            && self.bound_violations() == 0
            && self.approx_violations() == 0
    }
}

/// Exposure and affinity matrices with roughly 40% and 30% zeros.
pub fn random_matrices(
    rng: &mut ChaCha8Rng,
    slots: usize,
    tags: usize,
    users: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut cell = |density: f64| {
        if rng.random_bool(density) {
            (rng.random_range(0.05..1.0_f64) * 1e4).round() / 1e4
        } else {
            0.0
        }
    };
    let exposure = (0..slots)
        .map(|_| (0..users).map(|_| cell(0.6)).collect())
        .collect();
    let affinity = (0..users)
        .map(|_| (0..tags).map(|_| cell(0.7)).collect())
        .collect();
    (exposure, affinity)
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    if config.max_slots == 0 || config.max_tags == 0 || config.max_users == 0 {
        return Err(Error::Config("suite sizes must be positive".into()));
    }
    if config.more_slots_than_tags && config.max_slots < 2 {
        return Err(Error::Config(
            "more slots than tags needs max_slots >= 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.instances);
    while records.len() < config.instances {
        let slots = rng.random_range(1..=config.max_slots);
        let tags = rng.random_range(1..=config.max_tags);
        if config.more_slots_than_tags && slots <= tags {
            continue;
        }
        let users = rng.random_range(1..=config.max_users);
        let theta = f64::from(rng.random_range(-2_i32..=2));
        let (exposure, affinity) = random_matrices(&mut rng, slots, tags, users);
        let engine = InfluenceEngine::from_matrices(&exposure, &affinity)?;
        let all_slots: Vec<usize> = (0..slots).collect();
        let all_tags: Vec<usize> = (0..tags).collect();
        let graph = build_graph(&engine, &all_slots, &all_tags)?.prune(theta)?;
        let bounds = default_bounds(slots, tags);

        let run = ombm_allocate_traced(&graph, &bounds)?;
        let by_weight = oracle_optimal(&graph, &bounds, &EdgeWeightSum(&graph))?;
        let lemmas = verify_lemmas(&run, &graph, &by_weight);
        let objective = TagGroupInfluence::new(&engine, &graph)?;
        let by_influence = oracle_optimal(&graph, &bounds, &objective)?;
        let approx = approximation_report(
            &run.allocation,
            objective.value(&run.allocation),
            by_influence.value,
        );
        records.push(InstanceRecord {
            slots,
            tags,
            theta,
            edges: graph.edges().len(),
            lemmas,
            approx,
        });
    }
    Ok(SuiteReport {
        config: config.clone(),
        records,
    })
}
