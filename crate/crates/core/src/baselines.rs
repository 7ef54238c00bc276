//! Reference allocators and the exhaustive small-instance oracle.
//!
//! None of the baselines apply tag bounds: a tag may cover any number of
//! slots.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, AllocationObjective};
use crate::error::{Error, Result};
use crate::graph::WeightedBipartiteGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    /// Each slot takes its heaviest incident tag.
    BruteForceBestEdge,
    /// Each slot takes its incident tag of highest degree.
    MaxDegree,
    /// Slots in descending singleton influence, each with a random incident tag.
    TopkSlotRandomTag { seed: u64 },
    /// Slots in index order, each with a random incident tag.
    Random { seed: u64 },
}

impl BaselineKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            BaselineKind::BruteForceBestEdge => "bm",
            BaselineKind::MaxDegree => "mda",
            BaselineKind::TopkSlotRandomTag { .. } => "tsrt",
            BaselineKind::Random { .. } => "ra",
        }
    }

    /// Parses `bm|mda|tsrt|ra`; the seed is ignored by the deterministic two.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "bm" => BaselineKind::BruteForceBestEdge,
            "mda" => BaselineKind::MaxDegree,
            "tsrt" => BaselineKind::TopkSlotRandomTag { seed },
            "ra" => BaselineKind::Random { seed },
            other => return Err(Error::config(format!("unknown baseline '{other}'"))),
        })
    }

    /// Runs the baseline. TSRT ranks slots by the graph's stored singleton
    /// influences and fails without them.
    pub fn allocate(&self, graph: &WeightedBipartiteGraph) -> Result<Allocation> {
        match *self {
            BaselineKind::BruteForceBestEdge => Ok(allocate_bm(graph)),
            BaselineKind::MaxDegree => Ok(allocate_mda(graph)),
            BaselineKind::TopkSlotRandomTag { seed } => {
                let si = graph.slot_influence().ok_or_else(|| {
                    Error::config("top-k slot baseline needs slot influences in the graph")
                })?;
                allocate_tsrt(graph, si, seed)
            }
            BaselineKind::Random { seed } => Ok(allocate_random(graph, seed)),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Allocator choices exposed by the bench and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ombm,
    Bm,
    Mda,
    Tsrt,
    Ra,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ombm,
        Method::Bm,
        Method::Mda,
        Method::Tsrt,
        Method::Ra,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ombm => "ombm",
            Method::Bm => "bm",
            Method::Mda => "mda",
            Method::Tsrt => "tsrt",
            Method::Ra => "ra",
        }
    }

    pub fn baseline(&self, seed: u64) -> Option<BaselineKind> {
        match self {
            Method::Ombm => None,
            m => Some(BaselineKind::parse(m.name(), seed).expect("known name")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

fn per_slot(
    graph: &WeightedBipartiteGraph,
    mut pick: impl FnMut(usize) -> Option<usize>,
) -> Allocation {
    let mut a = Allocation::unbounded(graph.slot_count(), graph.tag_count());
    for s in 0..graph.slot_count() {
        if let Some(t) = pick(s) {
            a.assign(s, t).expect("unbounded, each slot once");
        }
    }
    a
}

/// Lowest-index maximiser of `key` over `tags`.
fn argmax_by(tags: &[usize], key: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &t in tags {
        let k = key(t);
        if best.is_none_or(|(_, bk)| k > bk) {
            best = Some((t, k));
        }
    }
    best.map(|(t, _)| t)
}

pub fn allocate_bm(graph: &WeightedBipartiteGraph) -> Allocation {
    per_slot(graph, |s| {
        argmax_by(graph.slot_neighbors(s), |t| {
            graph.weight(t, s).unwrap_or(0.0)
        })
    })
}

pub fn allocate_mda(graph: &WeightedBipartiteGraph) -> Allocation {
    per_slot(graph, |s| {
        argmax_by(graph.slot_neighbors(s), |t| graph.tag_degree(t) as f64)
    })
}

fn random_in_order(graph: &WeightedBipartiteGraph, order: &[usize], seed: u64) -> Allocation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Allocation::unbounded(graph.slot_count(), graph.tag_count());
    for &s in order {
        let tags = graph.slot_neighbors(s);
        if !tags.is_empty() {
            a.assign(s, tags[rng.random_range(0..tags.len())])
                .expect("unbounded, each slot once");
        }
    }
    a
}

pub fn allocate_tsrt(
    graph: &WeightedBipartiteGraph,
    slot_influences: &[f64],
    seed: u64,
) -> Result<Allocation> {
    if slot_influences.len() != graph.slot_count() {
        return Err(Error::config("one slot influence per slot expected"));
    }
    let mut order: Vec<usize> = (0..graph.slot_count()).collect();
    order.sort_by(|&a, &b| {
        slot_influences[b]
            .partial_cmp(&slot_influences[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(random_in_order(graph, &order, seed))
}

pub fn allocate_random(graph: &WeightedBipartiteGraph, seed: u64) -> Allocation {
    let order: Vec<usize> = (0..graph.slot_count()).collect();
    random_in_order(graph, &order, seed)
}

pub const ORACLE_MAX_SLOTS: usize = 10;
pub const ORACLE_MAX_TAGS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub allocation: Allocation,
    pub value: f64,
    /// `tags × slots`: best value among feasible assignments that use the
    /// edge, `None` for non-edges.
    best_with_edge: Vec<Option<f64>>,
    slots: usize,
}

impl OracleSolution {
    pub fn best_with_edge(&self, tag: usize, slot: usize) -> Option<f64> {
        self.best_with_edge[tag * self.slots + slot]
    }

    /// Whether some optimal assignment uses `(tag, slot)`, up to `tol`.
    pub fn edge_in_optimum(&self, tag: usize, slot: usize, tol: f64) -> bool {
        self.best_with_edge(tag, slot)
            .is_some_and(|v| v >= self.value - tol)
    }
}

struct Search<'a, O: AllocationObjective> {
    graph: &'a WeightedBipartiteGraph,
    objective: &'a O,
    bounds: &'a [usize],
    current: Vec<Option<usize>>,
    counts: Vec<usize>,
    best: Option<(f64, Vec<Option<usize>>)>,
    best_with_edge: Vec<Option<f64>>,
}

impl<O: AllocationObjective> Search<'_, O> {
    fn run(&mut self, slot: usize, state: &O::State, value: f64) {
        let ns = self.graph.slot_count();
        if slot == ns {
            self.leaf(value);
            return;
        }
        // unassigned first: ties resolve to the lexicographically smallest array
        self.current[slot] = None;
        self.run(slot + 1, state, value);
        for &t in self.graph.slot_neighbors(slot) {
            if self.counts[t] >= self.bounds[t] {
                continue;
            }
            let mut next = state.clone();
            let gain = self.objective.add(&mut next, t, slot);
            self.current[slot] = Some(t);
            self.counts[t] += 1;
            self.run(slot + 1, &next, value + gain);
            self.counts[t] -= 1;
        }
        self.current[slot] = None;
    }

    fn leaf(&mut self, value: f64) {
        let ns = self.graph.slot_count();
        for (s, t) in self.current.iter().enumerate() {
            if let Some(t) = *t {
                let cell = &mut self.best_with_edge[t * ns + s];
                if cell.is_none_or(|v| value > v) {
                    *cell = Some(value);
                }
            }
        }
        if self.best.as_ref().is_none_or(|(v, _)| value > *v) {
            self.best = Some((value, self.current.clone()));
        }
    }
}

/// Exhaustive maximiser of `objective` over all bound-feasible assignments
/// along graph edges, slots allowed to stay free. Values are accumulated in
/// slot order, the same order [`AllocationObjective::value`] uses.
pub fn oracle_optimal<O: AllocationObjective>(
    graph: &WeightedBipartiteGraph,
    bounds: &[usize],
    objective: &O,
) -> Result<OracleSolution> {
    let (ns, nt) = (graph.slot_count(), graph.tag_count());
    if ns > ORACLE_MAX_SLOTS || nt > ORACLE_MAX_TAGS {
        return Err(Error::TooLarge {
            slots: ns,
            tags: nt,
            max_slots: ORACLE_MAX_SLOTS,
            max_tags: ORACLE_MAX_TAGS,
        });
    }
    if bounds.len() != nt {
        return Err(Error::config(format!(
            "{} bounds for {nt} tags",
            bounds.len()
        )));
    }
    let mut search = Search {
        graph,
        objective,
        bounds,
        current: vec![None; ns],
        counts: vec![0; nt],
        best: None,
        best_with_edge: vec![None; nt * ns],
    };
    let init = objective.initial();
    search.run(0, &init, 0.0);
    let (value, best) = search
        .best
        .expect("the empty assignment is always feasible");
    let mut allocation = Allocation::empty(ns, nt, Some(bounds.to_vec()))?;
    for (s, t) in best.iter().enumerate() {
        if let Some(t) = *t {
            allocation.assign(s, t)?;
        }
    }
    Ok(OracleSolution {
        allocation,
        value,
        best_with_edge: search.best_with_edge,
        slots: ns,
    })
}
