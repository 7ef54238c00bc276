//! One-to-many matching of tags to slots by repeated mutual-best edges.
//!
//! A round works on the set of live tags (not yet matched this round and
//! below their bound). Each iteration first collects every edge whose
//! endpoints pick each other as best live counterpart, then propagates from
//! the tags just matched: a free slot adjacent to such a tag is taken by its
//! best live tag if that tag picks it back. When no live tag has a free
//! neighbour the round ends, every tag below its bound comes back to life,
//! and a new round starts. The matcher stops after a round that assigns
//! nothing.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::graph::WeightedBipartiteGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Vertex {
    Tag(usize),
    Slot(usize),
}

/// Mutual-best `(tag, slot)` pairs, ordered by tag then slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DominatingEdgeSet {
    pub edges: BTreeSet<(usize, usize)>,
}

impl DominatingEdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, tag: usize, slot: usize) -> bool {
        self.edges.contains(&(tag, slot))
    }
}

/// Liveness view: free slots, and tags that are below their bound and not
/// yet matched in the current round.
struct Live<'a> {
    graph: &'a WeightedBipartiteGraph,
    alloc: &'a Allocation,
    spent: &'a [bool],
}

impl Live<'_> {
    fn tag_live(&self, t: usize) -> bool {
        !self.spent[t] && !self.alloc.at_bound(t)
    }

    fn slot_live(&self, s: usize) -> bool {
        self.alloc.tag_of(s).is_none()
    }

    /// Heaviest live tag of a free slot; ties go to the lowest tag index.
    fn best_tag(&self, s: usize) -> Option<usize> {
        if !self.slot_live(s) {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for &t in self.graph.slot_neighbors(s) {
            if !self.tag_live(t) {
                continue;
            }
            let w = self.graph.weight(t, s).unwrap_or(0.0);
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((t, w));
            }
        }
        best.map(|(t, _)| t)
    }

    /// Heaviest free slot of a live tag; ties go to the highest slot index.
    ///
    /// The two sides break ties in opposite directions so that among a run
    /// of equal weights a mutual pair always exists.
    fn best_slot(&self, t: usize) -> Option<usize> {
        if !self.tag_live(t) {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for &s in self.graph.tag_neighbors(t) {
            if !self.slot_live(s) {
                continue;
            }
            let w = self.graph.weight(t, s).unwrap_or(0.0);
            if best.is_none_or(|(_, bw)| w >= bw) {
                best = Some((s, w));
            }
        }
        best.map(|(s, _)| s)
    }

    fn dominating(&self) -> DominatingEdgeSet {
        let edges = (0..self.graph.slot_count())
            .filter_map(|s| {
                let t = self.best_tag(s)?;
                (self.best_slot(t) == Some(s)).then_some((t, s))
            })
            .collect();
        DominatingEdgeSet { edges }
    }

    fn any_live_edge(&self) -> bool {
        (0..self.graph.tag_count()).any(|t| self.best_slot(t).is_some())
    }
}

fn check_shape(graph: &WeightedBipartiteGraph, allocation: &Allocation) -> Result<()> {
    if allocation.slot_count() != graph.slot_count() || allocation.tag_count() != graph.tag_count()
    {
        return Err(Error::Contract("allocation and graph sizes differ".into()));
    }
    Ok(())
}

/// Best live opposite vertex of `vertex` given `allocation`.
pub fn best_counterpart(
    graph: &WeightedBipartiteGraph,
    vertex: Vertex,
    allocation: &Allocation,
) -> Result<Option<Vertex>> {
    check_shape(graph, allocation)?;
    let spent = vec![false; graph.tag_count()];
    let live = Live {
        graph,
        alloc: allocation,
        spent: &spent,
    };
    Ok(match vertex {
        Vertex::Slot(s) if s < graph.slot_count() => live.best_tag(s).map(Vertex::Tag),
        Vertex::Tag(t) if t < graph.tag_count() => live.best_slot(t).map(Vertex::Slot),
        v => return Err(Error::Contract(format!("{v:?} is not in the graph"))),
    })
}

/// Mutual-best edges among the live vertices of `allocation`.
pub fn find_dominating_edges(
    graph: &WeightedBipartiteGraph,
    allocation: &Allocation,
) -> Result<DominatingEdgeSet> {
    check_shape(graph, allocation)?;
    let spent = vec![false; graph.tag_count()];
    Ok(Live {
        graph,
        alloc: allocation,
        spent: &spent,
    }
    .dominating())
}

/// `ceil(slots / tags)` for every tag.
pub fn default_bounds(slots: usize, tags: usize) -> Vec<usize> {
    if tags == 0 {
        return Vec::new();
    }
    vec![slots.div_ceil(tags).max(1); tags]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Mutual-best sweep.
    Sweep,
    /// Assignment reached from a tag matched earlier in the iteration.
    Propagation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub round: usize,
    pub iteration: usize,
    pub phase: Phase,
    pub tag: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmbmRun {
    pub allocation: Allocation,
    pub trace: Vec<TraceStep>,
}

impl OmbmRun {
    /// Edges admitted by the very first sweep.
    pub fn first_sweep(&self) -> Vec<(usize, usize)> {
        self.trace
            .iter()
            .take_while(|st| st.round == 0 && st.iteration == 0 && st.phase == Phase::Sweep)
            .map(|st| (st.tag, st.slot))
            .collect()
    }

    /// Assignment array (`-1` free) right after the first sweep.
    pub fn after_first_sweep(&self) -> Vec<i64> {
        let mut q = vec![-1; self.allocation.slot_count()];
        for (t, s) in self.first_sweep() {
            q[s] = t as i64;
        }
        q
    }

    pub fn rounds(&self) -> usize {
        self.trace.last().map_or(0, |st| st.round + 1)
    }
}

pub fn ombm_allocate(graph: &WeightedBipartiteGraph, bounds: &[usize]) -> Result<Allocation> {
    Ok(ombm_allocate_traced(graph, bounds)?.allocation)
}

pub fn ombm_allocate_traced(graph: &WeightedBipartiteGraph, bounds: &[usize]) -> Result<OmbmRun> {
    let nt = graph.tag_count();
    if bounds.len() != nt {
        return Err(Error::config(format!(
            "{} bounds for {nt} tags",
            bounds.len()
        )));
    }
    if bounds.contains(&0) {
        return Err(Error::config("tag bounds must be at least 1"));
    }
    let mut alloc = Allocation::empty(graph.slot_count(), nt, Some(bounds.to_vec()))?;
    let mut spent = vec![false; nt];
    let mut trace = Vec::new();
    let (mut round, mut iteration, mut in_round) = (0, 0, 0);

    loop {
        let live = Live {
            graph,
            alloc: &alloc,
            spent: &spent,
        };
        if !live.any_live_edge() {
            if in_round == 0 {
                break;
            }
            spent.fill(false);
            round += 1;
            iteration = 0;
            in_round = 0;
            continue;
        }

        let swept = live.dominating();
        if swept.is_empty() {
            // opposite tie directions make this unreachable
            return Err(Error::Contract(
                "live edges without a mutual-best pair".into(),
            ));
        }
        let mut queue = VecDeque::with_capacity(swept.len());
        for &(t, s) in &swept.edges {
            alloc.assign(s, t)?;
            spent[t] = true;
            queue.push_back(t);
            trace.push(TraceStep {
                round,
                iteration,
                phase: Phase::Sweep,
                tag: t,
                slot: s,
            });
        }
        in_round += swept.len();

        while let Some(u) = queue.pop_front() {
            for &v in graph.tag_neighbors(u) {
                let live = Live {
                    graph,
                    alloc: &alloc,
                    spent: &spent,
                };
                let Some(t) = live.best_tag(v) else { continue };
                if live.best_slot(t) != Some(v) {
                    continue;
                }
                alloc.assign(v, t)?;
                spent[t] = true;
                queue.push_back(t);
                in_round += 1;
                trace.push(TraceStep {
                    round,
                    iteration,
                    phase: Phase::Propagation,
                    tag: t,
                    slot: v,
                });
            }
        }
        iteration += 1;
    }
    Ok(OmbmRun {
        allocation: alloc,
        trace,
    })
}
