//! Tag × slot weighted bipartite graph and z-score edge pruning.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::influence::InfluenceEngine;
use crate::model::{SlotId, TagId};
use crate::selection::SelectionResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tag: usize,
    pub slot: usize,
    pub weight: f64,
}

/// Mean and population standard deviation of the edge weights of the
/// unpruned graph, plus the threshold parameter once pruned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    #[serde(serialize_with = "fixed9")]
    pub mu: f64,
    #[serde(serialize_with = "fixed9")]
    pub sigma: f64,
    pub theta: Option<f64>,
}

/// Mean and population standard deviation. A constant sample has σ = 0
/// exactly.
pub fn weight_stats(weights: &[f64]) -> (f64, f64) {
    if weights.is_empty() {
        return (0.0, 0.0);
    }
    if weights.iter().all(|&w| w == weights[0]) {
        return (weights[0], 0.0);
    }
    let n = weights.len() as f64;
    let mu = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mu) * (w - mu)).sum::<f64>() / n;
    (mu, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBipartiteGraph {
    tags: Vec<TagId>,
    slots: Vec<SlotId>,
    /// Sorted by `(tag, slot)`.
    edges: Vec<Edge>,
    stats: GraphStats,
    slot_influence: Option<Vec<f64>>,
    /// `tags × slots`, `None` where there is no edge.
    matrix: Vec<Option<f64>>,
    tag_adj: Vec<Vec<usize>>,
    slot_adj: Vec<Vec<usize>>,
}

impl WeightedBipartiteGraph {
    /// Validates the edge list and computes μ, σ over it.
    pub fn new(tags: Vec<TagId>, slots: Vec<SlotId>, edges: Vec<Edge>) -> Result<Self> {
        let weights: Vec<f64> = edges.iter().map(|e| e.weight).collect();
        let (mu, sigma) = weight_stats(&weights);
        Self::with_stats(
            tags,
            slots,
            edges,
            GraphStats {
                mu,
                sigma,
                theta: None,
            },
        )
    }

    fn with_stats(
        tags: Vec<TagId>,
        slots: Vec<SlotId>,
        mut edges: Vec<Edge>,
        stats: GraphStats,
    ) -> Result<Self> {
        let (nt, ns) = (tags.len(), slots.len());
        let mut matrix = vec![None; nt * ns];
        let mut tag_adj = vec![Vec::new(); nt];
        let mut slot_adj = vec![Vec::new(); ns];
        edges.sort_by_key(|e| (e.tag, e.slot));
        for e in &edges {
            if e.tag >= nt || e.slot >= ns {
                return Err(Error::config(format!(
                    "edge ({}, {}) outside a {nt} x {ns} graph",
                    e.tag, e.slot
                )));
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::config(format!(
                    "edge ({}, {}) has invalid weight {}",
                    e.tag, e.slot, e.weight
                )));
            }
            let cell = &mut matrix[e.tag * ns + e.slot];
            if cell.is_some() {
                return Err(Error::config(format!(
                    "duplicate edge ({}, {})",
                    e.tag, e.slot
                )));
            }
            *cell = Some(e.weight);
            tag_adj[e.tag].push(e.slot);
            slot_adj[e.slot].push(e.tag);
        }
        for adj in &mut slot_adj {
            adj.sort_unstable();
        }
        Ok(WeightedBipartiteGraph {
            tags,
            slots,
            edges,
            stats,
            slot_influence: None,
            matrix,
            tag_adj,
            slot_adj,
        })
    }

    /// Complete graph from a `tags × slots` weight matrix with generated
    /// ids (`t###`, `b#i`).
    pub fn from_matrix(weights: &[Vec<f64>]) -> Result<Self> {
        let opt: Vec<Vec<Option<f64>>> = weights
            .iter()
            .map(|r| r.iter().copied().map(Some).collect())
            .collect();
        Self::from_sparse_matrix(&opt)
    }

    /// Like [`from_matrix`](Self::from_matrix); `None` cells have no edge.
    pub fn from_sparse_matrix(weights: &[Vec<Option<f64>>]) -> Result<Self> {
        let ns = weights.first().map_or(0, Vec::len);
        if weights.iter().any(|r| r.len() != ns) {
            return Err(Error::config("ragged weight matrix"));
        }
        let tags = (0..weights.len())
            .map(|t| format!("t{t:03}").into())
            .collect();
        let slots = (0..ns).map(|s| SlotId::new("b", s as u32)).collect();
        let edges = weights
            .iter()
            .enumerate()
            .flat_map(|(tag, row)| {
                row.iter()
                    .enumerate()
                    .filter_map(move |(slot, w)| w.map(|weight| Edge { tag, slot, weight }))
            })
            .collect();
        Self::new(tags, slots, edges)
    }

    pub fn tags(&self) -> &[TagId] {
        &self.tags
    }

    pub fn slots(&self) -> &[SlotId] {
        &self.slots
    }

    pub fn tag_count(&self) -> usize {
        self.tags.len()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn stats(&self) -> GraphStats {
        self.stats
    }

    /// Singleton slot influences `I({s})`, when built from an engine.
    pub fn slot_influence(&self) -> Option<&[f64]> {
        self.slot_influence.as_deref()
    }

    pub fn set_slot_influence(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.slots.len() {
            return Err(Error::config("one slot influence per slot expected"));
        }
        self.slot_influence = Some(values);
        Ok(())
    }

    pub fn weight(&self, tag: usize, slot: usize) -> Option<f64> {
        self.matrix[tag * self.slots.len() + slot]
    }

    /// Slots adjacent to `tag`, ascending.
    pub fn tag_neighbors(&self, tag: usize) -> &[usize] {
        &self.tag_adj[tag]
    }

    /// Tags adjacent to `slot`, ascending.
    pub fn slot_neighbors(&self, slot: usize) -> &[usize] {
        &self.slot_adj[slot]
    }

    pub fn tag_degree(&self, tag: usize) -> usize {
        self.tag_adj[tag].len()
    }

    /// Weight below which an edge is pruned; `None` when σ = 0 (nothing is
    /// pruned).
    pub fn threshold(&self, theta: f64) -> Option<f64> {
        (self.stats.sigma > 0.0).then_some(self.stats.mu + theta * self.stats.sigma)
    }

    /// Keeps edges with `w ≥ μ + θσ`, where μ and σ are those of the
    /// unpruned graph. Vertices are kept even when isolated.
    pub fn prune(&self, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::config(format!("theta must be finite, got {theta}")));
        }
        let edges = match self.threshold(theta) {
            None => self.edges.clone(),
            Some(cut) => self
                .edges
                .iter()
                .copied()
                .filter(|e| e.weight >= cut)
                .collect(),
        };
        let mut g = Self::with_stats(
            self.tags.clone(),
            self.slots.clone(),
            edges,
            GraphStats {
                theta: Some(theta),
                ..self.stats
            },
        )?;
        g.slot_influence = self.slot_influence.clone();
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GraphFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFileIn = serde_json::from_str(text)?;
        let edges = file
            .edges
            .into_iter()
            .map(|e| Edge {
                tag: e.t,
                slot: e.s,
                weight: e.w,
            })
            .collect();
        let mut g = match file.stats.theta {
            // unpruned: recompute from the stored weights
            None => Self::new(file.tags, file.slots, edges)?,
            Some(_) => Self::with_stats(file.tags, file.slots, edges, file.stats)?,
        };
        if let Some(si) = file.slot_influence {
            g.set_slot_influence(si)?;
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn fixed9<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::Error as _;
    RawValue::from_string(format!("{v:.9}"))
        .map_err(S::Error::custom)?
        .serialize(s)
}

fn fixed9_vec<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::{Error as _, SerializeSeq};
    match v {
        None => s.serialize_none(),
        Some(values) => {
            let mut seq = s.serialize_seq(Some(values.len()))?;
            for x in values {
                let raw = RawValue::from_string(format!("{x:.9}")).map_err(S::Error::custom)?;
                seq.serialize_element(&raw)?;
            }
            seq.end()
        }
    }
}

#[derive(Serialize)]
struct EdgeOut {
    t: usize,
    s: usize,
    #[serde(serialize_with = "fixed9")]
    w: f64,
}

#[derive(Serialize)]
struct GraphFile<'a> {
    tags: &'a [TagId],
    slots: &'a [SlotId],
    edges: Vec<EdgeOut>,
    stats: GraphStats,
    #[serde(serialize_with = "fixed9_vec", skip_serializing_if = "Option::is_none")]
    slot_influence: Option<Vec<f64>>,
}

impl<'a> From<&'a WeightedBipartiteGraph> for GraphFile<'a> {
    fn from(g: &'a WeightedBipartiteGraph) -> Self {
        GraphFile {
            tags: &g.tags,
            slots: &g.slots,
            edges: g
                .edges
                .iter()
                .map(|e| EdgeOut {
                    t: e.tag,
                    s: e.slot,
                    w: e.weight,
                })
                .collect(),
            stats: g.stats,
            slot_influence: g.slot_influence.clone(),
        }
    }
}

#[derive(Deserialize)]
struct EdgeIn {
    t: usize,
    s: usize,
    w: f64,
}

#[derive(Deserialize)]
struct GraphFileIn {
    tags: Vec<TagId>,
    slots: Vec<SlotId>,
    edges: Vec<EdgeIn>,
    stats: GraphStats,
    #[serde(default)]
    slot_influence: Option<Vec<f64>>,
}

/// Complete graph over the given slot and tag positions with
/// `w(t, s) = I({s} | {t})`.
pub fn build_graph(
    engine: &InfluenceEngine,
    slots: &[usize],
    tags: &[usize],
) -> Result<WeightedBipartiteGraph> {
    if slots.is_empty() || tags.is_empty() {
        return Err(Error::config("graph needs at least one slot and one tag"));
    }
    let edges: Vec<Edge> = (0..tags.len())
        .into_par_iter()
        .flat_map_iter(|ti| {
            (0..slots.len()).map(move |si| Edge {
                tag: ti,
                slot: si,
                weight: engine.conditional_influence(&[slots[si]], &[tags[ti]]),
            })
        })
        .collect();
    let mut g = WeightedBipartiteGraph::new(
        tags.iter().map(|&t| engine.tags()[t].clone()).collect(),
        slots
            .iter()
            .map(|&s| engine.inventory().slots()[s].clone())
            .collect(),
        edges,
    )?;
    g.set_slot_influence(slots.iter().map(|&s| engine.slot_influence(&[s])).collect())?;
    Ok(g)
}

pub fn build_graph_from_selection(
    engine: &InfluenceEngine,
    selection: &SelectionResult,
) -> Result<WeightedBipartiteGraph> {
    build_graph(
        engine,
        &selection.slot_positions(engine)?,
        &selection.tag_positions(engine)?,
    )
}
