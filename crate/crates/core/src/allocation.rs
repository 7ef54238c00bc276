//! Slot → tag assignments and the objectives used to score them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedBipartiteGraph;
use crate::influence::InfluenceEngine;
use crate::model::{SlotId, TagId};

/// Serialized marker for a slot without a tag.
pub const UNASSIGNED: i64 = -1;

/// Each slot carries at most one tag; a tag may cover many slots, up to its
/// bound when bounds are set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    assignment: Vec<Option<usize>>,
    counts: Vec<usize>,
    bounds: Option<Vec<usize>>,
}

impl Allocation {
    pub fn empty(slots: usize, tags: usize, bounds: Option<Vec<usize>>) -> Result<Self> {
        if let Some(b) = &bounds {
            if b.len() != tags {
                return Err(Error::config(format!("{} bounds for {tags} tags", b.len())));
            }
        }
        Ok(Allocation {
            assignment: vec![None; slots],
            counts: vec![0; tags],
            bounds,
        })
    }

    pub fn unbounded(slots: usize, tags: usize) -> Self {
        Allocation {
            assignment: vec![None; slots],
            counts: vec![0; tags],
            bounds: None,
        }
    }

    /// Builds an allocation from a `-1`-sentinel array.
    pub fn from_array(array: &[i64], tags: usize, bounds: Option<Vec<usize>>) -> Result<Self> {
        let mut a = Allocation::empty(array.len(), tags, bounds)?;
        for (slot, &t) in array.iter().enumerate() {
            match t {
                UNASSIGNED => {}
                t if t >= 0 && (t as usize) < tags => a.assign(slot, t as usize)?,
                t => {
                    return Err(Error::config(format!(
                        "slot {slot} assigned to unknown tag index {t}"
                    )))
                }
            }
        }
        Ok(a)
    }

    /// Fails if the slot already has a tag or the tag is at its bound.
    pub fn assign(&mut self, slot: usize, tag: usize) -> Result<()> {
        if let Some(t) = self.assignment[slot] {
            return Err(Error::Contract(format!(
                "slot {slot} already carries tag {t}"
            )));
        }
        if self.at_bound(tag) {
            return Err(Error::Contract(format!("tag {tag} is at its bound")));
        }
        self.assignment[slot] = Some(tag);
        self.counts[tag] += 1;
        Ok(())
    }

    pub fn tag_of(&self, slot: usize) -> Option<usize> {
        self.assignment[slot]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn bounds(&self) -> Option<&[usize]> {
        self.bounds.as_deref()
    }

    pub fn bound(&self, tag: usize) -> Option<usize> {
        self.bounds.as_ref().map(|b| b[tag])
    }

    pub fn at_bound(&self, tag: usize) -> bool {
        self.bound(tag).is_some_and(|b| self.counts[tag] >= b)
    }

    pub fn slot_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn tag_count(&self) -> usize {
        self.counts.len()
    }

    pub fn matched_slots(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    pub fn matched_tags(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn slots_of(&self, tag: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&s| self.assignment[s] == Some(tag))
            .collect()
    }

    /// `-1` for unassigned slots.
    pub fn to_array(&self) -> Vec<i64> {
        self.assignment
            .iter()
            .map(|a| a.map_or(UNASSIGNED, |t| t as i64))
            .collect()
    }

    /// Checks that counts match the assignment and respect the bounds.
    pub fn check(&self) -> Result<()> {
        let mut recount = vec![0; self.counts.len()];
        for t in self.assignment.iter().flatten() {
            recount[*t] += 1;
        }
        if recount != self.counts {
            return Err(Error::Contract(
                "tag counts disagree with assignment".into(),
            ));
        }
        if let Some(b) = &self.bounds {
            if let Some(t) = (0..b.len()).find(|&t| self.counts[t] > b[t]) {
                return Err(Error::Contract(format!(
                    "tag {t} has {} slots, bound {}",
                    self.counts[t], b[t]
                )));
            }
        }
        Ok(())
    }

    /// Every assigned pair must be an edge of `graph`.
    pub fn check_against(&self, graph: &WeightedBipartiteGraph) -> Result<()> {
        self.check()?;
        if self.slot_count() != graph.slot_count() || self.tag_count() != graph.tag_count() {
            return Err(Error::Contract("allocation and graph sizes differ".into()));
        }
        for (s, t) in self.assignment.iter().enumerate() {
            if let Some(t) = *t {
                if graph.weight(t, s).is_none() {
                    return Err(Error::Contract(format!(
                        "slot {s} uses missing edge to tag {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_file(&self, graph: &WeightedBipartiteGraph) -> AllocationFile {
        AllocationFile {
            assignment: self.to_array(),
            counts: self.counts.iter().copied().enumerate().collect(),
            bounds: self
                .bounds
                .as_ref()
                .map(|b| b.iter().copied().enumerate().collect()),
            tags: graph.tags().to_vec(),
            slots: graph.slots().to_vec(),
        }
    }

    pub fn to_json(&self, graph: &WeightedBipartiteGraph) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file(graph))?)
    }

    pub fn save(&self, graph: &WeightedBipartiteGraph, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json(graph)?).map_err(|e| Error::io(path, e))
    }
}

/// On-disk form: `{"assignment": [-1, 0, ...], "counts": {...}, "bounds": {...}}`
/// plus the tag and slot ids the indices refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationFile {
    pub assignment: Vec<i64>,
    pub counts: BTreeMap<usize, usize>,
    pub bounds: Option<BTreeMap<usize, usize>>,
    #[serde(default)]
    pub tags: Vec<TagId>,
    #[serde(default)]
    pub slots: Vec<SlotId>,
}

impl AllocationFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rebuilds the allocation, rejecting files whose counts disagree with
    /// the assignment.
    pub fn into_allocation(self, tags: usize) -> Result<Allocation> {
        let bounds = match &self.bounds {
            None => None,
            Some(m) => Some(
                (0..tags)
                    .map(|t| {
                        m.get(&t)
                            .copied()
                            .ok_or_else(|| Error::config(format!("no bound for tag {t}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let a = Allocation::from_array(&self.assignment, tags, bounds)?;
        for (t, &c) in a.counts().iter().enumerate() {
            if self.counts.get(&t).copied().unwrap_or(0) != c {
                return Err(Error::Contract(format!(
                    "stored count for tag {t} is wrong"
                )));
            }
        }
        Ok(a)
    }
}

/// Score of an allocation, built up one (tag, slot) pair at a time.
pub trait AllocationObjective: Sync {
    type State: Clone + Send;

    fn initial(&self) -> Self::State;

    /// Adds `slot` to the group of `tag` and returns the increase.
    fn add(&self, state: &mut Self::State, tag: usize, slot: usize) -> f64;

    /// Value of a whole allocation, adding pairs in slot order.
    fn value(&self, allocation: &Allocation) -> f64 {
        let mut state = self.initial();
        allocation
            .assignment()
            .iter()
            .enumerate()
            .filter_map(|(s, t)| t.map(|t| (t, s)))
            .map(|(t, s)| self.add(&mut state, t, s))
            .sum()
    }
}

/// Sum of edge weights.
pub struct EdgeWeightSum<'a>(pub &'a WeightedBipartiteGraph);

impl AllocationObjective for EdgeWeightSum<'_> {
    type State = ();

    fn initial(&self) {}

    fn add(&self, _: &mut (), tag: usize, slot: usize) -> f64 {
        self.0.weight(tag, slot).unwrap_or(0.0)
    }
}

/// `Σ_t I(S_t | {t})` where `S_t` are the slots displaying tag `t`. Each
/// slot shows a single tag, so the groups are disjoint.
pub struct TagGroupInfluence<'a> {
    engine: &'a InfluenceEngine,
    slot_pos: Vec<usize>,
    tag_pos: Vec<usize>,
}

impl<'a> TagGroupInfluence<'a> {
    pub fn new(engine: &'a InfluenceEngine, graph: &WeightedBipartiteGraph) -> Result<Self> {
        Ok(TagGroupInfluence {
            engine,
            slot_pos: graph
                .slots()
                .iter()
                .map(|s| engine.slot_position(s))
                .collect::<Result<_>>()?,
            tag_pos: graph
                .tags()
                .iter()
                .map(|t| engine.tag_position(t))
                .collect::<Result<_>>()?,
        })
    }
}

impl AllocationObjective for TagGroupInfluence<'_> {
    /// Π (1 - p·q) per (graph tag, user) over the tag's slots so far.
    type State = Vec<f64>;

    fn initial(&self) -> Vec<f64> {
        vec![1.0; self.tag_pos.len() * self.engine.user_count()]
    }

    fn add(&self, miss: &mut Vec<f64>, tag: usize, slot: usize) -> f64 {
        let users = self.engine.user_count();
        let t = self.tag_pos[tag];
        let mut gain = 0.0;
        for e in self.engine.exposure(self.slot_pos[slot]) {
            let pq = e.probability * self.engine.affinity(e.user, t);
            let m = &mut miss[tag * users + e.user];
            gain += *m * pq;
            *m *= 1.0 - pq;
        }
        gain
    }
}
