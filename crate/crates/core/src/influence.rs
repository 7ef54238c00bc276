//! Trajectory-based influence of billboard slots, optionally conditioned on
//! the tags being displayed.
//!
//! For a slot set `S` and a tag set `T`, user `u` is reached by slot `b`
//! with probability `p(u,b)` and persuaded by the tags with probability
//! `q(u,T) = 1 - Π_{t∈T} (1 - q(u,t))`. The tag-conditioned influence is
//!
//! ```text
//! I(S | T) = Σ_u [ 1 - Π_{b∈S} (1 - p(u,b) · q(u,T)) ]
//! ```
//!
//! and the plain slot influence `I(S)` is the same sum with `q ≡ 1`. Both
//! are non-negative, monotone and submodular in `S`; `I(S | T)` is also
//! monotone and submodular in `T` for a fixed `S`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Exposure, SlotId, SlotInventory, TagAffinity, TagId, UserId};

/// Slot and tag sets to evaluate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InfluenceQuery {
    pub slots: BTreeSet<SlotId>,
    pub tags: BTreeSet<TagId>,
}

impl InfluenceQuery {
    pub fn new(
        slots: impl IntoIterator<Item = SlotId>,
        tags: impl IntoIterator<Item = TagId>,
    ) -> Self {
        InfluenceQuery {
            slots: slots.into_iter().collect(),
            tags: tags.into_iter().collect(),
        }
    }
}

/// An item that can be added to a query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Candidate {
    Slot(SlotId),
    Tag(TagId),
}

/// Evaluates influence over a slot inventory and a tag catalog.
#[derive(Debug, Clone)]
pub struct InfluenceEngine {
    inventory: SlotInventory,
    tags: Vec<TagId>,
    tag_pos: HashMap<TagId, usize>,
    /// `users × tags`, row-major by user.
    affinity: Vec<f64>,
}

impl InfluenceEngine {
    /// The catalog is every tag that appears in `affinities`, sorted.
    pub fn new(inventory: SlotInventory, affinities: &[TagAffinity]) -> Result<Self> {
        let mut tags: Vec<TagId> = affinities.iter().map(|a| a.tag_id.clone()).collect();
        tags.sort();
        tags.dedup();
        Self::with_catalog(inventory, tags, affinities)
    }

    /// Uses an explicit catalog. Affinities of users absent from the
    /// inventory are ignored; missing (user, tag) pairs count as 0.
    pub fn with_catalog(
        inventory: SlotInventory,
        tags: Vec<TagId>,
        affinities: &[TagAffinity],
    ) -> Result<Self> {
        let mut tag_pos = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if tag_pos.insert(t.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate tag `{t}` in catalog")));
            }
        }
        let user_pos: HashMap<&UserId, usize> = inventory
            .users()
            .iter()
            .enumerate()
            .map(|(i, u)| (u, i))
            .collect();
        let n_tags = tags.len();
        let mut affinity = vec![0.0; inventory.users().len() * n_tags];
        for a in affinities {
            if !(0.0..=1.0).contains(&a.probability) {
                return Err(Error::config(format!(
                    "affinity ({}, {}) = {} outside [0, 1]",
                    a.user_id, a.tag_id, a.probability
                )));
            }
            let t = *tag_pos
                .get(&a.tag_id)
                .ok_or_else(|| Error::UnknownTag(a.tag_id.to_string()))?;
            if let Some(&u) = user_pos.get(&a.user_id) {
                affinity[u * n_tags + t] = a.probability;
            }
        }
        Ok(InfluenceEngine {
            inventory,
            tags,
            tag_pos,
            affinity,
        })
    }

    /// Small dense instance: `exposure[s][u]` is `p(u, s)` (0 = not
    /// exposed) and `affinity[u][t]` is `q(u, t)`. Slots are named `b#i`,
    /// users `u###`, tags `t###`, so positions and id order agree.
    pub fn from_matrices(exposure: &[Vec<f64>], affinity: &[Vec<f64>]) -> Result<Self> {
        let n_users = affinity.len();
        let n_tags = affinity.first().map_or(0, Vec::len);
        if affinity.iter().any(|r| r.len() != n_tags) {
            return Err(Error::config("ragged affinity matrix"));
        }
        let users: Vec<UserId> = (0..n_users).map(|u| format!("u{u:03}").into()).collect();
        let slots: Vec<SlotId> = (0..exposure.len())
            .map(|s| SlotId::new("b", s as u32))
            .collect();
        let mut lists = Vec::with_capacity(exposure.len());
        for row in exposure {
            if row.len() != n_users {
                return Err(Error::config("exposure row length differs from user count"));
            }
            lists.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(user, &probability)| Exposure { user, probability })
                    .collect(),
            );
        }
        let inventory = SlotInventory::from_parts(slots, users.clone(), lists, None, 0.0)?;
        let tags: Vec<TagId> = (0..n_tags).map(|t| format!("t{t:03}").into()).collect();
        let affinities: Vec<TagAffinity> = affinity
            .iter()
            .enumerate()
            .flat_map(|(u, row)| {
                let users = &users;
                let tags = &tags;
                row.iter()
                    .enumerate()
                    .map(move |(t, &probability)| TagAffinity {
                        user_id: users[u].clone(),
                        tag_id: tags[t].clone(),
                        probability,
                    })
            })
            .collect();
        Self::with_catalog(inventory, tags, &affinities)
    }

    pub fn inventory(&self) -> &SlotInventory {
        &self.inventory
    }

    pub fn tags(&self) -> &[TagId] {
        &self.tags
    }

    pub fn user_count(&self) -> usize {
        self.inventory.users().len()
    }

    pub fn slot_count(&self) -> usize {
        self.inventory.len()
    }

    pub fn tag_count(&self) -> usize {
        self.tags.len()
    }

    pub fn slot_position(&self, slot: &SlotId) -> Result<usize> {
        self.inventory
            .position(slot)
            .ok_or_else(|| Error::UnknownSlot(slot.to_string()))
    }

    pub fn tag_position(&self, tag: &TagId) -> Result<usize> {
        self.tag_pos
            .get(tag)
            .copied()
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn exposure(&self, slot: usize) -> &[Exposure] {
        self.inventory.exposure(slot)
    }

    /// `q(u, t)`.
    pub fn affinity(&self, user: usize, tag: usize) -> f64 {
        self.affinity[user * self.tags.len() + tag]
    }

    /// `q(u, T) = 1 - Π_{t∈T} (1 - q(u,t))`; 0 for the empty set.
    pub fn tag_probability(&self, user: usize, tags: &[usize]) -> f64 {
        let row = &self.affinity[user * self.tags.len()..(user + 1) * self.tags.len()];
        1.0 - tags.iter().map(|&t| 1.0 - row[t]).product::<f64>()
    }

    /// `I(S)`.
    pub fn slot_influence(&self, slots: &[usize]) -> f64 {
        self.accumulate(slots, |_| 1.0)
    }

    /// `I(S | T)`; 0 when either set is empty.
    pub fn conditional_influence(&self, slots: &[usize], tags: &[usize]) -> f64 {
        if tags.is_empty() {
            return 0.0;
        }
        self.accumulate(slots, |u| self.tag_probability(u, tags))
    }

    /// Σ_u [1 - Π_{b∈slots} (1 - p(u,b)·factor(u))], summed in user order.
    fn accumulate(&self, slots: &[usize], factor: impl Fn(usize) -> f64) -> f64 {
        let mut hits: Vec<(usize, f64)> = slots
            .iter()
            .flat_map(|&s| {
                self.inventory
                    .exposure(s)
                    .iter()
                    .map(|e| (e.user, e.probability))
            })
            .collect();
        hits.sort_by_key(|h| h.0);
        let mut total = 0.0;
        let mut i = 0;
        while i < hits.len() {
            let user = hits[i].0;
            let f = factor(user);
            let mut miss = 1.0;
            while i < hits.len() && hits[i].0 == user {
                miss *= 1.0 - hits[i].1 * f;
                i += 1;
            }
            total += 1.0 - miss;
        }
        total
    }

    /// `I(S ∪ {c} | T) - I(S | T)` (or with `T ∪ {c}`), never negative.
    pub fn marginal_gain_at(
        &self,
        slots: &[usize],
        tags: &[usize],
        candidate: Item,
    ) -> Result<f64> {
        match candidate {
            Item::Slot(s) => {
                if slots.contains(&s) {
                    return Err(Error::Contract(format!(
                        "slot {} already in the base set",
                        self.inventory.slots()[s]
                    )));
                }
                if tags.is_empty() {
                    return Ok(0.0);
                }
                // only users reached by `s` change
                let mut gain = 0.0;
                for e in self.inventory.exposure(s) {
                    let q = self.tag_probability(e.user, tags);
                    let mut miss = 1.0;
                    for &b in slots {
                        if let Some(p) = self.probability(b, e.user) {
                            miss *= 1.0 - p * q;
                        }
                    }
                    gain += miss * e.probability * q;
                }
                Ok(gain)
            }
            Item::Tag(t) => {
                if tags.contains(&t) {
                    return Err(Error::Contract(format!(
                        "tag {} already in the base set",
                        self.tags[t]
                    )));
                }
                let mut with: Vec<usize> = tags.to_vec();
                with.push(t);
                let before = self.per_user(slots, tags);
                let after = self.per_user(slots, &with);
                Ok(before
                    .iter()
                    .zip(&after)
                    .map(|(b, a)| (a.1 - b.1).max(0.0))
                    .sum())
            }
        }
    }

    fn per_user(&self, slots: &[usize], tags: &[usize]) -> Vec<(usize, f64)> {
        let mut users: Vec<usize> = slots
            .iter()
            .flat_map(|&s| self.inventory.exposure(s).iter().map(|e| e.user))
            .collect();
        users.sort_unstable();
        users.dedup();
        users
            .into_iter()
            .map(|u| {
                let q = self.tag_probability(u, tags);
                let miss: f64 = slots
                    .iter()
                    .filter_map(|&b| self.probability(b, u))
                    .map(|p| 1.0 - p * q)
                    .product();
                (u, 1.0 - miss)
            })
            .collect()
    }

    /// `p(u, b)` if the user is exposed to the slot.
    pub fn probability(&self, slot: usize, user: usize) -> Option<f64> {
        let list = self.inventory.exposure(slot);
        list.binary_search_by_key(&user, |e| e.user)
            .ok()
            .map(|i| list[i].probability)
    }

    fn resolve(&self, q: &InfluenceQuery) -> Result<(Vec<usize>, Vec<usize>)> {
        let slots = q
            .slots
            .iter()
            .map(|s| self.slot_position(s))
            .collect::<Result<Vec<_>>>()?;
        let tags = q
            .tags
            .iter()
            .map(|t| self.tag_position(t))
            .collect::<Result<Vec<_>>>()?;
        Ok((slots, tags))
    }

    /// `I(S)` for the query's slots; its tags are ignored.
    pub fn query_slot_influence(&self, q: &InfluenceQuery) -> Result<f64> {
        let (slots, _) = self.resolve(q)?;
        Ok(self.slot_influence(&slots))
    }

    pub fn query_conditional_influence(&self, q: &InfluenceQuery) -> Result<f64> {
        let (slots, tags) = self.resolve(q)?;
        Ok(self.conditional_influence(&slots, &tags))
    }

    pub fn marginal_gain(&self, base: &InfluenceQuery, candidate: &Candidate) -> Result<f64> {
        let (slots, tags) = self.resolve(base)?;
        let item = match candidate {
            Candidate::Slot(s) => Item::Slot(self.slot_position(s)?),
            Candidate::Tag(t) => Item::Tag(self.tag_position(t)?),
        };
        self.marginal_gain_at(&slots, &tags, item)
    }
}

/// A candidate by position in the inventory or catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    Slot(usize),
    Tag(usize),
}
