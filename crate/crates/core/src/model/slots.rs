use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geo::{haversine_m, METERS_PER_DEG_LAT};
use super::{BillboardId, BillboardRecord, SlotId, TrajectoryRecord, UserId};
use crate::error::{Error, Result};

/// Operating horizon `[start, end)` cut into windows of `slot_len` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: i64,
    pub end: i64,
    pub slot_len: i64,
}

impl Horizon {
    pub fn new(start: i64, end: i64, slot_len: i64) -> Result<Self> {
        let h = Horizon {
            start,
            end,
            slot_len,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_len <= 0 {
            return Err(Error::config(format!(
                "slot length must be positive, got {}",
                self.slot_len
            )));
        }
        if self.end <= self.start {
            return Err(Error::config(format!(
                "empty horizon [{}, {}]",
                self.start, self.end
            )));
        }
        if (self.end - self.start) % self.slot_len != 0 {
            return Err(Error::config(format!(
                "slot length {} does not divide the horizon length {}",
                self.slot_len,
                self.end - self.start
            )));
        }
        Ok(())
    }

    pub fn slots_per_billboard(&self) -> u32 {
        ((self.end - self.start) / self.slot_len) as u32
    }

    /// Closed interval of integer seconds covered by a slot. Consecutive
    /// windows do not share an instant.
    pub fn window(&self, slot_index: u32) -> (i64, i64) {
        let lo = self.start + i64::from(slot_index) * self.slot_len;
        (lo, lo + self.slot_len - 1)
    }
}

/// Rule that turns "user passed by billboard during the slot" into a
/// probability of being reached.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ExposureModel {
    /// `panel_size / max panel_size` over the billboard database.
    #[default]
    PanelSizeRatio,
    /// Every exposed user is reached with the same probability.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposure {
    /// Position in [`SlotInventory::users`].
    pub user: usize,
    pub probability: f64,
}

/// Every slot with the users it can reach.
#[derive(Debug, Clone)]
pub struct SlotInventory {
    slots: Vec<SlotId>,
    users: Vec<UserId>,
    exposure: Vec<Vec<Exposure>>,
    position: HashMap<SlotId, usize>,
    horizon: Option<Horizon>,
    radius_m: f64,
}

impl SlotInventory {
    /// Assembles an inventory from precomputed exposure lists. Each list is
    /// sorted by user and deduplicated; probabilities must lie in (0, 1].
    pub fn from_parts(
        slots: Vec<SlotId>,
        users: Vec<UserId>,
        exposure: Vec<Vec<Exposure>>,
        horizon: Option<Horizon>,
        radius_m: f64,
    ) -> Result<Self> {
        if slots.len() != exposure.len() {
            return Err(Error::config(format!(
                "{} slots but {} exposure lists",
                slots.len(),
                exposure.len()
            )));
        }
        let mut position = HashMap::with_capacity(slots.len());
        for (i, s) in slots.iter().enumerate() {
            if position.insert(s.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate slot {s}")));
            }
        }
        let mut exposure = exposure;
        for (slot, list) in slots.iter().zip(exposure.iter_mut()) {
            list.sort_by_key(|e| e.user);
            list.dedup_by_key(|e| e.user);
            for e in list.iter() {
                if e.user >= users.len() {
                    return Err(Error::config(format!(
                        "slot {slot} references user position {} of {}",
                        e.user,
                        users.len()
                    )));
                }
                if !(e.probability > 0.0 && e.probability <= 1.0) {
                    return Err(Error::config(format!(
                        "slot {slot}: exposure probability {} outside (0, 1]",
                        e.probability
                    )));
                }
            }
        }
        Ok(SlotInventory {
            slots,
            users,
            exposure,
            position,
            horizon,
            radius_m,
        })
    }

    pub fn slots(&self) -> &[SlotId] {
        &self.slots
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn horizon(&self) -> Option<Horizon> {
        self.horizon
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn position(&self, slot: &SlotId) -> Option<usize> {
        self.position.get(slot).copied()
    }

    /// Users reached by the slot at `pos`, ascending by user position.
    pub fn exposure(&self, pos: usize) -> &[Exposure] {
        &self.exposure[pos]
    }

    pub fn exposure_of(&self, slot: &SlotId) -> Result<&[Exposure]> {
        self.position(slot)
            .map(|p| self.exposure(p))
            .ok_or_else(|| Error::UnknownSlot(slot.to_string()))
    }
}

/// Cuts every billboard into `(end - start) / slot_len` slots, ordered by
/// `(billboard_id, slot_index)`.
pub fn expand_slots(billboards: &[BillboardRecord], horizon: Horizon) -> Result<Vec<SlotId>> {
    horizon.validate()?;
    let per = horizon.slots_per_billboard();
    let mut ids: Vec<&BillboardId> = billboards.iter().map(|b| &b.billboard_id).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::config(format!("duplicate billboard id `{}`", w[0])));
    }
    Ok(ids
        .into_iter()
        .flat_map(|id| (0..per).map(move |i| SlotId::new(id.clone(), i)))
        .collect())
}

/// Builds the exposure index: a user is exposed to a slot when one of their
/// records lies within `radius_m` of the billboard and its time interval
/// intersects the slot window.
pub fn build_exposure(
    slots: &[SlotId],
    billboards: &[BillboardRecord],
    trajectories: &[TrajectoryRecord],
    horizon: Horizon,
    radius_m: f64,
    model: ExposureModel,
) -> Result<SlotInventory> {
    horizon.validate()?;
    if !(radius_m > 0.0 && radius_m.is_finite()) {
        return Err(Error::config(format!(
            "radius must be positive, got {radius_m}"
        )));
    }
    if let ExposureModel::Constant(p) = model {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::config(format!(
                "constant exposure probability {p} outside (0, 1]"
            )));
        }
    }

    let by_id: HashMap<&BillboardId, &BillboardRecord> =
        billboards.iter().map(|b| (&b.billboard_id, b)).collect();
    let max_panel = billboards
        .iter()
        .map(|b| b.panel_size)
        .fold(0.0_f64, f64::max);

    let users: Vec<UserId> = {
        let mut u: Vec<UserId> = trajectories.iter().map(|t| t.user_id.clone()).collect();
        u.sort();
        u.dedup();
        u
    };
    let user_pos: HashMap<&UserId, usize> = users.iter().enumerate().map(|(i, u)| (u, i)).collect();

    // records sorted by latitude so each billboard scans only a band
    let mut by_lat: Vec<(f64, usize)> = trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| (t.location.lat, i))
        .collect();
    by_lat.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let band = radius_m / METERS_PER_DEG_LAT * (1.0 + 1e-9);

    // group slot positions per billboard, keeping the first-seen order
    let mut groups: BTreeMap<&BillboardId, Vec<usize>> = BTreeMap::new();
    for (pos, s) in slots.iter().enumerate() {
        if s.slot_index >= horizon.slots_per_billboard() {
            return Err(Error::config(format!(
                "slot {s} outside the horizon ({} slots per billboard)",
                horizon.slots_per_billboard()
            )));
        }
        groups.entry(&s.billboard_id).or_default().push(pos);
    }
    for id in groups.keys() {
        if !by_id.contains_key(id) {
            return Err(Error::config(format!(
                "slot references unknown billboard `{id}`"
            )));
        }
    }

    let per_billboard: Vec<Vec<(usize, Vec<Exposure>)>> = groups
        .par_iter()
        .map(|(id, positions)| {
            let b = by_id[id];
            let lo = by_lat.partition_point(|(lat, _)| *lat < b.location.lat - band);
            let hi = by_lat.partition_point(|(lat, _)| *lat <= b.location.lat + band);
            let near: Vec<&TrajectoryRecord> = by_lat[lo..hi]
                .iter()
                .map(|&(_, i)| &trajectories[i])
                .filter(|t| haversine_m(t.location, b.location) <= radius_m)
                .collect();
            let probability = match model {
                ExposureModel::PanelSizeRatio => b.panel_size / max_panel,
                ExposureModel::Constant(p) => p,
            };
            positions
                .iter()
                .map(|&pos| {
                    let (w_lo, w_hi) = horizon.window(slots[pos].slot_index);
                    let mut list: Vec<Exposure> = near
                        .iter()
                        .filter(|t| t.t_start <= w_hi && t.t_end >= w_lo)
                        .map(|t| Exposure {
                            user: user_pos[&t.user_id],
                            probability,
                        })
                        .collect();
                    list.sort_by_key(|e| e.user);
                    list.dedup_by_key(|e| e.user);
                    (pos, list)
                })
                .collect()
        })
        .collect();

    let mut exposure = vec![Vec::new(); slots.len()];
    for (pos, list) in per_billboard.into_iter().flatten() {
        exposure[pos] = list;
    }
    SlotInventory::from_parts(slots.to_vec(), users, exposure, Some(horizon), radius_m)
}
