//! Input records, billboard slots and the user-exposure index.

mod geo;
mod io;
mod slots;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use geo::{haversine_m, EARTH_RADIUS_M};
pub use io::{
    load_affinities, load_billboards, load_trajectories, read_affinities, read_billboards,
    read_trajectories, write_affinities, write_billboards, write_trajectories, Dataset,
};
pub use slots::{build_exposure, expand_slots, Exposure, ExposureModel, Horizon, SlotInventory};
pub use synth::{generate_synthetic, Extent, SyntheticSpec};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(UserId);
string_id!(BillboardId);
string_id!(
    /// Advertisement content label.
    TagId
);

/// WGS-84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// One stay of a user: where they were and during which closed interval of
/// integer seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub user_id: UserId,
    pub location: LatLon,
    pub t_start: i64,
    pub t_end: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BillboardRecord {
    pub billboard_id: BillboardId,
    pub location: LatLon,
    pub cost: f64,
    pub panel_size: f64,
}

/// Probability that a user is persuaded by a single tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TagAffinity {
    pub user_id: UserId,
    pub tag_id: TagId,
    pub probability: f64,
}

/// A billboard rented for one window of the horizon.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotId {
    pub billboard_id: BillboardId,
    pub slot_index: u32,
}

impl SlotId {
    pub fn new(billboard_id: impl Into<BillboardId>, slot_index: u32) -> Self {
        SlotId {
            billboard_id: billboard_id.into(),
            slot_index,
        }
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.billboard_id, self.slot_index)
    }
}
