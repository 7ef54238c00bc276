//! Seeded generator for desk-scale city datasets.
//!
//! The city is a handful of hotspots. Billboards stand near hotspots, users
//! visit hotspots (mostly their home one), and each hotspot favours a couple
//! of tags so that different slots reach audiences with different tastes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::geo::METERS_PER_DEG_LAT;
use super::{
    BillboardRecord, Dataset, Horizon, LatLon, TagAffinity, TagId, TrajectoryRecord, UserId,
};
use crate::error::{Error, Result};

/// Bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl Default for Extent {
    /// Roughly lower Manhattan.
    fn default() -> Self {
        Extent {
            min_lat: 40.70,
            max_lat: 40.78,
            min_lon: -74.02,
            max_lon: -73.94,
        }
    }
}

impl Extent {
    pub fn contains(&self, p: LatLon) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat)
            && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    fn clamp(&self, p: LatLon) -> LatLon {
        LatLon::new(
            p.lat.clamp(self.min_lat, self.max_lat),
            p.lon.clamp(self.min_lon, self.max_lon),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub users: usize,
    pub billboards: usize,
    pub tags: usize,
    pub horizon: Horizon,
    pub extent: Extent,
    /// Number of activity centres; 0 picks one per six billboards (at least 3).
    pub hotspots: usize,
    pub visits_per_user: (usize, usize),
}

impl SyntheticSpec {
    pub fn new(seed: u64, users: usize, billboards: usize, tags: usize) -> Self {
        SyntheticSpec {
            seed,
            users,
            billboards,
            tags,
            horizon: Horizon {
                start: 0,
                end: 86_400,
                slot_len: 3_600,
            },
            extent: Extent::default(),
            hotspots: 0,
            visits_per_user: (2, 6),
        }
    }
}

const SPREAD_BILLBOARD_M: f64 = 60.0;
const SPREAD_VISIT_M: f64 = 90.0;

fn jitter(rng: &mut ChaCha8Rng, centre: LatLon, sigma_m: f64) -> LatLon {
    let n = Normal::new(0.0, sigma_m).expect("positive sigma");
    let dy = n.sample(rng) / METERS_PER_DEG_LAT;
    let dx = n.sample(rng) / (METERS_PER_DEG_LAT * centre.lat.to_radians().cos().max(1e-6));
    LatLon::new(centre.lat + dy, centre.lon + dx)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.users == 0 || spec.billboards == 0 || spec.tags == 0 {
        return Err(Error::config(
            "user, billboard and tag counts must be positive",
        ));
    }
    let (vmin, vmax) = spec.visits_per_user;
    if vmin == 0 || vmax < vmin {
        return Err(Error::config(format!(
            "bad visits per user range {vmin}..={vmax}"
        )));
    }
    spec.horizon.validate()?;
    let ext = spec.extent;
    if !(ext.min_lat < ext.max_lat && ext.min_lon < ext.max_lon) {
        return Err(Error::config("degenerate extent"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_hot = if spec.hotspots == 0 {
        (spec.billboards / 6).max(3)
    } else {
        spec.hotspots
    };

    let hotspots: Vec<LatLon> = (0..n_hot)
        .map(|_| {
            LatLon::new(
                rng.random_range(ext.min_lat..ext.max_lat),
                rng.random_range(ext.min_lon..ext.max_lon),
            )
        })
        .collect();

    // each hotspot favours up to two tags
    let favoured: Vec<Vec<usize>> = (0..n_hot)
        .map(|_| {
            let mut t: Vec<usize> = (0..spec.tags).collect();
            t.shuffle(&mut rng);
            t.truncate(2);
            t
        })
        .collect();

    let billboards: Vec<BillboardRecord> = (0..spec.billboards)
        .map(|i| {
            let h = i % n_hot;
            let location = ext.clamp(jitter(&mut rng, hotspots[h], SPREAD_BILLBOARD_M));
            let panel_size = f64::from(rng.random_range(20_u32..=96)) * 0.5;
            let cost = (panel_size * 25.0 * rng.random_range(0.8..1.2_f64)).round();
            BillboardRecord {
                billboard_id: format!("b{i:04}").into(),
                location,
                cost,
                panel_size,
            }
        })
        .collect();

    let hz = spec.horizon;
    let mut trajectories = Vec::new();
    let mut affinities = Vec::new();
    // global tag popularity ~ 1 / (rank + 1)
    let popularity: Vec<f64> = (0..spec.tags).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let pop_total: f64 = popularity.iter().sum();

    for i in 0..spec.users {
        let user_id: UserId = format!("u{i:05}").into();
        let home = rng.random_range(0..n_hot);
        let visits = rng.random_range(vmin..=vmax);
        for _ in 0..visits {
            let h = if rng.random_bool(0.6) {
                home
            } else {
                rng.random_range(0..n_hot)
            };
            let location = ext.clamp(jitter(&mut rng, hotspots[h], SPREAD_VISIT_M));
            let t_start = rng.random_range(hz.start..hz.end);
            let dur = rng.random_range(600..=7_200_i64);
            let t_end = (t_start + dur).min(hz.end - 1);
            trajectories.push(TrajectoryRecord {
                user_id: user_id.clone(),
                location,
                t_start,
                t_end,
            });
        }

        let n_aff = rng.random_range(1..=spec.tags.min(3));
        let mut chosen: Vec<usize> = Vec::with_capacity(n_aff);
        for &t in &favoured[home] {
            if chosen.len() < n_aff && rng.random_bool(0.7) {
                chosen.push(t);
            }
        }
        while chosen.len() < n_aff {
            let mut x = rng.random_range(0.0..pop_total);
            let mut pick = spec.tags - 1;
            for (t, p) in popularity.iter().enumerate() {
                if x < *p {
                    pick = t;
                    break;
                }
                x -= p;
            }
            if !chosen.contains(&pick) {
                chosen.push(pick);
            }
        }
        chosen.sort_unstable();
        for t in chosen {
            let probability = (rng.random_range(0.05..0.9_f64) * 1e4).round() / 1e4;
            affinities.push(TagAffinity {
                user_id: user_id.clone(),
                tag_id: tag_name(t),
                probability,
            });
        }
    }

    Ok(Dataset {
        trajectories,
        billboards,
        affinities,
    })
}

fn tag_name(i: usize) -> TagId {
    format!("t{i:03}").into()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn csv_bytes(d: &Dataset) -> Vec<u8> {
        let mut out = Vec::new();
        crate::model::write_trajectories(&mut out, &d.trajectories).unwrap();
        crate::model::write_billboards(&mut out, &d.billboards).unwrap();
        crate::model::write_affinities(&mut out, &d.affinities).unwrap();
        out
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec::new(7, 200, 12, 5);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(csv_bytes(&a), csv_bytes(&b));
        let c = generate_synthetic(&SyntheticSpec::new(8, 200, 12, 5)).unwrap();
        assert_ne!(csv_bytes(&a), csv_bytes(&c));
    }

    #[test]
    fn single_tag() {
        let d = generate_synthetic(&SyntheticSpec::new(1, 50, 4, 1)).unwrap();
        assert!(!d.affinities.is_empty());
        assert!(d.affinities.iter().all(|a| a.tag_id.as_str() == "t000"));
    }

    #[test]
    fn thousand_distinct_users() {
        let d = generate_synthetic(&SyntheticSpec::new(3, 1000, 10, 4)).unwrap();
        let users: BTreeSet<_> = d.trajectories.iter().map(|t| &t.user_id).collect();
        assert_eq!(users.len(), 1000);
    }

    #[test]
    fn values_in_range() {
        let spec = SyntheticSpec::new(5, 300, 20, 6);
        let d = generate_synthetic(&spec).unwrap();
        assert!(d
            .affinities
            .iter()
            .all(|a| (0.0..=1.0).contains(&a.probability)));
        assert!(d
            .billboards
            .iter()
            .all(|b| spec.extent.contains(b.location)));
        assert!(d
            .trajectories
            .iter()
            .all(|t| spec.extent.contains(t.location)
                && t.t_start <= t.t_end
                && t.t_start >= spec.horizon.start
                && t.t_end < spec.horizon.end));
        assert!(d
            .billboards
            .iter()
            .all(|b| b.panel_size > 0.0 && b.cost >= 0.0));
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(generate_synthetic(&SyntheticSpec::new(1, 0, 4, 1)).is_err());
        assert!(generate_synthetic(&SyntheticSpec::new(1, 4, 0, 1)).is_err());
        assert!(generate_synthetic(&SyntheticSpec::new(1, 4, 4, 0)).is_err());
    }
}
