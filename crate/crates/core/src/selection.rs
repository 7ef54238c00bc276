//! Stochastic greedy choice of the `k` slots and `ℓ` tags that feed the
//! allocation stage.
//!
//! Each step samples `ceil(n / budget · ln(1/ε))` of the remaining
//! candidates uniformly at random and takes the one with the largest
//! marginal gain; ties go to the candidate that comes first in id order.
//! With `full_sample` the sample is the whole remaining set, which is plain
//! greedy.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::{Candidate, InfluenceEngine, Item};
use crate::model::{SlotId, TagId};

/// Which set is filled first. The second phase conditions on the outcome
/// of the first; the first conditions on the whole other side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionOrder {
    #[default]
    SlotsThenTags,
    TagsThenSlots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub l: usize,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default)]
    pub full_sample: bool,
    #[serde(default)]
    pub order: SelectionOrder,
}

impl SelectionConfig {
    pub fn new(k: usize, l: usize, epsilon: f64, seed: u64) -> Self {
        SelectionConfig {
            k,
            l,
            epsilon,
            seed,
            full_sample: false,
            order: SelectionOrder::default(),
        }
    }

    /// Deterministic greedy over the full candidate set.
    pub fn full_greedy(k: usize, l: usize) -> Self {
        SelectionConfig {
            full_sample: true,
            ..Self::new(k, l, 0.01, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(Error::config("k and l must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Candidates evaluated per step for a ground set of `n` items.
    pub fn sample_size(&self, n: usize, budget: usize, remaining: usize) -> usize {
        if self.full_sample {
            return remaining;
        }
        let s = (n as f64 / budget as f64 * (1.0 / self.epsilon).ln()).ceil();
        (s.max(1.0) as usize).min(remaining)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub item: Candidate,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub slots: Vec<SlotId>,
    pub tags: Vec<TagId>,
    pub trace: Vec<TraceEntry>,
}

impl SelectionResult {
    pub fn slot_positions(&self, engine: &InfluenceEngine) -> Result<Vec<usize>> {
        self.slots.iter().map(|s| engine.slot_position(s)).collect()
    }

    pub fn tag_positions(&self, engine: &InfluenceEngine) -> Result<Vec<usize>> {
        self.tags.iter().map(|t| engine.tag_position(t)).collect()
    }

    /// `I(S' | T')` of the selected sets.
    pub fn influence(&self, engine: &InfluenceEngine) -> Result<f64> {
        Ok(engine
            .conditional_influence(&self.slot_positions(engine)?, &self.tag_positions(engine)?))
    }
}

/// Picks the best candidate of `sample`: largest gain, then lowest
/// position. Gains are computed independently, so the parallel map cannot
/// change the outcome.
fn best_of(sample: &[usize], gain: impl Fn(usize) -> f64 + Sync) -> (usize, f64) {
    let gains: Vec<(usize, f64)> = sample.par_iter().map(|&c| (c, gain(c))).collect();
    gains
        .into_iter()
        .reduce(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
        .expect("non-empty sample")
}

fn draw(rng: &mut ChaCha8Rng, remaining: &[usize], size: usize) -> Vec<usize> {
    if size >= remaining.len() {
        return remaining.to_vec();
    }
    let mut picked: Vec<usize> = index::sample(rng, remaining.len(), size)
        .into_iter()
        .map(|i| remaining[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Greedy over slots with the tag set fixed.
fn pick_slots(
    engine: &InfluenceEngine,
    config: &SelectionConfig,
    tags: &[usize],
    rng: &mut ChaCha8Rng,
    trace: &mut Vec<TraceEntry>,
) -> Vec<usize> {
    let n = engine.slot_count();
    let budget = config.k.min(n);
    let q: Vec<f64> = (0..engine.user_count())
        .map(|u| engine.tag_probability(u, tags))
        .collect();
    // running Π (1 - p·q) per user over the chosen slots
    let mut miss = vec![1.0; engine.user_count()];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut chosen = Vec::with_capacity(budget);

    for _ in 0..budget {
        let size = config.sample_size(n, budget, remaining.len());
        let sample = draw(rng, &remaining, size);
        let (slot, gain) = best_of(&sample, |s| {
            engine
                .exposure(s)
                .iter()
                .map(|e| miss[e.user] * e.probability * q[e.user])
                .sum()
        });
        for e in engine.exposure(slot) {
            miss[e.user] *= 1.0 - e.probability * q[e.user];
        }
        remaining.retain(|&s| s != slot);
        chosen.push(slot);
        trace.push(TraceEntry {
            step: trace.len(),
            item: Candidate::Slot(engine.inventory().slots()[slot].clone()),
            gain,
        });
    }
    chosen
}

/// Greedy over tags with the slot set fixed.
fn pick_tags(
    engine: &InfluenceEngine,
    config: &SelectionConfig,
    slots: &[usize],
    rng: &mut ChaCha8Rng,
    trace: &mut Vec<TraceEntry>,
) -> Vec<usize> {
    let n = engine.tag_count();
    let budget = config.l.min(n);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(budget);

    for _ in 0..budget {
        let size = config.sample_size(n, budget, remaining.len());
        let sample = draw(rng, &remaining, size);
        let (tag, gain) = best_of(&sample, |t| {
            engine
                .marginal_gain_at(slots, &chosen, Item::Tag(t))
                .expect("candidate is not chosen yet")
        });
        remaining.retain(|&t| t != tag);
        chosen.push(tag);
        trace.push(TraceEntry {
            step: trace.len(),
            item: Candidate::Tag(engine.tags()[tag].clone()),
            gain,
        });
    }
    chosen
}

/// Selects `min(k, |slots|)` slots and `min(ℓ, |tags|)` tags.
pub fn stochastic_greedy_select(
    engine: &InfluenceEngine,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    config.validate()?;
    if engine.slot_count() == 0 {
        return Err(Error::config("slot inventory is empty"));
    }
    if engine.tag_count() == 0 {
        return Err(Error::config("tag catalog is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::new();
    let all_tags: Vec<usize> = (0..engine.tag_count()).collect();
    let all_slots: Vec<usize> = (0..engine.slot_count()).collect();

    let (slots, tags) = match config.order {
        SelectionOrder::SlotsThenTags => {
            let s = pick_slots(engine, config, &all_tags, &mut rng, &mut trace);
            let t = pick_tags(engine, config, &s, &mut rng, &mut trace);
            (s, t)
        }
        SelectionOrder::TagsThenSlots => {
            let t = pick_tags(engine, config, &all_slots, &mut rng, &mut trace);
            let s = pick_slots(engine, config, &t, &mut rng, &mut trace);
            (s, t)
        }
    };

    Ok(SelectionResult {
        slots: slots
            .into_iter()
            .map(|s| engine.inventory().slots()[s].clone())
            .collect(),
        tags: tags.into_iter().map(|t| engine.tags()[t].clone()).collect(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(exposure: &[&[f64]], affinity: &[&[f64]]) -> InfluenceEngine {
        let e: Vec<Vec<f64>> = exposure.iter().map(|r| r.to_vec()).collect();
        let a: Vec<Vec<f64>> = affinity.iter().map(|r| r.to_vec()).collect();
        InfluenceEngine::from_matrices(&e, &a).unwrap()
    }

    #[test]
    fn dominant_slot_is_chosen() {
        let eng = engine(
            &[&[0.2, 0.0, 0.0], &[1.0, 1.0, 1.0], &[0.0, 0.3, 0.0]],
            &[&[0.5], &[0.5], &[0.5]],
        );
        let r = stochastic_greedy_select(&eng, &SelectionConfig::new(1, 1, 0.1, 9)).unwrap();
        assert_eq!(r.slots, vec![SlotId::new("b", 1)]);
        assert_eq!(r.tags, vec![TagId::from("t000")]);
    }

    #[test]
    fn budgets_clamp_to_ground_set() {
        let eng = engine(&[&[0.2], &[0.4]], &[&[0.5, 0.1]]);
        let r = stochastic_greedy_select(&eng, &SelectionConfig::new(5, 7, 0.1, 1)).unwrap();
        assert_eq!(r.slots.len(), 2);
        assert_eq!(r.tags.len(), 2);
        assert_eq!(r.trace.len(), 4);
    }

    #[test]
    fn tiny_instance_equals_full_greedy() {
        // n / k · ln(1/ε) ≥ n here, so sampling takes everything
        let eng = engine(
            &[&[0.2, 0.5, 0.0], &[0.6, 0.0, 0.1], &[0.3, 0.3, 0.3]],
            &[&[0.5, 0.2], &[0.1, 0.9], &[0.4, 0.4]],
        );
        let sg = stochastic_greedy_select(&eng, &SelectionConfig::new(2, 1, 0.01, 77)).unwrap();
        let full = stochastic_greedy_select(&eng, &SelectionConfig::full_greedy(2, 1)).unwrap();
        assert_eq!(sg, full);
    }

    #[test]
    fn invalid_config() {
        let eng = engine(&[&[0.2]], &[&[0.5]]);
        for cfg in [
            SelectionConfig::new(0, 1, 0.1, 0),
            SelectionConfig::new(1, 0, 0.1, 0),
            SelectionConfig::new(1, 1, 0.0, 0),
            SelectionConfig::new(1, 1, 1.0, 0),
        ] {
            assert!(matches!(
                stochastic_greedy_select(&eng, &cfg),
                Err(Error::Config(_))
            ));
        }
        let empty = engine(&[], &[&[0.5]]);
        assert!(stochastic_greedy_select(&empty, &SelectionConfig::new(1, 1, 0.1, 0)).is_err());
        let no_tags = engine(&[&[1.0]], &[&[]]);
        assert!(stochastic_greedy_select(&no_tags, &SelectionConfig::new(1, 1, 0.1, 0)).is_err());
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let eng = engine(&[&[0.5], &[0.5], &[0.5]], &[&[1.0, 1.0]]);
        let r = stochastic_greedy_select(&eng, &SelectionConfig::full_greedy(1, 1)).unwrap();
        assert_eq!(r.slots, vec![SlotId::new("b", 0)]);
        assert_eq!(r.tags, vec![TagId::from("t000")]);
    }

    #[test]
    fn sample_size_formula() {
        let c = SelectionConfig::new(10, 1, 0.01, 0);
        // 1000 / 10 · ln 100 = 460.5
        assert_eq!(c.sample_size(1000, 10, 1000), 461);
        assert_eq!(c.sample_size(1000, 10, 50), 50);
        assert_eq!(
            SelectionConfig::full_greedy(10, 1).sample_size(1000, 10, 999),
            999
        );
    }
}
