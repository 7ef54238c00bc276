//! Experiment configuration and its flat `key=value` file format.
//!
//! ```text
//! # comments start with '#'
//! users = 1000
//! billboards = 50
//! tags = 10
//! k = 10, 20, 30
//! l = 5
//! theta = -1
//! methods = ombm, bm, mda, tsrt, ra
//! bound = auto
//! bound.t003 = 4
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::error::{Error, Result};
use crate::model::{Horizon, SyntheticSpec, TagId};
use crate::selection::SelectionOrder;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Directory holding `trajectories.csv`, `billboards.csv`, `affinities.csv`.
    Dir(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Per-tag slot quota for the matcher.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoundSetting {
    /// `ceil(k / ℓ)` over the selected slots and tags.
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for BoundSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(BoundSetting::Auto),
            v => match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(BoundSetting::Fixed(n)),
                _ => Err(Error::config(format!(
                    "bound must be 'auto' or a positive integer, got '{v}'"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Slot horizon for directory datasets; synthetic data carries its own.
    pub horizon: Horizon,
    pub ks: Vec<usize>,
    pub ls: Vec<usize>,
    pub thetas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub seed: u64,
    pub bound: BoundSetting,
    pub bound_overrides: BTreeMap<TagId, usize>,
    pub full_sample: bool,
    pub order: SelectionOrder,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic(SyntheticSpec::new(42, 1000, 50, 10)),
            horizon: Horizon {
                start: 0,
                end: 86_400,
                slot_len: 3_600,
            },
            ks: vec![30],
            ls: vec![5],
            thetas: vec![-1.0],
            epsilons: vec![0.01],
            lambdas: vec![100.0],
            methods: Method::ALL.to_vec(),
            repetitions: 1,
            seed: 42,
            bound: BoundSetting::Auto,
            bound_overrides: BTreeMap::new(),
            full_sample: false,
            order: SelectionOrder::default(),
        }
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::config(format!("{key}: cannot parse '{s}'")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{}'", value.trim())))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("k", self.ks.is_empty()),
            ("l", self.ls.is_empty()),
            ("theta", self.thetas.is_empty()),
            ("epsilon", self.epsilons.is_empty()),
            ("lambda", self.lambdas.is_empty()),
            ("methods", self.methods.is_empty()),
        ];
        if let Some((key, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::config(format!("{key}: sweep list is empty")));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.ks.contains(&0) || self.ls.contains(&0) {
            return Err(Error::config("k and l must be positive"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::config(format!(
                "epsilon must lie in (0, 1), got {e}"
            )));
        }
        if let Some(t) = self.thetas.iter().find(|t| !t.is_finite()) {
            return Err(Error::config(format!("theta must be finite, got {t}")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::config(format!("lambda must be positive, got {l}")));
        }
        if self.bound_overrides.values().any(|&b| b == 0) {
            return Err(Error::config("tag bounds must be at least 1"));
        }
        match &self.source {
            DataSource::Dir(_) => self.horizon.validate(),
            DataSource::Synthetic(s) => s.horizon.validate(),
        }
    }

    fn synthetic_mut(&mut self) -> &mut SyntheticSpec {
        if let DataSource::Dir(_) = self.source {
            self.source = DataSource::Synthetic(SyntheticSpec::new(self.seed, 1000, 50, 10));
        }
        match &mut self.source {
            DataSource::Synthetic(s) => s,
            DataSource::Dir(_) => unreachable!(),
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "data" | "data_dir" => self.source = DataSource::Dir(PathBuf::from(value.trim())),
            "users" => self.synthetic_mut().users = one(key, value)?,
            "billboards" => self.synthetic_mut().billboards = one(key, value)?,
            "tags" => self.synthetic_mut().tags = one(key, value)?,
            "data_seed" => self.synthetic_mut().seed = one(key, value)?,
            "k" => self.ks = list(key, value)?,
            "l" => self.ls = list(key, value)?,
            "theta" => self.thetas = list(key, value)?,
            "epsilon" => self.epsilons = list(key, value)?,
            "lambda" => self.lambdas = list(key, value)?,
            "methods" => {
                self.methods = if value.trim() == "all" {
                    Method::ALL.to_vec()
                } else {
                    list(key, value)?
                }
            }
            "repetitions" => self.repetitions = one(key, value)?,
            "seed" => self.seed = one(key, value)?,
            "bound" | "bound_default" => self.bound = value.parse()?,
            "full_sample" => self.full_sample = one(key, value)?,
            "order" => {
                self.order = match value.trim() {
                    "slots-then-tags" => SelectionOrder::SlotsThenTags,
                    "tags-then-slots" => SelectionOrder::TagsThenSlots,
                    v => return Err(Error::config(format!("order: unknown value '{v}'"))),
                }
            }
            "horizon_start" => self.horizon.start = one(key, value)?,
            "horizon_end" => self.horizon.end = one(key, value)?,
            "slot_len" => self.horizon.slot_len = one(key, value)?,
            k => match k.strip_prefix("bound.") {
                Some(tag) if !tag.is_empty() => {
                    self.bound_overrides
                        .insert(TagId::from(tag), one(key, value)?);
                }
                _ => return Err(Error::config(format!("unknown key '{k}'"))),
            },
        }
        Ok(())
    }

    /// Applies every line of a `key = value` file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &lambda_m in &self.lambdas {
            for &k in &self.ks {
                for &l in &self.ls {
                    for &epsilon in &self.epsilons {
                        for &theta in &self.thetas {
                            out.push(Cell {
                                k,
                                l,
                                theta,
                                epsilon,
                                lambda_m,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub k: usize,
    pub l: usize,
    pub theta: f64,
    pub epsilon: f64,
    pub lambda_m: f64,
}

impl Cell {
    pub fn key(&self) -> String {
        format!(
            "k{}-l{}-theta{}-eps{}-lambda{}",
            self.k, self.l, self.theta, self.epsilon, self.lambda_m
        )
    }
}
