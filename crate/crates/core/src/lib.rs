//! Multi-slot tag allocation for billboard advertising.
//!
//! Pipeline: pick influential slots and tags with stochastic greedy, weigh
//! every (tag, slot) pair by conditional influence, prune light edges by
//! z-score, then match tags to slots one-to-many under per-tag bounds.

pub mod allocation;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod graph;
pub mod influence;
pub mod model;
pub mod ombm;
pub mod selection;
pub mod verify;

pub use allocation::{
    Allocation, AllocationFile, AllocationObjective, EdgeWeightSum, TagGroupInfluence,
};
pub use baselines::{
    allocate_bm, allocate_mda, allocate_random, allocate_tsrt, oracle_optimal, BaselineKind,
    Method, OracleSolution,
};
pub use error::{Error, Result};
pub use graph::{
    build_graph, build_graph_from_selection, Edge, GraphStats, WeightedBipartiteGraph,
};
pub use influence::{Candidate, InfluenceEngine, InfluenceQuery};
pub use ombm::{
    best_counterpart, default_bounds, find_dominating_edges, ombm_allocate, ombm_allocate_traced,
    DominatingEdgeSet, OmbmRun, Vertex,
};
pub use selection::{stochastic_greedy_select, SelectionConfig, SelectionOrder, SelectionResult};
pub use verify::{approximation_report, verify_lemmas, ApproxReport, LemmaReport};
