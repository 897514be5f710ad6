//! Graph learning over stacked momentum features.
//!
//! For a node set with pairwise squared feature distances `z`, the learned
//! edge weights `w ≥ 0` minimize
//!
//! ```text
//! F(w) = zᵀw − α Σ_i log d_i(w) + 2β ‖w‖²,    d_i(w) = Σ_{j≠i} w_ij
//! ```
//!
//! which is the Laplacian-smoothness program on the adjacency matrix written
//! over its upper triangle (`tr(VᵀLV) = Σ_{i<j} A_ij ‖v_i − v_j‖²` and
//! `‖A‖_F² = 2‖w‖²`). Graphs from several lookback windows are averaged and
//! symmetrically normalized before momentum is propagated along them.

mod distances;
mod ops;
mod pipeline;
mod search;
mod solver;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use distances::{edge_count, edge_pairs, pairwise_sq_distances, PairwiseDistances};
pub use ops::{ensemble_graphs, normalize_graph, sparsify, DEFAULT_REL_EPS};
pub use pipeline::{
    learn_ensemble, learn_graph_pipeline, learn_graph_sequence, recompute_days, GraphSequence, PipelineConfig, DEFAULT_LOOKBACKS,
};
pub use search::{grid_search, default_grid, GridPoint, GridSearchOutcome, SearchConfig, DEFAULT_GRID_VALUES};
pub use solver::{kkt_residual, learn_graph, objective, LearnedGraph, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphHyperParams<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> GraphHyperParams<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero()) || !(beta > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "graph hyperparameters must be positive (alpha={alpha}, beta={beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Raw,
    Ensemble,
    Normalized,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Raw => "raw",
            GraphKind::Ensemble => "ensemble",
            GraphKind::Normalized => "normalized",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport<T> {
    pub iterations: usize,
    pub objective: T,
    pub kkt_residual: T,
    pub converged: bool,
    /// Wall time is diagnostic only and kept out of serialized artifacts so
    /// reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance<T> {
    pub lookbacks: Vec<usize>,
    pub hyper: Option<GraphHyperParams<T>>,
    pub reports: Vec<SolverReport<T>>,
}

/// Dated symmetric, non-negative, hollow adjacency over a node set. `nodes`
/// are ascending universe indices; `tickers` names them.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSnapshot<T> {
    pub date: NaiveDate,
    pub nodes: Vec<usize>,
    pub tickers: Vec<String>,
    pub adjacency: Array2<T>,
    pub kind: GraphKind,
    pub provenance: Provenance<T>,
}

impl<T: Scalar> GraphSnapshot<T> {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.adjacency[[i, j]]
    }

    pub fn degrees(&self) -> Vec<T> {
        self.adjacency.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn position(&self, universe_index: usize) -> Option<usize> {
        self.nodes.binary_search(&universe_index).ok()
    }

    /// Same graph with every weight set to zero.
    pub fn zeroed(&self) -> Self {
        let mut g = self.clone();
        g.adjacency.fill(T::zero());
        g
    }

    /// Checks symmetry, non-negativity, zero diagonal and the kind-specific
    /// conditions (positive degrees for raw graphs, spectral radius ≤ 1 for
    /// normalized ones).
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.adjacency.dim() != (n, n) || self.tickers.len() != n {
            return Err(Error::InvalidInput("graph shape mismatch".into()));
        }
        if self.nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("graph nodes must be strictly increasing".into()));
        }
        for i in 0..n {
            if self.adjacency[[i, i]] != T::zero() {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let a = self.adjacency[[i, j]];
                if a < T::zero() || a != self.adjacency[[j, i]] || !a.is_finite() {
                    return Err(Error::InvalidInput(format!("invalid weight at ({i},{j})")));
                }
            }
        }
        match self.kind {
            GraphKind::Raw => {
                if let Some(i) = self.degrees().iter().position(|&d| !(d > T::zero())) {
                    return Err(Error::InvalidInput(format!("raw graph node {i} is isolated")));
                }
            }
            GraphKind::Normalized => {
                let radius = crate::linalg::symmetric_eigen(&self.adjacency)
                    .values
                    .iter()
                    .fold(T::zero(), |m, v| m.max(v.abs()));
                if radius > T::one() + T::of(1e-9).max(T::epsilon() * T::of(64.0)) {
                    return Err(Error::InvalidInput(format!("spectral radius {radius} exceeds 1")));
                }
            }
            GraphKind::Ensemble => {}
        }
        Ok(())
    }
}
