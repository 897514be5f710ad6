use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensemble_graphs, learn_graph, normalize_graph, pairwise_sq_distances, GraphHyperParams, GraphSnapshot};
use super::solver::SolverOptions;
use crate::features::{stack_lookback_among, FeatureHistory};
use crate::{Error, Result, Scalar};

pub const DEFAULT_LOOKBACKS: [usize; 5] = [252, 504, 756, 1008, 1260];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig<T> {
    pub lookbacks: Vec<usize>,
    pub max_missing_frac: f64,
    pub tol: T,
    pub max_iter: usize,
    /// Divide each window's distances by their mean before solving.
    pub unit_mean_scaling: bool,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            lookbacks: DEFAULT_LOOKBACKS.to_vec(),
            max_missing_frac: 0.1,
            tol: T::of(1e-6),
            max_iter: 50_000,
            unit_mean_scaling: false,
        }
    }
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn with_lookbacks(&self, lookbacks: Vec<usize>) -> Self {
        Self {
            lookbacks,
            ..self.clone()
        }
    }
}

/// Learns one raw graph per lookback window at `day` over the candidate
/// assets and averages them. Windows with fewer than two qualifying nodes are
/// skipped; if every window is skipped the call fails.
pub fn learn_ensemble<T: Scalar>(
    history: &FeatureHistory<T>,
    day: usize,
    hp: GraphHyperParams<T>,
    config: &PipelineConfig<T>,
    candidates: &[usize],
) -> Result<GraphSnapshot<T>> {
    let opts = SolverOptions::new(config.tol, config.max_iter);
    let mut raws = Vec::with_capacity(config.lookbacks.len());
    for &delta in &config.lookbacks {
        let v = stack_lookback_among(history, day, delta, config.max_missing_frac, candidates)?;
        if v.assets.len() < 2 {
            debug!("{}: lookback {delta} has {} qualifying nodes, skipped", v.date, v.assets.len());
            continue;
        }
        let mut z = pairwise_sq_distances(&v)?;
        if config.unit_mean_scaling {
            z = z.unit_mean();
        }
        let mut learned = learn_graph(&z, hp, &opts)?.snapshot;
        learned.provenance.lookbacks = vec![delta];
        raws.push(learned);
    }
    if raws.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no lookback window has at least two qualifying assets on {}",
            history.calendar().date(day)
        )));
    }
    ensemble_graphs(&raws)
}

/// Ensemble followed by symmetric normalization over the whole universe.
pub fn learn_graph_pipeline<T: Scalar>(
    history: &FeatureHistory<T>,
    day: usize,
    hp: GraphHyperParams<T>,
    config: &PipelineConfig<T>,
) -> Result<GraphSnapshot<T>> {
    let all: Vec<usize> = (0..history.n_assets()).collect();
    Ok(normalize_graph(&learn_ensemble(history, day, hp, config, &all)?))
}

/// Calendar indices in `days` on which graphs are recomputed: multiples of
/// `stride`, plus the last multiple at or before `days.start` so the first
/// day already has a held graph.
pub fn recompute_days(days: Range<usize>, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    if days.is_empty() {
        return Vec::new();
    }
    let first = days.start - days.start % stride;
    (first..days.end).step_by(stride).collect()
}

/// Ensemble graphs learned on recompute days and held in between. A recompute
/// day with no learnable window holds no graph.
#[derive(Clone, Debug, Default)]
pub struct GraphSequence<T> {
    pub stride: usize,
    pub graphs: BTreeMap<usize, Option<Arc<GraphSnapshot<T>>>>,
}

impl<T: Scalar> GraphSequence<T> {
    /// Graph in force on `day`: the one from the latest recompute day ≤ `day`.
    pub fn at(&self, day: usize) -> Option<&Arc<GraphSnapshot<T>>> {
        self.graphs.range(..=day).next_back().and_then(|(_, g)| g.as_ref())
    }

    pub fn learned(&self) -> impl Iterator<Item = (usize, &Arc<GraphSnapshot<T>>)> {
        self.graphs.iter().filter_map(|(&d, g)| g.as_ref().map(|g| (d, g)))
    }

    /// Applies `f` to every learned graph.
    pub fn map_graphs<F>(&self, f: F) -> Self
    where
        F: Fn(&GraphSnapshot<T>) -> GraphSnapshot<T> + Sync,
    {
        let graphs = self
            .graphs
            .par_iter()
            .map(|(&d, g)| (d, g.as_ref().map(|g| Arc::new(f(g)))))
            .collect();
        Self {
            stride: self.stride,
            graphs,
        }
    }

    pub fn normalized(&self) -> Self {
        self.map_graphs(normalize_graph)
    }

    /// Number of per-window solves that stopped before reaching tolerance.
    pub fn solver_failures(&self) -> usize {
        self.learned()
            .map(|(_, g)| g.provenance.reports.iter().filter(|r| !r.converged).count())
            .sum()
    }
}

/// Ensemble graphs on every recompute day of `days`, learned in parallel.
/// Days already present in `cache` are reused rather than relearned.
pub fn learn_graph_sequence<T: Scalar>(
    history: &FeatureHistory<T>,
    days: Range<usize>,
    stride: usize,
    hp: GraphHyperParams<T>,
    config: &PipelineConfig<T>,
    candidates: &[usize],
    cache: Option<&GraphSequence<T>>,
) -> Result<GraphSequence<T>> {
    let schedule = recompute_days(days, stride);
    let learned: Vec<Result<(usize, Option<Arc<GraphSnapshot<T>>>)>> = schedule
        .par_iter()
        .map(|&day| {
            if let Some(hit) = cache.and_then(|c| c.graphs.get(&day)) {
                return Ok((day, hit.clone()));
            }
            match learn_ensemble(history, day, hp, config, candidates) {
                Ok(g) => Ok((day, Some(Arc::new(g)))),
                Err(Error::InvalidInput(msg)) => {
                    debug!("{msg}");
                    Ok((day, None))
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut graphs = BTreeMap::new();
    for r in learned {
        let (day, g) = r?;
        graphs.insert(day, g);
    }
    Ok(GraphSequence {
        stride: stride.max(1),
        graphs,
    })
}
