use std::cmp::Ordering;
use std::ops::Range;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{learn_graph_sequence, GraphHyperParams, PipelineConfig};
use crate::backtest::{perf_metrics, portfolio_returns, MddDuration, VolPanel};
use crate::features::FeatureHistory;
use crate::strategies::{feature_names, network_samples, signals_gmom};
use crate::{Error, Result, Scalar};

/// Values used for both α and β.
pub const DEFAULT_GRID_VALUES: [f64; 11] = [0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0];

/// The full 11 × 11 grid, α-major.
pub fn default_grid<T: Scalar>() -> Vec<GraphHyperParams<T>> {
    DEFAULT_GRID_VALUES
        .iter()
        .flat_map(|&a| {
            DEFAULT_GRID_VALUES.iter().map(move |&b| GraphHyperParams {
                alpha: T::of(a),
                beta: T::of(b),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig<T> {
    /// Graph recompute stride on the validation span.
    pub stride: usize,
    pub sigma_target: T,
}

impl<T: Scalar> Default for SearchConfig<T> {
    fn default() -> Self {
        Self {
            stride: 21,
            sigma_target: T::of(0.15),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint<T> {
    pub hyper: GraphHyperParams<T>,
    /// Validation Sharpe of the raw GMOM portfolio; `None` when undefined.
    pub sharpe: Option<T>,
    /// Whether graph learning succeeded for this point.
    pub solved: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome<T> {
    pub best: GraphHyperParams<T>,
    pub points: Vec<GridPoint<T>>,
}

/// Orders points by Sharpe (undefined lowest), then α, then β.
fn rank<T: Scalar>(a: &GridPoint<T>, b: &GridPoint<T>) -> Ordering {
    let key = |p: &GridPoint<T>| p.sharpe.map(Scalar::as_f64).unwrap_or(f64::NEG_INFINITY);
    key(a)
        .total_cmp(&key(b))
        .then(a.hyper.alpha.as_f64().total_cmp(&b.hyper.alpha.as_f64()))
        .then(a.hyper.beta.as_f64().total_cmp(&b.hyper.beta.as_f64()))
}

pub(crate) fn select_best<T: Scalar>(points: &[GridPoint<T>]) -> Option<GraphHyperParams<T>> {
    points.iter().filter(|p| p.solved).max_by(|a, b| rank(a, b)).map(|p| p.hyper)
}

fn evaluate<T: Scalar>(
    history: &FeatureHistory<T>,
    validation: Range<usize>,
    hyper: GraphHyperParams<T>,
    pipeline: &PipelineConfig<T>,
    search: &SearchConfig<T>,
    candidates: &[usize],
    vol: &VolPanel<T>,
) -> GridPoint<T> {
    let failed = |note: String| GridPoint {
        hyper,
        sharpe: None,
        solved: false,
        note: Some(note),
    };
    let seq = match learn_graph_sequence(history, validation.clone(), search.stride, hyper, pipeline, candidates, None) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    if seq.learned().next().is_none() {
        return failed("no graph learned on the validation span".into());
    }
    let seq = seq.normalized();
    let signal_days = validation.start..validation.end.saturating_sub(1);
    let undefined = |note: String| GridPoint {
        hyper,
        sharpe: None,
        solved: true,
        note: Some(note),
    };
    let model = match network_samples(history, &seq, signal_days.clone(), false, Some(candidates))
        .fit(&feature_names(true, false))
    {
        Ok(m) => m,
        Err(e) => return undefined(e.to_string()),
    };
    let signals = signals_gmom(&model, history, &seq, signal_days.clone()).restricted_to(candidates);
    let port = portfolio_returns(&signals, &history.return_panel(), vol, signal_days, search.sigma_target);
    match perf_metrics(&port.returns, MddDuration::Underwater) {
        Ok(m) => GridPoint {
            hyper,
            sharpe: m.sharpe,
            solved: true,
            note: m.sharpe.is_none().then(|| m.notes.join("; ")),
        },
        Err(e) => undefined(e.to_string()),
    }
}

/// Picks the hyperparameters whose GMOM model, fitted and traded on the
/// validation span, has the highest raw Sharpe. Graph recomputation on that
/// span uses `search.stride`. Only `candidates` (ascending universe indices)
/// enter the graphs, the regression and the portfolio.
pub fn grid_search<T: Scalar>(
    history: &FeatureHistory<T>,
    validation: Range<usize>,
    grid: &[GraphHyperParams<T>],
    pipeline: &PipelineConfig<T>,
    search: &SearchConfig<T>,
    candidates: &[usize],
) -> Result<GridSearchOutcome<T>> {
    if validation.is_empty() {
        return Err(Error::InvalidInput("empty validation span".into()));
    }
    match grid {
        [] => return Err(Error::Config("empty hyperparameter grid".into())),
        [only] => {
            return Ok(GridSearchOutcome {
                best: *only,
                points: vec![GridPoint {
                    hyper: *only,
                    sharpe: None,
                    solved: true,
                    note: Some("single grid point, not evaluated".into()),
                }],
            })
        }
        _ => {}
    }
    let vol = VolPanel::from_history(history);
    let points: Vec<GridPoint<T>> = grid
        .par_iter()
        .map(|&hp| {
            let p = evaluate(history, validation.clone(), hp, pipeline, search, candidates, &vol);
            debug!("alpha={} beta={}: sharpe {:?}", hp.alpha, hp.beta, p.sharpe);
            p
        })
        .collect();
    let best = select_best(&points).ok_or_else(|| {
        Error::Solver(format!(
            "no grid point produced graphs on the validation span: {}",
            points.iter().filter_map(|p| p.note.clone()).next().unwrap_or_default()
        ))
    })?;
    info!("grid search selected alpha={} beta={}", best.alpha, best.beta);
    Ok(GridSearchOutcome { best, points })
}
