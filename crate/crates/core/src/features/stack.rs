use chrono::NaiveDate;
use ndarray::Array2;

use super::FeatureHistory;
use crate::{Error, Result, Scalar, N_FEATURES};

/// `V_t`: each row concatenates an asset's feature vectors over the `delta`
/// days ending at `day`, oldest first (column `d·8 + k` is feature `k` on the
/// `d`-th day of the window).
#[derive(Clone, Debug, PartialEq)]
pub struct StackedFeatureMatrix<T> {
    pub day: usize,
    pub date: NaiveDate,
    pub delta: usize,
    pub assets: Vec<usize>,
    pub tickers: Vec<String>,
    pub values: Array2<T>,
}

impl<T> StackedFeatureMatrix<T> {
    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }
}

/// Stacks the window for every asset in the universe.
pub fn stack_lookback<T: Scalar>(
    history: &FeatureHistory<T>,
    day: usize,
    delta: usize,
    max_missing_frac: f64,
) -> Result<StackedFeatureMatrix<T>> {
    let all: Vec<usize> = (0..history.n_assets()).collect();
    stack_lookback_among(history, day, delta, max_missing_frac, &all)
}

/// Stacks the window over a candidate subset of the universe (ascending
/// indices). An asset qualifies when it has no missing feature-days or its
/// missing fraction is below `max_missing_frac`. Gaps of qualifying assets are
/// forward-filled from the last prior row in the window, then zero-filled.
pub fn stack_lookback_among<T: Scalar>(
    history: &FeatureHistory<T>,
    day: usize,
    delta: usize,
    max_missing_frac: f64,
    candidates: &[usize],
) -> Result<StackedFeatureMatrix<T>> {
    if delta == 0 {
        return Err(Error::InvalidInput("lookback must be positive".into()));
    }
    if !(0.0..1.0).contains(&max_missing_frac) {
        return Err(Error::InvalidInput(format!(
            "max_missing_frac must lie in [0, 1), got {max_missing_frac}"
        )));
    }
    if day >= history.n_days() {
        return Err(Error::InvalidInput(format!("day {day} beyond calendar")));
    }
    let date = history.calendar().date(day);
    let empty = || StackedFeatureMatrix {
        day,
        date,
        delta,
        assets: Vec::new(),
        tickers: Vec::new(),
        values: Array2::zeros((0, N_FEATURES * delta)),
    };
    if day + 1 < delta {
        return Ok(empty());
    }
    let start = day + 1 - delta;

    let assets: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&a| {
            let missing = (start..=day).filter(|&t| history.row(a, t).is_none()).count();
            missing == 0 || (missing as f64) / (delta as f64) < max_missing_frac
        })
        .collect();
    if assets.is_empty() {
        return Ok(empty());
    }

    let mut values = Array2::zeros((assets.len(), N_FEATURES * delta));
    for (r, &a) in assets.iter().enumerate() {
        let mut last: Option<[T; N_FEATURES]> = None;
        for (d, t) in (start..=day).enumerate() {
            if let Some(row) = history.row(a, t) {
                last = Some(*row);
            }
            if let Some(row) = last {
                for k in 0..N_FEATURES {
                    values[[r, d * N_FEATURES + k]] = row[k];
                }
            }
        }
    }
    Ok(StackedFeatureMatrix {
        day,
        date,
        delta,
        tickers: assets.iter().map(|&a| history.assets()[a].ticker.clone()).collect(),
        assets,
        values,
    })
}
