use std::ops::Range;

use chrono::NaiveDate;

use super::{propagate, RegressionModel, Samples};
use crate::features::{FeatureHistory, MACD_OFFSET};
use crate::graph::GraphSequence;
use crate::market_data::{PricePanel, Series};
use crate::{Scalar, N_FEATURES};

/// Peak of `y·exp(−y²/4)` (attained at `y = √2`) rounded as in the usual MACD
/// position rule.
pub const PHI_SCALE: f64 = 0.89;

/// Positions `x_{i,t}` by asset and calendar day; `None` means no position
/// could be formed (not the same as a flat `0`).
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSeries<T> {
    pub strategy: String,
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub positions: Vec<Series<T>>,
}

impl<T: Scalar> SignalSeries<T> {
    pub fn empty(strategy: impl Into<String>, dates: &[NaiveDate], tickers: &[String]) -> Self {
        Self {
            strategy: strategy.into(),
            dates: dates.to_vec(),
            tickers: tickers.to_vec(),
            positions: vec![vec![None; dates.len()]; tickers.len()],
        }
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn get(&self, asset: usize, day: usize) -> Option<T> {
        self.positions[asset][day]
    }

    pub fn set(&mut self, asset: usize, day: usize, x: Option<T>) {
        self.positions[asset][day] = x;
    }

    pub fn renamed(mut self, strategy: impl Into<String>) -> Self {
        self.strategy = strategy.into();
        self
    }

    /// Copies `other`'s positions on `days` into `self`.
    pub fn overlay(&mut self, other: &SignalSeries<T>, days: Range<usize>) {
        for (dst, src) in self.positions.iter_mut().zip(&other.positions) {
            dst[days.clone()].copy_from_slice(&src[days.clone()]);
        }
    }

    /// Drops positions of every asset outside `keep` (ascending indices).
    pub fn restricted_to(mut self, keep: &[usize]) -> Self {
        for (a, series) in self.positions.iter_mut().enumerate() {
            if keep.binary_search(&a).is_err() {
                series.iter_mut().for_each(|x| *x = None);
            }
        }
        self
    }

    /// Days on which at least one position exists.
    pub fn active_days(&self) -> Vec<usize> {
        (0..self.n_days())
            .filter(|&t| self.positions.iter().any(|s| s[t].is_some()))
            .collect()
    }
}

/// `−1`, `0` or `+1`; zero maps to a flat position.
pub fn sign<T: Scalar>(y: T) -> T {
    if y > T::zero() {
        T::one()
    } else if y < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// `φ(y) = y·exp(−y²/4) / 0.89`.
pub fn phi<T: Scalar>(y: T) -> T {
    y * (-(y * y) / T::of(4.0)).exp() / T::of(PHI_SCALE)
}

/// Long one unit wherever the asset has a price.
pub fn signals_long_only<T: Scalar>(panel: &PricePanel<T>, days: Range<usize>) -> SignalSeries<T> {
    let tickers: Vec<String> = panel.assets().iter().map(|a| a.ticker.clone()).collect();
    let mut s = SignalSeries::empty("LongOnly", panel.calendar().dates(), &tickers);
    for a in 0..panel.n_assets() {
        for t in days.clone() {
            if panel.price(a, t).is_some() {
                s.set(a, t, Some(T::one()));
            }
        }
    }
    s
}

fn tickers_of<T: Scalar>(history: &FeatureHistory<T>) -> Vec<String> {
    history.assets().iter().map(|a| a.ticker.clone()).collect()
}

/// Mean of `φ` over the three MACD features.
pub fn signals_macd<T: Scalar>(history: &FeatureHistory<T>, days: Range<usize>) -> SignalSeries<T> {
    let mut s = SignalSeries::empty("MACD", history.calendar().dates(), &tickers_of(history));
    let k = T::of_usize(N_FEATURES - MACD_OFFSET);
    for a in 0..history.n_assets() {
        for t in days.clone() {
            if let Some(row) = history.row(a, t) {
                let x = row[MACD_OFFSET..].iter().map(|&y| phi(y)).sum::<T>() / k;
                s.set(a, t, Some(x));
            }
        }
    }
    s
}

/// `sign(ŷ)` from a model on the eight individual features.
pub fn signals_linreg<T: Scalar>(
    model: &RegressionModel<T>,
    history: &FeatureHistory<T>,
    days: Range<usize>,
) -> SignalSeries<T> {
    let mut s = SignalSeries::empty("LinReg", history.calendar().dates(), &tickers_of(history));
    for a in 0..history.n_assets() {
        for t in days.clone() {
            if let Some(row) = history.row(a, t) {
                s.set(a, t, Some(sign(model.predict(row))));
            }
        }
    }
    s
}

/// `sign(ŷ)` from a model on the eight propagated features. Days without a
/// graph get no positions.
pub fn signals_gmom<T: Scalar>(
    model: &RegressionModel<T>,
    history: &FeatureHistory<T>,
    graphs: &GraphSequence<T>,
    days: Range<usize>,
) -> SignalSeries<T> {
    let mut s = SignalSeries::empty("GMOM", history.calendar().dates(), &tickers_of(history));
    for t in days {
        let Some(graph) = graphs.at(t) else {
            continue;
        };
        let u = history.at(t);
        let p = propagate(graph, &u);
        for (r, &a) in p.assets.iter().enumerate() {
            let row = p.values.row(r);
            s.set(a, t, Some(sign(model.predict(row.as_slice().expect("contiguous row")))));
        }
    }
    s
}

/// `sign(ŷ)` from a model on `[u, ũ]` (16 features).
pub fn signals_regcombo<T: Scalar>(
    model: &RegressionModel<T>,
    history: &FeatureHistory<T>,
    graphs: &GraphSequence<T>,
    days: Range<usize>,
) -> SignalSeries<T> {
    let mut s = SignalSeries::empty("RegCombo", history.calendar().dates(), &tickers_of(history));
    let mut x = [T::zero(); 2 * N_FEATURES];
    for t in days {
        let Some(graph) = graphs.at(t) else {
            continue;
        };
        let u = history.at(t);
        let p = propagate(graph, &u);
        for (r, &a) in u.assets.iter().enumerate() {
            for k in 0..N_FEATURES {
                x[k] = u.values[[r, k]];
                x[N_FEATURES + k] = p.values[[r, k]];
            }
            s.set(a, t, Some(sign(model.predict(&x))));
        }
    }
    s
}

/// Elementwise mean of two signals; missing where either is.
pub fn signals_signcombo<T: Scalar>(a: &SignalSeries<T>, b: &SignalSeries<T>) -> SignalSeries<T> {
    let half = T::of(0.5);
    let mut s = SignalSeries::empty("SignCombo", &a.dates, &a.tickers);
    for (i, (sa, sb)) in a.positions.iter().zip(&b.positions).enumerate() {
        for (t, (&x, &y)) in sa.iter().zip(sb).enumerate() {
            if let (Some(x), Some(y)) = (x, y) {
                s.set(i, t, Some(half * x + half * y));
            }
        }
    }
    s
}

/// Training rows `(u_{i,t}, r_{i,t+1}/σ_{i,t})` on `days`.
pub fn individual_samples<T: Scalar>(history: &FeatureHistory<T>, days: Range<usize>) -> Samples<T> {
    let mut s = Samples::new(N_FEATURES);
    for t in days {
        for a in 0..history.n_assets() {
            if let (Some(row), Some(y)) = (history.row(a, t), history.target(a, t)) {
                s.push(row, y);
            }
        }
    }
    s
}

/// Training rows `(ũ_{i,t}, y)`, or `([u, ũ], y)` when `with_individual`.
/// `keep` (ascending universe indices) limits the rows to those assets.
pub fn network_samples<T: Scalar>(
    history: &FeatureHistory<T>,
    graphs: &GraphSequence<T>,
    days: Range<usize>,
    with_individual: bool,
    keep: Option<&[usize]>,
) -> Samples<T> {
    let width = if with_individual { 2 * N_FEATURES } else { N_FEATURES };
    let mut s = Samples::new(width);
    let mut x = vec![T::zero(); width];
    for t in days {
        let Some(graph) = graphs.at(t) else {
            continue;
        };
        let u = history.at(t);
        let p = propagate(graph, &u);
        for (r, &a) in u.assets.iter().enumerate() {
            if keep.is_some_and(|k| k.binary_search(&a).is_err()) {
                continue;
            }
            let Some(y) = history.target(a, t) else {
                continue;
            };
            let offset = if with_individual {
                for k in 0..N_FEATURES {
                    x[k] = u.values[[r, k]];
                }
                N_FEATURES
            } else {
                0
            };
            for k in 0..N_FEATURES {
                x[offset + k] = p.values[[r, k]];
            }
            s.push(&x, y);
        }
    }
    s
}
