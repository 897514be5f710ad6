//! Momentum features: five volatility-scaled returns and three normalized
//! MACD indicators per asset and day, winsorized per feature and asset.

mod kernels;
mod stack;

use chrono::NaiveDate;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::market_data::{series_returns, AssetMeta, PricePanel, ReturnPanel, Series, TradingCalendar};
use crate::{Result, Scalar, N_FEATURES};

pub use kernels::{
    daily_vol, macd_feature, rolling_std, vol_scaled_return, winsor_bands, winsorize, WinsorSpec, MACD_SCALES,
    RETURN_HORIZONS, VOL_SPAN,
};
pub use stack::{stack_lookback, stack_lookback_among, StackedFeatureMatrix};

/// Column order of every feature row. Regression coefficients are reported in
/// this order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "ret_1d",
    "ret_1m",
    "ret_3m",
    "ret_6m",
    "ret_1y",
    "macd_8_24",
    "macd_16_48",
    "macd_32_96",
];

/// Index of the first MACD column.
pub const MACD_OFFSET: usize = 5;

pub type FeatureVector<T> = [T; N_FEATURES];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig<T> {
    pub winsor: WinsorSpec<T>,
}

impl<T: Scalar> Default for FeatureConfig<T> {
    fn default() -> Self {
        Self {
            winsor: WinsorSpec::default(),
        }
    }
}

/// All eight raw (unwinsorized) feature series of one asset.
pub fn raw_feature_series<T: Scalar>(prices: &[Option<T>]) -> [Series<T>; N_FEATURES] {
    let sigma = daily_vol(&series_returns(prices));
    let mut out: [Series<T>; N_FEATURES] = Default::default();
    for (k, &delta) in RETURN_HORIZONS.iter().enumerate() {
        out[k] = vol_scaled_return(prices, &sigma, delta);
    }
    for (k, &(s, l)) in MACD_SCALES.iter().enumerate() {
        out[MACD_OFFSET + k] = macd_feature(prices, s, l);
    }
    out
}

/// Feature rows for every asset and day plus the daily volatility used to
/// scale returns, positions and regression targets.
#[derive(Clone, Debug)]
pub struct FeatureHistory<T> {
    calendar: TradingCalendar,
    assets: Vec<AssetMeta>,
    rows: Vec<Vec<Option<FeatureVector<T>>>>,
    sigma: Vec<Series<T>>,
    returns: Vec<Series<T>>,
}

impl<T: Scalar> FeatureHistory<T> {
    /// Computes features for all assets (in parallel over assets). A row is
    /// present only when all eight winsorized features are.
    pub fn compute(panel: &PricePanel<T>, config: &FeatureConfig<T>) -> Result<Self> {
        let per_asset: Vec<Result<_>> = (0..panel.n_assets())
            .into_par_iter()
            .map(|a| {
                let prices = panel.series(a);
                let returns = series_returns(prices);
                let sigma = daily_vol(&returns);
                let raw = raw_feature_series(prices);
                let mut clipped: Vec<Series<T>> = Vec::with_capacity(N_FEATURES);
                for series in &raw {
                    clipped.push(winsorize(series, config.winsor)?);
                }
                let rows = (0..panel.n_days())
                    .map(|t| {
                        let mut row = [T::zero(); N_FEATURES];
                        for (k, series) in clipped.iter().enumerate() {
                            row[k] = series[t]?;
                        }
                        Some(row)
                    })
                    .collect();
                Ok((rows, sigma, returns))
            })
            .collect();
        let mut rows = Vec::with_capacity(panel.n_assets());
        let mut sigma = Vec::with_capacity(panel.n_assets());
        let mut returns = Vec::with_capacity(panel.n_assets());
        for r in per_asset {
            let (rw, s, ret) = r?;
            rows.push(rw);
            sigma.push(s);
            returns.push(ret);
        }
        Ok(Self {
            calendar: panel.calendar().clone(),
            assets: panel.assets().to_vec(),
            rows,
            sigma,
            returns,
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn assets(&self) -> &[AssetMeta] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn row(&self, asset: usize, day: usize) -> Option<&FeatureVector<T>> {
        self.rows[asset][day].as_ref()
    }

    /// Daily (unannualized) EWM volatility of the asset at `day`.
    pub fn sigma(&self, asset: usize, day: usize) -> Option<T> {
        self.sigma[asset][day]
    }

    /// Simple return from `day − 1` to `day`.
    pub fn daily_return(&self, asset: usize, day: usize) -> Option<T> {
        self.returns[asset].get(day).copied().flatten()
    }

    pub fn return_panel(&self) -> ReturnPanel<T> {
        ReturnPanel::from_parts(self.calendar.clone(), self.assets.clone(), self.returns.clone())
            .expect("aligned by construction")
    }

    /// Regression target `r_{t:t+1} / σ_t`.
    pub fn target(&self, asset: usize, day: usize) -> Option<T> {
        let sigma = self.sigma(asset, day)?;
        if sigma <= T::zero() {
            return None;
        }
        Some(self.daily_return(asset, day + 1)? / sigma)
    }

    /// Cross-section `U_t`: one row per asset with a complete feature vector,
    /// in universe order.
    pub fn at(&self, day: usize) -> FeatureMatrix<T> {
        let assets: Vec<usize> = (0..self.n_assets()).filter(|&a| self.rows[a][day].is_some()).collect();
        let mut values = Array2::zeros((assets.len(), N_FEATURES));
        for (r, &a) in assets.iter().enumerate() {
            let row = self.rows[a][day].as_ref().expect("filtered");
            for k in 0..N_FEATURES {
                values[[r, k]] = row[k];
            }
        }
        FeatureMatrix {
            day,
            date: self.calendar.date(day),
            tickers: assets.iter().map(|&a| self.assets[a].ticker.clone()).collect(),
            assets,
            values,
        }
    }
}

/// Feature matrix `U_t` for one day.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    pub day: usize,
    pub date: NaiveDate,
    /// Universe indices of the rows.
    pub assets: Vec<usize>,
    pub tickers: Vec<String>,
    pub values: Array2<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.assets.len()
    }

    pub fn row_of(&self, asset: usize) -> Option<usize> {
        self.assets.binary_search(&asset).ok()
    }
}

/// `U_t` for the given date, computing the full feature history first.
pub fn build_feature_panel<T: Scalar>(
    panel: &PricePanel<T>,
    date: NaiveDate,
    config: &FeatureConfig<T>,
) -> Result<FeatureMatrix<T>> {
    let day = panel
        .calendar()
        .index_of(date)
        .ok_or_else(|| crate::Error::InvalidInput(format!("{date} is not a trading date")))?;
    Ok(FeatureHistory::compute(panel, config)?.at(day))
}
