//! Price ingestion, daily returns, exponentially weighted statistics and the
//! seeded synthetic market used by tests and the `synth` CLI stage.

mod ewm;
mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use ewm::{ewm_mean, ewm_mean_sparse, ewm_std, ewm_std_sparse, EwmSpec, EwmState};
pub use io::{load_prices, load_universe, write_prices, write_universe};
pub use synth::{synth_market, SynthConfig, SynthMarket};

/// Per-day values for one asset; `None` marks a missing observation.
pub type Series<T> = Vec<Option<T>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssetClass {
    #[serde(rename = "COMM")]
    Comm,
    #[serde(rename = "EQ")]
    Eq,
    #[serde(rename = "FI")]
    Fi,
    #[serde(rename = "FX")]
    Fx,
}

impl AssetClass {
    pub const ALL: [AssetClass; 4] = [AssetClass::Comm, AssetClass::Eq, AssetClass::Fi, AssetClass::Fx];

    pub fn as_str(self) -> &'static str {
        match self {
            AssetClass::Comm => "COMM",
            AssetClass::Eq => "EQ",
            AssetClass::Fi => "FI",
            AssetClass::Fx => "FX",
        }
    }
}

impl fmt::Display for AssetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssetClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "COMM" => Ok(AssetClass::Comm),
            "EQ" => Ok(AssetClass::Eq),
            "FI" => Ok(AssetClass::Fi),
            "FX" => Ok(AssetClass::Fx),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub ticker: String,
    pub asset_class: AssetClass,
    pub description: String,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

/// Strictly increasing list of trading dates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!(
                "calendar not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { dates })
    }

    /// Weekdays starting at `start` (inclusive), `n` of them.
    pub fn business_days(start: NaiveDate, n: usize) -> Self {
        use chrono::{Datelike, Weekday};
        let mut dates = Vec::with_capacity(n);
        let mut d = start;
        while dates.len() < n {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                dates.push(d);
            }
            d = d.succ_opt().expect("date in range");
        }
        Self { dates }
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn date(&self, idx: usize) -> NaiveDate {
        self.dates[idx]
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Truncates the calendar to its first `n` dates.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            dates: self.dates[..n.min(self.dates.len())].to_vec(),
        }
    }
}

/// Calendar-aligned prices: `prices[asset][day]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PricePanel<T> {
    calendar: TradingCalendar,
    assets: Vec<AssetMeta>,
    prices: Vec<Series<T>>,
}

impl<T: Scalar> PricePanel<T> {
    pub fn new(calendar: TradingCalendar, assets: Vec<AssetMeta>, prices: Vec<Series<T>>) -> Result<Self> {
        if assets.len() != prices.len() {
            return Err(Error::Data(format!(
                "{} assets but {} price series",
                assets.len(),
                prices.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for (meta, series) in assets.iter().zip(&prices) {
            if !seen.insert(meta.ticker.as_str()) {
                return Err(Error::DuplicateTicker(meta.ticker.clone()));
            }
            if series.len() != calendar.len() {
                return Err(Error::Data(format!(
                    "{}: {} prices for a {}-day calendar",
                    meta.ticker,
                    series.len(),
                    calendar.len()
                )));
            }
            for (day, p) in series.iter().enumerate() {
                let Some(p) = p else { continue };
                let date = calendar.date(day);
                if !(*p > T::zero()) {
                    return Err(Error::NonPositivePrice {
                        ticker: meta.ticker.clone(),
                        date: date.to_string(),
                        price: p.as_f64(),
                    });
                }
                if date < meta.first_date || date > meta.last_date {
                    return Err(Error::Data(format!(
                        "{}: price on {} outside span {}..={}",
                        meta.ticker, date, meta.first_date, meta.last_date
                    )));
                }
            }
        }
        Ok(Self {
            calendar,
            assets,
            prices,
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

    pub fn series(&self, asset: usize) -> &[Option<T>] {
        &self.prices[asset]
    }

    pub fn price(&self, asset: usize, day: usize) -> Option<T> {
        self.prices[asset][day]
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.assets.iter().position(|a| a.ticker == ticker)
    }

    /// Keeps the first `n_days` calendar days.
    pub fn truncated(&self, n_days: usize) -> Self {
        let calendar = self.calendar.truncated(n_days);
        let n = calendar.len();
        let prices = self.prices.iter().map(|s| s[..n].to_vec()).collect();
        let assets = self
            .assets
            .iter()
            .map(|a| {
                let mut a = a.clone();
                if n > 0 && a.last_date > calendar.date(n - 1) {
                    a.last_date = calendar.date(n - 1).max(a.first_date);
                }
                a
            })
            .collect();
        Self {
            calendar,
            assets,
            prices,
        }
    }

    /// Restricts the panel to a subset of assets (in the given order).
    pub fn select_assets(&self, idx: &[usize]) -> Self {
        Self {
            calendar: self.calendar.clone(),
            assets: idx.iter().map(|&i| self.assets[i].clone()).collect(),
            prices: idx.iter().map(|&i| self.prices[i].clone()).collect(),
        }
    }
}

/// Simple daily returns; `returns[asset][day]` is the return from `day - 1`
/// to `day`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnPanel<T> {
    calendar: TradingCalendar,
    assets: Vec<AssetMeta>,
    returns: Vec<Series<T>>,
}

impl<T: Scalar> ReturnPanel<T> {
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

    pub fn series(&self, asset: usize) -> &[Option<T>] {
        &self.returns[asset]
    }

    pub fn get(&self, asset: usize, day: usize) -> Option<T> {
        self.returns[asset].get(day).copied().flatten()
    }

    /// Scales every return by `k`.
    pub fn scaled(&self, k: T) -> Self {
        Self {
            calendar: self.calendar.clone(),
            assets: self.assets.clone(),
            returns: self
                .returns
                .iter()
                .map(|s| s.iter().map(|r| r.map(|r| r * k)).collect())
                .collect(),
        }
    }

    pub fn from_parts(calendar: TradingCalendar, assets: Vec<AssetMeta>, returns: Vec<Series<T>>) -> Result<Self> {
        if assets.len() != returns.len() || returns.iter().any(|s| s.len() != calendar.len()) {
            return Err(Error::InvalidInput("return panel shape mismatch".into()));
        }
        Ok(Self {
            calendar,
            assets,
            returns,
        })
    }
}

/// `r_t = p_t / p_{t-1} - 1` where both prices are present; no bridging over
/// gaps.
pub fn daily_returns<T: Scalar>(panel: &PricePanel<T>) -> ReturnPanel<T> {
    let returns = panel
        .prices
        .iter()
        .map(|series| series_returns(series))
        .collect();
    ReturnPanel {
        calendar: panel.calendar.clone(),
        assets: panel.assets.clone(),
        returns,
    }
}

pub(crate) fn series_returns<T: Scalar>(series: &[Option<T>]) -> Series<T> {
    let mut out = vec![None; series.len()];
    for t in 1..series.len() {
        if let (Some(prev), Some(cur)) = (series[t - 1], series[t]) {
            out[t] = Some(cur / prev - T::one());
        }
    }
    out
}
