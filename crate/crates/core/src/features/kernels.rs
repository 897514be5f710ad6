//! Per-asset feature kernels. Inputs are calendar-aligned series with `None`
//! marking missing days.
//!
//! Exponential statistics skip missing entries. Rolling windows count the
//! asset's own observations: a window of `w` is the last `w` present values.

use serde::{Deserialize, Serialize};

use crate::market_data::{ewm_mean_sparse, EwmSpec, EwmState, Series};
use crate::{Result, Scalar};

/// Look-back horizons (trading days) of the volatility-scaled returns.
pub const RETURN_HORIZONS: [usize; 5] = [1, 21, 63, 126, 252];

/// Short/long scales of the three normalized MACD indicators.
pub const MACD_SCALES: [(usize, usize); 3] = [(8, 24), (16, 48), (32, 96)];

/// Span of the daily volatility estimate.
pub const VOL_SPAN: usize = 60;

pub const MACD_PRICE_STD_WINDOW: usize = 63;
pub const MACD_SIGNAL_STD_WINDOW: usize = 252;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinsorSpec<T> {
    pub multiplier: T,
    pub half_life: T,
}

impl<T: Scalar> Default for WinsorSpec<T> {
    fn default() -> Self {
        Self {
            multiplier: T::of(5.0),
            half_life: T::of(252.0),
        }
    }
}

/// `(p_t / p_{t−Δ} − 1) / (σ_t √Δ)`; missing when either price, σ, or a
/// positive σ is unavailable.
pub fn vol_scaled_return<T: Scalar>(prices: &[Option<T>], sigma_daily: &[Option<T>], delta: usize) -> Series<T> {
    assert!(delta > 0, "horizon must be positive");
    let root = T::of_usize(delta).sqrt();
    (0..prices.len())
        .map(|t| {
            if t < delta {
                return None;
            }
            let (p, p0, sigma) = (prices[t]?, prices[t - delta]?, sigma_daily[t]?);
            if sigma <= T::zero() {
                log::trace!("degenerate volatility at index {t}");
                return None;
            }
            Some((p / p0 - T::one()) / (sigma * root))
        })
        .collect()
}

/// Daily volatility: EWM std (span 60) of daily returns.
pub fn daily_vol<T: Scalar>(returns: &[Option<T>]) -> Series<T> {
    let alpha = EwmSpec::Span(T::of_usize(VOL_SPAN)).alpha().expect("valid span");
    crate::market_data::ewm_std_sparse(returns, alpha)
}

/// Equal-weight sample standard deviation of the last `window` present values,
/// reported at present positions once `window` values are available.
pub fn rolling_std<T: Scalar>(series: &[Option<T>], window: usize) -> Series<T> {
    assert!(window >= 2, "rolling std needs a window of at least 2");
    let mut buf: std::collections::VecDeque<T> = std::collections::VecDeque::with_capacity(window);
    let n = T::of_usize(window);
    series
        .iter()
        .map(|x| {
            let x = (*x)?;
            if buf.len() == window {
                buf.pop_front();
            }
            buf.push_back(x);
            if buf.len() < window {
                return None;
            }
            let mean = buf.iter().copied().sum::<T>() / n;
            let ss = buf.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
            Some((ss / (n - T::one())).sqrt())
        })
        .collect()
}

/// Normalized MACD indicator for scales `(short, long)`.
pub fn macd_feature<T: Scalar>(prices: &[Option<T>], short: usize, long: usize) -> Series<T> {
    let fast = ewm_mean_sparse(prices, T::one() / T::of_usize(short));
    let slow = ewm_mean_sparse(prices, T::one() / T::of_usize(long));
    let price_std = rolling_std(prices, MACD_PRICE_STD_WINDOW);
    let normalized: Series<T> = (0..prices.len())
        .map(|t| {
            let sd = price_std[t]?;
            if sd <= T::zero() {
                return None;
            }
            Some((fast[t]? - slow[t]?) / sd)
        })
        .collect();
    let norm_std = rolling_std(&normalized, MACD_SIGNAL_STD_WINDOW);
    normalized
        .iter()
        .zip(&norm_std)
        .map(|(m, sd)| {
            let sd = (*sd)?;
            if sd <= T::zero() {
                return None;
            }
            Some((*m)? / sd)
        })
        .collect()
}

/// Clips each value to `μ_t ± k σ_t`, with EWM mean/std (half-life from
/// `spec`) computed on the raw series including the current point. The first
/// observation, whose σ is undefined, passes through.
pub fn winsorize<T: Scalar>(raw: &[Option<T>], spec: WinsorSpec<T>) -> Result<Series<T>> {
    let alpha = EwmSpec::HalfLife(spec.half_life).alpha()?;
    let mut state = EwmState::new(alpha);
    Ok(raw
        .iter()
        .map(|x| {
            let x = (*x)?;
            state.update(x);
            match (state.mean(), state.std()) {
                (Some(mu), Some(sd)) => {
                    let band = spec.multiplier * sd;
                    Some(x.max(mu - band).min(mu + band))
                }
                _ => Some(x),
            }
        })
        .collect())
}

/// Winsorization bands `(μ_t − kσ_t, μ_t + kσ_t)` of a raw series.
pub fn winsor_bands<T: Scalar>(raw: &[Option<T>], spec: WinsorSpec<T>) -> Result<Vec<Option<(T, T)>>> {
    let alpha = EwmSpec::HalfLife(spec.half_life).alpha()?;
    let mut state = EwmState::new(alpha);
    Ok(raw
        .iter()
        .map(|x| {
            let x = (*x)?;
            state.update(x);
            let (mu, sd) = (state.mean()?, state.std()?);
            Some((mu - spec.multiplier * sd, mu + spec.multiplier * sd))
        })
        .collect())
}
