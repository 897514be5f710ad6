use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar, TRADING_DAYS};

/// How the length of the maximum-drawdown episode is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MddDuration {
    /// From the peak before the deepest trough until the peak is regained
    /// (or the series ends).
    #[default]
    Underwater,
    /// From that peak to the trough only.
    PeakToTrough,
}

/// Annualized performance summary of a daily return series. Ratios that
/// would divide by zero are `None`, with the reason listed in `notes`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerfReport<T> {
    pub n_days: usize,
    pub annual_return: T,
    pub volatility: T,
    pub sharpe: Option<T>,
    pub downside_deviation: T,
    pub max_drawdown: T,
    pub mdd_duration: T,
    pub sortino: Option<T>,
    pub calmar: Option<T>,
    pub hit_rate: T,
    pub avg_profit_over_loss: Option<T>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Maximum drawdown of the compounded equity curve starting at 1, with the
/// episode length in days under both conventions.
pub(crate) fn drawdown<T: Scalar>(returns: &[T]) -> (T, usize, usize) {
    let mut equity = T::one();
    let mut peak = T::one();
    let mut peak_at = 0usize;
    let mut worst = T::zero();
    let mut worst_peak_at = 0usize;
    let mut worst_trough_at = 0usize;
    let mut curve = Vec::with_capacity(returns.len() + 1);
    curve.push(equity);
    for (i, &r) in returns.iter().enumerate() {
        equity *= T::one() + r;
        curve.push(equity);
        if equity > peak {
            peak = equity;
            peak_at = i + 1;
        }
        let dd = T::one() - equity / peak;
        if dd > worst {
            worst = dd;
            worst_peak_at = peak_at;
            worst_trough_at = i + 1;
        }
    }
    if worst == T::zero() {
        return (worst, 0, 0);
    }
    let peak_value = curve[worst_peak_at];
    let recovered = (worst_trough_at + 1..curve.len())
        .find(|&k| curve[k] >= peak_value)
        .unwrap_or(curve.len() - 1);
    (worst, recovered - worst_peak_at, worst_trough_at - worst_peak_at)
}

pub fn perf_metrics<T: Scalar>(returns: &[T], mode: MddDuration) -> Result<PerfReport<T>> {
    let n = returns.len();
    if n == 0 {
        return Err(Error::InvalidInput("performance metrics of an empty return series".into()));
    }
    let nf = T::of_usize(n);
    let year = T::of_usize(TRADING_DAYS);
    let mean = returns.iter().copied().sum::<T>() / nf;
    let constant = returns.iter().all(|&r| r == returns[0]);
    let var = if n > 1 && !constant {
        returns.iter().map(|&r| (r - mean) * (r - mean)).sum::<T>() / T::of_usize(n - 1)
    } else {
        T::zero()
    };
    let annual_return = mean * year;
    let volatility = (var * year).sqrt();
    let downside = (returns.iter().map(|&r| r.min(T::zero()).powi(2)).sum::<T>() / nf * year).sqrt();
    let (mdd, underwater, to_trough) = drawdown(returns);
    let duration = match mode {
        MddDuration::Underwater => underwater,
        MddDuration::PeakToTrough => to_trough,
    };
    let wins: Vec<T> = returns.iter().copied().filter(|&r| r > T::zero()).collect();
    let losses: Vec<T> = returns.iter().copied().filter(|&r| r < T::zero()).collect();

    let mut notes = Vec::new();
    let mut ratio = |name: &str, num: T, den: T| {
        if den > T::zero() {
            Some(num / den)
        } else {
            notes.push(format!("{name} undefined: zero denominator"));
            None
        }
    };
    let sharpe = ratio("sharpe", annual_return, volatility);
    let sortino = ratio("sortino", annual_return, downside);
    let calmar = ratio("calmar", annual_return, mdd);
    let avg_profit_over_loss = if wins.is_empty() || losses.is_empty() {
        notes.push("avg_profit_over_loss undefined: no gains or no losses".into());
        None
    } else {
        let gain = wins.iter().copied().sum::<T>() / T::of_usize(wins.len());
        let loss = losses.iter().copied().sum::<T>() / T::of_usize(losses.len());
        Some(gain / loss.abs())
    };
    Ok(PerfReport {
        n_days: n,
        annual_return,
        volatility,
        sharpe,
        downside_deviation: downside,
        max_drawdown: mdd,
        mdd_duration: T::of_usize(duration) / nf,
        sortino,
        calmar,
        hit_rate: T::of_usize(wins.len()) / nf,
        avg_profit_over_loss,
        notes,
    })
}
