use super::PortfolioReturns;
use crate::strategies::SignalSeries;
use crate::{Error, Result, Scalar};

/// Minimum number of common dates for a correlation.
pub const MIN_OVERLAP: usize = 30;

/// Pearson correlation of two return series on their common days.
pub fn return_correlation<T: Scalar>(a: &PortfolioReturns<T>, b: &PortfolioReturns<T>) -> Result<T> {
    let bm = b.by_day();
    let pairs: Vec<(T, T)> = a
        .days
        .iter()
        .zip(&a.returns)
        .filter_map(|(d, &x)| bm.get(d).map(|&y| (x, y)))
        .collect();
    if pairs.len() < MIN_OVERLAP {
        return Err(Error::InvalidInput(format!(
            "{} and {} share {} days (need {MIN_OVERLAP})",
            a.strategy,
            b.strategy,
            pairs.len()
        )));
    }
    let n = T::of_usize(pairs.len());
    let mx = pairs.iter().map(|p| p.0).sum::<T>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if !(sxx > T::zero() && syy > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "correlation of {} and {} undefined: constant series",
            a.strategy, b.strategy
        )));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()))
}

/// Share of (asset, day) cells where both signals are nonzero and point the
/// same way. `None` when there are no such cells.
pub fn sign_agreement<T: Scalar>(a: &SignalSeries<T>, b: &SignalSeries<T>) -> Option<T> {
    let mut both = 0usize;
    let mut same = 0usize;
    for (sa, sb) in a.positions.iter().zip(&b.positions) {
        for (x, y) in sa.iter().zip(sb) {
            if let (Some(x), Some(y)) = (*x, *y) {
                if x != T::zero() && y != T::zero() {
                    both += 1;
                    if (x > T::zero()) == (y > T::zero()) {
                        same += 1;
                    }
                }
            }
        }
    }
    (both > 0).then(|| T::of_usize(same) / T::of_usize(both))
}
