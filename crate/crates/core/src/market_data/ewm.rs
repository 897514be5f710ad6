use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// How the smoothing factor of an exponentially weighted statistic is given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum EwmSpec<T> {
    /// `α = 2 / (N + 1)`
    Span(T),
    /// `α = 1 − 2^(−1/HL)`
    HalfLife(T),
    /// `α = 1 / J`
    Scale(T),
}

impl<T: Scalar> EwmSpec<T> {
    pub fn alpha(&self) -> Result<T> {
        let one = T::one();
        let alpha = match *self {
            EwmSpec::Span(n) => {
                if !(n >= one) {
                    return Err(Error::InvalidInput(format!("ewm span must be >= 1, got {n}")));
                }
                T::of(2.0) / (n + one)
            }
            EwmSpec::HalfLife(hl) => {
                if !(hl > T::zero()) {
                    return Err(Error::InvalidInput(format!("ewm half-life must be > 0, got {hl}")));
                }
                one - T::of(2.0).powf(-one / hl)
            }
            EwmSpec::Scale(j) => {
                if !(j >= one) {
                    return Err(Error::InvalidInput(format!("ewm scale must be >= 1, got {j}")));
                }
                one / j
            }
        };
        Ok(alpha)
    }
}

/// Running state of the expanding, normalized exponential weighting
/// `w_τ = (1 − α)^τ`. Mean and (population) variance are updated with the
/// weighted form of Welford's recurrence, which is exact for the normalized
/// sums and avoids the cancellation of `E[x²] − μ²`.
#[derive(Clone, Copy, Debug)]
pub struct EwmState<T> {
    decay: T,
    weight: T,
    mean: T,
    m2: T,
    count: usize,
}

impl<T: Scalar> EwmState<T> {
    pub fn new(alpha: T) -> Self {
        Self {
            decay: T::one() - alpha,
            weight: T::zero(),
            mean: T::zero(),
            m2: T::zero(),
            count: 0,
        }
    }

    pub fn update(&mut self, x: T) {
        self.weight = self.weight * self.decay + T::one();
        self.m2 = self.m2 * self.decay;
        let delta = x - self.mean;
        self.mean += delta / self.weight;
        self.m2 += delta * (x - self.mean);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<T> {
        (self.count > 0).then_some(self.mean)
    }

    /// Weighted standard deviation; defined from the second observation on.
    pub fn std(&self) -> Option<T> {
        (self.count >= 2).then(|| (self.m2 / self.weight).max(T::zero()).sqrt())
    }
}

/// Expanding exponentially weighted mean.
pub fn ewm_mean<T: Scalar>(series: &[T], spec: EwmSpec<T>) -> Result<Vec<T>> {
    if series.is_empty() {
        return Err(Error::InvalidInput("ewm_mean of an empty series".into()));
    }
    let mut state = EwmState::new(spec.alpha()?);
    Ok(series
        .iter()
        .map(|&x| {
            state.update(x);
            state.mean
        })
        .collect())
}

/// Expanding exponentially weighted standard deviation; missing where fewer
/// than two observations have been seen.
pub fn ewm_std<T: Scalar>(series: &[T], spec: EwmSpec<T>) -> Result<Vec<Option<T>>> {
    if series.is_empty() {
        return Err(Error::InvalidInput("ewm_std of an empty series".into()));
    }
    let mut state = EwmState::new(spec.alpha()?);
    Ok(series
        .iter()
        .map(|&x| {
            state.update(x);
            state.std()
        })
        .collect())
}

/// EWM mean over a series with gaps: missing entries are skipped (no decay
/// step) and yield `None` at their position.
pub fn ewm_mean_sparse<T: Scalar>(series: &[Option<T>], alpha: T) -> Vec<Option<T>> {
    let mut state = EwmState::new(alpha);
    series
        .iter()
        .map(|x| {
            x.and_then(|x| {
                state.update(x);
                state.mean()
            })
        })
        .collect()
}

/// EWM standard deviation over a series with gaps; see [`ewm_mean_sparse`].
pub fn ewm_std_sparse<T: Scalar>(series: &[Option<T>], alpha: T) -> Vec<Option<T>> {
    let mut state = EwmState::new(alpha);
    series
        .iter()
        .map(|x| {
            x.and_then(|x| {
                state.update(x);
                state.std()
            })
        })
        .collect()
}
