use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::linalg::{cholesky, cholesky_inverse, symmetric_eigen};
use crate::{Error, Result, Scalar};

/// Two-sided 5% critical value of the normal distribution, as used for the
/// significance stars.
pub const T_CRITICAL: f64 = 1.96;

/// Largest condition number of the standardized Gram matrix accepted by
/// [`fit_ols`].
pub const MAX_CONDITION: f64 = 1e12;

/// Pooled least-squares fit on standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel<T> {
    pub feature_names: Vec<String>,
    pub means: Vec<T>,
    pub stds: Vec<T>,
    /// Coefficients on the standardized scale.
    pub coefficients: Vec<T>,
    pub intercept: T,
    pub std_errors: Vec<T>,
    pub intercept_std_error: T,
    /// `None` where the standard error is zero.
    pub t_stats: Vec<Option<T>>,
    /// Two-sided normal-approximation p-values.
    pub p_values: Vec<Option<T>>,
    pub residual_variance: T,
    pub n_samples: usize,
}

impl<T: Scalar> RegressionModel<T> {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.n_features());
        let mut y = self.intercept;
        for k in 0..self.n_features() {
            y += self.coefficients[k] * (x[k] - self.means[k]) / self.stds[k];
        }
        y
    }

    pub fn is_significant(&self, k: usize) -> bool {
        self.t_stats[k].is_some_and(|t| t.abs() > T::of(T_CRITICAL))
    }
}

/// Growing design matrix; rows with any non-finite entry are dropped.
#[derive(Clone, Debug, Default)]
pub struct Samples<T> {
    width: usize,
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> Samples<T> {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[T], target: T) {
        debug_assert_eq!(row.len(), self.width);
        if target.is_finite() && row.iter().all(|v| v.is_finite()) {
            self.x.extend_from_slice(row);
            self.y.push(target);
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn design(&self) -> Array2<T> {
        Array2::from_shape_vec((self.len(), self.width), self.x.clone()).expect("rows have equal width")
    }

    pub fn targets(&self) -> &[T] {
        &self.y
    }

    pub fn fit(&self, names: &[String]) -> Result<RegressionModel<T>> {
        fit_ols(&self.design(), &self.y, names)
    }
}

/// Least squares with intercept on features standardized by the training
/// mean and population standard deviation. Standard errors come from the
/// classical `σ̂² (ZᵀZ)⁻¹` with `σ̂² = RSS / (n − k − 1)`.
pub fn fit_ols<T: Scalar>(x: &Array2<T>, y: &[T], names: &[String]) -> Result<RegressionModel<T>> {
    let (n, k) = x.dim();
    if names.len() != k || y.len() != n {
        return Err(Error::InvalidInput("design, target and names disagree in shape".into()));
    }
    if n < k + 1 {
        return Err(Error::InvalidInput(format!("{n} samples for {k} features and an intercept")));
    }
    let nf = T::of_usize(n);
    let means: Vec<T> = (0..k).map(|j| x.column(j).sum() / nf).collect();
    let stds: Vec<T> = (0..k)
        .map(|j| (x.column(j).iter().map(|&v| (v - means[j]) * (v - means[j])).sum::<T>() / nf).sqrt())
        .collect();
    let flat: Vec<String> = (0..k)
        .filter(|&j| !(stds[j] > T::zero()))
        .map(|j| names[j].clone())
        .collect();
    if !flat.is_empty() {
        return Err(Error::SingularDesign {
            condition: f64::INFINITY,
            columns: flat,
        });
    }
    let z = Array2::from_shape_fn((n, k), |(i, j)| (x[[i, j]] - means[j]) / stds[j]);
    let gram = z.t().dot(&z);

    let eig = symmetric_eigen(&gram);
    let (lo, hi) = (eig.values[0], eig.values[k - 1]);
    let condition = if lo > T::zero() { (hi / lo).as_f64() } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        let v = eig.vectors.column(0);
        let columns = (0..k)
            .filter(|&j| v[j].abs() > T::of(0.1))
            .map(|j| names[j].clone())
            .collect();
        return Err(Error::SingularDesign { condition, columns });
    }
    let l = cholesky(&gram).ok_or_else(|| Error::SingularDesign {
        condition,
        columns: names.to_vec(),
    })?;

    let yv = Array1::from_vec(y.to_vec());
    let intercept = yv.sum() / nf;
    let centered = yv.mapv(|v| v - intercept);
    let beta = crate::linalg::cholesky_solve(&l, &z.t().dot(&centered));
    let resid = &centered - &z.dot(&beta);
    let rss = resid.iter().map(|&r| r * r).sum::<T>();
    let dof = n - k - 1;
    let sigma2 = if dof > 0 { rss / T::of_usize(dof) } else { T::zero() };
    let inv = cholesky_inverse(&l);
    let std_errors: Vec<T> = (0..k).map(|j| (sigma2 * inv[[j, j]]).max(T::zero()).sqrt()).collect();
    let t_stats: Vec<Option<T>> = (0..k)
        .map(|j| (std_errors[j] > T::zero()).then(|| beta[j] / std_errors[j]))
        .collect();
    let p_values = t_stats
        .iter()
        .map(|t| t.map(|t| T::of(erfc(t.abs().as_f64() / std::f64::consts::SQRT_2))))
        .collect();
    Ok(RegressionModel {
        feature_names: names.to_vec(),
        means,
        stds,
        coefficients: beta.to_vec(),
        intercept,
        std_errors,
        intercept_std_error: (sigma2 / nf).sqrt(),
        t_stats,
        p_values,
        residual_variance: sigma2,
        n_samples: n,
    })
}
