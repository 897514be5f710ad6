use chrono::NaiveDate;

use crate::features::StackedFeatureMatrix;
use crate::{Error, Result, Scalar};

/// Squared Euclidean distances between the rows of `V`, stored over the
/// upper triangle in row-major order: `(0,1), (0,2), …, (0,n−1), (1,2), …`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseDistances<T> {
    pub date: NaiveDate,
    pub nodes: Vec<usize>,
    pub tickers: Vec<String>,
    pub z: Vec<T>,
}

impl<T: Scalar> PairwiseDistances<T> {
    /// Distances over `n` anonymous nodes (`n0`, `n1`, …).
    pub fn from_upper(n: usize, z: Vec<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("graph learning needs at least 2 nodes".into()));
        }
        if z.len() != edge_count(n) {
            return Err(Error::InvalidInput(format!(
                "{} distances for {n} nodes (expected {})",
                z.len(),
                edge_count(n)
            )));
        }
        if z.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput("distances must be finite and non-negative".into()));
        }
        Ok(Self {
            date: NaiveDate::default(),
            nodes: (0..n).collect(),
            tickers: (0..n).map(|i| format!("n{i}")).collect(),
            z,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Divides by the mean distance (no-op when all distances are zero).
    pub fn unit_mean(mut self) -> Self {
        let m = self.z.iter().copied().sum::<T>() / T::of_usize(self.z.len());
        if m > T::zero() {
            self.z.iter_mut().for_each(|v| *v /= m);
        }
        self
    }
}

pub fn edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Endpoints of every edge in storage order.
pub fn edge_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(edge_count(n));
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

pub fn pairwise_sq_distances<T: Scalar>(v: &StackedFeatureMatrix<T>) -> Result<PairwiseDistances<T>> {
    let n = v.assets.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 nodes to learn a graph, got {n}"
        )));
    }
    let mut z = Vec::with_capacity(edge_count(n));
    for (i, j) in edge_pairs(n) {
        let (a, b) = (v.values.row(i), v.values.row(j));
        let d = a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>();
        z.push(d);
    }
    Ok(PairwiseDistances {
        date: v.date,
        nodes: v.assets.clone(),
        tickers: v.tickers.clone(),
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stacked(values: Array2<f64>) -> StackedFeatureMatrix<f64> {
        let n = values.nrows();
        StackedFeatureMatrix {
            day: 0,
            date: NaiveDate::default(),
            delta: 1,
            assets: (0..n).collect(),
            tickers: (0..n).map(|i| format!("a{i}")).collect(),
            values,
        }
    }

    #[test]
    fn identical_rows() {
        let z = pairwise_sq_distances(&stacked(array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]])).unwrap();
        assert!(z.z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_dimensional() {
        let z = pairwise_sq_distances(&stacked(array![[0.0], [3.0]])).unwrap();
        assert_eq!(z.z, vec![9.0]);
    }

    #[test]
    fn too_few_nodes() {
        assert!(pairwise_sq_distances(&stacked(array![[0.0]])).is_err());
    }

    #[test]
    fn trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = Array2::from_shape_fn((5, 4), |_| rng.random_range(-2.0..2.0));
            let z = pairwise_sq_distances(&stacked(v.clone())).unwrap();
            let mut a = Array2::<f64>::zeros((5, 5));
            for (e, (i, j)) in edge_pairs(5).into_iter().enumerate() {
                let w = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) };
                a[[i, j]] = w;
                a[[j, i]] = w;
                let _ = e;
            }
            let d = Array2::from_diag(&a.sum_axis(ndarray::Axis(1)));
            let lap = &d - &a;
            let trace = v.t().dot(&lap).dot(&v).diag().sum();
            let pairs: f64 = edge_pairs(5)
                .into_iter()
                .enumerate()
                .map(|(e, (i, j))| a[[i, j]] * z.z[e])
                .sum();
            assert!((trace - pairs).abs() < 1e-10);
        }
    }
}
