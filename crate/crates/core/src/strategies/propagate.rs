use chrono::NaiveDate;
use ndarray::Array2;

use crate::features::FeatureMatrix;
use crate::graph::GraphSnapshot;
use crate::{Scalar, N_FEATURES};

/// Network momentum `ũ_t = Ã U_t`, with rows aligned to the rows of `U_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatedFeatures<T> {
    pub day: usize,
    pub date: NaiveDate,
    pub assets: Vec<usize>,
    pub tickers: Vec<String>,
    pub values: Array2<T>,
}

/// Weighted sum of neighbours' features for every asset in `u`. Graph nodes
/// without features on the day drop out of the sum; assets absent from the
/// graph (or isolated in it) get a zero vector.
pub fn propagate<T: Scalar>(graph: &GraphSnapshot<T>, u: &FeatureMatrix<T>) -> PropagatedFeatures<T> {
    // graph position -> row of u
    let rows: Vec<Option<usize>> = graph.nodes.iter().map(|&a| u.row_of(a)).collect();
    let mut values = Array2::zeros((u.n_rows(), N_FEATURES));
    for (r, &asset) in u.assets.iter().enumerate() {
        let Some(i) = graph.position(asset) else {
            continue;
        };
        for (j, row_j) in rows.iter().enumerate() {
            let w = graph.adjacency[[i, j]];
            if w == T::zero() {
                continue;
            }
            if let Some(rj) = *row_j {
                for k in 0..N_FEATURES {
                    values[[r, k]] += w * u.values[[rj, k]];
                }
            }
        }
    }
    PropagatedFeatures {
        day: u.day,
        date: u.date,
        assets: u.assets.clone(),
        tickers: u.tickers.clone(),
        values,
    }
}
