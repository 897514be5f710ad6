use ndarray::Array2;

use super::{GraphKind, GraphSnapshot, Provenance};
use crate::{Error, Result, Scalar};

pub const DEFAULT_REL_EPS: f64 = 1e-4;

/// Mean of `K` graphs for one date over the union of their node sets. Nodes
/// missing from an input contribute zero rows and columns to the sum.
pub fn ensemble_graphs<T: Scalar>(graphs: &[GraphSnapshot<T>]) -> Result<GraphSnapshot<T>> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot ensemble an empty list of graphs".into()))?;
    if let Some(g) = graphs.iter().find(|g| g.date != first.date) {
        return Err(Error::InvalidInput(format!(
            "ensemble mixes dates {} and {}",
            first.date, g.date
        )));
    }
    let mut union: Vec<(usize, String)> = graphs
        .iter()
        .flat_map(|g| g.nodes.iter().copied().zip(g.tickers.iter().cloned()))
        .collect();
    union.sort_by_key(|(i, _)| *i);
    union.dedup_by_key(|(i, _)| *i);
    let nodes: Vec<usize> = union.iter().map(|(i, _)| *i).collect();
    let n = nodes.len();

    let mut sum = Array2::<T>::zeros((n, n));
    let mut provenance = Provenance::default();
    for g in graphs {
        let pos: Vec<usize> = g
            .nodes
            .iter()
            .map(|id| nodes.binary_search(id).expect("node is in the union"))
            .collect();
        for (a, &pa) in pos.iter().enumerate() {
            for (b, &pb) in pos.iter().enumerate() {
                sum[[pa, pb]] += g.adjacency[[a, b]];
            }
        }
        provenance.lookbacks.extend(g.provenance.lookbacks.iter().copied());
        provenance.reports.extend(g.provenance.reports.iter().cloned());
        if provenance.hyper.is_none() {
            provenance.hyper = g.provenance.hyper;
        }
    }
    let k = T::of_usize(graphs.len());
    sum.mapv_inplace(|v| v / k);
    Ok(GraphSnapshot {
        date: first.date,
        nodes,
        tickers: union.into_iter().map(|(_, t)| t).collect(),
        adjacency: sum,
        kind: GraphKind::Ensemble,
        provenance,
    })
}

/// `D^{−1/2} A D^{−1/2}`; nodes of degree zero keep zero rows and columns.
pub fn normalize_graph<T: Scalar>(g: &GraphSnapshot<T>) -> GraphSnapshot<T> {
    let inv_sqrt: Vec<T> = g
        .degrees()
        .into_iter()
        .map(|d| if d > T::zero() { d.sqrt().recip() } else { T::zero() })
        .collect();
    let n = g.n_nodes();
    let mut out = g.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = g.adjacency[[i, j]] * inv_sqrt[i] * inv_sqrt[j];
            out.adjacency[[i, j]] = v;
            out.adjacency[[j, i]] = v;
        }
    }
    out.kind = GraphKind::Normalized;
    out
}

/// Zeroes every weight below `rel_eps` times the largest weight.
pub fn sparsify<T: Scalar>(g: &GraphSnapshot<T>, rel_eps: T) -> GraphSnapshot<T> {
    let max = g.adjacency.iter().fold(T::zero(), |m, &v| m.max(v));
    let cut = rel_eps * max;
    let mut out = g.clone();
    out.adjacency.mapv_inplace(|v| if v < cut { T::zero() } else { v });
    out
}
