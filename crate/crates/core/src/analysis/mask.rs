use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::{normalize_graph, GraphSnapshot};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMask<C> {
    /// Keep only edges between assets of the same class.
    IntraOnly,
    /// Keep only edges between assets of different classes.
    InterOnly,
    /// Keep only the nodes of one class.
    ClassSubset(C),
}

/// Applies `mask` without renormalizing. `classes` is indexed by universe
/// asset.
pub fn mask_edges<T: Scalar, C: PartialEq + Copy>(
    g: &GraphSnapshot<T>,
    mask: EdgeMask<C>,
    classes: &[C],
) -> GraphSnapshot<T> {
    let class_of = |i: usize| classes[g.nodes[i]];
    match mask {
        EdgeMask::IntraOnly | EdgeMask::InterOnly => {
            let keep_same = matches!(mask, EdgeMask::IntraOnly);
            let mut out = g.clone();
            let n = g.n_nodes();
            for i in 0..n {
                for j in 0..n {
                    if (class_of(i) == class_of(j)) != keep_same {
                        out.adjacency[[i, j]] = T::zero();
                    }
                }
            }
            out
        }
        EdgeMask::ClassSubset(c) => {
            let keep: Vec<usize> = (0..g.n_nodes()).filter(|&i| class_of(i) == c).collect();
            let adjacency = Array2::from_shape_fn((keep.len(), keep.len()), |(a, b)| g.adjacency[[keep[a], keep[b]]]);
            GraphSnapshot {
                date: g.date,
                nodes: keep.iter().map(|&i| g.nodes[i]).collect(),
                tickers: keep.iter().map(|&i| g.tickers[i].clone()).collect(),
                adjacency,
                kind: g.kind,
                provenance: g.provenance.clone(),
            }
        }
    }
}

/// Masks, then renormalizes symmetrically.
pub fn apply_mask<T: Scalar, C: PartialEq + Copy>(
    g: &GraphSnapshot<T>,
    mask: EdgeMask<C>,
    classes: &[C],
) -> GraphSnapshot<T> {
    normalize_graph(&mask_edges(g, mask, classes))
}
