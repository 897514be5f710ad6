use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::Serialize;

use crate::graph::GraphSnapshot;
use crate::Scalar;

/// Node pairs `(i, j)`, `i < j`, whose weight is positive and at least
/// `rel_eps` times the largest weight.
pub fn edge_set<T: Scalar>(g: &GraphSnapshot<T>, rel_eps: T) -> Vec<(usize, usize)> {
    let max = g.adjacency.iter().fold(T::zero(), |m, &v| m.max(v));
    let cut = rel_eps * max;
    let n = g.n_nodes();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = g.adjacency[[i, j]];
            if w > T::zero() && w >= cut {
                out.push((i, j));
            }
        }
    }
    out
}

fn neighbours(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for &(i, j) in edges {
        adj[i][j] = true;
        adj[j][i] = true;
    }
    adj
}

/// `2|E| / (N(N−1))`; zero for graphs with fewer than two nodes.
pub fn edge_sparsity<T: Scalar>(g: &GraphSnapshot<T>, rel_eps: T) -> f64 {
    let n = g.n_nodes();
    if n < 2 {
        return 0.0;
    }
    2.0 * edge_set(g, rel_eps).len() as f64 / (n * (n - 1)) as f64
}

pub fn avg_degree<T: Scalar>(g: &GraphSnapshot<T>, rel_eps: T) -> f64 {
    let n = g.n_nodes();
    if n == 0 {
        return 0.0;
    }
    2.0 * edge_set(g, rel_eps).len() as f64 / n as f64
}

/// Mean local clustering coefficient `2T_i / (d_i(d_i − 1))`. Nodes of
/// degree below two count as 0, or are left out of the mean when
/// `skip_low_degree` is set.
pub fn clustering_coeff<T: Scalar>(g: &GraphSnapshot<T>, rel_eps: T, skip_low_degree: bool) -> f64 {
    let n = g.n_nodes();
    let adj = neighbours(n, &edge_set(g, rel_eps));
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&j| adj[i][j]).collect();
        let d = nb.len();
        if d < 2 {
            if !skip_low_degree {
                count += 1;
            }
            continue;
        }
        let mut tri = 0usize;
        for (x, &a) in nb.iter().enumerate() {
            for &b in &nb[x + 1..] {
                if adj[a][b] {
                    tri += 1;
                }
            }
        }
        sum += 2.0 * tri as f64 / (d * (d - 1)) as f64;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Share of node pairs on which edges agree with class labels: same-class
/// pairs joined by an edge plus cross-class pairs without one, over all
/// unordered pairs. `classes` is indexed by universe asset.
pub fn community_ratio<T: Scalar, C: PartialEq>(g: &GraphSnapshot<T>, classes: &[C], rel_eps: T) -> f64 {
    let n = g.n_nodes();
    if n < 2 {
        return 0.0;
    }
    let adj = neighbours(n, &edge_set(g, rel_eps));
    let mut agree = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let same = classes[g.nodes[i]] == classes[g.nodes[j]];
            if same == adj[i][j] {
                agree += 1;
            }
        }
    }
    (2.0 * agree as f64 / (n * (n - 1)) as f64).clamp(0.0, 1.0)
}

fn ticker_edges<T: Scalar>(g: &GraphSnapshot<T>, rel_eps: T) -> BTreeSet<(&str, &str)> {
    edge_set(g, rel_eps)
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (g.tickers[i].as_str(), g.tickers[j].as_str());
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

/// Jaccard similarity of the ticker-identified edge sets; 1 when both are
/// empty.
pub fn jaccard_index<T: Scalar>(a: &GraphSnapshot<T>, b: &GraphSnapshot<T>, rel_eps: T) -> f64 {
    let ea = ticker_edges(a, rel_eps);
    let eb = ticker_edges(b, rel_eps);
    let union = ea.union(&eb).count();
    if union == 0 {
        return 1.0;
    }
    ea.intersection(&eb).count() as f64 / union as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologyStats {
    pub date: NaiveDate,
    pub n_nodes: usize,
    pub sparsity: f64,
    pub avg_degree: f64,
    pub clustering: f64,
    pub community_ratio: f64,
    /// Against the previous graph in the sequence.
    pub jaccard: Option<f64>,
}

/// Statistics for each graph of a date-ordered sequence.
pub fn topology_series<'a, T: Scalar, C: PartialEq>(
    graphs: impl IntoIterator<Item = &'a GraphSnapshot<T>>,
    classes: &[C],
    rel_eps: T,
    skip_low_degree: bool,
) -> Vec<TopologyStats> {
    let mut out = Vec::new();
    let mut prev: Option<&GraphSnapshot<T>> = None;
    for g in graphs {
        out.push(TopologyStats {
            date: g.date,
            n_nodes: g.n_nodes(),
            sparsity: edge_sparsity(g, rel_eps),
            avg_degree: avg_degree(g, rel_eps),
            clustering: clustering_coeff(g, rel_eps, skip_low_degree),
            community_ratio: community_ratio(g, classes, rel_eps),
            jaccard: prev.map(|p| jaccard_index(g, p, rel_eps)),
        });
        prev = Some(g);
    }
    out
}
