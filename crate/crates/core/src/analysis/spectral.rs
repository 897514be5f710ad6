use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::GraphSnapshot;
use crate::linalg::symmetric_eigen;
use crate::{Error, Result, Scalar};

const RESTARTS: usize = 10;
const MAX_LLOYD: usize = 200;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations. Returns labels and inertia.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &di) in d.iter().enumerate() {
                if u < di {
                    pick = i;
                    break;
                }
                u -= di;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .expect("k >= 1");
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (d, x) in center.iter_mut().enumerate() {
                *x = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (labels, inertia)
}

/// Relabels clusters in order of first appearance.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = Vec::new();
    labels
        .iter()
        .map(|l| match map.iter().position(|m| m == l) {
            Some(i) => i,
            None => {
                map.push(*l);
                map.len() - 1
            }
        })
        .collect()
}

/// Cluster label per node (graph order), from the `k` lowest eigenvectors of
/// `I − D^{−1/2} A D^{−1/2}` with rows scaled to unit length, grouped by
/// seeded k-means++ (best of ten restarts). Labels are numbered by first
/// appearance.
pub fn spectral_clustering<T: Scalar>(g: &GraphSnapshot<T>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = g.n_nodes();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot form {k} clusters from {n} nodes")));
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .iter()
        .map(|d| if *d > T::zero() { 1.0 / d.as_f64().sqrt() } else { 0.0 })
        .collect();
    let lap = Array2::from_shape_fn((n, n), |(i, j)| {
        let off = -g.adjacency[[i, j]].as_f64() * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    });
    let eig = symmetric_eigen(&lap);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|c| eig.vectors[[i, c]]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..RESTARTS {
        let (labels, inertia) = kmeans(&points, k, &mut rng);
        if best.as_ref().is_none_or(|b| inertia < b.1 - 1e-12) {
            best = Some((labels, inertia));
        }
    }
    Ok(canonical(&best.expect("at least one restart").0))
}

/// Whether two labelings agree up to a renaming of clusters.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && canonical(a) == canonical(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::topology::tests::from_edges;

    fn cliques(sizes: &[usize]) -> GraphSnapshot<f64> {
        let n: usize = sizes.iter().sum();
        let mut edges = Vec::new();
        let mut start = 0;
        for &s in sizes {
            for i in start..start + s {
                for j in (i + 1)..start + s {
                    edges.push((i, j));
                }
            }
            start += s;
        }
        from_edges(n, &edges)
    }

    #[test]
    fn disjoint_cliques_are_components() {
        let g = cliques(&[3, 4]);
        let labels = spectral_clustering(&g, 2, 1).unwrap();
        assert!(same_partition(&labels, &[0, 0, 0, 1, 1, 1, 1]));
    }

    #[test]
    fn single_cluster_and_bad_k() {
        let g = cliques(&[5]);
        assert_eq!(spectral_clustering(&g, 1, 0).unwrap(), vec![0; 5]);
        assert!(spectral_clustering(&g, 6, 0).is_err());
        assert!(spectral_clustering(&g, 0, 0).is_err());
    }

    #[test]
    fn weakly_linked_blocks_are_stable_across_seeds() {
        let mut g = cliques(&[4, 4, 4]);
        for (i, j) in [(0, 4), (5, 9), (11, 2)] {
            g.adjacency[[i, j]] = 0.05;
            g.adjacency[[j, i]] = 0.05;
        }
        let first = spectral_clustering(&g, 3, 0).unwrap();
        assert!(same_partition(&first, &[0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]));
        for seed in 1..10 {
            assert_eq!(spectral_clustering(&g, 3, seed).unwrap(), first);
        }
    }

    #[test]
    fn canonical_labels() {
        assert_eq!(canonical(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
        assert!(same_partition(&[1, 1, 0], &[0, 0, 2]));
        assert!(!same_partition(&[1, 0, 0], &[0, 0, 2]));
    }
}
