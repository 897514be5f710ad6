use std::time::Instant;

use ndarray::{Array1, Array2};

use super::distances::edge_pairs;
use super::{GraphHyperParams, GraphKind, GraphSnapshot, PairwiseDistances, Provenance, SolverReport};
use crate::linalg::{cholesky, cholesky_solve};
use crate::{Error, Result, Scalar};

/// Degrees at or below this value are treated as infeasible by the line search.
const MIN_DEGREE: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 80;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Starting edge vector; ignored unless it has the right length and gives
    /// every node a positive degree.
    pub warm_start: Option<Vec<T>>,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-6),
            max_iter: 50_000,
            warm_start: None,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn new(tol: T, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LearnedGraph<T> {
    /// Edge weights in upper-triangle storage order.
    pub weights: Vec<T>,
    pub snapshot: GraphSnapshot<T>,
    pub report: SolverReport<T>,
}

fn degrees<T: Scalar>(n: usize, pairs: &[(usize, usize)], w: &[T]) -> Vec<T> {
    let mut d = vec![T::zero(); n];
    for (&(i, j), &we) in pairs.iter().zip(w) {
        d[i] += we;
        d[j] += we;
    }
    d
}

fn objective_at<T: Scalar>(z: &[T], w: &[T], d: &[T], hp: GraphHyperParams<T>) -> T {
    if d.iter().any(|&di| !(di > T::zero())) {
        return T::infinity();
    }
    let linear: T = z.iter().zip(w).map(|(&a, &b)| a * b).sum();
    let barrier: T = d.iter().map(|&di| di.ln()).sum();
    let ridge: T = w.iter().map(|&x| x * x).sum();
    linear - hp.alpha * barrier + T::of(2.0) * hp.beta * ridge
}

fn gradient<T: Scalar>(z: &[T], w: &[T], d: &[T], pairs: &[(usize, usize)], hp: GraphHyperParams<T>) -> Vec<T> {
    let four_beta = T::of(4.0) * hp.beta;
    pairs
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| z[e] - hp.alpha * (d[i].recip() + d[j].recip()) + four_beta * w[e])
        .collect()
}

fn residual<T: Scalar>(w: &[T], g: &[T], tol: T) -> T {
    w.iter().zip(g).fold(T::zero(), |acc, (&we, &ge)| {
        let r = if we > tol { ge.abs() } else { (-ge).max(T::zero()) };
        acc.max(r)
    })
}

/// `F(w)`, or `+∞` when some degree is not positive.
pub fn objective<T: Scalar>(z: &PairwiseDistances<T>, w: &[T], hp: GraphHyperParams<T>) -> T {
    let n = z.n_nodes();
    let pairs = edge_pairs(n);
    objective_at(&z.z, w, &degrees(n, &pairs, w), hp)
}

/// Maximum violation of the first-order conditions at `w`: `|g_e|` on edges
/// with `w_e > tol`, `max(0, −g_e)` on the rest.
pub fn kkt_residual<T: Scalar>(z: &PairwiseDistances<T>, w: &[T], hp: GraphHyperParams<T>, tol: T) -> T {
    let n = z.n_nodes();
    let pairs = edge_pairs(n);
    let d = degrees(n, &pairs, w);
    if d.iter().any(|&di| !(di > T::zero())) {
        return T::infinity();
    }
    residual(w, &gradient(&z.z, w, &d, &pairs, hp), tol)
}

/// Newton direction restricted to the free edges, `H_FF p = −g_F`, with
/// `H = 4βI + Sᵀ diag(α/d²) S` (`S` the unsigned node-edge incidence). The
/// edge-space system is reduced to an `n × n` one by the Woodbury identity:
/// `p_F = −(g_F − S_Fᵀ x) / 4β` where `(4β diag(d²/α) + S_F S_Fᵀ) x = S_F g_F`.
fn free_newton_direction<T: Scalar>(
    n: usize,
    pairs: &[(usize, usize)],
    free: &[bool],
    g: &[T],
    d: &[T],
    hp: GraphHyperParams<T>,
) -> Option<Vec<T>> {
    let c = T::of(4.0) * hp.beta;
    let mut k = Array2::<T>::zeros((n, n));
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        k[[i, i]] = c * d[i] * d[i] / hp.alpha;
    }
    for (e, &(i, j)) in pairs.iter().enumerate() {
        if !free[e] {
            continue;
        }
        k[[i, i]] += T::one();
        k[[j, j]] += T::one();
        k[[i, j]] += T::one();
        k[[j, i]] += T::one();
        y[i] += g[e];
        y[j] += g[e];
    }
    let l = cholesky(&k)?;
    let x = cholesky_solve(&l, &y);
    let p: Vec<T> = pairs
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| if free[e] { -(g[e] - x[i] - x[j]) / c } else { T::zero() })
        .collect();
    p.iter().all(|v| v.is_finite()).then_some(p)
}

/// Solves the graph-learning program by a two-metric projected Newton method:
/// edges that sit at (or within a shrinking margin of) zero with a positive
/// gradient take a diagonally scaled gradient step, the remaining edges take a
/// Newton step, and the combined step is projected onto `w ≥ 0` with Armijo
/// backtracking along the projection arc. Any trial point with a degree at or
/// below `1e−12` is rejected and the step halved.
///
/// Hitting `max_iter` is not an error: the report carries `converged = false`
/// and the caller decides.
pub fn learn_graph<T: Scalar>(
    z: &PairwiseDistances<T>,
    hp: GraphHyperParams<T>,
    opts: &SolverOptions<T>,
) -> Result<LearnedGraph<T>> {
    let started = Instant::now();
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidInput(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    GraphHyperParams::new(hp.alpha, hp.beta)?;
    let n = z.n_nodes();
    if n < 2 {
        return Err(Error::InvalidInput("graph learning needs at least 2 nodes".into()));
    }
    let pairs = edge_pairs(n);
    let m = pairs.len();
    if z.z.len() != m {
        return Err(Error::InvalidInput("distance vector does not match node count".into()));
    }
    let zv = &z.z;
    let min_degree = T::of(MIN_DEGREE);
    let feasible = |d: &[T]| d.iter().all(|&di| di > min_degree);

    let uniform = (hp.alpha / (T::of(2.0) * hp.beta * T::of_usize(n - 1))).sqrt();
    let mut w = match &opts.warm_start {
        Some(ws)
            if ws.len() == m
                && ws.iter().all(|&v| v >= T::zero() && v.is_finite())
                && feasible(&degrees(n, &pairs, ws)) =>
        {
            ws.clone()
        }
        _ => vec![uniform; m],
    };
    let mut d = degrees(n, &pairs, &w);
    let mut f = objective_at(zv, &w, &d, hp);
    let mut g = gradient(zv, &w, &d, &pairs, hp);
    let mut res = residual(&w, &g, opts.tol);
    let mut iterations = 0;
    let c = T::of(4.0) * hp.beta;
    let armijo = T::of(ARMIJO);
    let slack = T::epsilon() * T::of(8.0);

    while res > opts.tol && iterations < opts.max_iter {
        iterations += 1;

        let pg_norm = w
            .iter()
            .zip(&g)
            .map(|(&we, &ge)| {
                let s = we - (we - ge).max(T::zero());
                s * s
            })
            .sum::<T>()
            .sqrt();
        let w_max = w.iter().fold(T::zero(), |a, &b| a.max(b));
        let margin = pg_norm.min(T::of(1e-3) * w_max.max(T::min_positive_value()));
        let free: Vec<bool> = w.iter().zip(&g).map(|(&we, &ge)| !(we <= margin && ge > T::zero())).collect();

        let scaled = |e: usize| {
            let (i, j) = pairs[e];
            -g[e] / (c + hp.alpha / (d[i] * d[i]) + hp.alpha / (d[j] * d[j]))
        };
        let mut p = match free_newton_direction(n, &pairs, &free, &g, &d, hp) {
            Some(p) if (0..m).filter(|&e| free[e]).map(|e| g[e] * p[e]).sum::<T>() < T::zero() => p,
            _ => (0..m).map(|e| if free[e] { scaled(e) } else { T::zero() }).collect(),
        };
        for e in 0..m {
            if !free[e] {
                p[e] = scaled(e);
            }
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<T> = w.iter().zip(&p).map(|(&we, &pe)| (we + step * pe).max(T::zero())).collect();
            let dt = degrees(n, &pairs, &trial);
            if feasible(&dt) {
                let ft = objective_at(zv, &trial, &dt, hp);
                let predicted: T = (0..m)
                    .map(|e| if free[e] { -step * g[e] * p[e] } else { g[e] * (w[e] - trial[e]) })
                    .sum();
                if ft <= f - armijo * predicted + slack * f.abs() {
                    accepted = Some((trial, dt, ft));
                    break;
                }
            }
            step *= T::of(0.5);
        }
        let Some((trial, dt, ft)) = accepted else {
            break;
        };
        let moved = trial.iter().zip(&w).any(|(a, b)| a != b);
        w = trial;
        d = dt;
        f = ft;
        g = gradient(zv, &w, &d, &pairs, hp);
        res = residual(&w, &g, opts.tol);
        if !moved {
            break;
        }
    }

    let mut adjacency = Array2::zeros((n, n));
    for (&(i, j), &we) in pairs.iter().zip(&w) {
        adjacency[[i, j]] = we;
        adjacency[[j, i]] = we;
    }
    let report = SolverReport {
        iterations,
        objective: f,
        kkt_residual: res,
        converged: res <= opts.tol,
        wall_time: started.elapsed(),
    };
    let snapshot = GraphSnapshot {
        date: z.date,
        nodes: z.nodes.clone(),
        tickers: z.tickers.clone(),
        adjacency,
        kind: GraphKind::Raw,
        provenance: Provenance {
            lookbacks: Vec::new(),
            hyper: Some(hp),
            reports: vec![report.clone()],
        },
    };
    Ok(LearnedGraph {
        weights: w,
        snapshot,
        report,
    })
}
