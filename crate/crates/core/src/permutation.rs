//! Ordering the nodes of a cluster along its road.
//!
//! Lights on one road section see traffic at one speed, so the intervals
//! between consecutive lights cluster around a common value `t_C`. For a
//! candidate `t_C` the best ordering minimizes
//! `DISS(ρ) = Σ |t(ρ_i, ρ_{i+1}) - t_C|`, which is a shortest Hamiltonian
//! path over edge weights `|t_lk - t_C|`. Every observed interval in the
//! cluster is tried as `t_C`; each yields a path from a Christofides-style
//! heuristic and the lowest-DISS path wins.
//!
//! Pairs that never exchanged a record have no interval. They are given the
//! weight [`ABSENT_PENALTY`] so paths only use them as a last resort.

use ndarray::Array2;

use crate::ingest::TimeMatrix;

/// Weight (seconds) standing in for an unobserved interval.
pub const ABSENT_PENALTY: f64 = 1e6;

/// Candidate reference intervals closer than this are solved once.
const CANDIDATE_EPS: f64 = 1e-9;

/// Best road ordering found for a cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPermutation {
    /// Node indices in path order.
    pub order: Vec<usize>,
    /// `DISS(order)` at `t_c`, in seconds.
    pub diss: f64,
    /// Reference interval the order was optimized for.
    pub t_c: f64,
}

/// Interval dissimilarity of `order` against reference interval `t_c`.
/// Unobserved adjacent pairs contribute [`ABSENT_PENALTY`].
pub fn diss(order: &[usize], times: &TimeMatrix, t_c: f64) -> f64 {
    order
        .windows(2)
        .map(|w| match times.get(w[0], w[1]) {
            Some(t) => (t - t_c).abs(),
            None => ABSENT_PENALTY,
        })
        .sum()
}

/// Adjacent intervals along `order`; `None` where the pair was never observed.
pub fn adjacent_intervals(order: &[usize], times: &TimeMatrix) -> Vec<Option<f64>> {
    order.windows(2).map(|w| times.get(w[0], w[1])).collect()
}

/// Distinct observed intervals within `cluster`, ascending.
pub fn candidate_intervals(cluster: &[usize], times: &TimeMatrix) -> Vec<f64> {
    let mut cands = Vec::new();
    for (a, &l) in cluster.iter().enumerate() {
        for &k in &cluster[a + 1..] {
            if let Some(t) = times.get(l, k) {
                cands.push(t);
            }
        }
    }
    cands.sort_by(f64::total_cmp);
    cands.dedup_by(|b, a| (*b - *a).abs() <= CANDIDATE_EPS);
    cands
}

/// Lowest-DISS ordering over every candidate `t_C`.
///
/// Returns `None` when a cluster of two or more nodes has no observed
/// interval at all. Singletons get a trivial order with `diss = 0`.
pub fn best_permutation(cluster: &[usize], times: &TimeMatrix) -> Option<ClusterPermutation> {
    if cluster.len() <= 1 {
        return Some(ClusterPermutation {
            order: cluster.to_vec(),
            diss: 0.0,
            t_c: 0.0,
        });
    }
    let cands = candidate_intervals(cluster, times);
    if cands.is_empty() {
        return None;
    }
    let m = cluster.len();
    let mut weights = Array2::zeros((m, m));
    let mut best: Option<ClusterPermutation> = None;
    for &t_c in &cands {
        for a in 0..m {
            for b in (a + 1)..m {
                let w = match times.get(cluster[a], cluster[b]) {
                    Some(t) => (t - t_c).abs(),
                    None => ABSENT_PENALTY,
                };
                weights[(a, b)] = w;
                weights[(b, a)] = w;
            }
        }
        let path = path_tsp_heuristic(&weights);
        let cost: f64 = path.windows(2).map(|w| weights[(w[0], w[1])]).sum();
        if best.as_ref().is_none_or(|b| cost < b.diss) {
            best = Some(ClusterPermutation {
                order: path.iter().map(|&i| cluster[i]).collect(),
                diss: cost,
                t_c,
            });
        }
    }
    best
}

/// Hamiltonian path over a complete symmetric weight matrix.
///
/// Minimum spanning tree, greedy minimum-weight matching of its odd-degree
/// vertices, Eulerian circuit of the union, shortcut to a Hamiltonian cycle,
/// and finally removal of the heaviest cycle edge.
pub fn path_tsp_heuristic(weights: &Array2<f64>) -> Vec<usize> {
    let n = weights.nrows();
    if n <= 2 {
        return (0..n).collect();
    }

    let mut multi: Vec<(usize, usize)> = minimum_spanning_tree(weights);
    let mut degree = vec![0usize; n];
    for &(a, b) in &multi {
        degree[a] += 1;
        degree[b] += 1;
    }
    let odd: Vec<usize> = (0..n).filter(|&v| degree[v] % 2 == 1).collect();
    multi.extend(greedy_matching(weights, &odd));

    let circuit = euler_circuit(n, &multi, 0);
    let mut seen = vec![false; n];
    let mut cycle = Vec::with_capacity(n);
    for v in circuit {
        if !seen[v] {
            seen[v] = true;
            cycle.push(v);
        }
    }

    // Drop the heaviest closing edge; earliest wins ties.
    let mut cut = 0;
    let mut heaviest = f64::NEG_INFINITY;
    for k in 0..n {
        let w = weights[(cycle[k], cycle[(k + 1) % n])];
        if w > heaviest {
            heaviest = w;
            cut = k;
        }
    }
    let mut path = Vec::with_capacity(n);
    path.extend_from_slice(&cycle[cut + 1..]);
    path.extend_from_slice(&cycle[..=cut]);
    path
}

/// Prim's algorithm on a dense matrix; ties go to the lowest index.
fn minimum_spanning_tree(weights: &Array2<f64>) -> Vec<(usize, usize)> {
    let n = weights.nrows();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    best[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("at least one vertex left");
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((parent[u], u));
        }
        for v in 0..n {
            if !in_tree[v] && weights[(u, v)] < best[v] {
                best[v] = weights[(u, v)];
                parent[v] = u;
            }
        }
    }
    edges
}

/// Pairs up `vertices` by repeatedly taking the lightest remaining pair.
fn greedy_matching(weights: &Array2<f64>, vertices: &[usize]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(vertices.len() * vertices.len() / 2);
    for (a, &u) in vertices.iter().enumerate() {
        for &v in &vertices[a + 1..] {
            pairs.push((weights[(u, v)], u, v));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let n = weights.nrows();
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(vertices.len() / 2);
    for (_, u, v) in pairs {
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            out.push((u, v));
        }
    }
    out
}

/// Hierholzer's algorithm on a connected multigraph with all degrees even.
fn euler_circuit(n: usize, edges: &[(usize, usize)], start: usize) -> Vec<usize> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (id, &(a, b)) in edges.iter().enumerate() {
        incident[a].push(id);
        incident[b].push(id);
    }
    let mut used = vec![false; edges.len()];
    let mut next = vec![0usize; n];
    let mut stack = vec![start];
    let mut circuit = Vec::with_capacity(edges.len() + 1);
    while let Some(&v) = stack.last() {
        while next[v] < incident[v].len() && used[incident[v][next[v]]] {
            next[v] += 1;
        }
        if next[v] == incident[v].len() {
            circuit.push(v);
            stack.pop();
        } else {
            let id = incident[v][next[v]];
            used[id] = true;
            let (a, b) = edges[id];
            stack.push(if a == v { b } else { a });
        }
    }
    circuit.reverse();
    circuit
}
