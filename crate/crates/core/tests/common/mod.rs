//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the code paths it is used to check: permutations
//! are enumerated exhaustively, random walks are expanded path by path, and
//! ARI is computed from explicit pair counting.

#![allow(dead_code)]

use rand::Rng;
use streetlight_core::ingest::TimeMatrix;

/// Calls `f` on every permutation of `items` (Heap's algorithm).
pub fn for_each_permutation(items: &[usize], mut f: impl FnMut(&[usize])) {
    let mut a = items.to_vec();
    let n = a.len();
    let mut c = vec![0usize; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Sum of `|t(p_i, p_{i+1}) - t_c|` with `penalty` for unobserved pairs.
pub fn path_deviation(order: &[usize], times: &TimeMatrix, t_c: f64, penalty: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..order.len() {
        total += match times.get(order[k - 1], order[k]) {
            Some(t) => (t - t_c).abs(),
            None => penalty,
        };
    }
    total
}

/// Exact minimum of the interval dissimilarity over every reference
/// interval observed in the cluster and every ordering of its nodes.
pub fn exhaustive_min_diss(cluster: &[usize], times: &TimeMatrix, penalty: f64) -> f64 {
    let mut refs = Vec::new();
    for a in 0..cluster.len() {
        for b in (a + 1)..cluster.len() {
            if let Some(t) = times.get(cluster[a], cluster[b]) {
                refs.push(t);
            }
        }
    }
    let mut best = f64::INFINITY;
    for_each_permutation(cluster, |p| {
        for &t_c in &refs {
            best = best.min(path_deviation(p, times, t_c, penalty));
        }
    });
    best
}

/// Exact minimum Hamiltonian path cost over a dense weight matrix.
pub fn exhaustive_min_path(w: &[Vec<f64>]) -> f64 {
    let nodes: Vec<usize> = (0..w.len()).collect();
    let mut best = f64::INFINITY;
    for_each_permutation(&nodes, |p| {
        let cost: f64 = p.windows(2).map(|e| w[e[0]][e[1]]).sum();
        best = best.min(cost);
    });
    best
}

/// Symmetric time matrix over `n` nodes with every pair observed.
pub fn random_complete_times(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> TimeMatrix {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j, rng.gen_range(lo..hi)));
        }
    }
    TimeMatrix::from_pairs(n, &pairs)
}

/// Transition probabilities `w_ij / Σ_k w_ik` (+ optional self weight),
/// written out independently of the library.
pub fn transition_rows(n: usize, edges: &[(usize, usize, f64)], self_loop: f64) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for &(u, v, p) in edges {
        w[u][v] = p;
        w[v][u] = p;
    }
    for (i, row) in w.iter_mut().enumerate() {
        row[i] += self_loop;
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for x in row.iter_mut() {
                *x /= total;
            }
        }
    }
    w
}

/// `sim^t(i, j)` by enumerating every pair of `t/2`-step walks from `i`
/// and `j` that end on the same node, weighting each by its probability.
pub fn walk_enumeration_similarity(omega: &[Vec<f64>], order: usize) -> Vec<Vec<f64>> {
    let n = omega.len();
    let steps = order / 2;
    // End-node distribution of every walk of `steps` steps from each start,
    // built by explicit enumeration of node sequences.
    let mut endpoint = vec![vec![0.0; n]; n];
    for start in 0..n {
        let mut walks: Vec<(usize, f64)> = vec![(start, 1.0)];
        for _ in 0..steps {
            let mut next = Vec::new();
            for &(at, prob) in &walks {
                for (to, &p) in omega[at].iter().enumerate() {
                    if p > 0.0 {
                        next.push((to, prob * p));
                    }
                }
            }
            walks = next;
        }
        for (end, prob) in walks {
            endpoint[start][end] += prob;
        }
    }
    let mut sim = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            sim[i][j] = (0..n).map(|m| endpoint[i][m] * endpoint[j][m]).sum();
        }
    }
    sim
}

/// ARI from explicit counting over all unordered pairs of items.
pub fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let total = both + only_a + only_b + neither;
    let same_a = both + only_a;
    let same_b = both + only_b;
    let expected = same_a * same_b / total;
    let max = 0.5 * (same_a + same_b);
    if (max - expected).abs() < 1e-15 {
        return 1.0;
    }
    (both - expected) / (max - expected)
}
