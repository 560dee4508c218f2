//! Higher-order random-walk similarity between nodes.
//!
//! With a row-stochastic transition matrix `Ω`, the order-`t` similarity is
//! defined recursively as `sim^t = Ω · sim^(t-2) · Ωᵀ` starting from
//! `sim^0 = I`, so `sim^t(i, j)` is the probability that two independent
//! `t/2`-step walks from `i` and from `j` end on the same node.
//!
//! Road graphs are paths, which are bipartite: without self-transitions two
//! adjacent lights can never be at the same node after the same number of
//! steps, so their similarity is zero at every order. A self-loop weight
//! (lazy walk) removes that parity artefact and is on by default.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Row-stochastic transition probabilities; rows of isolated nodes are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(pub Array2<f64>);

impl TransitionMatrix {
    /// `ω_ij = w_ij / Σ_k w_ik` over the graph's edges.
    pub fn from_graph(g: &WeightedGraph) -> Self {
        Self::with_self_loops(g, 0.0)
    }

    /// As [`from_graph`](Self::from_graph) but every node also carries a
    /// self-transition of weight `self_loop` before row normalization.
    pub fn with_self_loops(g: &WeightedGraph, self_loop: f64) -> Self {
        let n = g.node_count();
        let mut omega = Array2::zeros((n, n));
        for u in 0..n {
            let nbrs = g.neighbors(u);
            let total: f64 = nbrs.iter().map(|&(_, w)| w).sum::<f64>() + self_loop;
            if total <= 0.0 {
                continue;
            }
            for &(v, w) in nbrs {
                omega[(u, v)] = w / total;
            }
            if self_loop > 0.0 {
                omega[(u, u)] = self_loop / total;
            }
        }
        TransitionMatrix(omega)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// Symmetric order-`t` random-walk similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub sim: Array2<f64>,
    pub order: usize,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.sim.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.sim.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sim[(i, j)]
    }

    /// Cosine normalization `sim_ij / sqrt(sim_ii · sim_jj)`. `sim^t` is a
    /// Gram matrix, so the result lies in `[0, 1]` with a unit diagonal on
    /// every node that has any walk mass.
    pub fn normalized(&self) -> Array2<f64> {
        let n = self.len();
        let diag: Vec<f64> = (0..n).map(|i| self.sim[(i, i)].sqrt()).collect();
        Array2::from_shape_fn((n, n), |(i, j)| {
            let denom = diag[i] * diag[j];
            if denom > 0.0 {
                (self.sim[(i, j)] / denom).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
    }
}

/// Computes `sim^t` for even `t` (identity at `t = 0`).
pub fn random_walk_similarity(omega: &TransitionMatrix, order: usize) -> Result<SimilarityMatrix> {
    if order % 2 != 0 {
        return Err(Error::OddWalkOrder(order));
    }
    let n = omega.len();
    let mut sim = Array2::eye(n);
    for _ in 0..order / 2 {
        sim = omega.0.dot(&sim).dot(&omega.0.t());
    }
    // Floating-point products drift from exact symmetry by a few ulps.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (sim[(i, j)] + sim[(j, i)]);
            sim[(i, j)] = m;
            sim[(j, i)] = m;
        }
    }
    Ok(SimilarityMatrix { sim, order })
}

/// How similarities are mapped onto a `[0, 1]` dissimilarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DissimilarityScale {
    /// `1 - sim_ij / max(sim)`.
    GlobalMax,
    /// `1 - sim_ij / sqrt(sim_ii · sim_jj)`.
    #[default]
    Cosine,
}

/// Dissimilarity matrix with zero diagonal and entries in `[0, 1]`.
pub fn dissimilarity(sim: &SimilarityMatrix, scale: DissimilarityScale) -> Array2<f64> {
    let n = sim.len();
    let mut d = match scale {
        DissimilarityScale::GlobalMax => {
            let max = sim.sim.iter().copied().fold(0.0_f64, f64::max);
            if max > 0.0 {
                sim.sim.mapv(|s| (1.0 - s / max).clamp(0.0, 1.0))
            } else {
                Array2::ones((n, n))
            }
        }
        DissimilarityScale::Cosine => sim.normalized().mapv(|s| 1.0 - s),
    };
    for i in 0..n {
        d[(i, i)] = 0.0;
    }
    d
}

/// Walk parameters shared by every population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Even walk order `t`.
    pub order: usize,
    /// Self-transition weight added to each node before normalization.
    pub self_loop: f64,
    pub scale: DissimilarityScale,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            order: 4,
            self_loop: 1.0,
            scale: DissimilarityScale::Cosine,
        }
    }
}

/// Similarity and dissimilarity of one thresholded subgraph.
#[derive(Debug, Clone)]
pub struct SimilarityContext {
    pub sim: SimilarityMatrix,
    pub dissim: Array2<f64>,
}

impl SimilarityContext {
    pub fn build(g: &WeightedGraph, walk: &WalkConfig) -> Result<Self> {
        let omega = TransitionMatrix::with_self_loops(g, walk.self_loop);
        let sim = random_walk_similarity(&omega, walk.order)?;
        let dissim = dissimilarity(&sim, walk.scale);
        Ok(SimilarityContext { sim, dissim })
    }
}
