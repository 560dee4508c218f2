//! Clustering objectives: speed consistency (SCE), the inter/intra distance
//! balance (DIST), the silhouette-style DISIM, and their weighted fitness.
//!
//! SC scores one cluster by the coefficient of variation of the intervals
//! along its best road ordering: `SC = 1 - tanh(σ/μ)`. SCE is the mean SC
//! over the clusters of a chromosome.
//!
//! DIST is `Σ_j [w · D_inter(C_j) - D_intra(C_j)]` where the linkage used
//! for `D_inter` and `D_intra` and the way the per-cluster terms are
//! aggregated are selected by [`DistFormula`]. The default formula measures
//! separation against the nearest other cluster, compactness as the mean
//! nearest-neighbour dissimilarity, and weights each cluster's term by its
//! share of the nodes. With mean linkage to all non-members summed over
//! clusters, an all-singleton partition outscores any road-shaped cluster,
//! because a singleton has no intra distance and is far from almost
//! everything.

use std::collections::HashMap;
use std::sync::RwLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ingest::TimeMatrix;
use crate::permutation::{adjacent_intervals, best_permutation};

/// SC given to clusters that cannot be scored (singletons, or no interval
/// observed between any two members).
pub const NEUTRAL_SC: f64 = 0.5;

/// Groups node indices by label, clusters ordered by first occurrence.
pub fn clusters_of(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (node, &label) in labels.iter().enumerate() {
        let k = *slot.entry(label).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[k].push(node);
    }
    out
}

/// Denominator used for the interval mean and deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceMode {
    /// Divide by the number of adjacent intervals (`n_C - 1`).
    #[default]
    IntervalCount,
    /// Divide by the number of nodes in the cluster (`n_C`).
    PaperLiteral,
}

/// Speed-consistency score of a single cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub sc: f64,
    /// Mean interval along the best ordering, seconds.
    pub mu: f64,
    /// Interval standard deviation, seconds.
    pub sigma: f64,
    /// Adjacent pairs along the ordering that have an observed interval.
    pub observed: usize,
    /// Adjacent pairs along the ordering (`n_C - 1`).
    pub adjacent: usize,
}

impl ClusterScore {
    fn neutral(adjacent: usize) -> Self {
        ClusterScore {
            sc: NEUTRAL_SC,
            mu: 0.0,
            sigma: 0.0,
            observed: 0,
            adjacent,
        }
    }
}

/// SC of `cluster` along its best ordering.
///
/// Only observed intervals enter `μ` and `σ`. If the ordering has to jump
/// between nodes that never exchanged a record, the score is scaled by the
/// fraction of adjacent pairs that were observed.
pub fn sc(cluster: &[usize], times: &TimeMatrix, mode: SceMode) -> ClusterScore {
    let adjacent = cluster.len().saturating_sub(1);
    if cluster.len() <= 1 {
        return ClusterScore::neutral(adjacent);
    }
    let Some(perm) = best_permutation(cluster, times) else {
        return ClusterScore::neutral(adjacent);
    };
    let observed: Vec<f64> = adjacent_intervals(&perm.order, times)
        .into_iter()
        .flatten()
        .collect();
    if observed.is_empty() {
        return ClusterScore::neutral(adjacent);
    }
    let denom = match mode {
        SceMode::IntervalCount => observed.len() as f64,
        SceMode::PaperLiteral => cluster.len() as f64,
    };
    let mu = observed.iter().sum::<f64>() / denom;
    let sigma = (observed.iter().map(|t| (t - mu).powi(2)).sum::<f64>() / denom).sqrt();
    let cv = if sigma == 0.0 { 0.0 } else { sigma / mu };
    let coverage = observed.len() as f64 / adjacent as f64;
    ClusterScore {
        sc: (1.0 - cv.tanh()) * coverage,
        mu,
        sigma,
        observed: observed.len(),
        adjacent,
    }
}

/// Memo of cluster scores keyed by the sorted member list.
#[derive(Debug, Default)]
pub struct SceCache {
    mode: SceMode,
    scores: RwLock<HashMap<Vec<usize>, ClusterScore>>,
}

impl SceCache {
    pub fn new(mode: SceMode) -> Self {
        SceCache {
            mode,
            scores: RwLock::new(HashMap::new()),
        }
    }

    pub fn mode(&self) -> SceMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.scores.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `cluster` must be sorted ascending.
    pub fn score(&self, cluster: &[usize], times: &TimeMatrix) -> ClusterScore {
        if let Some(s) = self.scores.read().expect("cache lock").get(cluster) {
            return *s;
        }
        let s = sc(cluster, times, self.mode);
        self.scores
            .write()
            .expect("cache lock")
            .insert(cluster.to_vec(), s);
        s
    }
}

/// Mean SC over the clusters induced by `labels`.
pub fn sce(labels: &[usize], times: &TimeMatrix, mode: SceMode) -> f64 {
    let clusters = clusters_of(labels);
    if clusters.is_empty() {
        return 0.0;
    }
    clusters.iter().map(|c| sc(c, times, mode).sc).sum::<f64>() / clusters.len() as f64
}

/// [`sce`] through a cache.
pub fn sce_cached(labels: &[usize], times: &TimeMatrix, cache: &SceCache) -> f64 {
    let clusters = clusters_of(labels);
    if clusters.is_empty() {
        return 0.0;
    }
    // clusters_of yields members in ascending node order already.
    clusters.iter().map(|c| cache.score(c, times).sc).sum::<f64>() / clusters.len() as f64
}

/// Inter-cluster distance `D_inter(C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Separation {
    /// Mean dissimilarity between members of `C` and every non-member.
    AllNonMembers,
    /// Mean dissimilarity between `C` and its closest other cluster.
    NearestCluster,
    /// Mean over members of the dissimilarity to the closest non-member;
    /// the maximum of 1 when every node is in `C`.
    NearestOutsider,
}

/// Intra-cluster distance `D_intra(C)`; zero for singletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compactness {
    /// Mean dissimilarity over all member pairs.
    MeanPairwise,
    /// Mean over members of the dissimilarity to their closest co-member.
    NearestNeighbour,
}

/// How per-cluster terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Plain sum over clusters.
    Sum,
    /// Sum weighted by `|C| / |V|`; bounded to `[-1, w]`.
    SizeWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistFormula {
    pub separation: Separation,
    pub compactness: Compactness,
    pub aggregation: Aggregation,
}

impl DistFormula {
    /// Mean linkage to all non-members, mean pairwise compactness, summed.
    pub const MEAN_LINKAGE_SUM: DistFormula = DistFormula {
        separation: Separation::AllNonMembers,
        compactness: Compactness::MeanPairwise,
        aggregation: Aggregation::Sum,
    };

    /// Bounds of DIST for `n` nodes and separation weight `w`.
    pub fn range(&self, n: usize, w: f64) -> (f64, f64) {
        match self.aggregation {
            Aggregation::SizeWeighted => (-1.0, w),
            Aggregation::Sum => (-(n as f64), n as f64 * w),
        }
    }
}

impl Default for DistFormula {
    fn default() -> Self {
        DistFormula {
            separation: Separation::NearestOutsider,
            compactness: Compactness::NearestNeighbour,
            aggregation: Aggregation::SizeWeighted,
        }
    }
}

fn mean_block(d: &Array2<f64>, a: &[usize], b: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in a {
        for &j in b {
            total += d[(i, j)];
        }
    }
    total / (a.len() * b.len()) as f64
}

/// `D_intra(C)` under the given compactness.
pub fn intra_distance(d: &Array2<f64>, cluster: &[usize], how: Compactness) -> f64 {
    let m = cluster.len();
    if m <= 1 {
        return 0.0;
    }
    match how {
        Compactness::MeanPairwise => {
            let mut total = 0.0;
            for (a, &i) in cluster.iter().enumerate() {
                for &j in &cluster[a + 1..] {
                    total += d[(i, j)];
                }
            }
            total / (m * (m - 1) / 2) as f64
        }
        Compactness::NearestNeighbour => {
            let total: f64 = cluster
                .iter()
                .map(|&i| {
                    cluster
                        .iter()
                        .filter(|&&j| j != i)
                        .map(|&j| d[(i, j)])
                        .fold(f64::INFINITY, f64::min)
                })
                .sum();
            total / m as f64
        }
    }
}

/// `D_inter(C_k)` under the given separation. With a single cluster it is
/// zero for the linkage variants and one for the outsider variant.
pub fn inter_distance(d: &Array2<f64>, clusters: &[Vec<usize>], k: usize, how: Separation) -> f64 {
    if clusters.len() <= 1 {
        return if how == Separation::NearestOutsider { 1.0 } else { 0.0 };
    }
    match how {
        Separation::NearestOutsider => {
            let members = &clusters[k];
            let total: f64 = members
                .iter()
                .map(|&i| {
                    clusters
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != k)
                        .flat_map(|(_, c)| c.iter())
                        .map(|&j| d[(i, j)])
                        .fold(f64::INFINITY, f64::min)
                })
                .sum();
            total / members.len() as f64
        }
        Separation::AllNonMembers => {
            let others: Vec<usize> = clusters
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, c)| c.iter().copied())
                .collect();
            mean_block(d, &clusters[k], &others)
        }
        Separation::NearestCluster => clusters
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, c)| mean_block(d, &clusters[k], c))
            .fold(f64::INFINITY, f64::min),
    }
}

/// DIST of the partition given by `labels`.
pub fn dist(labels: &[usize], d: &Array2<f64>, w: f64, formula: DistFormula) -> f64 {
    let clusters = clusters_of(labels);
    let n = labels.len().max(1) as f64;
    clusters
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let term = w * inter_distance(d, &clusters, k, formula.separation)
                - intra_distance(d, c, formula.compactness);
            match formula.aggregation {
                Aggregation::Sum => term,
                Aggregation::SizeWeighted => term * c.len() as f64 / n,
            }
        })
        .sum()
}

/// Mean silhouette-style score over nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisimScore {
    pub value: f64,
    /// Set when there is a single cluster and the score is undefined.
    pub degenerate: bool,
}

/// `(b - a) / max(a, b)` per node, averaged. `a` is the mean dissimilarity
/// to the node's own cluster, `b` the mean dissimilarity to the nearest
/// other cluster. Members of singleton clusters score 0.
pub fn disim(labels: &[usize], d: &Array2<f64>) -> DisimScore {
    let clusters = clusters_of(labels);
    if clusters.len() < 2 {
        return DisimScore {
            value: 0.0,
            degenerate: true,
        };
    }
    let mut owner = vec![0usize; labels.len()];
    for (k, c) in clusters.iter().enumerate() {
        for &i in c {
            owner[i] = k;
        }
    }
    let mut total = 0.0;
    for i in 0..labels.len() {
        let own = &clusters[owner[i]];
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| d[(i, j)]).sum::<f64>()
            / (own.len() - 1) as f64;
        let b = clusters
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != owner[i])
            .map(|(_, c)| c.iter().map(|&j| d[(i, j)]).sum::<f64>() / c.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    DisimScore {
        value: total / labels.len() as f64,
        degenerate: false,
    }
}

/// Weights of the scalarized fitness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    /// Weight on normalized DIST; SCE gets `1 - w1`.
    pub w1: f64,
    /// Separation weight `w` inside DIST.
    pub dist_w: f64,
}

impl FitnessWeights {
    pub fn w2(&self) -> f64 {
        1.0 - self.w1
    }
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights { w1: 0.5, dist_w: 0.5 }
    }
}

/// How raw DIST is mapped onto SCE's `[0, 1]` scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistNormalization {
    /// Min-max over the formula's theoretical range.
    #[default]
    Range,
    /// Min-max over the population being ranked.
    Population,
}

/// Full objective configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub weights: FitnessWeights,
    pub formula: DistFormula,
    pub normalization: DistNormalization,
    pub sce_mode: SceMode,
}

/// Raw objective values of one chromosome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub dist: f64,
    pub sce: f64,
    pub n_clusters: usize,
}

/// Evaluates chromosomes against a time matrix and a dissimilarity context.
pub struct Evaluator<'a> {
    pub times: &'a TimeMatrix,
    pub cache: &'a SceCache,
    pub config: ObjectiveConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(times: &'a TimeMatrix, cache: &'a SceCache, config: ObjectiveConfig) -> Self {
        Evaluator {
            times,
            cache,
            config,
        }
    }

    pub fn objectives(&self, labels: &[usize], dissim: &Array2<f64>) -> Objectives {
        Objectives {
            dist: dist(labels, dissim, self.config.weights.dist_w, self.config.formula),
            sce: sce_cached(labels, self.times, self.cache),
            n_clusters: clusters_of(labels).len(),
        }
    }

    /// DIST mapped to `[0, 1]`-ish scale according to the normalization.
    pub fn normalized_dist(&self, all: &[Objectives]) -> Vec<f64> {
        let raw: Vec<f64> = all.iter().map(|o| o.dist).collect();
        match self.config.normalization {
            DistNormalization::Range => {
                let (lo, hi) = self
                    .config
                    .formula
                    .range(self.times.len(), self.config.weights.dist_w);
                raw.iter().map(|&x| (x - lo) / (hi - lo)).collect()
            }
            DistNormalization::Population => min_max(&raw),
        }
    }

    /// Fitness of every member of a population.
    pub fn fitness(&self, all: &[Objectives]) -> Vec<f64> {
        let w = self.config.weights;
        self.normalized_dist(all)
            .into_iter()
            .zip(all)
            .map(|(d, o)| w.w1 * d + w.w2() * o.sce)
            .collect()
    }
}

/// Min-max scaling; a constant vector maps to all ones.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; values.len()];
    }
    values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}
