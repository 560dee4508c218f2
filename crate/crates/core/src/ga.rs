//! Multi-population genetic search over node partitions.
//!
//! One population per threshold `λ` evolves against that subgraph's
//! similarity context. Each generation applies similarity-guided local
//! search to the fittest members, keeps the top half as parents, refills the
//! bottom half with single-point crossover children, and mutates the
//! children. Parents survive unmutated, so the generation best is never lost.
//! The best member of each population is then rescored on the lowest
//! threshold's context and the overall winner returned.

use std::collections::HashSet;
use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ProbabilisticGraph, WeightedGraph, THRESHOLDS};
use crate::ingest::TimeMatrix;
use crate::objectives::{Evaluator, ObjectiveConfig, Objectives, SceCache};
use crate::similarity::{SimilarityContext, WalkConfig};

/// Edge probability above which pKwikCluster joins a neighbor to its pivot.
pub const PKWIK_CUTOFF: f64 = 0.5;

/// A partition encoded as one cluster label per node, labels renumbered in
/// order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chromosome {
    labels: Vec<usize>,
}

impl Chromosome {
    /// Canonicalizes arbitrary labels.
    pub fn new(labels: Vec<usize>) -> Self {
        Chromosome {
            labels: canonicalize(&labels),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Chromosome {
            labels: (0..n).collect(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

/// Renumbers labels `0, 1, 2, ...` in order of first occurrence.
pub fn canonicalize(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Randomized pivot clustering: visit nodes in random order and group each
/// unassigned pivot with its unassigned neighbors of weight above 0.5.
pub fn pkwik_cluster(g: &WeightedGraph, rng: &mut impl Rng) -> Chromosome {
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.shuffle(rng);
    pkwik_with_order(g, &order)
}

/// pKwikCluster with the pivots visited in the given order.
pub fn pkwik_with_order(g: &WeightedGraph, order: &[usize]) -> Chromosome {
    let n = g.node_count();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for &pivot in order {
        if labels[pivot] != usize::MAX {
            continue;
        }
        labels[pivot] = next;
        for &(v, w) in g.neighbors(pivot) {
            if w > PKWIK_CUTOFF && labels[v] == usize::MAX {
                labels[v] = next;
            }
        }
        next += 1;
    }
    Chromosome::new(labels)
}

/// Uniform random labels over `k` clusters, `k` drawn from `[2, 2√n]`.
pub fn random_chromosome(n: usize, rng: &mut impl Rng) -> Chromosome {
    if n < 2 {
        return Chromosome::singletons(n);
    }
    let hi = ((2.0 * (n as f64).sqrt()).floor() as usize).clamp(2, n);
    let k = rng.gen_range(2..=hi);
    Chromosome::new((0..n).map(|_| rng.gen_range(0..k)).collect())
}

/// First half from pKwikCluster runs, the rest random.
pub fn init_population(g: &WeightedGraph, pop_size: usize, rng: &mut impl Rng) -> Vec<Chromosome> {
    let pkwik = pop_size / 2;
    let mut members: Vec<Chromosome> = (0..pkwik).map(|_| pkwik_cluster(g, rng)).collect();
    members.extend((pkwik..pop_size).map(|_| random_chromosome(g.node_count(), rng)));
    members
}

/// Moves every node to the cluster with the largest summed similarity to
/// its other members, all nodes judged against the partition as it stood
/// before the pass. A node with no positive similarity to any cluster keeps
/// its label; ties go to the lowest label.
pub fn local_search(x: &Chromosome, sim: &Array2<f64>) -> Chromosome {
    let k = x.n_clusters();
    let labels = x.labels();
    let mut out = labels.to_vec();
    let mut score = vec![0.0; k];
    for (j, slot) in out.iter_mut().enumerate() {
        score.iter_mut().for_each(|s| *s = 0.0);
        for (l, &c) in labels.iter().enumerate() {
            if l != j {
                score[c] += sim[(j, l)];
            }
        }
        let mut best = labels[j];
        let mut best_score = 0.0;
        for (c, &s) in score.iter().enumerate() {
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        *slot = best;
    }
    Chromosome::new(out)
}

/// Repeats [`local_search`] until the partition stops changing or
/// `max_passes` passes have run.
pub fn local_search_repeated(x: &Chromosome, sim: &Array2<f64>, max_passes: usize) -> Chromosome {
    let mut current = x.clone();
    for _ in 0..max_passes {
        let next = local_search(&current, sim);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Indices of the top half by fitness, stable on ties.
pub fn select(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    idx.truncate(fitness.len().div_ceil(2));
    idx
}

/// Swaps the suffixes of two label vectors at `point`; no canonicalization.
pub fn crossover_at(xa: &[usize], xb: &[usize], point: usize) -> (Vec<usize>, Vec<usize>) {
    let mut a = xa[..point].to_vec();
    a.extend_from_slice(&xb[point..]);
    let mut b = xb[..point].to_vec();
    b.extend_from_slice(&xa[point..]);
    (a, b)
}

/// Single-point crossover at a point drawn from `[1, n-1]`.
pub fn crossover(xa: &Chromosome, xb: &Chromosome, rng: &mut impl Rng) -> (Chromosome, Chromosome) {
    let n = xa.len();
    if n < 2 {
        return (xa.clone(), xb.clone());
    }
    let (a, b) = crossover_at(xa.labels(), xb.labels(), rng.gen_range(1..n));
    (Chromosome::new(a), Chromosome::new(b))
}

/// With probability `percent / 100`, sets one random gene to a different
/// value from the existing labels or one past the largest. Returns the
/// mutated gene.
pub fn mutate_labels(labels: &mut [usize], percent: f64, rng: &mut impl Rng) -> Option<usize> {
    if labels.is_empty() || rng.gen_range(0.0..100.0) >= percent {
        return None;
    }
    let gene = rng.gen_range(0..labels.len());
    let old = labels[gene];
    let max = *labels.iter().max().expect("non-empty");
    let mut values: Vec<usize> = labels
        .iter()
        .copied()
        .chain(std::iter::once(max + 1))
        .filter(|&v| v != old)
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    values.sort_unstable();
    labels[gene] = values[rng.gen_range(0..values.len())];
    Some(gene)
}

pub fn mutate(x: &Chromosome, percent: f64, rng: &mut impl Rng) -> Chromosome {
    let mut labels = x.labels().to_vec();
    match mutate_labels(&mut labels, percent, rng) {
        Some(_) => Chromosome::new(labels),
        None => x.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GAConfig {
    pub pop_size: usize,
    pub generations: usize,
    /// Chance in percent that a child is mutated.
    pub mutation_prob: f64,
    pub local_search_fraction: f64,
    /// Upper bound on repeated local-search passes per member.
    pub local_search_passes: usize,
    pub rng_seed: u64,
    pub walk: WalkConfig,
    pub objective: ObjectiveConfig,
    /// Stop a population after this many generations without improvement.
    pub stagnation_limit: Option<usize>,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig {
            pop_size: 50,
            generations: 100,
            mutation_prob: 10.0,
            local_search_fraction: 0.2,
            local_search_passes: 5,
            rng_seed: 0,
            walk: WalkConfig::default(),
            objective: ObjectiveConfig::default(),
            stagnation_limit: None,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 || self.pop_size % 2 != 0 {
            return Err(Error::Config(format!("pop_size must be even and >= 2, got {}", self.pop_size)));
        }
        if self.generations == 0 {
            return Err(Error::Config("generations must be >= 1".into()));
        }
        if !(0.0..=100.0).contains(&self.mutation_prob) {
            return Err(Error::Config(format!("mutation_prob must be in [0, 100], got {}", self.mutation_prob)));
        }
        if !(0.0..=1.0).contains(&self.local_search_fraction) {
            return Err(Error::Config(format!(
                "local_search_fraction must be in [0, 1], got {}",
                self.local_search_fraction
            )));
        }
        let w1 = self.objective.weights.w1;
        if !(0.0..=1.0).contains(&w1) {
            return Err(Error::Config(format!("w1 must be in [0, 1], got {w1}")));
        }
        if self.walk.order % 2 != 0 {
            return Err(Error::OddWalkOrder(self.walk.order));
        }
        Ok(())
    }
}

/// RNG stream for one `(population, generation)` cell of a seeded run.
pub fn stream(seed: u64, population: usize, generation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((population as u64) << 32) | generation as u64);
    rng
}

/// One row of the fitness trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub population: usize,
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_sce: f64,
    pub best_dist: f64,
    pub n_clusters: usize,
}

pub fn write_trace_csv<W: Write>(writer: W, trace: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Final state of one population.
#[derive(Debug, Clone)]
pub struct PopulationOutcome {
    pub lambda: f64,
    pub best: Chromosome,
    /// Best fitness in the population's own context.
    pub fitness: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub best: Chromosome,
    /// Objectives and fitness of `best` on the reference context.
    pub objectives: Objectives,
    pub fitness: f64,
    /// Index into [`THRESHOLDS`] of the population that produced `best`.
    pub population: usize,
    pub populations: Vec<PopulationOutcome>,
}

impl GaResult {
    pub fn trace(&self) -> Vec<TraceRow> {
        self.populations.iter().flat_map(|p| p.trace.iter().copied()).collect()
    }
}

struct Scored {
    member: Chromosome,
    objectives: Objectives,
}

fn score_all(members: Vec<Chromosome>, eval: &Evaluator, dissim: &Array2<f64>) -> Vec<Scored> {
    members
        .into_par_iter()
        .map(|member| {
            let objectives = eval.objectives(member.labels(), dissim);
            Scored { member, objectives }
        })
        .collect()
}

fn fitness_of(eval: &Evaluator, pop: &[Scored]) -> Vec<f64> {
    let objs: Vec<Objectives> = pop.iter().map(|s| s.objectives).collect();
    eval.fitness(&objs)
}

fn trace_row(population: usize, generation: usize, pop: &[Scored], fitness: &[f64]) -> TraceRow {
    let best = select(fitness)[0];
    TraceRow {
        population,
        generation,
        best_fitness: fitness[best],
        mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
        best_sce: pop[best].objectives.sce,
        best_dist: pop[best].objectives.dist,
        n_clusters: pop[best].objectives.n_clusters,
    }
}

fn evolve_population(
    index: usize,
    g: &WeightedGraph,
    ctx: &SimilarityContext,
    eval: &Evaluator,
    cfg: &GAConfig,
) -> PopulationOutcome {
    let mut rng = stream(cfg.rng_seed, index, 0);
    let initial = init_population(g, cfg.pop_size, &mut rng);
    let mut pop = score_all(initial, eval, &ctx.dissim);
    let mut fitness = fitness_of(eval, &pop);
    let mut trace = vec![trace_row(index, 0, &pop, &fitness)];
    let mut stagnant = 0;

    for generation in 1..cfg.generations {
        let mut rng = stream(cfg.rng_seed, index, generation);

        let n_local = (cfg.local_search_fraction * cfg.pop_size as f64).round() as usize;
        if n_local > 0 {
            let mut ranked: Vec<usize> = (0..pop.len()).collect();
            ranked.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
            let targets = &ranked[..n_local.min(ranked.len())];
            let moved: Vec<Chromosome> = targets
                .iter()
                .map(|&i| local_search_repeated(&pop[i].member, &ctx.sim.sim, cfg.local_search_passes))
                .collect();
            let moved = score_all(moved, eval, &ctx.dissim);
            // Score candidates alongside the incumbents so a population-wide
            // normalization sees both.
            let mut trial: Vec<Objectives> = pop.iter().map(|s| s.objectives).collect();
            trial.extend(moved.iter().map(|s| s.objectives));
            let trial_fit = eval.fitness(&trial);
            for (k, candidate) in moved.into_iter().enumerate() {
                let i = targets[k];
                if trial_fit[pop.len() + k] >= trial_fit[i] {
                    pop[i] = candidate;
                }
            }
            fitness = fitness_of(eval, &pop);
        }

        let parents = select(&fitness);
        let n_children = cfg.pop_size - parents.len();
        let mut children = Vec::with_capacity(n_children);
        while children.len() < n_children {
            let a = parents[rng.gen_range(0..parents.len())];
            let b = parents[rng.gen_range(0..parents.len())];
            let (c1, c2) = crossover(&pop[a].member, &pop[b].member, &mut rng);
            for c in [c1, c2] {
                if children.len() < n_children {
                    children.push(mutate(&c, cfg.mutation_prob, &mut rng));
                }
            }
        }

        let previous_best = trace.last().expect("trace").best_fitness;
        let mut next: Vec<Scored> = Vec::with_capacity(cfg.pop_size);
        let mut slots: Vec<Option<Scored>> = pop.into_iter().map(Some).collect();
        for &p in &parents {
            next.push(slots[p].take().expect("parent selected once"));
        }
        next.extend(score_all(children, eval, &ctx.dissim));
        pop = next;
        fitness = fitness_of(eval, &pop);
        let row = trace_row(index, generation, &pop, &fitness);
        stagnant = if row.best_fitness > previous_best { 0 } else { stagnant + 1 };
        trace.push(row);
        if cfg.stagnation_limit.is_some_and(|limit| stagnant >= limit) {
            break;
        }
    }

    let best = select(&fitness)[0];
    PopulationOutcome {
        lambda: g.lambda(),
        fitness: fitness[best],
        best: pop.swap_remove(best).member,
        trace,
    }
}

/// Runs one population per threshold and returns the best chromosome by
/// fitness on the lowest threshold's context.
pub fn evolve(g: &ProbabilisticGraph, times: &TimeMatrix, cfg: &GAConfig) -> Result<GaResult> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Config("graph has no nodes".into()));
    }
    if times.len() != n {
        return Err(Error::Mismatch(format!(
            "graph has {n} nodes but the time matrix has {}",
            times.len()
        )));
    }
    let subgraphs = g.threshold_family();
    let contexts = subgraphs
        .iter()
        .map(|sg| SimilarityContext::build(sg, &cfg.walk))
        .collect::<Result<Vec<_>>>()?;
    let cache = SceCache::new(cfg.objective.sce_mode);
    let eval = Evaluator::new(times, &cache, cfg.objective);

    if subgraphs.iter().all(|sg| sg.edge_count() == 0) {
        log::warn!("every thresholded subgraph is edgeless; returning singletons");
        let best = Chromosome::singletons(n);
        let objectives = eval.objectives(best.labels(), &contexts[0].dissim);
        let fitness = eval.fitness(&[objectives])[0];
        return Ok(GaResult {
            best,
            objectives,
            fitness,
            population: 0,
            populations: Vec::new(),
        });
    }

    let populations: Vec<PopulationOutcome> = subgraphs
        .par_iter()
        .zip(contexts.par_iter())
        .enumerate()
        .map(|(i, (sg, ctx))| evolve_population(i, sg, ctx, &eval, cfg))
        .collect();

    let reference = &contexts[0].dissim;
    let objs: Vec<Objectives> = populations
        .iter()
        .map(|p| eval.objectives(p.best.labels(), reference))
        .collect();
    let fit = eval.fitness(&objs);
    let winner = select(&fit)[0];
    log::debug!(
        "best population lambda={} fitness={:.6} clusters={}",
        THRESHOLDS[winner],
        fit[winner],
        objs[winner].n_clusters
    );
    Ok(GaResult {
        best: populations[winner].best.clone(),
        objectives: objs[winner],
        fitness: fit[winner],
        population: winner,
        populations,
    })
}

/// Population slot reserved for the baseline's RNG stream.
const BASELINE_STREAM: usize = 0xffff;

/// One pKwikCluster run over the full probabilistic graph.
pub fn pkwik_baseline(g: &ProbabilisticGraph, seed: u64) -> Chromosome {
    pkwik_cluster(&g.apply_threshold(0.0), &mut stream(seed, BASELINE_STREAM, 0))
}
