//! Partition agreement metrics and method comparison on simulated scenarios.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{evolve, pkwik_baseline, Chromosome};
use crate::ingest::ingest;
use crate::pipeline::ClusterConfig;
use crate::simulator::{run_scenario, Scenario};

/// Threshold whose connected components form the floor baseline.
pub const COMPONENTS_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionScore {
    pub ari: f64,
    pub nmi: f64,
    pub purity: f64,
    pub n_clusters_pred: usize,
    pub n_clusters_true: usize,
}

fn contingency(a: &[usize], b: &[usize]) -> BTreeMap<(usize, usize), usize> {
    let mut table = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
    }
    table
}

fn sizes(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

fn choose2(k: usize) -> f64 {
    (k * k.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index. Two partitions that are both trivial in the same
/// way (all singletons or one cluster) score 1.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let index: f64 = contingency(a, b).values().map(|&c| choose2(c)).sum();
    let sa: f64 = sizes(a).values().map(|&c| choose2(c)).sum();
    let sb: f64 = sizes(b).values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n);
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < 1e-12 {
        return if (index - expected).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    sizes(labels)
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the arithmetic mean of the entropies.
pub fn nmi(a: &[usize], b: &[usize]) -> f64 {
    let (ha, hb) = (entropy(a), entropy(b));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    let n = a.len() as f64;
    let (sa, sb) = (sizes(a), sizes(b));
    let mi: f64 = contingency(a, b)
        .iter()
        .map(|(&(x, y), &c)| {
            let c = c as f64;
            c / n * (c * n / (sa[&x] as f64 * sb[&y] as f64)).ln()
        })
        .sum();
    (2.0 * mi / (ha + hb)).clamp(0.0, 1.0)
}

/// Fraction of nodes whose predicted cluster's majority sector is their own.
pub fn purity(pred: &[usize], truth: &[usize]) -> f64 {
    if pred.is_empty() {
        return 1.0;
    }
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(p, _), &c) in &contingency(pred, truth) {
        let e = best.entry(p).or_insert(0);
        *e = (*e).max(c);
    }
    best.values().sum::<usize>() as f64 / pred.len() as f64
}

pub fn score(pred: &Chromosome, truth: &Chromosome) -> Result<PartitionScore> {
    if pred.len() != truth.len() {
        return Err(Error::Mismatch(format!(
            "prediction has {} nodes, ground truth {}",
            pred.len(),
            truth.len()
        )));
    }
    let (p, t) = (pred.labels(), truth.labels());
    Ok(PartitionScore {
        ari: ari(p, t),
        nmi: nmi(p, t),
        purity: purity(p, t),
        n_clusters_pred: pred.n_clusters(),
        n_clusters_true: truth.n_clusters(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The multi-population GA.
    Proposed,
    /// One pKwikCluster pass over the probabilistic graph.
    Pkwik,
    /// Connected components of the `λ = 0.5` subgraph.
    ThresholdComponents,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::Pkwik, Method::ThresholdComponents];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Pkwik => "pkwik",
            Method::ThresholdComponents => "threshold-components",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub method: Method,
    pub seed: u64,
    pub ari: f64,
    pub nmi: f64,
    pub purity: f64,
    pub n_clusters: usize,
}

/// Per-method mean and standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64>) -> Summary {
        let v: Vec<f64> = values.collect();
        let n = v.len().max(1) as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    }

    /// `[ari, nmi, purity, n_clusters]` summaries for one method.
    pub fn summary(&self, method: Method) -> [Summary; 4] {
        let rows = || self.rows.iter().filter(move |r| r.method == method);
        [
            Summary::of(rows().map(|r| r.ari)),
            Summary::of(rows().map(|r| r.nmi)),
            Summary::of(rows().map(|r| r.purity)),
            Summary::of(rows().map(|r| r.n_clusters as f64)),
        ]
    }

    pub fn mean_ari(&self, method: Method) -> f64 {
        self.summary(method)[0].mean
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable table of means and standard deviations.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:>15} {:>15} {:>15} {:>13}",
            "method", "ari", "nmi", "purity", "clusters"
        );
        for m in self.methods() {
            let s = self.summary(m);
            let cell = |x: Summary| format!("{:.3} ± {:.3}", x.mean, x.std);
            let _ = writeln!(
                out,
                "{:<22} {:>15} {:>15} {:>15} {:>13}",
                m.name(),
                cell(s[0]),
                cell(s[1]),
                cell(s[2]),
                format!("{:.1} ± {:.1}", s[3].mean, s[3].std)
            );
        }
        out
    }
}

/// Simulates `scenario` once per seed and scores every method on it. The
/// seed drives both the simulation and every clustering method.
pub fn compare(scenario: &Scenario, methods: &[Method], seeds: &[u64], cfg: &ClusterConfig) -> Result<ComparisonTable> {
    let per_seed: Vec<Vec<ComparisonRow>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<ComparisonRow>> {
            let run = run_scenario(scenario, seed)?;
            let mut cfg = *cfg;
            cfg.ga.rng_seed = seed;
            let ingested = ingest(&run.output.records, &run.nodes, cfg.symmetrization);
            let mut rows = Vec::new();
            for &method in methods {
                let pred = match method {
                    Method::Proposed => evolve(&ingested.graph, &ingested.symmetric_times(), &cfg.ga)?.best,
                    Method::Pkwik => pkwik_baseline(&ingested.graph, seed),
                    Method::ThresholdComponents => Chromosome::new(
                        ingested.graph.apply_threshold(COMPONENTS_LAMBDA).component_labels(),
                    ),
                };
                let s = score(&pred, &run.truth)?;
                rows.push(ComparisonRow {
                    scenario: scenario.name.clone(),
                    method,
                    seed,
                    ari: s.ari,
                    nmi: s.nmi,
                    purity: s.purity,
                    n_clusters: s.n_clusters_pred,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonTable {
        rows: per_seed.into_iter().flatten().collect(),
    })
}
