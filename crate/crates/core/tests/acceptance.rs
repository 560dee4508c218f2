//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{exhaustive_min_diss, random_complete_times, transition_rows, walk_enumeration_similarity};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streetlight_core::evaluation::{compare, score, Method};
use streetlight_core::ga::{evolve, GAConfig};
use streetlight_core::graph::{ProbabilisticGraph, THRESHOLDS};
use streetlight_core::ingest::{ingest, TimeMatrix};
use streetlight_core::objectives::{
    dist, disim, sc, DistFormula, Evaluator, ObjectiveConfig, Objectives, SceCache, SceMode, NEUTRAL_SC,
};
use streetlight_core::permutation::{best_permutation, diss, ABSENT_PENALTY};
use streetlight_core::pipeline::ClusterConfig;
use streetlight_core::similarity::{random_walk_similarity, TransitionMatrix};
use streetlight_core::simulator::{run_scenario, Scenario};

const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Collects named boolean checks; the first failures are kept for the report.
#[derive(Default)]
struct Checks {
    total: usize,
    failed: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if !ok {
            self.failed.push(what());
        }
    }

    fn outcome(self) -> Outcome {
        let pass = self.failed.is_empty();
        let mut detail = format!("{}/{} checks hold", self.total - self.failed.len(), self.total);
        if !pass {
            let shown: Vec<&str> = self.failed.iter().take(5).map(String::as_str).collect();
            detail.push_str(&format!("; failing: {}", shown.join("; ")));
        }
        Outcome::new(pass, detail)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn two_clique_dissim() -> Array2<f64> {
    Array2::from_shape_fn((8, 8), |(i, j)| {
        if i == j {
            0.0
        } else if (i < 4) == (j < 4) {
            0.05
        } else {
            0.95
        }
    })
}

fn criterion_1() -> Outcome {
    let mut c = Checks::default();

    // sc over intervals that are all equal.
    let flat = TimeMatrix::from_pairs(4, &[(0, 1, 2.0), (1, 2, 2.0), (2, 3, 2.0)]);
    let s = sc(&[0, 1, 2, 3], &flat, SceMode::IntervalCount);
    c.check(s.sc == 1.0, || format!("zero-variance sc = {}", s.sc));

    // sc with mean 2 and population deviation 1.
    let skew = TimeMatrix::from_pairs(3, &[(0, 1, 1.0), (1, 2, 3.0)]);
    let s = sc(&[0, 1, 2], &skew, SceMode::IntervalCount);
    let want = 1.0 - 0.5f64.tanh();
    c.check(close(s.sc, want, 1e-9), || format!("sc(mu=2, sigma=1) = {} vs {want}", s.sc));
    c.check(close(s.mu, 2.0, 1e-12) && close(s.sigma, 1.0, 1e-12), || {
        format!("mu {} sigma {}", s.mu, s.sigma)
    });

    // Saturation and the neutral singleton.
    let mut pairs: Vec<(usize, usize, f64)> = (0..9).map(|i| (i, i + 1, 0.01)).collect();
    pairs.push((9, 10, 100.0));
    let wild = TimeMatrix::from_pairs(11, &pairs);
    let s = sc(&(0..11).collect::<Vec<_>>(), &wild, SceMode::IntervalCount);
    c.check(s.sc > 0.0 && s.sc < 0.01, || format!("saturated sc = {}", s.sc));
    c.check(sc(&[3], &wild, SceMode::IntervalCount).sc == NEUTRAL_SC, || "singleton sc".into());

    // SCE is the mean of the per-cluster scores: 1.0 and the neutral 0.5.
    let v = streetlight_core::objectives::sce(&[0, 0, 0, 1], &flat, SceMode::IntervalCount);
    c.check(close(v, 0.75, 1e-12), || format!("sce = {v}"));

    // DISS on hand examples and additivity across a split point.
    let t = TimeMatrix::from_pairs(4, &[(0, 1, 2.0), (1, 2, 2.0), (2, 3, 3.0), (0, 3, 7.5)]);
    let whole = diss(&[0, 1, 2, 3], &t, 2.0);
    c.check(close(whole, 1.0, 1e-12), || format!("diss [2,2,3] = {whole}"));
    let parts = diss(&[0, 1], &t, 2.0) + diss(&[2, 3], &t, 2.0) + (t.get(1, 2).unwrap() - 2.0).abs();
    c.check(close(whole, parts, 1e-12), || format!("additivity {whole} vs {parts}"));
    let cycle = diss(&[3, 0, 1, 2], &t, 2.0);
    c.check(close(cycle, 5.5 + 0.0 + 0.0, 1e-12), || format!("diss [7.5,2,2] = {cycle}"));
    c.check(diss(&[0, 2], &TimeMatrix::absent(3), 2.0) >= ABSENT_PENALTY, || "absent penalty".into());
    c.check(close(diss(&[0, 1, 2, 3], &t, 2.0), diss(&[3, 2, 1, 0], &t, 2.0), 1e-12), || {
        "reversal".into()
    });

    // DIST in its mean-linkage summed form.
    let d = two_clique_dissim();
    let lit = DistFormula::MEAN_LINKAGE_SUM;
    let single = dist(&[0; 8], &d, 0.5, lit);
    let intra_all: f64 = {
        let mut s = 0.0;
        for i in 0..8 {
            for j in (i + 1)..8 {
                s += d[(i, j)];
            }
        }
        s / 28.0
    };
    c.check(close(single, -intra_all, 1e-12), || format!("single-cluster dist {single}"));
    let singles: Vec<usize> = (0..8).collect();
    let inter_sum: f64 = (0..8).map(|i| (0..8).filter(|&j| j != i).map(|j| d[(i, j)]).sum::<f64>() / 7.0).sum();
    let got = dist(&singles, &d, 0.5, lit);
    c.check(close(got, 0.5 * inter_sum, 1e-12), || format!("singleton dist {got}"));
    let split = dist(&[0, 0, 0, 0, 1, 1, 1, 1], &d, 0.5, lit);
    c.check(split > single, || format!("cliques {split} vs merged {single}"));

    // DISIM.
    let good = disim(&[0, 0, 0, 0, 1, 1, 1, 1], &d);
    c.check(good.value > 0.9 && !good.degenerate, || format!("disim correct {}", good.value));
    let swapped = disim(&[0, 0, 1, 1, 0, 0, 1, 1], &d);
    c.check(swapped.value < 0.0, || format!("disim swapped {}", swapped.value));
    let one = disim(&[0; 8], &d);
    c.check(one.degenerate && one.value == 0.0, || "disim degenerate".into());

    // Fitness keeps dominance.
    let times = TimeMatrix::absent(8);
    let cache = SceCache::new(SceMode::IntervalCount);
    let eval = Evaluator::new(&times, &cache, ObjectiveConfig::default());
    let f = eval.fitness(&[
        Objectives { dist: 0.2, sce: 0.8, n_clusters: 2 },
        Objectives { dist: 0.1, sce: 0.8, n_clusters: 2 },
    ]);
    c.check(f[0] > f[1], || format!("dominance {f:?}"));
    c.outcome()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut c = Checks::default();
    for k in 0..1000 {
        let n = rng.gen_range(1..=50);
        let density = rng.gen_range(0.0..1.0);
        let mut g = ProbabilisticGraph::with_nodes(n);
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(density) {
                    // Mix continuous draws with values exactly on a threshold.
                    let p = if rng.gen_bool(0.2) {
                        THRESHOLDS[rng.gen_range(0..THRESHOLDS.len())]
                    } else {
                        rng.gen_range(f64::MIN_POSITIVE..=1.0)
                    };
                    g.insert_edge(u, v, p).unwrap();
                }
            }
        }
        let mut lambdas: Vec<f64> = THRESHOLDS.to_vec();
        lambdas.extend([0.0, rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0), 1.0]);
        lambdas.sort_by(f64::total_cmp);
        let subgraphs: Vec<_> = lambdas.iter().map(|&l| g.apply_threshold(l)).collect();
        for (sg, &l) in subgraphs.iter().zip(&lambdas) {
            c.check(sg.node_count() == n, || format!("graph {k}: node count at {l}"));
            let expected = g.edges().filter(|&(_, _, p)| p >= l).count();
            c.check(sg.edge_count() == expected, || format!("graph {k}: edge count at {l}"));
            c.check(sg.edges().all(|(u, v, w)| g.probability(u, v) == Some(w)), || {
                format!("graph {k}: weight fidelity at {l}")
            });
        }
        for w in subgraphs.windows(2) {
            let nested = w[1].edges().all(|(u, v, _)| w[0].weight(u, v).is_some());
            c.check(nested, || format!("graph {k}: nestedness {} -> {}", w[0].lambda(), w[1].lambda()));
        }
    }
    c.outcome()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c = Checks::default();
    let mut optimal = 0;
    let mut worst_ratio = 1.0f64;
    let instances = 200;
    for k in 0..instances {
        let n = rng.gen_range(4..=8);
        let times = random_complete_times(&mut rng, n, 1.0, 6.0);
        let cluster: Vec<usize> = (0..n).collect();
        let found = best_permutation(&cluster, &times).unwrap();
        let exact = exhaustive_min_diss(&cluster, &times, ABSENT_PENALTY);
        c.check(found.diss >= exact - 1e-9, || format!("instance {k}: {} below optimum {exact}", found.diss));
        if found.diss <= exact + 1e-9 {
            optimal += 1;
        }
        if exact > 0.0 {
            worst_ratio = worst_ratio.max(found.diss / exact);
        }
        if exact == 0.0 {
            c.check(found.diss == 0.0, || format!("instance {k}: zero-diss order missed"));
        }
    }
    // Instances that do admit a zero-dissimilarity order: a hidden road
    // with equal adjacent intervals and arbitrary other pairs.
    let mut zero_found = 0;
    let planted = 100;
    for k in 0..planted {
        let n = rng.gen_range(4..=8);
        let mut road: Vec<usize> = (0..n).collect();
        road.shuffle(&mut rng);
        let step = rng.gen_range(1.0..6.0);
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let t = if b == a + 1 { step } else { rng.gen_range(1.0..6.0) };
                pairs.push((road[a], road[b], t));
            }
        }
        let times = TimeMatrix::from_pairs(n, &pairs);
        let cluster: Vec<usize> = (0..n).collect();
        let exact = exhaustive_min_diss(&cluster, &times, ABSENT_PENALTY);
        let found = best_permutation(&cluster, &times).unwrap();
        c.check(exact == 0.0, || format!("planted {k}: oracle optimum {exact}"));
        c.check(found.diss == 0.0, || format!("planted {k}: heuristic diss {}", found.diss));
        if found.diss == 0.0 {
            zero_found += 1;
        }
    }
    let rate = optimal as f64 / instances as f64;
    c.check(rate >= 0.6, || format!("optimal on {:.1}% of instances", 100.0 * rate));
    let mut o = c.outcome();
    o.detail = format!(
        "optimal on {optimal}/{instances} ({:.1}%), worst ratio {worst_ratio:.3}, zero-diss found {zero_found}/{planted}; {}",
        100.0 * rate,
        o.detail
    );
    o
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_err = 0.0f64;
    let mut graphs = 0usize;
    for n in 1..=6usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let present: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            for _ in 0..20 {
                let edges: Vec<(usize, usize, f64)> =
                    present.iter().map(|&(u, v)| (u, v, rng.gen_range(0.01..=1.0))).collect();
                let mut g = ProbabilisticGraph::with_nodes(n);
                for &(u, v, p) in &edges {
                    g.insert_edge(u, v, p).unwrap();
                }
                let wg = g.apply_threshold(0.0);
                for self_loop in [0.0, 1.0] {
                    let omega = TransitionMatrix::with_self_loops(&wg, self_loop);
                    let rows = transition_rows(n, &edges, self_loop);
                    for order in [2, 4] {
                        let got = random_walk_similarity(&omega, order).unwrap();
                        let want = walk_enumeration_similarity(&rows, order);
                        for i in 0..n {
                            for j in 0..n {
                                max_err = max_err.max((got.get(i, j) - want[i][j]).abs());
                            }
                        }
                    }
                }
                graphs += 1;
            }
        }
    }
    Outcome::new(
        max_err < 1e-9,
        format!("{graphs} weighted graphs, plain and lazy walks, max abs error {max_err:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut scenario = Scenario::bundled("plus-crossing").unwrap();
    scenario.sim.message_loss_prob = 0.2;
    let mut c = Checks::default();
    for seed in 0..20u64 {
        let run = run_scenario(&scenario, seed).unwrap();
        let ing = ingest(&run.output.records, &run.nodes, Default::default());
        let times = ing.symmetric_times();
        let cfg = GAConfig {
            rng_seed: seed,
            ..GAConfig::default()
        };
        let a = evolve(&ing.graph, &times, &cfg).unwrap();
        let b = evolve(&ing.graph, &times, &cfg).unwrap();
        for p in &a.populations {
            c.check(p.trace.len() == cfg.generations, || format!("seed {seed}: trace length"));
            for w in p.trace.windows(2) {
                c.check(w[1].best_fitness >= w[0].best_fitness, || {
                    format!(
                        "seed {seed} lambda {}: best fell {} -> {} at generation {}",
                        p.lambda, w[0].best_fitness, w[1].best_fitness, w[1].generation
                    )
                });
            }
        }
        c.check(a.best == b.best && a.fitness.to_bits() == b.fitness.to_bits(), || {
            format!("seed {seed}: best differs between runs")
        });
        c.check(a.trace() == b.trace(), || format!("seed {seed}: trace differs between runs"));
    }
    c.outcome()
}

fn criterion_6() -> Outcome {
    let scenario = Scenario::bundled("plus-crossing").unwrap();
    let table = compare(&scenario, &[Method::Proposed], &SEEDS, &ClusterConfig::default()).unwrap();
    let aris: Vec<f64> = table.rows.iter().map(|r| r.ari).collect();
    let hits = aris.iter().filter(|&&a| a >= 0.9).count();
    Outcome::new(
        hits >= 8,
        format!(
            "ARI >= 0.9 on {hits}/10 seeds (per seed: {})",
            aris.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut scenario = Scenario::bundled("plus-crossing").unwrap();
    scenario.sim.message_loss_prob = 0.2;
    let table = compare(&scenario, &[Method::Proposed, Method::Pkwik], &SEEDS, &ClusterConfig::default()).unwrap();
    let (ours, pkwik) = (table.mean_ari(Method::Proposed), table.mean_ari(Method::Pkwik));
    Outcome::new(
        ours >= pkwik,
        format!("mean ARI proposed {ours:.3} vs pKwikCluster {pkwik:.3}"),
    )
}

fn with_w1(w1: f64) -> ClusterConfig {
    let mut cfg = ClusterConfig::default();
    cfg.ga.objective.weights.w1 = w1;
    cfg
}

fn criterion_8() -> Outcome {
    let scenario = Scenario::bundled("parallel-close-roads").unwrap();
    let both = compare(&scenario, &[Method::Proposed], &SEEDS, &with_w1(0.5)).unwrap();
    let dist_only = compare(&scenario, &[Method::Proposed], &SEEDS, &with_w1(1.0)).unwrap();
    let (a, b) = (both.mean_ari(Method::Proposed), dist_only.mean_ari(Method::Proposed));
    let pass = a >= b;
    let mut detail = format!("mean ARI w1=0.5 {a:.3} vs w1=1 {b:.3}");
    if !pass {
        detail.push_str("\n  trace data (seed, w1, ari, clusters, best fitness, sce, dist):");
        for &seed in &SEEDS {
            let run = run_scenario(&scenario, seed).unwrap();
            let ing = ingest(&run.output.records, &run.nodes, Default::default());
            for w1 in [0.5, 1.0] {
                let mut cfg = with_w1(w1).ga;
                cfg.rng_seed = seed;
                let r = evolve(&ing.graph, &ing.symmetric_times(), &cfg).unwrap();
                let s = score(&r.best, &run.truth).unwrap();
                detail.push_str(&format!(
                    "\n  {seed} {w1} {:.3} {} {:.4} {:.4} {:.4}",
                    s.ari, r.objectives.n_clusters, r.fitness, r.objectives.sce, r.objectives.dist
                ));
            }
        }
    }
    Outcome::new(pass, detail)
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("equation suite", criterion_1, Duration::from_secs(1)),
        ("thresholding properties", criterion_2, Duration::from_secs(10)),
        ("permutation oracle", criterion_3, Duration::from_secs(60)),
        ("random-walk equivalence", criterion_4, Duration::MAX),
        ("GA elitism and determinism", criterion_5, Duration::MAX),
        ("noise-free recovery", criterion_6, Duration::from_secs(300)),
        ("recovery under loss", criterion_7, Duration::MAX),
        ("objective ablation", criterion_8, Duration::MAX),
    ];
    let mut failures = 0;
    for (k, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::new(false, format!("panicked: {msg}"))
            });
        let elapsed = start.elapsed();
        let in_time = elapsed < limit;
        let pass = outcome.pass && in_time;
        let budget = if limit == Duration::MAX {
            String::new()
        } else {
            format!(" (limit {:.0?})", limit)
        };
        println!(
            "criterion {} {:<28} {} [{:.2?}{budget}] {}",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed,
            outcome.detail
        );
        if !pass {
            failures += 1;
        }
    }
    println!("acceptance: {}/8 criteria pass", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
