//! Subcommand implementations. Every command writes a `run.json` holding the
//! effective configuration, so `--config <dir>/run.json` reproduces the run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use streetlight_core::evaluation::{compare, score, Method, PartitionScore};
use streetlight_core::ga::{write_trace_csv, Chromosome};
use streetlight_core::graph::{NodeIndex, THRESHOLDS};
use streetlight_core::ingest::{ingest, read_records, registry_from_records, write_matrix_csv, write_records, AssociationRecord, Ingested, Symmetrization};
use streetlight_core::objectives::{disim, DistNormalization};
use streetlight_core::pipeline::{align_labels, cluster_records, read_labels_csv, ClusterConfig, Clustered};
use streetlight_core::similarity::SimilarityContext;
use streetlight_core::simulator::{run_scenario, write_labels_csv, write_truth_csv, Scenario, ScenarioRun};

use crate::args::{Cli, Command, GaArgs, SimArgs};

/// Problems with what the user supplied; exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

/// A result that breaks an invariant the library promises; exit code 4.
#[derive(Debug)]
pub struct InternalError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for InternalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal invariant violated: {}", self.0)
    }
}

impl std::error::Error for InputError {}
impl std::error::Error for InternalError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetrization: Option<Symmetrization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
}

#[derive(Serialize, Deserialize)]
struct RunFile {
    tool: String,
    config: RunConfig,
    #[serde(default)]
    summary: serde_json::Value,
}

fn load_config(path: &Path, command: &str) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: RunFile = serde_json::from_str(&text)
        .map_err(|e| input_error(format!("{}: not a run file: {e}", path.display())))?;
    if file.config.command != command {
        return Err(input_error(format!(
            "{} stores a `{}` run, not `{command}`",
            path.display(),
            file.config.command
        )));
    }
    Ok(file.config)
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn write_str(&self, name: &str, text: &str) -> Result<()> {
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn run_file(&self, config: &RunConfig, summary: serde_json::Value) -> Result<()> {
        let file = RunFile {
            tool: format!("streetlight {}", env!("CARGO_PKG_VERSION")),
            config: config.clone(),
            summary,
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        self.write_str("run.json", &text)
    }
}

/// A scenario file path, or the name of a bundled scenario with or without
/// the `.scenario` extension.
fn resolve_scenario(arg: Option<&str>, stored: Option<Scenario>) -> Result<Scenario> {
    let Some(arg) = arg else {
        return stored.ok_or_else(|| input_error("no scenario given"));
    };
    let path = Path::new(arg);
    if path.exists() {
        return Ok(Scenario::load(path)?);
    }
    let stem = path
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".scenario"))
        .unwrap_or(arg);
    if path.components().count() == 1 {
        if let Some(s) = Scenario::bundled(stem) {
            return Ok(s);
        }
    }
    Err(input_error(format!("{arg}: no such file or bundled scenario")))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn load_records(path: &Path) -> Result<Vec<AssociationRecord>> {
    read_records(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn load_labels(path: &Path) -> Result<(Vec<streetlight_core::graph::NodeId>, Vec<usize>)> {
    read_labels_csv(open(path)?, None).with_context(|| format!("reading {}", path.display()))
}

fn registry(records: &[AssociationRecord], nodes: Option<&Path>) -> Result<NodeIndex> {
    match nodes {
        Some(p) => Ok(NodeIndex::new(load_labels(p)?.0)?),
        None => Ok(registry_from_records(records)),
    }
}

fn required(arg: Option<PathBuf>, stored: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    arg.or(stored).ok_or_else(|| input_error(format!("no {what} file given")))
}

fn cluster_config(base: Option<ClusterConfig>, ga: &GaArgs, seed: u64) -> Result<ClusterConfig> {
    let mut cfg = base.unwrap_or_default();
    ga.apply(&mut cfg);
    cfg.ga.rng_seed = seed;
    cfg.ga.validate()?;
    Ok(cfg)
}

fn scenario_with(base: Scenario, sim: &SimArgs) -> Result<Scenario> {
    let mut s = base;
    sim.apply(&mut s.sim);
    s.sim.validate()?;
    Ok(s)
}

pub fn run(cli: Cli) -> Result<()> {
    let name = cli.command.name();
    let stored = match &cli.config {
        Some(p) => load_config(p, name)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(stored.seed);
    let out = Output::new(cli.out.clone().unwrap_or_else(|| cli.out_root.join(name)))?;
    let mut config = RunConfig {
        command: name.to_string(),
        seed,
        ..RunConfig::default()
    };

    match cli.command {
        Command::Simulate { scenario, sim } => {
            let scenario = scenario_with(resolve_scenario(scenario.as_deref(), stored.scenario)?, &sim)?;
            config.scenario = Some(scenario.clone());
            let run = run_scenario(&scenario, seed)?;
            write_simulation(&out, &run)?;
            let summary = simulation_summary(&run);
            out.run_file(&config, summary.clone())?;
            println!(
                "{}: {} lights, {} records -> {}",
                scenario.name,
                run.nodes.len(),
                run.output.records.len(),
                out.dir.display()
            );
        }
        Command::Ingest {
            records,
            nodes,
            symmetrization,
        } => {
            let records_path = required(records, stored.records, "records")?;
            let nodes_path = nodes.or(stored.nodes);
            let sym = symmetrization.or(stored.symmetrization).unwrap_or_default();
            let records = load_records(&records_path)?;
            let registry = registry(&records, nodes_path.as_deref())?;
            let ing = ingest(&records, &registry, sym);
            write_ingested(&out, &ing)?;
            config.records = Some(records_path);
            config.nodes = nodes_path;
            config.symmetrization = Some(sym);
            out.run_file(&config, ingest_summary(&ing, records.len()))?;
            println!(
                "{} nodes, {} edges -> {}",
                ing.graph.node_count(),
                ing.graph.edge_count(),
                out.dir.display()
            );
        }
        Command::Cluster { records, nodes, ga } => {
            let records_path = required(records, stored.records, "records")?;
            let nodes_path = nodes.or(stored.nodes);
            let cfg = cluster_config(stored.cluster, &ga, seed)?;
            let records = load_records(&records_path)?;
            let registry = registry(&records, nodes_path.as_deref())?;
            let clustered = cluster_records(&records, &registry, &cfg)?;
            check_result(&clustered, &cfg)?;
            let summary = write_clustering(&out, &clustered, &cfg)?;
            config.records = Some(records_path);
            config.nodes = nodes_path;
            config.cluster = Some(cfg);
            out.run_file(&config, json!({ "records": records.len(), "clustering": summary }))?;
            println!(
                "{} sectors over {} nodes -> {}",
                clustered.result.best.n_clusters(),
                registry.len(),
                out.dir.display()
            );
        }
        Command::Evaluate { prediction, truth } => {
            let pred_path = required(prediction, stored.prediction, "prediction")?;
            let truth_path = required(truth, stored.truth, "truth")?;
            let (truth_ids, truth_labels) = load_labels(&truth_path)?;
            let (pred_ids, pred_labels) = load_labels(&pred_path)?;
            let nodes = NodeIndex::new(truth_ids)?;
            let pred = align_labels(&nodes, &pred_ids, &pred_labels)?;
            let s = score(&pred, &Chromosome::new(truth_labels))?;
            write_score(&out, &s)?;
            config.prediction = Some(pred_path);
            config.truth = Some(truth_path);
            out.run_file(&config, json!({ "score": s }))?;
            print_score(&s);
        }
        Command::Pipeline { scenario, sim, ga } => {
            let scenario = scenario_with(resolve_scenario(scenario.as_deref(), stored.scenario)?, &sim)?;
            let cfg = cluster_config(stored.cluster, &ga, seed)?;
            let run = run_scenario(&scenario, seed)?;
            write_simulation(&out, &run)?;
            let clustered = cluster_records(&run.output.records, &run.nodes, &cfg)?;
            check_result(&clustered, &cfg)?;
            write_ingested(&out, &clustered.ingested)?;
            let clustering = write_clustering(&out, &clustered, &cfg)?;
            let s = score(&clustered.result.best, &run.truth)?;
            write_score(&out, &s)?;
            config.scenario = Some(scenario);
            config.cluster = Some(cfg);
            let summary = json!({
                "simulation": simulation_summary(&run),
                "clustering": clustering,
                "score": s,
            });
            out.run_file(&config, summary)?;
            print_score(&s);
        }
        Command::Bench {
            scenario,
            runs,
            methods,
            sim,
            ga,
        } => {
            let scenario = scenario_with(resolve_scenario(scenario.as_deref(), stored.scenario)?, &sim)?;
            let cfg = cluster_config(stored.cluster, &ga, seed)?;
            let runs = runs.or(stored.runs).unwrap_or(10);
            let methods = if methods.is_empty() {
                stored.methods.unwrap_or_else(|| Method::ALL.to_vec())
            } else {
                methods
            };
            let seeds: Vec<u64> = (0..runs as u64).map(|k| seed.wrapping_add(k)).collect();
            let table = compare(&scenario, &methods, &seeds, &cfg)?;
            let mut w = out.create("comparison.csv")?;
            table.write_csv(&mut w)?;
            w.flush()?;
            let rendered = table.render();
            out.write_str("table.txt", &rendered)?;
            let means: serde_json::Map<String, serde_json::Value> = table
                .methods()
                .into_iter()
                .map(|m| {
                    let [ari, nmi, purity, k] = table.summary(m);
                    let v = json!({
                        "ari": ari.mean, "nmi": nmi.mean, "purity": purity.mean, "n_clusters": k.mean,
                    });
                    (m.name().to_string(), v)
                })
                .collect();
            config.scenario = Some(scenario);
            config.cluster = Some(cfg);
            config.runs = Some(runs);
            config.methods = Some(methods);
            out.run_file(&config, json!({ "means": means }))?;
            print!("{rendered}");
        }
    }
    Ok(())
}

fn write_simulation(out: &Output, run: &ScenarioRun) -> Result<()> {
    let mut w = out.create("records.csv")?;
    write_records(&mut w, &run.output.records)?;
    w.flush()?;
    let mut w = out.create("truth.csv")?;
    write_truth_csv(&mut w, &run.nodes, &run.truth)?;
    w.flush()?;
    Ok(())
}

fn simulation_summary(run: &ScenarioRun) -> serde_json::Value {
    json!({
        "lights": run.nodes.len(),
        "sectors": run.truth.n_clusters(),
        "segment_speeds": run.segment_speeds,
        "elements": run.traffic.len(),
        "detections": run.output.detections,
        "advertisements_lost": run.output.advertisements_lost,
        "records": run.output.records.len(),
        "batches": run.output.batches.len(),
    })
}

fn write_ingested(out: &Output, ing: &Ingested) -> Result<()> {
    let nodes = ing.graph.nodes();
    out.write_str("graph.txt", &ing.graph.to_edge_list())?;
    out.write_str("graph.dot", &ing.graph.to_dot())?;
    let mut w = out.create("counts.csv")?;
    write_matrix_csv(&mut w, nodes, |i, j| ing.counts.0[(i, j)].to_string())?;
    w.flush()?;
    let mut w = out.create("times.csv")?;
    write_matrix_csv(&mut w, nodes, |i, j| {
        ing.times.get(i, j).map(|t| format!("{t:.6}")).unwrap_or_default()
    })?;
    w.flush()?;
    Ok(())
}

fn ingest_summary(ing: &Ingested, records: usize) -> serde_json::Value {
    json!({
        "records": records,
        "rejected_unknown": ing.rejected_unknown,
        "rejected_clock": ing.rejected_clock,
        "nodes": ing.graph.node_count(),
        "edges": ing.graph.edge_count(),
    })
}

/// Catches results the library guarantees never to produce.
fn check_result(c: &Clustered, cfg: &ClusterConfig) -> Result<()> {
    let r = &c.result;
    let fail = |m: String| -> Result<()> { Err(InternalError(m).into()) };
    if r.best.len() != c.ingested.graph.node_count() {
        return fail(format!("{} labels for {} nodes", r.best.len(), c.ingested.graph.node_count()));
    }
    if !r.fitness.is_finite() {
        return fail(format!("fitness {}", r.fitness));
    }
    if cfg.ga.objective.normalization == DistNormalization::Range {
        for p in &r.populations {
            if p.trace.windows(2).any(|w| w[1].best_fitness < w[0].best_fitness) {
                return fail(format!("best fitness fell in population lambda={}", p.lambda));
            }
        }
    }
    Ok(())
}

fn write_clustering(out: &Output, c: &Clustered, cfg: &ClusterConfig) -> Result<serde_json::Value> {
    let nodes = c.ingested.graph.nodes();
    let best = &c.result.best;
    let mut w = out.create("labels.csv")?;
    write_labels_csv(&mut w, "cluster", nodes.ids(), best.labels())?;
    w.flush()?;
    let mut w = out.create("trace.csv")?;
    write_trace_csv(&mut w, &c.result.trace())?;
    w.flush()?;
    // DISIM is reported alongside the fitness terms but never optimized.
    let reference = SimilarityContext::build(&c.ingested.graph.apply_threshold(THRESHOLDS[0]), &cfg.ga.walk)?;
    let d = disim(best.labels(), &reference.dissim);
    Ok(json!({
        "n_clusters": best.n_clusters(),
        "fitness": c.result.fitness,
        "sce": c.result.objectives.sce,
        "dist": c.result.objectives.dist,
        "disim": d.value,
        "disim_degenerate": d.degenerate,
        "lambda": THRESHOLDS[c.result.population],
        "rejected_unknown": c.ingested.rejected_unknown,
        "rejected_clock": c.ingested.rejected_clock,
    }))
}

fn write_score(out: &Output, s: &PartitionScore) -> Result<()> {
    out.write_str(
        "score.csv",
        &format!(
            "ari,nmi,purity,n_clusters_pred,n_clusters_true\n{},{},{},{},{}\n",
            s.ari, s.nmi, s.purity, s.n_clusters_pred, s.n_clusters_true
        ),
    )
}

fn print_score(s: &PartitionScore) {
    println!(
        "ari {:.4}  nmi {:.4}  purity {:.4}  clusters {} (truth {})",
        s.ari, s.nmi, s.purity, s.n_clusters_pred, s.n_clusters_true
    );
}
