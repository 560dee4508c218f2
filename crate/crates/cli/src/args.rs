use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use streetlight_core::evaluation::Method;
use streetlight_core::ingest::Symmetrization;
use streetlight_core::objectives::{DistFormula, DistNormalization, SceMode};
use streetlight_core::pipeline::ClusterConfig;
use streetlight_core::simulator::SimConfig;

#[derive(Debug, Parser)]
#[command(name = "streetlight", version, about = "Discover streetlight sectors from association records")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory; defaults to `<out-root>/<command>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, env = "STREETLIGHT_OUT", default_value = "streetlight-out")]
    pub out_root: PathBuf,

    /// Re-run from a stored `run.json`; flags given alongside override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write records and ground truth.
    Simulate {
        /// Scenario file, or the name of a bundled scenario.
        scenario: Option<String>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Build the probabilistic graph and time matrix from records.
    Ingest {
        records: Option<PathBuf>,
        /// `node,<label>` CSV fixing the node set (e.g. the truth file).
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[arg(long, value_parser = parse_symmetrization)]
        symmetrization: Option<Symmetrization>,
    },
    /// Cluster records into sectors.
    Cluster {
        records: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<PathBuf>,
        #[command(flatten)]
        ga: GaArgs,
    },
    /// Score a predicted labelling against ground truth.
    Evaluate {
        prediction: Option<PathBuf>,
        truth: Option<PathBuf>,
    },
    /// Simulate, ingest, cluster and evaluate in one go.
    Pipeline {
        scenario: Option<String>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        ga: GaArgs,
    },
    /// Compare clustering methods over consecutive seeds.
    Bench {
        scenario: Option<String>,
        /// Number of seeds, starting at `--seed`.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Vec<Method>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        ga: GaArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Ingest { .. } => "ingest",
            Command::Cluster { .. } => "cluster",
            Command::Evaluate { .. } => "evaluate",
            Command::Pipeline { .. } => "pipeline",
            Command::Bench { .. } => "bench",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub detection_radius: Option<f64>,
    #[arg(long)]
    pub radio_radius: Option<f64>,
    #[arg(long, visible_alias = "loss")]
    pub message_loss_prob: Option<f64>,
    #[arg(long)]
    pub n_elements: Option<usize>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub report_period: Option<f64>,
    #[arg(long)]
    pub cache_ttl: Option<f64>,
    #[arg(long)]
    pub echo_window: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub pedestrian_fraction: Option<f64>,
    #[arg(long)]
    pub pedestrian_speed: Option<f64>,
    #[arg(long)]
    pub speed_jitter: Option<f64>,
    #[arg(long)]
    pub max_route_segments: Option<usize>,
}

impl SimArgs {
    pub fn apply(&self, sim: &mut SimConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { sim.$field = v; })*
            };
        }
        set!(
            detection_radius,
            radio_radius,
            message_loss_prob,
            n_elements,
            duration,
            report_period,
            cache_ttl,
            echo_window,
            spacing,
            pedestrian_fraction,
            pedestrian_speed,
            speed_jitter,
            max_route_segments
        );
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GaArgs {
    #[arg(long)]
    pub pop_size: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    /// Chance in percent that a child is mutated.
    #[arg(long)]
    pub mutation_prob: Option<f64>,
    #[arg(long)]
    pub local_search_fraction: Option<f64>,
    #[arg(long)]
    pub local_search_passes: Option<usize>,
    /// Stop a population after this many generations without improvement.
    #[arg(long)]
    pub stagnation_limit: Option<usize>,
    #[arg(long)]
    pub walk_order: Option<usize>,
    /// Self-transition weight of the random walk; 0 gives the plain walk.
    #[arg(long)]
    pub self_loop: Option<f64>,
    /// Weight of DIST in the fitness; SCE gets `1 - w1`.
    #[arg(long)]
    pub w1: Option<f64>,
    /// Separation weight inside DIST.
    #[arg(long)]
    pub dist_w: Option<f64>,
    /// Divide by the cluster size instead of the interval count in SC.
    #[arg(long)]
    pub paper_literal_sce: bool,
    #[arg(long, value_parser = parse_formula)]
    pub dist_formula: Option<DistFormula>,
    #[arg(long, value_parser = parse_normalization)]
    pub dist_normalization: Option<DistNormalization>,
    #[arg(long, value_parser = parse_symmetrization)]
    pub symmetrization: Option<Symmetrization>,
}

impl GaArgs {
    pub fn apply(&self, cfg: &mut ClusterConfig) {
        let ga = &mut cfg.ga;
        if let Some(v) = self.pop_size {
            ga.pop_size = v;
        }
        if let Some(v) = self.generations {
            ga.generations = v;
        }
        if let Some(v) = self.mutation_prob {
            ga.mutation_prob = v;
        }
        if let Some(v) = self.local_search_fraction {
            ga.local_search_fraction = v;
        }
        if let Some(v) = self.local_search_passes {
            ga.local_search_passes = v;
        }
        if self.stagnation_limit.is_some() {
            ga.stagnation_limit = self.stagnation_limit;
        }
        if let Some(v) = self.walk_order {
            ga.walk.order = v;
        }
        if let Some(v) = self.self_loop {
            ga.walk.self_loop = v;
        }
        if let Some(v) = self.w1 {
            ga.objective.weights.w1 = v;
        }
        if let Some(v) = self.dist_w {
            ga.objective.weights.dist_w = v;
        }
        if self.paper_literal_sce {
            ga.objective.sce_mode = SceMode::PaperLiteral;
        }
        if let Some(v) = self.dist_formula {
            ga.objective.formula = v;
        }
        if let Some(v) = self.dist_normalization {
            ga.objective.normalization = v;
        }
        if let Some(v) = self.symmetrization {
            cfg.symmetrization = v;
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("expected one of proposed, pkwik, threshold-components; got `{s}`"))
}

fn parse_symmetrization(s: &str) -> Result<Symmetrization, String> {
    match s {
        "max" => Ok(Symmetrization::Max),
        "mean" => Ok(Symmetrization::Mean),
        _ => Err(format!("expected max or mean; got `{s}`")),
    }
}

fn parse_formula(s: &str) -> Result<DistFormula, String> {
    match s {
        "default" => Ok(DistFormula::default()),
        "mean-linkage-sum" => Ok(DistFormula::MEAN_LINKAGE_SUM),
        _ => Err(format!("expected default or mean-linkage-sum; got `{s}`")),
    }
}

fn parse_normalization(s: &str) -> Result<DistNormalization, String> {
    match s {
        "range" => Ok(DistNormalization::Range),
        "population" => Ok(DistNormalization::Population),
        _ => Err(format!("expected range or population; got `{s}`")),
    }
}
