//! Discrete-event streetlight network simulator.
//!
//! Lights sit at even spacing along road segments. Traffic elements follow
//! routes through the network at constant speed per segment. Whenever an
//! element enters a light's detection disk the light advertises, and every
//! other light within radio range caches the advertisement unless it is
//! lost. On its next own detection a light pairs that detection with the
//! advertisement it cached most recently and emits an association record.

pub mod network;
pub mod traffic;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::Chromosome;
use crate::graph::{NodeId, NodeIndex};
use crate::ingest::AssociationRecord;

pub use network::{build_network, RoadNetwork, SegmentSpec};
pub use traffic::{ElementKind, RouteStep, TrafficElement};

/// Simulation parameters. All distances in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub detection_radius: f64,
    pub radio_radius: f64,
    pub message_loss_prob: f64,
    pub n_elements: usize,
    /// Window over which elements are spawned.
    pub duration: f64,
    /// Gateway polling period `T_c`.
    pub report_period: f64,
    /// Cached advertisements older than this are discarded.
    pub cache_ttl: f64,
    /// A light ignores advertisements arriving this soon after its own
    /// detection: they come from the element it has just seen moving on.
    pub echo_window: f64,
    /// Default light spacing for segments that do not set one.
    pub spacing: f64,
    pub pedestrian_fraction: f64,
    pub pedestrian_speed: f64,
    /// Range for drawing vehicle speeds of segments without a pinned speed.
    pub vehicle_speed_range: [f64; 2],
    /// Each element's speeds are scaled by a factor drawn from `1 ± jitter`.
    pub speed_jitter: f64,
    pub max_route_segments: usize,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            detection_radius: 15.0,
            radio_radius: 50.0,
            message_loss_prob: 0.0,
            n_elements: 200,
            duration: 3600.0,
            report_period: 60.0,
            cache_ttl: 60.0,
            echo_window: 10.0,
            spacing: 30.0,
            pedestrian_fraction: 0.0,
            pedestrian_speed: 1.4,
            vehicle_speed_range: [8.0, 16.0],
            speed_jitter: 0.0,
            max_route_segments: 3,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if !(self.detection_radius > 0.0) || self.radio_radius < self.detection_radius {
            return bad("need radio_radius >= detection_radius > 0".into());
        }
        if !(0.0..=1.0).contains(&self.message_loss_prob) {
            return bad(format!("message_loss_prob {} outside [0, 1]", self.message_loss_prob));
        }
        if !(0.0..=1.0).contains(&self.pedestrian_fraction) {
            return bad(format!("pedestrian_fraction {} outside [0, 1]", self.pedestrian_fraction));
        }
        if !(self.duration > 0.0) || !(self.report_period > 0.0) || !(self.cache_ttl > 0.0) {
            return bad("duration, report_period and cache_ttl must be positive".into());
        }
        if !(self.echo_window >= 0.0) {
            return bad("echo_window must be non-negative".into());
        }
        if !(self.spacing > 0.0) || !(self.pedestrian_speed > 0.0) {
            return bad("spacing and pedestrian_speed must be positive".into());
        }
        let [lo, hi] = self.vehicle_speed_range;
        if !(lo > 0.0) || hi < lo {
            return bad("vehicle_speed_range must be positive and ascending".into());
        }
        if !(0.0..1.0).contains(&self.speed_jitter) {
            return bad("speed_jitter must be in [0, 1)".into());
        }
        if self.max_route_segments == 0 {
            return bad("max_route_segments must be at least 1".into());
        }
        Ok(())
    }
}

/// A named network with its simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(rename = "segment")]
    pub segments: Vec<SegmentSpec>,
}

/// Scenarios shipped with the library, by name.
pub const BUNDLED: [(&str, &str); 5] = [
    ("straight", include_str!("../../scenarios/straight.scenario")),
    ("l-corner", include_str!("../../scenarios/l-corner.scenario")),
    ("plus-crossing", include_str!("../../scenarios/plus-crossing.scenario")),
    ("grid-2x2", include_str!("../../scenarios/grid-2x2.scenario")),
    ("parallel-close-roads", include_str!("../../scenarios/parallel-close-roads.scenario")),
];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|sp| text[..sp.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse("scenario", line, e.message().to_string())
        })?;
        s.sim.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text).expect("bundled scenarios parse"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn network(&self) -> Result<RoadNetwork> {
        build_network(&self.segments, self.sim.spacing)
    }
}

/// Canonical chromosome labelling each light with its segment.
pub fn ground_truth(net: &RoadNetwork) -> Chromosome {
    Chromosome::new(net.sectors())
}

/// Records delivered to the gateway at one polling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Batch {
    pub report_time: f64,
    /// Range into the record list.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// In emission order, which is receiver-time order.
    pub records: Vec<AssociationRecord>,
    pub batches: Vec<Batch>,
    pub detections: usize,
    pub advertisements_lost: usize,
}

#[derive(Debug, Clone, Copy)]
struct Detection {
    time: f64,
    light: usize,
    element: usize,
}

impl PartialEq for Detection {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Detection {}

impl PartialOrd for Detection {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Detection {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.element.cmp(&other.element))
            .then(self.light.cmp(&other.light))
    }
}

#[derive(Debug, Clone, Copy)]
struct Advert {
    sender: usize,
    time: f64,
}

/// Runs the event loop. `rng` only drives message loss.
pub fn simulate(
    net: &RoadNetwork,
    traffic: &[TrafficElement],
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Result<SimOutput> {
    cfg.validate()?;
    for element in traffic {
        traffic::validate_route(net, element)?;
    }
    let n = net.lights.len();
    let in_range: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i
                        && network::distance(net.lights[i].position, net.lights[j].position)
                            <= cfg.radio_radius
                })
                .collect()
        })
        .collect();

    let lead_in = cfg.detection_radius + 1.0;
    let mut queue = BinaryHeap::new();
    for (e, element) in traffic.iter().enumerate() {
        let legs = traffic::legs(net, element, lead_in);
        for (light, l) in net.lights.iter().enumerate() {
            for time in traffic::entry_times(&legs, l.position, cfg.detection_radius) {
                queue.push(Reverse(Detection { time, light, element: e }));
            }
        }
    }

    let mut cache: Vec<Option<Advert>> = vec![None; n];
    let mut last_seen = vec![f64::NEG_INFINITY; n];
    let mut records = Vec::new();
    let mut detections = 0;
    let mut lost = 0;
    while let Some(Reverse(d)) = queue.pop() {
        detections += 1;
        last_seen[d.light] = d.time;
        if let Some(ad) = cache[d.light].take() {
            if d.time - ad.time <= cfg.cache_ttl {
                records.push(AssociationRecord {
                    receiver: net.lights[d.light].id,
                    receiver_time: d.time,
                    sender: net.lights[ad.sender].id,
                    sender_time: ad.time,
                });
            }
        }
        for &j in &in_range[d.light] {
            if d.time - last_seen[j] < cfg.echo_window {
                continue;
            }
            if cfg.message_loss_prob > 0.0 && rng.gen_bool(cfg.message_loss_prob) {
                lost += 1;
                continue;
            }
            cache[j] = Some(Advert {
                sender: d.light,
                time: d.time,
            });
        }
    }

    let mut batches: Vec<Batch> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let report_time = (r.receiver_time / cfg.report_period).floor() * cfg.report_period + cfg.report_period;
        match batches.last_mut() {
            Some(b) if b.report_time == report_time => b.end = i + 1,
            _ => batches.push(Batch {
                report_time,
                start: i,
                end: i + 1,
            }),
        }
    }
    Ok(SimOutput {
        records,
        batches,
        detections,
        advertisements_lost: lost,
    })
}

/// Everything produced by one seeded scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub network: RoadNetwork,
    pub nodes: NodeIndex,
    pub truth: Chromosome,
    pub segment_speeds: Vec<f64>,
    pub traffic: Vec<TrafficElement>,
    pub output: SimOutput,
    pub seed: u64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds the network, draws speeds and traffic, and simulates.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<ScenarioRun> {
    let mut cfg = scenario.sim.clone();
    cfg.rng_seed = seed;
    cfg.validate()?;
    let network = scenario.network()?;
    let segment_speeds = traffic::segment_speeds(&network, &cfg, &mut rng_for(seed, 1));
    let traffic = traffic::generate_traffic(&network, &segment_speeds, &cfg, &mut rng_for(seed, 2));
    let output = simulate(&network, &traffic, &cfg, &mut rng_for(seed, 3))?;
    Ok(ScenarioRun {
        nodes: network.node_index(),
        truth: ground_truth(&network),
        network,
        segment_speeds,
        traffic,
        output,
        seed,
    })
}

/// Writes the `node,sector` ground-truth CSV.
pub fn write_truth_csv<W: std::io::Write>(writer: W, nodes: &NodeIndex, truth: &Chromosome) -> csv::Result<()> {
    write_labels_csv(writer, "sector", nodes.ids(), truth.labels())
}

/// Writes a two-column `node,<column>` CSV.
pub fn write_labels_csv<W: std::io::Write>(
    writer: W,
    column: &str,
    ids: &[NodeId],
    labels: &[usize],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", column])?;
    for (id, label) in ids.iter().zip(labels) {
        w.write_record([id.to_string(), label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
