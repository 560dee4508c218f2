use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{distance, End, Point, RoadNetwork};
use super::SimConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Pedestrian,
    Vehicle,
}

/// One segment of a route and the direction it is travelled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteStep {
    pub segment: usize,
    /// True when travelling from the segment's first vertex to its last.
    pub forward: bool,
}

impl RouteStep {
    fn entry(&self) -> End {
        if self.forward {
            End::Start
        } else {
            End::Finish
        }
    }

    fn exit(&self) -> End {
        if self.forward {
            End::Finish
        } else {
            End::Start
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficElement {
    pub kind: ElementKind,
    pub route: Vec<RouteStep>,
    /// Speed on each route step, m/s.
    pub speed_per_segment: Vec<f64>,
    /// Time the element starts its approach, seconds.
    pub spawn_time: f64,
}

/// Straight piece of an element's trajectory at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub start_time: f64,
    pub duration: f64,
    pub from: Point,
    /// Velocity vector, m/s.
    pub velocity: [f64; 2],
}

/// Vehicle speed of every segment: the pinned value or a uniform draw.
pub fn segment_speeds(net: &RoadNetwork, cfg: &SimConfig, rng: &mut impl Rng) -> Vec<f64> {
    let [lo, hi] = cfg.vehicle_speed_range;
    net.segments
        .iter()
        .map(|s| {
            let drawn = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            s.speed.unwrap_or(drawn)
        })
        .collect()
}

/// Random routes starting at dead ends and turning at random at junctions.
pub fn generate_traffic(
    net: &RoadNetwork,
    speeds: &[f64],
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Vec<TrafficElement> {
    let mut starts: Vec<usize> = (0..net.junctions.len())
        .filter(|&j| net.junctions[j].is_terminal())
        .collect();
    if starts.is_empty() {
        starts = (0..net.junctions.len()).collect();
    }
    (0..cfg.n_elements)
        .map(|_| {
            let kind = if rng.gen_bool(cfg.pedestrian_fraction) {
                ElementKind::Pedestrian
            } else {
                ElementKind::Vehicle
            };
            let spawn_time = rng.gen_range(0.0..cfg.duration);
            let start = &net.junctions[starts[rng.gen_range(0..starts.len())]];
            let (segment, end) = start.incident[rng.gen_range(0..start.incident.len())];
            let mut route = vec![RouteStep {
                segment,
                forward: end == End::Start,
            }];
            while route.len() < cfg.max_route_segments {
                let last = *route.last().unwrap();
                let junction = &net.junctions[net.junction_at(last.segment, last.exit())];
                let options: Vec<(usize, End)> = junction
                    .incident
                    .iter()
                    .copied()
                    .filter(|&(s, _)| s != last.segment)
                    .collect();
                if options.is_empty() {
                    break;
                }
                let (segment, end) = options[rng.gen_range(0..options.len())];
                route.push(RouteStep {
                    segment,
                    forward: end == End::Start,
                });
            }
            let jitter = if cfg.speed_jitter > 0.0 {
                rng.gen_range(1.0 - cfg.speed_jitter..1.0 + cfg.speed_jitter)
            } else {
                1.0
            };
            let speed_per_segment = match kind {
                ElementKind::Pedestrian => vec![cfg.pedestrian_speed * jitter; route.len()],
                ElementKind::Vehicle => route.iter().map(|s| speeds[s.segment] * jitter).collect(),
            };
            TrafficElement {
                kind,
                route,
                speed_per_segment,
                spawn_time,
            }
        })
        .collect()
}

/// Checks that consecutive steps meet at a junction and speeds are positive.
pub fn validate_route(net: &RoadNetwork, element: &TrafficElement) -> Result<()> {
    if element.route.is_empty() || element.route.len() != element.speed_per_segment.len() {
        return Err(Error::Config("route and speed list must be non-empty and aligned".into()));
    }
    if element.speed_per_segment.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Config("speeds must be positive".into()));
    }
    for s in &element.route {
        if s.segment >= net.segments.len() {
            return Err(Error::Config(format!("route uses unknown segment {}", s.segment)));
        }
    }
    for w in element.route.windows(2) {
        if net.junction_at(w[0].segment, w[0].exit()) != net.junction_at(w[1].segment, w[1].entry()) {
            return Err(Error::Config(format!(
                "segments {} and {} are not connected along the route",
                w[0].segment, w[1].segment
            )));
        }
    }
    Ok(())
}

/// Piecewise-straight trajectory of an element. The first leg is an
/// approach of `lead_in` meters in line with the first road piece, so the
/// element enters the network already moving.
pub fn legs(net: &RoadNetwork, element: &TrafficElement, lead_in: f64) -> Vec<Leg> {
    let mut points: Vec<(Point, f64)> = Vec::new();
    for (step, &v) in element.route.iter().zip(&element.speed_per_segment) {
        let mut poly = net.segments[step.segment].polyline.clone();
        if !step.forward {
            poly.reverse();
        }
        let skip = usize::from(!points.is_empty());
        points.extend(poly.into_iter().skip(skip).map(|p| (p, v)));
    }
    let (a, b) = (points[0].0, points[1].0);
    let len = distance(a, b);
    let approach = [
        a[0] - (b[0] - a[0]) / len * lead_in,
        a[1] - (b[1] - a[1]) / len * lead_in,
    ];
    points.insert(0, (approach, points[0].1));

    let mut out = Vec::with_capacity(points.len());
    let mut t = element.spawn_time;
    for w in points.windows(2) {
        let (from, to, v) = (w[0].0, w[1].0, w[1].1);
        let len = distance(from, to);
        if len == 0.0 {
            continue;
        }
        let duration = len / v;
        out.push(Leg {
            start_time: t,
            duration,
            from,
            velocity: [(to[0] - from[0]) / duration, (to[1] - from[1]) / duration],
        });
        t += duration;
    }
    out
}

/// Times the trajectory enters the closed disk of `radius` around `centre`.
pub fn entry_times(legs: &[Leg], centre: Point, radius: f64) -> Vec<f64> {
    let mut inside: Vec<(f64, f64)> = Vec::new();
    for leg in legs {
        let w = [leg.from[0] - centre[0], leg.from[1] - centre[1]];
        let a = leg.velocity[0].powi(2) + leg.velocity[1].powi(2);
        let b = 2.0 * (leg.velocity[0] * w[0] + leg.velocity[1] * w[1]);
        let c = w[0] * w[0] + w[1] * w[1] - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let lo = ((-b - root) / (2.0 * a)).max(0.0);
        let hi = ((-b + root) / (2.0 * a)).min(leg.duration);
        if hi > lo {
            inside.push((leg.start_time + lo, leg.start_time + hi));
        }
    }
    let mut entries = Vec::new();
    let mut open_until = f64::NEG_INFINITY;
    for (lo, hi) in inside {
        if lo > open_until + 1e-9 {
            entries.push(lo);
        }
        open_until = open_until.max(hi);
    }
    entries
}
