use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeIndex};

pub type Point = [f64; 2];

/// Endpoints closer than this are the same junction.
const JUNCTION_EPS: f64 = 1e-6;

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Declarative description of one road segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// Polyline vertices in meters; at least two.
    pub points: Vec<Point>,
    /// Light spacing along the segment; falls back to the scenario default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Distance from the first vertex to the first light.
    #[serde(default)]
    pub inset_start: f64,
    /// Minimum distance from the last light to the last vertex.
    #[serde(default)]
    pub inset_end: f64,
    /// Vehicle speed in m/s; drawn per run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub polyline: Vec<Point>,
    /// Arc length at each vertex.
    pub cumulative: Vec<f64>,
    pub spacing: f64,
    pub speed: Option<f64>,
    /// Dense indices of the segment's lights, in arc-length order.
    pub lights: Vec<usize>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("at least two vertices")
    }

    /// Point at arc length `s` from the first vertex.
    pub fn point_at(&self, s: f64) -> Point {
        let k = self
            .cumulative
            .windows(2)
            .position(|w| s <= w[1])
            .unwrap_or(self.cumulative.len() - 2);
        let (a, b) = (self.polyline[k], self.polyline[k + 1]);
        let len = self.cumulative[k + 1] - self.cumulative[k];
        let f = if len > 0.0 { (s - self.cumulative[k]) / len } else { 0.0 };
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    }

    pub fn start(&self) -> Point {
        self.polyline[0]
    }

    pub fn end(&self) -> Point {
        *self.polyline.last().expect("at least two vertices")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Light {
    pub id: NodeId,
    pub position: Point,
    /// Ground-truth sector.
    pub segment: usize,
    /// Arc length along the segment.
    pub offset: f64,
}

/// Which end of a segment touches a junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Start,
    Finish,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub position: Point,
    pub incident: Vec<(usize, End)>,
}

impl Junction {
    /// A dead end where routes begin.
    pub fn is_terminal(&self) -> bool {
        self.incident.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub segments: Vec<Segment>,
    pub lights: Vec<Light>,
    pub junctions: Vec<Junction>,
}

impl RoadNetwork {
    pub fn node_index(&self) -> NodeIndex {
        NodeIndex::new(self.lights.iter().map(|l| l.id).collect()).expect("ids are sequential")
    }

    /// Junction touching the given end of a segment.
    pub fn junction_at(&self, segment: usize, end: End) -> usize {
        self.junctions
            .iter()
            .position(|j| j.incident.contains(&(segment, end)))
            .expect("every segment end has a junction")
    }

    /// Sector label of every light.
    pub fn sectors(&self) -> Vec<usize> {
        self.lights.iter().map(|l| l.segment).collect()
    }
}

/// Places lights every `spacing` meters from `inset_start` up to
/// `length - inset_end` on each segment, numbering them consecutively.
pub fn build_network(specs: &[SegmentSpec], default_spacing: f64) -> Result<RoadNetwork> {
    if specs.is_empty() {
        return Err(Error::Scenario("no segments".into()));
    }
    let mut segments = Vec::with_capacity(specs.len());
    let mut lights = Vec::new();
    for (sid, spec) in specs.iter().enumerate() {
        if spec.points.len() < 2 {
            return Err(Error::Scenario(format!("segment {sid}: needs at least two points")));
        }
        let spacing = spec.spacing.unwrap_or(default_spacing);
        if !(spacing > 0.0) {
            return Err(Error::Scenario(format!("segment {sid}: spacing must be positive")));
        }
        if spec.inset_start < 0.0 || spec.inset_end < 0.0 {
            return Err(Error::Scenario(format!("segment {sid}: insets must be non-negative")));
        }
        if let Some(v) = spec.speed {
            if !(v > 0.0) {
                return Err(Error::Scenario(format!("segment {sid}: speed must be positive")));
            }
        }
        let mut cumulative = vec![0.0];
        for w in spec.points.windows(2) {
            let next = cumulative.last().unwrap() + distance(w[0], w[1]);
            cumulative.push(next);
        }
        let mut segment = Segment {
            polyline: spec.points.clone(),
            cumulative,
            spacing,
            speed: spec.speed,
            lights: Vec::new(),
        };
        let last = segment.length() - spec.inset_end;
        let usable = last - spec.inset_start;
        if usable < 2.0 * spacing - 1e-9 {
            return Err(Error::Scenario(format!(
                "segment {sid}: usable length {usable:.1} m is shorter than twice the spacing {spacing} m"
            )));
        }
        let count = ((usable + 1e-9) / spacing).floor() as usize + 1;
        for k in 0..count {
            let offset = spec.inset_start + k as f64 * spacing;
            segment.lights.push(lights.len());
            lights.push(Light {
                id: NodeId(lights.len() as u32),
                position: segment.point_at(offset),
                segment: sid,
                offset,
            });
        }
        segments.push(segment);
    }

    let mut junctions: Vec<Junction> = Vec::new();
    for (sid, seg) in segments.iter().enumerate() {
        for (end, p) in [(End::Start, seg.start()), (End::Finish, seg.end())] {
            match junctions
                .iter_mut()
                .find(|j| distance(j.position, p) < JUNCTION_EPS)
            {
                Some(j) => j.incident.push((sid, end)),
                None => junctions.push(Junction {
                    position: p,
                    incident: vec![(sid, end)],
                }),
            }
        }
    }
    Ok(RoadNetwork {
        segments,
        lights,
        junctions,
    })
}
