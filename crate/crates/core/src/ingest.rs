//! From association records to the count, adjacency and time matrices.
//!
//! A record `{receiver, recv_time, sender, send_time}` says that `receiver`
//! detected a traffic element after having cached an advertisement from
//! `sender`. Counting records per ordered pair gives the count matrix `C`
//! (`c_ij` = records with receiver `i` and sender `j`). Dividing each row by
//! its maximum gives the adjacency matrix `P`, and the mean of
//! `recv_time - send_time` per ordered pair gives the time matrix `T`.
//!
//! Accumulation is a commutative monoid: shards can be accumulated
//! independently and [`Accumulator::merge`]d in any order.

use std::io::{Read, Write};

use log::warn;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeIndex, ProbabilisticGraph};

/// One association event as reported by a receiving light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub receiver: NodeId,
    #[serde(rename = "recv_time")]
    pub receiver_time: f64,
    pub sender: NodeId,
    #[serde(rename = "send_time")]
    pub sender_time: f64,
}

impl AssociationRecord {
    pub fn interval(&self) -> f64 {
        self.receiver_time - self.sender_time
    }
}

/// How the two directed probabilities of a pair become one undirected one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetrization {
    #[default]
    Max,
    Mean,
}

/// `c_ij` = number of records with receiver `i` and sender `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix(pub Array2<u64>);

/// Row-max normalized counts: `p_ij = c_ij / max_k c_ik`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix(pub Array2<f64>);

/// Raw `recv_time - send_time` observations per ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalLists {
    n: usize,
    lists: Vec<Vec<f64>>,
}

impl IntervalLists {
    pub fn new(n: usize) -> Self {
        IntervalLists {
            n,
            lists: vec![Vec::new(); n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.lists[i * self.n + j]
    }

    fn push(&mut self, i: usize, j: usize, dt: f64) {
        self.lists[i * self.n + j].push(dt);
    }
}

/// Mean interval per pair in seconds; unobserved pairs are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMatrix(pub Array2<Option<f64>>);

impl TimeMatrix {
    pub fn absent(n: usize) -> Self {
        TimeMatrix(Array2::from_elem((n, n), None))
    }

    /// Symmetric matrix from an upper-triangle list of `(i, j, t)`.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Self {
        let mut t = Self::absent(n);
        for &(i, j, v) in pairs {
            t.0[(i, j)] = Some(v);
            t.0[(j, i)] = Some(v);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.0[(i, j)]
    }

    /// Undirected view: the mean of whichever directed entries are present.
    pub fn symmetrized(&self) -> TimeMatrix {
        let n = self.len();
        let mut out = Self::absent(n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                out.0[(i, j)] = match (self.0[(i, j)], self.0[(j, i)]) {
                    (Some(a), Some(b)) => Some(0.5 * (a + b)),
                    (Some(a), None) | (None, Some(a)) => Some(a),
                    (None, None) => None,
                };
            }
        }
        out
    }
}

/// Running totals over a record stream.
#[derive(Debug, Clone)]
pub struct Accumulator {
    nodes: NodeIndex,
    counts: Array2<u64>,
    intervals: IntervalLists,
    rejected_unknown: usize,
    rejected_clock: usize,
}

impl Accumulator {
    pub fn new(nodes: NodeIndex) -> Self {
        let n = nodes.len();
        Accumulator {
            nodes,
            counts: Array2::zeros((n, n)),
            intervals: IntervalLists::new(n),
            rejected_unknown: 0,
            rejected_clock: 0,
        }
    }

    /// Adds one record. Records naming unknown nodes, self-pairs, or a
    /// receive time before the send time are skipped and counted.
    pub fn push(&mut self, record: &AssociationRecord) {
        let (Some(i), Some(j)) = (
            self.nodes.index_of(record.receiver),
            self.nodes.index_of(record.sender),
        ) else {
            warn!(
                "skipping record with unknown node ({} <- {})",
                record.receiver, record.sender
            );
            self.rejected_unknown += 1;
            return;
        };
        let dt = record.interval();
        if i == j || dt.is_nan() || dt < 0.0 {
            warn!(
                "skipping anomalous record {} <- {} (dt = {dt})",
                record.receiver, record.sender
            );
            self.rejected_clock += 1;
            return;
        }
        self.counts[(i, j)] += 1;
        self.intervals.push(i, j, dt);
    }

    /// Elementwise sum of counts and concatenation of interval lists.
    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        debug_assert_eq!(self.nodes, other.nodes);
        self.counts += &other.counts;
        for (mine, theirs) in self.intervals.lists.iter_mut().zip(other.intervals.lists) {
            mine.extend(theirs);
        }
        self.rejected_unknown += other.rejected_unknown;
        self.rejected_clock += other.rejected_clock;
        self
    }

    /// Records skipped because a node was not in the registry.
    pub fn rejected_unknown(&self) -> usize {
        self.rejected_unknown
    }

    /// Records skipped because `recv_time < send_time` (or receiver == sender).
    pub fn rejected_clock(&self) -> usize {
        self.rejected_clock
    }

    pub fn nodes(&self) -> &NodeIndex {
        &self.nodes
    }

    pub fn counts(&self) -> CountMatrix {
        CountMatrix(self.counts.clone())
    }

    pub fn intervals(&self) -> &IntervalLists {
        &self.intervals
    }

    pub fn into_parts(self) -> (CountMatrix, IntervalLists) {
        (CountMatrix(self.counts), self.intervals)
    }
}

/// Sequential accumulation of a record stream.
pub fn accumulate<'a>(
    records: impl IntoIterator<Item = &'a AssociationRecord>,
    nodes: &NodeIndex,
) -> Accumulator {
    let mut acc = Accumulator::new(nodes.clone());
    for r in records {
        acc.push(r);
    }
    acc
}

/// Sharded accumulation; equal to [`accumulate`] up to interval-list order.
pub fn accumulate_par(records: &[AssociationRecord], nodes: &NodeIndex) -> Accumulator {
    const SHARD: usize = 4096;
    records
        .par_chunks(SHARD)
        .map(|chunk| accumulate(chunk, nodes))
        .reduce(|| Accumulator::new(nodes.clone()), Accumulator::merge)
}

/// Divides every row by its maximum; all-zero rows stay zero.
pub fn normalize(c: &CountMatrix) -> AdjacencyMatrix {
    let mut p = Array2::zeros(c.0.raw_dim());
    for (i, row) in c.0.rows().into_iter().enumerate() {
        let max = row.iter().copied().max().unwrap_or(0);
        if max == 0 {
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            p[(i, j)] = v as f64 / max as f64;
        }
    }
    AdjacencyMatrix(p)
}

/// Arithmetic mean per ordered pair. Values are summed in sorted order so
/// the result does not depend on record order.
pub fn mean_intervals(lists: &IntervalLists) -> TimeMatrix {
    let n = lists.n;
    let mut t = TimeMatrix::absent(n);
    for i in 0..n {
        for j in 0..n {
            let obs = lists.get(i, j);
            if obs.is_empty() {
                continue;
            }
            let mut sorted = obs.to_vec();
            sorted.sort_by(f64::total_cmp);
            t.0[(i, j)] = Some(sorted.iter().sum::<f64>() / sorted.len() as f64);
        }
    }
    t
}

/// Undirected probabilistic graph over `nodes` from a directed adjacency matrix.
pub fn build_graph(p: &AdjacencyMatrix, nodes: &NodeIndex, sym: Symmetrization) -> ProbabilisticGraph {
    let n = nodes.len();
    let mut g = ProbabilisticGraph::new(nodes.clone());
    for u in 0..n {
        for v in (u + 1)..n {
            let (a, b) = (p.0[(u, v)], p.0[(v, u)]);
            let prob = match sym {
                Symmetrization::Max => a.max(b),
                Symmetrization::Mean => 0.5 * (a + b),
            };
            if prob > 0.0 {
                g.insert_edge(u, v, prob.min(1.0))
                    .expect("indices in range and probability in (0, 1]");
            }
        }
    }
    g
}

/// Everything the clustering stage needs from a record stream.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub counts: CountMatrix,
    pub adjacency: AdjacencyMatrix,
    /// Directed mean intervals, as observed.
    pub times: TimeMatrix,
    pub graph: ProbabilisticGraph,
    pub rejected_unknown: usize,
    pub rejected_clock: usize,
}

impl Ingested {
    /// Undirected time matrix used by the speed-consistency objective.
    pub fn symmetric_times(&self) -> TimeMatrix {
        self.times.symmetrized()
    }
}

pub fn ingest(records: &[AssociationRecord], nodes: &NodeIndex, sym: Symmetrization) -> Ingested {
    let acc = accumulate_par(records, nodes);
    let rejected_unknown = acc.rejected_unknown();
    let rejected_clock = acc.rejected_clock();
    let (counts, intervals) = acc.into_parts();
    let adjacency = normalize(&counts);
    let times = mean_intervals(&intervals);
    let graph = build_graph(&adjacency, nodes, sym);
    Ingested {
        counts,
        adjacency,
        times,
        graph,
        rejected_unknown,
        rejected_clock,
    }
}

/// Registry made of every node id mentioned by the records, ascending.
pub fn registry_from_records(records: &[AssociationRecord]) -> NodeIndex {
    let mut ids: Vec<NodeId> = records.iter().flat_map(|r| [r.receiver, r.sender]).collect();
    ids.sort_unstable();
    ids.dedup();
    NodeIndex::new(ids).expect("deduplicated")
}

/// Reads the `receiver,recv_time,sender,send_time` CSV format.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<AssociationRecord>> {
    const WHAT: &str = "record csv";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(WHAT, 1, e.to_string()))?
        .clone();
    let expected = ["receiver", "recv_time", "sender", "send_time"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            WHAT,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<AssociationRecord>() {
        match row {
            Ok(r) => out.push(r),
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                return Err(Error::parse(WHAT, line, e.to_string()));
            }
        }
    }
    Ok(out)
}

pub fn write_records<W: Write>(writer: W, records: &[AssociationRecord]) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()
}

/// Square matrix as CSV with node ids labelling rows and columns.
pub fn write_matrix_csv<W: Write>(
    mut writer: W,
    nodes: &NodeIndex,
    cell: impl Fn(usize, usize) -> String,
) -> std::io::Result<()> {
    let n = nodes.len();
    write!(writer, "node")?;
    for id in nodes.ids() {
        write!(writer, ",{id}")?;
    }
    writeln!(writer)?;
    for i in 0..n {
        write!(writer, "{}", nodes.id(i))?;
        for j in 0..n {
            write!(writer, ",{}", cell(i, j))?;
        }
        writeln!(writer)?;
    }
    Ok(())
}
