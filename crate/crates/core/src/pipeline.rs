//! Glue between the stages: records to graph to partition.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{evolve, Chromosome, GAConfig, GaResult};
use crate::graph::{NodeId, NodeIndex};
use crate::ingest::{ingest, AssociationRecord, Ingested, Symmetrization};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub ga: GAConfig,
    pub symmetrization: Symmetrization,
}

#[derive(Debug, Clone)]
pub struct Clustered {
    pub ingested: Ingested,
    pub result: GaResult,
}

/// Ingests records over a fixed node registry and runs the GA.
pub fn cluster_records(records: &[AssociationRecord], nodes: &NodeIndex, cfg: &ClusterConfig) -> Result<Clustered> {
    let ingested = ingest(records, nodes, cfg.symmetrization);
    if ingested.rejected_unknown > 0 || ingested.rejected_clock > 0 {
        log::warn!(
            "skipped {} records with unknown nodes and {} with receiver time before sender time",
            ingested.rejected_unknown,
            ingested.rejected_clock
        );
    }
    let result = evolve(&ingested.graph, &ingested.symmetric_times(), &cfg.ga)?;
    Ok(Clustered { ingested, result })
}

/// Reads a `node,<column>` CSV into ids and labels, in file order. With
/// `column = None` any second column name is accepted.
pub fn read_labels_csv<R: Read>(reader: R, column: Option<&str>) -> Result<(Vec<NodeId>, Vec<usize>)> {
    let what = "label csv";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse(what, 1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "node" || column.is_some_and(|c| c != &headers[1]) {
        let expected = format!("node,{}", column.unwrap_or("<label>"));
        return Err(Error::parse(what, 1, format!("expected header `{expected}`")));
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(what, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let id: NodeId = row[0]
            .parse()
            .map_err(|_| Error::parse(what, line, format!("bad node id `{}`", &row[0])))?;
        let label: usize = row[1]
            .parse()
            .map_err(|_| Error::parse(what, line, format!("bad label `{}`", &row[1])))?;
        ids.push(id);
        labels.push(label);
    }
    Ok((ids, labels))
}

/// Reorders `(ids, labels)` onto `nodes`, failing if the node sets differ.
pub fn align_labels(nodes: &NodeIndex, ids: &[NodeId], labels: &[usize]) -> Result<Chromosome> {
    let mut out = vec![None; nodes.len()];
    let mut unknown = Vec::new();
    for (&id, &label) in ids.iter().zip(labels) {
        match nodes.index_of(id) {
            Some(i) if out[i].is_none() => out[i] = Some(label),
            Some(_) => return Err(Error::Mismatch(format!("node {id} listed twice"))),
            None => unknown.push(id),
        }
    }
    let missing: Vec<NodeId> = out
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_none())
        .map(|(i, _)| nodes.id(i))
        .collect();
    if !unknown.is_empty() || !missing.is_empty() {
        return Err(Error::Mismatch(format!(
            "{} nodes only in the first set {}, {} only in the second {}",
            missing.len(),
            preview(&missing),
            unknown.len(),
            preview(&unknown)
        )));
    }
    Ok(Chromosome::new(out.into_iter().map(|l| l.expect("checked")).collect()))
}

fn preview(ids: &[NodeId]) -> String {
    let shown: Vec<String> = ids.iter().take(5).map(|i| i.to_string()).collect();
    let more = if ids.len() > 5 { ", ..." } else { "" };
    format!("[{}{more}]", shown.join(", "))
}
