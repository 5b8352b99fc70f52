//! Graph exports for external tools: DOT, GEXF 1.2, and a plain edge CSV.
//!
//! Edges are the directed table entries above the threshold, written in
//! transmission direction: entry `d[i,j]` (the share of i's variance from
//! shocks to j) becomes an edge from j to i with weight `d[i,j]`. Weights are
//! written in full precision so the edge CSV round-trips exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fevd::ConnectednessTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFormat {
    Dot,
    Gexf,
    EdgeCsv,
}

pub fn export_graph(
    table: &ConnectednessTable,
    format: GraphFormat,
    threshold: f64,
) -> Result<String> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Input(format!(
            "edge threshold must be in [0,1), got {threshold}"
        )));
    }
    let edges = directed_edges(table, threshold);
    Ok(match format {
        GraphFormat::Dot => to_dot(table, &edges),
        GraphFormat::Gexf => to_gexf(table, &edges),
        GraphFormat::EdgeCsv => to_edge_csv(table, &edges),
    })
}

pub fn write_graph(
    table: &ConnectednessTable,
    format: GraphFormat,
    threshold: f64,
    path: &Path,
) -> Result<()> {
    let text = export_graph(table, format, threshold)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// (source index, target index, weight) triples: source transmits to target.
fn directed_edges(table: &ConnectednessTable, threshold: f64) -> Vec<(usize, usize, f64)> {
    let n = table.n_vars();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && table.d[[i, j]] > threshold {
                edges.push((j, i, table.d[[i, j]]));
            }
        }
    }
    edges
}

fn to_dot(table: &ConnectednessTable, edges: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("digraph connectedness {\n");
    for label in &table.labels {
        out.push_str(&format!("  \"{}\";\n", escape_dot(label)));
    }
    for &(source, target, weight) in edges {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [weight={weight}];\n",
            escape_dot(&table.labels[source]),
            escape_dot(&table.labels[target])
        ));
    }
    out.push_str("}\n");
    out
}

fn to_gexf(table: &ConnectednessTable, edges: &[(usize, usize, f64)]) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <gexf xmlns=\"http://www.gexf.net/1.2draft\" version=\"1.2\">\n\
         <graph defaultedgetype=\"directed\">\n<nodes>\n",
    );
    for (idx, label) in table.labels.iter().enumerate() {
        out.push_str(&format!(
            "<node id=\"{idx}\" label=\"{}\"/>\n",
            escape_xml(label)
        ));
    }
    out.push_str("</nodes>\n<edges>\n");
    for (edge_id, &(source, target, weight)) in edges.iter().enumerate() {
        out.push_str(&format!(
            "<edge id=\"{edge_id}\" source=\"{source}\" target=\"{target}\" weight=\"{weight}\"/>\n"
        ));
    }
    out.push_str("</edges>\n</graph>\n</gexf>\n");
    out
}

fn to_edge_csv(table: &ConnectednessTable, edges: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("source,target,weight\n");
    for &(source, target, weight) in edges {
        out.push_str(&format!(
            "{},{},{weight}\n",
            table.labels[source], table.labels[target]
        ));
    }
    out
}

/// Parse an edge CSV produced by [`export_graph`] back into
/// (source, target, weight) triples.
pub fn parse_edge_csv(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("source,target,weight") => {}
        other => {
            return Err(Error::Input(format!(
                "unexpected edge CSV header: {other:?}"
            )))
        }
    }
    let mut edges = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (source, target, weight) = (cells.next(), cells.next(), cells.next());
        match (source, target, weight, cells.next()) {
            (Some(s), Some(t), Some(w), None) => {
                let weight: f64 = w.parse().map_err(|_| {
                    Error::Input(format!("bad weight {w:?} on edge CSV line {}", idx + 2))
                })?;
                edges.push((s.to_string(), t.to_string(), weight));
            }
            _ => return Err(Error::Input(format!("malformed edge CSV line {}", idx + 2))),
        }
    }
    Ok(edges)
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}
