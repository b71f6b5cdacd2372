//! Text formats for graphs.
//!
//! Edge list: a `# d=<d> tau_max=<tau_max>` header, then one
//! `src_var,src_lag,dst_var,dst_lag` line per edge.
//! Adjacency CSV: `n x n` grid of 0/1 with `n = d(tau_max+1)`, rows are
//! sources, flat node indexing.

use std::fmt::Write as _;

use super::{EdgeSet, NodeId, NodeSpace, SummaryAdjacency};
use crate::error::{Error, Result};

pub fn write_edge_list(space: NodeSpace, edges: &EdgeSet) -> String {
    let mut out = format!("# d={} tau_max={}\n", space.d(), space.tau_max());
    for &(a, b) in edges {
        let (a, b) = (space.node(a), space.node(b));
        writeln!(out, "{},{},{},{}", a.var, a.lag, b.var, b.lag).unwrap();
    }
    out
}

/// `d` and `tau_max` from a `# d=3 tau_max=1` header line.
fn parse_header(line: &str) -> Option<NodeSpace> {
    let mut d = None;
    let mut tau = None;
    for field in line.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("d", v)) => d = v.parse().ok(),
            Some(("tau_max", v)) => tau = v.parse().ok(),
            _ => return None,
        }
    }
    NodeSpace::new(d?, tau?).ok()
}

/// Parse an edge list. The node space is taken from `space`, else from the
/// header, else the smallest one containing every listed node.
pub fn parse_edge_list(text: &str, space: Option<NodeSpace>) -> Result<(NodeSpace, EdgeSet)> {
    let mut pairs = Vec::new();
    let mut header = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            header = header.or_else(|| parse_header(line));
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<usize> = line
            .split(',')
            .map(|f| f.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        pairs.push((
            NodeId::new(fields[0], fields[1]),
            NodeId::new(fields[2], fields[3]),
        ));
    }
    let space = match space.or(header) {
        Some(s) => s,
        None => {
            let d = pairs
                .iter()
                .flat_map(|(a, b)| [a.var, b.var])
                .max()
                .map_or(1, |m| m + 1);
            let tau = pairs
                .iter()
                .flat_map(|(a, b)| [a.lag, b.lag])
                .max()
                .unwrap_or(0);
            NodeSpace::new(d, tau)?
        }
    };
    let mut edges = EdgeSet::new();
    for (a, b) in pairs {
        if !space.contains(a) || !space.contains(b) {
            return Err(Error::Parse(format!("edge {a} -> {b} outside node space")));
        }
        edges.insert((space.index(a), space.index(b)));
    }
    Ok((space, edges))
}

fn write_grid(n: usize, has: impl Fn(usize, usize) -> bool) -> String {
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<&str> = (0..n).map(|j| if has(i, j) { "1" } else { "0" }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_grid(text: &str, n: usize) -> Result<EdgeSet> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != n {
        return Err(Error::Parse(format!(
            "expected {n} rows, found {}",
            rows.len()
        )));
    }
    let mut edges = EdgeSet::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != n {
            return Err(Error::Parse(format!(
                "row {i}: expected {n} columns, found {}",
                cells.len()
            )));
        }
        for (j, cell) in cells.iter().enumerate() {
            match *cell {
                "0" => {}
                "1" => {
                    edges.insert((i, j));
                }
                other => return Err(Error::Parse(format!("row {i}: bad cell {other:?}"))),
            }
        }
    }
    Ok(edges)
}

pub fn write_adjacency_csv(space: NodeSpace, edges: &EdgeSet) -> String {
    write_grid(space.len(), |i, j| edges.contains(&(i, j)))
}

pub fn parse_adjacency_csv(text: &str, space: NodeSpace) -> Result<EdgeSet> {
    parse_grid(text, space.len())
}

pub fn write_summary_csv(summary: &SummaryAdjacency) -> String {
    write_grid(summary.d, |i, j| summary.edges.contains(&(i, j)))
}

pub fn parse_summary_csv(text: &str, d: usize) -> Result<SummaryAdjacency> {
    Ok(SummaryAdjacency {
        d,
        edges: parse_grid(text, d)?,
    })
}
