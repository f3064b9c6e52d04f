//! Plain-text dumps of the roadmap and its partition.

use std::io::{BufRead, Write};

use anyhow::{bail, Context, Result};
use explore_core::community::{CommunityId, Partition};
use explore_core::roadmap::{NodeId, RoadmapGraph};

/// One `a b length` line per undirected edge, `a < b`.
pub fn write_edge_list(graph: &RoadmapGraph, mut out: impl Write) -> Result<()> {
    writeln!(out, "# nodes {}", graph.len())?;
    for (a, b) in graph.edges() {
        writeln!(out, "{} {} {}", a.0, b.0, graph.edge_length(a, b))?;
    }
    Ok(())
}

/// One `node community` line per assigned node.
pub fn write_partition(partition: &Partition, mut out: impl Write) -> Result<()> {
    for (i, c) in partition.assignment().iter().enumerate() {
        if let Some(c) = c {
            writeln!(out, "{} {}", i, c.0)?;
        }
    }
    Ok(())
}

fn fields(line: &str) -> Option<Vec<&str>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        None
    } else {
        Some(line.split_whitespace().collect())
    }
}

pub fn read_edge_list(input: impl BufRead) -> Result<Vec<(NodeId, NodeId, f64)>> {
    let mut edges = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let Some(f) = fields(&line) else { continue };
        if f.len() != 3 {
            bail!("line {}: expected `a b length`", n + 1);
        }
        let ctx = || format!("line {}", n + 1);
        edges.push((
            NodeId(f[0].parse().with_context(ctx)?),
            NodeId(f[1].parse().with_context(ctx)?),
            f[2].parse().with_context(ctx)?,
        ));
    }
    Ok(edges)
}

pub fn read_partition(input: impl BufRead) -> Result<Vec<(NodeId, CommunityId)>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let Some(f) = fields(&line) else { continue };
        if f.len() != 2 {
            bail!("line {}: expected `node community`", n + 1);
        }
        let ctx = || format!("line {}", n + 1);
        out.push((
            NodeId(f[0].parse().with_context(ctx)?),
            CommunityId(f[1].parse().with_context(ctx)?),
        ));
    }
    Ok(out)
}
