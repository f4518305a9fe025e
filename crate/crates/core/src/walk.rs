//! Vertex-covering walks on cover graphs.

use serde::Serialize;

use crate::covers::CoverGraph;
use crate::error::{Error, Result};

/// A sequence of vertices visiting every vertex of a graph, consecutive
/// entries equal or adjacent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Walk {
    pub sequence: Vec<usize>,
}

impl Walk {
    /// Number of segments `N` (one less than the sequence length).
    pub fn segments(&self) -> usize {
        self.sequence.len().saturating_sub(1)
    }

    /// Checks the walk against `graph`: coverage, adjacency, length bound.
    pub fn is_valid_for(&self, graph: &CoverGraph) -> bool {
        let n = graph.len();
        if self.sequence.is_empty() || self.sequence.iter().any(|&v| v >= n) {
            return false;
        }
        let mut seen = vec![false; n];
        for &v in &self.sequence {
            seen[v] = true;
        }
        let adjacent = self
            .sequence
            .windows(2)
            .all(|w| w[0] == w[1] || graph.has_edge(w[0], w[1]));
        seen.into_iter().all(|s| s) && adjacent && self.segments() <= (2 * n).saturating_sub(2)
    }
}

/// Euler tour of a depth-first spanning tree rooted at `start`, neighbors in
/// index order, with the trailing return path dropped.
pub fn covering_walk(graph: &CoverGraph, start: usize) -> Result<Walk> {
    let n = graph.len();
    if start >= n {
        return Err(Error::InvalidInput(format!("walk start {start} out of range for {n} vertices")));
    }
    let components = graph.components();
    if components != 1 {
        return Err(Error::DisconnectedGraph { components });
    }
    let mut visited = vec![false; n];
    let mut sequence = vec![start];
    let mut last_new = 0;
    visited[start] = true;
    // (vertex, position in its neighbor list)
    let mut stack = vec![(start, 0usize)];
    while let Some(&(v, next)) = stack.last() {
        let ns = graph.neighbors(v);
        match (next..ns.len()).find(|&k| !visited[ns[k]]) {
            Some(k) => {
                if let Some(top) = stack.last_mut() {
                    top.1 = k + 1;
                }
                let u = ns[k];
                visited[u] = true;
                sequence.push(u);
                last_new = sequence.len() - 1;
                stack.push((u, 0));
            }
            None => {
                stack.pop();
                if let Some(&(parent, _)) = stack.last() {
                    sequence.push(parent);
                }
            }
        }
    }
    sequence.truncate(last_new + 1);
    Ok(Walk { sequence })
}
