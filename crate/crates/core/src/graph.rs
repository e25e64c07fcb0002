//! Undirected simple graph over nodes `0..n`.

use crate::error::{invalid, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![BTreeSet::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    /// Adds `u–v`; self-loops are rejected, duplicates are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        let n = self.adj.len();
        if u >= n || v >= n {
            return Err(invalid(format!("edge ({u},{v}) outside 0..{n}")));
        }
        if u == v {
            return Err(invalid(format!("self-loop at {u}")));
        }
        self.adj[u].insert(v);
        self.adj[v].insert(u);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        let had = self.adj[u].remove(&v);
        self.adj[v].remove(&u);
        had
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    pub fn neighbors(&self, u: usize) -> &BTreeSet<usize> {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    /// Removes every edge incident to `u`; the node id stays valid.
    pub fn isolate(&mut self, u: usize) {
        let nbrs: Vec<usize> = self.adj[u].iter().copied().collect();
        for v in nbrs {
            self.adj[v].remove(&u);
        }
        self.adj[u].clear();
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, nb) in self.adj.iter().enumerate() {
            for &v in nb.range(u + 1..) {
                out.push((u, v));
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.adj.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Erdős–Rényi G(n, p).
    pub fn erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Graph::new(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    g.adj[u].insert(v);
                    g.adj[v].insert(u);
                }
            }
        }
        g
    }

    /// G(n, p) resampled until connected.
    pub fn connected_erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Self {
        loop {
            let g = Graph::erdos_renyi(n, p, rng);
            if g.is_connected() {
                return g;
            }
        }
    }

    /// Parses `u v` lines; blank lines and `#` comments are skipped.
    /// Node count is one past the largest id unless `n` is given.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_id = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| invalid(format!("line {}: expected `u v`", lineno + 1)))?
                    .parse::<usize>()
                    .map_err(|e| invalid(format!("line {}: {e}", lineno + 1)))
            };
            let (u, v) = (next()?, next()?);
            max_id = Some(max_id.unwrap_or(0).max(u).max(v));
            edges.push((u, v));
        }
        let n = n.unwrap_or(max_id.map_or(0, |m| m + 1));
        Graph::from_edges(n, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges().iter().map(|(u, v)| format!("{u} {v}\n")).collect()
    }
}
