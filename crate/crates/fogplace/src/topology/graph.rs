//! Simple undirected graph over integer vertex ids.

use std::collections::{BTreeMap, BTreeSet};

/// Undirected simple graph. Vertices are explicit so isolated vertices are
/// representable; adjacency is kept ordered for deterministic iteration.
#[derive(Debug, Clone, Default)]
pub struct UndirectedGraph {
    adj: BTreeMap<u32, BTreeSet<u32>>,
}

impl UndirectedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Complete graph over the given vertices.
    pub fn complete(vertices: &[u32]) -> Self {
        let mut g = Self::new();
        for &v in vertices {
            g.add_vertex(v);
        }
        for (i, &a) in vertices.iter().enumerate() {
            for &b in &vertices[i + 1..] {
                g.add_edge(a, b);
            }
        }
        g
    }

    pub fn add_vertex(&mut self, v: u32) {
        self.adj.entry(v).or_default();
    }

    /// Inserts an undirected edge; self-loops are ignored.
    pub fn add_edge(&mut self, a: u32, b: u32) {
        if a == b {
            return;
        }
        self.adj.entry(a).or_default().insert(b);
        self.adj.entry(b).or_default().insert(a);
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.adj.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn vertices(&self) -> impl Iterator<Item = u32> + '_ {
        self.adj.keys().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.adj.get(&v).into_iter().flat_map(|n| n.iter().copied())
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj.get(&v).map_or(0, |n| n.len())
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Edges as (low, high) pairs in ascending order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (&v, ns) in &self.adj {
            for &w in ns {
                if v < w {
                    out.push((v, w));
                }
            }
        }
        out
    }
}
