//! Exact transportation solve: minimum-cost maximum flow on the bipartite
//! facility/demand graph via successive shortest paths with potentials.
//!
//! Used as the inner assignment routine of both solvers: given a set of open
//! facilities, it finds the cost-minimal split of divisible demands subject
//! to capacities, serving as much volume as possible.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Arc in the residual graph.
#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    rev: usize,
    cap: f64,
    cost: f64,
}

struct FlowNet {
    adj: Vec<Vec<Arc>>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet {
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Arc {
            to,
            rev: rev_from,
            cap,
            cost,
        });
        self.adj[to].push(Arc {
            to: from,
            rev: rev_to,
            cap: 0.0,
            cost: -cost,
        });
    }
}

/// Ordered f64 key for the Dijkstra heap.
#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

const EPS: f64 = 1e-9;

/// Result of a transportation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    /// Flow per (facility, demand) pair, only pairs with positive flow.
    pub assignment: Vec<(usize, usize, f64)>,
    /// Served volume per demand.
    pub served: Vec<f64>,
    /// Total assignment cost (sum of cost * flow).
    pub cost: f64,
    /// Whether every demand is fully served.
    pub fully_served: bool,
}

/// Solve min-cost assignment of `volumes` to `capacities` with per-pair
/// `costs` (a non-finite cost marks an unusable pair). Serves the maximum
/// possible volume; among maximum assignments the cost is minimal.
pub fn solve_transport(
    costs: &[Vec<f64>],
    capacities: &[f64],
    volumes: &[f64],
) -> TransportSolution {
    let m = capacities.len();
    let n = volumes.len();
    debug_assert_eq!(costs.len(), m);

    let source = m + n;
    let sink = m + n + 1;
    let mut net = FlowNet::new(m + n + 2);
    for (i, &cap) in capacities.iter().enumerate() {
        if cap > EPS {
            net.add_edge(source, i, cap, 0.0);
        }
    }
    let total_volume: f64 = volumes.iter().sum();
    for (j, &vol) in volumes.iter().enumerate() {
        if vol > EPS {
            net.add_edge(m + j, sink, vol, 0.0);
        }
    }
    for (i, row) in costs.iter().enumerate() {
        debug_assert_eq!(row.len(), n);
        for (j, &c) in row.iter().enumerate() {
            if c.is_finite() && capacities[i] > EPS && volumes[j] > EPS {
                net.add_edge(i, m + j, total_volume + 1.0, c);
            }
        }
    }

    let node_count = m + n + 2;
    let mut potential = vec![0.0f64; node_count];
    let mut dist = vec![f64::INFINITY; node_count];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; node_count];
    let mut total_cost = 0.0;

    loop {
        // Dijkstra on reduced costs.
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        pred.iter_mut().for_each(|p| *p = None);
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Key(0.0, source)));
        while let Some(Reverse(Key(d, u))) = heap.pop() {
            if d > dist[u] + EPS {
                continue;
            }
            for (idx, arc) in net.adj[u].iter().enumerate() {
                if arc.cap <= EPS {
                    continue;
                }
                let reduced = arc.cost + potential[u] - potential[arc.to];
                let nd = d + reduced;
                if nd + EPS < dist[arc.to] {
                    dist[arc.to] = nd;
                    pred[arc.to] = Some((u, idx));
                    heap.push(Reverse(Key(nd, arc.to)));
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        for v in 0..node_count {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        // Bottleneck along the path.
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while let Some((u, idx)) = pred[v] {
            bottleneck = bottleneck.min(net.adj[u][idx].cap);
            v = u;
        }
        if bottleneck.is_nan() || bottleneck <= EPS {
            break;
        }
        let mut v = sink;
        while let Some((u, idx)) = pred[v] {
            let rev = net.adj[u][idx].rev;
            net.adj[u][idx].cap -= bottleneck;
            let cost = net.adj[u][idx].cost;
            net.adj[v][rev].cap += bottleneck;
            total_cost += cost * bottleneck;
            v = u;
        }
    }

    // Extract facility -> demand flows from the reverse arcs.
    let mut assignment = Vec::new();
    let mut served = vec![0.0; n];
    for (j, served_j) in served.iter_mut().enumerate() {
        for arc in &net.adj[m + j] {
            // Reverse arcs toward facilities hold the shipped amount.
            if arc.to < m && arc.cap > EPS {
                assignment.push((arc.to, j, arc.cap));
                *served_j += arc.cap;
            }
        }
    }
    assignment.sort_by_key(|a| (a.0, a.1));
    let fully_served = served
        .iter()
        .zip(volumes)
        .all(|(s, v)| (s - v).abs() <= 1e-6 * v.max(1.0));
    TransportSolution {
        assignment,
        served,
        cost: total_cost,
        fully_served,
    }
}
