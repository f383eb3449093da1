//! Louvain community detection by modularity optimization.
//!
//! Two-phase scheme: local moving of single vertices to the neighbor
//! community with the best modularity gain, then aggregation of communities
//! into super-vertices, repeated until no gain remains. Vertex visit order is
//! shuffled from the caller's seed, so results are deterministic per seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::rng::rng_from_seed;
use crate::topology::graph::UndirectedGraph;

/// Internal weighted graph on dense indices; self-loop weights appear on the
/// diagonal and count twice toward a vertex's degree, as usual for modularity.
struct WeightedGraph {
    adj: Vec<BTreeMap<usize, f64>>,
    total_weight: f64, // m: sum of edge weights, self-loops counted once
}

impl WeightedGraph {
    fn degree(&self, v: usize) -> f64 {
        self.adj[v]
            .iter()
            .map(|(&w, &x)| if w == v { 2.0 * x } else { x })
            .sum()
    }
}

/// Modularity of a partition given as a community id per vertex.
fn modularity_dense(g: &WeightedGraph, community: &[usize]) -> f64 {
    let m = g.total_weight;
    if m <= 0.0 {
        return 0.0;
    }
    let n_comm = community.iter().max().map_or(0, |&c| c + 1);
    let mut internal = vec![0.0; n_comm]; // doubled internal weight
    let mut total_deg = vec![0.0; n_comm];
    for v in 0..g.adj.len() {
        total_deg[community[v]] += g.degree(v);
        for (&w, &x) in &g.adj[v] {
            if community[w] == community[v] {
                internal[community[v]] += if w == v { 2.0 * x } else { x };
            }
        }
    }
    let two_m = 2.0 * m;
    (0..n_comm)
        .map(|c| internal[c] / two_m - (total_deg[c] / two_m).powi(2))
        .sum()
}

/// Modularity of a partition of `graph` into vertex-id groups.
pub fn modularity(graph: &UndirectedGraph, partition: &[Vec<u32>]) -> f64 {
    let (g, index) = to_weighted(graph);
    let mut community = vec![0usize; g.adj.len()];
    for (c, group) in partition.iter().enumerate() {
        for v in group {
            community[index[v]] = c;
        }
    }
    modularity_dense(&g, &community)
}

fn to_weighted(graph: &UndirectedGraph) -> (WeightedGraph, BTreeMap<u32, usize>) {
    let ids: Vec<u32> = graph.vertices().collect();
    let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = vec![BTreeMap::new(); ids.len()];
    let mut total = 0.0;
    for (a, b) in graph.edges() {
        adj[index[&a]].insert(index[&b], 1.0);
        adj[index[&b]].insert(index[&a], 1.0);
        total += 1.0;
    }
    (
        WeightedGraph {
            adj,
            total_weight: total,
        },
        index,
    )
}

/// One pass of local moving. Returns the community assignment and whether any
/// vertex moved.
fn local_moving(g: &WeightedGraph, order: &[usize]) -> (Vec<usize>, bool) {
    let n = g.adj.len();
    let mut community: Vec<usize> = (0..n).collect();
    let degree: Vec<f64> = (0..n).map(|v| g.degree(v)).collect();
    let mut comm_total: Vec<f64> = degree.clone();
    let m = g.total_weight;
    let mut moved_any = false;

    if m <= 0.0 {
        return (community, false);
    }

    loop {
        let mut moved = false;
        for &v in order {
            let cur = community[v];
            // Weight from v to each neighboring community (self-loops excluded).
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for (&w, &x) in &g.adj[v] {
                if w != v {
                    *links.entry(community[w]).or_insert(0.0) += x;
                }
            }
            comm_total[cur] -= degree[v];
            let to_cur = links.get(&cur).copied().unwrap_or(0.0);

            // Gain of joining community c relative to staying isolated:
            //   k_{v,c}/m - k_v * tot_c / (2 m^2)
            let mut best = (
                cur,
                to_cur / m - degree[v] * comm_total[cur] / (2.0 * m * m),
            );
            for (&c, &k_vc) in &links {
                if c == cur {
                    continue;
                }
                let gain = k_vc / m - degree[v] * comm_total[c] / (2.0 * m * m);
                let better =
                    gain > best.1 + 1e-12 || ((gain - best.1).abs() <= 1e-12 && c < best.0);
                if better {
                    best = (c, gain);
                }
            }
            comm_total[best.0] += degree[v];
            if best.0 != cur {
                community[v] = best.0;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (community, moved_any)
}

/// Collapse communities into super-vertices; returns the aggregated graph and
/// the mapping community-id -> dense super-vertex index.
fn aggregate(g: &WeightedGraph, community: &[usize]) -> (WeightedGraph, BTreeMap<usize, usize>) {
    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in community {
        let next = renumber.len();
        renumber.entry(c).or_insert(next);
    }
    let k = renumber.len();
    let mut adj = vec![BTreeMap::new(); k];
    for v in 0..g.adj.len() {
        let cv = renumber[&community[v]];
        for (&w, &x) in &g.adj[v] {
            let cw = renumber[&community[w]];
            if w == v {
                *adj[cv].entry(cv).or_insert(0.0) += x;
            } else if w > v {
                if cv == cw {
                    *adj[cv].entry(cv).or_insert(0.0) += x;
                } else {
                    *adj[cv].entry(cw).or_insert(0.0) += x;
                    *adj[cw].entry(cv).or_insert(0.0) += x;
                }
            }
        }
    }
    (
        WeightedGraph {
            adj,
            total_weight: g.total_weight,
        },
        renumber,
    )
}

/// Detect communities in `graph`. Every vertex lands in exactly one
/// community; isolated vertices form singletons. The returned partition's
/// modularity is at least that of both trivial partitions (all-singletons and
/// all-in-one).
pub fn detect_communities(graph: &UndirectedGraph, seed: u64) -> Vec<Vec<u32>> {
    let ids: Vec<u32> = graph.vertices().collect();
    if ids.is_empty() {
        return Vec::new();
    }
    let (mut g, index) = to_weighted(graph);
    let n = ids.len();

    // membership[v] = set of original dense indices merged into super-vertex v
    let mut membership: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut rng = rng_from_seed(seed);

    loop {
        let mut order: Vec<usize> = (0..g.adj.len()).collect();
        order.shuffle(&mut rng);
        let (community, moved) = local_moving(&g, &order);
        let distinct = {
            let mut c = community.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        if !moved || distinct == g.adj.len() {
            break;
        }
        let (next, renumber) = aggregate(&g, &community);
        let mut next_membership: Vec<Vec<usize>> = vec![Vec::new(); renumber.len()];
        for (v, &c) in community.iter().enumerate() {
            next_membership[renumber[&c]].extend_from_slice(&membership[v]);
        }
        membership = next_membership;
        g = next;
    }

    let rev: BTreeMap<usize, u32> = index.iter().map(|(&id, &i)| (i, id)).collect();
    let mut partition: Vec<Vec<u32>> = membership
        .into_iter()
        .map(|group| {
            let mut ids: Vec<u32> = group.into_iter().map(|i| rev[&i]).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    partition.sort_by_key(|g| g[0]);

    // Guard the all-in-one bound: greedy moving can stall above singletons but
    // below the single-community partition on graphs like cliques only if the
    // move loop exits early; take whichever scores higher.
    let q = modularity(graph, &partition);
    let all_in_one = vec![graph.vertices().collect::<Vec<u32>>()];
    if partition.len() > 1 && modularity(graph, &all_in_one) > q + 1e-12 {
        return all_in_one;
    }
    partition
}

/// Best bipartition by modularity, used to force progress when a level of the
/// hierarchy collapses into a single community but still holds more nodes
/// than the stopping criterion allows.
///
/// Exhaustive over all 2^(n-1)-1 splits up to 16 vertices; for larger inputs
/// it evaluates single-vertex peels, which are optimal for the complete
/// graphs this is applied to.
pub fn best_bipartition(graph: &UndirectedGraph) -> Vec<Vec<u32>> {
    let ids: Vec<u32> = graph.vertices().collect();
    let n = ids.len();
    assert!(n >= 2, "bipartition needs at least two vertices");

    let mut best: Option<(f64, Vec<Vec<u32>>)> = None;
    let mut consider = |mask: u64| {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, &v) in ids.iter().enumerate() {
            if mask & (1 << i) != 0 {
                a.push(v);
            } else {
                b.push(v);
            }
        }
        if a.is_empty() || b.is_empty() {
            return;
        }
        if b[0] < a[0] {
            std::mem::swap(&mut a, &mut b);
        }
        let part = vec![a, b];
        let q = modularity(graph, &part);
        let better = match &best {
            None => true,
            Some((bq, bp)) => q > bq + 1e-12 || (q > bq - 1e-12 && part < *bp),
        };
        if better {
            best = Some((q, part));
        }
    };

    if n <= 16 {
        // Fix vertex 0 on side B to halve the space.
        for mask in 1..(1u64 << (n - 1)) {
            consider(mask << 1);
        }
    } else {
        for i in 0..n {
            consider(1u64 << i);
        }
    }
    best.expect("nonempty split exists").1
}
