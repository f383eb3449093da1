//! Hierarchical cloud-fog environment construction.
//!
//! Starting from base-station coordinates, a proximity graph connects
//! stations within a radius, communities of that graph each get an upper-tier
//! node (a cloudlet), and the procedure repeats on the complete graph of each
//! new tier until at most `mu` groups remain, at which point a single root is
//! placed on top. Every added node sits at the centroid of its children.

pub mod graph;
pub mod louvain;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{centroid, project_latlon, Point};
use crate::rng::rng_from_seed;

use graph::UndirectedGraph;

/// A tier-0 access node serving a geographic region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: u32,
    /// Position in meters (planar projection).
    pub x: f64,
    pub y: f64,
    pub coverage_radius: f64,
}

impl BaseStation {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Hardware and network resources of a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeResources {
    pub mips: f64,
    pub storage_gb: f64,
    pub ram_gb: f64,
    pub up_mbps: f64,
    pub down_mbps: f64,
}

/// One node of the cloud-fog hierarchy. Tier 0 is a base station; tiers rise
/// toward the unique root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FogNode {
    pub id: u32,
    pub tier: u32,
    pub position: Point,
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    pub resources: Option<NodeResources>,
}

/// Latency model parameters. Hop entries are indexed by the lower tier of the
/// boundary they cross; processing entries by node tier. Tables deeper than
/// the topology reuse their last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyConfig {
    /// Propagation latency for crossing tier boundary k <-> k+1, in ms.
    pub hop_latency_ms: Vec<f64>,
    /// Base processing latency of a node at tier k, in ms.
    pub base_proc_ms: Vec<f64>,
    /// Multiplier applied to processing latency at full load.
    pub load_penalty: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            hop_latency_ms: vec![2.0, 8.0, 20.0, 45.0],
            base_proc_ms: vec![1.0, 5.0, 10.0, 50.0],
            load_penalty: 0.5,
        }
    }
}

fn table_at(table: &[f64], idx: usize) -> f64 {
    *table.get(idx).or(table.last()).unwrap_or(&0.0)
}

/// The tiered node graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<u32, FogNode>,
    tier_count: u32,
    latency_config: LatencyConfig,
}

impl Topology {
    pub fn nodes(&self) -> impl Iterator<Item = &FogNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: u32) -> Option<&FogNode> {
        self.nodes.get(&id)
    }

    pub fn tier_count(&self) -> u32 {
        self.tier_count
    }

    pub fn latency_config(&self) -> &LatencyConfig {
        &self.latency_config
    }

    pub fn set_latency_config(&mut self, config: LatencyConfig) {
        self.latency_config = config;
    }

    /// Node ids at a tier, ascending.
    pub fn tier_nodes(&self, tier: u32) -> Vec<u32> {
        self.nodes
            .values()
            .filter(|n| n.tier == tier)
            .map(|n| n.id)
            .collect()
    }

    /// Number of nodes per tier, indexed from tier 0.
    pub fn tier_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.tier_count as usize];
        for node in self.nodes.values() {
            sizes[node.tier as usize] += 1;
        }
        sizes
    }

    pub fn root_id(&self) -> u32 {
        self.nodes
            .values()
            .find(|n| n.parent.is_none())
            .map(|n| n.id)
            .expect("completed topology has a root")
    }

    /// Base-station (tier-0) ids; these double as region ids.
    pub fn station_ids(&self) -> Vec<u32> {
        self.tier_nodes(0)
    }

    /// Hops on the tree path between two nodes, as the list of tier
    /// boundaries crossed (lower tier of each boundary). Chains are at most
    /// tier_count long, so linear scans beat set lookups here.
    fn path_boundaries(&self, from: u32, to: u32) -> Result<Vec<u32>> {
        let chain = |mut id: u32| -> Vec<u32> {
            let mut out = vec![id];
            while let Some(p) = self.nodes[&id].parent {
                out.push(p);
                id = p;
            }
            out
        };
        if !self.nodes.contains_key(&from) {
            return Err(Error::Lookup(format!("unknown node {from}")));
        }
        if !self.nodes.contains_key(&to) {
            return Err(Error::Lookup(format!("unknown node {to}")));
        }
        let up_from = chain(from);
        let up_to = chain(to);
        let lca = *up_from
            .iter()
            .find(|id| up_to.contains(id))
            .expect("tree has a common root");
        let mut boundaries = Vec::new();
        for leg in [&up_from, &up_to] {
            for id in leg {
                if *id == lca {
                    break;
                }
                boundaries.push(self.nodes[id].tier);
            }
        }
        Ok(boundaries)
    }

    /// Hop count on the tree path between two nodes.
    pub fn hop_count(&self, from: u32, to: u32) -> Result<usize> {
        Ok(self.path_boundaries(from, to)?.len())
    }

    /// Latency offered by `node_id` to a demand in region `region_id` under
    /// the given load fraction, in milliseconds.
    ///
    /// The value is the propagation latency summed over tree-path hops from
    /// the region's serving base station to the node, plus the node's
    /// processing latency scaled by `1 + load_penalty * load_fraction`.
    /// Strictly positive, non-decreasing in hop count and load.
    pub fn latency(&self, node_id: u32, region_id: u32, load_fraction: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&load_fraction) {
            return Err(Error::InvalidInput(format!(
                "load_fraction {load_fraction} outside [0, 1]"
            )));
        }
        let region = self
            .nodes
            .get(&region_id)
            .ok_or_else(|| Error::Lookup(format!("unknown region {region_id}")))?;
        if region.tier != 0 {
            return Err(Error::Lookup(format!(
                "region {region_id} is not a base station"
            )));
        }
        let node = self
            .nodes
            .get(&node_id)
            .ok_or_else(|| Error::Lookup(format!("unknown node {node_id}")))?;
        let cfg = &self.latency_config;
        let hops: f64 = self
            .path_boundaries(region_id, node_id)?
            .iter()
            .map(|&b| table_at(&cfg.hop_latency_ms, b as usize))
            .sum();
        let proc = table_at(&cfg.base_proc_ms, node.tier as usize)
            * (1.0 + cfg.load_penalty * load_fraction);
        Ok(hops + proc)
    }

    /// Structural invariants: unique root, full reachability, child/parent
    /// tier consistency, and per-tier sizes that strictly decrease toward the
    /// root (a final 1 -> 1 step onto the root is permitted, since the root
    /// always sits above the last merge level).
    pub fn check_invariants(&self) -> Result<()> {
        let roots: Vec<u32> = self
            .nodes
            .values()
            .filter(|n| n.parent.is_none())
            .map(|n| n.id)
            .collect();
        if roots.len() != 1 {
            return Err(Error::Internal(format!("{} roots found", roots.len())));
        }
        if self.tier_count < 2 {
            return Err(Error::Internal("tier_count < 2".into()));
        }
        for node in self.nodes.values() {
            if let Some(pid) = node.parent {
                let parent = self
                    .nodes
                    .get(&pid)
                    .ok_or_else(|| Error::Internal(format!("dangling parent {pid}")))?;
                if parent.tier != node.tier + 1 {
                    return Err(Error::Internal(format!(
                        "node {} tier {} has parent tier {}",
                        node.id, node.tier, parent.tier
                    )));
                }
                if !parent.children.contains(&node.id) {
                    return Err(Error::Internal(format!(
                        "parent {} does not list child {}",
                        pid, node.id
                    )));
                }
            }
            for &c in &node.children {
                let child = self
                    .nodes
                    .get(&c)
                    .ok_or_else(|| Error::Internal(format!("dangling child {c}")))?;
                if child.tier + 1 != node.tier {
                    return Err(Error::Internal(format!(
                        "child {} of {} has tier {}",
                        c, node.id, child.tier
                    )));
                }
            }
        }
        // Reachability of every station from the root via parent links.
        for node in self.nodes.values() {
            let mut cur = node.id;
            let mut steps = 0;
            while let Some(p) = self.nodes[&cur].parent {
                cur = p;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(Error::Internal("parent cycle".into()));
                }
            }
            if cur != roots[0] {
                return Err(Error::Internal(format!("node {} detached", node.id)));
            }
        }
        let sizes = self.tier_sizes();
        for w in sizes.windows(2) {
            let (lower, upper) = (w[0], w[1]);
            if upper == 0 || lower == 0 {
                return Err(Error::Internal("empty tier".into()));
            }
            if upper >= lower && lower != 1 {
                return Err(Error::Internal(format!(
                    "tier sizes not decreasing: {lower} -> {upper}"
                )));
            }
        }
        Ok(())
    }
}

/// Undirected graph over station ids with an edge wherever the pairwise
/// Euclidean distance is at most `radius_m`.
pub fn build_proximity_graph(stations: &[BaseStation], radius_m: f64) -> Result<UndirectedGraph> {
    if stations.is_empty() {
        return Err(Error::InvalidInput("empty station list".into()));
    }
    if radius_m <= 0.0 {
        return Err(Error::InvalidInput(format!("radius {radius_m} <= 0")));
    }
    let mut seen = BTreeSet::new();
    for s in stations {
        if !seen.insert(s.id) {
            return Err(Error::InvalidInput(format!(
                "duplicate station id {}",
                s.id
            )));
        }
    }
    let mut g = UndirectedGraph::new();
    for s in stations {
        g.add_vertex(s.id);
    }
    for (i, a) in stations.iter().enumerate() {
        for b in &stations[i + 1..] {
            if a.position().distance(&b.position()) <= radius_m {
                g.add_edge(a.id, b.id);
            }
        }
    }
    Ok(g)
}

/// Partition of the graph's vertex ids into communities.
pub fn detect_communities(graph: &UndirectedGraph, seed: u64) -> Vec<Vec<u32>> {
    louvain::detect_communities(graph, seed)
}

/// Build the tiered topology bottom-up from the stations.
///
/// Tier-0 nodes are exactly the input stations. Communities of the proximity
/// graph each receive an upper-tier node; the procedure then repeats on the
/// complete graph over each new tier. Once a tier holds at most `mu` nodes, a
/// single root is added above it. When community detection at an upper tier
/// collapses everything into one group while more than `mu` nodes remain, the
/// best two-way modularity split forces progress instead.
pub fn build_hierarchy(
    stations: &[BaseStation],
    radius_m: f64,
    mu: u32,
    seed: u64,
) -> Result<Topology> {
    if mu < 1 {
        return Err(Error::InvalidInput(format!("mu {mu} < 1")));
    }
    if stations.is_empty() {
        return Err(Error::InvalidInput("empty station list".into()));
    }
    let proximity = build_proximity_graph(stations, radius_m)?;

    let mut nodes: BTreeMap<u32, FogNode> = stations
        .iter()
        .map(|s| {
            (
                s.id,
                FogNode {
                    id: s.id,
                    tier: 0,
                    position: s.position(),
                    parent: None,
                    children: Vec::new(),
                    resources: None,
                },
            )
        })
        .collect();
    let mut next_id = stations.iter().map(|s| s.id).max().unwrap() + 1;

    let mut communities = detect_communities(&proximity, seed);
    let mut tier = 1u32;
    loop {
        // One upper-tier node per community, positioned at the member centroid.
        let mut upper: Vec<u32> = Vec::with_capacity(communities.len());
        for members in &communities {
            let pts: Vec<Point> = members.iter().map(|m| nodes[m].position).collect();
            let id = next_id;
            next_id += 1;
            for m in members {
                nodes.get_mut(m).expect("member exists").parent = Some(id);
            }
            nodes.insert(
                id,
                FogNode {
                    id,
                    tier,
                    position: centroid(&pts),
                    parent: None,
                    children: members.clone(),
                    resources: None,
                },
            );
            upper.push(id);
        }

        if upper.len() as u32 <= mu {
            // Stopping criterion met: one root above the penultimate tier.
            let pts: Vec<Point> = upper.iter().map(|m| nodes[m].position).collect();
            let root = next_id;
            for m in &upper {
                nodes.get_mut(m).expect("upper exists").parent = Some(root);
            }
            nodes.insert(
                root,
                FogNode {
                    id: root,
                    tier: tier + 1,
                    position: centroid(&pts),
                    parent: None,
                    children: upper,
                    resources: None,
                },
            );
            let topology = Topology {
                nodes,
                tier_count: tier + 2,
                latency_config: LatencyConfig::default(),
            };
            topology.check_invariants()?;
            return Ok(topology);
        }

        let complete = UndirectedGraph::complete(&upper);
        communities = detect_communities(&complete, seed ^ tier as u64);
        if communities.len() == 1 && upper.len() as u32 > mu && upper.len() >= 3 {
            communities = louvain::best_bipartition(&complete);
        }
        tier += 1;
    }
}

/// Inclusive value range for one resource dimension; point values are
/// degenerate ranges.
pub type ValueRange = (f64, f64);

/// Per-tier resource ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceRange {
    pub mips: ValueRange,
    pub storage_gb: ValueRange,
    pub ram_gb: ValueRange,
    pub up_mbps: ValueRange,
    pub down_mbps: ValueRange,
}

/// Ranges indexed by tier, from tier 0 upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRanges(pub Vec<ResourceRange>);

impl Default for TierRanges {
    /// Tier 0 hosts lightweight access hardware; tiers 1-4 follow the
    /// standard cloudlet / regional cloud / cloud progression with strictly
    /// growing maxima.
    fn default() -> Self {
        let point = |v: f64| (v, v);
        TierRanges(vec![
            ResourceRange {
                mips: (1.0, 2.8),
                storage_gb: point(2_500.0),
                ram_gb: point(16.0),
                up_mbps: point(150.0),
                down_mbps: point(150.0),
            },
            ResourceRange {
                mips: (2.8, 5.3),
                storage_gb: point(10_000.0),
                ram_gb: point(25.0),
                up_mbps: point(300.0),
                down_mbps: point(300.0),
            },
            ResourceRange {
                mips: (5.3, 7.8),
                storage_gb: point(40_000.0),
                ram_gb: point(40.0),
                up_mbps: point(500.0),
                down_mbps: point(500.0),
            },
            ResourceRange {
                mips: (7.8, 10.2),
                storage_gb: point(160_000.0),
                ram_gb: point(60.0),
                up_mbps: point(800.0),
                down_mbps: point(800.0),
            },
            ResourceRange {
                mips: (10.2, 20.5),
                storage_gb: point(1_000_000.0),
                ram_gb: point(100.0),
                up_mbps: point(2_000.0),
                down_mbps: point(2_000.0),
            },
        ])
    }
}

fn draw(range: ValueRange, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let (lo, hi) = range;
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draw each node's resources uniformly from its tier's range. Deterministic
/// per seed; node order is ascending id.
pub fn assign_resources(topology: &Topology, ranges: &TierRanges, seed: u64) -> Result<Topology> {
    let mut out = topology.clone();
    let mut rng = rng_from_seed(seed);
    let ids: Vec<u32> = out.nodes.keys().copied().collect();
    for id in ids {
        let tier = out.nodes[&id].tier as usize;
        let range = ranges
            .0
            .get(tier)
            .ok_or_else(|| Error::Config(format!("no resource range for tier {tier}")))?;
        let res = NodeResources {
            mips: draw(range.mips, &mut rng),
            storage_gb: draw(range.storage_gb, &mut rng),
            ram_gb: draw(range.ram_gb, &mut rng),
            up_mbps: draw(range.up_mbps, &mut rng),
            down_mbps: draw(range.down_mbps, &mut rng),
        };
        out.nodes.get_mut(&id).expect("id exists").resources = Some(res);
    }
    Ok(out)
}

/// Wire format for a topology: configuration echo plus the node list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub schema_version: u32,
    pub tier_count: u32,
    pub latency_config: LatencyConfig,
    pub config: serde_json::Value,
    pub nodes: Vec<FogNode>,
}

pub const TOPOLOGY_SCHEMA_VERSION: u32 = 1;

impl Topology {
    pub fn to_doc(&self, config_echo: serde_json::Value) -> TopologyDoc {
        TopologyDoc {
            schema_version: TOPOLOGY_SCHEMA_VERSION,
            tier_count: self.tier_count,
            latency_config: self.latency_config.clone(),
            config: config_echo,
            nodes: self.nodes.values().cloned().collect(),
        }
    }

    pub fn from_doc(doc: &TopologyDoc) -> Result<Topology> {
        if doc.schema_version != TOPOLOGY_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported topology schema version {}",
                doc.schema_version
            )));
        }
        let nodes: BTreeMap<u32, FogNode> = doc.nodes.iter().map(|n| (n.id, n.clone())).collect();
        let topology = Topology {
            nodes,
            tier_count: doc.tier_count,
            latency_config: doc.latency_config.clone(),
        };
        topology.check_invariants()?;
        Ok(topology)
    }
}

/// Parse the station CSV (`id,x_m,y_m,coverage_radius_m`, or
/// `id,lat,lon,coverage_radius_m` with `latlon` set, projected around the
/// input centroid).
pub fn parse_stations_csv(text: &str, latlon: bool) -> Result<Vec<BaseStation>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty station file".into()))?;
    let expected = if latlon {
        "id,lat,lon,coverage_radius_m"
    } else {
        "id,x_m,y_m,coverage_radius_m"
    };
    if header.trim() != expected {
        return Err(Error::Format(format!(
            "station header `{}` does not match `{expected}`",
            header.trim()
        )));
    }
    let mut raw: Vec<(u32, f64, f64, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "station line {}: expected 4 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| {
                Error::Format(format!("station line {}: bad {what} `{s}`", lineno + 2))
            })
        };
        let id = fields[0].trim().parse::<u32>().map_err(|_| {
            Error::Format(format!(
                "station line {}: bad id `{}`",
                lineno + 2,
                fields[0]
            ))
        })?;
        raw.push((
            id,
            parse(fields[1], "coordinate")?,
            parse(fields[2], "coordinate")?,
            parse(fields[3], "radius")?,
        ));
    }
    if raw.is_empty() {
        return Err(Error::InvalidInput("no stations in file".into()));
    }
    let stations = if latlon {
        let ref_lat = raw.iter().map(|r| r.1).sum::<f64>() / raw.len() as f64;
        let ref_lon = raw.iter().map(|r| r.2).sum::<f64>() / raw.len() as f64;
        raw.iter()
            .map(|&(id, lat, lon, r)| {
                let p = project_latlon(lat, lon, ref_lat, ref_lon);
                BaseStation {
                    id,
                    x: p.x,
                    y: p.y,
                    coverage_radius: r,
                }
            })
            .collect()
    } else {
        raw.iter()
            .map(|&(id, x, y, r)| BaseStation {
                id,
                x,
                y,
                coverage_radius: r,
            })
            .collect()
    };
    Ok(stations)
}

/// Render stations back to the planar CSV format.
pub fn stations_to_csv(stations: &[BaseStation]) -> String {
    let mut out = String::from("id,x_m,y_m,coverage_radius_m\n");
    for s in stations {
        out.push_str(&format!("{},{},{},{}\n", s.id, s.x, s.y, s.coverage_radius));
    }
    out
}

/// Seeded uniform station layout in a rectangle, for experiments and tests.
pub fn random_stations(
    count: usize,
    width_m: f64,
    height_m: f64,
    coverage_radius: f64,
    seed: u64,
) -> Vec<BaseStation> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|i| BaseStation {
            id: i as u32,
            x: rng.random_range(0.0..width_m),
            y: rng.random_range(0.0..height_m),
            coverage_radius,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn station(id: u32, x: f64, y: f64) -> BaseStation {
        BaseStation {
            id,
            x,
            y,
            coverage_radius: 1_500.0,
        }
    }

    #[test]
    fn proximity_boundary_inclusion() {
        let s = vec![station(0, 0.0, 0.0), station(1, 2_999.0, 0.0)];
        let g = build_proximity_graph(&s, 3_000.0).unwrap();
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn proximity_boundary_exclusion() {
        let s = vec![station(0, 0.0, 0.0), station(1, 3_001.0, 0.0)];
        let g = build_proximity_graph(&s, 3_000.0).unwrap();
        assert!(!g.has_edge(0, 1));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn proximity_empty_is_invalid() {
        assert!(matches!(
            build_proximity_graph(&[], 3_000.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn proximity_matches_brute_force() {
        for (count, seed) in [(50usize, 99u64), (120, 100), (200, 101)] {
            let side = 2_000.0 * (count as f64).sqrt();
            let stations = random_stations(count, side, side, 1_500.0, seed);
            let g = build_proximity_graph(&stations, 3_000.0).unwrap();
            for (i, a) in stations.iter().enumerate() {
                for b in &stations[i + 1..] {
                    let expect = a.position().distance(&b.position()) <= 3_000.0;
                    assert_eq!(g.has_edge(a.id, b.id), expect, "{} {}", a.id, b.id);
                }
            }
        }
    }

    #[test]
    fn four_station_single_community_hierarchy() {
        let s = vec![
            station(0, 0.0, 0.0),
            station(1, 100.0, 0.0),
            station(2, 0.0, 100.0),
            station(3, 100.0, 100.0),
        ];
        let topo = build_hierarchy(&s, 3_000.0, 2, 1).unwrap();
        assert_eq!(topo.tier_count(), 3);
        assert_eq!(topo.tier_sizes(), vec![4, 1, 1]);
        let cloudlet = topo.tier_nodes(1)[0];
        let c = topo.node(cloudlet).unwrap();
        assert_eq!((c.position.x, c.position.y), (50.0, 50.0));
    }

    #[test]
    fn hierarchy_rejects_bad_mu() {
        let s = vec![station(0, 0.0, 0.0), station(1, 10.0, 0.0)];
        assert!(matches!(
            build_hierarchy(&s, 3_000.0, 0, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn seeded_layout_invariants() {
        for seed in [3u64, 17, 45] {
            let stations = random_stations(100, 20_000.0, 20_000.0, 1_500.0, seed);
            let topo = build_hierarchy(&stations, 3_000.0, 2, seed).unwrap();
            topo.check_invariants().unwrap();
            assert_eq!(topo.tier_sizes()[0], 100);
        }
    }

    #[test]
    fn resource_defaults_match_tier_table() {
        let s = vec![
            station(0, 0.0, 0.0),
            station(1, 100.0, 0.0),
            station(2, 200.0, 0.0),
        ];
        let topo = build_hierarchy(&s, 3_000.0, 2, 1).unwrap();
        let topo = assign_resources(&topo, &TierRanges::default(), 5).unwrap();
        for id in topo.tier_nodes(1) {
            let r = topo.node(id).unwrap().resources.unwrap();
            assert!((2.8..=5.3).contains(&r.mips), "mips {}", r.mips);
            assert_eq!(r.ram_gb, 25.0);
            assert_eq!(r.up_mbps, 300.0);
        }
    }

    #[test]
    fn degenerate_range_is_exact() {
        let s = vec![station(0, 0.0, 0.0), station(1, 10.0, 0.0)];
        let topo = build_hierarchy(&s, 3_000.0, 2, 1).unwrap();
        let point = |v: f64| (v, v);
        let range = ResourceRange {
            mips: point(5.0),
            storage_gb: point(5.0),
            ram_gb: point(5.0),
            up_mbps: point(5.0),
            down_mbps: point(5.0),
        };
        let ranges = TierRanges(vec![range.clone(), range.clone(), range]);
        let topo = assign_resources(&topo, &ranges, 9).unwrap();
        for n in topo.nodes() {
            assert_eq!(n.resources.unwrap().mips, 5.0);
        }
    }

    #[test]
    fn resources_deterministic_per_seed() {
        let stations = random_stations(30, 10_000.0, 10_000.0, 1_500.0, 7);
        let topo = build_hierarchy(&stations, 3_000.0, 2, 7).unwrap();
        let a = assign_resources(&topo, &TierRanges::default(), 123).unwrap();
        let b = assign_resources(&topo, &TierRanges::default(), 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_tier_range_is_config_error() {
        let s = vec![station(0, 0.0, 0.0), station(1, 10.0, 0.0)];
        let topo = build_hierarchy(&s, 3_000.0, 2, 1).unwrap();
        let ranges = TierRanges(TierRanges::default().0[..1].to_vec());
        assert!(matches!(
            assign_resources(&topo, &ranges, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn latency_zero_hops_is_base_processing() {
        let s = vec![station(0, 0.0, 0.0), station(1, 10.0, 0.0)];
        let topo = build_hierarchy(&s, 3_000.0, 2, 1).unwrap();
        let lat = topo.latency(0, 0, 0.0).unwrap();
        assert_eq!(lat, topo.latency_config().base_proc_ms[0]);
        assert!(lat > 0.0);
    }

    #[test]
    fn latency_monotone_in_load_and_hops() {
        let stations = random_stations(40, 10_000.0, 10_000.0, 1_500.0, 21);
        let topo = build_hierarchy(&stations, 3_000.0, 2, 21).unwrap();
        let region = topo.station_ids()[0];
        let root = topo.root_id();
        assert!(
            topo.latency(root, region, 1.0).unwrap() >= topo.latency(root, region, 0.0).unwrap()
        );
        assert!(
            topo.latency(root, region, 0.0).unwrap() > topo.latency(region, region, 0.0).unwrap()
        );
    }

    #[test]
    fn latency_calibration_keeps_fog_fast_and_root_near_cap() {
        let stations = random_stations(60, 16_000.0, 16_000.0, 1_500.0, 33);
        let topo = build_hierarchy(&stations, 3_000.0, 2, 33).unwrap();
        let region = topo.station_ids()[0];
        for tier in 0..=2u32 {
            for id in topo.tier_nodes(tier) {
                let lat = topo.latency(id, region, 1.0).unwrap();
                assert!(lat < 100.0, "tier {tier} node {id}: {lat}");
            }
        }
        let root_lat = topo.latency(topo.root_id(), region, 1.0).unwrap();
        assert!(
            root_lat > 90.0,
            "root under load should approach the cap: {root_lat}"
        );
    }

    #[test]
    fn unknown_ids_are_lookup_errors() {
        let s = vec![station(0, 0.0, 0.0), station(1, 10.0, 0.0)];
        let topo = build_hierarchy(&s, 3_000.0, 2, 1).unwrap();
        assert!(matches!(topo.latency(999, 0, 0.0), Err(Error::Lookup(_))));
        assert!(matches!(topo.latency(0, 999, 0.0), Err(Error::Lookup(_))));
    }

    #[test]
    fn station_csv_round_trip() {
        let text = "id,x_m,y_m,coverage_radius_m\n0,10.5,20.5,1500\n1,30,40,1500\n";
        let stations = parse_stations_csv(text, false).unwrap();
        assert_eq!(stations.len(), 2);
        assert_eq!(stations[0].x, 10.5);
        let back = stations_to_csv(&stations);
        let again = parse_stations_csv(&back, false).unwrap();
        assert_eq!(stations, again);
    }

    #[test]
    fn station_csv_bad_header_is_format_error() {
        assert!(matches!(
            parse_stations_csv("id,a,b\n", false),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn latlon_projection_spacing() {
        // Two stations 0.01 degrees of latitude apart: ~1112 m.
        let text = "id,lat,lon,coverage_radius_m\n0,45.00,9.00,1500\n1,45.01,9.00,1500\n";
        let stations = parse_stations_csv(text, true).unwrap();
        let d = stations[0].position().distance(&stations[1].position());
        assert!((d - 1_112.0).abs() < 5.0, "d = {d}");
    }

    #[test]
    fn topology_doc_round_trip() {
        let stations = random_stations(25, 10_000.0, 10_000.0, 1_500.0, 4);
        let topo = build_hierarchy(&stations, 3_000.0, 2, 4).unwrap();
        let topo = assign_resources(&topo, &TierRanges::default(), 4).unwrap();
        let doc = topo.to_doc(serde_json::json!({"seed": 4}));
        let text = serde_json::to_string(&doc).unwrap();
        let parsed: TopologyDoc = serde_json::from_str(&text).unwrap();
        let back = Topology::from_doc(&parsed).unwrap();
        assert_eq!(topo, back);
    }
}
