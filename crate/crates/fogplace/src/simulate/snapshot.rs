//! Per-slot snapshot analysis: traffic-intensity class, the node set a
//! cost-minimizing solve selects, and each node's capacity/latency at that
//! moment. Emitted as plot-ready CSV and JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{build_instance, solve_exact, solve_heuristic, NodeState, SolveLimits};
use crate::rng::indexed_seed;
use crate::simulate::{concurrent_queue, home_regions};
use crate::topology::Topology;
use crate::workload::{demand_snapshots, kmeans_1d, IntensityClass, ServiceSpec, TrafficSeries};

/// Configuration of a snapshot report run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotConfig {
    pub latency_cap_ms: f64,
    pub concurrent_load_fraction: f64,
    pub seed: u64,
    #[serde(skip, default)]
    pub solver_limits: SolveLimits,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig {
            latency_cap_ms: 100.0,
            concurrent_load_fraction: 0.3,
            seed: 0,
            solver_limits: SolveLimits::default(),
        }
    }
}

/// Per-node row of the analysis table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub node_id: u32,
    pub tier: u32,
    pub free_capacity: f64,
    /// Mean latency offered to the slot's demanding regions.
    pub latency_ms: f64,
    pub selected: bool,
}

/// Analysis of one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotAnalysis {
    pub slot: usize,
    pub intensity: IntensityClass,
    pub total_demand: f64,
    pub selected_nodes: Vec<u32>,
    pub nodes: Vec<NodeSnapshot>,
}

impl SnapshotAnalysis {
    /// CSV rows: `slot,node_id,tier,free_capacity,latency_ms,selected`.
    pub fn to_csv(analyses: &[SnapshotAnalysis]) -> String {
        let mut out = String::from("slot,node_id,tier,free_capacity,latency_ms,selected\n");
        for a in analyses {
            for n in &a.nodes {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    a.slot, n.node_id, n.tier, n.free_capacity, n.latency_ms, n.selected
                ));
            }
        }
        out
    }
}

/// Analyze the requested slots: classify slot intensity over the whole
/// horizon (3-means on per-slot total traffic), inject the seeded concurrent
/// load, solve the placement, and tabulate per-node capacity and latency.
pub fn snapshot_report(
    topology: &Topology,
    series: &[TrafficSeries],
    slots: &[usize],
    config: &SnapshotConfig,
) -> Result<Vec<SnapshotAnalysis>> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no traffic series".into()));
    }
    let horizon = series[0].len();
    for &slot in slots {
        if slot >= horizon {
            return Err(Error::Lookup(format!(
                "slot {slot} outside the workload horizon {horizon}"
            )));
        }
    }
    let snapshots = demand_snapshots(series, &ServiceSpec::multimedia_default())?;

    // Slot intensity via 3-means on per-slot totals.
    let totals: Vec<f64> = (0..horizon)
        .map(|t| series.iter().map(|s| s.values[t]).sum::<f64>())
        .collect();
    let (_, assign) = kmeans_1d(&totals, 3, config.seed)?;
    let class_of = |rank: usize| match rank {
        0 => IntensityClass::Low,
        1 => IntensityClass::Medium,
        _ => IntensityClass::High,
    };

    let capacities: BTreeMap<u32, f64> = NodeState::fresh(topology)?.free;
    let homes = home_regions(topology);

    let mut out = Vec::with_capacity(slots.len());
    for &slot in slots {
        let snapshot = &snapshots[slot];
        let mut state = NodeState {
            free: capacities.clone(),
            load: BTreeMap::new(),
        };
        // Same concurrent-injection scheme as the simulator.
        for service in concurrent_queue(
            topology,
            &capacities,
            &homes,
            config.concurrent_load_fraction,
            &ServiceSpec::concurrent_default(),
            config.seed,
            slot,
        ) {
            let free = state
                .free
                .get_mut(&service.target_node)
                .expect("known node");
            *free = (*free - service.volume).max(0.0);
        }
        for (id, cap) in &capacities {
            let used = (cap - state.free[id]).max(0.0);
            state.load.insert(*id, (used / cap).clamp(0.0, 1.0));
        }

        let (selected, assignment_nodes) = if snapshot.is_empty() {
            (Vec::new(), BTreeMap::new())
        } else {
            let instance = build_instance(topology, snapshot, &state, config.latency_cap_ms)?;
            let solution = if instance.facilities.len() <= config.solver_limits.max_facilities
                && instance.demands.len() <= config.solver_limits.max_demands
            {
                solve_exact(&instance, &config.solver_limits)?.solution
            } else {
                solve_heuristic(
                    &instance,
                    indexed_seed(config.seed, "snapshot", slot as u64),
                )?
                .solution
            };
            let ids: Vec<u32> = solution.open_node_ids(&instance).into_iter().collect();
            (
                ids,
                BTreeMap::from_iter(
                    solution
                        .assignment
                        .iter()
                        .map(|(&(f, _), &x)| (instance.facilities[f].node_id, x)),
                ),
            )
        };
        let _ = assignment_nodes;

        let mut nodes = Vec::new();
        for node in topology.nodes() {
            let regions: Vec<u32> = snapshot.demands.keys().copied().collect();
            let latency_ms = if regions.is_empty() {
                topology.latency(node.id, homes[&node.id], state.load[&node.id])?
            } else {
                let mut acc = 0.0;
                for &r in &regions {
                    acc += topology.latency(node.id, r, state.load[&node.id])?;
                }
                acc / regions.len() as f64
            };
            nodes.push(NodeSnapshot {
                node_id: node.id,
                tier: node.tier,
                free_capacity: state.free[&node.id],
                latency_ms,
                selected: selected.contains(&node.id),
            });
        }
        out.push(SnapshotAnalysis {
            slot,
            intensity: class_of(assign[slot]),
            total_demand: snapshot.total_volume(),
            selected_nodes: selected,
            nodes,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{
        assign_resources, build_hierarchy, random_stations, ResourceRange, TierRanges,
    };
    use crate::workload::{synth_workload, SynthConfig};

    fn world(stor_scale: f64, seed: u64) -> Topology {
        let stations = random_stations(8, 7_000.0, 7_000.0, 1_500.0, seed);
        let topo = build_hierarchy(&stations, 3_000.0, 2, seed).unwrap();
        let point = |v: f64| (v, v);
        let mk = |stor: f64| ResourceRange {
            mips: (1.0, 2.0),
            storage_gb: point(stor),
            ram_gb: point(16.0),
            up_mbps: point(150.0),
            down_mbps: point(150.0),
        };
        let ranges = TierRanges(vec![
            mk(40.0 * stor_scale),
            mk(120.0 * stor_scale),
            mk(260.0 * stor_scale),
            mk(600.0 * stor_scale),
            mk(1_500.0 * stor_scale),
        ]);
        assign_resources(&topo, &ranges, seed).unwrap()
    }

    fn series(seed: u64) -> Vec<crate::workload::TrafficSeries> {
        let cfg = SynthConfig {
            regions: 8,
            days: 1,
            interval_s: 600,
            ..SynthConfig::default()
        };
        synth_workload(&cfg, seed).unwrap()
    }

    #[test]
    fn fog_only_selection_when_capacity_suffices() {
        let topo = world(4.0, 1); // ample fog capacity
        let s = series(3);
        let report = snapshot_report(&topo, &s, &[80], &SnapshotConfig::default()).unwrap();
        let a = &report[0];
        if !a.selected_nodes.is_empty() {
            let root = topo.root_id();
            assert!(
                !a.selected_nodes.contains(&root),
                "root selected despite ample fog capacity: {:?}",
                a.selected_nodes
            );
        }
    }

    #[test]
    fn saturated_fog_pulls_in_root() {
        let topo = world(0.02, 2); // tiny capacities force escalation
        let s = series(5);
        // Mid-day slot where demand peaks.
        let report = snapshot_report(&topo, &s, &[72], &SnapshotConfig::default()).unwrap();
        let a = &report[0];
        let root = topo.root_id();
        assert!(
            a.selected_nodes.contains(&root) || a.selected_nodes.is_empty(),
            "tiny capacities should escalate to the root: {:?}",
            a.selected_nodes
        );
    }

    #[test]
    fn flat_workload_is_degenerate_for_intensity() {
        let topo = world(1.0, 3);
        // All slots identical -> the 3-group intensity clustering has fewer
        // distinct values than groups.
        let flat: Vec<crate::workload::TrafficSeries> = (0..4)
            .map(|r| crate::workload::TrafficSeries {
                region_id: r,
                start_time_ms: 0,
                interval_s: 600,
                values: vec![5.0; 20],
            })
            .collect();
        let report = snapshot_report(&topo, &flat, &[3], &SnapshotConfig::default());
        assert!(matches!(report, Err(Error::Degenerate(_))));
    }

    #[test]
    fn empty_slot_selects_nothing() {
        let topo = world(1.0, 3);
        // Slot totals vary (so intensity clustering works), but in slot 1
        // every region carries the same value: no one strictly exceeds the
        // mean, the demand set is empty, and nothing is selected.
        let make = |r: u32| crate::workload::TrafficSeries {
            region_id: r,
            start_time_ms: 0,
            interval_s: 600,
            values: (0..12)
                .map(|t| {
                    if t == 1 {
                        6.0
                    } else {
                        3.0 + (t as f64) + r as f64
                    }
                })
                .collect(),
        };
        let series: Vec<_> = (0..4).map(make).collect();
        let report = snapshot_report(&topo, &series, &[1], &SnapshotConfig::default()).unwrap();
        assert_eq!(report[0].total_demand, 0.0);
        assert!(report[0].selected_nodes.is_empty());
    }

    #[test]
    fn unknown_slot_is_lookup_error() {
        let topo = world(1.0, 4);
        let s = series(7);
        assert!(matches!(
            snapshot_report(&topo, &s, &[10_000], &SnapshotConfig::default()),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn csv_emission() {
        let topo = world(1.0, 5);
        let s = series(9);
        let report = snapshot_report(&topo, &s, &[10, 70], &SnapshotConfig::default()).unwrap();
        let csv = SnapshotAnalysis::to_csv(&report);
        assert!(csv.starts_with("slot,node_id,tier,free_capacity,latency_ms,selected\n"));
        let rows = csv.lines().count() - 1;
        assert_eq!(rows, 2 * topo.nodes().count());
    }
}
