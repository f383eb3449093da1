//! Discrete-time simulation comparing placement strategies over 10-minute
//! slots.
//!
//! Per slot: seeded concurrent-class load occupies node capacity, the slot's
//! multimedia demand becomes a placement instance, the configured strategy
//! places it, packet outcomes are drawn per assignment from per-tier link
//! reliabilities, and delivery/latency/usage metrics accumulate. The
//! prediction-aware strategy additionally plans a reservation for the next
//! slot from forecast demand, migrating conflicting concurrent services.

pub mod snapshot;
pub mod strategy;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{
    build_instance, solve_exact, solve_heuristic, NodeState, PlacementInstance, PlacementSolution,
    SolveLimits,
};
use crate::reservation::{
    apply_reservation, plan_reservation, predicted_placement, ConcurrentService, ReservationPlan,
};
use crate::rng::{binomial_quantile, indexed_seed, rng_from_seed};
use crate::topology::Topology;
use crate::workload::{DemandSnapshot, ServiceSpec};

pub use snapshot::{snapshot_report, SnapshotAnalysis, SnapshotConfig};
pub use strategy::{strategy_da, strategy_qoeap};

/// Placement strategy under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Da,
    Qoeap,
    SmartFl,
    Tiptop,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Da => "DA",
            Strategy::Qoeap => "QoEAP",
            Strategy::SmartFl => "SMART-FL",
            Strategy::Tiptop => "TIPTOP",
        }
    }

    pub fn parse(text: &str) -> Result<Strategy> {
        match text.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "da" => Ok(Strategy::Da),
            "qoeap" => Ok(Strategy::Qoeap),
            "smartfl" => Ok(Strategy::SmartFl),
            "tiptop" => Ok(Strategy::Tiptop),
            other => Err(Error::InvalidInput(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub slots: usize,
    pub interval_s: u32,
    pub seed: u64,
    pub latency_cap_ms: f64,
    /// Packet success probability per tier boundary (indexed by the lower
    /// tier of the boundary; deeper boundaries reuse the last entry).
    pub link_reliability: Vec<f64>,
    /// Fraction of each node's capacity claimed by concurrent services per
    /// slot (jittered +/- 25%).
    pub concurrent_load_fraction: f64,
    pub service_spec: ServiceSpec,
    pub concurrent_spec: ServiceSpec,
    /// Packets emitted per unit of placed volume.
    pub packets_per_unit: f64,
    #[serde(skip, default)]
    pub solver_limits: SolveLimits,
}

impl SimConfig {
    pub fn new(strategy: Strategy, slots: usize, seed: u64) -> SimConfig {
        SimConfig {
            strategy,
            slots,
            interval_s: 600,
            seed,
            latency_cap_ms: 100.0,
            link_reliability: vec![0.998, 0.9995, 0.9999, 0.9999],
            concurrent_load_fraction: 0.3,
            service_spec: ServiceSpec::multimedia_default(),
            concurrent_spec: ServiceSpec::concurrent_default(),
            packets_per_unit: 100.0,
            solver_limits: SolveLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots < 1 {
            return Err(Error::InvalidInput("slots must be at least 1".into()));
        }
        if self.link_reliability.is_empty()
            || self
                .link_reliability
                .iter()
                .any(|r| !(*r > 0.0 && *r <= 1.0))
        {
            return Err(Error::InvalidInput(
                "link reliabilities must lie in (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.concurrent_load_fraction) {
            return Err(Error::InvalidInput(
                "concurrent_load_fraction must lie in [0, 1]".into(),
            ));
        }
        self.service_spec.validate()?;
        self.concurrent_spec.validate()?;
        Ok(())
    }
}

/// One slot's metric row (the CSV trace line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub slot: usize,
    pub content_rate: f64,
    pub packet_rate: f64,
    pub avg_latency_ms: f64,
    pub link_usage: f64,
    pub migration_usage: f64,
}

/// Structured simulation event, one JSON line each in the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum SimEvent {
    Placement {
        slot: usize,
        region: u32,
        node: u32,
        volume: f64,
        latency_ms: f64,
    },
    UnservedDemand {
        slot: usize,
        region: u32,
        volume: f64,
    },
    ServiceMigration {
        slot: usize,
        region: u32,
        from_node: u32,
        to_node: u32,
        volume: f64,
    },
    ConcurrentMigration {
        slot: usize,
        service_id: u64,
        from_node: u32,
        to_node: u32,
        volume: f64,
    },
    Reservation {
        slot_next: usize,
        nodes: Vec<u32>,
        total_reserved: f64,
    },
    ReservationWaiver {
        slot: usize,
        node: u32,
        volume: f64,
    },
    SolverFallback {
        slot: usize,
        message: String,
    },
}

/// Aggregate metrics for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub strategy: Strategy,
    pub slots: usize,
    pub seed: u64,
    /// Fraction of demanded multimedia volume successfully placed.
    pub content_delivery_rate: f64,
    /// Fraction of transmitted packets delivered end to end.
    pub packet_delivery_rate: f64,
    /// Demand-volume-weighted mean placement latency.
    pub avg_latency_ms: f64,
    /// Mean per-slot link usage in volume-hops per second.
    pub link_usage: f64,
    /// Mean per-slot migration usage in volume-hops per second.
    pub migration_usage: f64,
    pub exact_solves: usize,
    pub heuristic_solves: usize,
    pub per_slot: Vec<SlotTrace>,
    pub events: Vec<SimEvent>,
}

impl SimReport {
    pub fn network_usage(&self) -> f64 {
        self.link_usage + self.migration_usage
    }

    /// Trace CSV: `slot,strategy,content_rate,packet_rate,avg_latency_ms,link_usage,migration_usage`.
    pub fn traces_to_csv(&self) -> String {
        let mut out = String::from(
            "slot,strategy,content_rate,packet_rate,avg_latency_ms,link_usage,migration_usage\n",
        );
        for t in &self.per_slot {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t.slot,
                self.strategy.name(),
                t.content_rate,
                t.packet_rate,
                t.avg_latency_ms,
                t.link_usage,
                t.migration_usage
            ));
        }
        out
    }

    /// Event log as line-delimited JSON.
    pub fn events_to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Representative region per node for concurrent-service latency checks: the
/// lowest-id descendant base station (the station itself at tier 0).
pub(crate) fn home_regions(topology: &Topology) -> BTreeMap<u32, u32> {
    let mut homes = BTreeMap::new();
    for station in topology.station_ids() {
        let mut cur = station;
        loop {
            homes.entry(cur).or_insert(station);
            match topology.node(cur).and_then(|n| n.parent) {
                Some(p) => cur = p,
                None => break,
            }
        }
    }
    homes
}

/// Seeded concurrent queue for one slot: one service per node claiming the
/// given fraction of its capacity, jittered by +/- 25%.
pub(crate) fn concurrent_queue(
    topology: &Topology,
    capacities: &BTreeMap<u32, f64>,
    homes: &BTreeMap<u32, u32>,
    fraction: f64,
    spec: &ServiceSpec,
    seed: u64,
    slot: usize,
) -> Vec<ConcurrentService> {
    if fraction <= 0.0 {
        return Vec::new();
    }
    let mut rng = rng_from_seed(indexed_seed(seed, "concurrent", slot as u64));
    let mut queue = Vec::new();
    for node in topology.nodes() {
        let cap = capacities[&node.id];
        let jitter = rng.random_range(0.75..1.25);
        let volume = fraction * cap * jitter;
        if volume > 0.0 {
            queue.push(ConcurrentService {
                id: (slot as u64) << 20 | node.id as u64,
                target_node: node.id,
                home_region: homes[&node.id],
                volume,
                spec: spec.clone(),
            });
        }
    }
    queue
}

fn path_reliability(topology: &Topology, config: &SimConfig, from: u32, to: u32) -> Result<f64> {
    let rel = &config.link_reliability;
    let mut p = 1.0;
    for hop in topology_path_boundaries(topology, from, to)? {
        let r = *rel.get(hop as usize).or(rel.last()).expect("nonempty");
        p *= r;
    }
    Ok(p)
}

fn topology_path_boundaries(topology: &Topology, from: u32, to: u32) -> Result<Vec<u32>> {
    // hop_count exposes only the count; recover boundaries by walking both
    // chains like the latency model does.
    let chain = |mut id: u32| -> Vec<u32> {
        let mut out = vec![id];
        while let Some(p) = topology.node(id).and_then(|n| n.parent) {
            out.push(p);
            id = p;
        }
        out
    };
    let up_from = chain(from);
    let up_to = chain(to);
    let lca = *up_from
        .iter()
        .find(|id| up_to.contains(id))
        .ok_or_else(|| Error::Lookup(format!("no common ancestor for {from} and {to}")))?;
    let mut boundaries = Vec::new();
    for leg in [&up_from, &up_to] {
        for id in leg {
            if *id == lca {
                break;
            }
            boundaries.push(topology.node(*id).expect("chain node exists").tier);
        }
    }
    Ok(boundaries)
}

/// Primary facility of each region in a solution: the node carrying the
/// largest share (ties toward the lower node id).
fn primary_nodes(instance: &PlacementInstance, solution: &PlacementSolution) -> BTreeMap<u32, u32> {
    let mut best: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    for (&(f, d), &x) in &solution.assignment {
        let region = instance.demands[d].region_id;
        let node = instance.facilities[f].node_id;
        let entry = best.entry(region).or_insert((x, node));
        if x > entry.0 + 1e-12 || (x >= entry.0 - 1e-12 && node < entry.1) {
            *entry = (x, node);
        }
    }
    best.into_iter().map(|(r, (_, n))| (r, n)).collect()
}

/// Run one simulation. Snapshots must cover `config.slots`; forecasts
/// (predicted demand per slot, aligned with `snapshots`) are required for
/// the prediction-aware strategy only.
#[allow(clippy::needless_range_loop)]
pub fn run(
    topology: &Topology,
    snapshots: &[DemandSnapshot],
    forecasts: Option<&[DemandSnapshot]>,
    config: &SimConfig,
) -> Result<SimReport> {
    config.validate()?;
    if snapshots.len() < config.slots {
        return Err(Error::InvalidInput(format!(
            "{} snapshots cover fewer than {} slots",
            snapshots.len(),
            config.slots
        )));
    }
    if config.strategy == Strategy::Tiptop && forecasts.is_none() {
        return Err(Error::InvalidInput(
            "the prediction-aware strategy requires forecasts".into(),
        ));
    }
    let capacities: BTreeMap<u32, f64> = {
        let fresh = NodeState::fresh(topology)?;
        fresh.free
    };
    let homes = home_regions(topology);

    let mut events = Vec::new();
    let mut per_slot = Vec::with_capacity(config.slots);
    let mut plan: Option<ReservationPlan> = None;
    let mut prev_primary: BTreeMap<u32, u32> = BTreeMap::new();
    let mut exact_solves = 0usize;
    let mut heuristic_solves = 0usize;

    // Run totals.
    let mut demanded_total = 0.0;
    let mut placed_total = 0.0;
    let mut assigned_total = 0.0;
    let mut packets_sent: u64 = 0;
    let mut packets_delivered: u64 = 0;
    let mut latency_weighted = 0.0;
    let mut link_usage_sum = 0.0;
    let mut migration_usage_sum = 0.0;

    for slot in 0..config.slots {
        let snapshot = &snapshots[slot];

        // Concurrent admission (with reservation handling when planned).
        let mut state = NodeState {
            free: capacities.clone(),
            load: BTreeMap::new(),
        };
        let queue = concurrent_queue(
            topology,
            &capacities,
            &homes,
            config.concurrent_load_fraction,
            &config.concurrent_spec,
            config.seed,
            slot,
        );
        let applied_plan = plan.take().filter(|p| p.t_next == slot);
        let outcome = {
            let empty_plan = ReservationPlan {
                t_next: slot,
                y: BTreeSet::new(),
                gamma: BTreeSet::new(),
                reserved_capacity: BTreeMap::new(),
            };
            let p = applied_plan.as_ref().unwrap_or(&empty_plan);
            apply_reservation(topology, &state, p, &queue)?
        };
        state = outcome.node_state;
        for m in &outcome.migrations {
            let hops = topology.hop_count(m.from_node, m.to_node)? as f64;
            migration_usage_sum += m.volume * hops / config.interval_s as f64;
            events.push(SimEvent::ConcurrentMigration {
                slot,
                service_id: m.service_id,
                from_node: m.from_node,
                to_node: m.to_node,
                volume: m.volume,
            });
        }
        for w in &outcome.waivers {
            events.push(SimEvent::ReservationWaiver {
                slot,
                node: w.node,
                volume: w.volume,
            });
        }
        // Load fractions for the latency model.
        for (id, cap) in &capacities {
            let used = (cap - state.free[id]).max(0.0);
            state.load.insert(*id, (used / cap).clamp(0.0, 1.0));
        }

        // Multimedia placement.
        let slot_demand = snapshot.total_volume();
        demanded_total += slot_demand;
        let mut slot_placed = 0.0;
        let mut slot_assigned = 0.0;
        let mut slot_packets: u64 = 0;
        let mut slot_delivered: u64 = 0;
        let mut slot_latency_weighted = 0.0;
        let mut slot_link_usage = 0.0;
        let mut slot_migration_usage = 0.0;
        let mut current_primary: BTreeMap<u32, u32> = BTreeMap::new();

        if !snapshot.is_empty() {
            let instance = build_instance(topology, snapshot, &state, config.latency_cap_ms)?;
            let solution = place(
                &instance,
                topology,
                config,
                slot,
                &mut exact_solves,
                &mut heuristic_solves,
                &mut events,
            )?;

            // Placed volume credited from the solver's shortfall report, so
            // a fully covered slot counts exactly its demand (summing the
            // assignment splits would leave float dust in the last ulp).
            let uncovered_volume: f64 = solution.uncovered.values().sum();
            slot_placed = (slot_demand - uncovered_volume).max(0.0);
            let mut packet_rng = rng_from_seed(indexed_seed(config.seed, "packets", slot as u64));
            for (&(f, d), &x) in &solution.assignment {
                let node = instance.facilities[f].node_id;
                let region = instance.demands[d].region_id;
                let lat = instance.latency[f][d];
                slot_assigned += x;
                slot_latency_weighted += lat * x;
                let hops = topology.hop_count(region, node)? as f64;
                slot_link_usage += x * hops / config.interval_s as f64;
                events.push(SimEvent::Placement {
                    slot,
                    region,
                    node,
                    volume: x,
                    latency_ms: lat,
                });
                let n_packets = (x * config.packets_per_unit).round() as u64;
                if n_packets > 0 {
                    let p = path_reliability(topology, config, region, node)?;
                    let u: f64 = packet_rng.random();
                    let delivered = binomial_quantile(u, n_packets, p);
                    slot_packets += n_packets;
                    slot_delivered += delivered;
                }
            }
            for (&d, &short) in &solution.uncovered {
                events.push(SimEvent::UnservedDemand {
                    slot,
                    region: instance.demands[d].region_id,
                    volume: short,
                });
            }

            // Multimedia service migrations across consecutive slots.
            current_primary = primary_nodes(&instance, &solution);
            for (region, node) in &current_primary {
                if let Some(prev) = prev_primary.get(region) {
                    if prev != node {
                        let volume = snapshot.demands[region];
                        let hops = topology.hop_count(*prev, *node)? as f64;
                        slot_migration_usage += volume * hops / config.interval_s as f64;
                        events.push(SimEvent::ServiceMigration {
                            slot,
                            region: *region,
                            from_node: *prev,
                            to_node: *node,
                            volume,
                        });
                    }
                }
            }

            // Plan the next slot's reservation from forecasts.
            if config.strategy == Strategy::Tiptop && slot + 1 < config.slots {
                let forecasts = forecasts.expect("validated above");
                if let Some(next_forecast) = forecasts.get(slot + 1) {
                    let fresh = NodeState {
                        free: capacities.clone(),
                        load: BTreeMap::new(),
                    };
                    let predicted = predicted_placement(
                        topology,
                        next_forecast,
                        &fresh,
                        config.latency_cap_ms,
                        &config.solver_limits,
                        indexed_seed(config.seed, "predict", slot as u64),
                    )?;
                    let a_current = solution.open_node_ids(&instance);
                    let new_plan = plan_reservation(slot + 1, &a_current, &predicted, &fresh);
                    if !new_plan.reserved_capacity.is_empty() {
                        events.push(SimEvent::Reservation {
                            slot_next: slot + 1,
                            nodes: new_plan.y.iter().copied().collect(),
                            total_reserved: new_plan.reserved_capacity.values().sum(),
                        });
                    }
                    plan = Some(new_plan);
                }
            }
        }
        prev_primary = current_primary;

        placed_total += slot_placed;
        assigned_total += slot_assigned;
        packets_sent += slot_packets;
        packets_delivered += slot_delivered;
        latency_weighted += slot_latency_weighted;
        link_usage_sum += slot_link_usage;
        migration_usage_sum += slot_migration_usage;

        per_slot.push(SlotTrace {
            slot,
            content_rate: if slot_demand > 0.0 {
                slot_placed / slot_demand
            } else {
                1.0
            },
            packet_rate: if slot_packets > 0 {
                slot_delivered as f64 / slot_packets as f64
            } else {
                1.0
            },
            avg_latency_ms: if slot_assigned > 0.0 {
                slot_latency_weighted / slot_assigned
            } else {
                0.0
            },
            link_usage: slot_link_usage,
            migration_usage: slot_migration_usage,
        });
    }

    Ok(SimReport {
        strategy: config.strategy,
        slots: config.slots,
        seed: config.seed,
        content_delivery_rate: if demanded_total > 0.0 {
            placed_total / demanded_total
        } else {
            1.0
        },
        packet_delivery_rate: if packets_sent > 0 {
            packets_delivered as f64 / packets_sent as f64
        } else {
            1.0
        },
        avg_latency_ms: if assigned_total > 0.0 {
            latency_weighted / assigned_total
        } else {
            0.0
        },
        link_usage: link_usage_sum / config.slots as f64,
        migration_usage: migration_usage_sum / config.slots as f64,
        exact_solves,
        heuristic_solves,
        per_slot,
        events,
    })
}

/// Strategy dispatch for one instance. Solver failures degrade to
/// best-effort instead of aborting the run.
#[allow(clippy::too_many_arguments)]
fn place(
    instance: &PlacementInstance,
    topology: &Topology,
    config: &SimConfig,
    slot: usize,
    exact_solves: &mut usize,
    heuristic_solves: &mut usize,
    events: &mut Vec<SimEvent>,
) -> Result<PlacementSolution> {
    match config.strategy {
        Strategy::Da => Ok(strategy_da(instance, topology)),
        Strategy::Qoeap => Ok(strategy_qoeap(
            instance,
            topology,
            indexed_seed(config.seed, "qoeap", slot as u64),
        )),
        Strategy::SmartFl | Strategy::Tiptop => {
            let limits = &config.solver_limits;
            if instance.facilities.len() <= limits.max_facilities
                && instance.demands.len() <= limits.max_demands
            {
                match solve_exact(instance, limits) {
                    Ok(solved) => {
                        *exact_solves += 1;
                        return Ok(solved.solution);
                    }
                    Err(e) => {
                        events.push(SimEvent::SolverFallback {
                            slot,
                            message: format!("exact solve failed: {e}"),
                        });
                    }
                }
            }
            *heuristic_solves += 1;
            let solved =
                solve_heuristic(instance, indexed_seed(config.seed, "solver", slot as u64))?;
            Ok(solved.solution)
        }
    }
}
