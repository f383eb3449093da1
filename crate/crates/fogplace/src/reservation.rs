//! Prediction-aware capacity reservation between consecutive slots.
//!
//! From the nodes serving multimedia now (A) and the nodes a solve over the
//! forecast demand picks for the next slot (P), the reserved set is
//! Y = A ∩ P and the adequate set Γ = Y ∪ P. Capacity equal to each Y-node's
//! predicted need is withheld from concurrent admission in the next slot;
//! concurrent services that would have landed there migrate to the nearest
//! feasible node, and where no target exists the reservation is waived.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::placement::{
    build_instance, solve_exact, solve_heuristic, NodeState, PlacementSolution, SolveLimits, Solved,
};
use crate::topology::Topology;
use crate::workload::{DemandSnapshot, ServiceSpec};

/// A reservation plan for the next slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservationPlan {
    pub t_next: usize,
    /// Reserved nodes: serving now and predicted to serve next.
    pub y: BTreeSet<u32>,
    /// Adequate nodes: Y together with the predicted set.
    pub gamma: BTreeSet<u32>,
    /// Capacity units withheld per reserved node.
    pub reserved_capacity: BTreeMap<u32, f64>,
}

impl ReservationPlan {
    pub fn validate(&self) -> bool {
        self.y.is_subset(&self.gamma) && self.reserved_capacity.keys().all(|n| self.y.contains(n))
    }
}

/// Outcome of solving the predicted instance: the predicted open set and the
/// volume each open node would carry.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPlacement {
    pub nodes: BTreeSet<u32>,
    pub predicted_need: BTreeMap<u32, f64>,
    pub solution: PlacementSolution,
}

/// Solve the placement over a forecast snapshot. Instances within the exact
/// limits solve exactly, larger ones heuristically. An empty forecast yields
/// an empty predicted set.
pub fn predicted_placement(
    topology: &Topology,
    forecast_snapshot: &DemandSnapshot,
    node_state: &NodeState,
    latency_cap: f64,
    limits: &SolveLimits,
    seed: u64,
) -> Result<PredictedPlacement> {
    if forecast_snapshot.is_empty() {
        return Ok(PredictedPlacement {
            nodes: BTreeSet::new(),
            predicted_need: BTreeMap::new(),
            solution: PlacementSolution {
                open: BTreeSet::new(),
                assignment: BTreeMap::new(),
                objective: 0.0,
                status: crate::placement::SolutionStatus::Optimal,
                uncovered: BTreeMap::new(),
            },
        });
    }
    let instance = build_instance(topology, forecast_snapshot, node_state, latency_cap)?;
    let Solved { solution, .. } = if instance.facilities.len() <= limits.max_facilities
        && instance.demands.len() <= limits.max_demands
    {
        solve_exact(&instance, limits)?
    } else {
        solve_heuristic(&instance, seed)?
    };
    let nodes = solution.open_node_ids(&instance);
    let mut predicted_need: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(f, _), &x) in &solution.assignment {
        *predicted_need
            .entry(instance.facilities[f].node_id)
            .or_insert(0.0) += x;
    }
    Ok(PredictedPlacement {
        nodes,
        predicted_need,
        solution,
    })
}

/// Pure set algebra of the reservation scheme: Y = A ∩ P, Γ = Y ∪ P.
pub fn reserve(
    a_current: &BTreeSet<u32>,
    p_next: &BTreeSet<u32>,
) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let y: BTreeSet<u32> = a_current.intersection(p_next).copied().collect();
    let gamma: BTreeSet<u32> = y.union(p_next).copied().collect();
    (y, gamma)
}

/// Assemble a plan: reserve on each Y-node the volume the predicted solve
/// assigns to it, capped by the node's free capacity.
pub fn plan_reservation(
    t_next: usize,
    a_current: &BTreeSet<u32>,
    predicted: &PredictedPlacement,
    node_state: &NodeState,
) -> ReservationPlan {
    let (y, gamma) = reserve(a_current, &predicted.nodes);
    let mut reserved_capacity = BTreeMap::new();
    for &node in &y {
        let need = predicted.predicted_need.get(&node).copied().unwrap_or(0.0);
        let free = node_state.free.get(&node).copied().unwrap_or(0.0);
        let amount = need.min(free);
        if amount > 0.0 {
            reserved_capacity.insert(node, amount);
        }
    }
    ReservationPlan {
        t_next,
        y,
        gamma,
        reserved_capacity,
    }
}

/// A concurrent-class service wanting admission at a specific node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrentService {
    pub id: u64,
    /// Node the service would occupy without reservations.
    pub target_node: u32,
    /// Region used for latency feasibility when migrating.
    pub home_region: u32,
    pub volume: f64,
    pub spec: ServiceSpec,
}

/// One concurrent-service migration performed by a reservation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub service_id: u64,
    pub from_node: u32,
    pub to_node: u32,
    pub volume: f64,
}

/// A waived reservation amount (no feasible migration target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaiverRecord {
    pub node: u32,
    pub service_id: u64,
    pub volume: f64,
}

/// Result of applying a reservation while admitting the concurrent queue.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservationOutcome {
    /// Node state after concurrent admission, with reserved capacity still
    /// free for multimedia use.
    pub node_state: NodeState,
    /// Capacity actually held per node after waivers.
    pub effective_reservation: BTreeMap<u32, f64>,
    pub migrations: Vec<MigrationRecord>,
    pub waivers: Vec<WaiverRecord>,
}

/// Admit the concurrent queue under the plan.
///
/// Concurrent services land on their target node unless that would eat into
/// reserved capacity; then the nearest (lowest-latency from the service's
/// home region) node with room and acceptable latency takes them instead. If
/// no such node exists the conflicting amount is waived: the reservation
/// shrinks and the service stays. Multimedia sees `free` unchanged by
/// reservations (they are held *for* it); concurrent admission reduces
/// `free`.
pub fn apply_reservation(
    topology: &Topology,
    node_state: &NodeState,
    plan: &ReservationPlan,
    concurrent: &[ConcurrentService],
) -> Result<ReservationOutcome> {
    let mut state = node_state.clone();
    let mut reserved = plan.reserved_capacity.clone();
    let mut migrations = Vec::new();
    let mut waivers = Vec::new();

    for service in concurrent {
        let target = service.target_node;
        let free = state.free.get(&target).copied().unwrap_or(0.0);
        let held = reserved.get(&target).copied().unwrap_or(0.0);
        let available = free - held;
        if available + 1e-9 >= service.volume {
            // Fits beside the reservation.
            *state.free.get_mut(&target).expect("known node") -= service.volume;
            continue;
        }
        if held <= 0.0 {
            // No reservation involved: admit what fits (partial concurrent
            // load simply tops the node off).
            let take = free.min(service.volume);
            if take > 0.0 {
                *state.free.get_mut(&target).expect("known node") -= take;
            }
            continue;
        }
        // The service conflicts with a reservation: look for a migration
        // target, nearest by latency from the home region, any tier.
        let mut candidates: Vec<(f64, u32)> = Vec::new();
        for node in topology.nodes() {
            if node.id == target {
                continue;
            }
            let nfree = state.free.get(&node.id).copied().unwrap_or(0.0);
            let nheld = reserved.get(&node.id).copied().unwrap_or(0.0);
            if nfree - nheld + 1e-9 < service.volume {
                continue;
            }
            let load = state
                .load
                .get(&node.id)
                .copied()
                .unwrap_or(0.0)
                .clamp(0.0, 1.0);
            let lat = topology.latency(node.id, service.home_region, load)?;
            if lat <= service.spec.max_latency_ms {
                candidates.push((lat, node.id));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match candidates.first() {
            Some(&(_, to)) => {
                *state.free.get_mut(&to).expect("known node") -= service.volume;
                migrations.push(MigrationRecord {
                    service_id: service.id,
                    from_node: target,
                    to_node: to,
                    volume: service.volume,
                });
            }
            None => {
                // Waive the conflicting amount and admit in place.
                let conflict = (service.volume - available).min(held);
                let entry = reserved.get_mut(&target).expect("held > 0");
                *entry -= conflict;
                if *entry <= 1e-12 {
                    reserved.remove(&target);
                }
                waivers.push(WaiverRecord {
                    node: target,
                    service_id: service.id,
                    volume: conflict,
                });
                let take = free.min(service.volume);
                *state.free.get_mut(&target).expect("known node") -= take;
            }
        }
    }

    Ok(ReservationOutcome {
        node_state: state,
        effective_reservation: reserved,
        migrations,
        waivers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{assign_resources, build_hierarchy, BaseStation, TierRanges};
    use crate::workload::ServiceClass;

    fn set(ids: &[u32]) -> BTreeSet<u32> {
        ids.iter().copied().collect()
    }

    #[test]
    fn reserve_walkthrough() {
        // Serving {E, C} now, predicted {E, C, D}: reserve both, adequate all
        // three. Letters mapped to ids E=4, C=2, D=3.
        let (y, gamma) = reserve(&set(&[4, 2]), &set(&[4, 2, 3]));
        assert_eq!(y, set(&[4, 2]));
        assert_eq!(gamma, set(&[4, 2, 3]));
    }

    #[test]
    fn reserve_disjoint_and_idempotent() {
        let (y, gamma) = reserve(&set(&[1, 2]), &set(&[3, 4]));
        assert_eq!(y, set(&[]));
        assert_eq!(gamma, set(&[3, 4]));
        let (y2, gamma2) = reserve(&set(&[5, 6]), &set(&[5, 6]));
        assert_eq!(y2, set(&[5, 6]));
        assert_eq!(gamma2, set(&[5, 6]));
    }

    #[test]
    fn reserve_set_identities_fuzzed() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(77);
        for _ in 0..1000 {
            let a: BTreeSet<u32> = (0..rng.random_range(0..12))
                .map(|_| rng.random_range(0..20))
                .collect();
            let p: BTreeSet<u32> = (0..rng.random_range(0..12))
                .map(|_| rng.random_range(0..20))
                .collect();
            let (y, gamma) = reserve(&a, &p);
            assert!(y.is_subset(&a) && y.is_subset(&p));
            assert!(gamma.is_superset(&p));
            assert_eq!(gamma, p.union(&y).copied().collect());
        }
    }

    fn small_world() -> (Topology, NodeState) {
        let stations: Vec<BaseStation> = (0..6)
            .map(|i| BaseStation {
                id: i,
                x: (i as f64) * 1_000.0,
                y: ((i % 2) as f64) * 1_000.0,
                coverage_radius: 1_200.0,
            })
            .collect();
        let topo = build_hierarchy(&stations, 3_000.0, 2, 9).unwrap();
        let topo = assign_resources(&topo, &TierRanges::default(), 9).unwrap();
        let state = NodeState::fresh(&topo).unwrap();
        (topo, state)
    }

    #[test]
    fn empty_forecast_gives_empty_prediction() {
        let (topo, state) = small_world();
        let snapshot = DemandSnapshot {
            time: 1,
            demands: BTreeMap::new(),
        };
        let p = predicted_placement(&topo, &snapshot, &state, 100.0, &SolveLimits::default(), 1)
            .unwrap();
        assert!(p.nodes.is_empty());
        assert!(p.predicted_need.is_empty());
    }

    #[test]
    fn perfect_forecast_matches_unpredicted_solve() {
        let (topo, state) = small_world();
        let mut demands = BTreeMap::new();
        demands.insert(0u32, 700.0);
        demands.insert(3u32, 900.0);
        let snapshot = DemandSnapshot { time: 2, demands };
        let p = predicted_placement(&topo, &snapshot, &state, 100.0, &SolveLimits::default(), 1)
            .unwrap();
        let instance = build_instance(&topo, &snapshot, &state, 100.0).unwrap();
        let direct = solve_exact(&instance, &SolveLimits::default()).unwrap();
        assert_eq!(p.nodes, direct.solution.open_node_ids(&instance));
    }

    fn concurrent(id: u64, target: u32, home: u32, volume: f64) -> ConcurrentService {
        ConcurrentService {
            id,
            target_node: target,
            home_region: home,
            volume,
            spec: ServiceSpec {
                class: ServiceClass::Concurrent,
                max_latency_ms: 150.0,
                ram_gb: 1.0,
                mips_demand: 0.5,
            },
        }
    }

    #[test]
    fn no_conflict_means_full_reservation_no_migration() {
        let (topo, state) = small_world();
        let plan = ReservationPlan {
            t_next: 1,
            y: set(&[0]),
            gamma: set(&[0]),
            reserved_capacity: [(0u32, 100.0)].into_iter().collect(),
        };
        // Concurrent service fits beside the reservation.
        let queue = vec![concurrent(1, 0, 0, 500.0)];
        let out = apply_reservation(&topo, &state, &plan, &queue).unwrap();
        assert!(out.migrations.is_empty() && out.waivers.is_empty());
        assert_eq!(out.effective_reservation[&0], 100.0);
        let before = state.free[&0];
        assert_eq!(out.node_state.free[&0], before - 500.0);
    }

    #[test]
    fn conflicting_service_migrates_to_nearest_feasible() {
        let (topo, state) = small_world();
        let free0 = state.free[&0];
        let plan = ReservationPlan {
            t_next: 1,
            y: set(&[0]),
            gamma: set(&[0]),
            reserved_capacity: [(0u32, free0)].into_iter().collect(),
        };
        let queue = vec![concurrent(9, 0, 0, 10.0)];
        let out = apply_reservation(&topo, &state, &plan, &queue).unwrap();
        assert_eq!(out.migrations.len(), 1);
        assert_eq!(out.migrations[0].from_node, 0);
        assert!(out.waivers.is_empty());
        // Reservation intact.
        assert_eq!(out.effective_reservation[&0], free0);
        // The migration target is the lowest-latency feasible node.
        let to = out.migrations[0].to_node;
        let lat_to = topo.latency(to, 0, 0.0).unwrap();
        for node in topo.nodes() {
            if node.id != 0 && node.id != to {
                let lat = topo.latency(node.id, 0, 0.0).unwrap();
                assert!(
                    lat_to <= lat + 1e-9,
                    "node {} closer than chosen {}",
                    node.id,
                    to
                );
            }
        }
    }

    #[test]
    fn no_target_waives_reservation_and_keeps_service() {
        let (topo, mut state) = small_world();
        // Saturate every node except the target so no migration fits.
        for (id, free) in state.free.iter_mut() {
            if *id != 0 {
                *free = 0.0;
            }
        }
        let free0 = state.free[&0];
        let plan = ReservationPlan {
            t_next: 1,
            y: set(&[0]),
            gamma: set(&[0]),
            reserved_capacity: [(0u32, free0)].into_iter().collect(),
        };
        let queue = vec![concurrent(2, 0, 0, 10.0)];
        let out = apply_reservation(&topo, &state, &plan, &queue).unwrap();
        assert!(out.migrations.is_empty());
        assert_eq!(out.waivers.len(), 1);
        assert!((out.waivers[0].volume - 10.0).abs() < 1e-9);
        assert!((out.effective_reservation[&0] - (free0 - 10.0)).abs() < 1e-9);
        // Service stayed: free capacity dropped on the target.
        assert!((out.node_state.free[&0] - (free0 - 10.0)).abs() < 1e-9);
    }

    /// Micro-scenario with five stations labeled A..E (ids 0..4): only C, D,
    /// and E hold capacity for the predicted demand, so the predicted set is
    /// exactly {E, C, D}; a concurrent service displaced from reserved E
    /// lands on B, the nearest node with room.
    #[test]
    fn micro_scenario_prediction_and_displacement() {
        let stations: Vec<BaseStation> = (0..5)
            .map(|i| BaseStation {
                id: i,
                // B, C, D, E share one community; A sits alone far away, so
                // any path to A crosses extra tiers.
                x: [9_000.0, 0.0, 1_000.0, 1_500.0, 500.0][i as usize],
                y: 0.0,
                coverage_radius: 800.0,
            })
            .collect();
        let topo = build_hierarchy(&stations, 3_000.0, 2, 1).unwrap();
        let topo = assign_resources(&topo, &TierRanges::default(), 1).unwrap();
        let mut state = NodeState::fresh(&topo).unwrap();
        // Stations A (0) and B (1) are too small for any predicted demand;
        // upper tiers are latency-dominated and stay shut.
        for (id, free) in state.free.iter_mut() {
            match topo.node(*id).unwrap().tier {
                0 if *id == 0 || *id == 1 => *free = 3.0,
                0 => *free = 10.0,
                _ => *free = 1_000.0,
            }
        }
        let mut demands = BTreeMap::new();
        demands.insert(2u32, 10.0); // region C saturates C
        demands.insert(3u32, 10.0); // region D saturates D
        demands.insert(4u32, 10.0); // region E saturates E
        let forecast = DemandSnapshot { time: 1, demands };
        let predicted =
            predicted_placement(&topo, &forecast, &state, 100.0, &SolveLimits::default(), 1)
                .unwrap();
        assert_eq!(
            predicted.nodes,
            set(&[2, 3, 4]),
            "predicted set must be C, D, E"
        );

        // Reserve everything predicted; a concurrent service aims at E.
        let plan = plan_reservation(1, &predicted.nodes, &predicted, &state);
        assert_eq!(plan.y, set(&[2, 3, 4]));
        let queue = vec![concurrent(7, 4, 4, 3.0)];
        let out = apply_reservation(&topo, &state, &plan, &queue).unwrap();
        assert_eq!(out.migrations.len(), 1);
        assert_eq!(out.migrations[0].from_node, 4);
        assert_eq!(
            out.migrations[0].to_node, 1,
            "displaced service must land on B, the nearest node with room"
        );
    }

    #[test]
    fn reserved_capacity_never_exceeds_free() {
        let (topo, state) = small_world();
        let mut demands = BTreeMap::new();
        demands.insert(1u32, 400.0);
        let snapshot = DemandSnapshot { time: 3, demands };
        let p = predicted_placement(&topo, &snapshot, &state, 100.0, &SolveLimits::default(), 5)
            .unwrap();
        let plan = plan_reservation(3, &p.nodes, &p, &state);
        assert!(plan.validate());
        for (node, amount) in &plan.reserved_capacity {
            assert!(*amount <= state.free[node] + 1e-9);
        }
    }
}
