//! Capacitated facility-location placement.
//!
//! Each slot's demand set becomes an instance: nodes with free capacity are
//! facilities, demanding regions are clients, and the latency matrix prices
//! each admissible assignment. The objective charges one unit (times an
//! optional weight) per opened (facility, service) pair plus
//! latency-weighted assignment volume. Demands are divisible.

pub mod exact;
pub mod heuristic;
pub mod transport;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;
use crate::workload::DemandSnapshot;

pub use exact::{solve_exact, SolveLimits};
pub use heuristic::solve_heuristic;
pub use transport::{solve_transport, TransportSolution};

/// A candidate facility: a topology node with free capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    pub node_id: u32,
    pub capacity: f64,
    pub open_cost: f64,
}

/// One demand: a region requesting a service with a volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub region_id: u32,
    pub service_id: u32,
    pub volume: f64,
}

/// The per-slot CFLP data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementInstance {
    pub t: usize,
    pub facilities: Vec<Facility>,
    pub demands: Vec<Demand>,
    /// Facility-major latency matrix in milliseconds.
    pub latency: Vec<Vec<f64>>,
    /// Arcs with latency above this are unusable.
    pub latency_cap: f64,
    /// Weight on the facility-opening term of the objective.
    pub facility_weight: f64,
}

/// Feasibility precheck report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityCheck {
    pub feasible: bool,
    pub total_admissible_capacity: f64,
    pub total_demand: f64,
    /// Demands with no admissible facility at all.
    pub unreachable_demands: Vec<usize>,
}

impl PlacementInstance {
    pub fn admissible(&self, facility: usize, demand: usize) -> bool {
        self.latency[facility][demand] <= self.latency_cap
    }

    /// Latency of an arc if admissible, infinity otherwise.
    pub fn arc_cost(&self, facility: usize, demand: usize) -> f64 {
        if self.admissible(facility, demand) {
            self.latency[facility][demand]
        } else {
            f64::INFINITY
        }
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.iter().map(|d| d.volume).sum()
    }

    /// Up-front capacity feasibility: every demand reaches some facility and
    /// the admissible capacity covers the total volume.
    pub fn feasibility_precheck(&self) -> CapacityCheck {
        let mut unreachable = Vec::new();
        for d in 0..self.demands.len() {
            if !(0..self.facilities.len()).any(|f| self.admissible(f, d)) {
                unreachable.push(d);
            }
        }
        let usable_capacity: f64 = self
            .facilities
            .iter()
            .enumerate()
            .filter(|(f, _)| (0..self.demands.len()).any(|d| self.admissible(*f, d)))
            .map(|(_, fac)| fac.capacity)
            .sum();
        let total = self.total_demand();
        CapacityCheck {
            feasible: unreachable.is_empty() && usable_capacity + 1e-9 >= total,
            total_admissible_capacity: usable_capacity,
            total_demand: total,
            unreachable_demands: unreachable,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latency.len() != self.facilities.len() {
            return Err(Error::InvalidInput("latency rows != facilities".into()));
        }
        for row in &self.latency {
            if row.len() != self.demands.len() {
                return Err(Error::InvalidInput("latency columns != demands".into()));
            }
        }
        if self.facilities.iter().any(|f| f.capacity <= 0.0) {
            return Err(Error::InvalidInput(
                "facility capacities must be positive".into(),
            ));
        }
        if self.facilities.iter().any(|f| f.open_cost < 0.0) {
            return Err(Error::InvalidInput(
                "open costs must be non-negative".into(),
            ));
        }
        if self.demands.iter().any(|d| d.volume <= 0.0) {
            return Err(Error::InvalidInput(
                "demand volumes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionStatus {
    Optimal,
    FeasibleHeuristic,
    Infeasible,
}

/// A placement: open (facility, service) pairs and the assignment volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    /// Open flags y as (facility index, service id) pairs.
    pub open: BTreeSet<(usize, u32)>,
    /// Assignment x as (facility index, demand index) -> volume. Serialized
    /// as an array of (facility, demand, volume) triples.
    #[serde(with = "assignment_serde")]
    pub assignment: BTreeMap<(usize, usize), f64>,
    pub objective: f64,
    pub status: SolutionStatus,
    /// Unserved volume per demand index; empty when fully covered.
    pub uncovered: BTreeMap<usize, f64>,
}

mod assignment_serde {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(usize, usize), f64>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let triples: Vec<(usize, usize, f64)> = map.iter().map(|(&(f, d), &x)| (f, d, x)).collect();
        triples.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<(usize, usize), f64>, D::Error> {
        let triples: Vec<(usize, usize, f64)> = Vec::deserialize(deserializer)?;
        Ok(triples.into_iter().map(|(f, d, x)| ((f, d), x)).collect())
    }
}

impl PlacementSolution {
    /// Facility indices with at least one open service.
    pub fn open_facilities(&self) -> BTreeSet<usize> {
        self.open.iter().map(|(f, _)| *f).collect()
    }

    /// Node ids of open facilities, resolved against the instance.
    pub fn open_node_ids(&self, instance: &PlacementInstance) -> BTreeSet<u32> {
        self.open_facilities()
            .into_iter()
            .map(|f| instance.facilities[f].node_id)
            .collect()
    }

    /// Volume assigned to each facility index.
    pub fn facility_loads(&self, n_facilities: usize) -> Vec<f64> {
        let mut loads = vec![0.0; n_facilities];
        for (&(f, _), &x) in &self.assignment {
            loads[f] += x;
        }
        loads
    }

    /// Volume-weighted mean latency of the assignment.
    pub fn mean_latency(&self, instance: &PlacementInstance) -> f64 {
        let mut vol = 0.0;
        let mut acc = 0.0;
        for (&(f, d), &x) in &self.assignment {
            acc += instance.latency[f][d] * x;
            vol += x;
        }
        if vol > 0.0 {
            acc / vol
        } else {
            0.0
        }
    }
}

/// Build a solution from a transport assignment over a set of open
/// facilities: open pairs are derived from the actually used arcs.
pub(crate) fn solution_from_transport(
    instance: &PlacementInstance,
    transport: &TransportSolution,
    status: SolutionStatus,
) -> PlacementSolution {
    let mut open = BTreeSet::new();
    let mut assignment = BTreeMap::new();
    for &(f, d, x) in &transport.assignment {
        if x > 0.0 {
            open.insert((f, instance.demands[d].service_id));
            assignment.insert((f, d), x);
        }
    }
    let mut uncovered = BTreeMap::new();
    for (d, demand) in instance.demands.iter().enumerate() {
        let short = demand.volume - transport.served[d];
        if short > 1e-6 * demand.volume.max(1.0) {
            uncovered.insert(d, short);
        }
    }
    let mut solution = PlacementSolution {
        open,
        assignment,
        objective: 0.0,
        status,
        uncovered,
    };
    solution.objective = objective(instance, &solution);
    solution
}

/// Exact objective: facility_weight * sum of open-pair costs plus
/// latency-weighted assignment volume.
pub fn objective(instance: &PlacementInstance, solution: &PlacementSolution) -> f64 {
    let open_term: f64 = solution
        .open
        .iter()
        .map(|&(f, _)| instance.facilities[f].open_cost)
        .sum();
    let assign_term: f64 = solution
        .assignment
        .iter()
        .map(|(&(f, d), &x)| instance.latency[f][d] * x)
        .sum();
    instance.facility_weight * open_term + assign_term
}

/// One constraint violation found by [`verify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: String,
    pub detail: String,
}

/// Verification report; never an error, even for wildly invalid solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Check demand balance, capacity gating by open flags, non-negativity, and
/// admissible-arc usage. Recorded uncovered volumes count toward balance, so
/// solver-flagged partial solutions validate their own bookkeeping.
pub fn verify(instance: &PlacementInstance, solution: &PlacementSolution) -> VerifyReport {
    let mut violations = Vec::new();
    let mut push = |constraint: &str, detail: String| {
        violations.push(Violation {
            constraint: constraint.into(),
            detail,
        });
    };

    for (&(f, d), &x) in &solution.assignment {
        if x < 0.0 {
            push("non-negativity", format!("x[{f},{d}] = {x}"));
        }
        if f >= instance.facilities.len() || d >= instance.demands.len() {
            push("dimensions", format!("assignment ({f},{d}) out of range"));
        }
    }

    // Demand balance with 1e-9 relative tolerance (recorded shortfalls count).
    for (d, demand) in instance.demands.iter().enumerate() {
        let assigned: f64 = solution
            .assignment
            .iter()
            .filter(|(&(_, dd), _)| dd == d)
            .map(|(_, &x)| x)
            .sum();
        let credited = solution.uncovered.get(&d).copied().unwrap_or(0.0);
        let miss = (assigned + credited - demand.volume).abs();
        if miss > 1e-9 * demand.volume.max(1.0) {
            push(
                "demand-balance",
                format!(
                    "demand {d}: assigned {assigned} + uncovered {credited} != {}",
                    demand.volume
                ),
            );
        }
    }

    for (f, facility) in instance.facilities.iter().enumerate() {
        let load: f64 = solution
            .assignment
            .iter()
            .filter(|(&(ff, _), _)| ff == f)
            .map(|(_, &x)| x)
            .sum();
        if load > facility.capacity + 1e-9 * facility.capacity.max(1.0) {
            push(
                "capacity",
                format!(
                    "facility {f} carries {load} over capacity {}",
                    facility.capacity
                ),
            );
        }
    }
    for (&(f, d), &x) in &solution.assignment {
        if x <= 0.0 || f >= instance.facilities.len() || d >= instance.demands.len() {
            continue;
        }
        let service = instance.demands[d].service_id;
        if !solution.open.contains(&(f, service)) {
            push(
                "open-gating",
                format!("assignment x[{f},{d}] = {x} on closed pair ({f}, service {service})"),
            );
        }
        if !instance.admissible(f, d) {
            push(
                "admissibility",
                format!(
                    "arc ({f},{d}) has latency {} above the cap {}",
                    instance.latency[f][d], instance.latency_cap
                ),
            );
        }
    }

    VerifyReport {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Per-node dynamic state entering a slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    /// Free capacity in volume units per node.
    pub free: BTreeMap<u32, f64>,
    /// Load fraction in [0, 1] per node (drives the latency model).
    pub load: BTreeMap<u32, f64>,
}

impl NodeState {
    /// Full capacity, nothing loaded.
    pub fn fresh(topology: &Topology) -> Result<NodeState> {
        let mut free = BTreeMap::new();
        let mut load = BTreeMap::new();
        for node in topology.nodes() {
            let res = node.resources.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!("node {} has no resources assigned", node.id))
            })?;
            free.insert(node.id, res.storage_gb);
            load.insert(node.id, 0.0);
        }
        Ok(NodeState { free, load })
    }
}

/// Assemble the CFLP instance for one snapshot: facilities are nodes with
/// positive free capacity, latencies come from the topology under each
/// node's load, and arcs over `latency_cap` are excluded.
pub fn build_instance(
    topology: &Topology,
    snapshot: &DemandSnapshot,
    node_state: &NodeState,
    latency_cap: f64,
) -> Result<PlacementInstance> {
    if snapshot.is_empty() {
        return Err(Error::InvalidInput(format!(
            "snapshot at slot {} has no demands",
            snapshot.time
        )));
    }
    let mut facilities = Vec::new();
    for node in topology.nodes() {
        let free = node_state.free.get(&node.id).copied().unwrap_or(0.0);
        if free > 0.0 {
            facilities.push(Facility {
                node_id: node.id,
                capacity: free,
                open_cost: 1.0,
            });
        }
    }
    let demands: Vec<Demand> = snapshot
        .demands
        .iter()
        .map(|(&region_id, &volume)| Demand {
            region_id,
            service_id: 0,
            volume,
        })
        .collect();
    let mut latency = vec![vec![0.0; demands.len()]; facilities.len()];
    for (f, facility) in facilities.iter().enumerate() {
        let load = node_state
            .load
            .get(&facility.node_id)
            .copied()
            .unwrap_or(0.0)
            .clamp(0.0, 1.0);
        for (d, demand) in demands.iter().enumerate() {
            latency[f][d] = topology.latency(facility.node_id, demand.region_id, load)?;
        }
    }
    let instance = PlacementInstance {
        t: snapshot.time,
        facilities,
        demands,
        latency,
        latency_cap,
        facility_weight: 1.0,
    };
    instance.validate()?;
    Ok(instance)
}

pub const PLACEMENT_SCHEMA_VERSION: u32 = 1;

/// Versioned wire wrapper for instances and solutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementDoc {
    pub schema_version: u32,
    pub instance: PlacementInstance,
    pub solution: Option<PlacementSolution>,
}

/// Diagnostics emitted by a solver run, one structured record per solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub solver: String,
    pub nodes_explored: usize,
    /// Incumbent objective after each improvement (exact) or accepted move
    /// (heuristic); non-increasing.
    pub bound_history: Vec<f64>,
    pub wall_ms: f64,
}

impl SolveDiagnostics {
    /// One-line JSON record for structured logging.
    pub fn log_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{self:?}"))
    }
}

/// A solution together with its solve diagnostics.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: PlacementSolution,
    pub diagnostics: SolveDiagnostics,
}

#[cfg(test)]
pub(crate) fn micro_instance(
    caps: &[f64],
    vols: &[f64],
    lat: &[&[f64]],
    cap: f64,
) -> PlacementInstance {
    PlacementInstance {
        t: 0,
        facilities: caps
            .iter()
            .enumerate()
            .map(|(i, &c)| Facility {
                node_id: i as u32,
                capacity: c,
                open_cost: 1.0,
            })
            .collect(),
        demands: vols
            .iter()
            .enumerate()
            .map(|(j, &v)| Demand {
                region_id: j as u32,
                service_id: 0,
                volume: v,
            })
            .collect(),
        latency: lat.iter().map(|row| row.to_vec()).collect(),
        latency_cap: cap,
        facility_weight: 1.0,
    }
}
