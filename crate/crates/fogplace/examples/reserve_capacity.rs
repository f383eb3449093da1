//! Prediction-aware reservation between two slots: compute the reserved and
//! adequate node sets, then admit a concurrent queue under the plan.
//!
//! ```bash
//! cargo run --example reserve_capacity
//! ```

use std::collections::BTreeMap;

use fogplace::placement::{NodeState, SolveLimits};
use fogplace::reservation::{
    apply_reservation, plan_reservation, predicted_placement, reserve, ConcurrentService,
};
use fogplace::topology::{assign_resources, build_hierarchy, random_stations, TierRanges};
use fogplace::workload::{DemandSnapshot, ServiceSpec};

fn main() -> fogplace::Result<()> {
    // Pure set algebra first: serving {4, 2} now, predicted {4, 2, 3} next.
    let a: std::collections::BTreeSet<u32> = [4, 2].into_iter().collect();
    let p: std::collections::BTreeSet<u32> = [4, 2, 3].into_iter().collect();
    let (y, gamma) = reserve(&a, &p);
    println!("serving {a:?}, predicted {p:?} -> reserved {y:?}, adequate {gamma:?}");

    // A full plan against a real topology and forecast snapshot.
    let stations = random_stations(6, 5_000.0, 5_000.0, 1_500.0, 3);
    let topo = build_hierarchy(&stations, 3_000.0, 2, 3)?;
    let topo = assign_resources(&topo, &TierRanges::default(), 3)?;
    let mut state = NodeState::fresh(&topo)?;
    for free in state.free.values_mut() {
        *free /= 100.0;
    }

    let mut predicted_demand = BTreeMap::new();
    predicted_demand.insert(0u32, 30.0);
    predicted_demand.insert(4u32, 20.0);
    let forecast = DemandSnapshot {
        time: 1,
        demands: predicted_demand,
    };
    let predicted =
        predicted_placement(&topo, &forecast, &state, 100.0, &SolveLimits::default(), 1)?;
    println!(
        "\npredicted serving set for the next slot: {:?}",
        predicted.nodes
    );

    let plan = plan_reservation(1, &predicted.nodes, &predicted, &state);
    println!("reserved capacity per node: {:?}", plan.reserved_capacity);

    // A concurrent queue that collides with one reservation.
    let busy_node = *plan
        .reserved_capacity
        .keys()
        .next()
        .expect("some reservation");
    let queue = vec![ConcurrentService {
        id: 1,
        target_node: busy_node,
        home_region: 0,
        volume: state.free[&busy_node] * 0.9,
        spec: ServiceSpec::concurrent_default(),
    }];
    let outcome = apply_reservation(&topo, &state, &plan, &queue)?;
    for m in &outcome.migrations {
        println!(
            "concurrent service {} migrated node {} -> node {} ({:.1} units)",
            m.service_id, m.from_node, m.to_node, m.volume
        );
    }
    for w in &outcome.waivers {
        println!(
            "reservation waived on node {}: {:.1} units",
            w.node, w.volume
        );
    }
    println!(
        "effective reservation after admission: {:?}",
        outcome.effective_reservation
    );
    Ok(())
}
