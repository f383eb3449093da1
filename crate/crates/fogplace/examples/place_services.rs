//! Solve a per-slot placement instance exactly and heuristically, then
//! verify the solutions against the model constraints.
//!
//! ```bash
//! cargo run --example place_services
//! ```

use std::collections::BTreeMap;

use fogplace::placement::{
    build_instance, objective, solve_exact, solve_heuristic, verify, NodeState, SolveLimits,
};
use fogplace::topology::{assign_resources, build_hierarchy, random_stations, TierRanges};
use fogplace::workload::DemandSnapshot;

fn main() -> fogplace::Result<()> {
    let stations = random_stations(8, 7_000.0, 7_000.0, 1_500.0, 21);
    let topo = build_hierarchy(&stations, 3_000.0, 2, 21)?;
    let topo = assign_resources(&topo, &TierRanges::default(), 21)?;

    // Three regions demand service; nodes hold limited free capacity.
    let mut state = NodeState::fresh(&topo)?;
    for free in state.free.values_mut() {
        *free /= 400.0; // scale capacity down to make the choice interesting
    }
    let mut demands = BTreeMap::new();
    demands.insert(0u32, 9.0);
    demands.insert(3u32, 14.0);
    demands.insert(6u32, 6.0);
    let snapshot = DemandSnapshot { time: 0, demands };
    let instance = build_instance(&topo, &snapshot, &state, 100.0)?;
    println!(
        "instance: {} facilities x {} demands, total volume {:.1}",
        instance.facilities.len(),
        instance.demands.len(),
        instance.total_demand()
    );

    let limits = SolveLimits {
        max_facilities: 16,
        ..SolveLimits::default()
    };
    let exact = solve_exact(&instance, &limits)?;
    println!(
        "\nexact: objective {:.3} opening {:?} ({} nodes explored, {:.2} ms)",
        exact.solution.objective,
        exact.solution.open_node_ids(&instance),
        exact.diagnostics.nodes_explored,
        exact.diagnostics.wall_ms
    );
    for (&(f, d), &x) in &exact.solution.assignment {
        println!(
            "  node {} <- region {}: {:.1} units at {:.1} ms",
            instance.facilities[f].node_id,
            instance.demands[d].region_id,
            x,
            instance.latency[f][d]
        );
    }

    let heur = solve_heuristic(&instance, 1)?;
    println!(
        "\nheuristic: objective {:.3} opening {:?} (descent: {:?})",
        heur.solution.objective,
        heur.solution.open_node_ids(&instance),
        heur.diagnostics.bound_history
    );
    eprintln!("{}", heur.diagnostics.log_line());
    println!(
        "gap vs optimum: {:.2}%",
        100.0 * (heur.solution.objective / exact.solution.objective - 1.0)
    );

    for (name, sol) in [("exact", &exact.solution), ("heuristic", &heur.solution)] {
        let report = verify(&instance, sol);
        println!(
            "verify {name}: feasible = {}, objective recomputed = {:.3}",
            report.feasible,
            objective(&instance, sol)
        );
    }
    Ok(())
}
