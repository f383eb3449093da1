//! Analyze selected slots: traffic intensity class, the node set the
//! cost-minimizing placement opens, and per-node capacity/latency.
//!
//! ```bash
//! cargo run --example snapshot_report
//! ```

use fogplace::simulate::{snapshot_report, SnapshotAnalysis, SnapshotConfig};
use fogplace::topology::{
    assign_resources, build_hierarchy, random_stations, ResourceRange, TierRanges,
};
use fogplace::workload::{synth_workload, SynthConfig};

fn main() -> fogplace::Result<()> {
    let stations = random_stations(10, 8_000.0, 8_000.0, 1_500.0, 9);
    let topo = build_hierarchy(&stations, 3_000.0, 2, 9)?;
    let point = |v: f64| (v, v);
    let storage = [30.0, 100.0, 250.0, 600.0, 1_500.0];
    let defaults = TierRanges::default();
    let ranges = TierRanges(
        defaults
            .0
            .iter()
            .zip(storage)
            .map(|(r, s)| ResourceRange {
                storage_gb: point(s),
                ..r.clone()
            })
            .collect(),
    );
    let topo = assign_resources(&topo, &ranges, 9)?;

    let synth = SynthConfig {
        regions: 10,
        days: 1,
        interval_s: 600,
        ..SynthConfig::default()
    };
    let series = synth_workload(&synth, 9)?;

    // A quiet overnight slot, a morning shoulder, and the mid-day peak.
    let slots = [12usize, 48, 72];
    let analyses = snapshot_report(&topo, &series, &slots, &SnapshotConfig::default())?;
    for a in &analyses {
        println!(
            "slot {:>3}: intensity {:?}, demand {:.1}, selected nodes {:?}",
            a.slot, a.intensity, a.total_demand, a.selected_nodes
        );
        for n in a.nodes.iter().filter(|n| n.selected) {
            println!(
                "    node {:>2} (tier {}): free {:>7.1}, mean latency {:>6.2} ms",
                n.node_id, n.tier, n.free_capacity, n.latency_ms
            );
        }
    }
    println!(
        "\nCSV head:\n{}",
        SnapshotAnalysis::to_csv(&analyses)
            .lines()
            .take(4)
            .collect::<Vec<_>>()
            .join("\n")
    );
    Ok(())
}
