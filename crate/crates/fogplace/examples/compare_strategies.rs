//! Run all four placement strategies on the same two-day scenario and
//! compare delivery, latency, and network usage.
//!
//! ```bash
//! cargo run --release --example compare_strategies
//! ```

use fogplace::forecast::forecast_series;
use fogplace::simulate::{run, SimConfig, Strategy};
use fogplace::topology::{
    assign_resources, build_hierarchy, random_stations, ResourceRange, TierRanges,
};
use fogplace::workload::{demand_snapshots, synth_workload, ServiceSpec, SynthConfig};

fn main() -> fogplace::Result<()> {
    let seed = 17u64;
    let stations = random_stations(20, 12_000.0, 12_000.0, 1_500.0, seed);
    let topo = build_hierarchy(&stations, 3_000.0, 2, seed)?;
    // Storage scaled so demand competes with the concurrent load.
    let point = |v: f64| (v, v);
    let storage = [40.0, 150.0, 400.0, 900.0, 2_000.0];
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
    let topo = assign_resources(&topo, &ranges, seed)?;

    let synth = SynthConfig {
        regions: 20,
        days: 2,
        interval_s: 600,
        ..SynthConfig::default()
    };
    let series = synth_workload(&synth, seed)?;
    let snapshots = demand_snapshots(&series, &ServiceSpec::multimedia_default())?;
    // Rolling one-step forecasts for the prediction-aware strategy.
    let predicted = forecast_series(&series, synth.slots_per_day())?;
    let forecasts = demand_snapshots(&predicted, &ServiceSpec::multimedia_default())?;

    println!(
        "{:<9} {:>8} {:>8} {:>12} {:>10} {:>10}",
        "strategy", "content", "packet", "latency(ms)", "link", "migration"
    );
    for strategy in [
        Strategy::Da,
        Strategy::Qoeap,
        Strategy::SmartFl,
        Strategy::Tiptop,
    ] {
        let config = SimConfig::new(strategy, snapshots.len(), seed);
        let f = (strategy == Strategy::Tiptop).then_some(forecasts.as_slice());
        let report = run(&topo, &snapshots, f, &config)?;
        println!(
            "{:<9} {:>8.4} {:>8.4} {:>12.3} {:>10.3} {:>10.3}",
            strategy.name(),
            report.content_delivery_rate,
            report.packet_delivery_rate,
            report.avg_latency_ms,
            report.link_usage,
            report.migration_usage
        );
    }
    Ok(())
}
