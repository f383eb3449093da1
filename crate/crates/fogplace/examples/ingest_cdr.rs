//! Parse a CDR extract, map grid cells to stations, and derive per-slot
//! demand snapshots.
//!
//! ```bash
//! cargo run --example ingest_cdr
//! ```

use fogplace::topology::BaseStation;
use fogplace::workload::{
    aggregate_to_regions, demand_snapshots, map_grids_to_stations, parse_cdr_text, ColumnMap,
    GridGeometry, ServiceSpec,
};

fn main() -> fogplace::Result<()> {
    // Ten-minute records for four grid cells, tab separated, with one
    // missing-traffic row and one duplicate to demonstrate the rules.
    let cdr = "grid_id\ttimestamp\ttraffic\n\
        0\t2013-11-01 00:00:00\t11.028366381681\n\
        0\t2013-11-01 00:10:00\t11.1271008756737\n\
        1\t2013-11-01 00:00:00\t8.62242459098975\n\
        1\t2013-11-01 00:10:00\t\n\
        2\t2013-11-01 00:00:00\t3.5\n\
        2\t2013-11-01 00:00:00\t1.5\n\
        3\t2013-11-01 00:10:00\t2.25\n";
    let (records, stats) = parse_cdr_text(cdr, &ColumnMap::default(), None)?;
    println!(
        "parsed {} rows ({} skipped for missing traffic, {} duplicates merged)",
        stats.rows, stats.skipped_missing_traffic, stats.aggregated_duplicates
    );

    // A 2 x 2 grid of 235 m cells served by two stations.
    let geometry = GridGeometry {
        cols: 2,
        rows: 2,
        cell_size_m: 235.0,
        ..Default::default()
    };
    let stations = vec![
        BaseStation {
            id: 10,
            x: 120.0,
            y: 120.0,
            coverage_radius: 300.0,
        },
        BaseStation {
            id: 11,
            x: 350.0,
            y: 350.0,
            coverage_radius: 300.0,
        },
    ];
    let grid_map = map_grids_to_stations(&geometry, &stations)?;
    for (grid, station) in &grid_map {
        println!("grid {grid} -> station {station}");
    }

    let series = aggregate_to_regions(&records, &grid_map, 600)?;
    for s in &series {
        println!("region {}: {:?}", s.region_id, s.values);
    }

    let snapshots = demand_snapshots(&series, &ServiceSpec::multimedia_default())?;
    for snap in &snapshots {
        println!(
            "slot {}: demanding regions {:?}",
            snap.time,
            snap.demands.keys().collect::<Vec<_>>()
        );
    }
    Ok(())
}
