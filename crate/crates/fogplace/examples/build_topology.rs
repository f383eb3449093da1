//! Build a cloud-fog hierarchy from base-station positions.
//!
//! ```bash
//! cargo run --example build_topology
//! ```

use fogplace::topology::{
    assign_resources, build_hierarchy, build_proximity_graph, detect_communities, random_stations,
    TierRanges,
};

fn main() -> fogplace::Result<()> {
    // 60 stations in a 15 km x 15 km area, communities within 3 km.
    let stations = random_stations(60, 15_000.0, 15_000.0, 1_500.0, 42);
    let graph = build_proximity_graph(&stations, 3_000.0)?;
    println!(
        "proximity graph: {} stations, {} edges",
        graph.vertex_count(),
        graph.edge_count()
    );
    let communities = detect_communities(&graph, 42);
    println!("communities detected: {}", communities.len());
    for (i, c) in communities.iter().enumerate() {
        println!("  community {i}: {} stations", c.len());
    }

    let topo = build_hierarchy(&stations, 3_000.0, 2, 42)?;
    let topo = assign_resources(&topo, &TierRanges::default(), 42)?;
    println!(
        "\nhierarchy tiers (stations up to the cloud root): {:?}",
        topo.tier_sizes()
    );
    for tier in (0..topo.tier_count()).rev() {
        let ids = topo.tier_nodes(tier);
        let sample = topo.node(ids[0]).unwrap();
        let res = sample.resources.unwrap();
        println!(
            "  tier {tier}: {} node(s), e.g. node {} with {:.1} GB storage, {:.2} mips",
            ids.len(),
            sample.id,
            res.storage_gb,
            res.mips
        );
    }

    // Latency from one region to each tier under light and heavy load.
    let region = topo.station_ids()[0];
    println!("\nlatency from region {region} (ms):");
    for tier in 0..topo.tier_count() {
        let node = topo.tier_nodes(tier)[0];
        println!(
            "  tier {tier} node {node}: idle {:.1}, loaded {:.1}",
            topo.latency(node, region, 0.0)?,
            topo.latency(node, region, 1.0)?
        );
    }
    Ok(())
}
