//! Cross-module integration: the full pipeline wired through the public API,
//! from raw inputs to simulation, plus wire-format round trips.

use std::collections::BTreeMap;

use fogplace::forecast::{evaluate, fit_arima, forecast_series, ArimaModel, ArimaModelDoc};
use fogplace::placement::{
    build_instance, solve_exact, solve_heuristic, verify, NodeState, PlacementDoc, SolutionStatus,
    SolveLimits, PLACEMENT_SCHEMA_VERSION,
};
use fogplace::reservation::{plan_reservation, predicted_placement, reserve};
use fogplace::simulate::{run, SimConfig, Strategy};
use fogplace::topology::{
    assign_resources, build_hierarchy, parse_stations_csv, random_stations, stations_to_csv,
    ResourceRange, TierRanges, Topology,
};
use fogplace::workload::{
    aggregate_to_regions, classify_intensity, demand_snapshots, map_grids_to_stations,
    parse_cdr_text, series_from_csv, series_to_csv, synth_workload, ColumnMap, GridGeometry,
    IntensityClass, ServiceSpec, SynthConfig,
};

fn contended_topology(seed: u64) -> Topology {
    let stations = random_stations(10, 8_000.0, 8_000.0, 1_500.0, seed);
    let topo = build_hierarchy(&stations, 3_000.0, 2, seed).unwrap();
    let point = |v: f64| (v, v);
    let storage = [40.0, 140.0, 350.0, 800.0, 1_800.0];
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
    assign_resources(&topo, &ranges, seed).unwrap()
}

#[test]
fn cdr_text_to_placement_to_verification() {
    // Synthesize a CDR extract over a 3 x 3 grid, two slots.
    let mut cdr = String::from("grid_id\ttimestamp\ttraffic\n");
    for grid in 0..9u32 {
        for slot in 0..2i64 {
            let traffic = 1.0 + grid as f64 + slot as f64 * 0.5;
            cdr.push_str(&format!("{grid}\t{}\t{traffic}\n", slot * 600_000));
        }
    }
    let (records, stats) = parse_cdr_text(&cdr, &ColumnMap::default(), None).unwrap();
    assert_eq!(stats.rows, 18);

    let stations = random_stations(4, 705.0, 705.0, 500.0, 8);
    let geometry = GridGeometry {
        cols: 3,
        rows: 3,
        cell_size_m: 235.0,
        ..Default::default()
    };
    let grid_map = map_grids_to_stations(&geometry, &stations).unwrap();
    let series = aggregate_to_regions(&records, &grid_map, 600).unwrap();
    let total: f64 = series.iter().flat_map(|s| s.values.iter()).sum();
    let expect: f64 = records.iter().map(|r| r.traffic).sum();
    assert!((total - expect).abs() < 1e-9);

    let snapshots = demand_snapshots(&series, &ServiceSpec::multimedia_default()).unwrap();
    let topo = build_hierarchy(&stations, 3_000.0, 2, 8).unwrap();
    let topo = assign_resources(&topo, &TierRanges::default(), 8).unwrap();
    let state = NodeState::fresh(&topo).unwrap();
    for snapshot in snapshots.iter().filter(|s| !s.is_empty()) {
        let instance = build_instance(&topo, snapshot, &state, 100.0).unwrap();
        let solved = solve_exact(
            &instance,
            &SolveLimits {
                max_facilities: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(solved.solution.status, SolutionStatus::Optimal);
        assert!(verify(&instance, &solved.solution).feasible);
    }
}

#[test]
fn station_csv_latlon_round_trip_into_hierarchy() {
    let mut csv = String::from("id,lat,lon,coverage_radius_m\n");
    for i in 0..6 {
        csv.push_str(&format!(
            "{i},{},{},1500\n",
            45.0 + i as f64 * 0.01,
            9.0 + (i % 2) as f64 * 0.01
        ));
    }
    let stations = parse_stations_csv(&csv, true).unwrap();
    assert_eq!(stations.len(), 6);
    // Projected around the centroid: mean position near the origin.
    let mx = stations.iter().map(|s| s.x).sum::<f64>() / 6.0;
    assert!(mx.abs() < 1.0);
    let topo = build_hierarchy(&stations, 3_000.0, 2, 1).unwrap();
    topo.check_invariants().unwrap();
    // Planar re-rendering parses back identically.
    let back = parse_stations_csv(&stations_to_csv(&stations), false).unwrap();
    assert_eq!(stations, back);
}

#[test]
fn series_csv_and_intensity_classes() {
    let synth = SynthConfig {
        regions: 5,
        days: 2,
        ..SynthConfig::default()
    };
    let series = synth_workload(&synth, 31).unwrap();
    let parsed = series_from_csv(&series_to_csv(&series), 0, synth.interval_s).unwrap();
    assert_eq!(series, parsed);

    let classes = classify_intensity(&parsed, 3, 31).unwrap();
    assert_eq!(classes.len(), 5 * parsed[0].len());
    assert!(classes.values().any(|c| *c == IntensityClass::Low));
    assert!(classes.values().any(|c| *c == IntensityClass::High));
}

#[test]
fn placement_doc_round_trip() {
    let topo = contended_topology(5);
    let mut demands = BTreeMap::new();
    demands.insert(0u32, 20.0);
    demands.insert(4u32, 15.0);
    let snapshot = fogplace::workload::DemandSnapshot { time: 3, demands };
    let state = NodeState::fresh(&topo).unwrap();
    let instance = build_instance(&topo, &snapshot, &state, 100.0).unwrap();
    let solved = solve_heuristic(&instance, 9).unwrap();
    let doc = PlacementDoc {
        schema_version: PLACEMENT_SCHEMA_VERSION,
        instance: instance.clone(),
        solution: Some(solved.solution.clone()),
    };
    let text = serde_json::to_string_pretty(&doc).unwrap();
    assert!(text.contains("\"facilities\""));
    assert!(text.contains("\"latency\""));
    assert!(text.contains("\"assignment\""));
    let parsed: PlacementDoc = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.instance, instance);
    assert_eq!(parsed.solution.unwrap(), solved.solution);
}

#[test]
fn reservation_improves_latency_with_perfect_forecast() {
    // With forecasts equal to actual demand, the reserved capacity keeps the
    // good nodes free of concurrent load, so the prediction-aware latency is
    // no worse than the plain slot-wise solve on the contended state.
    let mut improved = 0usize;
    let trials = 6u64;
    for seed in 0..trials {
        let topo = contended_topology(40 + seed);
        let synth = SynthConfig {
            regions: 10,
            days: 1,
            ..SynthConfig::default()
        };
        let series = synth_workload(&synth, 60 + seed).unwrap();
        let snapshots = demand_snapshots(&series, &ServiceSpec::multimedia_default()).unwrap();
        // Perfect forecasts: predicted = actual.
        let slots = 60.min(snapshots.len());
        let mut smart = SimConfig::new(Strategy::SmartFl, slots, 70 + seed);
        smart.solver_limits = SolveLimits {
            max_facilities: 16,
            ..Default::default()
        };
        let tiptop_cfg = SimConfig {
            strategy: Strategy::Tiptop,
            ..smart.clone()
        };
        let a = run(&topo, &snapshots, None, &smart).unwrap();
        let b = run(&topo, &snapshots, Some(&snapshots), &tiptop_cfg).unwrap();
        if b.avg_latency_ms <= a.avg_latency_ms + 1e-9 {
            improved += 1;
        }
    }
    assert_eq!(
        improved, trials as usize,
        "reservation helped on only {improved}/{trials} seeds"
    );
}

#[test]
fn predicted_placement_consistency_and_plan_validity() {
    let topo = contended_topology(3);
    let state = NodeState::fresh(&topo).unwrap();
    let mut demands = BTreeMap::new();
    demands.insert(1u32, 25.0);
    demands.insert(7u32, 18.0);
    let snapshot = fogplace::workload::DemandSnapshot { time: 5, demands };
    let limits = SolveLimits {
        max_facilities: 20,
        ..Default::default()
    };
    let predicted = predicted_placement(&topo, &snapshot, &state, 100.0, &limits, 2).unwrap();
    // Consistency: predicted set equals the unpredicted solve's open set.
    let instance = build_instance(&topo, &snapshot, &state, 100.0).unwrap();
    let direct = solve_exact(&instance, &limits).unwrap();
    assert_eq!(predicted.nodes, direct.solution.open_node_ids(&instance));

    let (y, gamma) = reserve(&predicted.nodes, &predicted.nodes);
    assert_eq!(y, predicted.nodes);
    assert_eq!(gamma, predicted.nodes);
    let plan = plan_reservation(6, &predicted.nodes, &predicted, &state);
    assert!(plan.validate());
}

#[test]
fn forecast_series_aligns_and_tracks() {
    let synth = SynthConfig {
        regions: 3,
        days: 3,
        interval_s: 3_600,
        noise_sd: 0.5,
        ..SynthConfig::default()
    };
    let series = synth_workload(&synth, 12).unwrap();
    let predicted = forecast_series(&series, 48).unwrap();
    assert_eq!(predicted.len(), series.len());
    for (p, s) in predicted.iter().zip(&series) {
        assert_eq!(p.len(), s.len());
        assert_eq!(p.region_id, s.region_id);
        // Warmup slots mirror the actuals exactly.
        assert_eq!(&p.values[..48], &s.values[..48]);
        // Post-warmup one-step forecasts stay close to the smooth series.
        let m = evaluate(&p.values[48..], &s.values[48..]).unwrap();
        assert!(
            m.mae < 5.0,
            "region {}: forecast MAE {}",
            p.region_id,
            m.mae
        );
    }
}

#[test]
fn arima_model_file_round_trip_predicts_identically() {
    let series: Vec<f64> = (0..200)
        .map(|i| (i as f64 * 0.26).sin() * 8.0 + 30.0 + (i as f64) * 0.05)
        .collect();
    let model = fit_arima(&series, 1, 1, 1).unwrap();
    let text = serde_json::to_string(&model.to_doc()).unwrap();
    let doc: ArimaModelDoc = serde_json::from_str(&text).unwrap();
    let restored = ArimaModel::from_doc(doc).unwrap();
    assert_eq!(model.predict(12), restored.predict(12));
}
