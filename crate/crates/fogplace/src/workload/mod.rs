//! Traffic workload: ingestion, aggregation, demand snapshots, synthesis,
//! and intensity classification.

pub mod cdr;
pub mod grid;
pub mod kmeans;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{indexed_seed, rng_from_seed, sample_normal};

pub use cdr::{parse_cdr, parse_cdr_text, CdrRecord, ColumnMap, ParseStats};
pub use grid::{map_grids_to_stations, GridGeometry};
pub use kmeans::{classify_intensity, kmeans_1d, within_cluster_ss, IntensityClass};

/// Per-region traffic time series at a fixed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSeries {
    pub region_id: u32,
    /// Epoch milliseconds of the first slot.
    pub start_time_ms: i64,
    pub interval_s: u32,
    pub values: Vec<f64>,
}

impl TrafficSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Class of a service request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceClass {
    Multimedia,
    Concurrent,
}

/// Requirements of one service type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub class: ServiceClass,
    pub max_latency_ms: f64,
    pub ram_gb: f64,
    pub mips_demand: f64,
}

impl ServiceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_latency_ms <= 0.0 {
            return Err(Error::InvalidInput(
                "max_latency_ms must be positive".into(),
            ));
        }
        if self.class == ServiceClass::Multimedia && self.max_latency_ms > 100.0 {
            return Err(Error::InvalidInput(
                "multimedia services must require at most 100 ms".into(),
            ));
        }
        Ok(())
    }

    /// Default multimedia service: the 100 ms interactive budget.
    pub fn multimedia_default() -> Self {
        ServiceSpec {
            class: ServiceClass::Multimedia,
            max_latency_ms: 100.0,
            ram_gb: 2.0,
            mips_demand: 1.0,
        }
    }

    /// Default concurrent-class service: latency-tolerant background load.
    pub fn concurrent_default() -> Self {
        ServiceSpec {
            class: ServiceClass::Concurrent,
            max_latency_ms: 150.0,
            ram_gb: 1.0,
            mips_demand: 0.5,
        }
    }
}

/// The demand set for one slot: regions whose traffic exceeded the per-slot
/// mean, with their demanded volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSnapshot {
    pub time: usize,
    pub demands: BTreeMap<u32, f64>,
}

impl DemandSnapshot {
    pub fn total_volume(&self) -> f64 {
        self.demands.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }
}

/// Aggregate CDR records into per-region series on a common slot grid.
///
/// Slot boundaries are aligned to `interval_s` from the earliest record;
/// missing slots are zero-filled. Total traffic is conserved exactly.
pub fn aggregate_to_regions(
    records: &[CdrRecord],
    grid_map: &BTreeMap<u32, u32>,
    interval_s: u32,
) -> Result<Vec<TrafficSeries>> {
    if interval_s == 0 {
        return Err(Error::InvalidInput("interval_s must be positive".into()));
    }
    if records.is_empty() {
        return Ok(Vec::new());
    }
    for r in records {
        if !grid_map.contains_key(&r.grid_id) {
            return Err(Error::InvalidInput(format!(
                "grid {} has no station mapping",
                r.grid_id
            )));
        }
    }
    let interval_ms = interval_s as i64 * 1000;
    let min_ts = records.iter().map(|r| r.timestamp_ms).min().unwrap();
    let max_ts = records.iter().map(|r| r.timestamp_ms).max().unwrap();
    let start = min_ts.div_euclid(interval_ms) * interval_ms;
    let slots = ((max_ts - start) / interval_ms + 1) as usize;

    let mut regions: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for station in grid_map.values() {
        regions.entry(*station).or_insert_with(|| vec![0.0; slots]);
    }
    for r in records {
        let region = grid_map[&r.grid_id];
        let slot = ((r.timestamp_ms - start) / interval_ms) as usize;
        regions.get_mut(&region).expect("region inserted")[slot] += r.traffic;
    }
    Ok(regions
        .into_iter()
        .map(|(region_id, values)| TrafficSeries {
            region_id,
            start_time_ms: start,
            interval_s,
            values,
        })
        .collect())
}

/// Derive per-slot demand snapshots: a region demands in slot t iff its
/// traffic strictly exceeds the mean over all regions at t; the demanded
/// volume is the traffic value itself.
pub fn demand_snapshots(
    series: &[TrafficSeries],
    spec: &ServiceSpec,
) -> Result<Vec<DemandSnapshot>> {
    spec.validate()?;
    if series.is_empty() {
        return Ok(Vec::new());
    }
    let len = series[0].len();
    for s in series {
        if s.len() != len
            || s.interval_s != series[0].interval_s
            || s.start_time_ms != series[0].start_time_ms
        {
            return Err(Error::InvalidInput(format!(
                "series for region {} is not aligned",
                s.region_id
            )));
        }
    }
    let n = series.len() as f64;
    let mut snapshots = Vec::with_capacity(len);
    for t in 0..len {
        let mean = series.iter().map(|s| s.values[t]).sum::<f64>() / n;
        let demands: BTreeMap<u32, f64> = series
            .iter()
            .filter(|s| s.values[t] > mean)
            .map(|s| (s.region_id, s.values[t]))
            .collect();
        snapshots.push(DemandSnapshot { time: t, demands });
    }
    Ok(snapshots)
}

/// Configuration of the synthetic diurnal workload generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub regions: u32,
    pub days: u32,
    pub interval_s: u32,
    /// Constant floor of each series.
    pub base_level: f64,
    /// Peak-to-floor amplitude of the daily cycle.
    pub daily_amp: f64,
    /// Multiplier applied to urban regions on weekends (1 = no damping).
    pub weekly_damp: f64,
    pub noise_sd: f64,
    /// Fraction of regions that behave as urban (weekend-damped).
    pub urban_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            regions: 20,
            days: 7,
            interval_s: 600,
            base_level: 10.0,
            daily_amp: 40.0,
            weekly_damp: 0.6,
            noise_sd: 2.0,
            urban_fraction: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regions < 1 || self.days < 1 {
            return Err(Error::Config("regions and days must be at least 1".into()));
        }
        if self.interval_s == 0 || 86_400 % self.interval_s != 0 {
            return Err(Error::Config(
                "interval_s must divide one day exactly".into(),
            ));
        }
        if self.base_level < 0.0 || self.daily_amp < 0.0 || self.noise_sd < 0.0 {
            return Err(Error::Config(
                "levels and noise must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.urban_fraction) || !(0.0..=1.0).contains(&self.weekly_damp) {
            return Err(Error::Config(
                "urban_fraction and weekly_damp must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn slots_per_day(&self) -> usize {
        (86_400 / self.interval_s) as usize
    }
}

/// Whether region `r` is urban under the config: the first
/// ceil(urban_fraction * regions) region ids are urban.
pub fn is_urban(config: &SynthConfig, region_index: u32) -> bool {
    let urban_count = (config.urban_fraction * config.regions as f64).ceil() as u32;
    region_index < urban_count
}

/// Generate seeded synthetic per-region traffic: a daily sinusoid peaking
/// mid-day on a constant base, weekend damping for urban regions, plus
/// Gaussian noise clipped at zero. Deterministic per seed.
pub fn synth_workload(config: &SynthConfig, seed: u64) -> Result<Vec<TrafficSeries>> {
    config.validate()?;
    let slots_per_day = config.slots_per_day();
    let total = slots_per_day * config.days as usize;
    let mut out = Vec::with_capacity(config.regions as usize);
    for region in 0..config.regions {
        let mut rng = rng_from_seed(indexed_seed(seed, "synth-region", region as u64));
        let urban = is_urban(config, region);
        // Stable per-region texture so regions are not identical copies.
        let phase = (region as f64) * 0.13;
        let level_scale = 1.0 + 0.1 * ((region as f64) * 0.7).sin();
        let mut values = Vec::with_capacity(total);
        for t in 0..total {
            let day = t / slots_per_day;
            let tau = (t % slots_per_day) as f64 / slots_per_day as f64;
            let daily = config.daily_amp
                * 0.5
                * (1.0 - ((tau - phase / 50.0) * std::f64::consts::TAU).cos());
            let weekend = day % 7 >= 5;
            let damp = if urban && weekend {
                config.weekly_damp
            } else {
                1.0
            };
            let mut v = (config.base_level + daily) * damp * level_scale;
            if config.noise_sd > 0.0 {
                v += config.noise_sd * sample_normal(&mut rng);
            }
            values.push(v.max(0.0));
        }
        out.push(TrafficSeries {
            region_id: region,
            start_time_ms: 0,
            interval_s: config.interval_s,
            values,
        });
    }
    Ok(out)
}

/// Lag-`k` autocorrelation of a series.
pub fn autocorrelation(values: &[f64], lag: usize) -> f64 {
    let n = values.len();
    if lag >= n {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (0..n - lag)
        .map(|i| (values[i] - mean) * (values[i + lag] - mean))
        .sum();
    num / denom
}

/// Series CSV wire format: `region_id,slot,value`.
pub fn series_to_csv(series: &[TrafficSeries]) -> String {
    let mut out = String::from("region_id,slot,value\n");
    for s in series {
        for (slot, v) in s.values.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", s.region_id, slot, v));
        }
    }
    out
}

/// Parse the series CSV produced by [`series_to_csv`]. Slots must be dense
/// per region; metadata (start, interval) is supplied by the caller.
pub fn series_from_csv(
    text: &str,
    start_time_ms: i64,
    interval_s: u32,
) -> Result<Vec<TrafficSeries>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty series CSV".into()))?;
    if header.trim() != "region_id,slot,value" {
        return Err(Error::Format(format!("bad series header `{header}`")));
    }
    let mut per_region: BTreeMap<u32, Vec<(usize, f64)>> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "series line {}: bad field count",
                lineno + 2
            )));
        }
        let bad = |what: &str| Error::Format(format!("series line {}: bad {what}", lineno + 2));
        let region: u32 = fields[0].trim().parse().map_err(|_| bad("region"))?;
        let slot: usize = fields[1].trim().parse().map_err(|_| bad("slot"))?;
        let value: f64 = fields[2].trim().parse().map_err(|_| bad("value"))?;
        per_region.entry(region).or_default().push((slot, value));
    }
    let mut out = Vec::new();
    for (region_id, mut rows) in per_region {
        rows.sort_by_key(|r| r.0);
        for (i, (slot, _)) in rows.iter().enumerate() {
            if *slot != i {
                return Err(Error::Format(format!(
                    "region {region_id}: slots are not dense at {slot}"
                )));
            }
        }
        out.push(TrafficSeries {
            region_id,
            start_time_ms,
            interval_s,
            values: rows.into_iter().map(|r| r.1).collect(),
        });
    }
    Ok(out)
}

/// Snapshot CSV wire format: `slot,region_id,volume`.
pub fn snapshots_to_csv(snapshots: &[DemandSnapshot]) -> String {
    let mut out = String::from("slot,region_id,volume\n");
    for s in snapshots {
        for (region, volume) in &s.demands {
            out.push_str(&format!("{},{},{}\n", s.time, region, volume));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn record(grid: u32, ts: i64, traffic: f64) -> CdrRecord {
        CdrRecord {
            grid_id: grid,
            timestamp_ms: ts,
            traffic,
        }
    }

    #[test]
    fn aggregation_sums_member_grids() {
        let mut map = BTreeMap::new();
        map.insert(0u32, 10u32);
        map.insert(1u32, 10u32);
        let records = vec![record(0, 0, 1.5), record(1, 30_000, 2.5)];
        let series = aggregate_to_regions(&records, &map, 600).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].region_id, 10);
        assert_eq!(series[0].values, vec![4.0]);
    }

    #[test]
    fn missing_slots_zero_filled() {
        let mut map = BTreeMap::new();
        map.insert(0u32, 1u32);
        let records = vec![record(0, 0, 1.0), record(0, 1_800_000, 2.0)];
        let series = aggregate_to_regions(&records, &map, 600).unwrap();
        assert_eq!(series[0].values, vec![1.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn aggregation_conserves_total() {
        let mut rng = rng_from_seed(3);
        let mut map = BTreeMap::new();
        for g in 0..40u32 {
            map.insert(g, g % 7);
        }
        let records: Vec<CdrRecord> = (0..5_000)
            .map(|_| {
                record(
                    rng.random_range(0..40),
                    rng.random_range(0..30) * 600_000,
                    rng.random::<f64>() * 10.0,
                )
            })
            .collect();
        let total_in: f64 = records.iter().map(|r| r.traffic).sum();
        let series = aggregate_to_regions(&records, &map, 600).unwrap();
        let total_out: f64 = series.iter().flat_map(|s| s.values.iter()).sum();
        assert!((total_in - total_out).abs() < 1e-9 * total_in.max(1.0));
    }

    #[test]
    fn unmapped_grid_rejected() {
        let map = BTreeMap::new();
        let records = vec![record(5, 0, 1.0)];
        assert!(matches!(
            aggregate_to_regions(&records, &map, 600),
            Err(Error::InvalidInput(_))
        ));
    }

    fn series(region: u32, values: Vec<f64>) -> TrafficSeries {
        TrafficSeries {
            region_id: region,
            start_time_ms: 0,
            interval_s: 600,
            values,
        }
    }

    #[test]
    fn snapshot_threshold_arithmetic() {
        let set = vec![
            series(1, vec![1.0]),
            series(2, vec![2.0]),
            series(3, vec![9.0]),
        ];
        let snaps = demand_snapshots(&set, &ServiceSpec::multimedia_default()).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].demands.len(), 1);
        assert_eq!(snaps[0].demands[&3], 9.0);
    }

    #[test]
    fn equal_regions_give_empty_snapshot() {
        let set = vec![series(1, vec![4.0]), series(2, vec![4.0])];
        let snaps = demand_snapshots(&set, &ServiceSpec::multimedia_default()).unwrap();
        assert!(snaps[0].is_empty());
    }

    #[test]
    fn snapshot_membership_matches_brute_force() {
        let cfg = SynthConfig {
            regions: 9,
            days: 1,
            ..SynthConfig::default()
        };
        let set = synth_workload(&cfg, 42).unwrap();
        let snaps = demand_snapshots(&set, &ServiceSpec::multimedia_default()).unwrap();
        for (t, snap) in snaps.iter().enumerate() {
            let mean = set.iter().map(|s| s.values[t]).sum::<f64>() / set.len() as f64;
            for s in &set {
                assert_eq!(snap.demands.contains_key(&s.region_id), s.values[t] > mean);
            }
        }
    }

    #[test]
    fn noiseless_undamped_synth_is_daily_periodic() {
        let cfg = SynthConfig {
            regions: 2,
            days: 3,
            noise_sd: 0.0,
            weekly_damp: 1.0,
            ..SynthConfig::default()
        };
        let set = synth_workload(&cfg, 1).unwrap();
        let p = cfg.slots_per_day();
        for s in &set {
            for t in 0..s.len() - p {
                assert!((s.values[t] - s.values[t + p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn urban_weekends_damped() {
        let cfg = SynthConfig {
            regions: 2,
            days: 7,
            noise_sd: 0.0,
            weekly_damp: 0.5,
            urban_fraction: 0.5,
            ..SynthConfig::default()
        };
        let set = synth_workload(&cfg, 1).unwrap();
        let p = cfg.slots_per_day();
        let mean = |vals: &[f64]| vals.iter().sum::<f64>() / vals.len() as f64;
        // Region 0 urban: weekend mean below weekday mean.
        let weekday = mean(&set[0].values[..5 * p]);
        let weekend = mean(&set[0].values[5 * p..]);
        assert!(weekend < weekday);
        // Region 1 suburban: flat across the week.
        let wd = mean(&set[1].values[..5 * p]);
        let we = mean(&set[1].values[5 * p..]);
        assert!((wd - we).abs() < 1e-9);
    }

    #[test]
    fn synth_deterministic_and_non_negative() {
        let cfg = SynthConfig::default();
        let a = synth_workload(&cfg, 9).unwrap();
        let b = synth_workload(&cfg, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().flat_map(|s| s.values.iter()).all(|v| *v >= 0.0));
    }

    #[test]
    fn daily_autocorrelation_beats_offset_lag() {
        let cfg = SynthConfig {
            regions: 1,
            days: 7,
            ..SynthConfig::default()
        };
        let set = synth_workload(&cfg, 17).unwrap();
        let day = cfg.slots_per_day();
        let thirteen_h = day * 13 / 24;
        let v = &set[0].values;
        assert!(autocorrelation(v, day) > autocorrelation(v, thirteen_h));
    }

    #[test]
    fn series_csv_round_trip() {
        let cfg = SynthConfig {
            regions: 3,
            days: 1,
            ..SynthConfig::default()
        };
        let set = synth_workload(&cfg, 5).unwrap();
        let text = series_to_csv(&set);
        let back = series_from_csv(&text, 0, cfg.interval_s).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn multimedia_spec_latency_cap_enforced() {
        let bad = ServiceSpec {
            class: ServiceClass::Multimedia,
            max_latency_ms: 200.0,
            ram_gb: 1.0,
            mips_demand: 1.0,
        };
        assert!(bad.validate().is_err());
        assert!(ServiceSpec::concurrent_default().validate().is_ok());
    }
}
