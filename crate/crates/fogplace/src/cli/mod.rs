//! Batch command-line front end: reproducible pipeline runs from a single
//! 64-bit seed, with a run manifest written next to every output.

pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::forecast::{
    auto_arima, evaluate, fit_arima, forecast_series, lstm_train, ArimaModel, ArimaModelDoc,
    LossKind, LstmHyper, LstmModel, LstmModelDoc,
};
use crate::placement::SolveLimits;
use crate::rng::indexed_seed;
use crate::simulate::{run as sim_run, snapshot_report, SimConfig, SnapshotConfig, Strategy};
use crate::topology::{
    assign_resources, build_hierarchy, parse_stations_csv, random_stations, BaseStation,
    TierRanges, Topology,
};
use crate::workload::{
    aggregate_to_regions, demand_snapshots, map_grids_to_stations, parse_cdr, series_from_csv,
    series_to_csv, snapshots_to_csv, synth_workload, ColumnMap, GridGeometry, ServiceSpec,
    SynthConfig, TrafficSeries,
};

use config::ConfigFile;
use manifest::{artifact_versions, RunManifest};

fn version_string() -> &'static str {
    let versions = artifact_versions()
        .into_iter()
        .map(|(k, v)| format!("{k}-schema={v}"))
        .collect::<Vec<_>>()
        .join(", ");
    Box::leak(format!("{} ({versions})", env!("CARGO_PKG_VERSION")).into_boxed_str())
}

#[derive(Parser)]
#[command(name = "fogplace", version = version_string(), about = "Cloud-fog service placement pipeline")]
struct Cli {
    /// Key-value config file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and inspect cloud-fog topologies.
    Topology {
        #[command(subcommand)]
        cmd: TopologyCmd,
    },
    /// Ingest or synthesize traffic workloads.
    Workload {
        #[command(subcommand)]
        cmd: WorkloadCmd,
    },
    /// Fit, apply, and sweep traffic forecasters.
    Forecast {
        #[command(subcommand)]
        cmd: ForecastCmd,
    },
    /// Run the strategy-comparison simulation.
    Simulate(SimulateArgs),
    /// Analyze selected slots: intensity, selected nodes, capacity/latency.
    SnapshotReport(SnapshotArgs),
}

#[derive(Subcommand)]
enum TopologyCmd {
    /// Build the tiered topology from a station CSV.
    Build(TopologyBuildArgs),
}

#[derive(Args)]
struct TopologyBuildArgs {
    /// Station CSV (`id,x_m,y_m,coverage_radius_m`).
    #[arg(long)]
    stations: PathBuf,
    /// Treat the station file as `id,lat,lon,coverage_radius_m`.
    #[arg(long, default_value_t = false)]
    latlon: bool,
    #[arg(long)]
    radius_m: Option<f64>,
    #[arg(long)]
    mu: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum WorkloadCmd {
    /// Parse a CDR file, map grids to stations, aggregate per region.
    Ingest(IngestArgs),
    /// Generate the seeded synthetic diurnal workload.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    cdr: PathBuf,
    #[arg(long)]
    stations: PathBuf,
    #[arg(long, default_value_t = false)]
    latlon: bool,
    /// Delimiter: auto, tab, or comma.
    #[arg(long, default_value = "auto")]
    delimiter: String,
    #[arg(long)]
    col_grid: Option<String>,
    #[arg(long)]
    col_timestamp: Option<String>,
    #[arg(long)]
    col_traffic: Option<String>,
    #[arg(long)]
    interval_s: Option<u32>,
    #[arg(long)]
    grid_cols: Option<u32>,
    #[arg(long)]
    grid_rows: Option<u32>,
    #[arg(long)]
    grid_cell_m: Option<f64>,
    #[arg(long)]
    grid_id_base: Option<u32>,
    #[arg(long)]
    grid_origin_x: Option<f64>,
    #[arg(long)]
    grid_origin_y: Option<f64>,
    /// Recompute and assert traffic conservation through aggregation.
    #[arg(long, default_value_t = false)]
    check_conservation: bool,
    #[arg(long)]
    out_series: PathBuf,
    #[arg(long)]
    out_snapshots: Option<PathBuf>,
    /// Also write the series as JSON.
    #[arg(long)]
    out_series_json: Option<PathBuf>,
    /// Also write the snapshots as JSON.
    #[arg(long)]
    out_snapshots_json: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    regions: Option<u32>,
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    interval_s: Option<u32>,
    #[arg(long)]
    base_level: Option<f64>,
    #[arg(long)]
    daily_amp: Option<f64>,
    #[arg(long)]
    weekly_damp: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    urban_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_series: PathBuf,
    #[arg(long)]
    out_snapshots: Option<PathBuf>,
    /// Also write the series as JSON.
    #[arg(long)]
    out_series_json: Option<PathBuf>,
    /// Also write the snapshots as JSON.
    #[arg(long)]
    out_snapshots_json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ForecastCmd {
    /// Fit a model to one region's series.
    Fit(FitArgs),
    /// Forecast forward from a saved model.
    Predict(PredictArgs),
    /// Grid-sweep LSTM hyperparameters and report holdout error.
    Sweep(SweepArgs),
    /// Verify LSTM backpropagation against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Model family: arima or lstm.
    #[arg(long)]
    model: String,
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    region: Option<u32>,
    #[arg(long)]
    interval_s: Option<u32>,
    /// ARIMA: select (p,d,q) by holdout search instead of fixed orders.
    #[arg(long, default_value_t = false)]
    auto: bool,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    max_p: Option<usize>,
    #[arg(long)]
    max_q: Option<usize>,
    #[arg(long)]
    max_d: Option<usize>,
    #[arg(long)]
    holdout_fraction: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// LSTM training loss: mae or mse.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    horizon: usize,
    /// Series file (required for LSTM models, to seed the window).
    #[arg(long)]
    series: Option<PathBuf>,
    #[arg(long)]
    region: Option<u32>,
    #[arg(long)]
    interval_s: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    region: Option<u32>,
    #[arg(long)]
    interval_s: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    epochs_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lr_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    hidden_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    layers_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    window_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    loss_list: Option<Vec<String>>,
    /// Fraction of the series used for training in the sweep.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Station CSV; omitted = seeded synthetic layout.
    #[arg(long)]
    stations: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    latlon: bool,
    #[arg(long)]
    radius_m: Option<f64>,
    #[arg(long)]
    mu: Option<u32>,
    /// Synthetic layout: number of stations (= regions).
    #[arg(long)]
    regions: Option<u32>,
    /// Synthetic layout: square side in meters.
    #[arg(long)]
    area_m: Option<f64>,
    /// Synthetic layout: coverage radius per station.
    #[arg(long)]
    coverage_m: Option<f64>,
    /// Scale factor on the default per-tier storage capacities.
    #[arg(long)]
    storage_scale: Option<f64>,
    /// Synthetic workload days (defaults to covering the requested slots).
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    interval_s: Option<u32>,
    #[arg(long)]
    base_level: Option<f64>,
    #[arg(long)]
    daily_amp: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// da, qoeap, smart-fl, tiptop, or all (comparison sweep).
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    latency_cap_ms: Option<f64>,
    #[arg(long)]
    concurrent_load_fraction: Option<f64>,
    #[arg(long)]
    packets_per_unit: Option<f64>,
    /// Slots of observed history used to fit the per-region forecasters.
    #[arg(long)]
    train_slots: Option<usize>,
    /// Number of independent seeds to run (seed, seed+1, ...).
    #[arg(long)]
    parallel_runs: Option<usize>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Report JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Per-slot trace CSV path.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Event log (line-delimited JSON) path.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args)]
struct SnapshotArgs {
    /// Comma-separated slot indices to analyze.
    #[arg(long, value_delimiter = ',')]
    slots: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    latency_cap_ms: Option<f64>,
    #[arg(long)]
    concurrent_load_fraction: Option<f64>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out_json: PathBuf,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

/// Entry point used by the binary: parses `std::env::args`, runs, and maps
/// errors to exit codes (0 ok, 2 usage/input, 3 degenerate/infeasible,
/// 4 internal invariant violation).
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Same as [`run`] with explicit arguments, for tests.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match dispatch(cli) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Topology {
            cmd: TopologyCmd::Build(args),
        } => topology_build(&cfg, args),
        Command::Workload {
            cmd: WorkloadCmd::Ingest(args),
        } => workload_ingest(&cfg, args),
        Command::Workload {
            cmd: WorkloadCmd::Synth(args),
        } => workload_synth(&cfg, args),
        Command::Forecast {
            cmd: ForecastCmd::Fit(args),
        } => forecast_fit(&cfg, args),
        Command::Forecast {
            cmd: ForecastCmd::Predict(args),
        } => forecast_predict(&cfg, args),
        Command::Forecast {
            cmd: ForecastCmd::Sweep(args),
        } => forecast_sweep(&cfg, args),
        Command::Forecast {
            cmd: ForecastCmd::Gradcheck(args),
        } => forecast_gradcheck(&cfg, args),
        Command::Simulate(args) => simulate_cmd(&cfg, args),
        Command::SnapshotReport(args) => snapshot_cmd(&cfg, args),
    }
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn topology_build(cfg: &ConfigFile, args: TopologyBuildArgs) -> Result<()> {
    let radius_m = cfg.resolve(args.radius_m, "radius_m", 3_000.0)?;
    let mu = cfg.resolve(args.mu, "mu", 2)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let text = std::fs::read_to_string(&args.stations)?;
    let stations = parse_stations_csv(&text, args.latlon)?;
    let topo = build_hierarchy(&stations, radius_m, mu, seed)?;
    let topo = assign_resources(
        &topo,
        &TierRanges::default(),
        indexed_seed(seed, "resources", 0),
    )?;
    let echo = serde_json::json!({
        "radius_m": radius_m,
        "mu": mu,
        "seed": seed,
        "latlon": args.latlon,
        "stations": args.stations.display().to_string(),
    });
    let doc = topo.to_doc(echo);
    write_output(&args.out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    let canonical = cfg.canonical_with(&[
        ("radius_m".into(), radius_m.to_string()),
        ("mu".into(), mu.to_string()),
        ("seed".into(), seed.to_string()),
        ("latlon".into(), args.latlon.to_string()),
    ]);
    RunManifest::new("topology build", &canonical, seed, &[&args.stations])?
        .write_for(&args.out)?;
    println!(
        "topology: {} nodes over {} tiers (sizes {:?}) -> {}",
        topo.nodes().count(),
        topo.tier_count(),
        topo.tier_sizes(),
        args.out.display()
    );
    Ok(())
}

fn geometry_from(cfg: &ConfigFile, args: &IngestArgs) -> Result<GridGeometry> {
    let default = GridGeometry::default();
    Ok(GridGeometry {
        cols: cfg.resolve(args.grid_cols, "grid_cols", default.cols)?,
        rows: cfg.resolve(args.grid_rows, "grid_rows", default.rows)?,
        cell_size_m: cfg.resolve(args.grid_cell_m, "grid_cell_m", default.cell_size_m)?,
        origin_x: cfg.resolve(args.grid_origin_x, "grid_origin_x", default.origin_x)?,
        origin_y: cfg.resolve(args.grid_origin_y, "grid_origin_y", default.origin_y)?,
        id_base: cfg.resolve(args.grid_id_base, "grid_id_base", default.id_base)?,
    })
}

fn workload_ingest(cfg: &ConfigFile, args: IngestArgs) -> Result<()> {
    let interval_s = cfg.resolve(args.interval_s, "interval_s", 600)?;
    let columns = ColumnMap {
        grid: cfg.resolve(args.col_grid.clone(), "col_grid", "grid_id".into())?,
        timestamp: cfg.resolve(
            args.col_timestamp.clone(),
            "col_timestamp",
            "timestamp".into(),
        )?,
        traffic: cfg.resolve(args.col_traffic.clone(), "col_traffic", "traffic".into())?,
    };
    let delimiter = match args.delimiter.as_str() {
        "auto" => None,
        "tab" => Some('\t'),
        "comma" => Some(','),
        other => {
            return Err(Error::InvalidInput(format!(
                "delimiter must be auto, tab, or comma, got `{other}`"
            )))
        }
    };
    let stations_text = std::fs::read_to_string(&args.stations)?;
    let stations = parse_stations_csv(&stations_text, args.latlon)?;
    let mut file = std::fs::File::open(&args.cdr)?;
    let (records, stats) = parse_cdr(&mut file, &columns, delimiter)?;
    let geometry = geometry_from(cfg, &args)?;
    let grid_map = map_grids_to_stations(&geometry, &stations)?;
    let series = aggregate_to_regions(&records, &grid_map, interval_s)?;
    if args.check_conservation {
        let total_in: f64 = records.iter().map(|r| r.traffic).sum();
        let total_out: f64 = series.iter().flat_map(|s| s.values.iter()).sum();
        if (total_in - total_out).abs() > 1e-9 * total_in.abs().max(1.0) {
            return Err(Error::Internal(format!(
                "conservation violated: {total_in} in vs {total_out} out"
            )));
        }
        println!("conservation check: {total_in} in == {total_out} out");
    }
    write_output(&args.out_series, &series_to_csv(&series))?;
    let canonical = cfg.canonical_with(&[("interval_s".into(), interval_s.to_string())]);
    RunManifest::new(
        "workload ingest",
        &canonical,
        0,
        &[&args.cdr, &args.stations],
    )?
    .write_for(&args.out_series)?;
    if let Some(out_snapshots) = &args.out_snapshots {
        let snaps = demand_snapshots(&series, &ServiceSpec::multimedia_default())?;
        write_output(out_snapshots, &snapshots_to_csv(&snaps))?;
        RunManifest::new(
            "workload ingest",
            &canonical,
            0,
            &[&args.cdr, &args.stations],
        )?
        .write_for(out_snapshots)?;
    }
    println!(
        "ingested {} rows ({} skipped, {} duplicate-merged) into {} regions x {} slots",
        stats.rows,
        stats.skipped_missing_traffic,
        stats.aggregated_duplicates,
        series.len(),
        series.first().map_or(0, |s| s.len())
    );
    Ok(())
}

fn synth_config(cfg: &ConfigFile, args: &SynthArgs) -> Result<SynthConfig> {
    let d = SynthConfig::default();
    Ok(SynthConfig {
        regions: cfg.resolve(args.regions, "regions", d.regions)?,
        days: cfg.resolve(args.days, "days", d.days)?,
        interval_s: cfg.resolve(args.interval_s, "interval_s", d.interval_s)?,
        base_level: cfg.resolve(args.base_level, "base_level", d.base_level)?,
        daily_amp: cfg.resolve(args.daily_amp, "daily_amp", d.daily_amp)?,
        weekly_damp: cfg.resolve(args.weekly_damp, "weekly_damp", d.weekly_damp)?,
        noise_sd: cfg.resolve(args.noise_sd, "noise_sd", d.noise_sd)?,
        urban_fraction: cfg.resolve(args.urban_fraction, "urban_fraction", d.urban_fraction)?,
    })
}

fn workload_synth(cfg: &ConfigFile, args: SynthArgs) -> Result<()> {
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let synth = synth_config(cfg, &args)?;
    let series = synth_workload(&synth, seed)?;
    write_output(&args.out_series, &series_to_csv(&series))?;
    let canonical = cfg.canonical_with(&[
        ("seed".into(), seed.to_string()),
        ("synth".into(), serde_json::to_string(&synth)?),
    ]);
    RunManifest::new("workload synth", &canonical, seed, &[])?.write_for(&args.out_series)?;
    if let Some(out_snapshots) = &args.out_snapshots {
        let snaps = demand_snapshots(&series, &ServiceSpec::multimedia_default())?;
        write_output(out_snapshots, &snapshots_to_csv(&snaps))?;
        RunManifest::new("workload synth", &canonical, seed, &[])?.write_for(out_snapshots)?;
    }
    println!(
        "synthesized {} regions x {} slots -> {}",
        synth.regions,
        series.first().map_or(0, |s| s.len()),
        args.out_series.display()
    );
    Ok(())
}

fn load_region_series(path: &Path, region: Option<u32>, interval_s: u32) -> Result<TrafficSeries> {
    let text = std::fs::read_to_string(path)?;
    let series = series_from_csv(&text, 0, interval_s)?;
    match region {
        Some(r) => series
            .into_iter()
            .find(|s| s.region_id == r)
            .ok_or_else(|| Error::Lookup(format!("region {r} not in series file"))),
        None => series
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidInput("series file is empty".into())),
    }
}

fn parse_loss(name: &str) -> Result<LossKind> {
    match name.to_ascii_lowercase().as_str() {
        "mae" => Ok(LossKind::Mae),
        "mse" => Ok(LossKind::Mse),
        other => Err(Error::InvalidInput(format!(
            "loss must be mae or mse, got `{other}`"
        ))),
    }
}

fn forecast_fit(cfg: &ConfigFile, args: FitArgs) -> Result<()> {
    let interval_s = cfg.resolve(args.interval_s, "interval_s", 600)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let series = load_region_series(&args.series, args.region, interval_s)?;
    let canonical = cfg.canonical_with(&[
        ("model".into(), args.model.clone()),
        ("seed".into(), seed.to_string()),
        ("region".into(), series.region_id.to_string()),
    ]);
    match args.model.to_ascii_lowercase().as_str() {
        "arima" => {
            let model: ArimaModel = if args.auto {
                let pick = auto_arima(
                    &series.values,
                    cfg.resolve(args.max_p, "max_p", 2)?,
                    cfg.resolve(args.max_q, "max_q", 2)?,
                    cfg.resolve(args.max_d, "max_d", 1)?,
                    cfg.resolve(args.holdout_fraction, "holdout_fraction", 0.2)?,
                    2,
                )?;
                println!(
                    "auto-selected (p,d,q) = ({},{},{}) holdout MAE {:.6} RMSE {:.6}",
                    pick.p, pick.d, pick.q, pick.holdout_mae, pick.holdout_rmse
                );
                pick.model
            } else {
                let p = cfg.resolve(args.p, "p", 1)?;
                let d = cfg.resolve(args.d, "d", 1)?;
                let q = cfg.resolve(args.q, "q", 1)?;
                fit_arima(&series.values, p, d, q)?
            };
            println!(
                "fitted ARIMA({},{},{}): alpha {:.6}, phi {:?}, theta {:?}, residual variance {:.6}{}",
                model.p,
                model.d,
                model.q,
                model.alpha,
                model.phi,
                model.theta,
                model.residual_variance,
                if model.stationary { "" } else { " [non-stationary AR polynomial]" }
            );
            write_output(
                &args.out,
                &(serde_json::to_string_pretty(&model.to_doc())? + "\n"),
            )?;
        }
        "lstm" => {
            let hyper = LstmHyper {
                epochs: cfg.resolve(args.epochs, "epochs", 300)?,
                learning_rate: cfg.resolve(args.learning_rate, "learning_rate", 0.01)?,
                hidden_dim: cfg.resolve(args.hidden, "hidden", 16)?,
                layers: cfg.resolve(args.layers, "layers", 1)?,
                loss: parse_loss(&cfg.resolve(args.loss.clone(), "loss", "mae".into())?)?,
                window: cfg.resolve(args.window, "window", 24)?,
            };
            let trained = lstm_train(&series.values, &hyper, seed)?;
            println!(
                "trained LSTM (window {}, hidden {}, layers {}, {} epochs): loss {:.6} -> {:.6}",
                hyper.window,
                hyper.hidden_dim,
                hyper.layers,
                hyper.epochs,
                trained.epoch_losses.first().copied().unwrap_or(f64::NAN),
                trained.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
            write_output(
                &args.out,
                &(serde_json::to_string_pretty(&trained.model.to_doc())? + "\n"),
            )?;
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "model must be arima or lstm, got `{other}`"
            )))
        }
    }
    RunManifest::new("forecast fit", &canonical, seed, &[&args.series])?.write_for(&args.out)?;
    Ok(())
}

fn forecast_predict(cfg: &ConfigFile, args: PredictArgs) -> Result<()> {
    if args.horizon < 1 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let interval_s = cfg.resolve(args.interval_s, "interval_s", 600)?;
    let model_text = std::fs::read_to_string(&args.model)?;
    let raw: serde_json::Value = serde_json::from_str(&model_text)?;
    let region = args.region.unwrap_or(0);
    let predictions: Vec<f64> = if raw.get("weights").is_some() {
        let doc: LstmModelDoc = serde_json::from_str(&model_text)?;
        let model = LstmModel::from_doc(&doc)?;
        let series_path = args.series.as_ref().ok_or_else(|| {
            Error::InvalidInput("LSTM prediction needs --series to seed the window".into())
        })?;
        let series = load_region_series(series_path, args.region, interval_s)?;
        if series.len() < model.window {
            return Err(Error::InvalidInput(format!(
                "series has {} values, window needs {}",
                series.len(),
                model.window
            )));
        }
        let mut window: Vec<f64> = series.values[series.len() - model.window..].to_vec();
        let mut out = Vec::with_capacity(args.horizon);
        for _ in 0..args.horizon {
            let next = model.forward(&window)?;
            out.push(next);
            window.remove(0);
            window.push(next);
        }
        out
    } else {
        let doc: ArimaModelDoc = serde_json::from_str(&model_text)?;
        let model = ArimaModel::from_doc(doc)?;
        model.predict(args.horizon)
    };
    let mut csv = String::from("region_id,slot,predicted\n");
    for (slot, p) in predictions.iter().enumerate() {
        csv.push_str(&format!("{region},{slot},{p}\n"));
    }
    write_output(&args.out, &csv)?;
    let mut inputs: Vec<&Path> = vec![args.model.as_path()];
    if let Some(s) = &args.series {
        inputs.push(s.as_path());
    }
    let canonical = cfg.canonical_with(&[("horizon".into(), args.horizon.to_string())]);
    RunManifest::new("forecast predict", &canonical, 0, &inputs)?.write_for(&args.out)?;
    println!(
        "wrote {} predictions to {}",
        predictions.len(),
        args.out.display()
    );
    Ok(())
}

fn forecast_sweep(cfg: &ConfigFile, args: SweepArgs) -> Result<()> {
    let interval_s = cfg.resolve(args.interval_s, "interval_s", 600)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let train_fraction = cfg.resolve(args.train_fraction, "train_fraction", 0.7)?;
    let series = load_region_series(&args.series, args.region, interval_s)?;
    if !(0.0..1.0).contains(&train_fraction) || train_fraction <= 0.0 {
        return Err(Error::InvalidInput(
            "train_fraction must lie in (0, 1)".into(),
        ));
    }
    let split = ((series.len() as f64 * train_fraction) as usize).max(2);
    if split + 2 >= series.len() {
        return Err(Error::InvalidInput(
            "series too short for the sweep split".into(),
        ));
    }
    let (train, holdout) = series.values.split_at(split);

    let epochs_list = args.epochs_list.unwrap_or_else(|| vec![100, 300]);
    let lr_list = args.lr_list.unwrap_or_else(|| vec![0.001, 0.01]);
    let hidden_list = args.hidden_list.unwrap_or_else(|| vec![8, 16]);
    let layers_list = args.layers_list.unwrap_or_else(|| vec![1]);
    let window_list = args.window_list.unwrap_or_else(|| vec![24]);
    let loss_list = args.loss_list.unwrap_or_else(|| vec!["mae".into()]);

    let mut rows = Vec::new();
    for &epochs in &epochs_list {
        for &lr in &lr_list {
            for &hidden in &hidden_list {
                for &layers in &layers_list {
                    for &window in &window_list {
                        for loss_name in &loss_list {
                            let hyper = LstmHyper {
                                epochs,
                                learning_rate: lr,
                                hidden_dim: hidden,
                                layers,
                                loss: parse_loss(loss_name)?,
                                window,
                            };
                            if train.len() <= window + 1 || holdout.len() <= window {
                                continue;
                            }
                            let trained = lstm_train(train, &hyper, seed)?;
                            // One-step holdout evaluation on sliding windows.
                            let mut preds = Vec::new();
                            let mut actuals = Vec::new();
                            for t in window..holdout.len() {
                                let w = &holdout[t - window..t];
                                preds.push(trained.model.forward(w)?);
                                actuals.push(holdout[t]);
                            }
                            let metrics = evaluate(&preds, &actuals)?;
                            rows.push((
                                epochs,
                                lr,
                                hidden,
                                layers,
                                window,
                                loss_name.clone(),
                                metrics.mae,
                                metrics.rmse,
                            ));
                        }
                    }
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(
            "no sweep combination fits the series".into(),
        ));
    }
    rows.sort_by(|a, b| a.6.total_cmp(&b.6));
    let mut csv = String::from("epochs,learning_rate,hidden,layers,window,loss,mae,rmse\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.0, r.1, r.2, r.3, r.4, r.5, r.6, r.7
        ));
    }
    write_output(&args.out, &csv)?;
    let canonical = cfg.canonical_with(&[
        ("seed".into(), seed.to_string()),
        ("train_fraction".into(), train_fraction.to_string()),
    ]);
    RunManifest::new("forecast sweep", &canonical, seed, &[&args.series])?.write_for(&args.out)?;
    let best = &rows[0];
    println!(
        "best combo: epochs {} lr {} hidden {} layers {} window {} loss {} -> MAE {:.6} RMSE {:.6}",
        best.0, best.1, best.2, best.3, best.4, best.5, best.6, best.7
    );
    Ok(())
}

fn forecast_gradcheck(cfg: &ConfigFile, args: GradcheckArgs) -> Result<()> {
    use crate::forecast::lstm::{lstm_from_parts, lstm_gradient_check};
    use rand::Rng;

    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let window = cfg.resolve(args.window, "window", 8)?;
    let hidden = cfg.resolve(args.hidden, "hidden", 6)?;
    let layers = cfg.resolve(args.layers, "layers", 1)?;

    let mut rng = crate::rng::rng_from_seed(seed);
    // Parameter count of the layered layout, mirrored from the model shape.
    let count = {
        let mut total = 0;
        for l in 0..layers {
            let in_dim = if l == 0 { 1 } else { hidden };
            total += 4 * hidden * (in_dim + hidden) + 4 * hidden;
        }
        total + hidden + 1
    };
    let params: Vec<f64> = (0..count).map(|_| rng.random_range(-0.5..0.5)).collect();
    let model = lstm_from_parts(window, hidden, layers, 0.0, 1.0, params)?;
    let input: Vec<f64> = (0..window).map(|_| rng.random::<f64>()).collect();
    let target: f64 = rng.random();
    let err = lstm_gradient_check(&model, &input, target, LossKind::Mse)?;
    println!("max relative gradient error: {err:.3e} over {count} parameters");
    if err > 1e-4 {
        return Err(Error::Degenerate(format!(
            "gradient check failed: {err:.3e} > 1e-4"
        )));
    }
    Ok(())
}

/// Build the scenario (topology + workload) shared by simulate and
/// snapshot-report.
fn build_scenario(
    cfg: &ConfigFile,
    scenario: &ScenarioArgs,
    slots_needed: usize,
    seed: u64,
) -> Result<(Topology, Vec<TrafficSeries>, u32, Vec<PathBuf>)> {
    let interval_s = cfg.resolve(scenario.interval_s, "interval_s", 600)?;
    let radius_m = cfg.resolve(scenario.radius_m, "radius_m", 3_000.0)?;
    let mu = cfg.resolve(scenario.mu, "mu", 2)?;
    let storage_scale = cfg.resolve(scenario.storage_scale, "storage_scale", 1.0)?;
    let mut inputs = Vec::new();

    let stations: Vec<BaseStation> = match &scenario.stations {
        Some(path) => {
            inputs.push(path.clone());
            let text = std::fs::read_to_string(path)?;
            parse_stations_csv(&text, scenario.latlon)?
        }
        None => {
            let regions = cfg.resolve(scenario.regions, "regions", 20)?;
            let area = cfg.resolve(scenario.area_m, "area_m", 12_000.0)?;
            let coverage = cfg.resolve(scenario.coverage_m, "coverage_m", 1_500.0)?;
            random_stations(
                regions as usize,
                area,
                area,
                coverage,
                indexed_seed(seed, "layout", 0),
            )
        }
    };
    let topo = build_hierarchy(&stations, radius_m, mu, indexed_seed(seed, "hierarchy", 0))?;
    let mut ranges = TierRanges::default();
    if storage_scale != 1.0 {
        for r in &mut ranges.0 {
            r.storage_gb = (
                r.storage_gb.0 * storage_scale,
                r.storage_gb.1 * storage_scale,
            );
        }
    }
    let topo = assign_resources(&topo, &ranges, indexed_seed(seed, "resources", 0))?;

    let slots_per_day = (86_400 / interval_s) as usize;
    let min_days = slots_needed.div_ceil(slots_per_day).max(1) as u32;
    let days = cfg.resolve(scenario.days, "days", min_days)?.max(min_days);
    let synth = SynthConfig {
        regions: stations.len() as u32,
        days,
        interval_s,
        base_level: cfg.resolve(scenario.base_level, "base_level", 10.0)?,
        daily_amp: cfg.resolve(scenario.daily_amp, "daily_amp", 40.0)?,
        noise_sd: cfg.resolve(scenario.noise_sd, "noise_sd", 2.0)?,
        ..SynthConfig::default()
    };
    let series = synth_workload(&synth, indexed_seed(seed, "workload", 0))?;
    Ok((topo, series, interval_s, inputs))
}

fn simulate_once(
    cfg: &ConfigFile,
    args: &SimulateArgs,
    strategy: Strategy,
    seed: u64,
    out: &Path,
    traces: Option<&Path>,
    events: Option<&Path>,
) -> Result<crate::simulate::SimReport> {
    let slots = cfg.resolve(args.slots, "slots", 144)?;
    let (topo, series, interval_s, inputs) = build_scenario(cfg, &args.scenario, slots, seed)?;
    let snapshots = demand_snapshots(&series, &ServiceSpec::multimedia_default())?;
    if snapshots.len() < slots {
        return Err(Error::InvalidInput(format!(
            "workload covers {} slots, {} requested",
            snapshots.len(),
            slots
        )));
    }
    let mut config = SimConfig::new(strategy, slots, seed);
    config.interval_s = interval_s;
    config.latency_cap_ms = cfg.resolve(args.latency_cap_ms, "latency_cap_ms", 100.0)?;
    config.concurrent_load_fraction = cfg.resolve(
        args.concurrent_load_fraction,
        "concurrent_load_fraction",
        0.3,
    )?;
    config.packets_per_unit = cfg.resolve(args.packets_per_unit, "packets_per_unit", 100.0)?;
    config.solver_limits = SolveLimits::default();

    let forecasts = if strategy == Strategy::Tiptop {
        let slots_per_day = (86_400 / interval_s) as usize;
        let train = cfg.resolve(args.train_slots, "train_slots", slots_per_day)?;
        let predicted = forecast_series(&series, train)?;
        Some(demand_snapshots(
            &predicted,
            &ServiceSpec::multimedia_default(),
        )?)
    } else {
        None
    };
    let report = sim_run(&topo, &snapshots, forecasts.as_deref(), &config)?;

    write_output(
        out,
        &(serde_json::to_string_pretty(&report_summary(&report))? + "\n"),
    )?;
    let canonical = cfg.canonical_with(&[
        ("strategy".into(), strategy.name().into()),
        ("slots".into(), slots.to_string()),
        ("seed".into(), seed.to_string()),
    ]);
    let input_refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    RunManifest::new("simulate", &canonical, seed, &input_refs)?.write_for(out)?;
    if let Some(path) = traces {
        write_output(path, &report.traces_to_csv())?;
        RunManifest::new("simulate", &canonical, seed, &input_refs)?.write_for(path)?;
    }
    if let Some(path) = events {
        write_output(path, &report.events_to_jsonl()?)?;
        RunManifest::new("simulate", &canonical, seed, &input_refs)?.write_for(path)?;
    }
    Ok(report)
}

/// Report JSON without the bulky event list (events go to the JSONL log).
fn report_summary(report: &crate::simulate::SimReport) -> serde_json::Value {
    serde_json::json!({
        "strategy": report.strategy.name(),
        "slots": report.slots,
        "seed": report.seed,
        "content_delivery_rate": report.content_delivery_rate,
        "packet_delivery_rate": report.packet_delivery_rate,
        "avg_latency_ms": report.avg_latency_ms,
        "link_usage": report.link_usage,
        "migration_usage": report.migration_usage,
        "network_usage": report.network_usage(),
        "exact_solves": report.exact_solves,
        "heuristic_solves": report.heuristic_solves,
        "per_slot": report.per_slot,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    if let Some(ext) = path.extension() {
        name.push(".");
        name.push(ext);
    }
    path.with_file_name(name)
}

fn simulate_cmd(cfg: &ConfigFile, args: SimulateArgs) -> Result<()> {
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let runs = cfg.resolve(args.parallel_runs, "parallel_runs", 1)?.max(1);

    let strategies: Vec<Strategy> = if args.strategy.eq_ignore_ascii_case("all") {
        vec![
            Strategy::Da,
            Strategy::Qoeap,
            Strategy::SmartFl,
            Strategy::Tiptop,
        ]
    } else {
        vec![Strategy::parse(&args.strategy)?]
    };

    // One job per (seed, strategy); independent seeds run on threads, with
    // outputs kept apart by per-job file suffixes.
    let jobs: Vec<(usize, u64, Strategy)> = (0..runs)
        .flat_map(|run_idx| {
            let run_seed = seed + run_idx as u64;
            strategies.iter().map(move |&s| (run_idx, run_seed, s))
        })
        .collect();
    let job_output = |run_seed: u64, strategy: Strategy| {
        let mut suffix = String::new();
        if strategies.len() > 1 {
            suffix.push_str(&format!(".{}", strategy.name().to_ascii_lowercase()));
        }
        if runs > 1 {
            suffix.push_str(&format!(".seed{run_seed}"));
        }
        let apply = |p: &PathBuf| {
            if suffix.is_empty() {
                p.clone()
            } else {
                with_suffix(p, &suffix)
            }
        };
        (
            apply(&args.out),
            args.traces.as_ref().map(apply),
            args.events.as_ref().map(apply),
        )
    };

    let mut results: Vec<(usize, Strategy, u64, Result<crate::simulate::SimReport>)> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|&(job_idx, run_seed, strategy)| {
                    let (out, traces, events) = job_output(run_seed, strategy);
                    let args = &args;
                    scope.spawn(move || {
                        let report = simulate_once(
                            cfg,
                            args,
                            strategy,
                            run_seed,
                            &out,
                            traces.as_deref(),
                            events.as_deref(),
                        );
                        (job_idx, strategy, run_seed, report)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation thread"))
                .collect()
        });
    results.sort_by_key(|(job_idx, s, _, _)| (*job_idx, s.name()));

    let mut comparison: Vec<(Strategy, u64, crate::simulate::SimReport)> = Vec::new();
    for (_, strategy, run_seed, report) in results {
        let report = report?;
        println!(
            "{} seed {}: content {:.4} packet {:.4} latency {:.3} ms link {:.3} migration {:.3}",
            strategy.name(),
            run_seed,
            report.content_delivery_rate,
            report.packet_delivery_rate,
            report.avg_latency_ms,
            report.link_usage,
            report.migration_usage
        );
        comparison.push((strategy, run_seed, report));
    }
    if strategies.len() > 1 {
        let mut csv = String::from(
            "strategy,seed,content_rate,packet_rate,avg_latency_ms,link_usage,migration_usage,network_usage\n",
        );
        for (strategy, run_seed, r) in &comparison {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                strategy.name(),
                run_seed,
                r.content_delivery_rate,
                r.packet_delivery_rate,
                r.avg_latency_ms,
                r.link_usage,
                r.migration_usage,
                r.network_usage()
            ));
        }
        let path = with_suffix(&args.out, ".comparison");
        let path = path.with_extension("csv");
        write_output(&path, &csv)?;
        println!("comparison table -> {}", path.display());
    }
    Ok(())
}

fn snapshot_cmd(cfg: &ConfigFile, args: SnapshotArgs) -> Result<()> {
    if args.slots.is_empty() {
        return Err(Error::InvalidInput("no slots requested".into()));
    }
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let max_slot = args.slots.iter().max().copied().unwrap_or(0);
    let (topo, series, _, inputs) = build_scenario(cfg, &args.scenario, max_slot + 1, seed)?;
    let config = SnapshotConfig {
        latency_cap_ms: cfg.resolve(args.latency_cap_ms, "latency_cap_ms", 100.0)?,
        concurrent_load_fraction: cfg.resolve(
            args.concurrent_load_fraction,
            "concurrent_load_fraction",
            0.3,
        )?,
        seed,
        solver_limits: SolveLimits::default(),
    };
    let analyses = snapshot_report(&topo, &series, &args.slots, &config)?;
    write_output(
        &args.out_json,
        &(serde_json::to_string_pretty(&analyses)? + "\n"),
    )?;
    let canonical = cfg.canonical_with(&[(
        "slots".into(),
        args.slots
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )]);
    let input_refs: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    RunManifest::new("snapshot-report", &canonical, seed, &input_refs)?
        .write_for(&args.out_json)?;
    if let Some(out_csv) = &args.out_csv {
        write_output(
            out_csv,
            &crate::simulate::SnapshotAnalysis::to_csv(&analyses),
        )?;
        RunManifest::new("snapshot-report", &canonical, seed, &input_refs)?.write_for(out_csv)?;
    }
    for a in &analyses {
        println!(
            "slot {}: intensity {:?}, demand {:.2}, selected {:?}",
            a.slot, a.intensity, a.total_demand, a.selected_nodes
        );
    }
    Ok(())
}
