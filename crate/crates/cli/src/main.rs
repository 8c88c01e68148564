//! `windcast`: command-line front end for the forecasting pipeline.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure (divergence, singular system).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use windcast_core::experiments::{
    self, case_by_id, case_table, enumerate_cases, improvement_stat, run_case, run_matrix, sweep_pairs,
    window_sweep, CaseResult, CaseSpec, ExperimentConfig, SWEEP_HORIZON_STEPS, SWEEP_PAST_STEPS,
};
use windcast_core::features::{analyze, ForestConfig, SelectionPolicy};
use windcast_core::fixture::synthetic_series;
use windcast_core::ingest::{self, Field, SeriesDataset, TIMESTAMP_FORMAT};
use windcast_core::metrics::{MetricReport, METRIC_NAMES};
use windcast_core::models::{ModelKind, TrainedModel};
use windcast_core::physics::{extrapolate_speed, Band, Turbine, TurbineSpec};
use windcast_core::report;
use windcast_core::windowing::{make_windows, WindowSpec};
use windcast_core::{ErrorKind, FeatureTable};

#[derive(Debug, Parser)]
#[command(name = "windcast", version, about = "Offshore wind speed and power forecasting")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Turbine/site constants as JSON or TOML (missing keys use defaults).
    #[arg(long, global = true, value_name = "FILE")]
    turbine: Option<PathBuf>,
    /// Window as past,horizon steps of 10 minutes, e.g. 18,1.
    #[arg(long, global = true, value_name = "P,H", value_parser = parse_window)]
    window: Option<(usize, usize)>,
    /// Directory for generated files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Cap on training epochs for the network models.
    #[arg(long, global = true, value_name = "N")]
    max_epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and repair a buoy file, print a summary, write a clean CSV.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the repair log as JSON lines.
        #[arg(long, value_name = "FILE")]
        repair_log: Option<PathBuf>,
        #[arg(long)]
        station: Option<String>,
    },
    /// Correlation matrix, forest importances and feature selection.
    Features {
        input: PathBuf,
        #[arg(long, default_value = "WSPD")]
        target: String,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Steps ahead the forest predicts the target.
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        #[arg(long)]
        min_importance: Option<f64>,
    },
    /// Past-steps vs horizon grid on the validation split.
    Sweep {
        input: PathBuf,
        #[arg(long, default_value = "fcnn")]
        model: String,
        #[arg(long, default_value = experiments::WSPD_LOW)]
        target: String,
        /// Comma-separated input columns (default: the selected 3.8 m set).
        #[arg(long, value_delimiter = ',')]
        inputs: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        past: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        horizon: Option<Vec<usize>>,
    },
    /// The nine feature-combination cases for each model kind.
    Cases {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "ridge,fcnn,gru")]
        models: Vec<String>,
        /// Subset of case ids (default all nine).
        #[arg(long, value_delimiter = ',')]
        cases: Option<Vec<u8>>,
    },
    /// Height extrapolation and the power curve.
    Physics {
        #[command(subcommand)]
        action: PhysicsAction,
    },
    /// Train one model on one case and save it.
    Train {
        input: PathBuf,
        #[arg(long, default_value = "fcnn")]
        model: String,
        #[arg(long, default_value_t = 1)]
        case: u8,
        #[arg(long, value_name = "FILE")]
        model_file: Option<PathBuf>,
    },
    /// Predict every window of a series with a saved model.
    Predict {
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        model_file: PathBuf,
        /// Output CSV (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic 10-minute series as CSV.
    Fixture {
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum PhysicsAction {
    /// Hub speed, operating band and power for one measured speed.
    Convert {
        #[arg(long)]
        speed: f64,
        /// Measurement height in m (default: the anemometer height).
        #[arg(long)]
        height: Option<f64>,
    },
    /// Cut-in, rated and cut-out speeds at hub and anemometer height.
    Bands,
    /// Share of available wind energy converted over a series.
    Conversion { input: PathBuf },
}

struct Failure {
    kind: ErrorKind,
    error: anyhow::Error,
}

type CliResult<T = ()> = Result<T, Failure>;

fn core_err<E: Into<windcast_core::Error>>(e: E) -> Failure {
    let e: windcast_core::Error = e.into();
    Failure {
        kind: e.kind(),
        error: e.into(),
    }
}

fn usage(error: anyhow::Error) -> Failure {
    Failure {
        kind: ErrorKind::Usage,
        error,
    }
}

fn data(error: anyhow::Error) -> Failure {
    Failure {
        kind: ErrorKind::Data,
        error,
    }
}

fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let (p, h) = s
        .split_once(',')
        .ok_or_else(|| format!("expected P,H, got {s:?}"))?;
    let p = p.trim().parse().map_err(|e| format!("past steps: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("horizon steps: {e}"))?;
    Ok((p, h))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.kind.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let g = &cli.global;
    let turbine = load_turbine(g.turbine.as_deref())?;
    match &cli.command {
        Command::Ingest {
            input,
            out,
            repair_log,
            station,
        } => cmd_ingest(input, out, repair_log.as_deref(), station.as_deref()),
        Command::Features {
            input,
            target,
            trees,
            horizon,
            min_importance,
        } => cmd_features(g, input, target, *trees, *horizon, *min_importance),
        Command::Sweep {
            input,
            model,
            target,
            inputs,
            past,
            horizon,
        } => cmd_sweep(g, turbine, input, model, target, inputs.clone(), past.clone(), horizon.clone()),
        Command::Cases { input, models, cases } => cmd_cases(g, turbine, input, models, cases.as_deref()),
        Command::Physics { action } => cmd_physics(&turbine, action),
        Command::Train {
            input,
            model,
            case,
            model_file,
        } => cmd_train(g, turbine, input, model, *case, model_file.as_deref()),
        Command::Predict {
            input,
            model_file,
            out,
        } => cmd_predict(g, turbine, input, model_file, out.as_deref()),
        Command::Fixture { rows, out } => cmd_fixture(g, *rows, out),
    }
}

fn load_turbine(path: Option<&Path>) -> CliResult<Turbine> {
    let spec = match path {
        None => TurbineSpec::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading turbine config {}", p.display()))
                .map_err(usage)?;
            let is_toml = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
            if is_toml {
                toml::from_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))
                    .map_err(usage)?
            } else {
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))
                    .map_err(usage)?
            }
        }
    };
    Turbine::new(spec).map_err(core_err)
}

fn load_dataset(path: &Path) -> CliResult<SeriesDataset> {
    let raw = ingest::load_path(path).map_err(core_err)?;
    ingest::repair(raw, ingest::ten_minutes()).map_err(core_err)
}

fn load_case_table(path: &Path, turbine: &Turbine) -> CliResult<FeatureTable> {
    let ds = load_dataset(path)?;
    case_table(&ds, turbine).map_err(core_err)
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(data)?;
    }
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data)
}

fn experiment_config(g: &Global, turbine: Turbine) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(turbine);
    if let Some((p, h)) = g.window {
        cfg.past_steps = p;
        cfg.horizon_steps = h;
    }
    cfg.train.seed = g.seed;
    if let Some(n) = g.max_epochs {
        cfg.train.max_epochs = n;
    }
    cfg
}

fn parse_kinds(names: &[String]) -> CliResult<Vec<ModelKind>> {
    let mut kinds = Vec::new();
    for n in names {
        let k = ModelKind::parse(n).map_err(core_err)?;
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    if kinds.is_empty() {
        return Err(usage(anyhow!("no model kinds given")));
    }
    Ok(kinds)
}

fn cmd_ingest(input: &Path, out: &Path, repair_log: Option<&Path>, station: Option<&str>) -> CliResult {
    let mut ds = load_dataset(input)?;
    if let Some(id) = station {
        ds = ds.with_station_id(id);
    } else if let Some(stem) = input.file_stem().and_then(|s| s.to_str()) {
        ds = ds.with_station_id(stem);
    }
    print!("{}", ingest::summarize(&ds));
    let mut buf = Vec::new();
    ingest::write_csv(ds.records(), &mut buf).map_err(core_err)?;
    write_file(out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    if let Some(path) = repair_log {
        let mut buf = Vec::new();
        ingest::write_repair_log(ds.repair_log(), &mut buf).map_err(core_err)?;
        write_file(path, &String::from_utf8(buf).expect("json is utf-8"))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_features(
    g: &Global,
    input: &Path,
    target: &str,
    trees: usize,
    horizon: usize,
    min_importance: Option<f64>,
) -> CliResult {
    let ds = load_dataset(input)?;
    let table = FeatureTable::from_dataset(&ds);
    let names: Vec<&str> = Field::ALL.iter().map(|f| f.name()).collect();
    let target = Field::from_name(target)
        .ok_or_else(|| usage(anyhow!("unknown target {target:?}; expected one of {}", names.join(", "))))?;
    let policy = SelectionPolicy {
        target: target.name().to_string(),
        min_importance,
        ..SelectionPolicy::default()
    };
    let forest = ForestConfig {
        n_trees: trees,
        ..ForestConfig::default()
    };
    let a = analyze(&table, &names, &policy, &forest, horizon, g.seed).map_err(core_err)?;

    println!("Pearson correlation ({} complete rows)", a.correlation.rows_used);
    print!("{:>6}", "");
    for n in &a.correlation.names {
        print!(" {n:>7}");
    }
    println!();
    for (i, n) in a.correlation.names.iter().enumerate() {
        print!("{n:>6}");
        for v in &a.correlation.values[i] {
            if v.is_finite() {
                print!(" {v:>7.3}");
            } else {
                print!(" {:>7}", "n/a");
            }
        }
        println!();
    }
    println!();
    println!(
        "Forest importance for {} at +{horizon} step(s){}",
        policy.target,
        a.oob_r2.map_or(String::new(), |r| format!(", out-of-bag R2 {r:.4}"))
    );
    if a.importance.degenerate {
        println!("(no split improved the fit; weights are uniform)");
    }
    for (n, w) in a.correlation.names.iter().zip(&a.importance.weights) {
        println!("{n:>6} {w:.4}");
    }
    println!();
    println!("kept: {}", a.selection.kept.join(", "));
    for (name, reason) in &a.selection.dropped {
        println!("dropped {name}: {}", serde_json::to_value(reason).expect("enum serializes").as_str().unwrap_or("?"));
    }
    let path = g.out_dir.join("features.json");
    let json = serde_json::to_string_pretty(&a).expect("analysis serializes");
    write_file(&path, &(json + "\n"))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    g: &Global,
    turbine: Turbine,
    input: &Path,
    model: &str,
    target: &str,
    inputs: Option<Vec<String>>,
    past: Option<Vec<usize>>,
    horizon: Option<Vec<usize>>,
) -> CliResult {
    let kind = ModelKind::parse(model).map_err(core_err)?;
    let inputs = inputs.unwrap_or_else(|| case_by_id(7).expect("case 7 exists").inputs);
    let pairs = if let Some((p, h)) = g.window {
        WindowSpec::new(p, h, inputs.clone(), target).map_err(core_err)?;
        vec![(p, h)]
    } else {
        let past = past.unwrap_or_else(|| SWEEP_PAST_STEPS.to_vec());
        let horizon = horizon.unwrap_or_else(|| SWEEP_HORIZON_STEPS.to_vec());
        sweep_pairs(&past, &horizon)
    };
    if pairs.is_empty() {
        return Err(usage(anyhow!("no (past, horizon) pair satisfies past >= horizon")));
    }
    let table = load_case_table(input, &turbine)?;
    let cfg = experiment_config(g, turbine);
    let sweep = window_sweep(&table, &inputs, target, &kind, &pairs, &cfg).map_err(core_err)?;
    println!(
        "{} validation MAE, target {} from {} (rows: past steps, columns: horizon steps)",
        sweep.kind,
        sweep.target,
        sweep.inputs.join(", ")
    );
    print!("{}", report::sweep_table(&sweep));
    let path = g.out_dir.join(format!("sweep_{}.csv", sweep.kind));
    write_file(&path, &report::sweep_csv(&sweep))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_cases(g: &Global, turbine: Turbine, input: &Path, models: &[String], ids: Option<&[u8]>) -> CliResult {
    let kinds = parse_kinds(models)?;
    let cases: Vec<CaseSpec> = match ids {
        None => enumerate_cases(),
        Some(ids) => ids.iter().map(|&i| case_by_id(i)).collect::<Result<_, _>>().map_err(core_err)?,
    };
    let table = load_case_table(input, &turbine)?;
    let cfg = experiment_config(g, turbine);
    let cells = run_matrix(&table, &kinds, &cases, &cfg);

    let mut first_error = None;
    for c in &cells {
        if let Err(e) = &c.outcome {
            eprintln!("{} {}: {e}", c.case.label(), c.kind.label());
            first_error.get_or_insert(e.kind());
        }
    }
    let results: Vec<CaseResult> = cells.iter().filter_map(|c| c.outcome.as_ref().ok().cloned()).collect();
    if results.is_empty() {
        return Err(Failure {
            kind: first_error.unwrap_or(ErrorKind::Data),
            error: anyhow!("every case failed"),
        });
    }
    let improvement = improvement_stat(&results);

    println!("Power-space test metrics (P={}, H={})", cfg.past_steps, cfg.horizon_steps);
    print!("{}", report::results_table(&results));
    match &improvement {
        Ok(stat) => {
            println!();
            println!("Speed-output vs power-output improvement (power-space RMSE):");
            for i in stat.per_kind.iter().chain(std::iter::once(&stat.pooled)) {
                println!(
                    "  {:<6} speed {:.4} MW, power {:.4} MW, improvement {:.2}%",
                    i.kind,
                    i.speed_output_rmse * report::MW,
                    i.power_output_rmse * report::MW,
                    i.percent
                );
            }
        }
        Err(e) => println!("improvement statistic unavailable: {e}"),
    }

    let csv_path = g.out_dir.join("cases.csv");
    write_file(&csv_path, &report::results_csv(&results))?;
    let json_path = g.out_dir.join("cases.json");
    write_file(&json_path, &report::results_json(&cells, improvement.as_ref().ok()))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());
    for k in &kinds {
        match report::radar_for_kind(&results, k.label()) {
            Ok(chart) => {
                let path = g.out_dir.join(format!("radar_{}.svg", k.label()));
                let svg = report::render_svg(&chart).map_err(core_err)?;
                write_file(&path, &svg)?;
                println!("wrote {}", path.display());
            }
            Err(e) => eprintln!("radar for {}: {e}", k.label()),
        }
    }
    Ok(())
}

fn band_name(b: Band) -> &'static str {
    match b {
        Band::BelowCutIn => "below cut-in",
        Band::Partial => "partial load",
        Band::Rated => "rated",
        Band::CutOut => "cut-out",
    }
}

fn cmd_physics(turbine: &Turbine, action: &PhysicsAction) -> CliResult {
    let spec = turbine.spec();
    match action {
        PhysicsAction::Convert { speed, height } => {
            let h = height.unwrap_or(spec.anemometer_height);
            let hub = extrapolate_speed(*speed, h, spec.hub_height, spec.roughness_length).map_err(core_err)?;
            let power = turbine.power(hub);
            println!("measured speed: {speed} m/s at {h} m");
            println!("hub speed: {hub:.4} m/s at {} m", spec.hub_height);
            println!("band: {}", band_name(turbine.band(hub)));
            println!("power: {:.1} W ({:.4} MW)", power, power * report::MW);
            for (name, edge) in [
                ("cut-in", spec.cut_in),
                ("rated", spec.rated_speed),
                ("cut-out", spec.cut_out),
            ] {
                if (hub - edge).abs() < 0.1 {
                    println!(
                        "note: hub speed is within 0.1 m/s of the {name} speed {edge} m/s (power there: {:.4} MW)",
                        turbine.power(edge) * report::MW
                    );
                }
            }
        }
        PhysicsAction::Bands => {
            let hub = turbine.hub_bands();
            let low = turbine.anemometer_bands();
            println!("height ratio {} m -> {} m: {:.6}", spec.anemometer_height, spec.hub_height, turbine.hub_ratio());
            println!("derived Cp: {:.6}", turbine.cp());
            println!("{:<10} {:>10} {:>10}", "threshold", "hub", "anemometer");
            for (name, a, b) in [
                ("cut-in", hub.cut_in, low.cut_in),
                ("rated", hub.rated, low.rated),
                ("cut-out", hub.cut_out, low.cut_out),
            ] {
                println!("{name:<10} {a:>10.4} {b:>10.4}");
            }
        }
        PhysicsAction::Conversion { input } => {
            let ds = load_dataset(input)?;
            let stats = turbine
                .conversion_fraction(&ds.column(Field::Wspd))
                .map_err(core_err)?;
            println!("conversion fraction: {:.6}", stats.fraction);
            if stats.no_wind {
                println!("note: no wind in the series; fraction defined as 0");
            }
            println!(
                "time in band: below cut-in {:.6}, partial {:.6}, rated {:.6}, cut-out {:.6}",
                stats.below_cut_in, stats.partial_load, stats.rated_load, stats.cut_out
            );
        }
    }
    Ok(())
}

fn print_report(space: &str, unit: &str, r: &MetricReport) {
    let vals: Vec<String> = METRIC_NAMES
        .iter()
        .zip(r.values())
        .map(|(n, v)| format!("{n}={}", v.map_or("n/a".into(), |x| format!("{x:.6}"))))
        .collect();
    println!("{space} ({unit}): {}", vals.join(" "));
}

fn cmd_train(g: &Global, turbine: Turbine, input: &Path, model: &str, case: u8, model_file: Option<&Path>) -> CliResult {
    let kind = ModelKind::parse(model).map_err(core_err)?;
    let case = case_by_id(case).map_err(core_err)?;
    let table = load_case_table(input, &turbine)?;
    let cfg = experiment_config(g, turbine);
    let r = run_case(&table, &case, &kind, &cfg).map_err(core_err)?;
    println!(
        "{} {} on {} -> {}: {} epochs, best epoch {}",
        r.case.label(),
        r.kind.label(),
        r.case.inputs.join(", "),
        r.case.target,
        r.model.history.len(),
        r.model.best_epoch
    );
    let native_unit = if r.case.targets_speed() { "m/s" } else { "MW" };
    print_report("test native", native_unit, &report::native_report_display(&r));
    print_report("test power", "MW", &report::power_report_mw(&r));
    let path = model_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| g.out_dir.join(format!("model_c{}_{}.json", r.case.id, r.kind.label())));
    write_file(&path, &r.model.to_json().map_err(core_err)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_predict(_g: &Global, turbine: Turbine, input: &Path, model_file: &Path, out: Option<&Path>) -> CliResult {
    let model = TrainedModel::load(model_file).map_err(core_err)?;
    let ds = load_dataset(input)?;
    let table = case_table(&ds, &turbine).map_err(core_err)?;
    let samples = make_windows(&table, 0..table.len(), &model.spec).map_err(core_err)?;
    let preds = model.predict_samples(&samples).map_err(core_err)?;
    let mut w = Vec::new();
    writeln!(w, "timestamp,t_index,actual,predicted").expect("in-memory write");
    for (s, p) in samples.iter().zip(&preds) {
        let ts = ds.records()[s.t_index].timestamp.format(TIMESTAMP_FORMAT);
        writeln!(w, "{ts},{},{},{}", s.t_index, s.target, p).expect("in-memory write");
    }
    let text = String::from_utf8(w).expect("utf-8");
    match out {
        Some(path) => {
            write_file(path, &text)?;
            println!("wrote {} predictions to {}", preds.len(), path.display());
        }
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("writing stdout")
            .map_err(data)?,
    }
    Ok(())
}

fn cmd_fixture(g: &Global, rows: usize, out: &Path) -> CliResult {
    if rows < 2 {
        return Err(usage(anyhow!("need at least 2 rows")));
    }
    let ds = synthetic_series(rows, g.seed);
    let mut buf = Vec::new();
    ingest::write_csv(ds.records(), &mut buf).map_err(core_err)?;
    write_file(out, &String::from_utf8(buf).expect("csv is utf-8"))?;
    println!("wrote {rows} rows to {}", out.display());
    Ok(())
}
