use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cps_ids::attacks::all_scenarios;
use cps_ids::ids::{Attribution, ContextMode};
use cps_ids::runner::{
    batch, calibrate_dc_motor, execute, load_calibration, resolve_scenario, ConfigFile, RunConfig, RunReport,
    ScenarioRef, CALIBRATION_FILE,
};
use cps_ids::Error;

/// Residual-based intrusion detection on simulated networked control loops.
#[derive(Parser)]
#[command(name = "cps-ids", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trace.csv and report.json.
    Run(RunArgs),
    /// Print the scenario catalog.
    ListScenarios {
        #[arg(long)]
        json: bool,
    },
    /// Derive detector constants from seeded calibration runs.
    Calibrate(CalibrateArgs),
    /// Run several scenarios in parallel, one output subdirectory each.
    Batch(BatchArgs),
}

#[derive(Args, Clone)]
struct Overrides {
    /// Simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Context mode: off, adaptive-threshold or adaptive-estimation.
    #[arg(long, value_parser = parse_mode)]
    detector: Option<ContextMode>,
    /// Attribution policy: scheduled-slot or as-applied.
    #[arg(long, value_parser = parse_attribution)]
    attribution: Option<Attribution>,
    /// Per-window false-alarm probability.
    #[arg(long = "p-fa")]
    p_fa: Option<f64>,
    /// Calibration file written by `calibrate`.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Catalog id (S1..S13, LK-internal-sensor, LK-external-controller).
    #[arg(long)]
    scenario: Option<String>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Print the report as JSON instead of a summary line.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BatchArgs {
    /// Catalog ids; repeat or separate with commas. Defaults to the whole catalog.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<String>,
    /// JSON run configurations, one run each.
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Parent output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlantArg {
    DcMotor,
    LaneKeeping,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_enum, default_value = "dc-motor")]
    plant: PlantArg,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long = "p-fa", default_value_t = 1e-3)]
    p_fa: f64,
    /// Directory receiving calibration.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

fn parse_mode(s: &str) -> Result<ContextMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_attribution(s: &str) -> Result<Attribution, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Configuration problems exit with 2, numerical faults with 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::UnknownScenario { .. }
        | Error::InvalidAttack(_)
        | Error::InvalidArgument(_)
        | Error::Io(_) => 2,
        _ => 3,
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e))
}

fn build_config(
    scenario: Option<&str>,
    config: Option<&Path>,
    out: Option<PathBuf>,
    ov: &Overrides,
) -> cps_ids::Result<RunConfig> {
    let file = match config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let reference = match (scenario, &file.scenario) {
        (Some(id), _) => ScenarioRef::Id(id.to_string()),
        (None, Some(r)) => r.clone(),
        (None, None) => return Err(Error::Config("no scenario given (use --scenario or --config)".into())),
    };
    let mut scenario = resolve_scenario(&reference)?;
    if let Some(seed) = ov.seed.or(file.seed) {
        scenario.seed = seed;
    }
    if let Some(d) = ov.duration.or(file.duration) {
        scenario.duration = d;
    }
    let mut detector = file.detector_for(scenario.plant)?;
    if let Some(path) = &ov.calibration {
        load_calibration(path)?.apply_to(&mut detector);
    }
    if let Some(m) = ov.detector {
        detector.context_mode = m;
    }
    if let Some(a) = ov.attribution {
        detector.attribution = a;
    }
    if let Some(p) = ov.p_fa {
        detector.p_fa = p;
    }
    scenario.validate()?;
    detector.validate()?;
    let out_dir = out.or(file.out).unwrap_or_else(|| PathBuf::from("out"));
    Ok(RunConfig {
        scenario,
        detector,
        out_dir,
    })
}

fn summary(r: &RunReport) -> String {
    let det = r
        .first_detection_time
        .map_or_else(|| "none".to_string(), |t| format!("{t:.2}s"));
    format!("{}: {} (first detection {det})", r.scenario_id, r.final_classification.as_str())
}

fn print_report(r: &RunReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(r).expect("report serializes"));
    } else {
        println!("{}", summary(r));
    }
}

fn run(args: RunArgs) -> ExitCode {
    let cfg = match build_config(args.scenario.as_deref(), args.config.as_deref(), args.out, &args.overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match execute(&cfg) {
        Ok(r) => {
            print_report(&r, args.json);
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn list(json: bool) -> ExitCode {
    let all = all_scenarios();
    if json {
        let rows: Vec<_> = all
            .iter()
            .map(|s| serde_json::json!({"id": s.id, "plant": s.plant, "description": s.description}))
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows).expect("catalog serializes"));
    } else {
        for s in &all {
            println!("{:<24} {}", s.id, s.description);
        }
    }
    ExitCode::SUCCESS
}

fn calibrate(args: CalibrateArgs) -> ExitCode {
    if let PlantArg::LaneKeeping = args.plant {
        return fail(&Error::Config("the lane-keeping detector has no context constants to calibrate".into()));
    }
    let cal = match calibrate_dc_motor(args.seed, args.p_fa) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let text = serde_json::to_string_pretty(&cal).expect("calibration serializes") + "\n";
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return fail(&Error::Config(format!("cannot create {}: {e}", args.out.display())));
    }
    let path = args.out.join(CALIBRATION_FILE);
    if let Err(e) = std::fs::write(&path, &text) {
        return fail(&Error::Config(format!("cannot write {}: {e}", path.display())));
    }
    if args.json {
        print!("{text}");
    } else {
        println!(
            "a={} b={} d={} e={} baseline={} margin={} -> {}",
            cal.a,
            cal.b,
            cal.d,
            cal.e,
            cal.dc_baseline,
            cal.dc_load_margin,
            path.display()
        );
    }
    ExitCode::SUCCESS
}

fn run_batch(args: BatchArgs) -> ExitCode {
    let mut configs = Vec::new();
    let mut ids = args.scenario.clone();
    if ids.is_empty() && args.config.is_empty() {
        ids = all_scenarios().into_iter().map(|s| s.id).collect();
    }
    for id in &ids {
        match build_config(Some(id), None, None, &args.overrides) {
            Ok(mut c) => {
                c.out_dir = args.out.join(&c.scenario.id);
                configs.push(c);
            }
            Err(e) => return fail(&e),
        }
    }
    for path in &args.config {
        match build_config(None, Some(path), None, &args.overrides) {
            Ok(mut c) => {
                c.out_dir = args.out.join(&c.scenario.id);
                configs.push(c);
            }
            Err(e) => return fail(&e),
        }
    }
    let mut worst = 0u8;
    let mut reports = Vec::new();
    for (cfg, result) in configs.iter().zip(batch(&configs)) {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                eprintln!("error: {}: {e}", cfg.scenario.id);
                worst = worst.max(exit_code(&e));
            }
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
    } else {
        for r in &reports {
            println!("{}", summary(r));
        }
    }
    ExitCode::from(worst)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run(a) => run(a),
        Command::ListScenarios { json } => list(json),
        Command::Calibrate(a) => calibrate(a),
        Command::Batch(a) => run_batch(a),
    }
}
