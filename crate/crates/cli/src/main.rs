use clap::{Parser, Subcommand, ValueEnum};
use seal::agent::{run_simulation, LocalizationMode, NavigationMode, ScenarioConfig};
use seal::metrics::{comparison_table, RunReport};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "seal", version, about = "Multi-robot exploration and localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write maps, trajectories and metrics.
    Run(RunArgs),
    /// Print a side-by-side table of finished runs.
    Compare {
        /// Comma-separated run directories (or metrics.json files).
        #[arg(long, value_delimiter = ',', required = true)]
        runs: Vec<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Step budget.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    robots: Option<usize>,
    #[arg(long, value_enum, default_value_t = Baseline::None)]
    baseline: Baseline,
    /// Overrides the scenario's localization mode.
    #[arg(long, value_enum)]
    localization: Option<Localization>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// Nearest-frontier navigation on dead reckoning.
    Frontier,
    None,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Localization {
    Seal,
    Rloc,
    DeadReckoning,
}

fn run(args: RunArgs) -> Result<(), String> {
    let mut config = ScenarioConfig::load(&args.scenario).map_err(|e| format!("{}: {e}", args.scenario.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    if let Some(robots) = args.robots {
        config.robots = robots;
        config.starts.retain(|i, _| *i < robots);
    }
    if args.baseline == Baseline::Frontier {
        config.navigation = NavigationMode::NearestFrontier;
        config.localization = LocalizationMode::DeadReckoning;
    }
    if let Some(l) = args.localization {
        config.localization = match l {
            Localization::Seal => LocalizationMode::Seal,
            Localization::Rloc => LocalizationMode::RlocOnly,
            Localization::DeadReckoning => LocalizationMode::DeadReckoning,
        };
    }
    config.validate().map_err(|e| e.to_string())?;
    let out = run_simulation(&config).map_err(|e| e.to_string())?;
    out.simulation
        .write_outputs(&args.out, &out.report)
        .map_err(|e| e.to_string())?;
    let r = &out.report;
    println!(
        "{} seed {}: {} steps, explored {:.1}%, ssim {:.3}, ate {:.3} m, ale {:.3} m -> {}",
        r.mode,
        r.seed,
        r.steps,
        r.explored_pct,
        r.map_ssim,
        r.ate_m,
        r.ale_m,
        args.out.display()
    );
    Ok(())
}

fn load_report(path: &Path) -> Result<(String, RunReport), String> {
    let file = if path.is_dir() { path.join("metrics.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
    let report = RunReport::from_json(&text).map_err(|e| format!("{}: {e}", file.display()))?;
    let label = if path.is_dir() {
        path.file_name().map(|n| n.to_string_lossy().into_owned())
    } else {
        path.parent().and_then(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned())
    };
    Ok((label.unwrap_or_else(|| path.display().to_string()), report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare { runs } => runs
            .iter()
            .map(|p| load_report(p))
            .collect::<Result<Vec<_>, _>>()
            .map(|reports| print!("{}", comparison_table(&reports))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
