use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use itsguard::experiment::{self, ExperimentId, ExperimentSpec, OutputFormat};
use itsguard::game::{stackelberg_equilibrium, SolveReport, StationCapRule, StealthLevel};
use itsguard::scenario::{generate, Scenario, ScenarioConfig};
use itsguard::{Error, Result};

#[derive(Parser)]
#[command(name = "itsguard", version, about = "Backup power allocation against stealthy grid attacks on a connected road network")]
struct Cli {
    /// Scenario settings (TOML); missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the settings.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write it as TOML.
    Generate {
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the base stations ranked by impact score.
    Inspect {
        /// Scenario file; generated from the settings when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Show only the first N stations.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Solve one game and print the equilibrium as TOML.
    Solve {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "line")]
        level: StealthLevel,
        /// Defender budget in watts; defaults to the configured budget.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long = "theorem3-cap", default_value = "dropped-sum")]
        cap: StationCapRule,
    },
    /// Run a batch experiment and write its table.
    Experiment {
        id: ExperimentId,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Comma-separated stealth levels; the experiment's defaults otherwise.
        #[arg(long, value_delimiter = ',')]
        level: Vec<StealthLevel>,
        #[arg(long = "theorem3-cap", default_value = "dropped-sum")]
        cap: StationCapRule,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text)
                .map_err(|e| Error::Format { path: p.display().to_string(), message: e.message().to_string() })?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scenario(path: Option<&Path>, cfg: &ScenarioConfig) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => generate(cfg),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Generate { out } => {
            let s = generate(&cfg)?;
            match out {
                Some(p) => s.save(&p)?,
                None => print!("{}", s.to_toml()?),
            }
        }
        Command::Inspect { scenario: path, top } => {
            let s = scenario(path.as_deref(), &cfg)?;
            println!(
                "{} streets, {} base stations, {} generators",
                s.network.len(),
                s.base_stations.len(),
                s.generators.len()
            );
            println!("{:>6} {:>14} {:>8}", "bs", "z_score", "streets");
            for (b, z) in s.impact.ranking().into_iter().take(top.unwrap_or(usize::MAX)) {
                println!("{b:>6} {z:>14.6e} {:>8}", s.impact.covered_street_count(b));
            }
        }
        Command::Solve { scenario: path, level, budget, cap } => {
            let s = scenario(path.as_deref(), &cfg)?;
            let inst = s.game_instance().with_cap_rule(cap);
            let eq = stackelberg_equilibrium(level, &inst, budget.unwrap_or(s.config.budget))?;
            print!("{}", SolveReport::new(&inst, &eq).to_toml()?);
        }
        Command::Experiment { id, reps, out_dir, format, level, cap } => {
            let mut spec = ExperimentSpec::new(id, cfg);
            if let Some(r) = reps {
                spec.reps = r;
            }
            if !level.is_empty() {
                spec.levels = level;
            }
            spec.cap_rule = cap;
            let table = experiment::run(&spec)?;
            let path = table.emit(format, &out_dir)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
