//! `abtime`: estimand curves, analytic power and simulated power curves for
//! metrics under time-varying treatment effects.

mod commands;
mod config;
mod output;
mod panel_io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abtime_core::{MeasurementStrategy, Scenario};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::{load_document, parse_strategy, Builtin, Grid, ScenarioConfig};

/// Directory for outputs when neither `--out` nor the config names a path.
const OUT_DIR_ENV: &str = "ABTIME_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "abtime", version, about)]
struct Cli {
    /// Scenario config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario to start from: dgp1, dgp2 or example2.
    #[arg(long, global = true)]
    scenario: Option<Builtin>,
    /// Config override, e.g. `--set curve.a=0.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Output file (a directory for `figures`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time grid as start:stop:step.
    #[arg(long, global = true)]
    grid: Option<Grid>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimand curves of the chosen strategies.
    Estimands {
        /// Comma-separated strategies (cumulative, windowed:NU,
        /// cumulative_windowed:NU); defaults to the scenario's.
        #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
        strategies: Vec<MeasurementStrategy>,
    },
    /// Expected Z statistic and normal-approximation power.
    ExpectedZ {
        #[arg(long, default_value = "cumulative", value_parser = parse_strategy)]
        strategy: MeasurementStrategy,
    },
    /// Like `expected-z`, with an optional explicit critical value.
    PowerAnalytic {
        #[arg(long, default_value = "cumulative", value_parser = parse_strategy)]
        strategy: MeasurementStrategy,
        #[arg(long)]
        critical: Option<f64>,
    },
    /// Splits the change in expected Z between two analysis times.
    Decompose {
        /// Time pair as T:T_PRIME. Repeatable.
        #[arg(long = "pair", required = true, value_parser = parse_pair)]
        pairs: Vec<(f64, f64)>,
    },
    /// Monte Carlo rejection rates per strategy and day.
    Simulate,
    /// Reference datasets (effect curves, estimands, power curves, expected Z)
    /// as CSV files in the output directory.
    Figures,
    /// One simulated panel in long format.
    Panel,
    /// Difference in means and Z statistics for a panel file.
    Analyze {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
        strategies: Vec<MeasurementStrategy>,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .with_context(|| format!("pair must look like T:T_PRIME, got `{s}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

struct Resolved {
    scenario: Scenario,
    grid: Grid,
    path: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let mut doc = load_document(cli.config.as_deref(), &cli.overrides)?;
    if let Some(b) = cli.scenario {
        doc.as_object_mut()
            .expect("document is an object")
            .insert("base".into(), b.name().into());
    }
    let cfg = ScenarioConfig::from_document(doc)?;
    let mut scenario = cfg.to_scenario()?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(reps) = cli.reps {
        if reps == 0 {
            bail!("--reps must be at least 1");
        }
        scenario.replications = reps;
    }
    let output = cfg.output.unwrap_or_default();
    let grid = cli.grid.or(output.grid).unwrap_or(Grid {
        start: 1.0,
        stop: scenario.horizon_days as f64,
        step: 1.0,
    });
    let path = cli.out.clone().or(output.path);
    Ok(Resolved {
        scenario,
        grid,
        path,
    })
}

fn out_path(explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(default_name),
        None => PathBuf::from(default_name),
    })
}

fn or_scenario(list: &[MeasurementStrategy], scenario: &Scenario) -> Vec<MeasurementStrategy> {
    if list.is_empty() {
        scenario.strategies.clone()
    } else {
        list.to_vec()
    }
}

fn run(cli: Cli) -> Result<PathBuf> {
    let Resolved {
        scenario,
        grid,
        path,
    } = resolve(&cli)?;
    let written = match &cli.command {
        Command::Estimands { strategies } => {
            let out = out_path(path, "estimands.csv");
            commands::estimands(&scenario, &or_scenario(strategies, &scenario), grid, &out)?;
            out
        }
        Command::ExpectedZ { strategy } => {
            let out = out_path(path, "expected_z.csv");
            commands::expected_z(&scenario, *strategy, grid, None, &out)?;
            out
        }
        Command::PowerAnalytic { strategy, critical } => {
            let out = out_path(path, "power_analytic.csv");
            commands::expected_z(&scenario, *strategy, grid, *critical, &out)?;
            out
        }
        Command::Decompose { pairs } => {
            let out = out_path(path, "decompose.csv");
            commands::decompose(&scenario, pairs, &out)?;
            out
        }
        Command::Simulate => {
            let out = out_path(path, "simulate.csv");
            commands::simulate(&scenario, &out)?;
            out
        }
        Command::Figures => {
            let dir = path
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("figures"));
            commands::figures(&dir, cli.seed, cli.reps)?;
            dir
        }
        Command::Panel => {
            let out = out_path(path, "panel.csv");
            commands::panel(&scenario, &out)?;
            out
        }
        Command::Analyze { panel, strategies } => {
            let out = out_path(path, "analysis.csv");
            let strategies = or_scenario(strategies, &scenario);
            commands::analyze(panel, &strategies, grid, &scenario, &out)?;
            out
        }
    };
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn pairs_parse() {
        assert_eq!(parse_pair("8:12").unwrap(), (8.0, 12.0));
        assert!(parse_pair("8").is_err());
    }

    #[test]
    fn builtin_flag_names_match_config_names() {
        for b in [Builtin::Dgp1, Builtin::Dgp2, Builtin::Example2] {
            assert_eq!(b.name().parse::<Builtin>().unwrap(), b);
        }
    }
}
