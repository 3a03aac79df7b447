use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use equal_shares::completion::{CompletionConfig, StopRule, Strategy};
use equal_shares::model::UtilityKind;
use equal_shares::rational::{integer, parse_rational};
use equal_shares_cli::{cmd_check, cmd_compare, cmd_gen_exp, cmd_run, cmd_sweep, CompareSource, Rule};

#[derive(Parser)]
#[command(name = "ees", version, about = "Exact Equal Shares elections and budget completion")]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum UtilityArg {
    Cardinal,
    Cost,
}

impl From<UtilityArg> for UtilityKind {
    fn from(arg: UtilityArg) -> Self {
        match arg {
            UtilityArg::Cardinal => UtilityKind::Cardinal,
            UtilityArg::Cost => UtilityKind::Cost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Ees,
    Mes,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum StrategyArg {
    AddOneMes,
    AddOneEes,
    AddOpt,
    AddOptSkip,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    FirstOverspend,
    AllSelected,
}

#[derive(Subcommand)]
enum Command {
    /// Run a rule on a .pb file and validate the outcome.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "ees")]
        rule: RuleArg,
        #[arg(long, value_enum, default_value = "cardinal")]
        utility: UtilityArg,
    },
    /// Sweep virtual budgets and write the breakpoint trace as CSV.
    Sweep {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "cardinal")]
        utility: UtilityArg,
        #[arg(long, value_enum, default_value = "add-opt")]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value = "all-selected")]
        stop: StopArg,
        /// Maximum number of rule executions.
        #[arg(long)]
        cap: Option<usize>,
        /// Per-voter step of the add-one strategies.
        #[arg(long, default_value = "1")]
        unit: String,
        /// CSV destination; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the exponential-outcome instance and its budget manifest.
    GenExp {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the output path with a .budgets.csv suffix.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Benchmark the completion methods on a directory of .pb files or on a
    /// seeded synthetic corpus.
    Compare {
        dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "cardinal")]
        utility: UtilityArg,
        #[arg(long)]
        cap: Option<usize>,
        /// Generate this many synthetic instances instead of reading a directory.
        #[arg(long, conflicts_with = "dir")]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-instance CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aggregate CSV destination.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Add wall-clock columns (makes the CSV non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Cross-check EES on a file against the brute-force oracles.
    Check {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "cardinal")]
        utility: UtilityArg,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { file, rule, utility } => {
            let rule = match rule {
                RuleArg::Ees => Rule::Ees,
                RuleArg::Mes => Rule::Mes,
                RuleArg::Greedy => Rule::Greedy,
            };
            print!("{}", cmd_run(&file, rule, utility.into())?);
        }
        Command::Sweep {
            file,
            utility,
            strategy,
            stop,
            cap,
            unit,
            out,
        } => {
            let strategy = match strategy {
                StrategyArg::AddOneMes => Strategy::AddOneMes,
                StrategyArg::AddOneEes => Strategy::AddOneEes,
                StrategyArg::AddOpt => Strategy::AddOpt,
                StrategyArg::AddOptSkip => Strategy::AddOptSkip,
            };
            let stop = match stop {
                StopArg::FirstOverspend => StopRule::FirstOverspend,
                StopArg::AllSelected => StopRule::AllSelected,
            };
            let unit = parse_rational(&unit)?;
            anyhow::ensure!(unit > integer(0), "--unit must be positive");
            let mut config = CompletionConfig::new(strategy, stop).with_increment_unit(unit);
            if let Some(cap) = cap {
                config = config.with_cap(cap);
            }
            let output = cmd_sweep(&file, utility.into(), &config)?;
            match out {
                Some(path) => fs::write(&path, &output.csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", output.csv),
            }
            eprint!("{}", output.summary);
        }
        Command::GenExp { m, out, manifest } => {
            let manifest = manifest.unwrap_or_else(|| {
                let mut name = out.clone().into_os_string();
                name.push(".budgets.csv");
                name.into()
            });
            print!("{}", cmd_gen_exp(m, &out, &manifest)?);
        }
        Command::Compare {
            dir,
            utility,
            cap,
            synthetic,
            seed,
            out,
            summary,
            timing,
        } => {
            let source = match (&dir, synthetic) {
                (Some(dir), _) => CompareSource::Directory(dir),
                (None, Some(count)) => CompareSource::Synthetic { count, seed },
                (None, None) => anyhow::bail!("give a directory or --synthetic <count>"),
            };
            let output = cmd_compare(source, utility.into(), cap, timing)?;
            match out {
                Some(path) => {
                    fs::write(&path, &output.rows_csv).with_context(|| format!("writing {}", path.display()))?
                }
                None => print!("{}", output.rows_csv),
            }
            if let Some(path) = summary {
                fs::write(&path, &output.aggregate_csv).with_context(|| format!("writing {}", path.display()))?;
            }
            eprint!("{}", output.report);
        }
        Command::Check { file, utility } => {
            let report = cmd_check(&file, utility.into())?;
            for line in &report.lines {
                println!("{line}");
            }
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
