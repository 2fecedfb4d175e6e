//! `mcpc`: run the multicarrier power-control game and its Monte Carlo experiments.

mod commands;
mod config;
mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mcpc::ReceiverKind;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed config. Exit code 1.
    Usage(String),
    /// The model has no feasible operating point. Exit code 2.
    Infeasible(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Infeasible(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Infeasible(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<mcpc::Error> for CliError {
    fn from(e: mcpc::Error) -> Self {
        use mcpc::Error::*;
        match e {
            InvalidConfig(_) | Index(_) | EnumerationCap { .. } => CliError::Usage(e.to_string()),
            NoPositiveRoot { .. }
            | DecorrelatorInfeasible { .. }
            | InfeasibleOccupancy { .. }
            | BalancingInfeasible
            | PowerLimit { .. } => CliError::Infeasible(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mcpc",
    version,
    about = "Energy-efficient power and carrier control for multicarrier CDMA"
)]
struct Cli {
    /// Worker threads for Monte Carlo commands; 0 uses every core.
    #[arg(long, global = true, env = "MCPC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn parse_receiver(s: &str) -> Result<ReceiverKind, String> {
    s.parse()
        .map_err(|_| format!("unknown receiver `{s}` (expected mf, de or mmse)"))
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON file of system parameters, keyed by field name.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for channel draws.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Linear receiver: mf, de or mmse.
    #[arg(long, value_parser = parse_receiver)]
    pub receiver: Option<ReceiverKind>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Packet length in bits, also the efficiency exponent. Information bits are clamped to it.
    #[arg(long = "M")]
    pub m: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct Trials {
    /// Channel realizations per sweep point.
    #[arg(long, default_value_t = mcpc::montecarlo::DEFAULT_TRIALS)]
    pub trials: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the SINR target gamma* and its value in dB.
    GammaStar {
        #[command(flatten)]
        common: Common,
    },
    /// Enumerate the equilibria of one random channel.
    Equilibria {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "D")]
        d: Option<usize>,
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Run the best-response algorithm on one random channel.
    Bmp {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "D")]
        d: Option<usize>,
        #[arg(long = "N")]
        n: Option<usize>,
    },
    /// Classify a grid of gain ratios into two-user equilibrium regions.
    Regions {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        ratio_min: f64,
        #[arg(long, default_value_t = 10.0)]
        ratio_max: f64,
        /// Grid points per axis, log-spaced.
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Closed-form two-user two-carrier occupancy probabilities.
    AnalyticPmf {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N", value_delimiter = ',', default_value = "4,8,16,32,64,128")]
        n: Vec<usize>,
    },
    /// Two users, two carriers: occupancy and no-equilibrium frequencies against N.
    McProbVsN {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
        #[arg(long = "N", value_delimiter = ',', default_value = "4,8,16,32,64")]
        n: Vec<usize>,
    },
    /// Pseudo-PMF of the number of users on carrier 1.
    McPmf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "D")]
        d: Option<usize>,
        #[arg(long = "N", value_delimiter = ',', default_value = "16,32,64,128")]
        n: Vec<usize>,
    },
    /// Standard deviation of the number of users on carrier 1 against N.
    McStddev {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "D")]
        d: Option<usize>,
        #[arg(long = "N", value_delimiter = ',', default_value = "16,32,64,128,256")]
        n: Vec<usize>,
    },
    /// Mean total utility against the number of carriers.
    McUtilityVsD {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "D", value_delimiter = ',', default_value = "1,2,4,8")]
        d: Vec<usize>,
        /// Processing gain at D = 1 (fixed bandwidth), or per carrier with --load.
        #[arg(long = "N")]
        n: Option<usize>,
        /// Users per carrier: grow K with D at fixed per-carrier N.
        #[arg(long)]
        load: Option<usize>,
    },
    /// Joint game against independent per-carrier maximisation, against K.
    McCompare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
        #[arg(long = "K", value_delimiter = ',', default_value = "2,4,6,8,10")]
        k: Vec<usize>,
        #[arg(long = "D")]
        d: Option<usize>,
        #[arg(long = "N")]
        n: Option<usize>,
    },
}

fn write_output(common: &Common, bytes: &[u8]) -> Result<(), CliError> {
    match &common.out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli.threads.filter(|&t| t > 0);
    match commands::run(cli.command, threads) {
        Ok((common, manifest, table)) => {
            let bytes = match common.format {
                Format::Csv => report::render_csv(&manifest, &table),
                Format::Json => Ok(report::render_json(&manifest, &table)),
            };
            match bytes.and_then(|b| write_output(&common, &b)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("mcpc: error: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
        Err(e) => {
            eprintln!("mcpc: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
