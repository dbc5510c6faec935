//! `semisic` command-line front end. Every command prints a JSON run report on
//! stdout and progress on stderr.

mod commands;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unparsable or out-of-range inputs, unreadable files.
    Usage(String),
    Io(String),
    /// A computation failed or a verification check did not pass.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<semisic::Error> for CliError {
    fn from(e: semisic::Error) -> Self {
        use semisic::Error as E;
        match e {
            E::CompilationFailed(_) | E::TemplateInsufficient(_) | E::FitFailed(_) | E::NegativeProbability(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "semisic", version, about = "Semi-SIC qubit POVMs: construction, walk compilation, optics and self-testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a semi-SIC POVM and optionally verify it.
    Povm(PovmArgs),
    /// Compile a four-outcome rank-one POVM to a five-step coin schedule.
    Compile(CompileArgs),
    /// Run the walk on a polarisation state and report port probabilities.
    Simulate(SimulateArgs),
    /// Optimise and estimate the self-testing witness.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct PovmArgs {
    /// Pairwise overlap, as a fraction ("1/13") or a float.
    #[arg(long = "B", value_name = "B")]
    pub b: String,
    /// Also write the POVM as JSON to FILE (reusable with `compile --povm`).
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
    /// Write elements as CSV (element, weight, bloch_x, bloch_y, bloch_z) to FILE.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Run the verification checks; exit 3 if any fails.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["b", "povm"]))]
pub struct CompileArgs {
    #[arg(long = "B", value_name = "B")]
    pub b: Option<String>,
    /// POVM JSON file with an `elements` list of `matrix` entries.
    #[arg(long, value_name = "FILE")]
    pub povm: Option<PathBuf>,
    /// Decompose coins into waveplates; with FILE, also write the angle CSV.
    #[arg(long, value_name = "FILE", num_args = 0..=1)]
    pub angles: Option<Option<PathBuf>>,
    /// Write the schedule JSON to FILE.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoinSource {
    /// Coins compiled from the exact POVM.
    Compiled,
    /// Coins realised by the tabulated two-decimal plate angles.
    Table,
}

#[derive(Args, Debug, Serialize)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["b", "schedule"]))]
pub struct SimulateArgs {
    #[arg(long = "B", value_name = "B")]
    pub b: Option<String>,
    /// Coin schedule JSON file.
    #[arg(long, value_name = "FILE")]
    pub schedule: Option<PathBuf>,
    /// Input polarisation as Bloch angles `theta,phi` in radians.
    #[arg(long, value_name = "THETA,PHI", default_value = "0,0", allow_hyphen_values = true)]
    pub state: String,
    /// Shots to sample; 0 reports exact probabilities only.
    #[arg(long, default_value_t = 0)]
    pub shots: u64,
    /// Noise model JSON file.
    #[arg(long, value_name = "FILE")]
    pub noise: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where the coins for `--B` come from.
    #[arg(long, value_enum, default_value_t = CoinSource::Compiled)]
    pub coins: CoinSource,
    /// Write (B, outcome, theory, sampled, stderr) rows to FILE.
    #[arg(long = "fig3-csv", value_name = "FILE")]
    pub fig3_csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SelftestArgs {
    #[arg(long = "B", value_name = "B")]
    pub b: String,
    /// Shots per setting; 0 evaluates the exact witness.
    #[arg(long, default_value_t = 0)]
    pub shots: u64,
    /// Noise model JSON file, applied to the four-outcome measurement.
    #[arg(long, value_name = "FILE")]
    pub noise: Option<PathBuf>,
    /// Witness JSON file; defaults to the shipped witness for B.
    #[arg(long, value_name = "FILE", conflicts_with = "fit")]
    pub witness: Option<PathBuf>,
    /// Fit a fresh witness (seeded by --seed) instead of loading one.
    #[arg(long)]
    pub fit: bool,
    /// Write the witness used to FILE.
    #[arg(long = "save-witness", value_name = "FILE")]
    pub save_witness: Option<PathBuf>,
    /// Write (B, W, stderr, Q) to FILE.
    #[arg(long = "fig4-csv", value_name = "FILE")]
    pub fig4_csv: Option<PathBuf>,
    /// Write the per-setting count table (x, y, b, count) to FILE.
    #[arg(long = "counts-csv", value_name = "FILE")]
    pub counts_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for see-saw restarts; does not change results.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: commands::Outcome = match &cli.command {
        Command::Povm(a) => commands::povm(a),
        Command::Compile(a) => commands::compile(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Selftest(a) => commands::selftest(a),
    };
    match result {
        Ok(report) => {
            println!("{}", report.to_json());
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Some(r) = f.report {
                println!("{}", r.to_json());
            }
            eprintln!("semisic: {}", f.error);
            ExitCode::from(f.error.exit_code())
        }
    }
}
