//! The `bellcert` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use bellcert::{BiasBound, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
pub mod output;

pub use output::Format;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "bellcert", version, about = "Rigorous P-value bounds for Bell tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// P-value bounds for recorded trials.
    Analyze(AnalyzeArgs),
    /// Design-time quantities: winning probability, inequality selection,
    /// classical bounds.
    #[command(subcommand)]
    Design(DesignCommand),
    /// Combine independent P-values with Fisher's method.
    Combine(CombineArgs),
    /// Simulate local hidden variable models.
    Simulate(SimulateArgs),
    /// Evaluate bounds over a grid, or find the trials needed for a target.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BiasArgs {
    /// Bias bound of the first site's input generator.
    #[arg(long, default_value_t = 0.0)]
    pub tau_a: f64,
    /// Bias bound of the other sites' input generators.
    #[arg(long, default_value_t = 0.0)]
    pub tau_b: f64,
}

impl BiasArgs {
    pub fn bound(&self) -> bellcert::Result<BiasBound> {
        BiasBound::new(self.tau_a, self.tau_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Binomial,
    Bentkus,
    Mcdiarmid,
    Azuma,
    Gaussian,
    All,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum AzumaArg {
    #[default]
    Symmetric,
    Printed,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Game JSON file, or a built-in game: chsh, chsh-two-states, mermin,
    /// cglmp<d>.
    #[arg(long)]
    pub game: String,
    /// Trial CSV file.
    #[arg(long, conflicts_with_all = ["n", "wins", "total"])]
    pub trials: Option<PathBuf>,
    /// Number of trials, when analyzing counts instead of a file.
    #[arg(long, requires = "stat")]
    pub n: Option<u64>,
    /// Number of wins out of `--n` (win/lose games).
    #[arg(long, group = "stat")]
    pub wins: Option<u64>,
    /// Total score over `--n` trials (general games).
    #[arg(long, group = "stat")]
    pub total: Option<f64>,
    #[command(flatten)]
    pub bias: BiasArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "auto")]
    pub method: Vec<MethodArg>,
    /// Use this winning probability instead of computing it.
    #[arg(long)]
    pub beta_win: Option<f64>,
    /// Local maximum of the average score (general games).
    #[arg(long)]
    pub beta_max: Option<f64>,
    /// Local minimum of the average score (general games).
    #[arg(long, requires = "beta_max")]
    pub beta_min: Option<f64>,
    #[arg(long, value_enum, default_value = "symmetric")]
    pub azuma: AzumaArg,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum DesignCommand {
    /// Largest local winning probability of a win/lose game.
    Beta {
        #[arg(long)]
        game: String,
        #[command(flatten)]
        bias: BiasArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// The Bell inequality most violated by a behavior.
    Select {
        /// Behavior JSON file.
        #[arg(long)]
        behavior: PathBuf,
        /// Restrict coefficients to 0 or 1 (a win/lose game).
        #[arg(long)]
        winlose: bool,
        /// Also write the inequality as a game file.
        #[arg(long)]
        game_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Local maximum and minimum of a game's average score.
    ClassicalBound {
        #[arg(long)]
        game: String,
        #[command(flatten)]
        bias: BiasArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Whether a behavior is a mixture of deterministic local strategies.
    Locality {
        #[arg(long)]
        behavior: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    /// P-values to combine.
    pub pvalues: Vec<f64>,
    /// File of P-values separated by commas or whitespace.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum InputsArg {
    #[default]
    WorstCase,
    Nominal,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub game: String,
    /// optimal, switcher, heralding, mixture or gambler.
    #[arg(long, default_value = "optimal")]
    pub strategy: String,
    /// Heralded trials per run.
    #[arg(long)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimate tail probabilities from this many runs instead of writing
    /// one run.
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Win counts for tail estimates; defaults to the expected count.
    #[arg(long, value_delimiter = ',')]
    pub wins: Vec<u64>,
    #[command(flatten)]
    pub bias: BiasArgs,
    #[arg(long, value_enum, default_value = "worst-case")]
    pub inputs: InputsArg,
    /// Write trials here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub game: String,
    /// `n=<counts>;s=<values>` or `n=<counts>;mean=<values>`, with lists
    /// `a,b,c` or ranges `start:stop:step`.
    #[arg(long)]
    pub grid: String,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub method: Vec<MethodArg>,
    /// Report the smallest n whose bound reaches this P-value.
    #[arg(long)]
    pub target: Option<f64>,
    #[command(flatten)]
    pub bias: BiasArgs,
    #[arg(long, value_enum, default_value = "symmetric")]
    pub azuma: AzumaArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// What a command prints and how it exits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, stderr: String::new(), code: EXIT_OK }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::Domain(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => EXIT_INPUT,
        Error::Precondition(_) => EXIT_PRECONDITION,
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::Lp(_) => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome::ok(text)
            } else {
                Outcome { stdout: String::new(), stderr: text, code }
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(outcome) => outcome,
        Err(e) => Outcome { stdout: String::new(), stderr: format!("error: {e}\n"), code: exit_code(&e) },
    }
}
