//! `frontlab` command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "frontlab", version, about = "Nonlocal Fisher-KPP front laboratory")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Base seed for Monte Carlo commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; a `<out>.manifest.json` is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides FRONTLAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

/// Kernel, reaction and rate, from a spec file or separate files.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Problem spec (JSON); replaces --kernel, --reaction and --mu.
    #[arg(long, conflicts_with_all = ["kernel", "reaction", "mu"])]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long)]
    pub reaction: Option<PathBuf>,
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BrwArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Branching rate.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Offspring law as `k:p` pairs, e.g. `2:0.5,3:0.5`.
    #[arg(long, default_value = "2:1")]
    pub kappa: String,
    /// Time horizon.
    #[arg(long = "t")]
    pub t: f64,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub trials: u64,
    /// Abort trials whose population exceeds this.
    #[arg(long)]
    pub cap: Option<u64>,
    /// `lo,hi` range of x values reported.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-8.0, 8.0])]
    pub x_range: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classification, λ*, c* and tilt constants.
    Dispersion(ProblemArgs),
    /// Regular, critical or trapping.
    Classify(ProblemArgs),
    /// Run the PDE from step data and write the level-set trace.
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        dx: Option<f64>,
        /// Time step or `auto`.
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        #[arg(long)]
        window_width: Option<f64>,
        /// Fraction of the window left of the initial step.
        #[arg(long)]
        anchor: Option<f64>,
        /// Keep the window fixed.
        #[arg(long)]
        no_recenter: bool,
    },
    /// Fit `σ_θ − c*t` against `{1, log t}` on a trace file.
    Fit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// `t_min,t_max`.
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<f64>,
        /// Overrides the `c_star` recorded in the trace.
        #[arg(long)]
        c_star: Option<f64>,
    },
    /// Simulate a branching random walk and tabulate `P[max > x]`.
    Brw {
        #[command(flatten)]
        brw: BrwArgs,
        #[arg(long, default_value_t = 0.1)]
        x_step: f64,
    },
    /// Compare BRW maxima with the dual PDE solution.
    Duality {
        #[command(flatten)]
        brw: BrwArgs,
        #[arg(long, default_value_t = 0.02)]
        dx: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Largest admissible |z|.
        #[arg(long, default_value_t = 3.0)]
        z_limit: f64,
    },
    /// Ballot-type probabilities of the log-drifting walk.
    Ballot {
        /// Base kernel; the walk comes from its tilt at λ*.
        #[arg(long, conflicts_with = "kernel_tilted")]
        kernel: Option<PathBuf>,
        /// Reaction for --kernel (default `u − u²`).
        #[arg(long, requires = "kernel")]
        reaction: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Tilted kernel `K`; the walk jumps by its reflection.
        #[arg(long, requires_all = ["nu", "c"])]
        kernel_tilted: Option<PathBuf>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        /// Drift coefficient: a number, `bramson` or `holder`.
        #[arg(long = "D", allow_hyphen_values = true, default_value = "bramson")]
        d: String,
        #[arg(long = "t", value_delimiter = ',', default_values_t = [16.0, 64.0, 256.0])]
        t: Vec<f64>,
        #[arg(long = "x", value_delimiter = ',', default_values_t = [2.0, 4.0, 8.0])]
        x: Vec<f64>,
        #[arg(long = "L", default_value_t = 2.0)]
        l: f64,
        #[arg(long, value_parser = parse_count, default_value = "100000")]
        trials: u64,
        /// Largest admissible band ratio max/min.
        #[arg(long, default_value_t = 20.0)]
        max_band: f64,
    },
    /// The critical problem `(δ₋₁, μ = 1, u − u^p)` against its explicit bounds.
    Critical {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1e4)]
        horizon: f64,
        #[arg(long, value_enum, default_value_t = CriticalCheck::Sandwich)]
        check: CriticalCheck,
        #[arg(long, default_value_t = 0.05)]
        dx: f64,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Tabulate a stationary trapping front.
    TrappingFront {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 0.001)]
        dx: f64,
        /// Also run the PDE to this time and check boundedness and comparison.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Validate a kernel, a reaction or a whole spec.
    Validate {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long)]
        reaction: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CriticalCheck {
    Riccati,
    Sandwich,
    All,
}

fn parse_count(s: &str) -> Result<u64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s}: {e}"))?;
    if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("{s} is not a positive integer"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(commands::Status::Passed) => ExitCode::SUCCESS,
        Ok(commands::Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
