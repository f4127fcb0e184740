//! `presym-oc`: analyze, check symmetries, reduce and integrate control
//! problems described in `.ocp` files.
//!
//! Exit codes: 0 success, 1 input error, 2 constant-rank violation,
//! 3 infeasible sampling.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use presym_core::AnalysisConfig;

#[derive(Parser, Debug)]
#[command(name = "presym-oc", version, about = "Presymplectic analysis of optimal control problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Regularity classification and the constraint ladder (JSON).
    Analyze(Common),
    /// Verify each declared symmetry and print its momentum (JSON).
    Symmetries(Common),
    /// Level set of the momentum map and its dimensions (JSON).
    Reduce(ReduceArgs),
    /// Integrate the extremal flow (CSV).
    Integrate(IntegrateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Problem file.
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sampling box override, `NAME=LO,HI` (`*` for the default box). Repeatable.
    #[arg(long = "domain", value_name = "NAME=LO,HI")]
    pub domain: Vec<String>,
    /// Feasible points per ladder step.
    #[arg(long, default_value_t = AnalysisConfig::default().samples)]
    pub samples: usize,
    /// Sample points for the regularity classification.
    #[arg(long, default_value_t = AnalysisConfig::default().trials)]
    pub trials: usize,
    /// Sample points for symmetry verdicts.
    #[arg(long, default_value_t = AnalysisConfig::default().symmetry_trials)]
    pub symmetry_trials: usize,
    #[arg(long, default_value_t = AnalysisConfig::default().max_levels)]
    pub max_levels: usize,
    /// Relative singular-value cutoff for numerical rank.
    #[arg(long, default_value_t = AnalysisConfig::default().rank_tol)]
    pub rank_tol: f64,
    /// Vanishing tolerance for ladder candidates.
    #[arg(long, default_value_t = AnalysisConfig::default().vanish_tol)]
    pub vanish_tol: f64,
    /// Vanishing tolerance for symmetry residuals.
    #[arg(long, default_value_t = AnalysisConfig::default().symmetry_tol)]
    pub symmetry_tol: f64,
    /// Residual target of Newton projection.
    #[arg(long, default_value_t = AnalysisConfig::default().newton_tol)]
    pub newton_tol: f64,
    #[arg(long, default_value_t = AnalysisConfig::default().attempts_per_point)]
    pub attempts: usize,
}

impl Common {
    pub fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            seed: self.seed,
            samples: self.samples,
            trials: self.trials,
            symmetry_trials: self.symmetry_trials,
            attempts_per_point: self.attempts,
            rank_tol: self.rank_tol,
            vanish_tol: self.vanish_tol,
            symmetry_tol: self.symmetry_tol,
            newton_tol: self.newton_tol,
            max_levels: self.max_levels,
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Momentum value: comma-separated numbers, or `auto` for `J(x0)` at a feasible `x0`.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub mu: String,
    /// Number of level-set points to sample.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Also impose ladder levels `1..=LEVEL` on the level set (0 = holonomic constraints only).
    #[arg(long, default_value_t = 0)]
    pub level: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GaugeArg {
    Strict,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RetractionArg {
    Auto,
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial point `q..., p..., u...` as comma-separated numbers, or `auto`.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    pub from: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// `zero` sets undetermined multiplier directions to zero.
    #[arg(long, value_enum, default_value_t = GaugeArg::Strict)]
    pub gauge: GaugeArg,
    /// Newton re-projection after each step; `auto` enables it for singular problems.
    #[arg(long, value_enum, default_value_t = RetractionArg::Auto)]
    pub retraction: RetractionArg,
    /// Also write the conservation report (JSON) here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.command) {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let Some(output) = &e.output {
                if let Err(io) = commands::emit(e.out.as_deref(), output) {
                    eprintln!("error: {io}");
                }
            }
            let _ = writeln!(std::io::stderr(), "error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
