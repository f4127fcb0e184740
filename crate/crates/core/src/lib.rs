//! Symbolic-numeric analysis of optimal control problems as presymplectic
//! Hamiltonian systems: Pontryagin construction, the constraint algorithm,
//! symmetries with their Noether momenta, momentum-map level sets and
//! integration of the extremal flow.

pub mod dynamics;
pub mod expr;
pub mod feasible;
pub mod fixtures;
pub mod ladder;
pub mod linalg;
pub mod momentum;
pub mod poisson;
pub mod problem;
pub mod problem_file;
pub mod symmetry;

use serde::Serialize;

pub use dynamics::{
    conservation_report, integrate, ConservationReport, Gauge, HamiltonianField, IntegrateError,
    IntegratorConfig, Termination, Trajectory,
};
pub use expr::{diff, parse, simplify, Domain, EvalError, Expr, Interval};
pub use ladder::{run_ladder, solve_feedback, ConstraintLadder, LadderError, MultiplierStatus};
pub use momentum::{build_momentum_map, rank_analysis, sample_level_set, LevelSetReport, MomentumMap};
pub use poisson::{poisson_bracket, PoissonContext};
pub use problem::{
    build_pontryagin, classify_regularity, ControlProblem, PhasePoint, PontryaginSystem, Regularity,
};
pub use problem_file::{parse_problem, ProblemFileError};
pub use symmetry::{check_symmetry, lift, noether_momentum, LiftedGenerator, MomentumFunction, SymmetryGenerator};

/// Sampling sizes and tolerances shared by the analyses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    /// Master seed; every sampling purpose derives its own stream from it.
    pub seed: u64,
    /// Feasible points per ladder step.
    pub samples: usize,
    /// Sample points for regularity classification.
    pub trials: usize,
    /// Sample points for symmetry verdicts.
    pub symmetry_trials: usize,
    pub attempts_per_point: usize,
    /// Relative singular-value cutoff for numerical rank.
    pub rank_tol: f64,
    /// Vanishing tolerance for ladder candidates.
    pub vanish_tol: f64,
    /// Vanishing tolerance for symmetry residuals.
    pub symmetry_tol: f64,
    /// Residual target for Newton projection.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Slack when testing that a projected point lies in the domain box.
    pub domain_slack: f64,
    pub max_levels: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            seed: 0,
            samples: 24,
            trials: 32,
            symmetry_trials: 100,
            attempts_per_point: 200,
            rank_tol: linalg::REL_RANK_TOL,
            vanish_tol: 1e-9,
            symmetry_tol: 1e-10,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            domain_slack: 1e-9,
            max_levels: 8,
        }
    }
}
