//! The constraint algorithm: `M ⊃ M₁ ⊃ M₂ ⊃ … ⊃ M_f`.
//!
//! A solution on the current level has the form `Γ = X_H + λᵇ ∂/∂uᵇ`, so a
//! constraint `c` stays satisfied along it iff `{c, H} + λᵇ ∂c/∂uᵇ = 0`.
//! Stacking every constraint found so far gives `A λ = −v` with
//! `A_ab = ∂c_a/∂uᵇ` and `v_a = {c_a, H}`. Combinations `yᵀv` with `yᵀA = 0`
//! cannot be absorbed by any choice of `λ`; those that do not already vanish
//! on the sampled feasible set become the next level.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::expr::{diff, simplify, vanishes_on, CompiledVec, Domain, EvalError, Expr};
use crate::feasible::{sample_feasible, ConstraintSet, SamplingFailure};
use crate::linalg;
use crate::poisson::{poisson_bracket, PoissonContext};
use crate::problem::PontryaginSystem;
use crate::AnalysisConfig;

#[derive(Debug, Clone, Serialize)]
pub struct LadderLevel {
    /// One-based; level 1 holds the primary constraints `χ`.
    pub index: usize,
    pub constraints: Vec<Expr>,
    /// `{c, H}` for each constraint, in the same order.
    pub brackets: Vec<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MultiplierStatus {
    /// No controls, so no multipliers.
    NotNeeded,
    /// `A` has full column rank: `λ` is unique.
    Determined,
    /// `gauge_dim` directions of `λ` are left free by the tangency conditions.
    Undetermined { gauge_dim: usize },
}

/// Outcome of one tangency step, kept for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    /// Number of levels the step started from.
    pub from_level: usize,
    pub samples: usize,
    /// Rank of `A` at each sample (constant when the step succeeded).
    pub rank: usize,
    pub cokernel_dim: usize,
    pub candidates: usize,
    pub admitted: usize,
    pub multipliers: MultiplierStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintLadder {
    pub levels: Vec<LadderLevel>,
    pub steps: Vec<StepReport>,
    pub stabilized: bool,
    /// One-based index of the last level.
    pub final_level_index: usize,
    pub multipliers: MultiplierStatus,
    /// Feasible points sampled on the final level by the last step.
    #[serde(skip)]
    pub final_points: Vec<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum LadderError {
    #[error(
        "constant-rank assumption violated at level {level}: rank of the tangency matrix varies \
         over samples {ranks:?}"
    )]
    ConstantRank { level: usize, ranks: Vec<usize> },
    #[error(
        "constant-rank assumption violated at level {level}: cokernel of the tangency matrix at \
         sample 0 fails at sample {sample} (deviation {deviation:.3e})"
    )]
    CokernelVaries {
        level: usize,
        sample: usize,
        deviation: f64,
    },
    #[error("sampling level {level} failed: {source}")]
    Sampling {
        level: usize,
        #[source]
        source: SamplingFailure,
    },
    #[error("max_levels must be at least 1")]
    NoLevels,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl LadderError {
    pub fn is_rank_violation(&self) -> bool {
        matches!(self, LadderError::ConstantRank { .. } | LadderError::CokernelVaries { .. })
    }
}

impl ConstraintLadder {
    /// Level 1 only: the primary constraints that are not identically zero.
    pub fn primary(sys: &PontryaginSystem) -> ConstraintLadder {
        let ctx = PoissonContext::of(sys);
        let constraints: Vec<Expr> = sys.chi().iter().filter(|c| !c.is_zero()).cloned().collect();
        let brackets = constraints
            .iter()
            .map(|c| poisson_bracket(c, sys.hamiltonian(), &ctx))
            .collect();
        ConstraintLadder {
            levels: vec![LadderLevel {
                index: 1,
                constraints,
                brackets,
            }],
            steps: Vec::new(),
            stabilized: false,
            final_level_index: 1,
            multipliers: MultiplierStatus::NotNeeded,
            final_points: Vec::new(),
        }
    }

    /// All constraints of all levels, in level order.
    pub fn constraints(&self) -> Vec<Expr> {
        self.levels.iter().flat_map(|l| l.constraints.iter().cloned()).collect()
    }

    pub fn brackets(&self) -> Vec<Expr> {
        self.levels.iter().flat_map(|l| l.brackets.iter().cloned()).collect()
    }

    /// Ladder constraints followed by the holonomic ones.
    pub fn active_constraints(&self, sys: &PontryaginSystem) -> Vec<Expr> {
        let mut c = self.constraints();
        c.extend(sys.holonomic().iter().cloned());
        c
    }

    /// Keeps only levels `1..=level`, marking the result as not stabilized
    /// unless nothing was dropped.
    pub fn truncated(&self, level: usize) -> ConstraintLadder {
        let mut out = self.clone();
        if level < out.levels.len() {
            out.levels.truncate(level.max(1));
            out.final_level_index = out.levels.len();
            out.stabilized = false;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TangencyStep {
    pub new_constraints: Vec<Expr>,
    pub report: StepReport,
    pub points: Vec<Vec<f64>>,
}

/// Tangency matrix `A` and vector `v` for a stack of constraints, compiled.
#[derive(Debug, Clone)]
pub struct MultiplierSolver {
    a: CompiledVec,
    v: CompiledVec,
    rows: usize,
    cols: usize,
    rank_tol: f64,
}

impl MultiplierSolver {
    pub fn new(
        sys: &PontryaginSystem,
        constraints: &[Expr],
        brackets: &[Expr],
        rank_tol: f64,
    ) -> Result<MultiplierSolver, EvalError> {
        let a: Vec<Expr> = constraints
            .iter()
            .flat_map(|c| sys.controls().iter().map(move |u| diff(c, u)))
            .collect();
        Ok(MultiplierSolver {
            a: CompiledVec::new(&a, sys.layout())?,
            v: CompiledVec::new(brackets, sys.layout())?,
            rows: constraints.len(),
            cols: sys.n_controls(),
            rank_tol,
        })
    }

    pub fn for_ladder(sys: &PontryaginSystem, ladder: &ConstraintLadder, rank_tol: f64) -> Result<MultiplierSolver, EvalError> {
        MultiplierSolver::new(sys, &ladder.constraints(), &ladder.brackets(), rank_tol)
    }

    pub fn system(&self, x: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>), EvalError> {
        let a = DMatrix::from_row_slice(self.rows, self.cols, &self.a.eval(x)?);
        let v = DVector::from_vec(self.v.eval(x)?);
        Ok((a, v))
    }

    /// Minimum-norm `λ` with `A λ = −v`; the free directions are set to zero.
    pub fn solve(&self, x: &[f64]) -> Result<DVector<f64>, EvalError> {
        let (a, v) = self.system(x)?;
        Ok(linalg::min_norm_solve(&a, &(-v), self.rank_tol))
    }
}

const LADDER_STREAM: u64 = 0x6c61_0000;

/// Deviation allowed when checking the reference cokernel at other samples.
const COKERNEL_TOL: f64 = 1e-7;

pub fn tangency_step(
    sys: &PontryaginSystem,
    ladder: &ConstraintLadder,
    domain: &Domain,
    cfg: &AnalysisConfig,
) -> Result<TangencyStep, LadderError> {
    let level = ladder.levels.len();
    assert!(level >= 1, "ladder has no levels");
    let layout = sys.layout();
    let constraints = ladder.constraints();
    let brackets = ladder.brackets();
    let set = ConstraintSet::new(&ladder.active_constraints(sys), layout)?;
    let points = sample_feasible(&set, layout, domain, cfg.samples, cfg, LADDER_STREAM + level as u64)
        .map_err(|source| match source {
            SamplingFailure::Eval(e) => LadderError::Eval(e),
            source => LadderError::Sampling { level, source },
        })?;

    let solver = MultiplierSolver::new(sys, &constraints, &brackets, cfg.rank_tol)?;
    let systems = points
        .iter()
        .map(|x| solver.system(x))
        .collect::<Result<Vec<_>, _>>()?;
    let ranks: Vec<usize> = systems.iter().map(|(a, _)| linalg::rank(a, cfg.rank_tol)).collect();
    if ranks.iter().any(|r| *r != ranks[0]) {
        return Err(LadderError::ConstantRank { level, ranks });
    }
    let rank = ranks[0];
    let n = constraints.len();
    let k = sys.n_controls();
    let multipliers = if k == 0 {
        MultiplierStatus::NotNeeded
    } else if rank == k {
        MultiplierStatus::Determined
    } else {
        MultiplierStatus::Undetermined { gauge_dim: k - rank }
    };

    let cokernel_dim = n - rank;
    let basis = if cokernel_dim == 0 {
        DMatrix::zeros(0, n)
    } else if rank == 0 {
        DMatrix::identity(n, n)
    } else {
        let y = linalg::left_null_space(&systems[0].0, cfg.rank_tol);
        linalg::rref(&y.transpose(), cfg.rank_tol)
    };
    for (s, (a, _)) in systems.iter().enumerate().skip(1) {
        if basis.nrows() == 0 {
            break;
        }
        let deviation = (&basis * a).amax();
        if deviation > COKERNEL_TOL * (1.0 + a.amax()) {
            return Err(LadderError::CokernelVaries {
                level,
                sample: s,
                deviation,
            });
        }
    }

    let mut candidates = Vec::new();
    for row in basis.row_iter() {
        let terms = row
            .iter()
            .zip(&brackets)
            .filter(|(c, b)| **c != 0.0 && !b.is_zero())
            .map(|(c, b)| if *c == 1.0 { b.clone() } else { *c * b.clone() });
        let cand = simplify(&Expr::sum(terms));
        if !cand.is_zero() && !candidates.contains(&cand) {
            candidates.push(cand);
        }
    }
    let mut admitted = Vec::new();
    for c in &candidates {
        if !vanishes_on(c, layout, &points, cfg.vanish_tol)? {
            admitted.push(c.clone());
        }
    }
    Ok(TangencyStep {
        report: StepReport {
            from_level: level,
            samples: points.len(),
            rank,
            cokernel_dim,
            candidates: candidates.len(),
            admitted: admitted.len(),
            multipliers,
        },
        new_constraints: admitted,
        points,
    })
}

/// Runs the recursion from the primary constraints.
pub fn run_ladder(sys: &PontryaginSystem, domain: &Domain, cfg: &AnalysisConfig) -> Result<ConstraintLadder, LadderError> {
    continue_ladder(sys, ConstraintLadder::primary(sys), domain, cfg)
}

/// Runs tangency steps on an existing ladder until nothing new is admitted
/// or `cfg.max_levels` levels exist.
pub fn continue_ladder(
    sys: &PontryaginSystem,
    mut ladder: ConstraintLadder,
    domain: &Domain,
    cfg: &AnalysisConfig,
) -> Result<ConstraintLadder, LadderError> {
    if cfg.max_levels == 0 {
        return Err(LadderError::NoLevels);
    }
    let ctx = PoissonContext::of(sys);
    loop {
        let step = tangency_step(sys, &ladder, domain, cfg)?;
        ladder.multipliers = step.report.multipliers;
        ladder.steps.push(step.report);
        ladder.final_points = step.points;
        if step.new_constraints.is_empty() {
            ladder.stabilized = true;
            break;
        }
        if ladder.levels.len() >= cfg.max_levels {
            ladder.stabilized = false;
            break;
        }
        let brackets = step
            .new_constraints
            .iter()
            .map(|c| poisson_bracket(c, sys.hamiltonian(), &ctx))
            .collect();
        ladder.levels.push(LadderLevel {
            index: ladder.levels.len() + 1,
            constraints: step.new_constraints,
            brackets,
        });
    }
    ladder.final_level_index = ladder.levels.len();
    Ok(ladder)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeedbackError {
    #[error("W is numerically singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("feedback Newton iteration did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub const FEEDBACK_MAX_ITER: usize = 50;

/// Compiled `χ` and `W` for solving `χ(q, p, u) = 0` for `u`.
#[derive(Debug, Clone)]
pub struct FeedbackSolver {
    chi: CompiledVec,
    w: CompiledVec,
    m: usize,
    k: usize,
    rank_tol: f64,
}

impl FeedbackSolver {
    pub fn new(sys: &PontryaginSystem, rank_tol: f64) -> Result<FeedbackSolver, EvalError> {
        let w: Vec<Expr> = sys.w().iter().flatten().cloned().collect();
        Ok(FeedbackSolver {
            chi: CompiledVec::new(sys.chi(), sys.layout())?,
            w: CompiledVec::new(&w, sys.layout())?,
            m: sys.n_states(),
            k: sys.n_controls(),
            rank_tol,
        })
    }

    /// Newton iteration from `u0` until `‖χ‖∞ ≤ tol`.
    pub fn solve(&self, q: &[f64], p: &[f64], u0: &[f64], tol: f64) -> Result<Vec<f64>, FeedbackError> {
        assert!(tol > 0.0, "feedback tolerance must be positive");
        assert_eq!(q.len(), self.m);
        assert_eq!(p.len(), self.m);
        assert_eq!(u0.len(), self.k);
        let mut x: Vec<f64> = q.iter().chain(p).chain(u0).copied().collect();
        let mut residual = f64::INFINITY;
        for iteration in 0..=FEEDBACK_MAX_ITER {
            let r = DVector::from_vec(self.chi.eval(&x)?);
            residual = r.amax();
            if residual <= tol {
                return Ok(x[2 * self.m..].to_vec());
            }
            if !residual.is_finite() || iteration == FEEDBACK_MAX_ITER {
                break;
            }
            let w = DMatrix::from_row_slice(self.k, self.k, &self.w.eval(&x)?);
            if linalg::rank(&w, self.rank_tol) < self.k {
                return Err(FeedbackError::SingularJacobian { iteration });
            }
            let du = w.lu().solve(&(-r)).ok_or(FeedbackError::SingularJacobian { iteration })?;
            for (xi, d) in x[2 * self.m..].iter_mut().zip(du.iter()) {
                *xi += d;
            }
        }
        Err(FeedbackError::NoConvergence { residual })
    }
}

/// One-shot form of [`FeedbackSolver::solve`].
pub fn solve_feedback(
    sys: &PontryaginSystem,
    q: &[f64],
    p: &[f64],
    u0: &[f64],
    tol: f64,
) -> Result<Vec<f64>, FeedbackError> {
    FeedbackSolver::new(sys, linalg::REL_RANK_TOL)?.solve(q, p, u0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_pontryagin, ControlProblem};

    fn sys(f: &[&str], l: &str) -> PontryaginSystem {
        let states: Vec<String> = (1..=f.len()).map(|i| format!("q{i}")).collect();
        let states: Vec<&str> = states.iter().map(String::as_str).collect();
        build_pontryagin(&ControlProblem::from_sources(&states, &["u1"], f, l)).unwrap()
    }

    #[test]
    fn regular_problem_stabilizes_at_level_one() {
        let s = sys(&["u1"], "0.5*u1^2");
        let ladder = run_ladder(&s, &Domain::new(), &AnalysisConfig::default()).unwrap();
        assert!(ladder.stabilized);
        assert_eq!(ladder.final_level_index, 1);
        assert_eq!(ladder.levels[0].constraints[0].to_string(), "p1 - u1");
        assert_eq!(ladder.multipliers, MultiplierStatus::Determined);
    }

    #[test]
    fn u_independent_problem_has_empty_first_level() {
        let s = sys(&["q1"], "q1^2");
        let ladder = run_ladder(&s, &Domain::new(), &AnalysisConfig::default()).unwrap();
        assert!(ladder.levels[0].constraints.is_empty());
        assert!(ladder.stabilized);
        assert_eq!(ladder.multipliers, MultiplierStatus::Undetermined { gauge_dim: 1 });
    }

    #[test]
    fn linear_quadratic_singular_arc() {
        // H = p1*u1 - q1^2/2, chi = p1, {p1, H} = q1, {q1, H} = u1.
        let s = sys(&["u1"], "0.5*q1^2");
        let ladder = run_ladder(&s, &Domain::new(), &AnalysisConfig::default()).unwrap();
        let levels: Vec<Vec<String>> = ladder
            .levels
            .iter()
            .map(|l| l.constraints.iter().map(|c| c.to_string()).collect())
            .collect();
        assert_eq!(levels, vec![vec!["p1"], vec!["q1"], vec!["u1"]]);
        assert!(ladder.stabilized);
        assert_eq!(ladder.multipliers, MultiplierStatus::Determined);
    }

    #[test]
    fn limit_on_levels_is_reported() {
        let s = sys(&["u1"], "0.5*q1^2");
        let cfg = AnalysisConfig {
            max_levels: 2,
            ..AnalysisConfig::default()
        };
        let ladder = run_ladder(&s, &Domain::new(), &cfg).unwrap();
        assert!(!ladder.stabilized);
        assert_eq!(ladder.final_level_index, 2);
    }

    #[test]
    fn feedback_for_lq() {
        let s = sys(&["u1"], "0.5*u1^2");
        let u = solve_feedback(&s, &[0.3], &[0.7], &[0.0], 1e-12).unwrap();
        assert!((u[0] - 0.7).abs() < 1e-12);
        let same = solve_feedback(&s, &[0.3], &[0.7], &[0.7], 1e-12).unwrap();
        assert_eq!(same, vec![0.7]);
    }

    #[test]
    fn feedback_on_singular_problem_fails() {
        let s = sys(&["u1"], "0.5*q1^2");
        let err = solve_feedback(&s, &[0.3], &[0.7], &[0.0], 1e-12).unwrap_err();
        assert_eq!(err, FeedbackError::SingularJacobian { iteration: 0 });
    }
}
