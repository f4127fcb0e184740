//! Fixed-step RK4 integration of the extremal flow with conservation monitors.
//!
//! Regular problems are integrated in `(q, p)` with the controls recovered by
//! the feedback `u = ψ(q, p)` at every stage. Otherwise the full `(q, p, u)`
//! is integrated with `u̇ = λ` from the tangency conditions of the ladder.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DVector;
use serde::Serialize;

use crate::expr::{diff, CompiledVec, EvalError, Expr};
use crate::feasible::{project, ConstraintSet};
use crate::ladder::{ConstraintLadder, FeedbackError, FeedbackSolver, MultiplierSolver, MultiplierStatus};
use crate::momentum::MomentumMap;
use crate::problem::{PhasePoint, PontryaginSystem};
use crate::AnalysisConfig;

/// How undetermined multiplier directions are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Undetermined multipliers are an error.
    #[default]
    Strict,
    /// Free multiplier directions are set to zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    /// `None` picks on for singular problems and off for regular ones.
    pub retraction: Option<bool>,
    pub gauge: Gauge,
    /// Largest constraint residual accepted at the initial point.
    pub initial_tol: f64,
    pub feedback_tol: f64,
    /// Any coordinate above this magnitude aborts the run.
    pub divergence: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            t0: 0.0,
            t1: 1.0,
            step: 1e-3,
            retraction: None,
            gauge: Gauge::Strict,
            initial_tol: 1e-8,
            feedback_tol: 1e-12,
            divergence: 1e12,
        }
    }
}

impl IntegratorConfig {
    pub fn span(t0: f64, t1: f64, step: f64) -> IntegratorConfig {
        IntegratorConfig {
            t0,
            t1,
            step,
            ..IntegratorConfig::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IntegrateError {
    #[error("invalid integrator settings: {0}")]
    Config(String),
    #[error("constraint ladder is not stabilized")]
    NotStabilized,
    #[error(
        "multipliers leave {gauge_dim} direction(s) undetermined; pass the zero gauge to set them to 0"
    )]
    Undetermined { gauge_dim: usize },
    #[error(
        "initial point violates the active constraints (residual {residual:.3e} > {tol:.1e}); project it first"
    )]
    InfeasibleStart { residual: f64, tol: f64 },
    #[error("initial point has the wrong dimension: {0}")]
    Dimension(String),
    #[error("feedback at the initial point failed: {0}")]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    Feedback,
    Multipliers,
}

/// Evaluator of `(q, p, u) ↦ (∂H/∂p, −∂H/∂q, λ)`.
#[derive(Debug, Clone)]
pub struct HamiltonianField {
    dh_dp: CompiledVec,
    dh_dq: CompiledVec,
    multipliers: MultiplierSolver,
    feedback: Option<FeedbackSolver>,
    m: usize,
}

impl HamiltonianField {
    pub fn new(sys: &PontryaginSystem, ladder: &ConstraintLadder, gauge: Gauge) -> Result<HamiltonianField, IntegrateError> {
        if !ladder.stabilized {
            return Err(IntegrateError::NotStabilized);
        }
        if let MultiplierStatus::Undetermined { gauge_dim } = ladder.multipliers {
            if gauge == Gauge::Strict {
                return Err(IntegrateError::Undetermined { gauge_dim });
            }
        }
        let h = sys.hamiltonian();
        let dh_dp: Vec<Expr> = sys.costates().iter().map(|p| diff(h, p)).collect();
        let dh_dq: Vec<Expr> = sys.states().iter().map(|q| diff(h, q)).collect();
        let regular = ladder.levels.len() == 1
            && ladder.multipliers == MultiplierStatus::Determined
            && ladder.levels[0].constraints.len() == sys.n_controls();
        let rank_tol = crate::linalg::REL_RANK_TOL;
        Ok(HamiltonianField {
            dh_dp: CompiledVec::new(&dh_dp, sys.layout())?,
            dh_dq: CompiledVec::new(&dh_dq, sys.layout())?,
            multipliers: MultiplierSolver::for_ladder(sys, ladder, rank_tol)?,
            feedback: if regular {
                Some(FeedbackSolver::new(sys, rank_tol)?)
            } else {
                None
            },
            m: sys.n_states(),
        })
    }

    pub fn mode(&self) -> FieldMode {
        if self.feedback.is_some() {
            FieldMode::Feedback
        } else {
            FieldMode::Multipliers
        }
    }

    /// Full vector field at a phase point in `(q, p, u)` order.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = self.dh_dp.eval(x)?;
        out.extend(self.dh_dq.eval(x)?.into_iter().map(|v| -v));
        out.extend(self.multipliers.solve(x)?.iter());
        Ok(out)
    }

    fn canonical(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = self.dh_dp.eval(x)?;
        out.extend(self.dh_dq.eval(x)?.into_iter().map(|v| -v));
        Ok(out)
    }

    fn feedback(&self, qp: &[f64], u_guess: &[f64], tol: f64) -> Result<Vec<f64>, FeedbackError> {
        let solver = self.feedback.as_ref().expect("feedback mode");
        solver.solve(&qp[..self.m], &qp[self.m..2 * self.m], u_guess, tol)
    }
}

/// One classical RK4 step.
pub fn rk4_step<E, F>(
    f: &mut F,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, E>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, E>,
{
    let x0 = DVector::from_column_slice(x);
    let k1 = DVector::from_vec(f(x)?);
    let k2 = DVector::from_vec(f((&x0 + &k1 * (h / 2.0)).as_slice())?);
    let k3 = DVector::from_vec(f((&x0 + &k2 * (h / 2.0)).as_slice())?);
    let k4 = DVector::from_vec(f((&x0 + &k3 * h).as_slice())?);
    let next = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    Ok(next.as_slice().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    Hamiltonian,
    Momentum,
    Constraint,
    Holonomic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged { t: f64 },
    FeedbackFailed { t: f64, message: String },
    RetractionFailed { t: f64 },
    EvalFailed { t: f64, message: String },
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Completed => write!(f, "completed"),
            Termination::Diverged { t } => write!(f, "diverged at t = {t}"),
            Termination::FeedbackFailed { t, message } => write!(f, "feedback failed at t = {t}: {message}"),
            Termination::RetractionFailed { t } => write!(f, "retraction failed at t = {t}"),
            Termination::EvalFailed { t, message } => write!(f, "evaluation failed at t = {t}: {message}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub coordinate_names: Vec<String>,
    pub monitor_names: Vec<String>,
    pub monitor_kinds: Vec<MonitorKind>,
    /// One row per sample, aligned with `monitor_names`.
    pub monitors: Vec<Vec<f64>>,
    pub mode: FieldMode,
    pub retraction: bool,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        self.points.last().expect("trajectory has the initial sample")
    }

    pub fn monitor(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.monitor_names.iter().position(|n| n == name)?;
        Some(self.monitors.iter().map(|row| row[i]).collect())
    }

    /// CSV with a header row: `t`, coordinates, then monitors.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<&str> = std::iter::once("t")
            .chain(self.coordinate_names.iter().map(String::as_str))
            .chain(self.monitor_names.iter().map(String::as_str))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for ((t, x), mon) in self.times.iter().zip(&self.points).zip(&self.monitors) {
            let mut line = format!("{t:?}");
            for v in x.to_flat().iter().chain(mon) {
                line.push(',');
                line.push_str(&format!("{v:?}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

struct Monitors {
    names: Vec<String>,
    kinds: Vec<MonitorKind>,
    exprs: CompiledVec,
}

impl Monitors {
    fn new(sys: &PontryaginSystem, ladder: &ConstraintLadder, j: Option<&MomentumMap>) -> Result<Monitors, EvalError> {
        let mut names = vec!["H".to_string()];
        let mut kinds = vec![MonitorKind::Hamiltonian];
        let mut exprs = vec![sys.hamiltonian().clone()];
        if let Some(j) = j {
            for c in &j.components {
                names.push(format!("f_{}", c.generator));
                kinds.push(MonitorKind::Momentum);
                exprs.push(c.expr.clone());
            }
        }
        for level in &ladder.levels {
            for (i, c) in level.constraints.iter().enumerate() {
                names.push(if level.index == 1 {
                    format!("chi_{}", i + 1)
                } else {
                    format!("c{}_{}", level.index, i + 1)
                });
                kinds.push(MonitorKind::Constraint);
                exprs.push(c.clone());
            }
        }
        for (i, g) in sys.holonomic().iter().enumerate() {
            names.push(format!("g_{}", i + 1));
            kinds.push(MonitorKind::Holonomic);
            exprs.push(g.clone());
        }
        Ok(Monitors {
            names,
            kinds,
            exprs: CompiledVec::new(&exprs, sys.layout())?,
        })
    }
}

/// Integrates from `x0` over `cfg`'s time span.
pub fn integrate(
    sys: &PontryaginSystem,
    ladder: &ConstraintLadder,
    j: Option<&MomentumMap>,
    x0: &PhasePoint,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    if cfg.step.is_nan() || cfg.step <= 0.0 || !cfg.step.is_finite() {
        return Err(IntegrateError::Config(format!("step must be positive, got {}", cfg.step)));
    }
    if cfg.t0.is_nan() || cfg.t1.is_nan() || cfg.t1 <= cfg.t0 {
        return Err(IntegrateError::Config(format!("need t1 > t0, got [{}, {}]", cfg.t0, cfg.t1)));
    }
    let (m, k) = (sys.n_states(), sys.n_controls());
    if x0.q.len() != m || x0.p.len() != m || x0.u.len() != k {
        return Err(IntegrateError::Dimension(format!(
            "expected {m} states, {m} costates and {k} controls"
        )));
    }
    let field = HamiltonianField::new(sys, ladder, cfg.gauge)?;
    let active = ConstraintSet::new(&ladder.active_constraints(sys), sys.layout())?;
    let mut x = x0.to_flat();
    let residual = if active.is_empty() { 0.0 } else { active.max_residual(&x)? };
    if residual > cfg.initial_tol {
        return Err(IntegrateError::InfeasibleStart {
            residual,
            tol: cfg.initial_tol,
        });
    }
    let mode = field.mode();
    let retraction = cfg.retraction.unwrap_or(mode == FieldMode::Multipliers);
    if mode == FieldMode::Feedback {
        let u = field.feedback(&x[..2 * m], &x[2 * m..], cfg.feedback_tol)?;
        x[2 * m..].copy_from_slice(&u);
    }
    let monitors = Monitors::new(sys, ladder, j)?;
    let project_cfg = AnalysisConfig::default();

    let span = cfg.t1 - cfg.t0;
    let n_steps = ((span / cfg.step) - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        points: Vec::with_capacity(n_steps + 1),
        coordinate_names: sys.layout().names().to_vec(),
        monitor_names: monitors.names.clone(),
        monitor_kinds: monitors.kinds.clone(),
        monitors: Vec::with_capacity(n_steps + 1),
        mode,
        retraction,
        termination: Termination::Completed,
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| -> Result<(), EvalError> {
        traj.times.push(t);
        traj.points.push(sys.point(x));
        traj.monitors.push(monitors.exprs.eval(x)?);
        Ok(())
    };
    record(&mut traj, cfg.t0, &x)?;

    for i in 1..=n_steps {
        let t_prev = cfg.t0 + (i - 1) as f64 * cfg.step;
        let t = if i == n_steps { cfg.t1 } else { cfg.t0 + i as f64 * cfg.step };
        let h = t - t_prev;
        let stepped = match mode {
            FieldMode::Multipliers => rk4_step(&mut |y: &[f64]| field.eval(y).map_err(|e| e.to_string()), &x, h),
            FieldMode::Feedback => {
                let mut u_guess = x[2 * m..].to_vec();
                let mut f = |qp: &[f64]| -> Result<Vec<f64>, String> {
                    let u = field.feedback(qp, &u_guess, cfg.feedback_tol).map_err(|e| e.to_string())?;
                    let mut full = qp.to_vec();
                    full.extend_from_slice(&u);
                    u_guess = u;
                    field.canonical(&full).map_err(|e| e.to_string())
                };
                rk4_step(&mut f, &x[..2 * m], h).and_then(|qp| {
                    let u = field
                        .feedback(&qp, &x[2 * m..], cfg.feedback_tol)
                        .map_err(|e| e.to_string())?;
                    let mut full = qp;
                    full.extend_from_slice(&u);
                    Ok(full)
                })
            }
        };
        let mut next = match stepped {
            Ok(v) => v,
            Err(message) => {
                traj.termination = if mode == FieldMode::Feedback {
                    Termination::FeedbackFailed { t, message }
                } else {
                    Termination::EvalFailed { t, message }
                };
                break;
            }
        };
        if next.iter().any(|v| !v.is_finite() || v.abs() > cfg.divergence) {
            traj.termination = Termination::Diverged { t };
            break;
        }
        if retraction && !active.is_empty() {
            match project(&active, &next, &project_cfg) {
                Some(p) => next = p,
                None => {
                    traj.termination = Termination::RetractionFailed { t };
                    break;
                }
            }
        }
        x = next;
        if let Err(e) = record(&mut traj, t, &x) {
            traj.termination = Termination::EvalFailed { t, message: e.to_string() };
            break;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorSummary {
    pub name: String,
    pub kind: MonitorKind,
    /// `max_t |value(t) − value(t0)|`.
    pub drift: f64,
    /// `max_t |value(t)|`.
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub samples: usize,
    pub monitors: Vec<MonitorSummary>,
    /// Largest `|c|` over every ladder and holonomic constraint.
    pub max_constraint_residual: f64,
    pub termination: Termination,
}

impl ConservationReport {
    pub fn drift(&self, name: &str) -> Option<f64> {
        self.monitors.iter().find(|m| m.name == name).map(|m| m.drift)
    }

    /// Largest drift among monitors of one kind.
    pub fn max_drift(&self, kind: MonitorKind) -> f64 {
        self.monitors
            .iter()
            .filter(|m| m.kind == kind)
            .map(|m| m.drift)
            .fold(0.0, f64::max)
    }
}

pub fn conservation_report(traj: &Trajectory) -> ConservationReport {
    assert!(!traj.is_empty(), "empty trajectory");
    let first = &traj.monitors[0];
    let monitors: Vec<MonitorSummary> = traj
        .monitor_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut drift = 0.0_f64;
            let mut max_abs = 0.0_f64;
            for row in &traj.monitors {
                drift = drift.max((row[i] - first[i]).abs());
                max_abs = max_abs.max(row[i].abs());
            }
            MonitorSummary {
                name: name.clone(),
                kind: traj.monitor_kinds[i],
                drift,
                max_abs,
            }
        })
        .collect();
    let max_constraint_residual = monitors
        .iter()
        .filter(|m| matches!(m.kind, MonitorKind::Constraint | MonitorKind::Holonomic))
        .map(|m| m.max_abs)
        .fold(0.0, f64::max);
    ConservationReport {
        samples: traj.len(),
        monitors,
        max_constraint_residual,
        termination: traj.termination.clone(),
    }
}
