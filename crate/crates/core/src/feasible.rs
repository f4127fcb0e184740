//! Sampling points on `{c = 0}` by Newton projection from box samples.

use nalgebra::{DMatrix, DVector};

use crate::expr::{diff, seeded_rng, CompiledVec, Domain, EvalError, Expr, Layout};
use crate::linalg;
use crate::AnalysisConfig;

/// Constraints compiled together with their symbolic Jacobian.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    exprs: Vec<Expr>,
    values: CompiledVec,
    /// Row-major `∂c_i/∂x_j`.
    jacobian: CompiledVec,
    dim: usize,
}

impl ConstraintSet {
    pub fn new(exprs: &[Expr], layout: &Layout) -> Result<ConstraintSet, EvalError> {
        let grads: Vec<Expr> = exprs
            .iter()
            .flat_map(|c| layout.names().iter().map(move |v| diff(c, v)))
            .collect();
        Ok(ConstraintSet {
            exprs: exprs.to_vec(),
            values: CompiledVec::new(exprs, layout)?,
            jacobian: CompiledVec::new(&grads, layout)?,
            dim: layout.len(),
        })
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn residual(&self, x: &[f64]) -> Result<DVector<f64>, EvalError> {
        Ok(DVector::from_vec(self.values.eval(x)?))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let flat = self.jacobian.eval(x)?;
        Ok(DMatrix::from_row_slice(self.len(), self.dim, &flat))
    }

    pub fn max_residual(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.residual(x)?.amax())
    }
}

/// Gauss–Newton with minimum-norm steps. Returns `None` if the iteration
/// does not reach `cfg.newton_tol` within `cfg.newton_max_iter` steps or
/// leaves the region where the constraints can be evaluated.
pub fn project(set: &ConstraintSet, x0: &[f64], cfg: &AnalysisConfig) -> Option<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    for _ in 0..=cfg.newton_max_iter {
        let r = set.residual(x.as_slice()).ok()?;
        if !r.iter().all(|v| v.is_finite()) {
            return None;
        }
        if r.amax() <= cfg.newton_tol {
            return Some(x.as_slice().to_vec());
        }
        let j = set.jacobian(x.as_slice()).ok()?;
        let dx = linalg::min_norm_solve(&j, &r, cfg.rank_tol);
        x -= dx;
        if x.amax() > 1e12 {
            return None;
        }
    }
    None
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SamplingFailure {
    #[error(
        "no feasible points: {found} of {wanted} found after {attempts} attempts \
         ({converged} converged, {outside} left the domain box)"
    )]
    Infeasible {
        wanted: usize,
        found: usize,
        attempts: usize,
        converged: usize,
        outside: usize,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `count` points of `{set = 0}` inside `domain`, projected from seeded box
/// samples. Each point gets `cfg.attempts_per_point` tries. `stream` keeps
/// different sampling purposes on independent random sequences.
pub fn sample_feasible(
    set: &ConstraintSet,
    layout: &Layout,
    domain: &Domain,
    count: usize,
    cfg: &AnalysisConfig,
    stream: u64,
) -> Result<Vec<Vec<f64>>, SamplingFailure> {
    let mut rng = seeded_rng(cfg.seed, stream);
    let budget = count * cfg.attempts_per_point;
    let names = layout.names();
    let mut points = Vec::with_capacity(count);
    let (mut attempts, mut converged, mut outside) = (0, 0, 0);
    while points.len() < count && attempts < budget {
        attempts += 1;
        let start = domain.sample(names, &mut rng);
        if set.is_empty() {
            points.push(start);
            continue;
        }
        // Evaluation errors at the start point are only a bad draw; a
        // constraint that cannot be compiled was rejected in `new`.
        let Some(x) = project(set, &start, cfg) else {
            continue;
        };
        converged += 1;
        if !domain.contains(names, &x, cfg.domain_slack) {
            outside += 1;
            continue;
        }
        points.push(x);
    }
    if points.len() < count {
        return Err(SamplingFailure::Infeasible {
            wanted: count,
            found: points.len(),
            attempts,
            converged,
            outside,
        });
    }
    Ok(points)
}
