//! Momentum maps built from verified symmetries, their level sets and the
//! dimension bookkeeping of the pulled-back presymplectic form.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::expr::{CompiledExpr, CompiledVec, Domain, EvalError, Expr};
use crate::feasible::{sample_feasible, ConstraintSet, SamplingFailure};
use crate::linalg;
use crate::poisson::{poisson_bracket, PoissonContext};
use crate::problem::PontryaginSystem;
use crate::symmetry::{check_symmetry, lift, noether_momentum, LiftedGenerator, MomentumFunction, SymmetryGenerator};
use crate::AnalysisConfig;

#[derive(Debug, Clone)]
pub struct MomentumMap {
    pub components: Vec<MomentumFunction>,
    pub lifts: Vec<LiftedGenerator>,
}

#[derive(Debug, thiserror::Error)]
pub enum MomentumError {
    #[error("momentum map needs at least one generator")]
    Empty,
    #[error("generator `{0}` is not a symmetry of the problem")]
    Unverified(String),
    #[error("mu has {got} components for {want} momenta")]
    MuLength { got: usize, want: usize },
    #[error("level set for mu = {mu:?} is infeasible: {failure}")]
    Infeasible { mu: Vec<f64>, failure: SamplingFailure },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Refuses any generator that fails [`check_symmetry`].
pub fn build_momentum_map(
    generators: &[SymmetryGenerator],
    sys: &PontryaginSystem,
    domain: &Domain,
    cfg: &AnalysisConfig,
) -> Result<MomentumMap, MomentumError> {
    if generators.is_empty() {
        return Err(MomentumError::Empty);
    }
    for z in generators {
        if !check_symmetry(z, sys, domain, cfg)?.is_symmetry {
            return Err(MomentumError::Unverified(z.name.clone()));
        }
    }
    Ok(MomentumMap::unchecked(generators, sys))
}

impl MomentumMap {
    /// Builds the map without verifying the generators.
    pub fn unchecked(generators: &[SymmetryGenerator], sys: &PontryaginSystem) -> MomentumMap {
        MomentumMap {
            components: generators.iter().map(noether_momentum).collect(),
            lifts: generators.iter().map(|z| lift(z, sys.states())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn exprs(&self) -> Vec<Expr> {
        self.components.iter().map(|c| c.expr.clone()).collect()
    }

    pub fn eval(&self, sys: &PontryaginSystem, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        CompiledVec::new(&self.exprs(), sys.layout())?.eval(x)
    }
}

const LEVEL_SET_STREAM: u64 = 0x6d75_0000;

/// Points of `{J = μ} ∩ {constraints = 0} ∩ {holonomic = 0}` inside the domain.
pub fn sample_level_set(
    j: &MomentumMap,
    mu: &[f64],
    constraints: &[Expr],
    sys: &PontryaginSystem,
    domain: &Domain,
    count: usize,
    cfg: &AnalysisConfig,
) -> Result<Vec<Vec<f64>>, MomentumError> {
    assert!(count >= 1, "level-set sampling needs count >= 1");
    if mu.len() != j.len() {
        return Err(MomentumError::MuLength {
            got: mu.len(),
            want: j.len(),
        });
    }
    let mut set: Vec<Expr> = j
        .components
        .iter()
        .zip(mu)
        .map(|(c, m)| crate::expr::simplify(&(c.expr.clone() - *m)))
        .collect();
    set.extend(constraints.iter().cloned());
    set.extend(sys.holonomic().iter().cloned());
    let set = ConstraintSet::new(&set, sys.layout())?;
    sample_feasible(&set, sys.layout(), domain, count, cfg, LEVEL_SET_STREAM).map_err(|failure| match failure {
        SamplingFailure::Eval(e) => MomentumError::Eval(e),
        failure => MomentumError::Infeasible {
            mu: mu.to_vec(),
            failure,
        },
    })
}

/// `μ = J(x₀)` for a feasible `x₀` on `constraints` and the holonomic set.
pub fn auto_mu(
    j: &MomentumMap,
    constraints: &[Expr],
    sys: &PontryaginSystem,
    domain: &Domain,
    cfg: &AnalysisConfig,
) -> Result<Vec<f64>, MomentumError> {
    let mut set = constraints.to_vec();
    set.extend(sys.holonomic().iter().cloned());
    let set = ConstraintSet::new(&set, sys.layout())?;
    let x0 = sample_feasible(&set, sys.layout(), domain, 1, cfg, LEVEL_SET_STREAM + 1).map_err(|failure| match failure {
        SamplingFailure::Eval(e) => MomentumError::Eval(e),
        failure => MomentumError::Infeasible { mu: Vec::new(), failure },
    })?;
    Ok(j.eval(sys, &x0[0])?)
}

/// Dimensions at one sample point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PointDims {
    pub jacobian_rank: usize,
    pub levelset_dim: usize,
    pub omega_pullback_kernel_dim: usize,
    pub orbit_tangent_dim_within_levelset: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetReport {
    pub mu: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Number of phase-space coordinates.
    pub raw_ambient_dim: usize,
    /// Rank of the holonomic constraint gradients.
    pub holonomic_rank: usize,
    /// `raw_ambient_dim − holonomic_rank`.
    pub ambient_dim: usize,
    /// Rank of `dJ` on the constraint manifold.
    pub jacobian_rank: usize,
    pub levelset_dim: usize,
    pub omega_pullback_kernel_dim: usize,
    /// Largest entry of the pulled-back form on an orthonormal tangent frame.
    pub omega_pullback_norm: f64,
    pub orbit_tangent_dim_within_levelset: usize,
    /// `levelset_dim − omega_pullback_kernel_dim`: dimension of the quotient
    /// by the characteristic distribution of the pulled-back form.
    pub reduced_dim: usize,
    /// `levelset_dim − orbit_tangent_dim_within_levelset`.
    pub orbit_quotient_dim: usize,
    /// Sampled constant-rank evidence for a weakly regular value. Never a proof.
    pub weakly_regular_evidence: bool,
    pub per_point: Vec<PointDims>,
    /// Largest `|J − μ|` and constraint residual over the points.
    pub max_residual: f64,
    pub hamiltonian_min: f64,
    pub hamiltonian_max: f64,
    pub warning: Option<String>,
}

/// Coordinate matrix of `ω = dqⁱ ∧ dpᵢ` in `(q, p, u)` order.
pub fn omega_matrix(m: usize, k: usize) -> DMatrix<f64> {
    let n = 2 * m + k;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..m {
        w[(i, m + i)] = 1.0;
        w[(m + i, i)] = -1.0;
    }
    w
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Ranks, tangent frames and pullback kernels at each point. Only the
/// holonomic constraints are appended to the momenta: pass points sampled
/// with extra ladder constraints if the analysis should live on `M_f`, and
/// include those constraints in `extra`.
pub fn rank_analysis(
    j: &MomentumMap,
    mu: &[f64],
    points: &[Vec<f64>],
    extra: &[Expr],
    sys: &PontryaginSystem,
    cfg: &AnalysisConfig,
) -> Result<LevelSetReport, MomentumError> {
    assert!(!points.is_empty(), "rank analysis needs at least one point");
    let layout = sys.layout();
    let n = layout.len();
    let mut side = extra.to_vec();
    side.extend(sys.holonomic().iter().cloned());
    let jset = ConstraintSet::new(&j.exprs(), layout)?;
    let gset = ConstraintSet::new(&side, layout)?;
    let lifts = j
        .lifts
        .iter()
        .map(|l| CompiledVec::new(&l.components(), layout))
        .collect::<Result<Vec<_>, _>>()?;
    let h = CompiledExpr::new(sys.hamiltonian(), layout)?;
    let omega = omega_matrix(sys.n_states(), sys.n_controls());

    let mut per_point = Vec::with_capacity(points.len());
    let mut holonomic_ranks = Vec::with_capacity(points.len());
    let mut pullback_norm = 0.0_f64;
    let mut max_residual = 0.0_f64;
    let (mut h_min, mut h_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in points {
        let jv = jset.residual(x)?;
        for (v, m) in jv.iter().zip(mu) {
            max_residual = max_residual.max((v - m).abs());
        }
        if !gset.is_empty() {
            max_residual = max_residual.max(gset.max_residual(x)?);
        }
        let hv = h.eval(x)?;
        h_min = h_min.min(hv);
        h_max = h_max.max(hv);

        let g = gset.jacobian(x)?;
        let g_rank = linalg::rank(&g, cfg.rank_tol);
        let full = stack(&jset.jacobian(x)?, &g);
        let jacobian_rank = linalg::rank(&full, cfg.rank_tol) - g_rank;
        let frame = linalg::null_space(&full, cfg.rank_tol);
        let levelset_dim = frame.ncols();
        let pullback = frame.transpose() * &omega * &frame;
        pullback_norm = pullback_norm.max(if pullback.is_empty() { 0.0 } else { pullback.amax() });
        let kernel = levelset_dim - linalg::rank(&pullback, cfg.rank_tol);
        let mut lifted = DMatrix::zeros(n, lifts.len());
        for (c, l) in lifts.iter().enumerate() {
            let v = l.eval(x)?;
            for (r, val) in v.into_iter().enumerate() {
                lifted[(r, c)] = val;
            }
        }
        let orbit = linalg::intersection_dim(&lifted, &frame, cfg.rank_tol);
        holonomic_ranks.push(g_rank);
        per_point.push(PointDims {
            jacobian_rank,
            levelset_dim,
            omega_pullback_kernel_dim: kernel,
            orbit_tangent_dim_within_levelset: orbit,
        });
    }
    let first = per_point[0].clone();
    let constant = per_point.iter().all(|d| *d == first) && holonomic_ranks.iter().all(|r| *r == holonomic_ranks[0]);
    let warning = (!constant).then(|| {
        "dimensions vary across sample points; constant-rank assumption violated, see per_point".to_string()
    });
    let holonomic_rank = holonomic_ranks[0];
    Ok(LevelSetReport {
        mu: mu.to_vec(),
        points: points.to_vec(),
        raw_ambient_dim: n,
        holonomic_rank,
        ambient_dim: n - holonomic_rank,
        jacobian_rank: first.jacobian_rank,
        levelset_dim: first.levelset_dim,
        omega_pullback_kernel_dim: first.omega_pullback_kernel_dim,
        omega_pullback_norm: pullback_norm,
        orbit_tangent_dim_within_levelset: first.orbit_tangent_dim_within_levelset,
        reduced_dim: first.levelset_dim - first.omega_pullback_kernel_dim,
        orbit_quotient_dim: first.levelset_dim - first.orbit_tangent_dim_within_levelset,
        weakly_regular_evidence: constant,
        per_point,
        max_residual,
        hamiltonian_min: h_min,
        hamiltonian_max: h_max,
        warning,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TangencyResidual {
    pub generator: String,
    /// `{f, H}`; momenta do not depend on `u`, so multipliers drop out.
    pub bracket: Expr,
    pub max_abs: f64,
}

/// `Γ(f_ξ) = {f_ξ, H}` at the points, per component.
pub fn tangency_check(
    j: &MomentumMap,
    sys: &PontryaginSystem,
    points: &[Vec<f64>],
) -> Result<Vec<TangencyResidual>, EvalError> {
    let ctx = PoissonContext::of(sys);
    j.components
        .iter()
        .map(|c| {
            let bracket = poisson_bracket(&c.expr, sys.hamiltonian(), &ctx);
            let compiled = CompiledExpr::new(&bracket, sys.layout())?;
            let mut max_abs = 0.0_f64;
            for x in points {
                max_abs = max_abs.max(compiled.eval(x)?.abs());
            }
            Ok(TangencyResidual {
                generator: c.generator.clone(),
                bracket,
                max_abs,
            })
        })
        .collect()
}
