//! Infinitesimal symmetries `Z = ξⁱ(q) ∂/∂qⁱ + ζᵃ(q,u) ∂/∂uᵃ` of a control
//! problem, their cotangent lifts and Noether momenta.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::expr::{diff, seeded_rng, simplify, CompiledExpr, Domain, EvalError, Expr, Layout};
use crate::problem::{costate_names, PontryaginSystem, Violation};
use crate::AnalysisConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGenerator {
    pub name: String,
    /// State components, functions of the states only.
    pub xi: Vec<Expr>,
    /// Control components, functions of states and controls.
    pub zeta: Vec<Expr>,
}

impl SymmetryGenerator {
    pub fn new(name: &str, xi: Vec<Expr>, zeta: Vec<Expr>) -> SymmetryGenerator {
        SymmetryGenerator {
            name: name.to_string(),
            xi,
            zeta,
        }
    }

    /// Convenience constructor from expression sources. Panics on a parse error.
    pub fn from_sources(name: &str, xi: &[&str], zeta: &[&str]) -> SymmetryGenerator {
        let parse = |s: &&str| crate::expr::parse(s).unwrap_or_else(|e| panic!("`{s}`: {e}"));
        SymmetryGenerator::new(name, xi.iter().map(parse).collect(), zeta.iter().map(parse).collect())
    }

    /// `a·self + other`, component-wise.
    pub fn combine(&self, a: f64, other: &SymmetryGenerator) -> SymmetryGenerator {
        let mix = |x: &[Expr], y: &[Expr]| -> Vec<Expr> {
            x.iter()
                .zip(y)
                .map(|(x, y)| simplify(&(a * x.clone() + y.clone())))
                .collect()
        };
        SymmetryGenerator {
            name: format!("{a}*{} + {}", self.name, other.name),
            xi: mix(&self.xi, &other.xi),
            zeta: mix(&self.zeta, &other.zeta),
        }
    }

    pub(crate) fn violations(&self, states: &[String], controls: &[String]) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |message: String| {
            out.push(Violation::Symmetry {
                generator: self.name.clone(),
                message,
            })
        };
        if self.xi.len() != states.len() {
            bad(format!("xi has {} components for {} states", self.xi.len(), states.len()));
        }
        if self.zeta.len() != controls.len() {
            bad(format!("zeta has {} components for {} controls", self.zeta.len(), controls.len()));
        }
        let q: BTreeSet<&str> = states.iter().map(String::as_str).collect();
        let mut qu = q.clone();
        qu.extend(controls.iter().map(String::as_str));
        for (i, x) in self.xi.iter().enumerate() {
            for v in x.free_variables() {
                if !q.contains(v.as_str()) {
                    bad(format!("xi[{}] depends on `{v}`, so the field is not projectable", i + 1));
                }
            }
        }
        for (a, z) in self.zeta.iter().enumerate() {
            for v in z.free_variables() {
                if !qu.contains(v.as_str()) {
                    bad(format!("zeta[{}] uses unknown variable `{v}`", a + 1));
                }
            }
        }
        out
    }
}

/// Cotangent lift on the `(q, p, u)` phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedGenerator {
    pub base: SymmetryGenerator,
    pub q: Vec<Expr>,
    /// `−Σⱼ pⱼ ∂ξʲ/∂qⁱ`.
    pub p: Vec<Expr>,
    pub u: Vec<Expr>,
}

impl LiftedGenerator {
    /// Components in `(q, p, u)` order.
    pub fn components(&self) -> Vec<Expr> {
        self.q.iter().chain(&self.p).chain(&self.u).cloned().collect()
    }
}

pub fn lift<S: AsRef<str>>(z: &SymmetryGenerator, states: &[S]) -> LiftedGenerator {
    let costates = costate_names(states.len());
    let p = states
        .iter()
        .map(|qi| {
            let terms = z
                .xi
                .iter()
                .map(|xj| diff(xj, qi.as_ref()))
                .zip(&costates)
                .filter(|(d, _)| !d.is_zero())
                .map(|(d, pj)| Expr::var(pj) * d)
                .collect::<Vec<_>>();
            simplify(&-Expr::sum(terms))
        })
        .collect();
    LiftedGenerator {
        base: z.clone(),
        q: z.xi.clone(),
        p,
        u: z.zeta.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumFunction {
    pub generator: String,
    pub expr: Expr,
}

/// `f = Σᵢ pᵢ ξⁱ`.
pub fn noether_momentum(z: &SymmetryGenerator) -> MomentumFunction {
    let costates = costate_names(z.xi.len());
    let terms = z
        .xi
        .iter()
        .zip(&costates)
        .filter(|(x, _)| !x.is_zero())
        .map(|(x, p)| Expr::var(p) * x.clone());
    MomentumFunction {
        generator: z.name.clone(),
        expr: simplify(&Expr::sum(terms)),
    }
}

/// `(L_Z X)ⁱ = ξʲ ∂Fⁱ/∂qʲ − Fʲ ∂ξⁱ/∂qʲ + ζᵃ ∂Fⁱ/∂uᵃ`.
pub fn lie_derivative_along_projection(z: &SymmetryGenerator, sys: &PontryaginSystem) -> Vec<Expr> {
    let states = sys.states();
    let controls = sys.controls();
    let f = &sys.problem().dynamics;
    f.iter()
        .zip(&z.xi)
        .map(|(fi, xi_i)| {
            let mut terms = Vec::new();
            for (qj, xj) in states.iter().zip(&z.xi) {
                terms.push(xj.clone() * diff(fi, qj));
            }
            for (qj, fj) in states.iter().zip(f) {
                terms.push(-(fj.clone() * diff(xi_i, qj)));
            }
            for (ua, za) in controls.iter().zip(&z.zeta) {
                terms.push(za.clone() * diff(fi, ua));
            }
            simplify(&Expr::sum(terms))
        })
        .collect()
}

/// `Z(L) = ξⁱ ∂L/∂qⁱ + ζᵃ ∂L/∂uᵃ`.
pub fn lagrangian_residual(z: &SymmetryGenerator, sys: &PontryaginSystem) -> Expr {
    apply_field(&sys.problem().lagrangian, sys.states(), &z.xi, sys.controls(), &z.zeta)
}

fn apply_field(e: &Expr, states: &[String], xi: &[Expr], controls: &[String], zeta: &[Expr]) -> Expr {
    let terms = states
        .iter()
        .zip(xi)
        .chain(controls.iter().zip(zeta))
        .map(|(v, c)| c.clone() * diff(e, v));
    simplify(&Expr::sum(terms))
}

/// `Zᶜ(H)` for the cotangent lift of `Z`. It equals `p·(L_Z X) − Z(L)`, so
/// it vanishes for free `p` exactly when `Z` is a symmetry.
pub fn lifted_hamiltonian_residual(z: &SymmetryGenerator, sys: &PontryaginSystem) -> Expr {
    let lifted = lift(z, sys.states());
    let names = sys.layout().names();
    let h = sys.hamiltonian();
    let terms = names
        .iter()
        .zip(lifted.components())
        .map(|(v, c)| c * diff(h, v));
    simplify(&Expr::sum(terms))
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub name: String,
    pub lie_derivative: Vec<Expr>,
    pub lagrangian_residual: Expr,
    /// Max over samples of the largest `|(L_Z X)ⁱ|`.
    pub lie_derivative_norm: f64,
    /// Max over samples of `|Z(L)|`.
    pub lagrangian_residual_norm: f64,
    pub samples: usize,
    /// All residuals simplified to the constant `0`.
    pub symbolic: bool,
    pub is_symmetry: bool,
    pub momentum: MomentumFunction,
}

/// Maximum `|e|` and whether `e` passes the vanishing criterion, over `points`.
pub(crate) fn sampled_residual(
    exprs: &[Expr],
    layout: &Layout,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<(f64, bool), EvalError> {
    let mut norm = 0.0_f64;
    let mut zero = true;
    for e in exprs {
        if e.is_zero() {
            continue;
        }
        let compiled = CompiledExpr::new(e, layout)?;
        for x in points {
            let v = compiled.eval(x)?;
            norm = norm.max(v.abs());
        }
        zero &= crate::expr::vanishes_on(e, layout, points, tol)?;
    }
    Ok((norm, zero))
}

pub(crate) fn box_points(layout: &Layout, domain: &Domain, n: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed, stream);
    (0..n).map(|_| domain.sample(layout.names(), &mut rng)).collect()
}

const SYMMETRY_STREAM: u64 = 0x73796d;

/// Verdict: symmetry iff `L_Z X` and `Z(L)` both vanish on the domain,
/// decided symbolically when they simplify to zero and by sampling otherwise.
pub fn check_symmetry(
    z: &SymmetryGenerator,
    sys: &PontryaginSystem,
    domain: &Domain,
    cfg: &AnalysisConfig,
) -> Result<SymmetryReport, EvalError> {
    let lie = lie_derivative_along_projection(z, sys);
    let zl = lagrangian_residual(z, sys);
    let momentum = noether_momentum(z);
    let symbolic = lie.iter().all(Expr::is_zero) && zl.is_zero();
    if symbolic {
        return Ok(SymmetryReport {
            name: z.name.clone(),
            lie_derivative: lie,
            lagrangian_residual: zl,
            lie_derivative_norm: 0.0,
            lagrangian_residual_norm: 0.0,
            samples: 0,
            symbolic,
            is_symmetry: true,
            momentum,
        });
    }
    let layout = sys.layout();
    let points = box_points(layout, domain, cfg.symmetry_trials, cfg.seed, SYMMETRY_STREAM);
    let (lie_norm, lie_zero) = sampled_residual(&lie, layout, &points, cfg.symmetry_tol)?;
    let (l_norm, l_zero) = sampled_residual(std::slice::from_ref(&zl), layout, &points, cfg.symmetry_tol)?;
    Ok(SymmetryReport {
        name: z.name.clone(),
        lie_derivative: lie,
        lagrangian_residual: zl,
        lie_derivative_norm: lie_norm,
        lagrangian_residual_norm: l_norm,
        samples: points.len(),
        symbolic,
        is_symmetry: lie_zero && l_zero,
        momentum,
    })
}

/// The lifted criterion: `Zᶜ(H)` vanishes at sampled points with free `p`.
/// Returns the maximum `|Zᶜ(H)|` and the verdict.
pub fn check_lifted(
    z: &SymmetryGenerator,
    sys: &PontryaginSystem,
    domain: &Domain,
    cfg: &AnalysisConfig,
) -> Result<(f64, bool), EvalError> {
    let r = lifted_hamiltonian_residual(z, sys);
    if r.is_zero() {
        return Ok((0.0, true));
    }
    let layout = sys.layout();
    let points = box_points(layout, domain, cfg.symmetry_trials, cfg.seed, SYMMETRY_STREAM);
    sampled_residual(std::slice::from_ref(&r), layout, &points, cfg.symmetry_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_pontryagin, ControlProblem};

    fn lq() -> PontryaginSystem {
        build_pontryagin(&ControlProblem::from_sources(&["q1"], &["u1"], &["u1"], "0.5*u1^2")).unwrap()
    }

    #[test]
    fn translation_of_lq() {
        let sys = lq();
        let z = SymmetryGenerator::from_sources("shift", &["1"], &["0"]);
        let r = check_symmetry(&z, &sys, &Domain::new(), &AnalysisConfig::default()).unwrap();
        assert!(r.is_symmetry && r.symbolic);
        assert_eq!(r.momentum.expr.to_string(), "p1");
        assert_eq!(lifted_hamiltonian_residual(&z, &sys).to_string(), "0");
        assert_eq!(lift(&z, sys.states()).p[0].to_string(), "0");
    }

    #[test]
    fn translation_against_state_dependent_dynamics() {
        let sys = build_pontryagin(&ControlProblem::from_sources(&["q1"], &["u1"], &["q1"], "u1^2")).unwrap();
        let z = SymmetryGenerator::from_sources("shift", &["1"], &["0"]);
        assert_eq!(lie_derivative_along_projection(&z, &sys)[0].to_string(), "1");
        let r = check_symmetry(&z, &sys, &Domain::new(), &AnalysisConfig::default()).unwrap();
        assert!(!r.is_symmetry);
    }

    #[test]
    fn state_dependent_cost_breaks_translation() {
        let sys = build_pontryagin(&ControlProblem::from_sources(&["q1"], &["u1"], &["u1"], "q1^2")).unwrap();
        let z = SymmetryGenerator::from_sources("shift", &["1"], &["0"]);
        let r = check_symmetry(&z, &sys, &Domain::new(), &AnalysisConfig::default()).unwrap();
        assert!(!r.is_symmetry);
        assert_eq!(r.lagrangian_residual.to_string(), "2*q1");
        assert_eq!(lifted_hamiltonian_residual(&z, &sys).to_string(), "-2*q1");
    }

    #[test]
    fn linear_xi_lift() {
        let z = SymmetryGenerator::from_sources("rot", &["q2", "-q1"], &[]);
        let l = lift(&z, &["q1", "q2"]);
        let p: Vec<String> = l.p.iter().map(|e| e.to_string()).collect();
        assert_eq!(p, ["p2", "-p1"]);
        assert_eq!(noether_momentum(&z).expr.to_string(), "p1*q2 - p2*q1");
    }

    #[test]
    fn zero_generator_has_zero_momentum() {
        let z = SymmetryGenerator::from_sources("none", &["0", "0"], &[]);
        assert_eq!(noether_momentum(&z).expr.to_string(), "0");
    }

    #[test]
    fn projectability_is_validated() {
        let z = SymmetryGenerator::from_sources("bad", &["u1"], &["q1"]);
        let v = z.violations(&["q1".into()], &["u1".into()]);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("not projectable"));
    }
}
