//! Optimal control problems in coordinates and their Pontryagin systems.
//!
//! A [`ControlProblem`] holds the state and control names, the dynamics
//! `q̇ⁱ = Fⁱ(q, u)`, the running cost `L(q, u)` and optional holonomic
//! constraints. [`build_pontryagin`] turns it into a [`PontryaginSystem`]
//! on the phase space with coordinates ordered `(q, p, u)`: the Hamiltonian
//! `H = pᵢFⁱ − L` (normal case, cost multiplier fixed to one), the primary
//! constraints `χ_a = ∂H/∂uᵃ` and the matrix `W_ab = ∂χ_a/∂uᵇ`.
//!
//! The ordering also fixes the canonical forms: `θ = pᵢ dqⁱ`,
//! `ω = dqⁱ ∧ dpᵢ`, whose kernel is spanned by the control directions.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::expr::{diff, simplify, Domain, EvalError, Expr, Layout, FUNCTION_NAMES};
use crate::feasible::{sample_feasible, ConstraintSet, SamplingFailure};
use crate::linalg;
use crate::symmetry::SymmetryGenerator;
use crate::AnalysisConfig;

/// Name of the time coordinate for non-autonomous problems.
pub const TIME: &str = "t";

#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub states: Vec<String>,
    pub controls: Vec<String>,
    /// One entry per state, in state order.
    pub dynamics: Vec<Expr>,
    pub lagrangian: Expr,
    /// Constraints `g_r = 0` on the admissible set. They are monitored and
    /// used as projection targets but do not enter `H`.
    pub holonomic: Vec<Expr>,
    pub time_dependent: bool,
    pub symmetries: Vec<SymmetryGenerator>,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoStates,
    DynamicsCount { states: usize, dynamics: usize },
    DuplicateName(String),
    ReservedName(String),
    InvalidName(String),
    UnknownVariable { context: String, name: String },
    Symmetry { generator: String, message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "problem declares no states"),
            Violation::DynamicsCount { states, dynamics } => write!(
                f,
                "{dynamics} dynamics entries for {states} states"
            ),
            Violation::DuplicateName(n) => write!(f, "name `{n}` declared twice"),
            Violation::ReservedName(n) => write!(f, "name `{n}` is reserved"),
            Violation::InvalidName(n) => write!(f, "`{n}` is not a valid identifier"),
            Violation::UnknownVariable { context, name } => {
                write!(f, "{context} uses unknown variable `{name}`")
            }
            Violation::Symmetry { generator, message } => {
                write!(f, "symmetry `{generator}`: {message}")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("invalid problem: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("problem is already autonomous")]
    AlreadyAutonomous,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Costate names `p1..pm` are generated, so user names of that shape clash.
pub fn is_costate_name(name: &str) -> bool {
    name.len() > 1 && name.starts_with('p') && name[1..].chars().all(|c| c.is_ascii_digit())
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn costate_names(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("p{i}")).collect()
}

impl ControlProblem {
    pub fn new(
        states: &[&str],
        controls: &[&str],
        dynamics: Vec<Expr>,
        lagrangian: Expr,
    ) -> ControlProblem {
        ControlProblem {
            states: states.iter().map(|s| s.to_string()).collect(),
            controls: controls.iter().map(|s| s.to_string()).collect(),
            dynamics,
            lagrangian,
            holonomic: Vec::new(),
            time_dependent: false,
            symmetries: Vec::new(),
            domain: Domain::default(),
        }
    }

    /// Convenience constructor from expression sources. Panics on a parse error.
    pub fn from_sources(states: &[&str], controls: &[&str], dynamics: &[&str], lagrangian: &str) -> ControlProblem {
        let parse = |s: &str| crate::expr::parse(s).unwrap_or_else(|e| panic!("`{s}`: {e}"));
        ControlProblem::new(
            states,
            controls,
            dynamics.iter().map(|s| parse(s)).collect(),
            parse(lagrangian),
        )
    }

    pub fn with_holonomic(mut self, g: Vec<Expr>) -> ControlProblem {
        self.holonomic = g;
        self
    }

    pub fn with_symmetries(mut self, s: Vec<SymmetryGenerator>) -> ControlProblem {
        self.symmetries = s;
        self
    }

    pub fn with_domain(mut self, d: Domain) -> ControlProblem {
        self.domain = d;
        self
    }

    pub fn time_dependent(mut self, yes: bool) -> ControlProblem {
        self.time_dependent = yes;
        self
    }

    /// All invariant violations; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.states.is_empty() {
            out.push(Violation::NoStates);
        }
        if self.dynamics.len() != self.states.len() {
            out.push(Violation::DynamicsCount {
                states: self.states.len(),
                dynamics: self.dynamics.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for name in self.states.iter().chain(&self.controls) {
            if !is_identifier(name) {
                out.push(Violation::InvalidName(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                out.push(Violation::DuplicateName(name.clone()));
            }
            if is_costate_name(name)
                || FUNCTION_NAMES.contains(&name.as_str())
                || (self.time_dependent && name == TIME)
            {
                out.push(Violation::ReservedName(name.clone()));
            }
        }

        let mut qu: BTreeSet<&str> = self.states.iter().map(String::as_str).collect();
        qu.extend(self.controls.iter().map(String::as_str));
        let mut qut = qu.clone();
        if self.time_dependent {
            qut.insert(TIME);
        }
        let mut check = |context: String, e: &Expr, allowed: &BTreeSet<&str>| {
            for v in e.free_variables() {
                if !allowed.contains(v.as_str()) {
                    out.push(Violation::UnknownVariable {
                        context: context.clone(),
                        name: v,
                    });
                }
            }
        };
        for (i, f) in self.dynamics.iter().enumerate() {
            let label = self
                .states
                .get(i)
                .map(|s| format!("dynamics of `{s}`"))
                .unwrap_or_else(|| format!("dynamics entry {}", i + 1));
            check(label, f, &qut);
        }
        check("lagrangian".into(), &self.lagrangian, &qut);
        for (i, g) in self.holonomic.iter().enumerate() {
            check(format!("holonomic constraint {}", i + 1), g, &qu);
        }
        for z in &self.symmetries {
            out.extend(z.violations(&self.states, &self.controls));
        }
        out
    }

    /// Appends time as a state with unit velocity.
    pub fn autonomize(&self) -> Result<ControlProblem, ProblemError> {
        if !self.time_dependent {
            return Err(ProblemError::AlreadyAutonomous);
        }
        let mut out = self.clone();
        out.states.push(TIME.to_string());
        out.dynamics.push(Expr::one());
        out.time_dependent = false;
        for z in &mut out.symmetries {
            if z.xi.len() + 1 == out.states.len() {
                z.xi.push(Expr::zero());
            }
        }
        Ok(out)
    }
}

/// Phase point in `(q, p, u)` order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>, u: Vec<f64>) -> PhasePoint {
        assert_eq!(q.len(), p.len(), "one costate per state");
        PhasePoint { q, p, u }
    }

    pub fn from_flat(x: &[f64], m: usize, k: usize) -> PhasePoint {
        assert_eq!(x.len(), 2 * m + k, "phase vector length");
        PhasePoint {
            q: x[..m].to_vec(),
            p: x[m..2 * m].to_vec(),
            u: x[2 * m..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.q.len() + self.u.len());
        v.extend_from_slice(&self.q);
        v.extend_from_slice(&self.p);
        v.extend_from_slice(&self.u);
        v
    }
}

#[derive(Debug, Clone)]
pub struct PontryaginSystem {
    problem: ControlProblem,
    costates: Vec<String>,
    layout: Layout,
    hamiltonian: Expr,
    chi: Vec<Expr>,
    w: Vec<Vec<Expr>>,
}

/// Builds `H = pᵢFⁱ − L`, `χ_a = ∂H/∂uᵃ`, `W_ab = ∂χ_a/∂uᵇ`. Non-autonomous
/// problems are autonomized first.
pub fn build_pontryagin(problem: &ControlProblem) -> Result<PontryaginSystem, ProblemError> {
    let violations = problem.validate();
    if !violations.is_empty() {
        return Err(ProblemError::Invalid(violations));
    }
    let problem = if problem.time_dependent {
        problem.autonomize()?
    } else {
        problem.clone()
    };
    let m = problem.states.len();
    let costates = costate_names(m);
    let pairing = Expr::sum(
        costates
            .iter()
            .zip(&problem.dynamics)
            .map(|(p, f)| Expr::var(p) * f.clone()),
    );
    let hamiltonian = simplify(&(pairing - problem.lagrangian.clone()));
    let chi: Vec<Expr> = problem.controls.iter().map(|u| diff(&hamiltonian, u)).collect();
    let w = chi
        .iter()
        .map(|c| problem.controls.iter().map(|u| diff(c, u)).collect())
        .collect();
    let mut names: Vec<&str> = problem.states.iter().map(String::as_str).collect();
    names.extend(costates.iter().map(String::as_str));
    names.extend(problem.controls.iter().map(String::as_str));
    let layout = Layout::new(&names);
    Ok(PontryaginSystem {
        problem,
        costates,
        layout,
        hamiltonian,
        chi,
        w,
    })
}

impl PontryaginSystem {
    /// The (autonomized) problem this system was built from.
    pub fn problem(&self) -> &ControlProblem {
        &self.problem
    }

    pub fn states(&self) -> &[String] {
        &self.problem.states
    }

    pub fn costates(&self) -> &[String] {
        &self.costates
    }

    pub fn controls(&self) -> &[String] {
        &self.problem.controls
    }

    /// Canonical `(q, p, u)` coordinate ordering.
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.hamiltonian
    }

    pub fn chi(&self) -> &[Expr] {
        &self.chi
    }

    pub fn w(&self) -> &[Vec<Expr>] {
        &self.w
    }

    pub fn holonomic(&self) -> &[Expr] {
        &self.problem.holonomic
    }

    pub fn domain(&self) -> &Domain {
        &self.problem.domain
    }

    pub fn n_states(&self) -> usize {
        self.problem.states.len()
    }

    pub fn n_controls(&self) -> usize {
        self.problem.controls.len()
    }

    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    pub fn point(&self, x: &[f64]) -> PhasePoint {
        PhasePoint::from_flat(x, self.n_states(), self.n_controls())
    }

    /// Names of the state and costate coordinates, i.e. `(q, p)`.
    pub fn canonical_names(&self) -> Vec<&str> {
        self.layout.names()[..2 * self.n_states()]
            .iter()
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// `W` has full rank at every sample.
    Regular,
    /// `W` has the same deficient rank everywhere sampled.
    SingularConstantRank(usize),
    /// The rank of `W` varies over the samples.
    Mixed,
}

impl fmt::Display for Regularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularity::Regular => write!(f, "REGULAR"),
            Regularity::SingularConstantRank(r) => write!(f, "SINGULAR_CONSTANT_RANK({r})"),
            Regularity::Mixed => write!(f, "MIXED"),
        }
    }
}

impl Serialize for Regularity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub classification: Regularity,
    /// Rank of `W` at each sample point.
    pub ranks: Vec<usize>,
    /// Whether the samples satisfy `χ = 0`; otherwise they cover the box.
    pub on_primary_constraints: bool,
    pub warning: Option<String>,
}

/// Numerical rank of `W` at one phase point.
pub fn w_rank(sys: &PontryaginSystem, x: &[f64], rel_tol: f64) -> Result<usize, EvalError> {
    let k = sys.n_controls();
    let mut a = DMatrix::zeros(k, k);
    let layout = sys.layout();
    for (i, row) in sys.w().iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            a[(i, j)] = crate::expr::CompiledExpr::new(e, layout)?.eval(x)?;
        }
    }
    Ok(linalg::rank(&a, rel_tol))
}

/// Classifies the problem by the rank of `W` on seeded samples of `{χ = 0}`
/// (falling back to the plain box when no feasible points are found).
pub fn classify_regularity(
    sys: &PontryaginSystem,
    domain: &Domain,
    trials: usize,
    cfg: &AnalysisConfig,
) -> Result<RegularityReport, EvalError> {
    assert!(trials >= 1, "classification needs at least one trial");
    let k = sys.n_controls();
    let mut constraints: Vec<Expr> = sys.chi().iter().filter(|c| !c.is_zero()).cloned().collect();
    constraints.extend(sys.holonomic().iter().cloned());
    let set = ConstraintSet::new(&constraints, sys.layout())?;
    let (points, feasible) =
        match sample_feasible(&set, sys.layout(), domain, trials, cfg, 0x7265_6775) {
            Ok(p) => (p, true),
            Err(SamplingFailure::Eval(e)) => return Err(e),
            Err(_) => {
                let mut rng = crate::expr::seeded_rng(cfg.seed, 0x7265_6776);
                let pts = (0..trials)
                    .map(|_| domain.sample(sys.layout().names(), &mut rng))
                    .collect();
                (pts, false)
            }
        };
    let ranks = points
        .iter()
        .map(|x| w_rank(sys, x, cfg.rank_tol))
        .collect::<Result<Vec<_>, _>>()?;
    let first = ranks[0];
    let (classification, warning) = if ranks.iter().any(|r| *r != first) {
        (
            Regularity::Mixed,
            Some("rank of W varies over the sampled domain; constant-rank assumption violated".to_string()),
        )
    } else if first == k {
        (Regularity::Regular, None)
    } else {
        (Regularity::SingularConstantRank(first), None)
    };
    Ok(RegularityReport {
        classification,
        ranks,
        on_primary_constraints: feasible,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval, parse, VariableTable};

    fn lq() -> ControlProblem {
        ControlProblem::from_sources(&["q1"], &["u1"], &["u1"], "0.5*u1^2")
    }

    #[test]
    fn lq_is_valid_and_builds_expected_system() {
        assert!(lq().validate().is_empty());
        let sys = build_pontryagin(&lq()).unwrap();
        assert_eq!(sys.hamiltonian().to_string(), "p1*u1 - 0.5*u1^2");
        assert_eq!(sys.chi()[0].to_string(), "p1 - u1");
        assert_eq!(sys.w()[0][0].to_string(), "-1");
        assert_eq!(sys.layout().names(), ["q1", "p1", "u1"]);
    }

    #[test]
    fn short_dynamics_is_reported() {
        let mut p = lq();
        p.states.push("q2".into());
        assert!(p
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::DynamicsCount { .. })));
    }

    #[test]
    fn unknown_variable_in_lagrangian() {
        let mut p = lq();
        p.lagrangian = parse("u1^2 + z").unwrap();
        let v = p.validate();
        assert_eq!(
            v,
            vec![Violation::UnknownVariable {
                context: "lagrangian".into(),
                name: "z".into()
            }]
        );
    }

    #[test]
    fn duplicate_and_reserved_names() {
        let p = ControlProblem::from_sources(&["x", "p2"], &["x"], &["x", "1"], "x");
        let v = p.validate();
        assert!(v.contains(&Violation::DuplicateName("x".into())));
        assert!(v.contains(&Violation::ReservedName("p2".into())));
        let t = ControlProblem::from_sources(&["t"], &["u"], &["u"], "u^2").time_dependent(true);
        assert!(t.validate().contains(&Violation::ReservedName("t".into())));
    }

    #[test]
    fn autonomize_appends_time() {
        let p = ControlProblem::from_sources(&["q1"], &["u1"], &["t*u1"], "u1^2").time_dependent(true);
        let a = p.autonomize().unwrap();
        assert_eq!(a.states, ["q1", "t"]);
        assert_eq!(a.dynamics[1], Expr::one());
        assert!(!a.time_dependent);
        assert!(matches!(a.autonomize(), Err(ProblemError::AlreadyAutonomous)));
    }

    #[test]
    fn hamiltonian_identity_holds_pointwise() {
        let p = ControlProblem::from_sources(
            &["a", "b"],
            &["u"],
            &["b*u + sin(a)", "a - u^3"],
            "exp(u)*a^2 + b",
        );
        let sys = build_pontryagin(&p).unwrap();
        let x = [0.3, -0.2, 0.9, -1.1, 0.4];
        let vars = VariableTable::from_slices(sys.layout().names(), &x);
        let h = eval(sys.hamiltonian(), &vars).unwrap();
        let l = eval(&p.lagrangian, &vars).unwrap();
        let f: Vec<f64> = p.dynamics.iter().map(|f| eval(f, &vars).unwrap()).collect();
        let pf = x[2] * f[0] + x[3] * f[1];
        assert!((h + l - pf).abs() < 1e-14);
    }

    #[test]
    fn linear_in_controls_gives_zero_w() {
        let p = ControlProblem::from_sources(&["a", "b"], &["u", "v"], &["2*u - v", "3*v"], "a*b");
        let sys = build_pontryagin(&p).unwrap();
        assert!(sys.w().iter().flatten().all(Expr::is_zero));
    }

    #[test]
    fn classification() {
        let cfg = AnalysisConfig::default();
        let sys = build_pontryagin(&lq()).unwrap();
        let r = classify_regularity(&sys, &Domain::new(), 20, &cfg).unwrap();
        assert_eq!(r.classification, Regularity::Regular);
        assert!(r.on_primary_constraints);

        let p = ControlProblem::from_sources(&["q1"], &["u1"], &["q1*u1"], "0.5*u1^2");
        let sys = build_pontryagin(&p).unwrap();
        assert_eq!(sys.w()[0][0].to_string(), "-1");
        let r = classify_regularity(&sys, &Domain::new(), 20, &cfg).unwrap();
        assert_eq!(r.classification, Regularity::Regular);

        let p = ControlProblem::from_sources(&["q1"], &["u1"], &["u1"], "q1^2");
        let sys = build_pontryagin(&p).unwrap();
        let r = classify_regularity(&sys, &Domain::new(), 20, &cfg).unwrap();
        assert_eq!(r.classification, Regularity::SingularConstantRank(0));

        // W = -q2 and the holonomic constraint pins q2 to 0 or 1.
        let p = ControlProblem::from_sources(&["q1", "q2"], &["u1"], &["u1", "0"], "0.5*q2*u1^2")
            .with_holonomic(vec![parse("q2*(q2 - 1)").unwrap()]);
        let sys = build_pontryagin(&p).unwrap();
        let r = classify_regularity(&sys, &Domain::new(), 40, &cfg).unwrap();
        assert_eq!(r.classification, Regularity::Mixed);
        assert!(r.warning.is_some());
    }
}
