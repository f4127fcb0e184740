//! Canonical Poisson bracket of the `(q, p)` pairs. Controls are kernel
//! directions of `ω` and take no part in the bracket.

use crate::expr::{diff, simplify, Expr};
use crate::problem::PontryaginSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonContext {
    pairs: Vec<(String, String)>,
    kernel: Vec<String>,
}

impl PoissonContext {
    /// Panics unless `states` and `costates` have equal length.
    pub fn new<S: AsRef<str>>(states: &[S], costates: &[S], controls: &[S]) -> PoissonContext {
        assert_eq!(states.len(), costates.len(), "one costate per state");
        PoissonContext {
            pairs: states
                .iter()
                .zip(costates)
                .map(|(q, p)| (q.as_ref().to_string(), p.as_ref().to_string()))
                .collect(),
            kernel: controls.iter().map(|u| u.as_ref().to_string()).collect(),
        }
    }

    pub fn of(sys: &PontryaginSystem) -> PoissonContext {
        PoissonContext::new(sys.states(), sys.costates(), sys.controls())
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    /// Coordinates spanning `ker ω`.
    pub fn kernel(&self) -> &[String] {
        &self.kernel
    }
}

/// `{f, g} = Σᵢ ∂f/∂qⁱ ∂g/∂pᵢ − ∂f/∂pᵢ ∂g/∂qⁱ`, simplified.
pub fn poisson_bracket(f: &Expr, g: &Expr, ctx: &PoissonContext) -> Expr {
    let mut terms = Vec::new();
    for (q, p) in &ctx.pairs {
        let fq = diff(f, q);
        let gp = diff(g, p);
        if !fq.is_zero() && !gp.is_zero() {
            terms.push(fq * gp);
        }
        let fp = diff(f, p);
        let gq = diff(g, q);
        if !fp.is_zero() && !gq.is_zero() {
            terms.push(-(fp * gq));
        }
    }
    simplify(&Expr::sum(terms))
}
