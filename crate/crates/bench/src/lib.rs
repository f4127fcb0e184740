//! Inputs shared by the pipeline benchmarks.

use presym_core::{build_pontryagin, fixtures, parse, run_ladder, AnalysisConfig, ConstraintLadder, Expr, PontryaginSystem};

/// Mid-sized expressions of the kind the ladder produces.
pub fn expression_corpus() -> Vec<Expr> {
    [
        "p6*(y2*u3 - y3*u2) + y3*(p1 - p5*u3 + p6*u2) - p4*(y1*u2 - y2*u1) - y1*(p3 - p4*u2 + p5*u1)",
        "0.5*(u1^2 + u2^2) - 0.25*(q1^2 + q2^2)^2",
        "sin(x1*y2)*exp(0.5*x3) + ln(1.5 + y1^2)*sqrt(1 + u1^2)",
        "(x1 - y2)^3/(2 + cos(u3)) - x2*y3*u1",
    ]
    .iter()
    .map(|s| parse(s).expect("corpus parses"))
    .collect()
}

pub fn bounded_curvature() -> PontryaginSystem {
    build_pontryagin(&fixtures::bounded_curvature()).expect("fixture builds")
}

pub fn quartic_oscillator() -> PontryaginSystem {
    build_pontryagin(&fixtures::quartic_oscillator()).expect("fixture builds")
}

pub fn stabilized_ladder(sys: &PontryaginSystem) -> ConstraintLadder {
    run_ladder(sys, sys.domain(), &AnalysisConfig::default()).expect("ladder stabilizes")
}
