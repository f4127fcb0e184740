//! Problem files shipped with the crate.

use crate::problem::ControlProblem;
use crate::problem_file::parse_problem;

pub const LQ_SINGLE_INTEGRATOR: &str = include_str!("../examples/lq_single_integrator.ocp");
pub const BOUNDED_CURVATURE: &str = include_str!("../examples/bounded_curvature.ocp");
pub const QUARTIC_OSCILLATOR: &str = include_str!("../examples/quartic_oscillator.ocp");

/// `(file stem, contents)` of every fixture.
pub const ALL: &[(&str, &str)] = &[
    ("lq_single_integrator", LQ_SINGLE_INTEGRATOR),
    ("bounded_curvature", BOUNDED_CURVATURE),
    ("quartic_oscillator", QUARTIC_OSCILLATOR),
];

pub fn lq_single_integrator() -> ControlProblem {
    parse_problem(LQ_SINGLE_INTEGRATOR).expect("fixture parses")
}

pub fn bounded_curvature() -> ControlProblem {
    parse_problem(BOUNDED_CURVATURE).expect("fixture parses")
}

pub fn quartic_oscillator() -> ControlProblem {
    parse_problem(QUARTIC_OSCILLATOR).expect("fixture parses")
}
