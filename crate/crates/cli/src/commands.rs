use std::fs;
use std::io::{self, Write};
use std::path::Path;

use presym_core::expr::Interval;
use presym_core::feasible::SamplingFailure;
use presym_core::ladder::StepReport;
use presym_core::momentum::{auto_mu, MomentumError};
use presym_core::problem::RegularityReport;
use presym_core::problem_file::load_problem;
use presym_core::symmetry::{check_lifted, SymmetryReport};
use presym_core::{
    build_momentum_map, build_pontryagin, check_symmetry, classify_regularity, conservation_report, integrate,
    lift, rank_analysis, run_ladder, sample_level_set, AnalysisConfig, ConstraintLadder, Expr, Gauge,
    IntegratorConfig, LadderError, LevelSetReport, MomentumMap, MultiplierStatus, PhasePoint,
    PontryaginSystem, Regularity, SymmetryGenerator,
};
use serde::Serialize;

use crate::{Command, Common, GaugeArg, IntegrateArgs, ReduceArgs, RetractionArg};

const SCHEMA: u32 = 1;

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RANK: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

/// A failed command: exit code, message for stderr and an optional report
/// that still goes to the output.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub output: Option<String>,
    pub out: Option<std::path::PathBuf>,
}

impl Failure {
    fn input(message: impl ToString) -> Failure {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
            output: None,
            out: None,
        }
    }

    fn with_report<T: Serialize>(mut self, common: &Common, report: &T) -> Failure {
        self.output = Some(to_json(report));
        self.out = common.out.clone();
        self
    }
}

pub fn run(command: &Command) -> Result<Vec<String>, Failure> {
    match command {
        Command::Analyze(c) => analyze(c),
        Command::Symmetries(c) => symmetries(c),
        Command::Reduce(r) => reduce(r),
        Command::Integrate(i) => integrate_cmd(i),
    }
}

/// Writes `text` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn write_output(common: &Common, text: &str) -> Result<(), Failure> {
    emit(common.out.as_deref(), text).map_err(|e| Failure::input(format!("cannot write output: {e}")))
}

fn parse_domain_override(arg: &str) -> Result<(String, Interval), String> {
    let (name, range) = arg
        .split_once('=')
        .ok_or_else(|| format!("domain override `{arg}` is not NAME=LO,HI"))?;
    let (lo, hi) = range
        .split_once(',')
        .ok_or_else(|| format!("domain override `{arg}` is not NAME=LO,HI"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound in `{arg}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound in `{arg}`"))?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(format!("empty interval in `{arg}`"));
    }
    Ok((name.trim().to_string(), Interval::new(lo, hi)))
}

fn parse_numbers(list: &str, what: &str) -> Result<Vec<f64>, Failure> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::input(format!("bad number `{}` in {what}", s.trim())))
        })
        .collect()
}

/// Loads the problem, applies domain overrides and builds the Pontryagin system.
fn load(common: &Common) -> Result<PontryaginSystem, Failure> {
    let mut problem = load_problem(&common.problem).map_err(Failure::input)?;
    for arg in &common.domain {
        let (name, interval) = parse_domain_override(arg).map_err(Failure::input)?;
        if name == "*" {
            problem.domain = problem.domain.clone().with_default(interval);
        } else {
            problem.domain.set(&name, interval);
        }
    }
    build_pontryagin(&problem).map_err(Failure::input)
}

#[derive(Serialize)]
struct SystemSummary<'a> {
    states: &'a [String],
    costates: &'a [String],
    controls: &'a [String],
    hamiltonian: &'a Expr,
    chi: &'a [Expr],
    w: &'a [Vec<Expr>],
    holonomic: &'a [Expr],
}

impl<'a> SystemSummary<'a> {
    fn of(sys: &'a PontryaginSystem) -> Self {
        SystemSummary {
            states: sys.states(),
            costates: sys.costates(),
            controls: sys.controls(),
            hamiltonian: sys.hamiltonian(),
            chi: sys.chi(),
            w: sys.w(),
            holonomic: sys.holonomic(),
        }
    }
}

#[derive(Serialize)]
struct LevelOut<'a> {
    index: usize,
    constraints: &'a [Expr],
}

#[derive(Serialize)]
struct LadderOut<'a> {
    levels: Vec<LevelOut<'a>>,
    steps: &'a [StepReport],
    stabilized: bool,
    final_level_index: usize,
    multipliers: MultiplierStatus,
}

impl<'a> LadderOut<'a> {
    fn of(l: &'a ConstraintLadder) -> Self {
        LadderOut {
            levels: l
                .levels
                .iter()
                .map(|lv| LevelOut {
                    index: lv.index,
                    constraints: &lv.constraints,
                })
                .collect(),
            steps: &l.steps,
            stabilized: l.stabilized,
            final_level_index: l.final_level_index,
            multipliers: l.multipliers,
        }
    }
}

#[derive(Serialize)]
struct ErrorOut {
    kind: &'static str,
    message: String,
}

#[derive(Serialize)]
struct AnalyzeOut<'a> {
    schema: u32,
    command: &'static str,
    config: &'a AnalysisConfig,
    system: SystemSummary<'a>,
    regularity: &'a RegularityReport,
    ladder: Option<LadderOut<'a>>,
    error: Option<ErrorOut>,
}

fn ladder_failure(e: &LadderError) -> (i32, &'static str) {
    if e.is_rank_violation() {
        (EXIT_RANK, "rank_violation")
    } else if matches!(e, LadderError::Sampling { source: SamplingFailure::Infeasible { .. }, .. }) {
        (EXIT_INFEASIBLE, "infeasible")
    } else {
        (EXIT_INPUT, "input")
    }
}

fn regularity_warnings(report: &RegularityReport) -> Vec<String> {
    if report.classification == Regularity::Mixed {
        report.warning.iter().cloned().collect()
    } else {
        Vec::new()
    }
}

fn analyze(common: &Common) -> Result<Vec<String>, Failure> {
    let cfg = common.config();
    let sys = load(common)?;
    let regularity = classify_regularity(&sys, sys.domain(), cfg.trials, &cfg).map_err(Failure::input)?;
    let ladder = run_ladder(&sys, sys.domain(), &cfg);
    let mut out = AnalyzeOut {
        schema: SCHEMA,
        command: "analyze",
        config: &cfg,
        system: SystemSummary::of(&sys),
        regularity: &regularity,
        ladder: None,
        error: None,
    };
    match &ladder {
        Ok(l) => {
            out.ladder = Some(LadderOut::of(l));
            write_output(common, &to_json(&out))?;
            let mut warnings = regularity_warnings(&regularity);
            if !l.stabilized {
                warnings.push(format!("constraint ladder did not stabilize within {} levels", cfg.max_levels));
            }
            Ok(warnings)
        }
        Err(e) => {
            let (code, kind) = ladder_failure(e);
            out.error = Some(ErrorOut {
                kind,
                message: e.to_string(),
            });
            Err(Failure {
                code,
                message: e.to_string(),
                output: None,
                out: None,
            }
            .with_report(common, &out))
        }
    }
}

#[derive(Serialize)]
struct SymmetryOut<'a> {
    #[serde(flatten)]
    report: &'a SymmetryReport,
    lift: Vec<Expr>,
    lifted_residual_norm: f64,
    lifted_is_symmetry: bool,
}

#[derive(Serialize)]
struct SymmetriesOut<'a> {
    schema: u32,
    command: &'static str,
    config: &'a AnalysisConfig,
    symmetries: Vec<SymmetryOut<'a>>,
}

fn symmetries(common: &Common) -> Result<Vec<String>, Failure> {
    let cfg = common.config();
    let sys = load(common)?;
    let generators = &sys.problem().symmetries;
    let mut reports = Vec::with_capacity(generators.len());
    let mut lifted = Vec::with_capacity(generators.len());
    for z in generators {
        reports.push(check_symmetry(z, &sys, sys.domain(), &cfg).map_err(Failure::input)?);
        lifted.push(check_lifted(z, &sys, sys.domain(), &cfg).map_err(Failure::input)?);
    }
    let out = SymmetriesOut {
        schema: SCHEMA,
        command: "symmetries",
        config: &cfg,
        symmetries: generators
            .iter()
            .zip(&reports)
            .zip(&lifted)
            .map(|((z, report), &(norm, ok))| SymmetryOut {
                report,
                lift: lift(z, sys.states()).components(),
                lifted_residual_norm: norm,
                lifted_is_symmetry: ok,
            })
            .collect(),
    };
    write_output(common, &to_json(&out))?;
    let mut warnings = Vec::new();
    for (r, (_, lifted_ok)) in reports.iter().zip(&lifted) {
        if r.is_symmetry != *lifted_ok {
            warnings.push(format!("generator `{}`: the two symmetry criteria disagree", r.name));
        }
    }
    Ok(warnings)
}

/// Constraints of ladder levels `1..=level`, or none for level 0.
fn ladder_constraints(sys: &PontryaginSystem, level: usize, cfg: &AnalysisConfig) -> Result<Vec<Expr>, LadderError> {
    if level == 0 {
        return Ok(Vec::new());
    }
    let ladder = run_ladder(sys, sys.domain(), cfg)?;
    Ok(ladder.truncated(level).constraints())
}

#[derive(Serialize)]
struct InfeasibleOut<'a> {
    schema: u32,
    command: &'static str,
    infeasible: bool,
    mu: &'a [f64],
    message: String,
}

#[derive(Serialize)]
struct ReduceOut<'a> {
    schema: u32,
    command: &'static str,
    config: &'a AnalysisConfig,
    generators: Vec<&'a str>,
    momenta: Vec<Expr>,
    level: usize,
    constraints: &'a [Expr],
    mu_auto: bool,
    report: &'a LevelSetReport,
}

fn momentum_failure(common: &Common, e: MomentumError) -> Failure {
    match e {
        MomentumError::Infeasible { ref mu, .. } => {
            let report = InfeasibleOut {
                schema: SCHEMA,
                command: "reduce",
                infeasible: true,
                mu,
                message: e.to_string(),
            };
            Failure {
                code: EXIT_INFEASIBLE,
                message: e.to_string(),
                output: None,
                out: None,
            }
            .with_report(common, &report)
        }
        other => Failure::input(other),
    }
}

fn reduce(args: &ReduceArgs) -> Result<Vec<String>, Failure> {
    let common = &args.common;
    let cfg = common.config();
    if args.count == 0 {
        return Err(Failure::input("--count must be at least 1"));
    }
    let sys = load(common)?;
    let generators: &[SymmetryGenerator] = &sys.problem().symmetries;
    let j = build_momentum_map(generators, &sys, sys.domain(), &cfg).map_err(|e| momentum_failure(common, e))?;
    let constraints = ladder_constraints(&sys, args.level, &cfg).map_err(|e| {
        let (code, _) = ladder_failure(&e);
        Failure {
            code,
            message: e.to_string(),
            output: None,
            out: None,
        }
    })?;
    let mu_auto = args.mu.trim() == "auto";
    let mu = if mu_auto {
        auto_mu(&j, &constraints, &sys, sys.domain(), &cfg).map_err(|e| momentum_failure(common, e))?
    } else {
        parse_numbers(&args.mu, "--mu")?
    };
    let points = sample_level_set(&j, &mu, &constraints, &sys, sys.domain(), args.count, &cfg)
        .map_err(|e| momentum_failure(common, e))?;
    let report = rank_analysis(&j, &mu, &points, &constraints, &sys, &cfg).map_err(|e| momentum_failure(common, e))?;
    let out = ReduceOut {
        schema: SCHEMA,
        command: "reduce",
        config: &cfg,
        generators: generators.iter().map(|z| z.name.as_str()).collect(),
        momenta: j.exprs(),
        level: args.level,
        constraints: &constraints,
        mu_auto,
        report: &report,
    };
    write_output(common, &to_json(&out))?;
    Ok(report.warning.iter().cloned().collect())
}

fn integrate_cmd(args: &IntegrateArgs) -> Result<Vec<String>, Failure> {
    let common = &args.common;
    let cfg = common.config();
    let sys = load(common)?;
    let ladder = run_ladder(&sys, sys.domain(), &cfg).map_err(|e| {
        let (code, _) = ladder_failure(&e);
        Failure {
            code,
            message: e.to_string(),
            output: None,
            out: None,
        }
    })?;
    let x0 = if args.from.trim() == "auto" {
        let x = ladder
            .final_points
            .first()
            .ok_or_else(|| Failure::input("no feasible starting point was sampled"))?;
        sys.point(x)
    } else {
        let x = parse_numbers(&args.from, "--from")?;
        if x.len() != sys.dim() {
            return Err(Failure::input(format!(
                "--from has {} values; expected {} ({})",
                x.len(),
                sys.dim(),
                sys.canonical_names().join(", ")
            )));
        }
        PhasePoint::from_flat(&x, sys.n_states(), sys.n_controls())
    };
    let verified: Vec<SymmetryGenerator> = sys
        .problem()
        .symmetries
        .iter()
        .filter_map(|z| match check_symmetry(z, &sys, sys.domain(), &cfg) {
            Ok(r) if r.is_symmetry => Some(Ok(z.clone())),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_, _>>()
        .map_err(Failure::input)?;
    let j = (!verified.is_empty()).then(|| MomentumMap::unchecked(&verified, &sys));
    let icfg = IntegratorConfig {
        retraction: match args.retraction {
            RetractionArg::Auto => None,
            RetractionArg::On => Some(true),
            RetractionArg::Off => Some(false),
        },
        gauge: match args.gauge {
            GaugeArg::Strict => Gauge::Strict,
            GaugeArg::Zero => Gauge::Zero,
        },
        ..IntegratorConfig::span(args.t0, args.t1, args.step)
    };
    let traj = integrate(&sys, &ladder, j.as_ref(), &x0, &icfg).map_err(Failure::input)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(|e| Failure::input(format!("cannot format CSV: {e}")))?;
    write_output(common, &String::from_utf8(csv).expect("CSV is UTF-8"))?;
    if let Some(path) = &args.report {
        #[derive(Serialize)]
        struct ReportOut<'a> {
            schema: u32,
            command: &'static str,
            integrator: &'a IntegratorConfig,
            mode: presym_core::dynamics::FieldMode,
            retraction: bool,
            #[serde(flatten)]
            report: presym_core::ConservationReport,
        }
        let out = ReportOut {
            schema: SCHEMA,
            command: "integrate",
            integrator: &icfg,
            mode: traj.mode,
            retraction: traj.retraction,
            report: conservation_report(&traj),
        };
        emit(Some(path), &to_json(&out)).map_err(|e| Failure::input(format!("cannot write report: {e}")))?;
    }
    let mut warnings = Vec::new();
    if traj.termination != presym_core::Termination::Completed {
        warnings.push(format!("integration stopped early: {}", traj.termination));
    }
    Ok(warnings)
}
