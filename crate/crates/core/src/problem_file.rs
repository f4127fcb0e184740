//! Section-based text format for control problems.
//!
//! ```text
//! # comment
//! states: q1 q2
//! controls: u1
//! dynamics:
//!   q1' = q2
//!   q2' = u1
//! lagrangian: 0.5*u1^2
//! holonomic:            # optional, one expression per line
//! time_dependent: false # optional
//! p0: 1                 # optional; 0 (abnormal) is rejected
//! symmetries:           # optional
//!   symmetry shift:
//!     xi = (1, 0)
//!     zeta = (0)        # optional, defaults to zeros
//! domain:               # optional sampling boxes
//!   * in [-1, 1]
//!   p1 in [-0.5, 0.5]
//! ```
//!
//! Section content may start on the header line or on the following lines.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::expr::{parse, Domain, Expr, Interval};
use crate::problem::{is_costate_name, ControlProblem, Violation, TIME};
use crate::symmetry::SymmetryGenerator;

const SECTIONS: &[&str] = &[
    "states",
    "controls",
    "dynamics",
    "lagrangian",
    "holonomic",
    "time_dependent",
    "p0",
    "symmetries",
    "domain",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemFileError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid problem: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// A piece of text with its 1-based line and the column of its first byte.
#[derive(Debug, Clone, Copy)]
struct Span<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Span<'a> {
    fn err(&self, message: impl fmt::Display) -> ProblemFileError {
        ProblemFileError::Syntax {
            line: self.line,
            column: self.column,
            message: message.to_string(),
        }
    }

    fn err_at(&self, offset_chars: usize, message: impl fmt::Display) -> ProblemFileError {
        ProblemFileError::Syntax {
            line: self.line,
            column: self.column + offset_chars,
            message: message.to_string(),
        }
    }

    fn trimmed(self) -> Span<'a> {
        let start = self.text.len() - self.text.trim_start().len();
        Span {
            text: self.text.trim(),
            line: self.line,
            column: self.column + self.text[..start].chars().count(),
        }
    }

    fn slice(self, from: usize, to: usize) -> Span<'a> {
        Span {
            text: &self.text[from..to],
            line: self.line,
            column: self.column + self.text[..from].chars().count(),
        }
        .trimmed()
    }

    fn expr(self) -> Result<Expr, ProblemFileError> {
        if self.text.is_empty() {
            return Err(self.err("expected an expression"));
        }
        parse(self.text).map_err(|e| self.err_at(e.offset.saturating_sub(1), &e.message))
    }
}

struct Section<'a> {
    name: &'a str,
    header: Span<'a>,
    lines: Vec<Span<'a>>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split_sections(text: &str) -> Result<Vec<Section<'_>>, ProblemFileError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let span = Span {
            text: strip_comment(raw),
            line: i + 1,
            column: 1,
        }
        .trimmed();
        if span.text.is_empty() {
            continue;
        }
        let header = span.text.split_once(':').and_then(|(name, _)| {
            let name = name.trim();
            SECTIONS.contains(&name).then_some(name)
        });
        if let Some(name) = header {
            if sections.iter().any(|s| s.name == name) {
                return Err(span.err(format!("section `{name}` appears twice")));
            }
            let colon = span.text.find(':').unwrap();
            let rest = span.slice(colon + 1, span.text.len());
            sections.push(Section {
                name,
                header: span,
                lines: if rest.text.is_empty() { Vec::new() } else { vec![rest] },
            });
        } else {
            match sections.last_mut() {
                Some(s) => s.lines.push(span),
                None => return Err(span.err("expected a section header such as `states:`")),
            }
        }
    }
    Ok(sections)
}

fn names(section: &Section) -> Result<Vec<String>, ProblemFileError> {
    let mut out = Vec::new();
    for line in &section.lines {
        let mut offset = 0;
        for token in line.text.split(|c: char| c.is_whitespace() || c == ',') {
            if !token.is_empty() {
                let valid = token.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && token.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !valid {
                    let at = line.text[offset..].find(token).map_or(0, |p| p + offset);
                    return Err(line.err_at(line.text[..at].chars().count(), format!("`{token}` is not a valid name")));
                }
                out.push(token.to_string());
            }
            offset += token.len() + 1;
        }
    }
    Ok(out)
}

fn single<'a>(section: &Section<'a>) -> Result<Span<'a>, ProblemFileError> {
    match section.lines.as_slice() {
        [one] => Ok(*one),
        [] => Err(section.header.err(format!("section `{}` is empty", section.name))),
        [_, extra, ..] => Err(extra.err(format!("section `{}` takes a single line", section.name))),
    }
}

/// Splits `(a, b(c, d), e)` at top-level commas.
fn tuple(span: Span<'_>) -> Result<Vec<Expr>, ProblemFileError> {
    let text = span.text;
    if !text.starts_with('(') || !text.ends_with(')') {
        return Err(span.err("expected a parenthesized list `( ... )`"));
    }
    let inner = span.slice(1, text.len() - 1);
    if inner.text.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = inner.text.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b',' if depth == 0 => {
                out.push(inner.slice(start, i).expr()?);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(inner.slice(start, inner.text.len()).expr()?);
    Ok(out)
}

fn number(span: Span<'_>) -> Result<f64, ProblemFileError> {
    let e = span.expr()?;
    crate::expr::simplify(&e)
        .as_const()
        .ok_or_else(|| span.err("expected a number"))
}

fn interval(span: Span<'_>) -> Result<Interval, ProblemFileError> {
    let t = span.text;
    if !t.starts_with('[') || !t.ends_with(']') {
        return Err(span.err("expected an interval `[lo, hi]`"));
    }
    let inner = span.slice(1, t.len() - 1);
    let Some(comma) = inner.text.find(',') else {
        return Err(inner.err("expected `lo, hi`"));
    };
    let lo = number(inner.slice(0, comma))?;
    let hi = number(inner.slice(comma + 1, inner.text.len()))?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(span.err(format!("empty interval [{lo}, {hi}]")));
    }
    Ok(Interval::new(lo, hi))
}

/// Parses and validates a problem.
pub fn parse_problem(text: &str) -> Result<ControlProblem, ProblemFileError> {
    let sections = split_sections(text)?;
    let get = |name: &str| sections.iter().find(|s| s.name == name);
    let eof = Span {
        text: "",
        line: text.lines().count().max(1),
        column: 1,
    };
    let require = |name: &str| get(name).ok_or_else(|| eof.err(format!("missing section `{name}`")));

    let states = names(require("states")?)?;
    let controls = match get("controls") {
        Some(s) => names(s)?,
        None => Vec::new(),
    };

    let time_dependent = match get("time_dependent") {
        None => false,
        Some(s) => match single(s)?.text {
            "true" => true,
            "false" => false,
            other => return Err(single(s)?.err(format!("expected true or false, got `{other}`"))),
        },
    };

    if let Some(s) = get("p0") {
        let span = single(s)?;
        let p0 = number(span)?;
        if p0 == 0.0 {
            return Err(span.err("abnormal extremals (p0 = 0) are out of scope"));
        }
        if p0 != 1.0 {
            return Err(span.err(format!("p0 must be 1, got {p0}")));
        }
    }

    let dyn_section = require("dynamics")?;
    let mut dynamics: Vec<Option<Expr>> = vec![None; states.len()];
    for line in &dyn_section.lines {
        let Some(eq) = line.text.find('=') else {
            return Err(line.err("expected `name' = expression`"));
        };
        let lhs = line.slice(0, eq);
        let Some(name) = lhs.text.strip_suffix('\'') else {
            return Err(lhs.err("expected `name'` on the left of `=`"));
        };
        let name = name.trim_end();
        let Some(i) = states.iter().position(|s| s == name) else {
            return Err(lhs.err(format!("`{name}` is not a declared state")));
        };
        if dynamics[i].is_some() {
            return Err(lhs.err(format!("dynamics of `{name}` given twice")));
        }
        dynamics[i] = Some(line.slice(eq + 1, line.text.len()).expr()?);
    }
    let mut missing = Vec::new();
    for (s, d) in states.iter().zip(&dynamics) {
        if d.is_none() {
            missing.push(s.as_str());
        }
    }
    if !missing.is_empty() {
        return Err(dyn_section.header.err(format!("no dynamics for {}", missing.join(", "))));
    }
    let dynamics: Vec<Expr> = dynamics.into_iter().flatten().collect();

    let lagrangian = single(require("lagrangian")?)?.expr()?;

    let holonomic = match get("holonomic") {
        Some(s) => s.lines.iter().map(|l| l.expr()).collect::<Result<_, _>>()?,
        None => Vec::new(),
    };

    let symmetries = match get("symmetries") {
        Some(s) => parse_symmetries(s, controls.len())?,
        None => Vec::new(),
    };

    let mut domain = Domain::new();
    if let Some(s) = get("domain") {
        let m = states.len() + usize::from(time_dependent);
        let known: BTreeSet<&str> = states.iter().chain(&controls).map(String::as_str).collect();
        for line in &s.lines {
            let Some(at) = line.text.find(" in ") else {
                return Err(line.err("expected `name in [lo, hi]`"));
            };
            let name = line.slice(0, at);
            let iv = interval(line.slice(at + 4, line.text.len()))?;
            let costate_ok = is_costate_name(name.text)
                && name.text[1..].parse::<usize>().is_ok_and(|i| (1..=m).contains(&i));
            if name.text == "*" {
                domain = domain.with_default(iv);
            } else if known.contains(name.text) || costate_ok || (time_dependent && name.text == TIME) {
                domain.set(name.text, iv);
            } else {
                return Err(name.err(format!("unknown variable `{}` in domain", name.text)));
            }
        }
    }

    let problem = ControlProblem {
        states,
        controls,
        dynamics,
        lagrangian,
        holonomic,
        time_dependent,
        symmetries,
        domain,
    };
    let violations = problem.validate();
    if violations.is_empty() {
        Ok(problem)
    } else {
        Err(ProblemFileError::Invalid(violations))
    }
}

fn parse_symmetries(section: &Section, n_controls: usize) -> Result<Vec<SymmetryGenerator>, ProblemFileError> {
    let mut out: Vec<(Span, SymmetryGenerator, bool)> = Vec::new();
    for line in &section.lines {
        if let Some(rest) = line.text.strip_prefix("symmetry ") {
            let Some(name) = rest.trim().strip_suffix(':') else {
                return Err(line.err("expected `symmetry NAME:`"));
            };
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(line.err(format!("`{name}` is not a valid generator name")));
            }
            if out.iter().any(|(_, z, _)| z.name == name) {
                return Err(line.err(format!("generator `{name}` declared twice")));
            }
            out.push((*line, SymmetryGenerator::new(name, Vec::new(), vec![Expr::zero(); n_controls]), false));
            continue;
        }
        let Some((_, current, has_xi)) = out.last_mut() else {
            return Err(line.err("expected `symmetry NAME:` before components"));
        };
        let Some(eq) = line.text.find('=') else {
            return Err(line.err("expected `xi = (...)` or `zeta = (...)`"));
        };
        let key = line.slice(0, eq);
        let value = tuple(line.slice(eq + 1, line.text.len()))?;
        match key.text {
            "xi" => {
                current.xi = value;
                *has_xi = true;
            }
            "zeta" => current.zeta = value,
            other => return Err(key.err(format!("unknown generator component `{other}`"))),
        }
    }
    out.into_iter()
        .map(|(span, z, has_xi)| {
            if has_xi {
                Ok(z)
            } else {
                Err(span.err(format!("generator `{}` has no `xi`", z.name)))
            }
        })
        .collect()
}

pub fn load_problem(path: &Path) -> Result<ControlProblem, ProblemFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| ProblemFileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_problem(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LQ: &str = "states: q1\ncontrols: u1\ndynamics:\n  q1' = u1\nlagrangian: 0.5*u1^2\n";

    #[test]
    fn minimal_problem() {
        let p = parse_problem(LQ).unwrap();
        assert_eq!(p.states, ["q1"]);
        assert_eq!(p.dynamics[0].to_string(), "u1");
        assert!(p.symmetries.is_empty());
    }

    #[test]
    fn syntax_error_has_position() {
        let text = LQ.replace("0.5*u1^2", "0.5*u1^");
        match parse_problem(&text).unwrap_err() {
            ProblemFileError::Syntax { line, column, .. } => {
                assert_eq!(line, 5);
                assert_eq!(column, 20);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn abnormal_case_rejected() {
        let err = parse_problem(&format!("{LQ}p0: 0\n")).unwrap_err();
        assert!(err.to_string().contains("abnormal extremals"));
    }

    #[test]
    fn missing_dynamics_and_unknown_variables() {
        let err = parse_problem("states: a b\ndynamics:\n a' = b\nlagrangian: 1\n").unwrap_err();
        assert!(err.to_string().contains("no dynamics for b"), "{err}");
        let err = parse_problem("states: a\ndynamics:\n a' = z\nlagrangian: 1\n").unwrap_err();
        assert!(matches!(err, ProblemFileError::Invalid(_)));
    }

    #[test]
    fn symmetries_and_domain() {
        let text = format!(
            "{LQ}symmetries:\n  symmetry shift:\n    xi = (1)\n  symmetry other:\n    xi = (q1)\n    zeta = (u1)\ndomain:\n  * in [-2, 2]\n  p1 in [-0.5, 0.5]\n"
        );
        let p = parse_problem(&text).unwrap();
        assert_eq!(p.symmetries.len(), 2);
        assert_eq!(p.symmetries[0].zeta, vec![Expr::zero()]);
        assert_eq!(p.symmetries[1].zeta[0].to_string(), "u1");
        assert_eq!(p.domain.interval("p1"), Interval::new(-0.5, 0.5));
        assert_eq!(p.domain.interval("q1"), Interval::new(-2.0, 2.0));
    }

    #[test]
    fn tuples_split_at_top_level() {
        let span = Span {
            text: "(atan(1), sin(a*b), 0)",
            line: 1,
            column: 1,
        };
        assert!(tuple(span).is_err());
        let span = Span {
            text: "(a^(1/2), sin(a*b), 0)",
            line: 1,
            column: 1,
        };
        assert_eq!(tuple(span).unwrap().len(), 3);
    }
}
