//! Sampled numerical decisions: "does this expression vanish on a set?"

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eval::{apply_binary, apply_unary};
use super::{BinaryOp, EvalError, Expr, Layout, Node, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * rng.random::<f64>()
        }
    }
}

/// Per-variable sampling box. Unlisted variables use the default interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    default: Interval,
    boxes: BTreeMap<String, Interval>,
}

impl Default for Domain {
    fn default() -> Self {
        Domain {
            default: Interval::new(-1.0, 1.0),
            boxes: BTreeMap::new(),
        }
    }
}

impl Domain {
    pub fn new() -> Domain {
        Domain::default()
    }

    pub fn with_default(mut self, interval: Interval) -> Domain {
        self.default = interval;
        self
    }

    pub fn set(&mut self, name: &str, interval: Interval) {
        self.boxes.insert(name.to_string(), interval);
    }

    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Domain {
        self.set(name, Interval::new(lo, hi));
        self
    }

    pub fn default_interval(&self) -> Interval {
        self.default
    }

    pub fn interval(&self, name: &str) -> Interval {
        self.boxes.get(name).copied().unwrap_or(self.default)
    }

    pub fn explicit(&self) -> impl Iterator<Item = (&str, Interval)> {
        self.boxes.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Uniform sample of the box over `names`, in order.
    pub fn sample<S: AsRef<str>>(&self, names: &[S], rng: &mut ChaCha8Rng) -> Vec<f64> {
        names
            .iter()
            .map(|n| self.interval(n.as_ref()).sample(rng))
            .collect()
    }

    pub fn contains<S: AsRef<str>>(&self, names: &[S], x: &[f64], slack: f64) -> bool {
        names
            .iter()
            .zip(x)
            .all(|(n, v)| self.interval(n.as_ref()).contains(*v, slack))
    }
}

/// Deterministic generator for one sampling purpose. Distinct `stream`s
/// derived from the same master seed never share a sequence.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Value together with a cancellation-free magnitude: the same tree
/// evaluated with every sum replaced by a sum of magnitudes.
pub(crate) fn value_and_magnitude(
    e: &Expr,
    lookup: &dyn Fn(&str) -> Option<f64>,
) -> Result<(f64, f64), EvalError> {
    match e.node() {
        Node::Const(c) => Ok((*c, c.abs())),
        Node::Var(name) => {
            let v = lookup(name).ok_or_else(|| EvalError::Unbound(name.to_string()))?;
            Ok((v, v.abs()))
        }
        Node::Unary(UnaryOp::Neg, a) => {
            let (v, m) = value_and_magnitude(a, lookup)?;
            Ok((-v, m))
        }
        Node::Unary(op, a) => {
            let (v, _) = value_and_magnitude(a, lookup)?;
            let r = apply_unary(*op, v).map_err(|r| EvalError::domain(e, r))?;
            Ok((r, r.abs()))
        }
        Node::Binary(op, a, b) => {
            let (va, ma) = value_and_magnitude(a, lookup)?;
            let (vb, mb) = value_and_magnitude(b, lookup)?;
            let v = apply_binary(*op, va, vb).map_err(|r| EvalError::domain(e, r))?;
            let m = match op {
                BinaryOp::Add | BinaryOp::Sub => ma + mb,
                BinaryOp::Mul => ma * mb,
                BinaryOp::Div => ma / vb.abs(),
                BinaryOp::Pow if vb > 0.0 => ma.powf(vb),
                BinaryOp::Pow => v.abs(),
            };
            Ok((v, m))
        }
    }
}

fn small(value: f64, magnitude: f64, tol: f64) -> bool {
    value.abs() <= tol * (1.0 + magnitude)
}

/// `true` iff `|e(x)| <= tol * (1 + magnitude(e, x))` at `trials` points
/// drawn uniformly from `domain` over the variables `vars`.
pub fn numerically_zero<S: AsRef<str>>(
    e: &Expr,
    vars: &[S],
    trials: usize,
    tol: f64,
    domain: &Domain,
    seed: u64,
) -> Result<bool, EvalError> {
    assert!(trials >= 1, "numerically_zero needs at least one trial");
    assert!(tol > 0.0, "numerically_zero needs a positive tolerance");
    if let Some(c) = e.as_const() {
        return Ok(small(c, c.abs(), tol));
    }
    let layout = Layout::new(vars);
    let mut rng = seeded_rng(seed, 0x6e7a);
    for _ in 0..trials {
        let x = domain.sample(vars, &mut rng);
        let lookup = |n: &str| layout.index_of(n).map(|i| x[i]);
        let (v, m) = value_and_magnitude(e, &lookup)?;
        if !small(v, m, tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Same criterion as [`numerically_zero`] on an explicit point set.
pub fn vanishes_on(e: &Expr, layout: &Layout, points: &[Vec<f64>], tol: f64) -> Result<bool, EvalError> {
    if let Some(c) = e.as_const() {
        return Ok(small(c, c.abs(), tol));
    }
    for x in points {
        let lookup = |n: &str| layout.index_of(n).map(|i| x[i]);
        let (v, m) = value_and_magnitude(e, &lookup)?;
        if !small(v, m, tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn nz(src: &str, vars: &[&str], tol: f64) -> bool {
        numerically_zero(&parse(src).unwrap(), vars, 50, tol, &Domain::new(), 0).unwrap()
    }

    #[test]
    fn identically_zero() {
        assert!(nz("q1 - q1", &["q1"], 1e-12));
        assert!(nz("sin(q1)^2 + cos(q1)^2 - 1", &["q1"], 1e-12));
    }

    #[test]
    fn below_tolerance() {
        assert!(nz("q1*1e-20", &["q1"], 1e-12));
    }

    #[test]
    fn non_identity() {
        assert!(!nz("p1 - u1", &["p1", "u1"], 1e-9));
    }

    #[test]
    fn domain_errors_propagate() {
        let e = parse("ln(q1)").unwrap();
        let dom = Domain::new().with("q1", -2.0, -1.0);
        assert!(numerically_zero(&e, &["q1"], 5, 1e-9, &dom, 0).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let dom = Domain::new().with("a", 2.0, 3.0);
        let mut r1 = seeded_rng(7, 1);
        let mut r2 = seeded_rng(7, 1);
        let mut r3 = seeded_rng(7, 2);
        let a = dom.sample(&["a", "b"], &mut r1);
        assert_eq!(a, dom.sample(&["a", "b"], &mut r2));
        assert_ne!(a, dom.sample(&["a", "b"], &mut r3));
        assert!((2.0..=3.0).contains(&a[0]) && (-1.0..=1.0).contains(&a[1]));
    }
}
