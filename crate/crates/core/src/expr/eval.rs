use super::{BinaryOp, Expr, Node, UnaryOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
}

impl EvalError {
    pub(crate) fn domain(subexpr: &Expr, reason: &str) -> EvalError {
        EvalError::Domain {
            subexpr: subexpr.to_string(),
            reason: reason.to_string(),
        }
    }
}

/// Ordered name/value bindings. The order is the canonical coordinate
/// order used for Jacobians; names are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableTable {
    entries: Vec<(String, f64)>,
}

impl VariableTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from `(name, value)` pairs. Panics on a duplicate name.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, f64)]) -> Self {
        let mut t = Self::new();
        for (n, v) in pairs {
            t.bind(n.as_ref(), *v);
        }
        t
    }

    /// Builds a table from parallel name/value slices.
    pub fn from_slices<S: AsRef<str>>(names: &[S], values: &[f64]) -> Self {
        assert_eq!(names.len(), values.len(), "name/value length mismatch");
        let mut t = Self::new();
        for (n, v) in names.iter().zip(values) {
            t.bind(n.as_ref(), *v);
        }
        t
    }

    /// Appends a binding. Panics if `name` is already bound.
    pub fn bind(&mut self, name: &str, value: f64) {
        assert!(self.get(name).is_none(), "duplicate variable `{name}`");
        self.entries.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn apply_unary(op: UnaryOp, x: f64) -> Result<f64, &'static str> {
    Ok(match op {
        UnaryOp::Neg => -x,
        UnaryOp::Sin => x.sin(),
        UnaryOp::Cos => x.cos(),
        UnaryOp::Exp => x.exp(),
        UnaryOp::Ln => {
            if x <= 0.0 {
                return Err("logarithm of a non-positive value");
            }
            x.ln()
        }
        UnaryOp::Sqrt => {
            if x < 0.0 {
                return Err("square root of a negative value");
            }
            x.sqrt()
        }
    })
}

pub(crate) fn apply_pow(base: f64, exponent: f64) -> Result<f64, &'static str> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err("division by zero");
        }
        Ok(base.powi(exponent as i32))
    } else {
        if base < 0.0 {
            return Err("fractional power of a negative value");
        }
        if base == 0.0 && exponent < 0.0 {
            return Err("division by zero");
        }
        Ok(base.powf(exponent))
    }
}

pub(crate) fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, &'static str> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err("division by zero");
            }
            a / b
        }
        BinaryOp::Pow => return apply_pow(a, b),
    })
}

/// Evaluates `e` in double precision. Unbound names are an error, never zero.
pub fn eval(e: &Expr, vars: &VariableTable) -> Result<f64, EvalError> {
    match e.node() {
        Node::Const(c) => Ok(*c),
        Node::Var(name) => vars
            .get(name)
            .ok_or_else(|| EvalError::Unbound(name.to_string())),
        Node::Unary(op, a) => {
            let x = eval(a, vars)?;
            apply_unary(*op, x).map_err(|r| EvalError::domain(e, r))
        }
        Node::Binary(op, a, b) => {
            let x = eval(a, vars)?;
            let y = eval(b, vars)?;
            apply_binary(*op, x, y).map_err(|r| EvalError::domain(e, r))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn arithmetic() {
        let vars = VariableTable::from_pairs(&[("p1", 2.0), ("u1", 3.0)]);
        assert_eq!(eval(&parse("p1*u1").unwrap(), &vars).unwrap(), 6.0);
        assert_eq!(eval(&parse("p1^3 - u1/2").unwrap(), &vars).unwrap(), 6.5);
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let err = eval(&parse("q1").unwrap(), &VariableTable::new()).unwrap_err();
        assert_eq!(err, EvalError::Unbound("q1".into()));
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let vars = VariableTable::from_pairs(&[("q1", -1.0)]);
        match eval(&parse("1 + sqrt(q1)").unwrap(), &vars).unwrap_err() {
            EvalError::Domain { subexpr, .. } => assert_eq!(subexpr, "sqrt(q1)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(eval(&parse("ln(q1 + 1)").unwrap(), &vars).is_err());
        assert!(eval(&parse("1/(q1 + 1)").unwrap(), &vars).is_err());
        assert!(eval(&parse("q1^(1/2)").unwrap(), &vars).is_err());
        assert_eq!(eval(&parse("q1^3").unwrap(), &vars).unwrap(), -1.0);
    }

    #[test]
    #[should_panic(expected = "duplicate variable")]
    fn duplicate_names_are_rejected() {
        VariableTable::from_pairs(&[("a", 1.0), ("a", 2.0)]);
    }
}
