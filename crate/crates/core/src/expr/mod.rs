//! Symbolic scalar expressions over named real variables.
//!
//! An [`Expr`] is an immutable tree built from constants, variables, the
//! unary functions `neg sin cos exp ln sqrt` and the binary operators
//! `+ - * / ^`. Powers only take constant exponents, which keeps [`diff`]
//! closed over the tree. Cloning is an `Arc` bump, so expressions can be
//! shared freely between threads.

mod compile;
mod diff;
mod eval;
mod numeric;
mod parse;
mod simplify;

use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

pub use compile::{CompiledExpr, CompiledVec, Layout};
pub use diff::{diff, gradient};
pub use eval::{eval, EvalError, VariableTable};
pub use numeric::{numerically_zero, seeded_rng, vanishes_on, Domain, Interval};
pub use parse::{parse, ParseError};
pub use simplify::simplify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub fn from_function_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "ln" => Some(UnaryOp::Ln),
            "sqrt" => Some(UnaryOp::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// Function names recognised by the parser.
pub const FUNCTION_NAMES: [&str; 5] = ["sin", "cos", "exp", "ln", "sqrt"];

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Arc<str>),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("exponent must be a constant, found `{0}`")]
pub struct NonConstantExponent(pub String);

/// Immutable expression tree. Equality is structural.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr(Arc::new(Node::Const(value)))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(name: &str) -> Expr {
        Expr(Arc::new(Node::Var(Arc::from(name))))
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Expr {
        Expr(Arc::new(Node::Unary(op, arg)))
    }

    /// Builds a binary node. `^` requires a constant right child.
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Result<Expr, NonConstantExponent> {
        if op == BinaryOp::Pow && rhs.as_const().is_none() {
            return Err(NonConstantExponent(rhs.to_string()));
        }
        Ok(Expr(Arc::new(Node::Binary(op, lhs, rhs))))
    }

    fn bin(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        debug_assert!(op != BinaryOp::Pow || rhs.as_const().is_some());
        Expr(Arc::new(Node::Binary(op, lhs, rhs)))
    }

    pub fn pow(self, exponent: f64) -> Expr {
        Expr::bin(BinaryOp::Pow, self, Expr::constant(exponent))
    }

    pub fn sin(self) -> Expr {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::unary(UnaryOp::Ln, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Sum of a list of expressions, `0` when empty. Not simplified.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut iter = terms.into_iter();
        match iter.next() {
            None => Expr::zero(),
            Some(first) => iter.fold(first, |acc, t| acc + t),
        }
    }

    /// Sorted set of variable names occurring in the tree.
    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(name) => {
                if !out.contains(&**name) {
                    out.insert(name.to_string());
                }
            }
            Node::Unary(_, a) => a.collect_variables(out),
            Node::Binary(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(v) => &**v == name,
            Node::Unary(_, a) => a.depends_on(name),
            Node::Binary(_, a, b) => a.depends_on(name) || b.depends_on(name),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Unary(_, a) => 1 + a.size(),
            Node::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Simultaneous substitution of variables by expressions, followed by
    /// [`simplify`]. Replacement expressions are not themselves rewritten,
    /// so `[(u1, a), (u2, u1)]` maps `u1 + u2` to `a + u1`.
    pub fn substitute(&self, bindings: &[(&str, Expr)]) -> Expr {
        simplify(&self.substitute_raw(bindings))
    }

    fn substitute_raw(&self, bindings: &[(&str, Expr)]) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(name) => bindings
                .iter()
                .find(|(n, _)| *n == &**name)
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| self.clone()),
            Node::Unary(op, a) => Expr::unary(*op, a.substitute_raw(bindings)),
            Node::Binary(op, a, b) => {
                Expr::bin(*op, a.substitute_raw(bindings), b.substitute_raw(bindings))
            }
        }
    }
}

/// Free function form of [`Expr::substitute`].
pub fn substitute(e: &Expr, bindings: &[(&str, Expr)]) -> Expr {
    e.substitute(bindings)
}

// Printing precedence levels. Anything printed below the level its
// context requires gets parenthesised.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if c.is_sign_negative() && *c != 0.0 => PREC_UNARY,
        Node::Const(_) | Node::Var(_) => PREC_ATOM,
        Node::Unary(UnaryOp::Neg, _) => PREC_UNARY,
        Node::Unary(..) => PREC_ATOM,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_SUM,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_PRODUCT,
        // A power may only stand where a factor is allowed.
        Node::Binary(BinaryOp::Pow, ..) => PREC_UNARY + 1,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e.node() {
        Node::Const(c) => write!(f, "{c}"),
        Node::Var(name) => write!(f, "{name}"),
        Node::Unary(UnaryOp::Neg, a) => {
            // `-2` would read back as the constant -2, not as a negation.
            if matches!(a.node(), Node::Const(c) if !c.is_sign_negative()) {
                write!(f, "-({a})")
            } else {
                write!(f, "-")?;
                write_at(f, a, PREC_UNARY)
            }
        }
        Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
        Node::Binary(op @ (BinaryOp::Add | BinaryOp::Sub), a, b) => {
            write_at(f, a, PREC_SUM)?;
            write!(f, " {} ", op.symbol())?;
            write_at(f, b, PREC_PRODUCT)
        }
        Node::Binary(op @ (BinaryOp::Mul | BinaryOp::Div), a, b) => {
            write_at(f, a, PREC_PRODUCT)?;
            write!(f, "{}", op.symbol())?;
            write_at(f, b, PREC_UNARY)
        }
        Node::Binary(BinaryOp::Pow, a, b) => {
            write_at(f, a, PREC_ATOM)?;
            let r = b.as_const().unwrap_or(f64::NAN);
            write!(f, "^{r}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::bin($op, self, rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::bin($op, self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::bin($op, self, Expr::constant(rhs))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::bin($op, Expr::constant(self), rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self.clone())
    }
}
