//! Structural simplification.
//!
//! The rewrite set is fixed:
//!
//! * constant folding of every operator whose operands are constants
//!   (skipped when the result would be a domain error or non-finite);
//! * `x + 0`, `x*0`, `x*1`, `x^0`, `x^1`, `0/x`, `x/1`, `--x`;
//! * sums are flattened into signed terms, each term is split into a
//!   constant coefficient and a residual product, and terms whose residual
//!   products are structurally identical are merged (so `a - a` is `0`);
//! * products are flattened and all constant factors (including negations)
//!   are folded into one leading coefficient.
//!
//! There is no factoring, expansion, or trigonometric identity. Rebuilt
//! sums keep the first-occurrence order of their terms with the constant
//! last; rebuilt products put the coefficient first. The output is a fixed
//! point: `simplify(simplify(e)) == simplify(e)`.

use super::eval::{apply_binary, apply_pow, apply_unary};
use super::{BinaryOp, Expr, Node, UnaryOp};

fn constant(c: f64) -> Expr {
    // Normalise -0.0 so structural equality is not sign-of-zero sensitive.
    Expr::constant(if c == 0.0 { 0.0 } else { c })
}

pub fn simplify(e: &Expr) -> Expr {
    match e.node() {
        Node::Const(c) => constant(*c),
        Node::Var(_) => e.clone(),
        Node::Unary(UnaryOp::Neg, a) => {
            let a = simplify(a);
            let mut coef = -1.0;
            let mut factors = Vec::new();
            collect_factors(&a, &mut coef, &mut factors);
            build_product(coef, factors)
        }
        Node::Unary(op, a) => {
            let a = simplify(a);
            if let Some(c) = a.as_const() {
                if let Ok(v) = apply_unary(*op, c) {
                    if v.is_finite() {
                        return constant(v);
                    }
                }
            }
            Expr::unary(*op, a)
        }
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => {
            let mut terms = Vec::new();
            let mut offset = 0.0;
            collect_terms(e, 1.0, &mut terms, &mut offset, true);
            build_sum(terms, offset)
        }
        Node::Binary(BinaryOp::Mul, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            let mut coef = 1.0;
            let mut factors = Vec::new();
            collect_factors(&a, &mut coef, &mut factors);
            collect_factors(&b, &mut coef, &mut factors);
            build_product(coef, factors)
        }
        Node::Binary(BinaryOp::Div, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (a.as_const(), b.as_const()) {
                (Some(x), Some(y)) => match apply_binary(BinaryOp::Div, x, y) {
                    Ok(v) if v.is_finite() => constant(v),
                    _ => a / b,
                },
                (_, Some(1.0)) => a,
                (_, Some(-1.0)) => simplify(&-a),
                (Some(0.0), _) => constant(0.0),
                _ => a / b,
            }
        }
        Node::Binary(BinaryOp::Pow, a, b) => {
            let a = simplify(a);
            let r = b.as_const().expect("constant exponent");
            if r == 0.0 {
                return constant(1.0);
            }
            if r == 1.0 {
                return a;
            }
            if let Some(c) = a.as_const() {
                if let Ok(v) = apply_pow(c, r) {
                    if v.is_finite() {
                        return constant(v);
                    }
                }
            }
            a.pow(r)
        }
    }
}

/// Flattens a sum into `(coefficient, residual)` terms. `raw` marks
/// subtrees that still need simplifying; once a child has been simplified
/// its own sums are already flat, so recursion continues on it directly.
fn collect_terms(e: &Expr, sign: f64, terms: &mut Vec<(f64, Expr)>, offset: &mut f64, raw: bool) {
    match e.node() {
        Node::Binary(BinaryOp::Add, a, b) => {
            collect_terms(a, sign, terms, offset, raw);
            collect_terms(b, sign, terms, offset, raw);
        }
        Node::Binary(BinaryOp::Sub, a, b) => {
            collect_terms(a, sign, terms, offset, raw);
            collect_terms(b, -sign, terms, offset, raw);
        }
        _ if raw => {
            let s = simplify(e);
            collect_terms(&s, sign, terms, offset, false);
        }
        Node::Const(c) => *offset += sign * c,
        Node::Unary(UnaryOp::Neg, a) => collect_terms(a, -sign, terms, offset, false),
        _ => {
            let mut coef = sign;
            let mut factors = Vec::new();
            collect_factors(e, &mut coef, &mut factors);
            if factors.is_empty() {
                *offset += coef;
                return;
            }
            let residual = build_product(1.0, factors);
            match terms.iter_mut().find(|(_, r)| *r == residual) {
                Some((c, _)) => *c += coef,
                None => terms.push((coef, residual)),
            }
        }
    }
}

fn collect_factors(e: &Expr, coef: &mut f64, factors: &mut Vec<Expr>) {
    match e.node() {
        Node::Binary(BinaryOp::Mul, a, b) => {
            collect_factors(a, coef, factors);
            collect_factors(b, coef, factors);
        }
        Node::Unary(UnaryOp::Neg, a) => {
            *coef = -*coef;
            collect_factors(a, coef, factors);
        }
        Node::Const(c) => *coef *= c,
        _ => factors.push(e.clone()),
    }
}

fn build_product(coef: f64, factors: Vec<Expr>) -> Expr {
    if coef == 0.0 || factors.is_empty() {
        return constant(coef);
    }
    if coef != 1.0 && coef != -1.0 {
        // Left-associated chain with the coefficient as leftmost leaf.
        return factors.into_iter().fold(constant(coef), |acc, f| acc * f);
    }
    let mut iter = factors.into_iter();
    let first = iter.next().unwrap();
    let rest = iter.fold(first, |acc, f| acc * f);
    if coef == 1.0 {
        rest
    } else {
        -rest
    }
}

fn build_sum(terms: Vec<(f64, Expr)>, offset: f64) -> Expr {
    let mut acc: Option<Expr> = None;
    for (coef, residual) in terms {
        if coef == 0.0 {
            continue;
        }
        let mut unit = 1.0;
        let mut factors = Vec::new();
        collect_factors(&residual, &mut unit, &mut factors);
        acc = Some(match acc {
            None => build_product(coef, factors),
            Some(prev) if coef > 0.0 => prev + build_product(coef, factors),
            Some(prev) => prev - build_product(-coef, factors),
        });
    }
    match acc {
        None => constant(offset),
        Some(prev) if offset > 0.0 => prev + constant(offset),
        Some(prev) if offset < 0.0 => prev - constant(-offset),
        Some(prev) => prev,
    }
}
