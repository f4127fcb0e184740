//! Independent oracles shared by the integration tests: a seeded random
//! expression generator and finite-difference derivatives and brackets that
//! only ever evaluate expressions, never differentiate them symbolically.

#![allow(dead_code)]

use presym_core::expr::{seeded_rng, CompiledExpr, Layout};
use presym_core::Expr;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random smooth expressions that are finite on `[-1, 1]^n`.
pub struct ExprGen {
    rng: ChaCha8Rng,
    vars: Vec<String>,
}

impl ExprGen {
    pub fn new<S: AsRef<str>>(vars: &[S], seed: u64) -> ExprGen {
        ExprGen {
            rng: seeded_rng(seed, 0xe0e0),
            vars: vars.iter().map(|v| v.as_ref().to_string()).collect(),
        }
    }

    fn leaf(&mut self) -> Expr {
        if self.rng.random_bool(0.75) {
            let i = self.rng.random_range(0..self.vars.len());
            Expr::var(&self.vars[i])
        } else {
            let c: f64 = self.rng.random_range(-2.0..2.0);
            Expr::constant((c * 4.0).round() / 4.0)
        }
    }

    pub fn expr(&mut self, depth: usize) -> Expr {
        if depth == 0 || self.rng.random_bool(0.2) {
            return self.leaf();
        }
        let a = self.expr(depth - 1);
        match self.rng.random_range(0..10) {
            0 | 1 => a + self.expr(depth - 1),
            2 => a - self.expr(depth - 1),
            3 | 4 => a * self.expr(depth - 1),
            5 => a / (Expr::constant(2.0) + self.expr(depth - 1).cos()),
            6 => a.sin(),
            7 => (a * Expr::constant(0.5)).exp(),
            8 => (Expr::constant(1.5) + a.pow(2.0)).ln() + (Expr::one() + self.expr(depth - 1).pow(2.0)).sqrt(),
            _ => a.pow(if self.rng.random_bool(0.5) { 2.0 } else { 3.0 }),
        }
    }

    /// Polynomial in the generator's variables: sums of products of up to
    /// `degree` factors with small integer coefficients.
    pub fn polynomial(&mut self, terms: usize, degree: usize) -> Expr {
        Expr::sum((0..terms).map(|_| {
            let c = self.rng.random_range(-3..=3) as f64;
            let mut t = Expr::constant(if c == 0.0 { 1.0 } else { c });
            for _ in 0..self.rng.random_range(1..=degree) {
                let i = self.rng.random_range(0..self.vars.len());
                t = t * Expr::var(&self.vars[i]);
            }
            t
        }))
    }

    pub fn point(&mut self, lo: f64, hi: f64) -> Vec<f64> {
        (0..self.vars.len()).map(|_| self.rng.random_range(lo..hi)).collect()
    }
}

pub fn points(n_vars: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed, 0x9090);
    (0..count)
        .map(|_| (0..n_vars).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn eval(e: &Expr, layout: &Layout, x: &[f64]) -> f64 {
    CompiledExpr::new(e, layout).unwrap().eval(x).unwrap()
}

/// Fourth-order central difference of `e` along coordinate `i`.
pub fn fd_partial(e: &CompiledExpr, x: &[f64], i: usize) -> f64 {
    let h = 1e-3 * (1.0 + x[i].abs());
    let at = |d: f64| {
        let mut y = x.to_vec();
        y[i] += d;
        e.eval(&y).unwrap()
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// `Σ ∂f/∂qⁱ ∂g/∂pᵢ − ∂f/∂pᵢ ∂g/∂qⁱ` from finite differences, with `pairs`
/// naming `(qⁱ, pᵢ)`.
pub fn fd_bracket(f: &Expr, g: &Expr, pairs: &[(&str, &str)], layout: &Layout, x: &[f64]) -> f64 {
    let cf = CompiledExpr::new(f, layout).unwrap();
    let cg = CompiledExpr::new(g, layout).unwrap();
    pairs
        .iter()
        .map(|(q, p)| {
            let (iq, ip) = (layout.index_of(q).unwrap(), layout.index_of(p).unwrap());
            fd_partial(&cf, x, iq) * fd_partial(&cg, x, ip) - fd_partial(&cf, x, ip) * fd_partial(&cg, x, iq)
        })
        .sum()
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Proptest strategy for smooth expressions over `vars`, finite on `[-1, 1]^n`.
pub fn arb_expr(vars: &'static [&'static str]) -> impl proptest::strategy::Strategy<Value = Expr> {
    use proptest::prelude::*;
    let leaf = prop_oneof![
        3 => proptest::sample::select(vars).prop_map(Expr::var),
        1 => (-8i32..=8).prop_map(|c| Expr::constant(c as f64 / 4.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / (Expr::constant(2.0) + b.cos())),
            inner.clone().prop_map(Expr::sin),
            inner.clone().prop_map(|a| (a * Expr::constant(0.5)).exp()),
            inner.clone().prop_map(|a| (Expr::constant(1.5) + a.pow(2.0)).ln()),
            inner.clone().prop_map(|a| (Expr::one() + a.pow(2.0)).sqrt()),
            (inner, 2..=3i32).prop_map(|(a, k)| a.pow(k as f64)),
        ]
    })
}
