mod common;

use presym_core::expr::{CompiledExpr, Layout};
use presym_core::{diff, parse, simplify, Expr};
use proptest::prelude::*;

use common::{arb_expr, close, fd_partial, points};

const VARS: &[&str] = &["a", "b", "c"];

fn values(e: &Expr, pts: &[Vec<f64>]) -> Vec<f64> {
    let c = CompiledExpr::new(e, &Layout::new(VARS)).unwrap();
    pts.iter().map(|x| c.eval(x).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn diff_matches_finite_differences(e in arb_expr(VARS), seed in any::<u64>()) {
        let layout = Layout::new(VARS);
        let ce = CompiledExpr::new(&e, &layout).unwrap();
        let pts = points(3, 100, seed);
        for (i, v) in VARS.iter().enumerate() {
            let d = CompiledExpr::new(&diff(&e, v), &layout).unwrap();
            for x in &pts {
                let (sym, fd) = (d.eval(x).unwrap(), fd_partial(&ce, x, i));
                prop_assert!(close(sym, fd, 1e-6), "d/d{} of {} at {:?}: {} vs {}", v, e, x, sym, fd);
            }
        }
    }

    #[test]
    fn simplify_preserves_value(e in arb_expr(VARS), seed in any::<u64>()) {
        let pts = points(3, 100, seed);
        let s = simplify(&e);
        for (a, b) in values(&e, &pts).into_iter().zip(values(&s, &pts)) {
            prop_assert!(close(a, b, 1e-12), "{} -> {}: {} vs {}", e, s, a, b);
        }
    }

    #[test]
    fn simplify_is_idempotent(e in arb_expr(VARS)) {
        let s = simplify(&e);
        prop_assert_eq!(simplify(&s), s);
    }

    #[test]
    fn print_parse_round_trip(e in arb_expr(VARS)) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(&back, &e, "printed as {}", printed);
        let s = simplify(&e);
        prop_assert_eq!(parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn diff_is_linear(e1 in arb_expr(VARS), e2 in arb_expr(VARS), a in -3.0..3.0f64, seed in any::<u64>()) {
        let pts = points(3, 20, seed);
        let lhs = diff(&(Expr::constant(a) * e1.clone() + e2.clone()), "b");
        let rhs = Expr::constant(a) * diff(&e1, "b") + diff(&e2, "b");
        for (l, r) in values(&lhs, &pts).into_iter().zip(values(&rhs, &pts)) {
            prop_assert!(close(l, r, 1e-10), "{} vs {}", l, r);
        }
    }
}
