use super::{simplify, BinaryOp, Expr, Node, UnaryOp};

/// Exact partial derivative of `e` with respect to `var`, simplified.
pub fn diff(e: &Expr, var: &str) -> Expr {
    simplify(&raw_diff(e, var))
}

/// Partial derivatives with respect to each of `vars`, in order.
pub fn gradient<S: AsRef<str>>(e: &Expr, vars: &[S]) -> Vec<Expr> {
    vars.iter().map(|v| diff(e, v.as_ref())).collect()
}

fn raw_diff(e: &Expr, var: &str) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(name) => {
            if &**name == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Unary(op, a) => {
            let da = raw_diff(a, var);
            match op {
                UnaryOp::Neg => -da,
                UnaryOp::Sin => a.clone().cos() * da,
                UnaryOp::Cos => -(a.clone().sin()) * da,
                UnaryOp::Exp => e.clone() * da,
                UnaryOp::Ln => da / a.clone(),
                UnaryOp::Sqrt => da / (2.0 * e.clone()),
            }
        }
        Node::Binary(op, a, b) => match op {
            BinaryOp::Add => raw_diff(a, var) + raw_diff(b, var),
            BinaryOp::Sub => raw_diff(a, var) - raw_diff(b, var),
            BinaryOp::Mul => raw_diff(a, var) * b.clone() + a.clone() * raw_diff(b, var),
            BinaryOp::Div => {
                (raw_diff(a, var) * b.clone() - a.clone() * raw_diff(b, var)) / b.clone().pow(2.0)
            }
            BinaryOp::Pow => {
                let r = b.as_const().expect("constant exponent");
                r * a.clone().pow(r - 1.0) * raw_diff(a, var)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval, parse, VariableTable};

    fn d(src: &str, var: &str) -> String {
        diff(&parse(src).unwrap(), var).to_string()
    }

    #[test]
    fn polynomial_rule() {
        assert_eq!(d("p1*u1 - 0.5*u1^2", "u1"), "p1 - u1");
        assert_eq!(d("p1 - u1", "u1"), "-1");
        assert_eq!(d("x^3", "x"), "3*x^2");
    }

    #[test]
    fn absent_variable_gives_zero() {
        assert_eq!(d("sin(q1)", "q2"), "0");
    }

    #[test]
    fn transcendental_rules_match_values() {
        let vars = VariableTable::from_pairs(&[("x", 0.8)]);
        let cases = [
            ("sin(x)", 0.8f64.cos()),
            ("cos(x)", -0.8f64.sin()),
            ("exp(2*x)", 2.0 * 1.6f64.exp()),
            ("ln(x)", 1.0 / 0.8),
            ("sqrt(x)", 0.5 / 0.8f64.sqrt()),
            ("1/x", -1.0 / 0.64),
            ("x^(1/2)", 0.5 / 0.8f64.sqrt()),
        ];
        for (src, expected) in cases {
            let got = eval(&diff(&parse(src).unwrap(), "x"), &vars).unwrap();
            assert!((got - expected).abs() < 1e-14, "{src}: {got} vs {expected}");
        }
    }
}
