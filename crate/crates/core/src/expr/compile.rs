use std::collections::HashMap;

use super::eval::{apply_binary, apply_pow, apply_unary};
use super::{BinaryOp, EvalError, Expr, Node, UnaryOp};

/// Fixed ordering of variable names onto slots of a coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Layout {
    /// Panics on duplicate names.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Layout {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            let prev = index.insert(n.clone(), i);
            assert!(prev.is_none(), "duplicate coordinate `{n}`");
        }
        Layout { names, index }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Add,
    Sub,
    Mul,
    /// Fallible operations carry an index into `CompiledExpr::sources`.
    Unary(UnaryOp, u32),
    Div(u32),
    PowI(i32, u32),
    PowF(f64, u32),
}

/// Postfix program for one expression with variables resolved to slots
/// of a [`Layout`]. Evaluation is allocation-free given a scratch stack.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    code: Vec<Op>,
    sources: Vec<Expr>,
    max_stack: usize,
}

impl CompiledExpr {
    pub fn new(e: &Expr, layout: &Layout) -> Result<CompiledExpr, EvalError> {
        let mut out = CompiledExpr {
            code: Vec::new(),
            sources: Vec::new(),
            max_stack: 0,
        };
        let depth = out.emit(e, layout)?;
        out.max_stack = depth;
        Ok(out)
    }

    fn source(&mut self, e: &Expr) -> u32 {
        self.sources.push(e.clone());
        (self.sources.len() - 1) as u32
    }

    // Returns the stack depth needed to evaluate `e`.
    fn emit(&mut self, e: &Expr, layout: &Layout) -> Result<usize, EvalError> {
        match e.node() {
            Node::Const(c) => {
                self.code.push(Op::Const(*c));
                Ok(1)
            }
            Node::Var(name) => {
                let slot = layout
                    .index_of(name)
                    .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
                self.code.push(Op::Load(slot));
                Ok(1)
            }
            Node::Unary(op, a) => {
                let d = self.emit(a, layout)?;
                let instr = match op {
                    UnaryOp::Neg => Op::Neg,
                    _ => Op::Unary(*op, self.source(e)),
                };
                self.code.push(instr);
                Ok(d)
            }
            Node::Binary(BinaryOp::Pow, a, b) => {
                let d = self.emit(a, layout)?;
                let r = b.as_const().expect("constant exponent");
                let src = self.source(e);
                if r.fract() == 0.0 && r.abs() <= i32::MAX as f64 {
                    self.code.push(Op::PowI(r as i32, src));
                } else {
                    self.code.push(Op::PowF(r, src));
                }
                Ok(d)
            }
            Node::Binary(op, a, b) => {
                let da = self.emit(a, layout)?;
                let db = self.emit(b, layout)?;
                let instr = match op {
                    BinaryOp::Add => Op::Add,
                    BinaryOp::Sub => Op::Sub,
                    BinaryOp::Mul => Op::Mul,
                    BinaryOp::Div => Op::Div(self.source(e)),
                    BinaryOp::Pow => unreachable!(),
                };
                self.code.push(instr);
                Ok(da.max(db + 1))
            }
        }
    }

    fn fail(&self, src: u32, reason: &str) -> EvalError {
        EvalError::domain(&self.sources[src as usize], reason)
    }

    /// Evaluates at coordinate vector `x`, reusing `stack` as scratch space.
    pub fn eval_with(&self, x: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        stack.reserve(self.max_stack);
        for op in &self.code {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Load(i) => stack.push(x[i]),
                Op::Neg => {
                    let top = stack.last_mut().unwrap();
                    *top = -*top;
                }
                Op::Unary(u, src) => {
                    let top = stack.last_mut().unwrap();
                    *top = apply_unary(u, *top).map_err(|r| self.fail(src, r))?;
                }
                Op::PowI(n, src) => {
                    let top = stack.last_mut().unwrap();
                    if *top == 0.0 && n < 0 {
                        return Err(self.fail(src, "division by zero"));
                    }
                    *top = top.powi(n);
                }
                Op::PowF(r, src) => {
                    let top = stack.last_mut().unwrap();
                    *top = apply_pow(*top, r).map_err(|e| self.fail(src, e))?;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) => {
                    let b = stack.pop().unwrap();
                    let top = stack.last_mut().unwrap();
                    *top = match *op {
                        Op::Add => *top + b,
                        Op::Sub => *top - b,
                        Op::Mul => *top * b,
                        Op::Div(src) => apply_binary(BinaryOp::Div, *top, b)
                            .map_err(|r| self.fail(src, r))?,
                        _ => unreachable!(),
                    };
                }
            }
        }
        Ok(stack.pop().unwrap_or(0.0))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::with_capacity(self.max_stack);
        self.eval_with(x, &mut stack)
    }
}

/// A list of expressions compiled against one layout.
#[derive(Debug, Clone)]
pub struct CompiledVec {
    items: Vec<CompiledExpr>,
}

impl CompiledVec {
    pub fn new(exprs: &[Expr], layout: &Layout) -> Result<CompiledVec, EvalError> {
        let items = exprs
            .iter()
            .map(|e| CompiledExpr::new(e, layout))
            .collect::<Result<_, _>>()?;
        Ok(CompiledVec { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn eval_into(
        &self,
        x: &[f64],
        out: &mut [f64],
        stack: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        for (slot, c) in out.iter_mut().zip(&self.items) {
            *slot = c.eval_with(x, stack)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.items.len()];
        let mut stack = Vec::new();
        self.eval_into(x, &mut out, &mut stack)?;
        Ok(out)
    }
}
