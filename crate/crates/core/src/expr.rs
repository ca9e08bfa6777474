//! Reaction-term expressions: parsing, exact symbolic differentiation up to
//! third order, evaluation, and compilation to a flat stack program for the
//! time stepper's inner loop.
//!
//! Grammar (documented for config files in the README):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          // right associative
//! atom    := number | ident | '(' expr ')'
//! ```
//!
//! Identifiers are `u`, `v`, `mu`, or a declared parameter name. Exponents
//! may be any subexpression free of `u`, `v`, `mu` (integer and rational
//! constants in practice), so that the power rule applies exactly.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// The three reserved variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    U,
    V,
    Mu,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::U => "u",
            Var::V => "v",
            Var::Mu => "mu",
        }
    }
}

/// Immutable expression tree. Shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

/// Variable/parameter bindings for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a> {
    pub u: f64,
    pub v: f64,
    pub mu: f64,
    pub params: &'a BTreeMap<String, f64>,
}

impl<'a> Bindings<'a> {
    pub fn new(u: f64, v: f64, mu: f64, params: &'a BTreeMap<String, f64>) -> Self {
        Bindings { u, v, mu, params }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    params: &'a [String],
}

/// Parse `text` over variables {u, v, mu} and the declared parameter names.
pub fn parse(text: &str, params: &[String]) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        params,
    };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.text.len() {
        return Err(Error::Syntax {
            pos: p.pos,
            msg: format!("unexpected `{}`", p.text[p.pos] as char),
        });
    }
    Ok(simplify(e))
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            let op_pos = self.pos;
            self.pos += 1;
            let exp = self.parse_unary()?;
            if depends_on_vars(&exp) {
                return Err(Error::Syntax {
                    pos: op_pos,
                    msg: "exponent must not depend on u, v, or mu".into(),
                });
            }
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                let open = self.pos;
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Syntax {
                        pos: open,
                        msg: "unbalanced parenthesis".into(),
                    });
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            Some(c) => Err(Error::Syntax {
                pos: self.pos,
                msg: format!("unexpected `{}`", c as char),
            }),
            None => Err(Error::Syntax {
                pos: self.pos,
                msg: "unexpected end of expression".into(),
            }),
        }
    }

    fn parse_number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self
            .text
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == b'.')
        {
            self.pos += 1;
        }
        // Optional exponent part.
        if self.text.get(self.pos).is_some_and(|c| matches!(c, b'e' | b'E')) {
            let mut probe = self.pos + 1;
            if self.text.get(probe).is_some_and(|c| matches!(c, b'+' | b'-')) {
                probe += 1;
            }
            if self.text.get(probe).is_some_and(u8::is_ascii_digit) {
                self.pos = probe;
                while self.text.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
            }
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        s.parse::<f64>().map(Expr::Num).map_err(|_| Error::Syntax {
            pos: start,
            msg: format!("malformed number `{s}`"),
        })
    }

    fn parse_ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self
            .text
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        match name {
            "u" => Ok(Expr::Var(Var::U)),
            "v" => Ok(Expr::Var(Var::V)),
            "mu" => Ok(Expr::Var(Var::Mu)),
            _ if self.params.iter().any(|p| p == name) => Ok(Expr::Param(name.to_string())),
            _ => Err(Error::UndeclaredIdentifier {
                name: name.to_string(),
                pos: start,
            }),
        }
    }
}

fn depends_on_vars(e: &Expr) -> bool {
    match e {
        Expr::Num(_) | Expr::Param(_) => false,
        Expr::Var(_) => true,
        Expr::Neg(a) => depends_on_vars(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
            depends_on_vars(a) || depends_on_vars(b)
        }
    }
}

// ---------------------------------------------------------------------------
// Differentiation and simplification
// ---------------------------------------------------------------------------

/// Exact symbolic partial derivative with respect to `var`.
pub fn differentiate(e: &Expr, var: Var) -> Expr {
    simplify(diff(e, var))
}

fn diff(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Num(_) | Expr::Param(_) => Expr::Num(0.0),
        Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::Neg(Box::new(diff(a, var))),
        Expr::Add(a, b) => Expr::Add(Box::new(diff(a, var)), Box::new(diff(b, var))),
        Expr::Sub(a, b) => Expr::Sub(Box::new(diff(a, var)), Box::new(diff(b, var))),
        Expr::Mul(a, b) => Expr::Add(
            Box::new(Expr::Mul(Box::new(diff(a, var)), b.clone())),
            Box::new(Expr::Mul(a.clone(), Box::new(diff(b, var)))),
        ),
        Expr::Div(a, b) => {
            // (a' b - a b') / b^2
            let num = Expr::Sub(
                Box::new(Expr::Mul(Box::new(diff(a, var)), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(diff(b, var)))),
            );
            let den = Expr::Pow(b.clone(), Box::new(Expr::Num(2.0)));
            Expr::Div(Box::new(num), Box::new(den))
        }
        Expr::Pow(base, exp) => {
            // Exponent is constant in u, v, mu by construction:
            // d/dx base^c = c * base^(c-1) * base'
            let c_minus_one = Expr::Sub(exp.clone(), Box::new(Expr::Num(1.0)));
            Expr::Mul(
                Box::new(Expr::Mul(
                    exp.clone(),
                    Box::new(Expr::Pow(base.clone(), Box::new(c_minus_one))),
                )),
                Box::new(diff(base, var)),
            )
        }
    }
}

/// Constant folding and 0/1 elimination. Intentionally conservative: no
/// reassociation, no distribution.
pub fn simplify(e: Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Var(_) | Expr::Param(_) => e,
        Expr::Neg(a) => match simplify(*a) {
            Expr::Num(x) => Expr::Num(-x),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        },
        Expr::Add(a, b) => match (simplify(*a), simplify(*b)) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
            (Expr::Num(z), b) if z == 0.0 => b,
            (a, Expr::Num(z)) if z == 0.0 => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        },
        Expr::Sub(a, b) => match (simplify(*a), simplify(*b)) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
            (a, Expr::Num(z)) if z == 0.0 => a,
            (Expr::Num(z), b) if z == 0.0 => Expr::Neg(Box::new(b)),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        },
        Expr::Mul(a, b) => match (simplify(*a), simplify(*b)) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
            (Expr::Num(z), _) | (_, Expr::Num(z)) if z == 0.0 => Expr::Num(0.0),
            (Expr::Num(o), b) if o == 1.0 => b,
            (a, Expr::Num(o)) if o == 1.0 => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        },
        Expr::Div(a, b) => match (simplify(*a), simplify(*b)) {
            (Expr::Num(x), Expr::Num(y)) if y != 0.0 => Expr::Num(x / y),
            (Expr::Num(z), _) if z == 0.0 => Expr::Num(0.0),
            (a, Expr::Num(o)) if o == 1.0 => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        },
        Expr::Pow(base, exp) => match (simplify(*base), simplify(*exp)) {
            (b, Expr::Num(e)) if e == 1.0 => b,
            (_, Expr::Num(e)) if e == 0.0 => Expr::Num(1.0),
            (Expr::Num(b), Expr::Num(e)) => match pow_value(b, e) {
                Ok(x) => Expr::Num(x),
                Err(_) => Expr::Pow(Box::new(Expr::Num(b)), Box::new(Expr::Num(e))),
            },
            (b, e) => Expr::Pow(Box::new(b), Box::new(e)),
        },
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn pow_value(base: f64, exp: f64) -> Result<f64> {
    if exp.fract() == 0.0 && exp.abs() < 2147483647.0 {
        if base == 0.0 && exp < 0.0 {
            return Err(Error::Eval {
                context: "power".into(),
                msg: "zero raised to a negative power".into(),
            });
        }
        Ok(base.powi(exp as i32))
    } else {
        if base == 0.0 && exp < 0.0 {
            return Err(Error::Eval {
                context: "power".into(),
                msg: "zero raised to a negative power".into(),
            });
        }
        if base < 0.0 {
            return Err(Error::Eval {
                context: "power".into(),
                msg: format!("negative base {base} with non-integer exponent {exp}"),
            });
        }
        Ok(base.powf(exp))
    }
}

/// Evaluate with all leaves bound. Division by zero, zero to a negative
/// power, and unbound parameters are reported as errors.
pub fn evaluate(e: &Expr, b: &Bindings) -> Result<f64> {
    let val = eval_inner(e, b)?;
    if !val.is_finite() {
        return Err(Error::Eval {
            context: "expression".into(),
            msg: format!("non-finite value {val}"),
        });
    }
    Ok(val)
}

fn eval_inner(e: &Expr, b: &Bindings) -> Result<f64> {
    Ok(match e {
        Expr::Num(x) => *x,
        Expr::Var(Var::U) => b.u,
        Expr::Var(Var::V) => b.v,
        Expr::Var(Var::Mu) => b.mu,
        Expr::Param(name) => *b.params.get(name).ok_or_else(|| Error::Eval {
            context: "expression".into(),
            msg: format!("unbound parameter `{name}`"),
        })?,
        Expr::Neg(a) => -eval_inner(a, b)?,
        Expr::Add(x, y) => eval_inner(x, b)? + eval_inner(y, b)?,
        Expr::Sub(x, y) => eval_inner(x, b)? - eval_inner(y, b)?,
        Expr::Mul(x, y) => eval_inner(x, b)? * eval_inner(y, b)?,
        Expr::Div(x, y) => {
            let den = eval_inner(y, b)?;
            if den == 0.0 {
                return Err(Error::Eval {
                    context: "expression".into(),
                    msg: "division by zero".into(),
                });
            }
            eval_inner(x, b)? / den
        }
        Expr::Pow(x, y) => pow_value(eval_inner(x, b)?, eval_inner(y, b)?)?,
    })
}

// ---------------------------------------------------------------------------
// Display (round-trip stable)
// ---------------------------------------------------------------------------

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(x) if *x < 0.0 => 3,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
            if precedence(e) < min_prec {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                paren(f, a, 4)
            }
            Expr::Add(a, b) => {
                paren(f, a, 1)?;
                write!(f, " + ")?;
                paren(f, b, 2)
            }
            Expr::Sub(a, b) => {
                paren(f, a, 1)?;
                write!(f, " - ")?;
                paren(f, b, 2)
            }
            Expr::Mul(a, b) => {
                paren(f, a, 2)?;
                write!(f, "*")?;
                paren(f, b, 3)
            }
            Expr::Div(a, b) => {
                paren(f, a, 2)?;
                write!(f, "/")?;
                paren(f, b, 3)
            }
            Expr::Pow(a, b) => {
                paren(f, a, 5)?;
                write!(f, "^")?;
                paren(f, b, 5)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Compilation for the simulation inner loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    U,
    V,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowI(i32),
    PowF(f64),
}

/// Flat postfix program with parameters and mu baked in as constants.
///
/// Runtime checks are deliberately absent: the stepper screens fields for
/// non-finite values each step, which catches division blow-ups.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
}

impl Compiled {
    pub fn new(e: &Expr, params: &BTreeMap<String, f64>, mu: f64) -> Result<Self> {
        let baked = bake(e, params, mu)?;
        let mut ops = Vec::new();
        emit(&baked, &mut ops);
        // Validate stack depth against the fixed evaluation buffer.
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::U | Op::V => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                Op::Neg | Op::PowI(_) | Op::PowF(_) => {}
            }
            max_depth = max_depth.max(depth);
        }
        if max_depth > STACK_SIZE {
            return Err(Error::Invalid(format!(
                "expression too deep to compile (stack {max_depth})"
            )));
        }
        Ok(Compiled { ops })
    }

    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let mut stack = [0.0f64; STACK_SIZE];
        let mut top = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(c) => {
                    stack[top] = c;
                    top += 1;
                }
                Op::U => {
                    stack[top] = u;
                    top += 1;
                }
                Op::V => {
                    stack[top] = v;
                    top += 1;
                }
                Op::Add => {
                    top -= 1;
                    stack[top - 1] += stack[top];
                }
                Op::Sub => {
                    top -= 1;
                    stack[top - 1] -= stack[top];
                }
                Op::Mul => {
                    top -= 1;
                    stack[top - 1] *= stack[top];
                }
                Op::Div => {
                    top -= 1;
                    stack[top - 1] /= stack[top];
                }
                Op::Neg => stack[top - 1] = -stack[top - 1],
                Op::PowI(n) => stack[top - 1] = stack[top - 1].powi(n),
                Op::PowF(x) => stack[top - 1] = stack[top - 1].powf(x),
            }
        }
        stack[0]
    }
}

const STACK_SIZE: usize = 32;

/// Substitute parameters and mu, then fold constants.
fn bake(e: &Expr, params: &BTreeMap<String, f64>, mu: f64) -> Result<Expr> {
    fn subst(e: &Expr, params: &BTreeMap<String, f64>, mu: f64) -> Result<Expr> {
        Ok(match e {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Var(Var::Mu) => Expr::Num(mu),
            Expr::Var(v) => Expr::Var(*v),
            Expr::Param(name) => Expr::Num(*params.get(name).ok_or_else(|| Error::Eval {
                context: "compile".into(),
                msg: format!("unbound parameter `{name}`"),
            })?),
            Expr::Neg(a) => Expr::Neg(Box::new(subst(a, params, mu)?)),
            Expr::Add(a, b) => Expr::Add(
                Box::new(subst(a, params, mu)?),
                Box::new(subst(b, params, mu)?),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(subst(a, params, mu)?),
                Box::new(subst(b, params, mu)?),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(subst(a, params, mu)?),
                Box::new(subst(b, params, mu)?),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(subst(a, params, mu)?),
                Box::new(subst(b, params, mu)?),
            ),
            Expr::Pow(a, b) => Expr::Pow(
                Box::new(subst(a, params, mu)?),
                Box::new(subst(b, params, mu)?),
            ),
        })
    }
    Ok(simplify(subst(e, params, mu)?))
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Num(x) => ops.push(Op::Const(*x)),
        Expr::Var(Var::U) => ops.push(Op::U),
        Expr::Var(Var::V) => ops.push(Op::V),
        Expr::Var(Var::Mu) => unreachable!("mu baked at compile time"),
        Expr::Param(_) => unreachable!("params baked at compile time"),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Add(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Add);
        }
        Expr::Sub(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Sub);
        }
        Expr::Mul(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Mul);
        }
        Expr::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Div);
        }
        Expr::Pow(a, b) => {
            emit(a, ops);
            match **b {
                Expr::Num(x) if x.fract() == 0.0 && x.abs() < 1e9 => ops.push(Op::PowI(x as i32)),
                Expr::Num(x) => ops.push(Op::PowF(x)),
                _ => unreachable!("exponents fold to constants after baking"),
            }
        }
    }
}
