//! Scalar expression language for metric components and generators.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' rational)?
//! base   := number | ident | call | '(' expr ')'
//! call   := func '(' expr ')' | 'diff' '(' expr (',' ident)+ ')'
//!         | 'integrate' '(' expr ',' ident ')'
//! ```
//!
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

mod eval;
mod parse;

pub use eval::{gauss_legendre, EvalCtx, EvalError, Node, Program};
pub use parse::{parse, parse_declared};

/// Parameter values, e.g. `Lambda`, `gamma0`.
pub type ParamEnv = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Atan,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Reduced rational exponent with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Rational> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let s = if den < 0 { -1 } else { 1 };
        Some(Rational { num: s * num / g, den: s * den / g })
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.num < 0, self.den) {
            (false, 1) => write!(f, "{}", self.num),
            (_, 1) => write!(f, "({})", self.num),
            _ => write!(f, "({}/{})", self.num, self.den),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Ident(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational),
    Call(Func, Box<Expr>),
    /// Partial derivative with respect to one or more coordinates.
    Diff(Box<Expr>, Vec<String>),
    /// Antiderivative in one coordinate. See [`Program`] for the constant
    /// of integration.
    Integrate(Box<Expr>, String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared identifier `{name}` at {line}:{col}")]
    Undeclared { name: String, line: usize, col: usize },
    #[error("undeclared identifier `{0}`")]
    Unresolved(String),
    #[error("`{0}` is not a coordinate")]
    NotCoordinate(String),
    #[error("cyclic definition involving `{0}`")]
    Cycle(String),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn ident(s: &str) -> Expr {
        Expr::Ident(s.to_string())
    }

    /// Every identifier referenced, including derivative variables.
    pub fn identifiers(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            Expr::Ident(s) => out.push(s.clone()),
            Expr::Diff(_, vs) => out.extend(vs.iter().cloned()),
            Expr::Integrate(_, v) => out.push(v.clone()),
            _ => {}
        });
        out.sort();
        out.dedup();
        out
    }

    fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Ident(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.walk(f),
            Expr::Diff(a, _) | Expr::Integrate(a, _) => a.walk(f),
            Expr::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.fmt_prec(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "-{}", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Ident(s) => write!(f, "{s}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3)
            }
            Expr::Bin(op, a, b) => {
                let (p, sym) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                };
                a.fmt_prec(f, p)?;
                write!(f, "{sym}")?;
                b.fmt_prec(f, p + 1)
            }
            Expr::Pow(a, r) => {
                a.fmt_prec(f, 5)?;
                write!(f, "^{r}")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")
            }
            Expr::Diff(a, vs) => {
                write!(f, "diff(")?;
                a.fmt_prec(f, 0)?;
                for v in vs {
                    write!(f, ", {v}")?;
                }
                write!(f, ")")
            }
            Expr::Integrate(a, v) => {
                write!(f, "integrate(")?;
                a.fmt_prec(f, 0)?;
                write!(f, ", {v})")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
