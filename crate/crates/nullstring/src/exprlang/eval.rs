use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

use super::{BinOp, Expr, ExprError, Func, ParamEnv, Rational};
use crate::jets::{Jet, JetError, MAX_ORDER, NVARS};

/// Resolved expression: identifiers replaced by coordinate slots, parameter
/// values, or indices of named definitions.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Coord(usize),
    Def(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, Rational),
    Call(Func, Box<Node>),
    Diff(Box<Node>, usize),
    Integrate(Box<Node>, usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{context}: {source}")]
pub struct EvalError {
    pub context: String,
    pub source: JetError,
}

impl EvalError {
    fn new(context: impl Into<String>, source: JetError) -> EvalError {
        EvalError { context: context.into(), source }
    }
}

/// A chart, parameter values, and named definitions, ready for evaluation.
///
/// `integrate(e, v)` denotes the antiderivative of `e` in `v`. Unless an
/// anchor is set on the [`EvalCtx`], the constant of integration is fixed by
/// requiring the antiderivative to vanish on the hyperplane `v = v_P` through
/// the expansion point, so only derivatives are meaningful across points.
/// With an anchor `a`, the result is the definite integral from `a_v`, which
/// is a single smooth function suitable for finite-difference comparisons.
#[derive(Debug, Clone)]
pub struct Program {
    coords: [String; NVARS],
    params: ParamEnv,
    def_names: Vec<String>,
    defs: Vec<Node>,
}

/// Per-point evaluation state.
pub struct EvalCtx {
    pub point: [f64; NVARS],
    pub anchor: Option<[f64; NVARS]>,
    cache: HashMap<(usize, usize), Jet>,
}

impl EvalCtx {
    pub fn new(point: [f64; NVARS]) -> EvalCtx {
        EvalCtx { point, anchor: None, cache: HashMap::new() }
    }

    pub fn anchored(point: [f64; NVARS], anchor: [f64; NVARS]) -> EvalCtx {
        EvalCtx { point, anchor: Some(anchor), cache: HashMap::new() }
    }
}

impl Program {
    pub fn new(coords: &[String; NVARS], params: &ParamEnv, defs: &[(String, Expr)]) -> Result<Program, ExprError> {
        let mut p = Program {
            coords: coords.clone(),
            params: params.clone(),
            def_names: defs.iter().map(|(n, _)| n.clone()).collect(),
            defs: Vec::new(),
        };
        let mut compiled = Vec::with_capacity(defs.len());
        for (_, e) in defs {
            compiled.push(p.compile(e)?);
        }
        p.defs = compiled;
        p.check_cycles()?;
        Ok(p)
    }

    pub fn coords(&self) -> &[String; NVARS] {
        &self.coords
    }

    pub fn params(&self) -> &ParamEnv {
        &self.params
    }

    pub fn def_names(&self) -> &[String] {
        &self.def_names
    }

    pub fn def_index(&self, name: &str) -> Option<usize> {
        self.def_names.iter().position(|n| n == name)
    }

    /// Whether `name` resolves in this program.
    pub fn is_declared(&self, name: &str) -> bool {
        self.coord_index(name).is_some() || self.params.contains_key(name) || self.def_index(name).is_some()
    }

    fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    pub fn compile(&self, e: &Expr) -> Result<Node, ExprError> {
        Ok(match e {
            Expr::Num(v) => Node::Const(*v),
            Expr::Ident(s) => {
                if let Some(i) = self.coord_index(s) {
                    Node::Coord(i)
                } else if let Some(v) = self.params.get(s) {
                    Node::Const(*v)
                } else if let Some(i) = self.def_index(s) {
                    Node::Def(i)
                } else {
                    return Err(ExprError::Unresolved(s.clone()));
                }
            }
            Expr::Neg(a) => fold(Node::Neg(Box::new(self.compile(a)?))),
            Expr::Bin(op, a, b) => fold(Node::Bin(*op, Box::new(self.compile(a)?), Box::new(self.compile(b)?))),
            Expr::Pow(a, r) => fold(Node::Pow(Box::new(self.compile(a)?), *r)),
            Expr::Call(f, a) => fold(Node::Call(*f, Box::new(self.compile(a)?))),
            Expr::Diff(a, vars) => {
                let mut n = self.compile(a)?;
                for v in vars {
                    let i = self.coord_index(v).ok_or_else(|| ExprError::NotCoordinate(v.clone()))?;
                    n = Node::Diff(Box::new(n), i);
                }
                n
            }
            Expr::Integrate(a, v) => {
                let i = self.coord_index(v).ok_or_else(|| ExprError::NotCoordinate(v.clone()))?;
                Node::Integrate(Box::new(self.compile(a)?), i)
            }
        })
    }

    fn check_cycles(&self) -> Result<(), ExprError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        fn deps(n: &Node, out: &mut Vec<usize>) {
            match n {
                Node::Def(i) => out.push(*i),
                Node::Const(_) | Node::Coord(_) => {}
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) | Node::Diff(a, _) | Node::Integrate(a, _) => deps(a, out),
                Node::Bin(_, a, b) => {
                    deps(a, out);
                    deps(b, out);
                }
            }
        }
        fn visit(p: &Program, i: usize, state: &mut [u8]) -> Result<(), ExprError> {
            match state[i] {
                1 => return Err(ExprError::Cycle(p.def_names[i].clone())),
                2 => return Ok(()),
                _ => {}
            }
            state[i] = 1;
            let mut d = Vec::new();
            deps(&p.defs[i], &mut d);
            for j in d {
                visit(p, j, state)?;
            }
            state[i] = 2;
            Ok(())
        }
        let mut state = vec![0u8; self.defs.len()];
        for i in 0..self.defs.len() {
            visit(self, i, &mut state)?;
        }
        Ok(())
    }

    /// Parses and compiles a source string against this program's scope.
    pub fn compile_str(&self, src: &str) -> Result<Node, ExprError> {
        let e = super::parse_declared(src, &|s| self.is_declared(s))?;
        self.compile(&e)
    }

    pub fn eval(&self, node: &Node, order: usize, ctx: &mut EvalCtx) -> Result<Jet, EvalError> {
        if order > MAX_ORDER {
            return Err(EvalError::new("evaluation", JetError::OrderTooHigh(order)));
        }
        let k = order;
        let wrap = |e: JetError| EvalError::new("expression", e);
        Ok(match node {
            Node::Const(v) => Jet::constant(*v, k),
            Node::Coord(i) => Jet::variable(*i, ctx.point[*i], k),
            Node::Def(i) => return self.eval_def_index(*i, k, ctx),
            Node::Neg(a) => -self.eval(a, k, ctx)?,
            Node::Bin(op, a, b) => {
                let a = self.eval(a, k, ctx)?;
                let b = self.eval(b, k, ctx)?;
                match op {
                    BinOp::Add => &a + &b,
                    BinOp::Sub => &a - &b,
                    BinOp::Mul => &a * &b,
                    BinOp::Div => a.div(&b).map_err(wrap)?,
                }
            }
            Node::Pow(a, r) => self.eval(a, k, ctx)?.pow_rational(r.num, r.den).map_err(wrap)?,
            Node::Call(f, a) => {
                let a = self.eval(a, k, ctx)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Ln => a.ln().map_err(wrap)?,
                    Func::Sqrt => a.sqrt().map_err(wrap)?,
                    Func::Atan => a.atan(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                }
            }
            Node::Diff(a, v) => {
                if k + 1 > MAX_ORDER {
                    return Err(EvalError::new("diff", JetError::OrderTooHigh(k + 1)));
                }
                self.eval(a, k + 1, ctx)?.derivative(*v).map_err(wrap)?
            }
            Node::Integrate(a, v) => self.eval_integral(a, *v, k, ctx)?,
        })
    }

    fn eval_def_index(&self, i: usize, order: usize, ctx: &mut EvalCtx) -> Result<Jet, EvalError> {
        for o in order..=MAX_ORDER {
            if let Some(j) = ctx.cache.get(&(i, o)) {
                return Ok(j.truncate(order));
            }
        }
        let j = self.eval(&self.defs[i], order, ctx).map_err(|e| {
            if e.context == "expression" {
                EvalError::new(format!("definition `{}`", self.def_names[i]), e.source)
            } else {
                e
            }
        })?;
        ctx.cache.insert((i, order), j.clone());
        Ok(j)
    }

    fn eval_integral(&self, inner: &Node, v: usize, k: usize, ctx: &mut EvalCtx) -> Result<Jet, EvalError> {
        let mut out = if k == 0 {
            Jet::zero(0)
        } else {
            self.eval(inner, k - 1, ctx)?.antiderivative(v).map_err(|e| EvalError::new("integrate", e))?
        };
        if let Some(anchor) = ctx.anchor {
            let (a, b) = (anchor[v], ctx.point[v]);
            if a != b {
                let panels = ((b - a).abs() / 0.125).ceil().max(1.0) as usize;
                let h = (b - a) / panels as f64;
                let (xs, ws) = gauss_legendre();
                let mut acc = Jet::zero(k);
                for p in 0..panels {
                    let mid = a + (p as f64 + 0.5) * h;
                    for (x, w) in xs.iter().zip(ws) {
                        let mut pt = ctx.point;
                        pt[v] = mid + 0.5 * h * x;
                        let mut sub = EvalCtx::anchored(pt, anchor);
                        let g = self.eval(inner, k, &mut sub)?;
                        acc = &acc + &g.restrict(v).scale(0.5 * h * w);
                    }
                }
                out = &out + &acc;
            }
        }
        Ok(out)
    }

    /// Evaluates a named definition at a point.
    pub fn eval_named(&self, name: &str, point: [f64; NVARS], order: usize) -> Result<Jet, EvalError> {
        let i = self.def_index(name).ok_or_else(|| EvalError::new(name, JetError::Domain("no such definition".into())))?;
        self.eval_def_index(i, order, &mut EvalCtx::new(point))
    }

    pub fn eval_at(&self, node: &Node, point: [f64; NVARS], order: usize) -> Result<Jet, EvalError> {
        self.eval(node, order, &mut EvalCtx::new(point))
    }
}

fn fold(n: Node) -> Node {
    let c = |n: &Node| match n {
        Node::Const(v) => Some(*v),
        _ => None,
    };
    let v = match &n {
        Node::Neg(a) => c(a).map(|a| -a),
        Node::Bin(op, a, b) => match (c(a), c(b)) {
            (Some(a), Some(b)) => match op {
                BinOp::Add => Some(a + b),
                BinOp::Sub => Some(a - b),
                BinOp::Mul => Some(a * b),
                BinOp::Div if b != 0.0 => Some(a / b),
                BinOp::Div => None,
            },
            _ => None,
        },
        Node::Pow(a, r) => c(a).and_then(|a| Jet::constant(a, 0).pow_rational(r.num, r.den).ok().map(|j| j.value())),
        Node::Call(f, a) => c(a).and_then(|a| {
            let j = Jet::constant(a, 0);
            match f {
                Func::Exp => Some(a.exp()),
                Func::Ln => j.ln().ok().map(|j| j.value()),
                Func::Sqrt => j.sqrt().ok().map(|j| j.value()),
                Func::Atan => Some(a.atan()),
                Func::Sin => Some(a.sin()),
                Func::Cos => Some(a.cos()),
            }
        }),
        _ => None,
    };
    match v {
        Some(v) if v.is_finite() => Node::Const(v),
        _ => n,
    }
}

/// 16-point Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| {
        let n = 16;
        let mut xs = Vec::with_capacity(n);
        let mut ws = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            xs.push(x);
            ws.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        (xs, ws)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use approx::assert_relative_eq;

    fn coords() -> [String; 4] {
        ["x", "y", "z", "t"].map(String::from)
    }

    fn program(params: &[(&str, f64)], defs: &[(&str, &str)]) -> Program {
        let params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let defs: Vec<_> = defs.iter().map(|(n, s)| (n.to_string(), parse(s).unwrap())).collect();
        Program::new(&coords(), &params, &defs).unwrap()
    }

    #[test]
    fn product_jet() {
        let p = program(&[], &[]);
        let j = p.eval_at(&p.compile_str("x*y").unwrap(), [2.0, 3.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.partial(&[1, 0, 0, 0]).unwrap(), 3.0);
        assert_eq!(j.partial(&[0, 1, 0, 0]).unwrap(), 2.0);
        assert_eq!(j.partial(&[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(j.partial(&[2, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(j.partial(&[0, 2, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn conformal_coefficient_value() {
        let p = program(&[("gamma0", 1.0)], &[]);
        let j = p.eval_at(&p.compile_str("2*gamma0*x^(-3)").unwrap(), [1.0, 0.0, 0.0, 0.0], 0).unwrap();
        assert_eq!(j.value(), 2.0);
    }

    #[test]
    fn resolution_order() {
        // coordinates shadow parameters, parameters shadow definitions
        let p = program(&[("x", 10.0), ("a", 2.0)], &[("a", "100"), ("b", "a*x")]);
        let j = p.eval_named("b", [3.0, 0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.d1(0), 2.0);
    }

    #[test]
    fn undeclared_and_cycles() {
        let p = program(&[("Lambda", 3.0)], &[]);
        assert!(matches!(p.compile_str("exp(-Lambda*M)"), Err(ExprError::Undeclared { .. })));
        let defs = vec![("a".to_string(), parse("b + 1").unwrap()), ("b".to_string(), parse("a").unwrap())];
        assert!(matches!(Program::new(&coords(), &ParamEnv::new(), &defs), Err(ExprError::Cycle(_))));
        let defs = vec![("a".to_string(), parse("diff(x, q)").unwrap())];
        assert!(matches!(Program::new(&coords(), &ParamEnv::new(), &defs), Err(ExprError::NotCoordinate(_))));
    }

    #[test]
    fn diff_node_matches_jet_derivative() {
        let p = program(&[], &[("f", "sin(x*y)*exp(z)"), ("g", "diff(f, x, y)")]);
        let pt = [0.3, 0.7, -0.2, 0.0];
        let g = p.eval_named("g", pt, 2).unwrap();
        let f = p.eval_named("f", pt, 4).unwrap();
        assert_relative_eq!(g.value(), f.partial(&[1, 1, 0, 0]).unwrap(), max_relative = 1e-13);
        assert_relative_eq!(g.partial(&[0, 0, 1, 0]).unwrap(), f.partial(&[1, 1, 1, 0]).unwrap(), max_relative = 1e-13);
        assert_relative_eq!(g.partial(&[1, 1, 0, 0]).unwrap(), f.partial(&[2, 2, 0, 0]).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn integral_local_and_anchored() {
        let p = program(&[], &[("F", "integrate(1/(y + z), y)")]);
        let pt = [0.0, 1.5, 0.5, 0.0];
        let local = p.eval_named("F", pt, 2).unwrap();
        assert_eq!(local.value(), 0.0);
        assert_relative_eq!(local.d1(1), 0.5);
        assert_eq!(local.d1(2), 0.0);
        // with anchor y = 1: F = ln((y+z)/(1+z)), ∂z F = 1/(y+z) - 1/(1+z)
        let node = p.compile_str("F").unwrap();
        let mut ctx = EvalCtx::anchored(pt, [0.0, 1.0, 0.0, 0.0]);
        let a = p.eval(&node, 2, &mut ctx).unwrap();
        assert_relative_eq!(a.value(), (2.0f64 / 1.5).ln(), max_relative = 1e-13);
        assert_relative_eq!(a.d1(1), 0.5, max_relative = 1e-13);
        assert_relative_eq!(a.d1(2), 0.5 - 1.0 / 1.5, max_relative = 1e-12);
        let dzz = -1.0 / 4.0 + 1.0 / 2.25;
        assert_relative_eq!(a.partial(&[0, 0, 2, 0]).unwrap(), dzz, max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (xs, ws) = gauss_legendre();
        let s: f64 = ws.iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-14);
        let m30: f64 = xs.iter().zip(ws).map(|(x, w)| w * x.powi(30)).sum();
        assert_relative_eq!(m30, 2.0 / 31.0, max_relative = 1e-12);
    }

    #[test]
    fn domain_error_names_definition() {
        let p = program(&[], &[("bad", "ln(x - 2)")]);
        let err = p.eval_named("bad", [1.0, 0.0, 0.0, 0.0], 1).unwrap_err();
        assert!(err.context.contains("bad"), "{err}");
    }

    #[test]
    fn linearity() {
        let p = program(&[], &[("e1", "exp(x)*sin(y) + z^3"), ("e2", "atan(x*z)/(2 + y^2)"), ("s", "2.5*e1 + e2")]);
        let pt = [0.4, -0.3, 0.8, 0.1];
        let e1 = p.eval_named("e1", pt, 3).unwrap();
        let e2 = p.eval_named("e2", pt, 3).unwrap();
        let s = p.eval_named("s", pt, 3).unwrap();
        let want = &e1.scale(2.5) + &e2;
        for (a, b) in s.coeffs().iter().zip(want.coeffs()) {
            assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs()));
        }
    }
}
