//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex;
use twofloat::TwoFloat;

use nullstring::catalog::{compile, Catalog, Definition, MetricRecord, Record};
use nullstring::exprlang::{parse, BinOp, EvalCtx, Expr, Node};
use nullstring::frame::{partner, Tensor3, Weyl5};
use nullstring::jets::NVARS;
use nullstring::weyl::{ComplexType, CLUSTER_RADIUS};

pub fn catalog_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/catalog.json")
}

pub fn catalog() -> Catalog {
    Catalog::load(catalog_path()).expect("shipped catalog loads")
}

pub fn record<'a>(cat: &'a Catalog, id: &str) -> &'a Record {
    cat.get(id).unwrap_or_else(|| panic!("no record {id}"))
}

/// Records written in the expanding para-Hermite chart.
pub fn hermite_records(cat: &Catalog) -> Vec<&Record> {
    cat.records.iter().filter(|r| r.spec.chart == ["x", "y", "z", "t"].map(String::from)).collect()
}

pub fn box_centre(rec: &Record) -> [f64; NVARS] {
    rec.spec.sample_domain.bounds.map(|[a, b]| 0.5 * (a + b))
}

pub fn set_def(spec: &mut MetricRecord, name: &str, expr: &str) {
    let d = spec.defs.iter_mut().find(|d| d.name == name).unwrap_or_else(|| panic!("no def {name}"));
    d.expr = expr.to_string();
}

/// Flat space in null coordinates, `ds² = 2dxdy + 2dzdt`.
pub const FLAT_JSON: &str = r#"{
  "id": "flat",
  "paper_anchor": "none",
  "quote": "flat",
  "chart": ["x", "y", "z", "t"],
  "params": {"Lambda": 0.0},
  "tetrad": [["1", "0", "0", "0"], ["0", "1", "0", "0"], ["0", "0", "1", "0"], ["0", "0", "0", "1"]],
  "expected_type": "[−] ⊗ [−]",
  "sample_domain": {"box": [[-1, 1], [-1, 1], [-1, 1], [-1, 1]]}
}"#;

pub fn flat() -> Record {
    compile(serde_json::from_str(FLAT_JSON).unwrap()).unwrap()
}

/// The expanding family with `N = 0`, `G = 1`, `S = −1/6`, where both
/// `Ċ⁽³⁾` and `Ċ⁽²⁾` vanish at `Λ = 3`, `γ₀ = 1`.
pub fn degenerate_hermite(cat: &Catalog) -> Record {
    let mut spec = record(cat, "dee-ii-e.general-n0").spec.clone();
    spec.id = "dee-flat-asd".into();
    set_def(&mut spec, "S", "-1/6");
    set_def(&mut spec, "G", "1");
    spec.constraints.retain(|c| c.expr == "gamma0" || c.expr == "6*x*S - G");
    spec.expected.insert("Cdot3".into(), "0".into());
    spec.expected_type = "[D]^{ee} ⊗ [−]^{e}".into();
    compile(spec).unwrap()
}

/// Order-0 evaluation of every node at one point, sharing the cache.
pub fn values(rec: &Record, nodes: &[Node], p: [f64; NVARS], anchor: [f64; NVARS]) -> Vec<f64> {
    let mut ctx = EvalCtx::anchored(p, anchor);
    nodes.iter().map(|n| rec.program().eval(n, 0, &mut ctx).expect("evaluates").value()).collect()
}

pub fn shifted(p: [f64; NVARS], moves: &[(usize, f64)]) -> [f64; NVARS] {
    let mut q = p;
    for &(i, h) in moves {
        q[i] += h;
    }
    q
}

/// Central-difference first derivatives `out[node][i]`.
pub fn fd_gradient(rec: &Record, nodes: &[Node], p: [f64; NVARS], anchor: [f64; NVARS], h: f64) -> Vec<[f64; NVARS]> {
    let mut out = vec![[0.0; NVARS]; nodes.len()];
    for i in 0..NVARS {
        let fp = values(rec, nodes, shifted(p, &[(i, h)]), anchor);
        let fm = values(rec, nodes, shifted(p, &[(i, -h)]), anchor);
        for k in 0..nodes.len() {
            out[k][i] = (fp[k] - fm[k]) / (2.0 * h);
        }
    }
    out
}

/// Central-difference second derivatives `out[node][i][j]`.
pub fn fd_hessian(rec: &Record, nodes: &[Node], p: [f64; NVARS], anchor: [f64; NVARS], h: f64) -> Vec<[[f64; NVARS]; NVARS]> {
    let n = nodes.len();
    let mut out = vec![[[0.0; NVARS]; NVARS]; n];
    let f0 = values(rec, nodes, p, anchor);
    for i in 0..NVARS {
        let fp = values(rec, nodes, shifted(p, &[(i, h)]), anchor);
        let fm = values(rec, nodes, shifted(p, &[(i, -h)]), anchor);
        for k in 0..n {
            out[k][i][i] = (fp[k] - 2.0 * f0[k] + fm[k]) / (h * h);
        }
        for j in i + 1..NVARS {
            let pp = values(rec, nodes, shifted(p, &[(i, h), (j, h)]), anchor);
            let pm = values(rec, nodes, shifted(p, &[(i, h), (j, -h)]), anchor);
            let mp = values(rec, nodes, shifted(p, &[(i, -h), (j, h)]), anchor);
            let mm = values(rec, nodes, shifted(p, &[(i, -h), (j, -h)]), anchor);
            for k in 0..n {
                let v = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h);
                out[k][i][j] = v;
                out[k][j][i] = v;
            }
        }
    }
    out
}

fn tetrad_values(rec: &Record, p: [f64; NVARS], anchor: [f64; NVARS]) -> [[f64; NVARS]; NVARS] {
    let nodes: Vec<Node> = rec.frame.tetrad.iter().flatten().cloned().collect();
    let v = values(rec, &nodes, p, anchor);
    std::array::from_fn(|a| std::array::from_fn(|mu| v[a * NVARS + mu]))
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn pair_index(a: usize, b: usize) -> (usize, f64) {
    let (lo, hi, s) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    (PAIRS.iter().position(|&q| q == (lo, hi)).unwrap(), s)
}

/// `Γ_abc` from `de^a = Γ^a_bc e^b ∧ e^c`, solved as a 24×24 linear system in
/// the independent components `Γ_abc`, `a < b`. Exterior derivatives of the
/// coframe come from central differences of its components.
pub fn connection_oracle(rec: &Record, p: [f64; NVARS], anchor: [f64; NVARS], h: f64) -> Tensor3 {
    let e = tetrad_values(rec, p, anchor);
    let mut de = [[[0.0; NVARS]; NVARS]; NVARS]; // de[a][mu][nu] = ∂_mu e^a_nu
    for mu in 0..NVARS {
        let ep = tetrad_values(rec, shifted(p, &[(mu, h)]), anchor);
        let em = tetrad_values(rec, shifted(p, &[(mu, -h)]), anchor);
        for a in 0..NVARS {
            for nu in 0..NVARS {
                de[a][mu][nu] = (ep[a][nu] - em[a][nu]) / (2.0 * h);
            }
        }
    }
    let m = Matrix4::from_fn(|a, mu| e[a][mu]);
    let inv = m.try_inverse().expect("nondegenerate coframe");
    // frame vector E_c has coordinate components inv[(mu, c)]
    let mut d = [[[0.0; NVARS]; NVARS]; NVARS];
    for a in 0..NVARS {
        for c in 0..NVARS {
            for dd in 0..NVARS {
                let mut s = 0.0;
                for mu in 0..NVARS {
                    for nu in 0..NVARS {
                        s += (de[a][mu][nu] - de[a][nu][mu]) * inv[(mu, c)] * inv[(nu, dd)];
                    }
                }
                d[a][c][dd] = s;
            }
        }
    }
    // D^a_cd = Γ^a_cd − Γ^a_dc with Γ^a_bc = Γ_{partner(a) b c}
    let mut mat = DMatrix::<f64>::zeros(24, 24);
    let mut rhs = DVector::<f64>::zeros(24);
    for a in 0..NVARS {
        let up = partner(a);
        for (k, &(c, dd)) in PAIRS.iter().enumerate() {
            let row = a * 6 + k;
            rhs[row] = d[a][c][dd];
            for (b, cc, sign) in [(c, dd, 1.0), (dd, c, -1.0)] {
                if up != b {
                    let (pi, s) = pair_index(up, b);
                    mat[(row, pi * 4 + cc)] += sign * s;
                }
            }
        }
    }
    let sol = mat.lu().solve(&rhs).expect("structure equations are solvable");
    let mut g = [[[0.0; NVARS]; NVARS]; NVARS];
    for (k, &(a, b)) in PAIRS.iter().enumerate() {
        for c in 0..NVARS {
            g[a][b][c] = sol[k * 4 + c];
            g[b][a][c] = -sol[k * 4 + c];
        }
    }
    g
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

// Quartic root oracle in double-double arithmetic.

type C2 = Complex<TwoFloat>;

fn c2(re: f64) -> C2 {
    Complex::new(TwoFloat::from(re), TwoFloat::from(0.0))
}

fn abs2(z: C2) -> f64 {
    let re = z.re.hi();
    let im = z.im.hi();
    (re * re + im * im).sqrt()
}

fn horner(m: &[C2], z: C2) -> (C2, C2) {
    let mut p = m[0];
    let mut dp = c2(0.0);
    for c in &m[1..] {
        dp = dp * z + p;
        p = p * z + *c;
    }
    (p, dp)
}

/// Roots of `Σ m_k t^(d−k)` by Aberth iteration.
fn aberth(m: &[C2]) -> Vec<Complex<f64>> {
    let d = m.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = abs2(m[0]);
    let bound = 1.0 + m[1..].iter().map(|c| abs2(*c) / lead).fold(0.0, f64::max);
    let mut z: Vec<C2> = (0..d)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / d as f64 + 0.4;
            Complex::new(TwoFloat::from(0.5 * bound * th.cos()), TwoFloat::from(0.5 * bound * th.sin()))
        })
        .collect();
    let mabs: Vec<f64> = m.iter().map(|c| abs2(*c)).collect();
    for _ in 0..4000 {
        let mut worst = 0.0f64;
        for i in 0..d {
            let (p, dp) = horner(m, z[i]);
            // stop moving once the residual is at the rounding level
            let r = abs2(z[i]);
            let size = mabs.iter().fold(0.0, |acc, c| acc * r + c);
            if abs2(p) <= 1e-30 * size {
                continue;
            }
            let ratio = p / dp;
            let mut s = c2(0.0);
            for j in 0..d {
                if j != i {
                    s += c2(1.0) / (z[i] - z[j]);
                }
            }
            let w = ratio / (c2(1.0) - ratio * s);
            z[i] -= w;
            worst = worst.max(abs2(w) / (1.0 + abs2(z[i])));
        }
        if worst < 1e-30 {
            break;
        }
    }
    z.into_iter().map(|c| Complex::new(c.re.hi(), c.im.hi())).collect()
}

/// A root on the Riemann sphere.
#[derive(Debug, Clone, Copy)]
pub enum Root {
    Finite(Complex<f64>),
    Infinite,
}

/// Chordal distance, which treats the root at infinity like any other.
pub fn chordal(a: Root, b: Root) -> f64 {
    match (a, b) {
        (Root::Infinite, Root::Infinite) => 0.0,
        (Root::Finite(z), Root::Infinite) | (Root::Infinite, Root::Finite(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
        (Root::Finite(z), Root::Finite(w)) => 2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt(),
    }
}

/// Roots of the binary quartic `Σ binom(4,k) c_k X^(4−k) Y^k`; exact leading
/// zeros are roots at infinity.
pub fn quartic_roots(c: &Weyl5) -> Vec<Root> {
    let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
    let lead = c.iter().position(|v| *v != 0.0).expect("nonzero quartic");
    let m: Vec<C2> = (lead..5).map(|k| Complex::new(TwoFloat::from(binom[k]) * TwoFloat::from(c[k]), TwoFloat::from(0.0))).collect();
    let mut roots: Vec<Root> = aberth(&m).into_iter().map(Root::Finite).collect();
    roots.extend(std::iter::repeat_n(Root::Infinite, lead));
    roots
}

#[derive(Debug, Clone)]
pub struct RootOracle {
    pub kind: ComplexType,
    pub multiplicities: Vec<usize>,
    /// Smallest chordal distance between roots in different clusters.
    pub separation: f64,
}

/// Type by clustering the roots within [`CLUSTER_RADIUS`].
pub fn root_oracle(c: &Weyl5) -> RootOracle {
    let roots = quartic_roots(c);
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if chordal(roots[i], roots[j]) < CLUSTER_RADIUS {
                let (from, to) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == from {
                        *l = to;
                    }
                }
            }
        }
    }
    let mut separation = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            if label[i] != label[j] {
                separation = separation.min(chordal(roots[i], roots[j]));
            }
        }
    }
    let mut mult: Vec<usize> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for l in &label {
        if !seen.contains(l) {
            seen.push(*l);
            mult.push(label.iter().filter(|x| *x == l).count());
        }
    }
    mult.sort_unstable_by(|a, b| b.cmp(a));
    let kind = match mult.as_slice() {
        [1, 1, 1, 1] => ComplexType::I,
        [2, 1, 1] => ComplexType::II,
        [2, 2] => ComplexType::D,
        [3, 1] => ComplexType::III,
        [4] => ComplexType::N,
        other => panic!("unexpected multiplicities {other:?}"),
    };
    RootOracle { kind, multiplicities: mult, separation }
}

// Coordinate rescaling of expressions.

/// Rewrites `e` for new coordinates `x'^i = k_i x^i`: every old coordinate
/// becomes `x'/k`, derivatives and antiderivatives pick up the chain-rule
/// factors, and identifiers in `replace` are swapped for expressions.
pub fn rescale(e: &Expr, scale: &[(&str, f64)], replace: &[(&str, Expr)]) -> Expr {
    let k = |v: &str| scale.iter().find(|(n, _)| *n == v).map(|(_, k)| *k);
    let bx = |e: Expr| Box::new(e);
    let mul = |a: Expr, b: f64| Expr::Bin(BinOp::Mul, bx(Expr::Num(b)), bx(a));
    let go = |a: &Expr| rescale(a, scale, replace);
    match e {
        Expr::Num(_) => e.clone(),
        Expr::Ident(s) => {
            if let Some((_, r)) = replace.iter().find(|(n, _)| n == s) {
                r.clone()
            } else if let Some(f) = k(s) {
                Expr::Bin(BinOp::Div, bx(e.clone()), bx(Expr::Num(f)))
            } else {
                e.clone()
            }
        }
        Expr::Neg(a) => Expr::Neg(bx(go(a))),
        Expr::Bin(op, a, b) => Expr::Bin(*op, bx(go(a)), bx(go(b))),
        Expr::Pow(a, r) => Expr::Pow(bx(go(a)), *r),
        Expr::Call(f, a) => Expr::Call(*f, bx(go(a))),
        Expr::Diff(a, vars) => {
            let factor: f64 = vars.iter().map(|v| k(v).unwrap_or(1.0)).product();
            mul(Expr::Diff(bx(go(a)), vars.clone()), factor)
        }
        Expr::Integrate(a, v) => mul(Expr::Integrate(bx(go(a)), v.clone()), 1.0 / k(v).unwrap_or(1.0)),
    }
}

pub fn rescale_str(src: &str, scale: &[(&str, f64)], replace: &[(&str, Expr)]) -> String {
    rescale(&parse(src).expect("parses"), scale, replace).to_string()
}

pub fn def(name: &str, expr: &str) -> Definition {
    Definition { name: name.into(), expr: expr.into(), note: None }
}
