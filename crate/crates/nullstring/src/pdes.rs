//! Residuals of the reduced field equations, evaluated on generator
//! expressions through jets.
//!
//! Each checker looks its coordinates up by name in the program's chart
//! (`x, y, z` for the Przanowski equation, `p, q, x, y` for the para-Kähler
//! equation, `x, y, p, q` for the hyperheavenly ones) and reads `Lambda` and
//! `gamma0` from the parameters.

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{EvalCtx, EvalError, Node, Program};
use crate::jets::{Jet, JetError, MultiIndex, NVARS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("chart has no coordinate `{0}`")]
    MissingCoordinate(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}: {1}")]
    Domain(&'static str, JetError),
}

/// A residual with the magnitude of the terms that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    fn from_terms(terms: &[f64]) -> Residual {
        Residual { value: terms.iter().sum(), scale: terms.iter().map(|t| t.abs()).sum::<f64>().max(1.0) }
    }

    /// `|value| ≤ rtol·scale`.
    pub fn passes(&self, rtol: f64) -> bool {
        self.value.is_finite() && self.value.abs() <= rtol * self.scale
    }

    pub fn relative(&self) -> f64 {
        self.value.abs() / self.scale
    }
}

fn coord(program: &Program, name: &str) -> Result<usize, PdeError> {
    program.coords().iter().position(|c| c == name).ok_or_else(|| PdeError::MissingCoordinate(name.to_string()))
}

fn param(program: &Program, name: &str) -> Result<f64, PdeError> {
    program.params().get(name).copied().ok_or_else(|| PdeError::MissingParameter(name.to_string()))
}

fn mi(vars: &[usize]) -> MultiIndex {
    let mut a = [0u8; NVARS];
    for v in vars {
        a[*v] += 1;
    }
    a
}

/// Partial derivative of a jet by a list of coordinates.
fn d(j: &Jet, vars: &[usize]) -> Result<f64, PdeError> {
    j.partial(&mi(vars)).map_err(|e| PdeError::Domain("derivative", e))
}

fn dj(j: &Jet, v: usize) -> Result<Jet, PdeError> {
    j.derivative(v).map_err(|e| PdeError::Domain("derivative", e))
}

fn div(a: &Jet, b: &Jet, what: &'static str) -> Result<Jet, PdeError> {
    a.div(b).map_err(|e| PdeError::Domain(what, e))
}

/// `κ(x) = (γ₀/x² + Λx/3)⁻¹` as a jet in coordinate slot `ix`.
pub fn kappa_jet(gamma0: f64, lambda: f64, ix: usize, point: [f64; NVARS], order: usize) -> Result<Jet, PdeError> {
    let x = Jet::variable(ix, point[ix], order);
    let inner = &div(&Jet::constant(gamma0, order), &(&x * &x), "kappa")? + &x.scale(lambda / 3.0);
    inner.recip().map_err(|e| PdeError::Domain("kappa pole", e))
}

/// `Q_yz + x²κ_x (e^{Q_x/κ_x})_x + 2κ e^{Q_x/κ_x}`.
pub fn residual_przanowski(program: &Program, q: &Node, ctx: &mut EvalCtx) -> Result<Residual, PdeError> {
    let (ix, iy, iz) = (coord(program, "x")?, coord(program, "y")?, coord(program, "z")?);
    let (g0, lam) = (param(program, "gamma0")?, param(program, "Lambda")?);
    let qj = program.eval(q, 2, ctx)?;
    let k = kappa_jet(g0, lam, ix, ctx.point, 2)?;
    let kx = dj(&k, ix)?;
    let e = div(&dj(&qj, ix)?, &kx, "kappa_x")?.exp();
    let x = ctx.point[ix];
    Ok(Residual::from_terms(&[d(&qj, &[iy, iz])?, x * x * kx.value() * e.d1(ix), 2.0 * k.value() * e.value()]))
}

/// `M_px M_qy − M_qx M_py − e^{−ΛM}`.
pub fn residual_para_kahler(program: &Program, m: &Node, ctx: &mut EvalCtx) -> Result<Residual, PdeError> {
    let (ip, iq, ix, iy) = (coord(program, "p")?, coord(program, "q")?, coord(program, "x")?, coord(program, "y")?);
    let lam = param(program, "Lambda")?;
    let mj = program.eval(m, 2, ctx)?;
    let (px, qy, qx, py) = (d(&mj, &[ip, ix])?, d(&mj, &[iq, iy])?, d(&mj, &[iq, ix])?, d(&mj, &[ip, iy])?);
    Ok(Residual::from_terms(&[px * qy, -qx * py, -(-lam * mj.value()).exp()]))
}

/// `l_yz − N e^l`.
pub fn residual_liouville(program: &Program, l: &Node, n: &Node, ctx: &mut EvalCtx) -> Result<Residual, PdeError> {
    let (iy, iz) = (coord(program, "y")?, coord(program, "z")?);
    let lj = program.eval(l, 2, ctx)?;
    let nv = program.eval(n, 0, ctx)?.value();
    Ok(Residual::from_terms(&[d(&lj, &[iy, iz])?, -nv * lj.value().exp()]))
}

/// `u_ab e^{Λu} − h` for the split factors of the para-Kähler generator,
/// with `(a, b)` naming the two coordinates.
pub fn residual_liouville_pk(program: &Program, u: &Node, h: &Node, vars: (&str, &str), ctx: &mut EvalCtx) -> Result<Residual, PdeError> {
    let (ia, ib) = (coord(program, vars.0)?, coord(program, vars.1)?);
    let lam = param(program, "Lambda")?;
    let uj = program.eval(u, 2, ctx)?;
    let hv = program.eval(h, 0, ctx)?.value();
    Ok(Residual::from_terms(&[d(&uj, &[ia, ib])? * (lam * uj.value()).exp(), -hv]))
}

/// The nonexpanding hyperheavenly equation with Λ.
pub fn residual_hyperheavenly(program: &Program, theta: &Node, ctx: &mut EvalCtx) -> Result<Residual, PdeError> {
    let (ix, iy, ip, iq) = (coord(program, "x")?, coord(program, "y")?, coord(program, "p")?, coord(program, "q")?);
    let lam = param(program, "Lambda")?;
    let t = program.eval(theta, 2, ctx)?;
    let [x, y] = [ctx.point[ix], ctx.point[iy]];
    let (txx, tyy, txy) = (d(&t, &[ix, ix])?, d(&t, &[iy, iy])?, d(&t, &[ix, iy])?);
    let l3 = lam / 3.0;
    Ok(Residual::from_terms(&[
        txx * tyy,
        -txy * txy,
        d(&t, &[iy, iq])?,
        -d(&t, &[ix, ip])?,
        l3 * 3.0 * x * t.d1(ix),
        l3 * 3.0 * y * t.d1(iy),
        -l3 * 3.0 * t.value(),
        -l3 * x * x * txx,
        -l3 * y * y * tyy,
        -l3 * 2.0 * x * y * txy,
    ]))
}

/// The three equations of the key function `Θ = ½Ax² + Bx + C`, given `A`,
/// `B_y` and `C_yy`. The third is checked after one `y` derivative, which is
/// the form that involves only `C_yy`.
pub fn residual_hh_split(program: &Program, a: &Node, by: &Node, cyy: &Node, ctx: &mut EvalCtx) -> Result<[Residual; 3], PdeError> {
    let (iy, ip, iq) = (coord(program, "y")?, coord(program, "p")?, coord(program, "q")?);
    let lam = param(program, "Lambda")?;
    let y = ctx.point[iy];
    let aj = program.eval(a, 2, ctx)?;
    let bj = program.eval(by, 2, ctx)?;
    let cj = program.eval(cyy, 2, ctx)?;
    let (av, ay, ayy) = (aj.value(), aj.d1(iy), d(&aj, &[iy, iy])?);
    let r1 = Residual::from_terms(&[3.0 * av * ayy, -6.0 * ay * ay, 3.0 * d(&aj, &[iy, iq])?, lam * av, -lam * y * ay, -lam * y * y * ayy]);
    // (5.6b) in terms of B_y: B_yy = ∂_y B_y, B_yq = ∂_q B_y
    let (bv, byy) = (bj.value(), bj.d1(iy));
    let r2 = Residual::from_terms(&[3.0 * av * byy, -6.0 * ay * bv, 3.0 * bj.d1(iq), -3.0 * aj.d1(ip), lam * y * bv, -lam * y * y * byy]);
    // ∂_y of the third equation
    let (cv, cy) = (cj.value(), cj.d1(iy));
    let r3 = Residual::from_terms(&[ay * cv, av * cy, -2.0 * bv * byy, cj.d1(iq), -bj.d1(ip), lam / 3.0 * y * cv, -lam / 3.0 * y * y * cy]);
    Ok([r1, r2, r3])
}

/// Reduced system of the expanding para-Kähler case with `M = F + G`,
/// `F = F(x, y, z(y,p,q))` given as a chart expression, and
/// `G = −(1/Λ) ln(z_p z_qy − z_q z_py)`. Returns the residual of
/// `(1/F_zx) e^{−ΛF} = F_z + β` and of the `Ċ⁽⁴⁾ = 0` constraint
/// `r r_py − r_qy − 2 r_y r_p − Λ r_y s`, with `r = z_q/z_p` and
/// `s = G_q − r G_p`.
pub fn residual_expanding_pk(program: &Program, f: &Node, z: &Node, ctx: &mut EvalCtx) -> Result<[Residual; 2], PdeError> {
    let (ip, iq, ix, iy) = (coord(program, "p")?, coord(program, "q")?, coord(program, "x")?, coord(program, "y")?);
    let lam = param(program, "Lambda")?;
    let fj = program.eval(f, 2, ctx)?;
    let zj = program.eval(z, 4, ctx)?;
    let (zp, zq) = (dj(&zj, ip)?, dj(&zj, iq)?);
    let (zqy, zpy) = (dj(&zq, iy)?, dj(&zp, iy)?);
    let w = &(&zp * &zqy) - &(&zq * &zpy);
    let g = w.ln().map_err(|e| PdeError::Domain("z_p z_qy − z_q z_py", e))?.scale(-1.0 / lam);
    let (gp, gq) = (dj(&g, ip)?, dj(&g, iq)?);
    let beta_num = &(&zp.truncate(1) * &dj(&gq, iy)?) - &(&zq.truncate(1) * &dj(&gp, iy)?);
    let beta = div(&beta_num, &w.truncate(1), "beta denominator")?.value();
    // F(x, y, z): ∂_p = F_z z_p at fixed x, y, q
    let fz = div(&dj(&fj, ip)?, &zp.truncate(1), "z_p")?;
    let fzx = fz.d1(ix);
    if fzx == 0.0 {
        return Err(PdeError::Domain("F_zx", JetError::Domain("vanishes".into())));
    }
    let lhs = (-lam * fj.value()).exp() / fzx;
    let e1 = Residual::from_terms(&[lhs, -fz.value(), -beta]);

    let r = div(&zq, &zp, "z_p")?;
    let s = &gq.truncate(2) - &(&r.truncate(2) * &gp.truncate(2));
    let (rv, ry, rp) = (r.value(), r.d1(iy), r.d1(ip));
    let e2 = Residual::from_terms(&[rv * d(&r, &[ip, iy])?, -d(&r, &[iq, iy])?, -2.0 * ry * rp, -lam * ry * s.value()]);
    Ok([e1, e2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::{parse, ParamEnv};

    fn program(coords: [&str; 4], params: &[(&str, f64)], defs: &[(&str, &str)]) -> Program {
        let coords = coords.map(String::from);
        let params: ParamEnv = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let defs: Vec<_> = defs.iter().map(|(n, e)| (n.to_string(), parse(e).unwrap())).collect();
        Program::new(&coords, &params, &defs).unwrap()
    }

    #[test]
    fn hyperheavenly_hand_value() {
        let p = program(["x", "y", "p", "q"], &[("Lambda", 3.0)], &[]);
        let t = p.compile_str("x^2*y^2").unwrap();
        let r = residual_hyperheavenly(&p, &t, &mut EvalCtx::new([1.0, 1.0, 0.0, 0.0])).unwrap();
        // 2·2 − 4² + (6 + 6 − 3 − 2 − 2 − 8)
        assert!((r.value + 15.0).abs() < 1e-12, "{r:?}");
        // same thing by central differences of x²y²
        let th = |x: f64, y: f64| x * x * y * y;
        let hh = 1e-3;
        let (x, y) = (1.0, 1.0);
        let txx = (th(x + hh, y) - 2.0 * th(x, y) + th(x - hh, y)) / (hh * hh);
        let tyy = (th(x, y + hh) - 2.0 * th(x, y) + th(x, y - hh)) / (hh * hh);
        let txy = (th(x + hh, y + hh) - th(x + hh, y - hh) - th(x - hh, y + hh) + th(x - hh, y - hh)) / (4.0 * hh * hh);
        let tx = (th(x + hh, y) - th(x - hh, y)) / (2.0 * hh);
        let ty = (th(x, y + hh) - th(x, y - hh)) / (2.0 * hh);
        let fd = txx * tyy - txy * txy + 3.0 * x * tx + 3.0 * y * ty - 3.0 * th(x, y) - x * x * txx - y * y * tyy - 2.0 * x * y * txy;
        assert!((r.value - fd).abs() < 1e-5, "{fd}");
        let z = p.compile_str("0").unwrap();
        assert_eq!(residual_hyperheavenly(&p, &z, &mut EvalCtx::new([0.3, 0.2, 0.1, 0.0])).unwrap().value, 0.0);
    }

    #[test]
    fn trivial_witnesses() {
        let p = program(["p", "q", "x", "y"], &[("Lambda", 3.0)], &[]);
        let m = p.compile_str("0").unwrap();
        let r = residual_para_kahler(&p, &m, &mut EvalCtx::new([0.1, 0.2, 0.3, 0.4])).unwrap();
        assert_eq!(r.value, -1.0);

        let p = program(["x", "y", "z", "t"], &[("Lambda", 3.0), ("gamma0", 1.0)], &[]);
        let q = p.compile_str("0").unwrap();
        let pt = [1.0, 0.3, 0.2, 0.0];
        let r = residual_przanowski(&p, &q, &mut EvalCtx::new(pt)).unwrap();
        // κ(1) = 1/2 with γ₀ = 1, Λ = 3, so the residual is 2κ = 1
        assert!((r.value - 1.0).abs() < 1e-14);

        let l = p.compile_str("0").unwrap();
        let r = residual_liouville(&p, &l, &l, &mut EvalCtx::new(pt)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn liouville_solution() {
        let p = program(["x", "y", "z", "t"], &[], &[("N", "1 + y^2"), ("l", "ln(2/(N*(y+z)^2))")]);
        let (l, n) = (p.compile_str("l").unwrap(), p.compile_str("N").unwrap());
        for pt in [[0.5, 0.3, 0.9, 0.0], [1.0, 1.7, 0.2, 0.0]] {
            let r = residual_liouville(&p, &l, &n, &mut EvalCtx::new(pt)).unwrap();
            assert!(r.passes(1e-12), "{r:?}");
        }
    }

    #[test]
    fn split_zero_and_known_solution() {
        let p = program(
            ["x", "y", "p", "q"],
            &[("Lambda", 3.0)],
            &[("z", "q - 2/(Lambda*y)"), ("f", "z + p"), ("A", "-Lambda*y^2/6"), ("By", "y^2*f")],
        );
        let zero = p.compile_str("0").unwrap();
        let pt = [0.4, 0.8, 0.3, 0.5];
        let r = residual_hh_split(&p, &zero, &zero, &zero, &mut EvalCtx::new(pt)).unwrap();
        assert!(r.iter().all(|r| r.value == 0.0));
        let (a, by) = (p.compile_str("A").unwrap(), p.compile_str("By").unwrap());
        let r = residual_hh_split(&p, &a, &by, &zero, &mut EvalCtx::new(pt)).unwrap();
        assert!(r[0].passes(1e-13) && r[1].passes(1e-13), "{r:?}");
    }

    #[test]
    fn expanding_witness_is_nonzero() {
        let p = program(["p", "q", "x", "y"], &[("Lambda", 3.0)], &[("z", "p + q*y"), ("F", "x*z + y")]);
        let (f, z) = (p.compile_str("F").unwrap(), p.compile_str("z").unwrap());
        let r = residual_expanding_pk(&p, &f, &z, &mut EvalCtx::new([0.2, 0.3, 0.5, 0.7])).unwrap();
        assert!(r[0].value.abs() > 1e-3, "{r:?}");
    }

    #[test]
    fn missing_roles_are_errors() {
        let p = program(["a", "b", "c", "d"], &[], &[]);
        let m = p.compile_str("a").unwrap();
        assert_eq!(residual_para_kahler(&p, &m, &mut EvalCtx::new([0.0; 4])).unwrap_err(), PdeError::MissingCoordinate("p".into()));
    }
}
