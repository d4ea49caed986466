//! Null-string congruences: integrability and expansion of totally null
//! 2-distributions, and the composed type symbol.
//!
//! A distribution is given either by a pair of tetrad directions or by a
//! one-parameter family. For the SD side the family is
//! `span{∂₄ + s∂₁, ∂₂ − s∂₃}` (so `s = 0` is `(∂₂,∂₄)` and `s = ∞` is
//! `(∂₁,∂₃)`); for the ASD side it is `span{∂₄ + s∂₂, ∂₁ − s∂₃}` (`s = 0` is
//! `(∂₁,∂₄)`, `s = ∞` is `(∂₂,∂₃)`).
//!
//! With `X, Y` spanning the plane, the witness `w(Z) = g(∇_Z X, Y)` vanishes
//! for `Z` in the plane iff the plane is integrable, and vanishes for all `Z`
//! iff the distribution is parallel (nonexpanding). For the coordinate pairs
//! this reads: `(∂₁,∂₃)` integrable iff `Γ₃₁₁ = Γ₃₁₃ = 0`, expansion
//! `Γ₃₁₂, Γ₃₁₄`; `(∂₂,∂₄)`: `Γ₄₂₂, Γ₄₂₄` and `Γ₄₂₁, Γ₄₂₃`; `(∂₁,∂₄)`:
//! `Γ₄₁₁, Γ₄₁₄` and `Γ₄₁₂, Γ₄₁₃`; `(∂₂,∂₃)`: `Γ₃₂₂, Γ₃₂₃` and `Γ₃₂₁, Γ₃₂₄`.

use std::fmt;

use thiserror::Error;

use crate::exprlang::{EvalCtx, Node, Program};
use crate::frame::{partner, FrameError, FrameField, PointGeometry};
use crate::jets::{Jet, NVARS};
use crate::weyl::{ComplexType, Tol};

/// Witness values at or above this multiple of the tolerance count as
/// bounded away from zero.
pub const EXPANSION_MARGIN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Sd,
    Asd,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Sd => "SD",
            Side::Asd => "ASD",
        }
    }

    pub fn from_name(s: &str) -> Option<Side> {
        match s {
            "SD" | "sd" => Some(Side::Sd),
            "ASD" | "asd" => Some(Side::Asd),
            _ => None,
        }
    }

    /// The two coordinate planes of this side, 1-based.
    pub fn planes(self) -> [(usize, usize); 2] {
        match self {
            Side::Sd => [(1, 3), (2, 4)],
            Side::Asd => [(1, 4), (2, 3)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expansion {
    Expanding,
    Nonexpanding,
}

impl Expansion {
    pub fn letter(&self) -> char {
        match self {
            Expansion::Expanding => 'e',
            Expansion::Nonexpanding => 'n',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StringsError {
    #[error("({0},{1}) is not a totally null {2} plane")]
    BadSpan(usize, usize, &'static str),
    #[error("{0}: mixed expansion over the sample (min witness {1:.3e}, max {2:.3e}, tol {3:.3e})")]
    MixedExpansion(String, f64, f64, f64),
    #[error("{0}: distribution is not integrable (residual {1:.3e})")]
    NotIntegrable(String, f64),
    #[error("{side} type differs between sample points: {types}")]
    Consensus { side: &'static str, types: String },
    #[error("malformed type symbol `{0}`")]
    Symbol(String),
    #[error("no sample points")]
    NoPoints,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone)]
pub enum Plane {
    /// Tetrad directions, 1-based.
    Span(usize, usize),
    /// Family parameter `s`.
    Family(Node),
}

/// A declared totally null 2-distribution.
#[derive(Debug, Clone)]
pub struct Distribution2 {
    pub side: Side,
    pub plane: Plane,
    /// Human-readable name, e.g. `SD(∂1,∂3)`.
    pub label: String,
}

impl Distribution2 {
    pub fn span(side: Side, a: usize, b: usize) -> Result<Distribution2, StringsError> {
        let (a, b) = (a.min(b), a.max(b));
        if !side.planes().contains(&(a, b)) {
            return Err(StringsError::BadSpan(a, b, side.name()));
        }
        Ok(Distribution2 { side, plane: Plane::Span(a, b), label: format!("{}(∂{a},∂{b})", side.name()) })
    }

    pub fn family(side: Side, s: Node, source: &str) -> Distribution2 {
        Distribution2 { side, plane: Plane::Family(s), label: format!("{}(s = {source})", side.name()) }
    }

    /// Spanning vectors and complement as tetrad components, order-1 jets.
    fn vectors(&self, program: &Program, ctx: &mut EvalCtx) -> Result<Frame2, FrameError> {
        let unit = |i: usize| -> [Jet; NVARS] { std::array::from_fn(|a| Jet::constant(if a == i { 1.0 } else { 0.0 }, 1)) };
        match &self.plane {
            Plane::Span(a, b) => {
                let (x, y) = (a - 1, b - 1);
                let others: Vec<usize> = (0..NVARS).filter(|i| *i != x && *i != y).collect();
                Ok(Frame2 { x: unit(x), y: unit(y), z: [unit(others[0]), unit(others[1])] })
            }
            Plane::Family(node) => {
                let s = program.eval(node, 1, ctx)?;
                let zero = Jet::constant(0.0, 1);
                let one = Jet::constant(1.0, 1);
                let (x, y, z) = match self.side {
                    // ∂₄ + s∂₁, ∂₂ − s∂₃; complement ∂₁, ∂₃
                    Side::Sd => (
                        [s.clone(), zero.clone(), zero.clone(), one.clone()],
                        [zero.clone(), one.clone(), -&s, zero.clone()],
                        [unit(0), unit(2)],
                    ),
                    // ∂₄ + s∂₂, ∂₁ − s∂₃; complement ∂₂, ∂₃
                    Side::Asd => (
                        [zero.clone(), s.clone(), zero.clone(), one.clone()],
                        [one.clone(), zero.clone(), -&s, zero.clone()],
                        [unit(1), unit(2)],
                    ),
                };
                Ok(Frame2 { x, y, z })
            }
        }
    }
}

impl fmt::Display for Distribution2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

struct Frame2 {
    x: [Jet; NVARS],
    y: [Jet; NVARS],
    z: [[Jet; NVARS]; 2],
}

/// Witness values of one distribution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringWitness {
    /// `g([X,Y], X)`, `g([X,Y], Y)`.
    pub bracket: [f64; 2],
    /// `g(∇_Z X, Y)` for `Z` in the plane; zero iff integrable.
    pub geodesic: [f64; 2],
    /// `g(∇_Z X, Y)` for the two complement directions.
    pub expansion: [f64; 2],
    /// Magnitude used for relative tolerances.
    pub scale: f64,
}

impl StringWitness {
    pub fn integrability_residual(&self) -> f64 {
        self.bracket.iter().chain(&self.geodesic).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn expansion_size(&self) -> f64 {
        self.expansion[0].abs().max(self.expansion[1].abs())
    }

    pub fn tol(&self, tol: Tol) -> f64 {
        tol.atol + tol.rtol * self.scale
    }
}

fn lower(v: &[f64; NVARS]) -> [f64; NVARS] {
    std::array::from_fn(|a| v[partner(a)])
}

fn dot(a: &[f64; NVARS], b: &[f64; NVARS]) -> f64 {
    (0..NVARS).map(|i| a[i] * b[i]).sum()
}

/// Evaluates the witnesses of `d` using geometry already computed at the
/// context's point.
pub fn witness_at(program: &Program, geom: &PointGeometry, d: &Distribution2, ctx: &mut EvalCtx) -> Result<StringWitness, FrameError> {
    let fr = d.vectors(program, ctx)?;
    let val = |v: &[Jet; NVARS]| -> [f64; NVARS] { std::array::from_fn(|a| v[a].value()) };
    // Z(V^a) along a frame vector Z = Z^c ∂_c
    let einv = &geom.einv;
    let along = |z: &[f64; NVARS], v: &[Jet; NVARS]| -> [f64; NVARS] {
        std::array::from_fn(|a| (0..NVARS).map(|mu| (0..NVARS).map(|c| z[c] * einv[mu][c]).sum::<f64>() * v[a].d1(mu)).sum())
    };
    let gamma = &geom.connection.gamma;
    let (x, y) = (val(&fr.x), val(&fr.y));
    let y_low = lower(&y);
    // w(Z) = Z(X^b) Y_b + X^b Y^d Γ_dbc Z^c
    let w = |z: &[f64; NVARS]| -> f64 {
        let mut acc = dot(&along(z, &fr.x), &y_low);
        for b in 0..NVARS {
            for dd in 0..NVARS {
                for c in 0..NVARS {
                    acc += x[b] * y[dd] * gamma[dd][b][c] * z[c];
                }
            }
        }
        acc
    };
    // [X,Y]^a = X(Y^a) − Y(X^a) − X^b Y^c D^a_bc
    let xy = along(&x, &fr.y);
    let yx = along(&y, &fr.x);
    let br: [f64; NVARS] = std::array::from_fn(|a| {
        let mut v = xy[a] - yx[a];
        for b in 0..NVARS {
            for c in 0..NVARS {
                v -= x[b] * y[c] * geom.structure[a][b][c];
            }
        }
        v
    });
    let brl = lower(&br);
    let z0 = val(&fr.z[0]);
    let z1 = val(&fr.z[1]);
    let mag = |v: &[f64; NVARS]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let gscale = gamma.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let dscale = geom.structure.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let dx = fr.x.iter().chain(&fr.y).fold(0.0f64, |m, j| m.max((1..=NVARS).map(|i| j.coeffs()[i].abs()).fold(0.0, f64::max)));
    let emag = einv.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = (1.0 + mag(&x)) * (1.0 + mag(&y)) * (gscale.max(dscale) + dx * emag).max(1.0);
    Ok(StringWitness { bracket: [dot(&brl, &x), dot(&brl, &y)], geodesic: [w(&x), w(&y)], expansion: [w(&z0), w(&z1)], scale })
}

/// Integrability and expansion of one distribution over a sample.
#[derive(Debug, Clone)]
pub struct CongruenceReport {
    pub label: String,
    pub side: Side,
    pub integrable: bool,
    /// Max over points of the integrability residual divided by its tolerance.
    pub integrability_ratio: f64,
    pub integrability_residual: f64,
    pub expansion: Result<Expansion, StringsError>,
    /// Per-point expansion witnesses.
    pub witnesses: Vec<[f64; 2]>,
    pub min_expansion_ratio: f64,
    pub max_expansion_ratio: f64,
}

impl CongruenceReport {
    pub fn from_witnesses(d: &Distribution2, w: &[StringWitness], tol: Tol) -> CongruenceReport {
        let mut ratio = 0.0f64;
        let mut residual = 0.0f64;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for s in w {
            let t = s.tol(tol);
            ratio = ratio.max(s.integrability_residual() / t);
            residual = residual.max(s.integrability_residual());
            let e = s.expansion_size() / t;
            lo = lo.min(e);
            hi = hi.max(e);
        }
        let integrable = !w.is_empty() && ratio < 1.0;
        let expansion = if w.is_empty() {
            Err(StringsError::NoPoints)
        } else if !integrable {
            Err(StringsError::NotIntegrable(d.label.clone(), residual))
        } else if hi < 1.0 {
            Ok(Expansion::Nonexpanding)
        } else if lo > EXPANSION_MARGIN {
            Ok(Expansion::Expanding)
        } else {
            let min = w.iter().map(|s| s.expansion_size()).fold(f64::INFINITY, f64::min);
            let max = w.iter().map(|s| s.expansion_size()).fold(0.0, f64::max);
            let t = w.iter().map(|s| s.tol(tol)).fold(0.0, f64::max);
            Err(StringsError::MixedExpansion(d.label.clone(), min, max, t))
        };
        CongruenceReport {
            label: d.label.clone(),
            side: d.side,
            integrable,
            integrability_ratio: ratio,
            integrability_residual: residual,
            expansion,
            witnesses: w.iter().map(|s| s.expansion).collect(),
            min_expansion_ratio: if w.is_empty() { 0.0 } else { lo },
            max_expansion_ratio: hi,
        }
    }

    pub fn letter(&self) -> char {
        match &self.expansion {
            Ok(e) => e.letter(),
            Err(_) => '?',
        }
    }
}

fn witnesses(frame: &FrameField, d: &Distribution2, points: &[[f64; NVARS]]) -> Result<Vec<StringWitness>, FrameError> {
    points
        .iter()
        .map(|p| {
            let mut ctx = EvalCtx::new(*p);
            let geom = frame.geometry_ctx(&mut ctx)?;
            witness_at(&frame.program, &geom, d, &mut ctx)
        })
        .collect()
}

/// Max integrability residual over the points, with the verdict.
pub fn frobenius_check(frame: &FrameField, d: &Distribution2, points: &[[f64; NVARS]], tol: Tol) -> Result<(f64, bool), StringsError> {
    let w = witnesses(frame, d, points)?;
    let r = CongruenceReport::from_witnesses(d, &w, tol);
    Ok((r.integrability_residual, r.integrable))
}

pub fn expansion_class(frame: &FrameField, d: &Distribution2, points: &[[f64; NVARS]], tol: Tol) -> Result<Expansion, StringsError> {
    let w = witnesses(frame, d, points)?;
    CongruenceReport::from_witnesses(d, &w, tol).expansion
}

/// One side of a type symbol: complex type plus congruence superscripts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SideSymbol {
    pub kind: ComplexType,
    pub sup: String,
}

impl fmt::Display for SideSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.kind.symbol())?;
        if !self.sup.is_empty() {
            write!(f, "^{{{}}}", self.sup)?;
        }
        Ok(())
    }
}

/// A composed symbol such as `[D]^{ee} ⊗ [II]^{n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeSymbol {
    pub sd: SideSymbol,
    pub asd: SideSymbol,
}

impl fmt::Display for TypeSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ⊗ {}", self.sd, self.asd)
    }
}

fn parse_side(s: &str) -> Option<SideSymbol> {
    let s = s.trim();
    let rest = s.strip_prefix('[')?;
    let close = rest.find(']')?;
    let kind = ComplexType::from_symbol(&rest[..close])?;
    let tail = rest[close + 1..].trim();
    let sup = if tail.is_empty() {
        String::new()
    } else {
        let inner = tail.strip_prefix('^')?.trim();
        let inner = match inner.strip_prefix('{') {
            Some(b) => b.strip_suffix('}')?,
            None => inner,
        };
        if !inner.chars().all(|c| c == 'e' || c == 'n') {
            return None;
        }
        inner.to_string()
    };
    Some(SideSymbol { kind, sup })
}

impl std::str::FromStr for TypeSymbol {
    type Err = StringsError;

    fn from_str(s: &str) -> Result<TypeSymbol, StringsError> {
        let bad = || StringsError::Symbol(s.to_string());
        let (a, b) = s.split_once('⊗').ok_or_else(bad)?;
        Ok(TypeSymbol { sd: parse_side(a).ok_or_else(bad)?, asd: parse_side(b).ok_or_else(bad)? })
    }
}

/// The common value of per-point types, or an error listing the disagreement.
pub fn consensus(side: Side, types: &[ComplexType]) -> Result<ComplexType, StringsError> {
    let first = *types.first().ok_or(StringsError::NoPoints)?;
    if types.iter().all(|t| *t == first) {
        return Ok(first);
    }
    let mut seen: Vec<ComplexType> = Vec::new();
    for t in types {
        if !seen.contains(t) {
            seen.push(*t);
        }
    }
    let types = seen.iter().map(|t| t.symbol()).collect::<Vec<_>>().join(", ");
    Err(StringsError::Consensus { side: side.name(), types })
}

/// Builds the symbol from consensus types and congruence reports, listing
/// superscripts in declaration order.
pub fn compose_symbol(sd: ComplexType, asd: ComplexType, reports: &[CongruenceReport]) -> TypeSymbol {
    let sup = |side: Side| reports.iter().filter(|r| r.side == side).map(|r| r.letter()).collect::<String>();
    TypeSymbol { sd: SideSymbol { kind: sd, sup: sup(Side::Sd) }, asd: SideSymbol { kind: asd, sup: sup(Side::Asd) } }
}

/// Classifies both sides at every point and composes the type symbol.
pub fn type_symbol(frame: &FrameField, dists: &[Distribution2], points: &[[f64; NVARS]], tol: Tol) -> Result<TypeSymbol, StringsError> {
    if points.is_empty() {
        return Err(StringsError::NoPoints);
    }
    let mut sd = Vec::new();
    let mut asd = Vec::new();
    let mut per: Vec<Vec<StringWitness>> = vec![Vec::new(); dists.len()];
    for p in points {
        let mut ctx = EvalCtx::new(*p);
        let geom = frame.geometry_ctx(&mut ctx)?;
        let c = &geom.curvature;
        sd.push(crate::weyl::classify_complex(c.c, c.scale, tol));
        asd.push(crate::weyl::classify_complex(c.cdot, c.scale, tol));
        for (i, d) in dists.iter().enumerate() {
            per[i].push(witness_at(&frame.program, &geom, d, &mut ctx)?);
        }
    }
    let reports: Vec<CongruenceReport> = dists.iter().zip(&per).map(|(d, w)| CongruenceReport::from_witnesses(d, w, tol)).collect();
    for r in &reports {
        if let Err(e) = &r.expansion {
            return Err(e.clone());
        }
    }
    Ok(compose_symbol(consensus(Side::Sd, &sd)?, consensus(Side::Asd, &asd)?, &reports))
}
