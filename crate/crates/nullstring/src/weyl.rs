//! Petrov–Penrose classification of one duality side.
//!
//! The five coefficients define the binary quartic
//! `f(t) = C¹t⁴ − 4C²t³ + 6C³t² − 4C⁴t + C⁵`, i.e. `Σ binom(4,k) a_k t^{4−k}`
//! with `a = (C¹, −C², C³, −C⁴, C⁵)`. Principal spinors are its roots on the
//! projective line; a root at infinity shows up as a vanishing leading
//! coefficient. Classification uses the invariants `I`, `J`, the Hessian
//! covariant and, for the real refinement, a real rotation of the line that
//! keeps the leading coefficient away from zero.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frame::Weyl5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComplexType {
    I,
    II,
    D,
    III,
    N,
    #[serde(rename = "−")]
    Zero,
}

impl ComplexType {
    pub fn symbol(self) -> &'static str {
        match self {
            ComplexType::I => "I",
            ComplexType::II => "II",
            ComplexType::D => "D",
            ComplexType::III => "III",
            ComplexType::N => "N",
            ComplexType::Zero => "−",
        }
    }

    pub fn from_symbol(s: &str) -> Option<ComplexType> {
        Some(match s {
            "I" => ComplexType::I,
            "II" => ComplexType::II,
            "D" => ComplexType::D,
            "III" => ComplexType::III,
            "N" => ComplexType::N,
            "-" | "−" => ComplexType::Zero,
            _ => return None,
        })
    }

    pub fn is_degenerate(self) -> bool {
        self != ComplexType::I
    }
}

impl fmt::Display for ComplexType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RealType {
    #[serde(rename = "I_r")]
    IR,
    #[serde(rename = "I_rc")]
    IRc,
    #[serde(rename = "I_c")]
    IC,
    #[serde(rename = "II_r")]
    IIR,
    #[serde(rename = "II_rc")]
    IIRc,
    #[serde(rename = "D_r")]
    DR,
    #[serde(rename = "D_c")]
    DC,
    III,
    N,
    #[serde(rename = "−")]
    Zero,
}

impl RealType {
    pub fn complex(self) -> ComplexType {
        match self {
            RealType::IR | RealType::IRc | RealType::IC => ComplexType::I,
            RealType::IIR | RealType::IIRc => ComplexType::II,
            RealType::DR | RealType::DC => ComplexType::D,
            RealType::III => ComplexType::III,
            RealType::N => ComplexType::N,
            RealType::Zero => ComplexType::Zero,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RealType::IR => "I_r",
            RealType::IRc => "I_rc",
            RealType::IC => "I_c",
            RealType::IIR => "II_r",
            RealType::IIRc => "II_rc",
            RealType::DR => "D_r",
            RealType::DC => "D_c",
            RealType::III => "III",
            RealType::N => "N",
            RealType::Zero => "−",
        }
    }
}

impl fmt::Display for RealType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Absolute and relative tolerance. Coefficients below `atol + rtol·scale`
/// count as zero, where `scale` is the size of the surrounding curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tol {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { atol: 1e-10, rtol: 1e-8 }
    }
}

/// Roots closer than this (normalised quartic) are one principal spinor.
pub const CLUSTER_RADIUS: f64 = 1e-6;
/// Safety factor between coefficient noise and the invariant thresholds.
const NOISE_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylSide {
    /// `c[i-1] = C⁽ⁱ⁾`.
    pub c: Weyl5,
    /// Reference magnitude for the zero test (e.g. max curvature component).
    pub scale: f64,
}

/// Full classification of one side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PetrovType {
    pub complex: ComplexType,
    pub real: RealType,
    pub degenerate: bool,
    /// For II: distance of the real refinement from its boundary (≥ 0).
    /// `None` for other types.
    pub margin: Option<f64>,
}

/// `a_k` of the binary quartic.
pub fn quartic_a(c: &Weyl5) -> [f64; 5] {
    [c[0], -c[1], c[2], -c[3], c[4]]
}

fn from_a(a: &[f64; 5]) -> Weyl5 {
    [a[0], -a[1], a[2], -a[3], a[4]]
}

fn invariants_a(a: &[f64; 5]) -> (f64, f64) {
    let i = a[0] * a[4] - 4.0 * a[1] * a[3] + 3.0 * a[2] * a[2];
    let j = a[0] * (a[2] * a[4] - a[3] * a[3]) - a[1] * (a[1] * a[4] - a[2] * a[3]) + a[2] * (a[1] * a[3] - a[2] * a[2]);
    (i, j)
}

/// Monomial coefficients of `f` (`t⁴` first).
fn monomials(a: &[f64; 5]) -> [f64; 5] {
    [a[0], 4.0 * a[1], 6.0 * a[2], 4.0 * a[3], a[4]]
}

/// Monomial coefficients of the Hessian covariant.
fn hessian(a: &[f64; 5]) -> [f64; 5] {
    [
        a[0] * a[2] - a[1] * a[1],
        2.0 * (a[0] * a[3] - a[1] * a[2]),
        a[0] * a[4] + 2.0 * a[1] * a[3] - 3.0 * a[2] * a[2],
        2.0 * (a[1] * a[4] - a[2] * a[3]),
        a[2] * a[4] - a[3] * a[3],
    ]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Action of `[[α, β], [γ, δ]]` on the binary quartic: the new form is
/// `f(αX + βY, γX + δY)`. Coefficients are `a_k`.
pub fn transform_a(a: &[f64; 5], m: [[f64; 2]; 2]) -> [f64; 5] {
    // f = Σ binom(4,k) a_k X^{4-k} Y^k; expand in the new variables
    let x = [m[0][0], m[0][1]];
    let y = [m[1][0], m[1][1]];
    let mul = |p: &[f64], q: &[f64; 2]| -> Vec<f64> {
        let mut out = vec![0.0; p.len() + 1];
        for (i, pi) in p.iter().enumerate() {
            out[i] += pi * q[0];
            out[i + 1] += pi * q[1];
        }
        out
    };
    let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
    let mut mono = [0.0; 5];
    for k in 0..5 {
        let mut p = vec![1.0];
        for _ in 0..4 - k {
            p = mul(&p, &x);
        }
        for _ in 0..k {
            p = mul(&p, &y);
        }
        for (i, v) in p.iter().enumerate() {
            mono[i] += binom[k] * a[k] * v;
        }
    }
    std::array::from_fn(|i| mono[i] / binom[i])
}

/// Induced action of a spin-frame change on the five coefficients.
pub fn transform_coefficients(c: &Weyl5, m: [[f64; 2]; 2]) -> Weyl5 {
    from_a(&transform_a(&quartic_a(c), m))
}

impl WeylSide {
    pub fn new(c: Weyl5, scale: f64) -> WeylSide {
        WeylSide { c, scale }
    }

    /// Exact-input convenience: the zero test is relative to the coefficients.
    pub fn bare(c: Weyl5) -> WeylSide {
        WeylSide { c, scale: max_abs(&c) }
    }

    pub fn invariants(&self) -> (f64, f64) {
        invariants_a(&quartic_a(&self.c))
    }

    pub fn i_invariant(&self) -> f64 {
        self.invariants().0
    }

    pub fn j_invariant(&self) -> f64 {
        self.invariants().1
    }

    /// `I³ − 27J²`, proportional to the discriminant of `f`.
    pub fn discriminant(&self) -> f64 {
        let (i, j) = self.invariants();
        i * i * i - 27.0 * j * j
    }

    /// `τ = 2C²C² − 3C³C¹`.
    pub fn tau(&self) -> f64 {
        tau(&self.c)
    }

    /// Degeneration polynomial `(I³ − 27J²)/27`; zero iff some principal
    /// spinor is repeated.
    pub fn degeneration_residual(&self) -> f64 {
        degeneration_residual(&self.c)
    }

    fn zero_threshold(&self, tol: Tol) -> f64 {
        tol.atol + tol.rtol * self.scale
    }

    /// Relative noise of the normalised coefficients and the derived
    /// threshold for the invariant tests.
    fn thresholds(&self, tol: Tol) -> (f64, f64) {
        let m = max_abs(&self.c);
        let eta = self.zero_threshold(tol) / m;
        let eps = (CLUSTER_RADIUS * CLUSTER_RADIUS).max(NOISE_FACTOR * eta);
        (m, eps)
    }

    /// Normalised discriminant `|I³ − 27J²| / (|I|³ + 27J²)`, in `[0, 1]`.
    pub fn discriminant_measure(&self) -> f64 {
        let m = max_abs(&self.c);
        if m == 0.0 {
            return 0.0;
        }
        let a = quartic_a(&self.c).map(|v| v / m);
        let (i, j) = invariants_a(&a);
        let den = i.abs().powi(3) + 27.0 * j * j;
        if den == 0.0 {
            0.0
        } else {
            (i * i * i - 27.0 * j * j).abs() / den
        }
    }

    /// Whether `I³ − 27J²` is indistinguishable from zero: below the
    /// cluster-radius threshold or below the propagated coefficient noise.
    fn discriminant_vanishes(&self, a: &[f64; 5], eta: f64) -> bool {
        let (i, j) = invariants_a(a);
        (i * i * i - 27.0 * j * j).abs() <= discriminant_threshold(a, eta)
    }

    /// Bound below which [`degeneration_residual`](Self::degeneration_residual)
    /// counts as zero, on the same scale as the residual.
    pub fn degeneration_tol(&self, tol: Tol) -> f64 {
        let m = max_abs(&self.c);
        if m == 0.0 {
            return 0.0;
        }
        let a = quartic_a(&self.c).map(|v| v / m);
        discriminant_threshold(&a, self.zero_threshold(tol) / m) * m.powi(6) / 27.0
    }

    /// Invariant-based degeneracy test matched to [`classify_complex`].
    pub fn is_degenerate(&self, tol: Tol) -> bool {
        self.classify_complex(tol).is_degenerate()
    }

    /// Frames with a double principal spinor along a basis direction
    /// (`C⁵ = C⁴ = 0` or `C¹ = C² = 0`, middle coefficient nonzero) are II
    /// or D, decided by `τ` against its first-order noise.
    fn adapted_type(&self, tol: Tol) -> Option<ComplexType> {
        let z = self.zero_threshold(tol);
        let [c1, c2, c3, c4, c5] = self.c;
        if c3.abs() <= z {
            return None;
        }
        let (a, b) = if c5.abs() <= z && c4.abs() <= z {
            (c1, c2)
        } else if c1.abs() <= z && c2.abs() <= z {
            (c5, c4)
        } else {
            return None;
        };
        let tau = 2.0 * b * b - 3.0 * a * c3;
        let noise = z * (4.0 * b.abs() + 3.0 * a.abs() + 3.0 * c3.abs());
        Some(if tau.abs() <= noise { ComplexType::D } else { ComplexType::II })
    }

    pub fn classify_complex(&self, tol: Tol) -> ComplexType {
        let m = max_abs(&self.c);
        if m <= self.zero_threshold(tol) {
            return ComplexType::Zero;
        }
        if let Some(t) = self.adapted_type(tol) {
            return t;
        }
        let (_, eps) = self.thresholds(tol);
        let eta = self.zero_threshold(tol) / m;
        let a = quartic_a(&self.c).map(|v| v / m);
        let h = hessian(&a);
        if max_abs(&h) < eps {
            return ComplexType::N;
        }
        let (i, j) = invariants_a(&a);
        if i.abs() < eps && j.abs() < eps {
            return ComplexType::III;
        }
        if !self.discriminant_vanishes(&a, eta) {
            return ComplexType::I;
        }
        // D iff H ∝ f. Fit the factor directly: 3J/2I loses everything when
        // the roots crowd together even though H itself stays sharp.
        let f = monomials(&a);
        let ff: f64 = f.iter().map(|v| v * v).sum();
        let lam = h.iter().zip(&f).map(|(x, y)| x * y).sum::<f64>() / ff;
        let kappa = NOISE_FACTOR * eta.max(f64::EPSILON);
        let b = a.map(f64::abs);
        // rounding of the products plus the response to absolute noise
        let h_abs = [
            b[0] * b[2] + b[1] * b[1] + (b[2] + 2.0 * b[1] + b[0]),
            2.0 * (b[0] * b[3] + b[1] * b[2] + b[3] + b[2] + b[1] + b[0]),
            b[0] * b[4] + 2.0 * b[1] * b[3] + 3.0 * b[2] * b[2] + (b[4] + 2.0 * b[3] + 6.0 * b[2] + 2.0 * b[1] + b[0]),
            2.0 * (b[1] * b[4] + b[2] * b[3] + b[4] + b[3] + b[2] + b[1]),
            b[2] * b[4] + b[3] * b[3] + (b[4] + 2.0 * b[3] + b[2]),
        ];
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        let rel = CLUSTER_RADIUS * CLUSTER_RADIUS * max_abs(&h);
        let is_d = (0..5).all(|k| {
            let noise = kappa * (h_abs[k] + lam.abs() * (f[k].abs() + binom[k]));
            (h[k] - lam * f[k]).abs() <= rel.max(noise)
        });
        if is_d {
            ComplexType::D
        } else {
            ComplexType::II
        }
    }

    pub fn classify_real(&self, tol: Tol) -> RealType {
        self.classify(tol).real
    }

    pub fn classify(&self, tol: Tol) -> PetrovType {
        let complex = self.classify_complex(tol);
        let (real, margin) = match complex {
            ComplexType::Zero => (RealType::Zero, None),
            ComplexType::N => (RealType::N, None),
            ComplexType::III => (RealType::III, None),
            ComplexType::I => (self.refine_i(), None),
            ComplexType::D => (self.refine_d(), None),
            ComplexType::II => {
                let (r, margin) = self.refine_ii();
                (r, Some(margin))
            }
        };
        PetrovType { complex, real, degenerate: complex.is_degenerate(), margin }
    }

    /// Monomial coefficients (`t⁴` first) of the quartic after a rotation of
    /// the real line making the leading coefficient as large as possible.
    fn rotated_monomials(&self) -> [f64; 5] {
        let m = max_abs(&self.c);
        let a = quartic_a(&self.c).map(|v| v / m);
        let mut best = a;
        for k in 0..16 {
            let th = PI * k as f64 / 16.0;
            let (s, c) = th.sin_cos();
            let b = transform_a(&a, [[c, -s], [s, c]]);
            if b[0].abs() > best[0].abs() {
                best = b;
            }
        }
        let mono = monomials(&best);
        mono.map(|v| v / mono[0])
    }

    fn refine_i(&self) -> RealType {
        let p = self.rotated_monomials();
        let (b, c, d, e) = (p[1], p[2], p[3], p[4]);
        if self.discriminant() < 0.0 {
            return RealType::IRc;
        }
        let pp = 8.0 * c - 3.0 * b * b;
        let dd = 64.0 * e - 16.0 * c * c + 16.0 * b * b * c - 16.0 * b * d - 3.0 * b.powi(4);
        if pp < 0.0 && dd < 0.0 {
            RealType::IR
        } else {
            RealType::IC
        }
    }

    fn refine_d(&self) -> RealType {
        // the double roots are real iff f' has three real roots
        let p = self.rotated_monomials();
        let (a3, b3, c3, d3) = (4.0, 3.0 * p[1], 2.0 * p[2], p[3]);
        if cubic_discriminant(a3, b3, c3, d3) > 0.0 {
            RealType::DR
        } else {
            RealType::DC
        }
    }

    fn refine_ii(&self) -> (RealType, f64) {
        let p = self.rotated_monomials();
        let fval = |t: f64| (((t + p[1]) * t + p[2]) * t + p[3]) * t + p[4];
        let crit = real_cubic_roots(4.0, 3.0 * p[1], 2.0 * p[2], p[3]);
        let r = crit.into_iter().min_by(|x, y| fval(*x).abs().total_cmp(&fval(*y).abs())).unwrap_or(0.0);
        // f = (t − r)²(t² + u t + w)
        let u = p[1] + 2.0 * r;
        let w = p[2] + 2.0 * r * u - r * r;
        let disc = u * u - 4.0 * w;
        let margin = disc.abs() / (1.0 + u * u + w.abs());
        if disc >= 0.0 {
            (RealType::IIR, margin)
        } else {
            (RealType::IIRc, margin)
        }
    }
}

/// Threshold on `I³ − 27J²` of the normalised quartic: the cluster-radius
/// rule or the propagated coefficient noise, whichever is larger.
fn discriminant_threshold(a: &[f64; 5], eta: f64) -> f64 {
    let (i, j) = invariants_a(a);
    let (i_abs, j_abs) = abs_invariants(&a.map(f64::abs));
    let noise = NOISE_FACTOR * eta.max(f64::EPSILON) * (3.0 * i * i * i_abs + 54.0 * j.abs() * j_abs);
    let root = CLUSTER_RADIUS * CLUSTER_RADIUS * (i.abs().powi(3) + 27.0 * j * j);
    noise.max(root)
}

/// Invariants with every term taken in absolute value, for rounding bounds.
fn abs_invariants(b: &[f64; 5]) -> (f64, f64) {
    let i_abs = b[0] * b[4] + 4.0 * b[1] * b[3] + 3.0 * b[2] * b[2];
    let j_abs = b[0] * (b[2] * b[4] + b[3] * b[3]) + b[1] * (b[1] * b[4] + b[2] * b[3]) + b[2] * (b[1] * b[3] + b[2] * b[2]);
    // first-order response to an absolute perturbation of each a_k
    let i_grad = b[4] + 4.0 * b[3] + 6.0 * b[2] + 4.0 * b[1] + b[0];
    let j_grad = (b[2] * b[4] + b[3] * b[3])
        + 2.0 * (b[2] * b[3] + b[1] * b[4])
        + (b[0] * b[4] + 2.0 * b[1] * b[3] + 3.0 * b[2] * b[2])
        + 2.0 * (b[1] * b[2] + b[0] * b[3])
        + (b[0] * b[2] + b[1] * b[1]);
    (i_abs + i_grad, j_abs + j_grad)
}

fn cubic_discriminant(a: f64, b: f64, c: f64, d: f64) -> f64 {
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c - 4.0 * a * c.powi(3) - 27.0 * a * a * d * d
}

/// Real roots of a cubic with `a ≠ 0`.
fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let q = (3.0 * c - b * b) / 9.0;
    let r = (9.0 * b * c - 27.0 * d - 2.0 * b.powi(3)) / 54.0;
    let disc = q.powi(3) + r * r;
    let shift = -b / 3.0;
    let mut roots = if disc > 0.0 {
        let s = (r + disc.sqrt()).cbrt();
        let t = (r - disc.sqrt()).cbrt();
        vec![shift + s + t]
    } else if q == 0.0 {
        vec![shift]
    } else {
        let th = (r / (-q.powi(3)).sqrt()).clamp(-1.0, 1.0).acos();
        let m = 2.0 * (-q).sqrt();
        (0..3).map(|k| shift + m * ((th + 2.0 * PI * k as f64) / 3.0).cos()).collect()
    };
    // one Newton step each
    for x in roots.iter_mut() {
        let f = ((*x + b) * *x + c) * *x + d;
        let df = (3.0 * *x + 2.0 * b) * *x + c;
        if df != 0.0 {
            *x -= f / df;
        }
    }
    roots
}

pub fn tau(c: &Weyl5) -> f64 {
    2.0 * c[1] * c[1] - 3.0 * c[2] * c[0]
}

pub fn degeneration_residual(c: &Weyl5) -> f64 {
    let (i, j) = invariants_a(&quartic_a(c));
    (i * i * i - 27.0 * j * j) / 27.0
}

pub fn classify_complex(c: Weyl5, scale: f64, tol: Tol) -> ComplexType {
    WeylSide::new(c, scale).classify_complex(tol)
}

pub fn classify_real(c: Weyl5, scale: f64, tol: Tol) -> RealType {
    WeylSide::new(c, scale).classify_real(tol)
}
