//! Truncated Taylor arithmetic in four variables.
//!
//! A [`Jet`] of order `k` stores every Taylor coefficient `∂^α f / α!` with
//! `|α| ≤ k`, in graded-lexicographic order. The orderings for different `k`
//! are prefixes of each other, so truncation is a slice operation.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use thiserror::Error;

/// Number of independent variables.
pub const NVARS: usize = 4;

/// Highest supported order. Nested derivative nodes in expressions raise the
/// order needed for inner sub-expressions, so this is well above the working
/// order used by the geometry code.
pub const MAX_ORDER: usize = 8;

/// Relative size below which a denominator counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-13;

/// A multi-index `α = (α₀, α₁, α₂, α₃)`.
pub type MultiIndex = [u8; NVARS];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("jet order {0} exceeds maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("multi-index {0:?} out of range for order {1}")]
    IndexOutOfRange(MultiIndex, usize),
    #[error("domain error: {0}")]
    Domain(String),
}

struct Layout {
    monos: Vec<MultiIndex>,
    degree: Vec<u8>,
    // index lookup, dense over (MAX_ORDER+1)^4
    lookup: Vec<u32>,
    // (i, j, i*j) triples sorted by total degree
    mul: Vec<(u32, u32, u32)>,
    mul_len: [usize; MAX_ORDER + 1],
}

const BASE: usize = MAX_ORDER + 1;

fn key(a: &MultiIndex) -> usize {
    ((a[0] as usize * BASE + a[1] as usize) * BASE + a[2] as usize) * BASE + a[3] as usize
}

fn layout() -> &'static Layout {
    static L: OnceLock<Layout> = OnceLock::new();
    L.get_or_init(|| {
        let mut monos = Vec::new();
        for d in 0..=MAX_ORDER as u8 {
            // graded lex: within a degree, larger leading exponents first
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    for c in (0..=d - a - b).rev() {
                        monos.push([a, b, c, d - a - b - c]);
                    }
                }
            }
        }
        let degree: Vec<u8> = monos.iter().map(|m| m.iter().sum()).collect();
        let mut lookup = vec![u32::MAX; BASE.pow(4)];
        for (i, m) in monos.iter().enumerate() {
            lookup[key(m)] = i as u32;
        }
        let mut mul = Vec::new();
        for total in 0..=MAX_ORDER as u8 {
            for (i, mi) in monos.iter().enumerate() {
                if degree[i] > total {
                    break;
                }
                for (j, mj) in monos.iter().enumerate() {
                    if degree[i] + degree[j] > total {
                        break;
                    }
                    if degree[i] + degree[j] != total {
                        continue;
                    }
                    let s = [mi[0] + mj[0], mi[1] + mj[1], mi[2] + mj[2], mi[3] + mj[3]];
                    mul.push((i as u32, j as u32, lookup[key(&s)]));
                }
            }
        }
        let mut mul_len = [0; MAX_ORDER + 1];
        for (k, slot) in mul_len.iter_mut().enumerate() {
            *slot = mul.iter().take_while(|&&(i, j, _)| (degree[i as usize] + degree[j as usize]) as usize <= k).count();
        }
        Layout { monos, degree, lookup, mul, mul_len }
    })
}

/// Number of coefficients of a jet of the given order, `C(4+k, 4)`.
pub fn coeff_len(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) * (order + 4) / 24
}

/// Position of a multi-index in graded-lex order.
pub fn index_of(alpha: &MultiIndex) -> Option<usize> {
    if alpha.iter().map(|&a| a as usize).sum::<usize>() > MAX_ORDER {
        return None;
    }
    let i = layout().lookup[key(alpha)];
    (i != u32::MAX).then_some(i as usize)
}

/// Multi-index stored at a position.
pub fn multi_index(i: usize) -> MultiIndex {
    layout().monos[i]
}

fn factorial(a: &MultiIndex) -> f64 {
    a.iter().map(|&k| (1..=k as u32).map(f64::from).product::<f64>()).product()
}

/// Truncated Taylor expansion of a scalar function at a point.
#[derive(Clone, PartialEq)]
pub struct Jet {
    order: usize,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet[{}]{:?}", self.order, self.c)
    }
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = vec![0.0; coeff_len(order)];
        c[0] = value;
        Jet { order, c }
    }

    pub fn zero(order: usize) -> Jet {
        Jet::constant(0.0, order)
    }

    /// The coordinate function `x_var` expanded at `value`.
    pub fn variable(var: usize, value: f64, order: usize) -> Jet {
        let mut j = Jet::constant(value, order);
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    /// Builds a jet from raw graded-lex coefficients.
    pub fn from_coeffs(order: usize, c: Vec<f64>) -> Result<Jet, JetError> {
        if order > MAX_ORDER {
            return Err(JetError::OrderTooHigh(order));
        }
        if c.len() != coeff_len(order) {
            return Err(JetError::Domain(format!("expected {} coefficients for order {order}, got {}", coeff_len(order), c.len())));
        }
        Ok(Jet { order, c })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Taylor coefficient `∂^α f / α!`, zero beyond the stored order.
    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        match index_of(alpha) {
            Some(i) if i < self.c.len() => self.c[i],
            _ => 0.0,
        }
    }

    /// The partial derivative `∂^α f` at the base point.
    pub fn partial(&self, alpha: &MultiIndex) -> Result<f64, JetError> {
        match index_of(alpha) {
            Some(i) if i < self.c.len() => Ok(self.c[i] * factorial(alpha)),
            _ => Err(JetError::IndexOutOfRange(*alpha, self.order)),
        }
    }

    /// First partial derivative along one variable.
    pub fn d1(&self, var: usize) -> f64 {
        if self.order == 0 {
            0.0
        } else {
            self.c[1 + var]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet { order, c: self.c[..coeff_len(order)].to_vec() }
    }

    /// Pads with zero coefficients up to `order`. The result is only exact
    /// when the function is a polynomial of degree at most `self.order`.
    fn widen(&self, order: usize) -> Jet {
        let mut c = self.c.clone();
        c.resize(coeff_len(order), 0.0);
        Jet { order, c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { order: self.order, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add_const(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    fn check_pair(&self, other: &Jet) -> Result<(), JetError> {
        if self.order == other.order {
            Ok(())
        } else {
            Err(JetError::OrderMismatch(self.order, other.order))
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_pair(other)?;
        Ok(self + other)
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_pair(other)?;
        Ok(self * other)
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_pair(other)?;
        self.div(other)
    }

    fn mul_impl(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let l = layout();
        let mut c = vec![0.0; coeff_len(order)];
        for &(i, j, t) in &l.mul[..l.mul_len[order]] {
            c[t as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet { order, c }
    }

    fn check_denominator(&self, what: &str) -> Result<(), JetError> {
        let scale = self.max_abs();
        if !self.c[0].is_finite() || self.c[0] == 0.0 || self.c[0].abs() < SINGULAR_RTOL * scale {
            return Err(JetError::Domain(format!("{what} of near-zero value {:e}", self.c[0])));
        }
        Ok(())
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        self.check_denominator("reciprocal")?;
        let b0 = self.c[0];
        let mut f = Vec::with_capacity(self.order + 1);
        let mut t = 1.0 / b0;
        for _ in 0..=self.order {
            f.push(t);
            t *= -1.0 / b0;
        }
        Ok(self.compose(&f))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self * &other.recip()?)
    }

    /// Applies a univariate function given by its Taylor coefficients
    /// `f[n] = f⁽ⁿ⁾(b₀)/n!` at the value `b₀` of `self`.
    pub fn compose(&self, f: &[f64]) -> Jet {
        let k = self.order;
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = Jet::constant(f[k.min(f.len() - 1)], k);
        for n in (0..k).rev() {
            r = &r * &h;
            r.c[0] += f[n];
        }
        r
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        let mut f = Vec::with_capacity(self.order + 1);
        let mut t = e;
        for n in 0..=self.order {
            f.push(t);
            t /= (n + 1) as f64;
        }
        self.compose(&f)
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let b0 = self.c[0];
        if !(b0 > 0.0) {
            return Err(JetError::Domain(format!("ln of non-positive value {b0:e}")));
        }
        self.check_denominator("ln")?;
        let mut f = vec![b0.ln()];
        let mut p = 1.0;
        for n in 1..=self.order {
            p *= b0;
            let s = if n % 2 == 1 { 1.0 } else { -1.0 };
            f.push(s / (n as f64 * p));
        }
        Ok(self.compose(&f))
    }

    pub fn powi(&self, n: i64) -> Result<Jet, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Jet::constant(1.0, self.order);
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }

    /// `self^(p/q)` for a reduced rational exponent with `q > 0`.
    pub fn pow_rational(&self, p: i64, q: i64) -> Result<Jet, JetError> {
        if q == 1 {
            return self.powi(p);
        }
        let b0 = self.c[0];
        let r = p as f64 / q as f64;
        if b0 < 0.0 && q % 2 == 0 {
            return Err(JetError::Domain(format!("even root of negative value {b0:e}")));
        }
        self.check_denominator("fractional power")?;
        let mut f0 = b0.abs().powf(r);
        if b0 < 0.0 && p % 2 != 0 {
            f0 = -f0;
        }
        let mut f = vec![f0];
        for n in 1..=self.order {
            let prev = f[n - 1];
            f.push(prev * (r - (n - 1) as f64) / (n as f64 * b0));
        }
        Ok(self.compose(&f))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        if !(self.c[0] > 0.0) {
            return Err(JetError::Domain(format!("sqrt of non-positive value {:e}", self.c[0])));
        }
        self.pow_rational(1, 2)
    }

    pub fn sin(&self) -> Jet {
        self.compose(&trig_coeffs(self.c[0], self.order, 0))
    }

    pub fn cos(&self) -> Jet {
        self.compose(&trig_coeffs(self.c[0], self.order, 1))
    }

    pub fn atan(&self) -> Jet {
        let b0 = self.c[0];
        let k = self.order;
        // series of 1/(1 + (b0 + h)^2) = 1/(a0 + a1 h + h^2)
        let a0 = 1.0 + b0 * b0;
        let a1 = 2.0 * b0;
        let mut r = vec![0.0; k.max(1)];
        for n in 0..r.len() {
            let mut s = if n == 0 { 1.0 } else { 0.0 };
            if n >= 1 {
                s -= a1 * r[n - 1];
            }
            if n >= 2 {
                s -= r[n - 2];
            }
            r[n] = s / a0;
        }
        let mut f = vec![b0.atan()];
        for n in 1..=k {
            f.push(r[n - 1] / n as f64);
        }
        self.compose(&f)
    }

    /// `∂f/∂x_var` as a jet of one lower order.
    pub fn derivative(&self, var: usize) -> Result<Jet, JetError> {
        if self.order == 0 {
            return Err(JetError::Domain("derivative of an order-0 jet".into()));
        }
        let l = layout();
        let order = self.order - 1;
        let mut c = vec![0.0; coeff_len(order)];
        for (i, slot) in c.iter_mut().enumerate() {
            let mut a = l.monos[i];
            a[var] += 1;
            let src = l.lookup[key(&a)] as usize;
            *slot = self.c[src] * a[var] as f64;
        }
        Ok(Jet { order, c })
    }

    /// Antiderivative along `x_var` that vanishes on the hyperplane through
    /// the base point, as a jet of one higher order.
    pub fn antiderivative(&self, var: usize) -> Result<Jet, JetError> {
        let order = self.order + 1;
        if order > MAX_ORDER {
            return Err(JetError::OrderTooHigh(order));
        }
        let l = layout();
        let mut c = vec![0.0; coeff_len(order)];
        for (i, slot) in c.iter_mut().enumerate() {
            let a = l.monos[i];
            if a[var] == 0 {
                continue;
            }
            let mut b = a;
            b[var] -= 1;
            *slot = self.c[l.lookup[key(&b)] as usize] / a[var] as f64;
        }
        Ok(Jet { order, c })
    }

    /// Keeps only the coefficients with zero exponent in `var`.
    pub fn restrict(&self, var: usize) -> Jet {
        let l = layout();
        let mut j = self.clone();
        for (i, v) in j.c.iter_mut().enumerate() {
            if l.monos[i][var] != 0 {
                *v = 0.0;
            }
        }
        j
    }

    /// Evaluates the Taylor polynomial at a displacement `h`.
    pub fn eval_at(&self, h: &[f64; NVARS]) -> f64 {
        let l = layout();
        self.c
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let m = &l.monos[i];
                v * (0..NVARS).map(|k| h[k].powi(m[k] as i32)).product::<f64>()
            })
            .sum()
    }

    /// Total degree of the stored coefficient at position `i`.
    pub fn degree_at(i: usize) -> usize {
        layout().degree[i] as usize
    }
}

fn trig_coeffs(b0: f64, order: usize, shift: usize) -> Vec<f64> {
    let (s, c) = b0.sin_cos();
    let cycle = [s, c, -s, -c];
    let mut f = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for n in 0..=order {
        if n > 0 {
            fact *= n as f64;
        }
        f.push(cycle[(n + shift) % 4] / fact);
    }
    f
}

fn zip_min(a: &Jet, b: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
    let order = a.order.min(b.order);
    let n = coeff_len(order);
    Jet { order, c: (0..n).map(|i| op(a.c[i], b.c[i])).collect() }
}

// Binary operators truncate to the lower of the two orders, which is exact
// for the truncated result. `try_*` variants reject mismatched orders.
impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        zip_min(self, rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        zip_min(self, rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_impl(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Polynomial jets can be padded to a higher order without loss.
pub fn widen_polynomial(j: &Jet, order: usize) -> Jet {
    j.widen(order)
}
