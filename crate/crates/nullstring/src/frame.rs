//! Null-tetrad geometry: metric, connection and curvature at a point.
//!
//! Conventions. The metric is `ds² = 2e¹e² + 2e³e⁴`, so `g₁₂ = g₃₄ = 1`.
//! Connection forms satisfy `de^a = −Γ^a_b ∧ e^b` with `Γ_ab = −Γ_ba` and
//! `Γ_ab = Γ_abc e^c`. Curvature is `Ω_ab = dΓ_ab + Γ_ac ∧ Γ^c_b` with
//! components `R_abcd = Ω_ab(∂_c, ∂_d)`. Indices are 0-based in code, so
//! `gamma[3][1][2]` is `Γ₄₂₃`.
//!
//! The SD 2-forms are `e⁴∧e²`, `e¹∧e³`, `e¹∧e² + e³∧e⁴` and the ASD ones
//! `e⁴∧e¹`, `e²∧e³`, `e¹∧e² − e³∧e⁴`. Weyl coefficients are read off the
//! corresponding blocks of `Ω`; the normalisation gives the standard
//! values for the hyperheavenly tetrad (`Ċ⁽⁵⁾ = 2Θ_xxxx`, ...,
//! `C⁽³⁾ = −2Λ/3`, `R = −4Λ`).

use thiserror::Error;

use crate::exprlang::{BinOp, EvalCtx, EvalError, Node, Program};
use crate::jets::{Jet, NVARS};

/// Index partner under `g`: `g_{a, partner(a)} = 1`.
pub const fn partner(a: usize) -> usize {
    [1, 0, 3, 2][a]
}

pub fn metric_ab(a: usize, b: usize) -> f64 {
    if partner(a) == b {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("degenerate tetrad at {0:?}")]
    Degenerate([f64; NVARS]),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A chart with a null coframe written in the expression language.
#[derive(Debug, Clone)]
pub struct FrameField {
    pub program: Program,
    /// `tetrad[a][μ]`: component of `e^{a+1}` along `dx^μ`.
    pub tetrad: [[Node; NVARS]; NVARS],
}

pub type Mat4 = [[f64; NVARS]; NVARS];
pub type Tensor3 = [[[f64; NVARS]; NVARS]; NVARS];
pub type Tensor4 = [[[[f64; NVARS]; NVARS]; NVARS]; NVARS];

/// Connection data at one point.
#[derive(Debug, Clone)]
pub struct ConnectionAtPoint {
    pub point: [f64; NVARS],
    /// `gamma[a][b][c] = Γ_abc`.
    pub gamma: Tensor3,
    /// Max component of `de^a + Γ^a_b ∧ e^b` in the coordinate basis.
    pub structure_residual: f64,
    /// Max absolute tetrad component at the point.
    pub tetrad_scale: f64,
}

impl ConnectionAtPoint {
    /// `Γ_ab(∂_c)` with 1-based labels, for reading off connection forms.
    pub fn g(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[a - 1][b - 1][c - 1]
    }

    /// Components of a connection 1-form in the tetrad basis (1-based pair).
    pub fn form(&self, a: usize, b: usize) -> [f64; NVARS] {
        self.gamma[a - 1][b - 1]
    }

    /// The six independent forms Γ₄₂, Γ₃₁, Γ₁₂+Γ₃₄, Γ₄₁, Γ₃₂, −Γ₁₂+Γ₃₄.
    pub fn six_forms(&self) -> [[f64; NVARS]; 6] {
        let f = |a, b| self.form(a, b);
        let s = |x: [f64; 4], y: [f64; 4], sx: f64| [0, 1, 2, 3].map(|i| sx * x[i] + y[i]);
        [f(4, 2), f(3, 1), s(f(1, 2), f(3, 4), 1.0), f(4, 1), f(3, 2), s(f(1, 2), f(3, 4), -1.0)]
    }
}

/// Five coefficients of one duality side.
pub type Weyl5 = [f64; 5];

#[derive(Debug, Clone)]
pub struct CurvatureSummary {
    pub point: [f64; NVARS],
    /// `c[i-1] = C⁽ⁱ⁾`.
    pub c: Weyl5,
    /// `cdot[i-1] = Ċ⁽ⁱ⁾`.
    pub cdot: Weyl5,
    /// Traceless Ricci `C_ab` (symmetric, tetrad components).
    pub cab: Mat4,
    pub r: f64,
    /// Scalar curvature read from the SD and ASD blocks separately; both
    /// equal `r` by the Bianchi identities.
    pub r_sd: f64,
    pub r_asd: f64,
    /// Size of the curvature components, for relative tolerances.
    pub scale: f64,
}

impl CurvatureSummary {
    /// The ten listed components `C_11, C_12, C_22, C_31, C_32, C_33, C_34, C_41, C_42, C_44`.
    pub fn cab_list(&self) -> [(&'static str, f64); 10] {
        let c = &self.cab;
        [
            ("C11", c[0][0]),
            ("C12", c[0][1]),
            ("C22", c[1][1]),
            ("C31", c[2][0]),
            ("C32", c[2][1]),
            ("C33", c[2][2]),
            ("C34", c[2][3]),
            ("C41", c[3][0]),
            ("C42", c[3][1]),
            ("C44", c[3][3]),
        ]
    }

    pub fn max_cab(&self) -> f64 {
        self.cab_list().iter().fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

/// Everything computed at a point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub connection: ConnectionAtPoint,
    /// `riemann[a][b][c][d] = R_abcd`.
    pub riemann: Tensor4,
    pub curvature: CurvatureSummary,
    /// Γ_abc as order-1 jets, for derivatives of frame quantities.
    pub gamma_jets: Vec<Jet>,
    /// Inverse tetrad `einv[μ][a]` at the point.
    pub einv: Mat4,
    /// First derivatives `d_einv[ν][μ][a] = ∂_ν (∂_a)^μ`.
    pub d_einv: Tensor3,
    /// Structure constants `D^a_bc = de^a(∂_b, ∂_c)`.
    pub structure: Tensor3,
}

impl PointGeometry {
    pub fn gamma_jet(&self, a: usize, b: usize, c: usize) -> &Jet {
        &self.gamma_jets[(a * NVARS + b) * NVARS + c]
    }
}

fn jet_matrix_inverse(m: &[[Jet; NVARS]; NVARS]) -> Option<[[Jet; NVARS]; NVARS]> {
    let order = m[0][0].order();
    let mut a: Vec<Vec<Jet>> = m.iter().map(|r| r.to_vec()).collect();
    let mut inv: Vec<Vec<Jet>> =
        (0..NVARS).map(|i| (0..NVARS).map(|j| Jet::constant(if i == j { 1.0 } else { 0.0 }, order)).collect()).collect();
    let scale = m.iter().flatten().fold(0.0f64, |s, j| s.max(j.value().abs())).max(1e-300);
    for col in 0..NVARS {
        let piv = (col..NVARS).max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))?;
        if a[piv][col].value().abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].recip().ok()?;
        for j in 0..NVARS {
            a[col][j] = &a[col][j] * &p;
            inv[col][j] = &inv[col][j] * &p;
        }
        for i in 0..NVARS {
            if i == col {
                continue;
            }
            let f = a[i][col].clone();
            for j in 0..NVARS {
                a[i][j] = &a[i][j] - &(&f * &a[col][j]);
                inv[i][j] = &inv[i][j] - &(&f * &inv[col][j]);
            }
        }
    }
    let mut out: [[Jet; NVARS]; NVARS] = std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order)));
    for i in 0..NVARS {
        for j in 0..NVARS {
            out[i][j] = inv[i][j].clone();
        }
    }
    Some(out)
}

impl FrameField {
    pub fn new(program: Program, tetrad: [[Node; NVARS]; NVARS]) -> FrameField {
        FrameField { program, tetrad }
    }

    /// Compiles tetrad component sources against the program.
    pub fn from_sources(program: Program, src: &[[String; NVARS]; NVARS]) -> Result<FrameField, crate::exprlang::ExprError> {
        let mut rows: Vec<[Node; NVARS]> = Vec::new();
        for row in src {
            let mut r = Vec::new();
            for s in row {
                r.push(program.compile_str(s)?);
            }
            rows.push(r.try_into().unwrap());
        }
        Ok(FrameField { program, tetrad: rows.try_into().unwrap() })
    }

    pub fn tetrad_jets(&self, point: [f64; NVARS], order: usize) -> Result<[[Jet; NVARS]; NVARS], FrameError> {
        self.tetrad_jets_ctx(&mut EvalCtx::new(point), order)
    }

    pub fn tetrad_jets_ctx(&self, ctx: &mut EvalCtx, order: usize) -> Result<[[Jet; NVARS]; NVARS], FrameError> {
        let mut out: [[Jet; NVARS]; NVARS] = std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order)));
        for a in 0..NVARS {
            for mu in 0..NVARS {
                let j = self.program.eval(&self.tetrad[a][mu], order, ctx)?;
                if !j.is_finite() {
                    return Err(FrameError::NonFinite("tetrad"));
                }
                out[a][mu] = j;
            }
        }
        Ok(out)
    }

    /// `g_μν = Σ g_ab e^a_μ e^b_ν` as jets.
    pub fn metric_from_tetrad(&self, point: [f64; NVARS], order: usize) -> Result<[[Jet; NVARS]; NVARS], FrameError> {
        let e = self.tetrad_jets(point, order)?;
        if jet_matrix_inverse(&e).is_none() {
            return Err(FrameError::Degenerate(point));
        }
        Ok(metric_from_jets(&e))
    }

    /// New frame `ẽ^a = L^a_b e^b` with `L` given by nodes of the same program.
    pub fn transformed(&self, l: &[[Node; NVARS]; NVARS]) -> FrameField {
        let tetrad = std::array::from_fn(|a| {
            std::array::from_fn(|mu| {
                let mut acc: Option<Node> = None;
                for b in 0..NVARS {
                    if l[a][b] == Node::Const(0.0) {
                        continue;
                    }
                    let term = Node::Bin(BinOp::Mul, Box::new(l[a][b].clone()), Box::new(self.tetrad[b][mu].clone()));
                    acc = Some(match acc {
                        None => term,
                        Some(prev) => Node::Bin(BinOp::Add, Box::new(prev), Box::new(term)),
                    });
                }
                acc.unwrap_or(Node::Const(0.0))
            })
        });
        FrameField { program: self.program.clone(), tetrad }
    }

    /// Constant frame change `ẽ^a = L^a_b e^b`.
    pub fn transformed_const(&self, l: &Mat4) -> FrameField {
        let nodes = std::array::from_fn(|a| std::array::from_fn(|b| Node::Const(l[a][b])));
        self.transformed(&nodes)
    }

    pub fn connection(&self, point: [f64; NVARS]) -> Result<ConnectionAtPoint, FrameError> {
        Ok(self.geometry(point)?.connection)
    }

    pub fn curvature(&self, point: [f64; NVARS]) -> Result<CurvatureSummary, FrameError> {
        Ok(self.geometry(point)?.curvature)
    }

    pub fn geometry(&self, point: [f64; NVARS]) -> Result<PointGeometry, FrameError> {
        self.geometry_ctx(&mut EvalCtx::new(point))
    }

    pub fn geometry_ctx(&self, ctx: &mut EvalCtx) -> Result<PointGeometry, FrameError> {
        let point = ctx.point;
        let e = self.tetrad_jets_ctx(ctx, 2)?;
        let einv2 = jet_matrix_inverse(&e).ok_or(FrameError::Degenerate(point))?;
        let einv: [[Jet; NVARS]; NVARS] = std::array::from_fn(|m| std::array::from_fn(|a| einv2[m][a].truncate(1)));

        // de^a as coordinate 2-form jets of order 1
        let mut de: Vec<Jet> = Vec::with_capacity(64);
        for a in 0..NVARS {
            for mu in 0..NVARS {
                for nu in 0..NVARS {
                    let dmu = e[a][nu].derivative(mu).map_err(|_| FrameError::NonFinite("tetrad derivative"))?;
                    let dnu = e[a][mu].derivative(nu).map_err(|_| FrameError::NonFinite("tetrad derivative"))?;
                    de.push(&dmu - &dnu);
                }
            }
        }
        let de_at = |a: usize, mu: usize, nu: usize| &de[(a * NVARS + mu) * NVARS + nu];

        // D^a_bc = de^a(∂_b, ∂_c)
        let mut dj: Vec<Jet> = Vec::with_capacity(64);
        for a in 0..NVARS {
            for b in 0..NVARS {
                for c in 0..NVARS {
                    let mut acc = Jet::zero(1);
                    for mu in 0..NVARS {
                        let t = &einv[mu][b];
                        for nu in 0..NVARS {
                            acc = &acc + &(&(t * &einv[nu][c]) * de_at(a, mu, nu));
                        }
                    }
                    dj.push(acc);
                }
            }
        }
        let d_up = |a: usize, b: usize, c: usize| &dj[(a * NVARS + b) * NVARS + c];
        let d_low = |a: usize, b: usize, c: usize| d_up(partner(a), b, c);

        // Γ_abc = ½(D_abc + D_bca − D_cab)
        let mut gj: Vec<Jet> = Vec::with_capacity(64);
        for a in 0..NVARS {
            for b in 0..NVARS {
                for c in 0..NVARS {
                    let s = &(d_low(a, b, c) + d_low(b, c, a)) - d_low(c, a, b);
                    gj.push(s.scale(0.5));
                }
            }
        }
        let gjet = |a: usize, b: usize, c: usize| &gj[(a * NVARS + b) * NVARS + c];
        let gamma: Tensor3 = std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| gjet(a, b, c).value())));
        let structure: Tensor3 = std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| d_up(a, b, c).value())));
        let einv0: Mat4 = std::array::from_fn(|m| std::array::from_fn(|a| einv[m][a].value()));
        let d_einv: Tensor3 = std::array::from_fn(|nu| std::array::from_fn(|m| std::array::from_fn(|a| einv[m][a].d1(nu))));

        // structure-equation residual in coordinates
        let e0: Mat4 = std::array::from_fn(|a| std::array::from_fn(|m| e[a][m].value()));
        let tetrad_scale = e0.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut residual = 0.0f64;
        for a in 0..NVARS {
            // Γ^a_b(∂_μ) = Γ_{partner(a) b c} e^c_μ
            let gm: Mat4 = std::array::from_fn(|b| std::array::from_fn(|mu| (0..NVARS).map(|c| gamma[partner(a)][b][c] * e0[c][mu]).sum()));
            for mu in 0..NVARS {
                for nu in 0..NVARS {
                    let wedge: f64 = (0..NVARS).map(|b| gm[b][mu] * e0[b][nu] - gm[b][nu] * e0[b][mu]).sum();
                    residual = residual.max((de_at(a, mu, nu).value() + wedge).abs());
                }
            }
        }

        // frame derivative ∂_c Γ_abd
        let frame_d = |j: &Jet, c: usize| -> f64 { (0..NVARS).map(|mu| einv0[mu][c] * j.d1(mu)).sum() };
        let mut riemann: Tensor4 = [[[[0.0; NVARS]; NVARS]; NVARS]; NVARS];
        for a in 0..NVARS {
            for b in 0..NVARS {
                for c in 0..NVARS {
                    for d in 0..NVARS {
                        let mut v = frame_d(gjet(a, b, d), c) - frame_d(gjet(a, b, c), d);
                        for k in 0..NVARS {
                            v += gamma[a][b][k] * structure[k][c][d];
                            // Γ^k_b = Γ_{partner(k) b}
                            v += gamma[a][k][c] * gamma[partner(k)][b][d] - gamma[a][k][d] * gamma[partner(k)][b][c];
                        }
                        riemann[a][b][c][d] = v;
                    }
                }
            }
        }
        if riemann.iter().flatten().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(FrameError::NonFinite("curvature"));
        }
        let curvature = decompose(point, &riemann);
        Ok(PointGeometry {
            connection: ConnectionAtPoint { point, gamma, structure_residual: residual, tetrad_scale },
            riemann,
            curvature,
            gamma_jets: gj,
            einv: einv0,
            d_einv,
            structure,
        })
    }
}

pub fn metric_from_jets(e: &[[Jet; NVARS]; NVARS]) -> [[Jet; NVARS]; NVARS] {
    let order = e[0][0].order();
    std::array::from_fn(|mu| {
        std::array::from_fn(|nu| {
            let mut acc = Jet::zero(order);
            for (a, b) in [(0, 1), (2, 3)] {
                acc = &acc + &(&e[a][mu] * &e[b][nu]);
                acc = &acc + &(&e[b][mu] * &e[a][nu]);
            }
            acc
        })
    })
}

/// Coefficient of a 2-form `ω_cd = ω(∂_c, ∂_d)` on the six basis forms
/// `[e⁴∧e², e¹∧e³, (e¹²+e³⁴), e⁴∧e¹, e²∧e³, (e¹²−e³⁴)]`.
fn two_form_coords(w: &Mat4) -> [f64; 6] {
    [w[3][1], w[0][2], 0.5 * (w[0][1] + w[2][3]), w[3][0], w[1][2], 0.5 * (w[0][1] - w[2][3])]
}

/// SD/ASD decomposition of the curvature components.
pub fn decompose(point: [f64; NVARS], r: &Tensor4) -> CurvatureSummary {
    let omega = |a: usize, b: usize| -> Mat4 { r[a][b] };
    let comb = |x: Mat4, y: Mat4, sx: f64| -> Mat4 { std::array::from_fn(|i| std::array::from_fn(|j| sx * x[i][j] + y[i][j])) };
    // SD rows: Ω₄₂, Ω₃₁, Ω₁₂+Ω₃₄ on SD columns a, b, c
    let sd_rows = [omega(3, 1), omega(2, 0), comb(omega(0, 1), omega(2, 3), 1.0)];
    let asd_rows = [omega(3, 0), omega(2, 1), comb(omega(0, 1), omega(2, 3), -1.0)];
    let n: [[f64; 3]; 3] = std::array::from_fn(|i| {
        let k = two_form_coords(&sd_rows[i]);
        [k[0], k[1], k[2]]
    });
    let m: [[f64; 3]; 3] = std::array::from_fn(|i| {
        let k = two_form_coords(&asd_rows[i]);
        [k[3], k[4], k[5]]
    });

    let cdot3 = -(2.0 / 3.0) * (m[0][1] + m[2][2]);
    let cdot = [-2.0 * m[1][1], -2.0 * m[1][2], cdot3, -2.0 * m[0][2], 2.0 * m[0][0]];
    let c3 = (2.0 / 3.0) * (n[1][0] + n[2][2]);
    let c = [-2.0 * n[1][1], -2.0 * n[1][2], c3, -2.0 * n[0][2], 2.0 * n[0][0]];
    let r_asd = 12.0 * (m[0][1] + 0.5 * cdot3);
    let r_sd = 12.0 * (-n[1][0] + 0.5 * c3);

    // Ricci_bd = −R^a_{bad}; R = g^{bd} Ricci_bd
    let ricci: Mat4 = std::array::from_fn(|b| std::array::from_fn(|d| -(0..NVARS).map(|a| r[partner(a)][b][a][d]).sum::<f64>()));
    let scalar: f64 = (0..NVARS).map(|b| ricci[b][partner(b)]).sum();
    let cab: Mat4 = std::array::from_fn(|a| std::array::from_fn(|b| -0.5 * (ricci[a][b] - 0.25 * scalar * metric_ab(a, b))));
    let scale = r.iter().flatten().flatten().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    CurvatureSummary { point, c, cdot, cab, r: scalar, r_sd, r_asd, scale }
}

/// Spinorial images of the coframe and frame, as tetrad-basis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorFrame {
    /// `g_up[A][B][a]`: coefficient of `e^a` in `g^{AḂ}`.
    pub g_up: [[[f64; NVARS]; 2]; 2],
    /// `d_low[A][B][a]`: coefficient of `∂_a` in `∂_{AḂ}`.
    pub d_low: [[[f64; NVARS]; 2]; 2],
}

pub const EPS: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];

impl Default for SpinorFrame {
    fn default() -> Self {
        SpinorFrame::new()
    }
}

impl SpinorFrame {
    pub fn new() -> SpinorFrame {
        let s = std::f64::consts::SQRT_2;
        let unit = |a: usize, v: f64| {
            let mut x = [0.0; NVARS];
            x[a] = v;
            x
        };
        SpinorFrame {
            g_up: [[unit(3, s), unit(1, s)], [unit(0, s), unit(2, -s)]],
            d_low: [[unit(3, -s), unit(1, -s)], [unit(0, -s), unit(2, s)]],
        }
    }

    /// `m_A = ε_AB m^B`.
    pub fn lower(m: [f64; 2]) -> [f64; 2] {
        [EPS[0][1] * m[1], EPS[1][0] * m[0]]
    }

    /// `m^A = m_B ε^{BA}`.
    pub fn raise(m: [f64; 2]) -> [f64; 2] {
        [m[1] * EPS[1][0], m[0] * EPS[0][1]]
    }

    /// Tetrad change `ẽ^a = L^a_b e^b` generated by two normalised spinor
    /// pairs (`k^A l_A = 1` on each side).
    pub fn spin_transformation(k: [f64; 2], l: [f64; 2], kd: [f64; 2], ld: [f64; 2]) -> Mat4 {
        let f = SpinorFrame::new();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let comb = |u: [f64; 2], v: [f64; 2]| -> [f64; NVARS] {
            let mut out = [0.0; NVARS];
            for (aa, ua) in u.iter().enumerate() {
                for (bb, vb) in v.iter().enumerate() {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += s * ua * vb * f.g_up[aa][bb][c];
                    }
                }
            }
            out
        };
        let e1 = comb(k, ld);
        let e2 = comb(l, kd);
        let e3 = comb(k, kd).map(|v| -v);
        let e4 = comb(l, ld);
        [e1, e2, e3, e4]
    }

    /// `k^A l_A`.
    pub fn contract(k: [f64; 2], l: [f64; 2]) -> f64 {
        let ku = SpinorFrame::raise(k);
        ku[0] * l[0] + ku[1] * l[1]
    }
}
