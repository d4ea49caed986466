//! Batch verification of catalog records.
//!
//! Every record is evaluated at seeded sample points. Points are processed
//! in parallel when the `parallel` feature is on; results are gathered in
//! point order, so the report does not depend on scheduling.

use serde::Serialize;

use crate::catalog::{Catalog, CatalogError, Generator, Record};
use crate::exprlang::EvalCtx;
use crate::frame::{CurvatureSummary, PointGeometry};
use crate::jets::NVARS;
use crate::pdes::{self, Residual};
use crate::strings::{compose_symbol, consensus, witness_at, CongruenceReport, Side, StringWitness};
use crate::weyl::{self, ComplexType, PetrovType, Tol, WeylSide};

/// Relative tolerance of the reduced field equations.
pub const PDE_RTOL: f64 = 1e-9;
/// Extra allowance, relative to the curvature scale, on closed-form curvature
/// values that vanish.
pub const VALUE_SCALE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub points: usize,
    pub seed: u64,
    pub tol: Tol,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { points: 20, seed: 1, tol: Tol::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest residual (or ratio) seen over the points.
    pub max_residual: f64,
    /// Allowed value for `max_residual`; the check passes when below it.
    pub limit: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, max_residual: f64, limit: f64) -> Check {
        let passed = max_residual.is_finite() && max_residual <= limit;
        Check { name: name.into(), passed, max_residual, limit, detail: String::new() }
    }

    fn verdict(name: impl Into<String>, passed: bool, detail: String) -> Check {
        Check { name: name.into(), passed, max_residual: if passed { 0.0 } else { 1.0 }, limit: 0.0, detail }
    }

    /// `limit / max_residual`, or infinity for an exact zero.
    pub fn margin(&self) -> f64 {
        if self.max_residual == 0.0 {
            f64::INFINITY
        } else {
            self.limit / self.max_residual
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordReport {
    pub id: String,
    pub expected_type: String,
    #[serde(rename = "type")]
    pub computed_type: Option<String>,
    pub lambda: f64,
    pub points: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl RecordReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Everything computed at one point.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub point: [f64; NVARS],
    pub structure: f64,
    pub structure_limit: f64,
    pub curvature: CurvatureSummary,
    pub witnesses: Vec<StringWitness>,
    /// `(name, residual)` per generator equation.
    pub pdes: Vec<(String, Residual)>,
    /// `(key, computed, expected)`.
    pub values: Vec<(String, f64, f64)>,
    pub violations: Vec<(String, f64)>,
}

fn generator_residuals(rec: &Record, ctx: &mut EvalCtx) -> Result<Vec<(String, Residual)>, String> {
    let prog = rec.program();
    let mut out = Vec::new();
    for g in &rec.generators {
        match g {
            Generator::Przanowski { q } => {
                out.push(("przanowski".into(), pdes::residual_przanowski(prog, q, ctx).map_err(|e| e.to_string())?))
            }
            Generator::ParaKahler { m } => {
                out.push(("para-kahler".into(), pdes::residual_para_kahler(prog, m, ctx).map_err(|e| e.to_string())?))
            }
            Generator::Hyperheavenly { theta } => {
                out.push(("hyperheavenly".into(), pdes::residual_hyperheavenly(prog, theta, ctx).map_err(|e| e.to_string())?))
            }
            Generator::HhSplit { a, b_y, c_yy } => {
                let r = pdes::residual_hh_split(prog, a, b_y, c_yy, ctx).map_err(|e| e.to_string())?;
                for (i, r) in r.into_iter().enumerate() {
                    out.push((format!("hh-split[{}]", i + 1), r));
                }
            }
            Generator::Liouville { l, n } => {
                out.push(("liouville".into(), pdes::residual_liouville(prog, l, n, ctx).map_err(|e| e.to_string())?))
            }
            Generator::LiouvillePk { u, h, vars } => {
                let r = pdes::residual_liouville_pk(prog, u, h, (&vars[0], &vars[1]), ctx).map_err(|e| e.to_string())?;
                out.push((format!("liouville-pk({},{})", vars[0], vars[1]), r));
            }
            Generator::ExpandingPk { f, z } => {
                let r = pdes::residual_expanding_pk(prog, f, z, ctx).map_err(|e| e.to_string())?;
                out.push(("expanding-pk".into(), r[0]));
                out.push(("expanding-pk constraint".into(), r[1]));
            }
        }
    }
    Ok(out)
}

/// Geometry and all pointwise checks at `p`.
pub fn eval_point(rec: &Record, p: [f64; NVARS]) -> Result<PointEval, String> {
    let mut ctx = EvalCtx::new(p);
    let geom: PointGeometry = rec.frame.geometry_ctx(&mut ctx).map_err(|e| e.to_string())?;
    let prog = rec.program();
    let mut witnesses = Vec::with_capacity(rec.distributions.len());
    for d in &rec.distributions {
        witnesses.push(witness_at(prog, &geom, d, &mut ctx).map_err(|e| e.to_string())?);
    }
    let pdes = generator_residuals(rec, &mut ctx)?;
    let mut values = Vec::new();
    for (k, n) in &rec.expected {
        let want = prog.eval(n, 0, &mut ctx).map_err(|e| format!("expected {}: {e}", k.name()))?.value();
        values.push((k.name(), k.get(&geom.curvature), want));
    }
    let gmax = geom.connection.gamma.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PointEval {
        point: p,
        structure: geom.connection.structure_residual,
        structure_limit: 1e-10 * (1.0 + geom.connection.tetrad_scale) * (1.0 + gmax),
        curvature: geom.curvature,
        witnesses,
        pdes,
        values,
        violations: rec.constraint_violations(p),
    })
}

/// Evaluates the points, in parallel with the `parallel` feature.
pub fn eval_points(rec: &Record, points: &[[f64; NVARS]]) -> Vec<Result<PointEval, String>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(|p| eval_point(rec, *p)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        eval_points_serial(rec, points)
    }
}

pub fn eval_points_serial(rec: &Record, points: &[[f64; NVARS]]) -> Vec<Result<PointEval, String>> {
    points.iter().map(|p| eval_point(rec, *p)).collect()
}

fn max_by<F: Fn(&PointEval) -> f64>(evals: &[PointEval], f: F) -> f64 {
    evals.iter().map(f).fold(0.0f64, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

/// Side classification over the points.
pub fn side_types(evals: &[PointEval], side: Side, tol: Tol) -> Vec<ComplexType> {
    evals
        .iter()
        .map(|e| {
            let c = match side {
                Side::Sd => e.curvature.c,
                Side::Asd => e.curvature.cdot,
            };
            weyl::classify_complex(c, e.curvature.scale, tol)
        })
        .collect()
}

pub fn congruence_reports(rec: &Record, evals: &[PointEval], tol: Tol) -> Vec<CongruenceReport> {
    rec.distributions
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let w: Vec<StringWitness> = evals.iter().map(|e| e.witnesses[i]).collect();
            CongruenceReport::from_witnesses(d, &w, tol)
        })
        .collect()
}

/// Runs every check on one record.
pub fn verify_record(rec: &Record, cfg: &VerifyConfig) -> RecordReport {
    verify_record_with(rec, cfg, eval_points)
}

/// Point evaluator used by [`verify_record_with`].
pub type EvalFn = fn(&Record, &[[f64; NVARS]]) -> Vec<Result<PointEval, String>>;

pub fn verify_record_with(rec: &Record, cfg: &VerifyConfig, eval: EvalFn) -> RecordReport {
    let tol = cfg.tol;
    let mut report = RecordReport {
        id: rec.id().to_string(),
        expected_type: rec.expected_type.to_string(),
        computed_type: None,
        lambda: rec.lambda(),
        points: 0,
        passed: false,
        checks: Vec::new(),
    };
    let points = match rec.sample_points(cfg.points, cfg.seed) {
        Ok(p) => p,
        Err(e) => {
            report.checks.push(Check::verdict("sampling", false, e.to_string()));
            return report;
        }
    };
    report.points = points.len();
    let mut evals = Vec::with_capacity(points.len());
    for (p, r) in points.iter().zip(eval(rec, &points)) {
        match r {
            Ok(e) => evals.push(e),
            Err(msg) => {
                report.checks.push(Check::verdict("evaluation", false, format!("at {p:?}: {msg}")));
                return report;
            }
        }
    }
    let checks = &mut report.checks;

    let viol: Vec<String> = evals.iter().flat_map(|e| e.violations.iter().map(|(w, v)| format!("{w} ({v:e})"))).collect();
    checks.push(Check::verdict("constraints", viol.is_empty(), viol.first().cloned().unwrap_or_default()));

    checks.push(Check::new("structure equations", max_by(&evals, |e| e.structure / e.structure_limit), 1.0));

    let cab = max_by(&evals, |e| e.curvature.max_cab() / (tol.atol + tol.rtol * e.curvature.scale));
    checks.push(Check::new("traceless Ricci", cab, 1.0));
    let lam = rec.lambda();
    let r = max_by(&evals, |e| (e.curvature.r + 4.0 * lam).abs());
    checks.push(Check::new("scalar curvature", r, tol.atol + tol.rtol * (1.0 + lam.abs())));

    for (i, (name, _)) in evals[0].pdes.iter().enumerate() {
        checks.push(Check::new(format!("pde {name}"), max_by(&evals, |e| e.pdes[i].1.relative()), PDE_RTOL));
    }

    for (i, (key, _, _)) in evals[0].values.iter().enumerate() {
        let worst = max_by(&evals, |e| {
            let (_, got, want) = &e.values[i];
            (got - want).abs() / (tol.atol + tol.rtol * want.abs() + VALUE_SCALE_RTOL * e.curvature.scale)
        });
        checks.push(Check::new(format!("value {key}"), worst, 1.0));
    }

    let reports = congruence_reports(rec, &evals, tol);
    for rep in &reports {
        checks.push(Check::new(format!("frobenius {}", rep.label), rep.integrability_ratio, 1.0));
    }
    let mut sides = Vec::new();
    for (side, want) in [(Side::Sd, &rec.expected_type.sd), (Side::Asd, &rec.expected_type.asd)] {
        let types = side_types(&evals, side, tol);
        let got = consensus(side, &types);
        let detail = match &got {
            Ok(t) => format!("{} (expected {})", t.symbol(), want.kind.symbol()),
            Err(e) => e.to_string(),
        };
        checks.push(Check::verdict(format!("{} type", side.name()), got.as_ref().is_ok_and(|t| *t == want.kind), detail));
        sides.push(got);
        let letters: String = rec.distributions.iter().zip(&reports).filter(|(d, _)| d.side == side).map(|(_, r)| r.letter()).collect();
        let mixed: Vec<String> =
            reports.iter().filter(|r| r.side == side).filter_map(|r| r.expansion.as_ref().err().map(|e| e.to_string())).collect();
        let detail = if mixed.is_empty() { format!("{letters} (expected {})", want.sup) } else { mixed.join("; ") };
        checks.push(Check::verdict(format!("{} expansion", side.name()), letters == want.sup, detail));
    }
    if let (Ok(sd), Ok(asd)) = (&sides[0], &sides[1]) {
        let sym = compose_symbol(*sd, *asd, &reports);
        report.computed_type = Some(sym.to_string());
    }
    report.passed = report.checks.iter().all(|c| c.passed) && report.computed_type.as_deref() == Some(report.expected_type.as_str());
    report
}

/// Verifies the selected records in catalog order.
pub fn verify_catalog<'a>(records: impl IntoIterator<Item = &'a Record>, cfg: &VerifyConfig) -> Vec<RecordReport> {
    records.into_iter().map(|r| verify_record(r, cfg)).collect()
}

/// Ids matching a glob selector, in catalog order.
pub fn select<'a>(cat: &'a Catalog, selector: &str) -> Result<Vec<&'a Record>, CatalogError> {
    let pat = glob::Pattern::new(selector).map_err(|e| CatalogError::Schema {
        id: selector.into(),
        field: "selector".into(),
        msg: e.to_string(),
    })?;
    Ok(cat.records.iter().filter(|r| pat.matches(r.id())).collect())
}

/// Pointwise diagnostics for `classify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideReport {
    pub coefficients: [f64; 5],
    #[serde(flatten)]
    pub petrov: PetrovType,
    pub tau: f64,
    pub degeneration_residual: f64,
    pub degeneration_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub label: String,
    pub integrability: [f64; 2],
    pub expansion: [f64; 2],
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub id: String,
    pub point: [f64; NVARS],
    pub sd: SideReport,
    pub asd: SideReport,
    pub witnesses: Vec<WitnessReport>,
    #[serde(rename = "type")]
    pub symbol: String,
}

pub fn classify_point(rec: &Record, p: [f64; NVARS], tol: Tol) -> Result<ClassifyReport, String> {
    let e = eval_point(rec, p)?;
    let side = |c: [f64; 5]| {
        let w = WeylSide::new(c, e.curvature.scale);
        SideReport {
            coefficients: c,
            petrov: w.classify(tol),
            tau: w.tau(),
            degeneration_residual: w.degeneration_residual(),
            degeneration_tol: w.degeneration_tol(tol),
        }
    };
    let (sd, asd) = (side(e.curvature.c), side(e.curvature.cdot));
    let reports = congruence_reports(rec, std::slice::from_ref(&e), tol);
    let symbol = compose_symbol(sd.petrov.complex, asd.petrov.complex, &reports).to_string();
    let witnesses = rec
        .distributions
        .iter()
        .zip(&e.witnesses)
        .map(|(d, w)| WitnessReport { label: d.label.clone(), integrability: w.bracket, expansion: w.expansion, tolerance: w.tol(tol) })
        .collect();
    Ok(ClassifyReport { id: rec.id().to_string(), point: p, sd, asd, witnesses, symbol })
}
