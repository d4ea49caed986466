//! The metric registry: JSON records, their compilation into frames and
//! checks, and seeded sampling of evaluation points.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprlang::{parse, EvalCtx, Node, ParamEnv, Program};
use crate::frame::FrameField;
use crate::jets::NVARS;
use crate::strings::{Distribution2, Side, TypeSymbol};

/// Values with magnitude at or below this count as zero in constraints.
pub const NONZERO_EPS: f64 = 1e-10;
/// Attempts per requested point before sampling gives up.
pub const MAX_TRIES_PER_POINT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: {msg}")]
    Json { path: String, msg: String },
    #[error("record `{id}`, field `{field}`: {msg}")]
    Schema { id: String, field: String, msg: String },
    #[error("record `{id}`: constraint `{what}` violated ({expr} = {value})")]
    Constraint { id: String, what: String, expr: String, value: f64 },
    #[error("duplicate record id `{0}`")]
    Duplicate(String),
    #[error("record `{id}`: placed {placed} of {wanted} points after {tries} tries")]
    DomainTooConstrained { id: String, wanted: usize, placed: usize, tries: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Nonzero,
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub expr: String,
    pub kind: ConstraintKind,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Definition {
    pub name: String,
    pub expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Generator functions and the reduced equation they must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Przanowski { q: String },
    ParaKahler { m: String },
    Hyperheavenly { theta: String },
    HhSplit { a: String, b_y: String, c_yy: String },
    Liouville { l: String, n: String },
    LiouvillePk { u: String, h: String, vars: [String; 2] },
    ExpandingPk { f: String, z: String },
}

impl GeneratorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorSpec::Przanowski { .. } => "przanowski",
            GeneratorSpec::ParaKahler { .. } => "para-kahler",
            GeneratorSpec::Hyperheavenly { .. } => "hyperheavenly",
            GeneratorSpec::HhSplit { .. } => "hh-split",
            GeneratorSpec::Liouville { .. } => "liouville",
            GeneratorSpec::LiouvillePk { .. } => "liouville-pk",
            GeneratorSpec::ExpandingPk { .. } => "expanding-pk",
        }
    }

    fn sources(&self) -> Vec<(&'static str, &str)> {
        match self {
            GeneratorSpec::Przanowski { q } => vec![("q", q)],
            GeneratorSpec::ParaKahler { m } => vec![("m", m)],
            GeneratorSpec::Hyperheavenly { theta } => vec![("theta", theta)],
            GeneratorSpec::HhSplit { a, b_y, c_yy } => vec![("a", a), ("b_y", b_y), ("c_yy", c_yy)],
            GeneratorSpec::Liouville { l, n } => vec![("l", l), ("n", n)],
            GeneratorSpec::LiouvillePk { u, h, .. } => vec![("u", u), ("h", h)],
            GeneratorSpec::ExpandingPk { f, z } => vec![("f", f), ("z", z)],
        }
    }
}

/// A declared distribution: a coordinate pair of tetrad directions
/// (1-based) or a family parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub side: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exclusion {
    pub expr: String,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDomain {
    #[serde(rename = "box")]
    pub bounds: [[f64; 2]; NVARS],
    #[serde(default)]
    pub exclude: Vec<Exclusion>,
    #[serde(default)]
    pub positive: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub id: String,
    pub paper_anchor: String,
    pub quote: String,
    pub chart: [String; NVARS],
    #[serde(default)]
    pub params: ParamEnv,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub defs: Vec<Definition>,
    pub tetrad: [[String; NVARS]; NVARS],
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub distributions: Vec<DistributionSpec>,
    pub expected_type: String,
    /// Curvature values keyed `C1..C5`, `Cdot1..Cdot5`, `R`.
    #[serde(default)]
    pub expected: BTreeMap<String, String>,
    pub sample_domain: SampleDomain,
}

/// Curvature quantity named in [`MetricRecord::expected`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CurvatureKey {
    C(usize),
    Cdot(usize),
    R,
}

impl CurvatureKey {
    pub fn parse(s: &str) -> Option<CurvatureKey> {
        if s == "R" {
            return Some(CurvatureKey::R);
        }
        let (ctor, n): (fn(usize) -> CurvatureKey, &str) = match s.strip_prefix("Cdot") {
            Some(n) => (CurvatureKey::Cdot, n),
            None => (CurvatureKey::C, s.strip_prefix('C')?),
        };
        match n.parse::<usize>() {
            Ok(i @ 1..=5) => Some(ctor(i)),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            CurvatureKey::C(i) => format!("C{i}"),
            CurvatureKey::Cdot(i) => format!("Cdot{i}"),
            CurvatureKey::R => "R".into(),
        }
    }

    pub fn get(&self, c: &crate::frame::CurvatureSummary) -> f64 {
        // C(i) is stored with index 0 = C⁽¹⁾
        match self {
            CurvatureKey::C(i) => c.c[i - 1],
            CurvatureKey::Cdot(i) => c.cdot[i - 1],
            CurvatureKey::R => c.r,
        }
    }
}

/// Compiled generator, nodes in the record's program.
#[derive(Debug, Clone)]
pub enum Generator {
    Przanowski { q: Node },
    ParaKahler { m: Node },
    Hyperheavenly { theta: Node },
    HhSplit { a: Node, b_y: Node, c_yy: Node },
    Liouville { l: Node, n: Node },
    LiouvillePk { u: Node, h: Node, vars: [String; 2] },
    ExpandingPk { f: Node, z: Node },
}

/// A record ready for evaluation.
#[derive(Debug, Clone)]
pub struct Record {
    pub spec: MetricRecord,
    pub frame: FrameField,
    pub generators: Vec<Generator>,
    pub distributions: Vec<Distribution2>,
    pub expected_type: TypeSymbol,
    pub expected: Vec<(CurvatureKey, Node)>,
    /// Constraints that depend on coordinates, checked at sample points.
    pub pointwise: Vec<(Constraint, Node)>,
    exclusions: Vec<(Node, f64)>,
    positive: Vec<Node>,
}

impl Record {
    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn program(&self) -> &Program {
        &self.frame.program
    }

    pub fn lambda(&self) -> f64 {
        self.spec.params.get("Lambda").copied().unwrap_or(0.0)
    }

    /// Replaces every exclusion radius of the sample domain.
    pub fn set_exclusion_radius(&mut self, radius: f64) {
        for e in &mut self.exclusions {
            e.1 = radius;
        }
    }

    /// Whether `p` lies in the sample domain.
    pub fn admits(&self, p: [f64; NVARS]) -> bool {
        let b = &self.spec.sample_domain.bounds;
        if (0..NVARS).any(|i| p[i] < b[i][0] || p[i] > b[i][1]) {
            return false;
        }
        let prog = self.program();
        let mut ctx = EvalCtx::new(p);
        let val = |n: &Node, ctx: &mut EvalCtx| prog.eval(n, 0, ctx).ok().map(|j| j.value()).filter(|v| v.is_finite());
        for (n, r) in &self.exclusions {
            match val(n, &mut ctx) {
                Some(v) if v.abs() >= *r => {}
                _ => return false,
            }
        }
        for n in &self.positive {
            match val(n, &mut ctx) {
                Some(v) if v > 0.0 => {}
                _ => return false,
            }
        }
        true
    }

    /// Seeded points in the sample domain. The stream depends on the seed
    /// and the record id only.
    pub fn sample_points(&self, n: usize, seed: u64) -> Result<Vec<[f64; NVARS]>, CatalogError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(self.id().as_bytes()));
        let b = self.spec.sample_domain.bounds;
        let mut out = Vec::with_capacity(n);
        let budget = MAX_TRIES_PER_POINT * n.max(1);
        let mut tries = 0;
        while out.len() < n && tries < budget {
            tries += 1;
            let p: [f64; NVARS] = std::array::from_fn(|i| if b[i][0] == b[i][1] { b[i][0] } else { rng.gen_range(b[i][0]..=b[i][1]) });
            if self.admits(p) {
                out.push(p);
            }
        }
        if out.len() < n {
            return Err(CatalogError::DomainTooConstrained { id: self.id().to_string(), wanted: n, placed: out.len(), tries });
        }
        Ok(out)
    }

    /// Pointwise constraint violations at `p`, as `(what, value)`.
    pub fn constraint_violations(&self, p: [f64; NVARS]) -> Vec<(String, f64)> {
        let mut ctx = EvalCtx::new(p);
        self.pointwise
            .iter()
            .filter_map(|(c, n)| {
                let v = self.program().eval(n, 0, &mut ctx).map(|j| j.value()).unwrap_or(f64::NAN);
                (!holds(c.kind, v)).then(|| (c.what.clone(), v))
            })
            .collect()
    }
}

fn holds(kind: ConstraintKind, v: f64) -> bool {
    match kind {
        ConstraintKind::Nonzero => v.abs() > NONZERO_EPS,
        ConstraintKind::Positive => v > NONZERO_EPS,
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

/// The loaded registry.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    pub records: Vec<Record>,
}

impl Catalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        Catalog::from_json(&text).map_err(|e| match e {
            CatalogError::Json { path: _, msg } => CatalogError::Json { path: path.display().to_string(), msg },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Catalog, CatalogError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CatalogError::Json { path: "<input>".into(), msg: e.to_string() })?;
        let items = value
            .as_array()
            .ok_or_else(|| CatalogError::Json { path: "<input>".into(), msg: "top level must be an array of records".into() })?;
        let mut records = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let id = item.get("id").and_then(|v| v.as_str()).map(String::from).unwrap_or_else(|| format!("#{i}"));
            let spec: MetricRecord = serde_path_to_error::deserialize(item).map_err(|e| CatalogError::Schema {
                id: id.clone(),
                field: e.path().to_string(),
                msg: e.inner().to_string(),
            })?;
            if records.iter().any(|r: &Record| r.spec.id == spec.id) {
                return Err(CatalogError::Duplicate(spec.id));
            }
            records.push(compile(spec)?);
        }
        Ok(Catalog { records })
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.spec.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.id()).collect()
    }
}

/// Checks and compiles one record.
pub fn compile(spec: MetricRecord) -> Result<Record, CatalogError> {
    let id = spec.id.clone();
    let schema = |field: String, msg: String| CatalogError::Schema { id: id.clone(), field, msg };

    let mut seen = std::collections::HashSet::new();
    for (i, c) in spec.chart.iter().enumerate() {
        if !seen.insert(c) {
            return Err(schema(format!("chart[{i}]"), format!("repeated coordinate `{c}`")));
        }
    }
    let mut defs = Vec::with_capacity(spec.defs.len());
    for (i, d) in spec.defs.iter().enumerate() {
        let e = parse(&d.expr).map_err(|e| schema(format!("defs[{i}].expr"), e.to_string()))?;
        defs.push((d.name.clone(), e));
    }
    let program = Program::new(&spec.chart, &spec.params, &defs).map_err(|e| schema("defs".into(), e.to_string()))?;
    let compile_at = |field: String, src: &str| program.compile_str(src).map_err(|e| schema(field, e.to_string()));

    let mut pointwise = Vec::new();
    for (i, c) in spec.constraints.iter().enumerate() {
        let n = compile_at(format!("constraints[{i}].expr"), &c.expr)?;
        let depends = parse(&c.expr).map(|e| e.identifiers()).unwrap_or_default();
        let params_only = depends.iter().all(|name| spec.params.contains_key(name));
        if params_only {
            let v = program.eval(&n, 0, &mut EvalCtx::new([0.0; NVARS])).map(|j| j.value()).unwrap_or(f64::NAN);
            if !holds(c.kind, v) {
                return Err(CatalogError::Constraint { id: id.clone(), what: c.what.clone(), expr: c.expr.clone(), value: v });
            }
        } else {
            pointwise.push((c.clone(), n));
        }
    }

    for (a, row) in spec.tetrad.iter().enumerate() {
        for (mu, s) in row.iter().enumerate() {
            compile_at(format!("tetrad[{a}][{mu}]"), s)?;
        }
    }
    let frame = FrameField::from_sources(program.clone(), &spec.tetrad).map_err(|e| schema("tetrad".into(), e.to_string()))?;

    let mut generators = Vec::new();
    for (i, g) in spec.generators.iter().enumerate() {
        let mut nodes = Vec::new();
        for (name, src) in g.sources() {
            nodes.push(compile_at(format!("generators[{i}].{name}"), src)?);
        }
        let mut it = nodes.into_iter();
        let mut next = || it.next().unwrap();
        generators.push(match g {
            GeneratorSpec::Przanowski { .. } => Generator::Przanowski { q: next() },
            GeneratorSpec::ParaKahler { .. } => Generator::ParaKahler { m: next() },
            GeneratorSpec::Hyperheavenly { .. } => Generator::Hyperheavenly { theta: next() },
            GeneratorSpec::HhSplit { .. } => Generator::HhSplit { a: next(), b_y: next(), c_yy: next() },
            GeneratorSpec::Liouville { .. } => Generator::Liouville { l: next(), n: next() },
            GeneratorSpec::LiouvillePk { vars, .. } => {
                for (k, v) in vars.iter().enumerate() {
                    if !spec.chart.contains(v) {
                        return Err(schema(format!("generators[{i}].vars[{k}]"), format!("`{v}` is not a coordinate")));
                    }
                }
                Generator::LiouvillePk { u: next(), h: next(), vars: vars.clone() }
            }
            GeneratorSpec::ExpandingPk { .. } => Generator::ExpandingPk { f: next(), z: next() },
        });
    }

    let mut distributions = Vec::new();
    for (i, d) in spec.distributions.iter().enumerate() {
        let side =
            Side::from_name(&d.side).ok_or_else(|| schema(format!("distributions[{i}].side"), format!("unknown side `{}`", d.side)))?;
        let dist = match (&d.span, &d.s) {
            (Some([a, b]), None) => {
                Distribution2::span(side, *a, *b).map_err(|e| schema(format!("distributions[{i}].span"), e.to_string()))?
            }
            (None, Some(s)) => Distribution2::family(side, compile_at(format!("distributions[{i}].s"), s)?, s),
            _ => return Err(schema(format!("distributions[{i}]"), "exactly one of `span` and `s` is required".into())),
        };
        distributions.push(dist);
    }

    let expected_type: TypeSymbol =
        spec.expected_type.parse().map_err(|e: crate::strings::StringsError| schema("expected_type".into(), e.to_string()))?;
    for (side, sym) in [(Side::Sd, &expected_type.sd), (Side::Asd, &expected_type.asd)] {
        let declared = distributions.iter().filter(|d| d.side == side).count();
        if declared != sym.sup.len() {
            return Err(schema(
                "distributions".into(),
                format!("{} superscript `{}` needs {} declared distributions, found {declared}", side.name(), sym.sup, sym.sup.len()),
            ));
        }
    }

    let mut expected = Vec::new();
    for (k, src) in &spec.expected {
        let key = CurvatureKey::parse(k).ok_or_else(|| schema(format!("expected.{k}"), "unknown curvature key".into()))?;
        expected.push((key, compile_at(format!("expected.{k}"), src)?));
    }

    let dom = &spec.sample_domain;
    for (i, b) in dom.bounds.iter().enumerate() {
        if !(b[0] <= b[1]) || !b[0].is_finite() || !b[1].is_finite() {
            return Err(schema(format!("sample_domain.box[{i}]"), format!("bad interval {b:?}")));
        }
    }
    let mut exclusions = Vec::new();
    for (i, e) in dom.exclude.iter().enumerate() {
        if !(e.radius >= 0.0) {
            return Err(schema(format!("sample_domain.exclude[{i}].radius"), "radius must be nonnegative".into()));
        }
        exclusions.push((compile_at(format!("sample_domain.exclude[{i}].expr"), &e.expr)?, e.radius));
    }
    let mut positive = Vec::new();
    for (i, e) in dom.positive.iter().enumerate() {
        positive.push(compile_at(format!("sample_domain.positive[{i}]"), e)?);
    }

    Ok(Record { spec, frame, generators, distributions, expected_type, expected, pointwise, exclusions, positive })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(id: &str) -> serde_json::Value {
        serde_json::json!({
            "id": id,
            "paper_anchor": "-",
            "quote": "-",
            "chart": ["p", "q", "x", "y"],
            "params": {"Lambda": 0.0, "S0": 1.0, "G0": 0.0},
            "constraints": [{"expr": "S0^2 + G0^2", "kind": "nonzero", "what": "S0, G0 not both zero"}],
            "tetrad": [["1","0","0","0"],["0","1","0","0"],["0","0","1","0"],["0","0","0","1"]],
            "distributions": [],
            "expected_type": "[-] ⊗ [-]",
            "sample_domain": {"box": [[0,1],[0,1],[0,1],[0,1]]}
        })
    }

    #[test]
    fn loads_and_samples() {
        let v = flat("flat");
        let cat = Catalog::from_json(&serde_json::Value::Array(vec![v]).to_string()).unwrap();
        let r = cat.get("flat").unwrap();
        let a = r.sample_points(5, 7).unwrap();
        assert_eq!(a, r.sample_points(5, 7).unwrap());
        assert_ne!(a, r.sample_points(5, 8).unwrap());
        assert!(a.iter().all(|p| p.iter().all(|c| (0.0..=1.0).contains(c))));
    }

    #[test]
    fn constraint_violation_names_record() {
        let mut v = flat("bad");
        v["params"]["S0"] = serde_json::json!(0.0);
        let err = Catalog::from_json(&serde_json::Value::Array(vec![v]).to_string()).unwrap_err();
        assert!(matches!(&err, CatalogError::Constraint { id, .. } if id == "bad"), "{err}");
    }

    #[test]
    fn schema_errors_carry_path() {
        let mut v = flat("broken");
        v["tetrad"][2] = serde_json::json!(["1", "0"]);
        let err = Catalog::from_json(&serde_json::Value::Array(vec![v]).to_string()).unwrap_err();
        match err {
            CatalogError::Schema { id, field, .. } => {
                assert_eq!(id, "broken");
                assert!(field.starts_with("tetrad[2]"), "{field}");
            }
            e => panic!("{e}"),
        }
        let mut v = flat("typo");
        v["tetrad"][1][1] = serde_json::json!("1 +* x");
        let err = Catalog::from_json(&serde_json::Value::Array(vec![v]).to_string()).unwrap_err();
        assert!(matches!(&err, CatalogError::Schema { field, .. } if field == "tetrad[1][1]"), "{err}");
    }

    #[test]
    fn superscripts_need_distributions() {
        let mut v = flat("sup");
        v["expected_type"] = serde_json::json!("[D]^{ee} ⊗ [-]");
        let err = Catalog::from_json(&serde_json::Value::Array(vec![v]).to_string()).unwrap_err();
        assert!(matches!(&err, CatalogError::Schema { field, .. } if field == "distributions"), "{err}");
    }

    #[test]
    fn exclusions_and_tight_domains() {
        let mut v = flat("tight");
        v["sample_domain"]["exclude"] = serde_json::json!([{"expr": "x - 0.5", "radius": 0.6}]);
        let cat = Catalog::from_json(&serde_json::Value::Array(vec![v]).to_string()).unwrap();
        let err = cat.records[0].sample_points(3, 1).unwrap_err();
        assert!(matches!(err, CatalogError::DomainTooConstrained { placed: 0, .. }));
    }

    #[test]
    fn duplicates_rejected() {
        let v = flat("twice");
        let err = Catalog::from_json(&serde_json::Value::Array(vec![v.clone(), v]).to_string()).unwrap_err();
        assert_eq!(err, CatalogError::Duplicate("twice".into()));
    }

    #[test]
    fn curvature_keys() {
        assert_eq!(CurvatureKey::parse("Cdot3"), Some(CurvatureKey::Cdot(3)));
        assert_eq!(CurvatureKey::parse("C1"), Some(CurvatureKey::C(1)));
        assert_eq!(CurvatureKey::parse("C6"), None);
        assert_eq!(CurvatureKey::parse("R"), Some(CurvatureKey::R));
    }
}
