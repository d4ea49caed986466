//! `nullstring` command-line front end.
//!
//! Exit codes: 0 when everything passes, 1 when a check fails, 2 for
//! configuration, input or catalog errors.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nullstring::catalog::{Catalog, Record};
use nullstring::jets::NVARS;
use nullstring::report::Table;
use nullstring::strings::Side;
use nullstring::verify::{self, ClassifyReport, RecordReport, VerifyConfig};
use nullstring::weyl::Tol;

const DEFAULT_CATALOG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../nullstring/data/catalog.json");
const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "nullstring", version, about = "Verify null-string structure and curvature of catalog metrics")]
struct Cli {
    /// Catalog file.
    #[arg(long, global = true, env = "NULLSTRING_CATALOG")]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check on the selected records.
    Verify {
        /// Record id or glob (default: all records).
        selector: Option<String>,
        /// Select every record.
        #[arg(long, conflicts_with = "selector")]
        all: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Curvature, types and string witnesses at a point.
    Classify {
        id: String,
        /// Coordinates as `name=value` pairs; missing ones take the box centre.
        #[arg(long)]
        point: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Table of all records by computed type.
    Report {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Catalog maintenance.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// List record ids and expected types.
    List {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    atol: f64,
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    /// Overrides every exclusion radius of the sample domains.
    #[arg(long)]
    exclusion_radius: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Shorthand for `--format json`.
    #[arg(long, conflicts_with = "format")]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Markdown,
}

struct Failure(u8, String);

fn config_error(msg: impl Into<String>) -> Failure {
    Failure(2, msg.into())
}

impl RunArgs {
    fn config(&self) -> Result<VerifyConfig, Failure> {
        if self.points < 1 {
            return Err(config_error("--points must be at least 1"));
        }
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return Err(config_error("tolerances must be positive"));
        }
        if let Some(r) = self.exclusion_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(config_error("--exclusion-radius must be a finite non-negative number"));
            }
        }
        Ok(VerifyConfig { points: self.points, seed: self.seed, tol: Tol { atol: self.atol, rtol: self.rtol } })
    }

    fn format(&self, default: Format) -> Format {
        if self.json {
            Format::Json
        } else {
            self.format.unwrap_or(default)
        }
    }
}

fn load(cli_path: &Option<PathBuf>, run: Option<&RunArgs>) -> Result<Catalog, Failure> {
    let path = cli_path.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CATALOG));
    let mut cat = Catalog::load(&path).map_err(|e| config_error(e.to_string()))?;
    if let Some(r) = run.and_then(|r| r.exclusion_radius) {
        for rec in &mut cat.records {
            rec.set_exclusion_radius(r);
        }
    }
    Ok(cat)
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serialises") + "\n"
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.3e}")
    }
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    schema: u32,
    config: &'a VerifyConfig,
    passed: bool,
    records: &'a [RecordReport],
}

fn verify_text(reports: &[RecordReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        let ty = r.computed_type.as_deref().unwrap_or("no consensus");
        let _ = writeln!(out, "{verdict} {} {ty} (expected {}, {} points)", r.id, r.expected_type, r.points);
        for c in &r.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = write!(
                out,
                "  {mark} {}: max {} limit {} margin {}",
                c.name,
                fmt_num(c.max_residual),
                fmt_num(c.limit),
                fmt_num(c.margin())
            );
            if !c.detail.is_empty() {
                let _ = write!(out, " [{}]", c.detail);
            }
            out.push('\n');
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} records, {} failed", reports.len(), failed);
    out
}

fn verify_markdown(reports: &[RecordReport]) -> String {
    let mut out = String::from("| record | type | expected | result | failed checks |\n|---|---|---|---|---|\n");
    for r in reports {
        let failed: Vec<&str> = r.failed_checks().map(|c| c.name.as_str()).collect();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.id,
            r.computed_type.as_deref().unwrap_or("no consensus"),
            r.expected_type,
            if r.passed { "PASS" } else { "FAIL" },
            failed.join(", ")
        );
    }
    out
}

fn cmd_verify(cat: &Catalog, selector: &str, run: &RunArgs) -> Result<(String, bool), Failure> {
    let cfg = run.config()?;
    let recs = verify::select(cat, selector).map_err(|e| config_error(e.to_string()))?;
    if recs.is_empty() {
        return Err(config_error(format!("record not found: {selector}")));
    }
    let reports = verify::verify_catalog(recs, &cfg);
    let passed = reports.iter().all(|r| r.passed);
    let text = match run.format(Format::Text) {
        Format::Text => verify_text(&reports),
        Format::Markdown => verify_markdown(&reports),
        Format::Json => json(&VerifyOutput { schema: SCHEMA, config: &cfg, passed, records: &reports }),
    };
    Ok((text, passed))
}

fn parse_point(rec: &Record, spec: Option<&str>) -> Result<[f64; NVARS], Failure> {
    let b = &rec.spec.sample_domain.bounds;
    let mut p: [f64; NVARS] = std::array::from_fn(|i| 0.5 * (b[i][0] + b[i][1]));
    let Some(spec) = spec else { return Ok(p) };
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item.split_once('=').ok_or_else(|| config_error(format!("bad coordinate '{item}', expected name=value")))?;
        let i = rec.spec.chart.iter().position(|c| c == name.trim()).ok_or_else(|| {
            config_error(format!("'{}' is not a coordinate of {} (chart {})", name.trim(), rec.id(), rec.spec.chart.join(", ")))
        })?;
        p[i] = value.trim().parse().map_err(|_| config_error(format!("bad value in '{item}'")))?;
    }
    Ok(p)
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    schema: u32,
    id: &'a str,
    chart: &'a [String; NVARS],
    #[serde(rename = "type")]
    consensus: Option<String>,
    points: &'a [ClassifyReport],
}

fn side_text(out: &mut String, name: &str, s: &verify::SideReport) {
    let coeffs: Vec<String> = s.coefficients.iter().map(|v| fmt_num(*v)).collect();
    let _ = writeln!(out, "  {name}: [{}] type {} real {}", coeffs.join(", "), s.petrov.complex.symbol(), s.petrov.real.symbol());
    let _ = writeln!(
        out,
        "    tau {} degeneration residual {} (zero below {})",
        fmt_num(s.tau),
        fmt_num(s.degeneration_residual),
        fmt_num(s.degeneration_tol)
    );
}

fn classify_text(rec: &Record, reports: &[ClassifyReport], consensus: &Option<String>) -> String {
    let mut out = String::new();
    for r in reports {
        let coords: Vec<String> = rec.spec.chart.iter().zip(&r.point).map(|(n, v)| format!("{n}={v}")).collect();
        let _ = writeln!(out, "{} at {}: {}", r.id, coords.join(", "), r.symbol);
        side_text(&mut out, "C", &r.sd);
        side_text(&mut out, "Cdot", &r.asd);
        for w in &r.witnesses {
            let _ = writeln!(
                out,
                "  {}: integrability [{}, {}] expansion [{}, {}] tolerance {}",
                w.label,
                fmt_num(w.integrability[0]),
                fmt_num(w.integrability[1]),
                fmt_num(w.expansion[0]),
                fmt_num(w.expansion[1]),
                fmt_num(w.tolerance)
            );
        }
    }
    if reports.len() > 1 {
        let _ = writeln!(out, "consensus: {}", consensus.as_deref().unwrap_or("none"));
    }
    out
}

fn cmd_classify(cat: &Catalog, id: &str, point: Option<&str>, run: &RunArgs) -> Result<String, Failure> {
    let cfg = run.config()?;
    let rec = cat.get(id).ok_or_else(|| config_error(format!("record not found: {id}")))?;
    let points = match point {
        Some(_) => vec![parse_point(rec, point)?],
        None => rec.sample_points(cfg.points, cfg.seed).map_err(|e| config_error(e.to_string()))?,
    };
    let mut reports = Vec::with_capacity(points.len());
    for p in points {
        reports.push(verify::classify_point(rec, p, cfg.tol).map_err(|e| config_error(format!("{id}: {e}")))?);
    }
    let consensus = {
        let first = &reports[0].symbol;
        reports.iter().all(|r| &r.symbol == first).then(|| first.clone())
    };
    Ok(match run.format(Format::Text) {
        Format::Json => json(&ClassifyOutput { schema: SCHEMA, id, chart: &rec.spec.chart, consensus, points: &reports }),
        _ => classify_text(rec, &reports, &consensus),
    })
}

#[derive(Serialize)]
struct ReportOutput<'a> {
    schema: u32,
    passed: bool,
    table: &'a Table,
}

fn cmd_report(cat: &Catalog, run: &RunArgs) -> Result<(String, bool), Failure> {
    let cfg = run.config()?;
    let reports = verify::verify_catalog(&cat.records, &cfg);
    let table = Table::build(&reports);
    let passed = table.all_passed();
    let text = match run.format(Format::Markdown) {
        Format::Json => json(&ReportOutput { schema: SCHEMA, passed, table: &table }),
        _ => table.to_markdown(),
    };
    Ok((text, passed))
}

#[derive(Serialize)]
struct ListEntry<'a> {
    id: &'a str,
    expected_type: &'a str,
    chart: &'a [String; NVARS],
    distributions: Vec<String>,
}

fn cmd_list(cat: &Catalog, format: Format) -> String {
    let entries: Vec<ListEntry> = cat
        .records
        .iter()
        .map(|r| ListEntry {
            id: r.id(),
            expected_type: &r.spec.expected_type,
            chart: &r.spec.chart,
            distributions: r
                .distributions
                .iter()
                .map(|d| format!("{} {}", if d.side == Side::Sd { "SD" } else { "ASD" }, d.label))
                .collect(),
        })
        .collect();
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                schema: u32,
                records: &'a [ListEntry<'a>],
            }
            json(&Out { schema: SCHEMA, records: &entries })
        }
        Format::Markdown => {
            let mut out = String::from("| record | expected type |\n|---|---|\n");
            for e in &entries {
                let _ = writeln!(out, "| {} | {} |", e.id, e.expected_type);
            }
            out
        }
        Format::Text => {
            let w = entries.iter().map(|e| e.id.len()).max().unwrap_or(0);
            entries.iter().map(|e| format!("{:w$}  {}\n", e.id, e.expected_type)).collect()
        }
    }
}

fn run(cli: Cli) -> Result<(String, bool), Failure> {
    match &cli.command {
        Command::Verify { selector, all, run } => {
            let cat = load(&cli.catalog, Some(run))?;
            let sel = if *all { "*" } else { selector.as_deref().unwrap_or("*") };
            cmd_verify(&cat, sel, run)
        }
        Command::Classify { id, point, run } => {
            let cat = load(&cli.catalog, Some(run))?;
            Ok((cmd_classify(&cat, id, point.as_deref(), run)?, true))
        }
        Command::Report { run } => {
            let cat = load(&cli.catalog, Some(run))?;
            cmd_report(&cat, run)
        }
        Command::Catalog { command: CatalogCommand::List { format, json } } => {
            let cat = load(&cli.catalog, None)?;
            Ok((cmd_list(&cat, if *json { Format::Json } else { *format }), true))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, passed)) => {
            print!("{text}");
            ExitCode::from(if passed { 0 } else { 1 })
        }
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
