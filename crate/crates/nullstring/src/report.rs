//! Summary table of verified records by SD and ASD type.
//!
//! Columns are the two SD classes `[D]^{ee}` and `[D]^{nn}`, rows the
//! degenerate ASD classes. Records with `Λ = 0`, a non-D SD side, a flat ASD
//! side or no consensus go to a separate list.

use serde::Serialize;

use crate::strings::TypeSymbol;
use crate::verify::RecordReport;
use crate::weyl::ComplexType;

pub const COLUMNS: [(&str, &str); 2] = [("ee", "[D]^{ee} (SD para-Hermite)"), ("nn", "[D]^{nn} (SD para-Kähler)")];

pub const ROWS: [(ComplexType, &str); 9] = [
    (ComplexType::I, ""),
    (ComplexType::II, "e"),
    (ComplexType::II, "n"),
    (ComplexType::D, "ee"),
    (ComplexType::D, "nn"),
    (ComplexType::III, "e"),
    (ComplexType::III, "n"),
    (ComplexType::N, "e"),
    (ComplexType::N, "n"),
];

const NOT_FOUND: &str = "not found";
const DO_NOT_EXIST: &str = "do not exist";
const SAME_AS: &str = "after changing orientation the same metrics as [D]^{ee} ⊗ [D]^{nn}";

/// Fixed text of a cell for which no record is expected.
pub fn annotation(row: usize, col: usize) -> Option<&'static str> {
    match (row, col) {
        (0, _) | (1, 1) | (7, 0) => Some(NOT_FOUND),
        (6, _) | (8, _) => Some(DO_NOT_EXIST),
        (3, 1) => Some(SAME_AS),
        _ => None,
    }
}

pub fn row_label(row: usize) -> String {
    let (k, sup) = ROWS[row];
    if sup.is_empty() {
        format!("[{}]", k.symbol())
    } else {
        format!("[{}]^{{{}}}", k.symbol(), sup)
    }
}

/// Table position of a type symbol, if it has one.
pub fn locate(sym: &TypeSymbol, lambda: f64) -> Option<(usize, usize)> {
    if lambda == 0.0 || sym.sd.kind != ComplexType::D {
        return None;
    }
    let col = COLUMNS.iter().position(|(s, _)| *s == sym.sd.sup)?;
    let row = ROWS.iter().position(|(k, s)| *k == sym.asd.kind && *s == sym.asd.sup)?;
    Some((row, col))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub id: String,
    #[serde(rename = "type")]
    pub computed: Option<String>,
    pub expected_type: String,
    pub passed: bool,
}

impl Entry {
    fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub row: String,
    pub column: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation: Option<&'static str>,
    pub records: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub cells: Vec<Cell>,
    pub other: Vec<Entry>,
}

impl Table {
    /// Places every report by its computed type, in input order.
    pub fn build(reports: &[RecordReport]) -> Table {
        let mut cells = Vec::new();
        for row in 0..ROWS.len() {
            for (col, (sup, _)) in COLUMNS.iter().enumerate() {
                cells.push(Cell {
                    row: row_label(row),
                    column: format!("[D]^{{{sup}}}"),
                    annotation: annotation(row, col),
                    records: Vec::new(),
                });
            }
        }
        let mut other = Vec::new();
        for r in reports {
            let entry =
                Entry { id: r.id.clone(), computed: r.computed_type.clone(), expected_type: r.expected_type.clone(), passed: r.passed };
            let at = r.computed_type.as_deref().and_then(|s| s.parse::<TypeSymbol>().ok()).and_then(|s| locate(&s, r.lambda));
            match at {
                Some((row, col)) => cells[row * COLUMNS.len() + col].records.push(entry),
                None => other.push(entry),
            }
        }
        Table { cells, other }
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * COLUMNS.len() + col]
    }

    /// Records placed in cells that should stay empty.
    pub fn misplaced(&self) -> impl Iterator<Item = (&Cell, &Entry)> {
        self.cells.iter().filter(|c| c.annotation.is_some()).flat_map(|c| c.records.iter().map(move |e| (c, e)))
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry> {
        self.cells.iter().flat_map(|c| c.records.iter()).chain(&self.other)
    }

    pub fn all_passed(&self) -> bool {
        self.entries().all(|e| e.passed) && self.misplaced().next().is_none()
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("| ASD \\ SD | {} | {} |\n", COLUMNS[0].1, COLUMNS[1].1));
        out.push_str("|---|---|---|\n");
        for row in 0..ROWS.len() {
            out.push_str(&format!("| {} |", row_label(row)));
            for col in 0..COLUMNS.len() {
                let c = self.cell(row, col);
                let mut parts: Vec<String> = c.annotation.map(|a| vec![a.to_string()]).unwrap_or_default();
                parts.extend(c.records.iter().map(|e| format!("{} {}", e.id, e.verdict())));
                out.push_str(&format!(" {} |", parts.join("<br>")));
            }
            out.push('\n');
        }
        if !self.other.is_empty() {
            out.push_str("\nOutside the table (Λ = 0 or ASD side not of the listed kinds):\n\n");
            out.push_str("| record | type | expected | result |\n|---|---|---|---|\n");
            for e in &self.other {
                let t = e.computed.as_deref().unwrap_or("no consensus");
                out.push_str(&format!("| {} | {} | {} | {} |\n", e.id, t, e.expected_type, e.verdict()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: &str, ty: &str, lambda: f64, passed: bool) -> RecordReport {
        RecordReport {
            id: id.into(),
            expected_type: ty.into(),
            computed_type: Some(ty.into()),
            lambda,
            points: 1,
            passed,
            checks: Vec::new(),
        }
    }

    #[test]
    fn placement() {
        let t = Table::build(&[
            report("a", "[D]^{ee} ⊗ [II]^{e}", 3.0, true),
            report("b", "[D]^{nn} ⊗ [N]^{e}", 3.0, true),
            report("c", "[D]^{ee} ⊗ [D]^{ee}", 0.0, true),
            report("d", "[D]^{nn} ⊗ [−]^{e}", 3.0, false),
        ]);
        assert_eq!(t.cell(1, 0).records[0].id, "a");
        assert_eq!(t.cell(7, 1).records[0].id, "b");
        let other: Vec<&str> = t.other.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(other, ["c", "d"]);
        assert!(!t.all_passed());
        let md = t.to_markdown();
        assert!(md.contains("| [I] | not found | not found |"));
        assert!(md.contains("| [III]^{n} | do not exist | do not exist |"));
        assert!(md.contains("| d | [D]^{nn} ⊗ [−]^{e} | [D]^{nn} ⊗ [−]^{e} | FAIL |"));
    }

    #[test]
    fn annotated_cells_flagged() {
        let t = Table::build(&[report("x", "[D]^{nn} ⊗ [II]^{e}", 3.0, true)]);
        let bad: Vec<&str> = t.misplaced().map(|(_, e)| e.id.as_str()).collect();
        assert_eq!(bad, ["x"]);
        assert!(!t.all_passed());
    }

    #[test]
    fn empty_table() {
        let t = Table::build(&[]);
        assert!(t.all_passed());
        assert_eq!(t.to_markdown().lines().count(), 11);
    }
}
