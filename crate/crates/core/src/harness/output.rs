use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};

use super::config::RunConfig;

/// Build identification embedded at compile time.
pub const GIT_DESCRIBE: &str = env!("HERALDSIM_GIT_DESCRIBE");

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Written with 17 significant digits; NaN is written as an empty cell.
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(x: Option<f64>) -> Cell {
        x.map_or(Cell::Empty, Cell::Num)
    }

    fn is_gap(&self) -> bool {
        matches!(self, Cell::Empty) || matches!(self, Cell::Num(x) if !x.is_finite())
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            _ => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
            _ => Value::Null,
        }
    }
}

/// `x` with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A named table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Why a column may contain empty cells.
    pub gap_reasons: BTreeMap<String, String>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<String>) -> Self {
        Table {
            name: name.into(),
            header,
            rows: Vec::new(),
            gap_reasons: BTreeMap::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                expected: self.header.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Columns `names` of `series`, one row per grid point; `t` names the grid.
    pub fn from_series(name: impl Into<String>, series: &TimeSeries, names: &[&str]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| if *n == "t" { Ok(series.t()) } else { series.require(n) })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(name, names.iter().map(|s| s.to_string()).collect());
        for k in 0..series.len() {
            t.push_row(cols.iter().map(|c| Cell::Num(c[k])).collect())?;
        }
        Ok(t)
    }

    pub fn with_gap_reason(mut self, column: &str, reason: &str) -> Self {
        self.gap_reasons.insert(column.to_string(), reason.to_string());
        self
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column; gaps and text are NaN.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[k] {
                    Cell::Num(x) => *x,
                    Cell::Int(i) => *i as f64,
                    _ => f64::NAN,
                })
                .collect(),
        )
    }

    /// One line per column with empty cells, with its reason.
    pub fn gap_report(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, h) in self.header.iter().enumerate() {
            let n = self.rows.iter().filter(|r| r[k].is_gap()).count();
            if n > 0 {
                let reason = self.gap_reasons.get(h).map_or("value undefined", String::as_str);
                out.push(format!("{}.csv: {n} empty cell(s) in `{h}`: {reason}", self.name));
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv)).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    fn to_json(&self) -> Value {
        let cols: serde_json::Map<String, Value> = self
            .header
            .iter()
            .enumerate()
            .map(|(k, h)| (h.clone(), Value::Array(self.rows.iter().map(|r| r[k].json()).collect())))
            .collect();
        Value::Object(cols)
    }
}

/// Pass/fail record of a convergence gate or validation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `<`, `<=`, `>` or `>=`, read as `value <op> threshold`.
    pub comparison: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, comparison: &str, threshold: f64) -> Self {
        let pass = match comparison {
            "<" => value < threshold,
            "<=" => value <= threshold,
            ">" => value > threshold,
            ">=" => value >= threshold,
            _ => false,
        };
        Check {
            name: name.into(),
            value,
            comparison: comparison.to_string(),
            threshold,
            pass,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, ">=", 1.0)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} {} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            format_f64(self.value),
            self.comparison,
            format_f64(self.threshold)
        )
    }
}

/// Everything a scenario produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub tables: Vec<Table>,
    pub summary: Value,
    pub gates: Vec<Check>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ScenarioOutput {
    pub fn new(tables: Vec<Table>, summary: Value) -> Self {
        ScenarioOutput {
            tables,
            summary,
            gates: Vec::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Process exit code: 0 when every check passes.
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().all(|c| c.pass) {
            0
        } else {
            1
        }
    }

    pub fn all_warnings(&self) -> Vec<String> {
        let mut w = self.warnings.clone();
        for t in &self.tables {
            w.extend(t.gap_report());
        }
        w
    }

    /// JSON mirror: resolved config, build, seeds, results.
    pub fn to_json(&self, cfg: &RunConfig) -> Value {
        let tables: serde_json::Map<String, Value> =
            self.tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
        json!({
            "scenario": cfg.scenario,
            "git_describe": GIT_DESCRIBE,
            "config": cfg,
            "report": cfg.report,
            "seeds": {
                "master_seed": cfg.master_seed,
                "trajectory_seed": "splitmix64(master_seed ^ splitmix64(index))",
            },
            "summary": self.summary,
            "gates": self.gates,
            "checks": self.checks,
            "warnings": self.all_warnings(),
            "tables": tables,
        })
    }

    /// Writes the requested files into `cfg.output_dir`.
    pub fn write(&self, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
        let dir: &Path = &cfg.output_dir;
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if cfg.emit.csv() {
            for t in &self.tables {
                let path = dir.join(format!("{}.csv", t.name));
                fs::write(&path, t.to_csv()?)?;
                written.push(path);
            }
        }
        if cfg.emit.json() {
            let path = dir.join(format!("{}.json", cfg.scenario));
            let mut text = serde_json::to_string_pretty(&self.to_json(cfg))
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            text.push('\n');
            fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 3.370934, -2.5e-300, 6.02e23] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn gaps_are_empty_cells_with_a_reason() {
        let mut t = Table::new("x", vec!["a".into(), "b".into()]);
        t.push_row(vec![Cell::Num(1.0), Cell::Num(f64::NAN)]).unwrap();
        t.push_row(vec![Cell::Int(2), Cell::Empty]).unwrap();
        let mut t = t.with_gap_reason("b", "no data");
        let csv = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(csv, "a,b\n1.0000000000000000e0,\n2,\n");
        assert_eq!(t.gap_report(), vec!["x.csv: 2 empty cell(s) in `b`: no data".to_string()]);
        assert!(t.push_row(vec![Cell::Empty]).is_err());
    }

    #[test]
    fn text_cells_are_quoted_when_needed() {
        let mut t = Table::new("x", vec!["name".into()]);
        t.push_row(vec![Cell::Text("a,b".into())]).unwrap();
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "name\n\"a,b\"\n");
    }

    #[test]
    fn checks_compare_as_written() {
        assert!(Check::new("a", 0.5, "<", 1.0).pass);
        assert!(!Check::new("a", 1.0, "<", 1.0).pass);
        assert!(Check::new("a", 1.0, ">=", 1.0).pass);
        assert!(!Check::new("a", f64::NAN, "<", 1.0).pass);
        assert!(!Check::flag("b", false).pass);
    }
}
