use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::error::{Error, Result};
use crate::instances::io_error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::Parameter(format!("unknown format {other:?}"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

/// One table cell. Floating cells keep full precision in csv and json; the
/// variant only decides the markdown rendering.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Int(u64),
    Text(String),
    Bool(bool),
    /// Shown with two significant figures, e.g. `2.5e-4`.
    Rate(f64),
    /// Shown with one decimal, e.g. `17.2`.
    Decimal(f64),
    /// Shown with four significant figures.
    Float(f64),
    /// An input parameter such as `c`, shown as written.
    Param(f64),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Rate(v) | Cell::Decimal(v) | Cell::Float(v) | Cell::Param(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn full(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Rate(v) | Cell::Decimal(v) | Cell::Float(v) => format!("{v:e}"),
            Cell::Param(v) => v.to_string(),
        }
    }

    fn display(&self) -> String {
        match self {
            Cell::Rate(v) => format!("{v:.1e}"),
            Cell::Decimal(v) => format!("{v:.1}"),
            Cell::Float(v) => format!("{v:.3e}"),
            other => other.full(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Param(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Empty => s.serialize_none(),
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Text(v) => s.serialize_str(v),
            Cell::Bool(v) => s.serialize_bool(*v),
            Cell::Rate(v) | Cell::Decimal(v) | Cell::Float(v) | Cell::Param(v) if v.is_finite() => s.serialize_f64(*v),
            _ => s.serialize_none(),
        }
    }
}

/// An experiment result with an ordered schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTable {
    pub title: String,
    pub schema: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ReportTable {
    pub fn new(title: impl Into<String>, schema: &[&str]) -> Self {
        ReportTable {
            title: title.into(),
            schema: schema.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.schema.len(), "row width does not match the schema");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c == name)
    }

    /// Cell of `row` under column `name`.
    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.column(name).and_then(|j| self.rows.get(row).map(|r| &r[j]))
    }

    /// Rows whose `status` column reports a failure.
    pub fn failures(&self) -> usize {
        match self.column("status") {
            Some(j) => self.rows.iter().filter(|r| matches!(&r[j], Cell::Text(s) if s != "ok")).count(),
            None => 0,
        }
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
            Format::Markdown => self.write_markdown(out),
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        let mut buf = Vec::new();
        self.write(format, &mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Serde(e.to_string()))
    }

    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let ser = |e: csv::Error| Error::Serde(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.schema).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::full)).map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serde(e.to_string()))
    }

    fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, &JsonTable(self)).map_err(|e| Error::Serde(e.to_string()))?;
        writeln!(out).map_err(|e| Error::Serde(e.to_string()))
    }

    fn write_markdown<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Serde(e.to_string());
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::display).collect()).collect();
        let widths: Vec<usize> = (0..self.schema.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([self.schema[j].len(), 3]).max().unwrap_or(3))
            .collect();
        let line = |items: &[String]| -> String {
            let padded: Vec<String> = items.iter().zip(&widths).map(|(s, &w)| format!("{s:<w$}")).collect();
            format!("| {} |", padded.join(" | "))
        };
        if !self.title.is_empty() {
            writeln!(out, "### {}\n", self.title).map_err(io)?;
        }
        writeln!(out, "{}", line(&self.schema)).map_err(io)?;
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        writeln!(out, "{}", line(&rule)).map_err(io)?;
        for r in &cells {
            writeln!(out, "{}", line(r)).map_err(io)?;
        }
        Ok(())
    }
}

impl fmt::Display for ReportTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render(Format::Markdown) {
            Ok(s) => f.write_str(&s),
            Err(_) => Err(fmt::Error),
        }
    }
}

struct JsonTable<'a>(&'a ReportTable);

struct JsonRow<'a>(&'a [String], &'a [Cell]);

impl Serialize for JsonRow<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for JsonTable<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let t = self.0;
        let rows: Vec<JsonRow<'_>> = t.rows.iter().map(|r| JsonRow(&t.schema, r)).collect();
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("title", &t.title)?;
        m.serialize_entry("columns", &t.schema)?;
        m.serialize_entry("rows", &rows)?;
        m.end()
    }
}

/// Writes `table` to `path`, or to stdout when `path` is `None`.
pub fn emit(table: &ReportTable, format: Format, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            }
            let file = std::fs::File::create(p).map_err(|e| io_error(p, e))?;
            let mut w = std::io::BufWriter::new(file);
            table.write(format, &mut w)?;
            w.flush().map_err(|e| io_error(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            table.write(format, stdout.lock())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReportTable {
        let mut t = ReportTable::new("t", &["n", "rule", "one_minus_rho", "ratio"]);
        t.push(vec![20usize.into(), "GBS-CD".into(), Cell::Rate(2.4691e-4), Cell::Decimal(17.24)]);
        t.push(vec![100usize.into(), "C-CD".into(), Cell::Rate(3.8e-3), Cell::Empty]);
        t
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ReportTable::new("", &["a", "b"]);
        assert_eq!(t.render(Format::Csv).unwrap(), "a,b\n");
        assert_eq!(t.render(Format::Markdown).unwrap(), "| a   | b   |\n| --- | --- |\n");
    }

    #[test]
    fn markdown_two_significant_figures() {
        let md = sample().render(Format::Markdown).unwrap();
        assert!(md.contains("2.5e-4"));
        assert!(md.contains("3.8e-3"));
        assert!(md.contains("17.2"));
    }

    #[test]
    fn csv_keeps_full_precision() {
        let csv = sample().render(Format::Csv).unwrap();
        let v: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, 2.4691e-4);
    }

    #[test]
    fn json_rows_are_keyed() {
        let v: serde_json::Value = serde_json::from_str(&sample().render(Format::Json).unwrap()).unwrap();
        assert_eq!(v["rows"][0]["rule"], "GBS-CD");
        assert_eq!(v["rows"][1]["ratio"], serde_json::Value::Null);
        assert_eq!(v["columns"][2], "one_minus_rho");
    }

    #[test]
    fn failures_counted_from_status() {
        let mut t = ReportTable::new("", &["x", "status"]);
        t.push(vec![1usize.into(), "ok".into()]);
        t.push(vec![2usize.into(), "error: boom".into()]);
        assert_eq!(t.failures(), 1);
    }
}
