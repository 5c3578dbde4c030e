//! File formats: the wide panel CSV, sectioned text reports (with a JSON
//! twin) and the TOML run configuration.
//!
//! Panel files have one header row of series names followed by one row per
//! period and one column per series. An empty cell is a missing value.
//! Values are written with Rust's shortest round-trip formatting, so reading
//! a written panel gives back the same bits.
//!
//! Report text files look like
//!
//! ```text
//! [meta]
//! command = "estimate"
//! mc.seed = 7
//!
//! [table loglik]
//! iteration,loglik
//! 0,-1234.5
//! ```
//!
//! Meta values are TOML literals, which lets [`RunConfig::from_meta`] rebuild
//! the configuration that produced a report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::em::{EmOptions, PhiPolicy, DEFAULT_MAX_ITER, DEFAULT_PHI, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::init::InitOptions;
use crate::kalman::DEFAULT_KAPPA;
use crate::model::{ModelSpec, Panel};
use crate::simulate::{InnovationDist, McConfig};

// ---------------------------------------------------------------- panels

/// A panel together with its series names.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFile {
    pub names: Vec<String>,
    pub panel: Panel,
}

/// `x1, ..., xn`.
pub fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        row,
        col: 0,
        msg: e.to_string(),
    }
}

/// Parses a wide panel. Rows and columns in errors are one-based and count
/// the header as row 1.
pub fn parse_panel(text: &str) -> Result<PanelFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => {
            return Err(Error::Parse {
                row: 1,
                col: 1,
                msg: "empty panel file".into(),
            })
        }
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let n = names.len();
    if let Some(k) = names.iter().position(|s| s.is_empty()) {
        return Err(Error::Parse {
            row: 1,
            col: k + 1,
            msg: "empty series name".into(),
        });
    }
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut t_len = 0;
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let row = rec.position().map_or(t_len + 2, |p| p.line() as usize);
        if rec.len() != n {
            return Err(Error::Parse {
                row,
                col: rec.len().min(n) + 1,
                msg: format!("expected {n} fields, found {}", rec.len()),
            });
        }
        for (k, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                values.push(0.0);
                mask.push(false);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: k + 1,
                msg: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: k + 1,
                    msg: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
            mask.push(true);
        }
        t_len += 1;
    }
    if t_len == 0 {
        return Err(Error::Parse {
            row: 2,
            col: 1,
            msg: "panel has no data rows".into(),
        });
    }
    // Row-major T x n buffers, transposed into n x T.
    let data = DMatrix::from_row_slice(t_len, n, &values).transpose();
    let observed = DMatrix::from_row_slice(t_len, n, &mask).transpose();
    Ok(PanelFile {
        names,
        panel: Panel::new(data, observed)?,
    })
}

pub fn format_panel(names: &[String], panel: &Panel) -> Result<String> {
    if names.len() != panel.n() {
        return Err(Error::Dimension(format!(
            "{} names for {} series",
            names.len(),
            panel.n()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(names).map_err(csv_error)?;
    for t in 0..panel.t_len() {
        let row: Vec<String> = (0..panel.n())
            .map(|i| {
                if panel.observed[(i, t)] {
                    fmt_f64(panel.data[(i, t)])
                } else {
                    String::new()
                }
            })
            .collect();
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("panel buffer", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_panel(path: &Path) -> Result<PanelFile> {
    parse_panel(&read_text(path)?)
}

pub fn write_panel(path: &Path, names: &[String], panel: &Panel) -> Result<()> {
    write_text(path, &format_panel(names, panel)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// --------------------------------------------------------------- reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "txt",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

/// A named rectangular table of text cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: impl Into<String>, columns: Vec<String>) -> Self {
        Table {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width of table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column; empty cells read as NaN.
    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .column_index(name)
            .ok_or_else(|| Error::Config(format!("table {} has no column {name}", self.name)))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| parse_cell(&row[k], r + 1, k + 1))
            .collect()
    }

    /// Columns `first..` as a matrix with one row per table row.
    pub fn to_matrix(&self, first: usize) -> Result<DMatrix<f64>> {
        let width = self.columns.len().saturating_sub(first);
        let mut m = DMatrix::zeros(self.rows.len(), width);
        for (r, row) in self.rows.iter().enumerate() {
            for c in 0..width {
                m[(r, c)] = parse_cell(&row[first + c], r + 1, first + c + 1)?;
            }
        }
        Ok(m)
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    if cell.is_empty() {
        return Ok(f64::NAN);
    }
    cell.parse().map_err(|_| Error::Parse {
        row,
        col,
        msg: format!("`{cell}` is not a number"),
    })
}

/// Metadata plus tables, rendered as sectioned text or JSON.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub meta: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.meta.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key, value)),
        }
    }

    /// Stores a string as a quoted TOML literal.
    pub fn set_meta_str(&mut self, key: impl Into<String>, value: &str) {
        self.set_meta(key, Value::String(value.into()).to_string());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[meta]\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "{k} = {v}");
        }
        for t in &self.tables {
            let _ = writeln!(out, "\n[table {}]", t.name);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&t.columns).expect("in-memory write");
            for row in &t.rows {
                w.write_record(row).expect("in-memory write");
            }
            out.push_str(
                std::str::from_utf8(&w.into_inner().expect("in-memory write")).expect("utf-8"),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let meta: Map<String, Value> = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let tables: Map<String, Value> = self
            .tables
            .iter()
            .map(|t| {
                let rows: Vec<Value> = t
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(|c| json_cell(c)).collect()))
                    .collect();
                (
                    t.name.clone(),
                    json!({ "columns": t.columns, "rows": rows }),
                )
            })
            .collect();
        let mut s =
            serde_json::to_string_pretty(&json!({ "meta": meta, "tables": tables })).expect("json");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_text(),
            Format::Json => self.to_json(),
        }
    }

    /// Parses either rendering; JSON is recognised by a leading `{`.
    pub fn parse(text: &str) -> Result<Report> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }

    pub fn from_text(text: &str) -> Result<Report> {
        enum Section {
            None,
            Meta,
            Table(usize),
        }
        let mut report = Report::default();
        let mut section = Section::None;
        let mut bodies: Vec<(usize, String)> = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let lineno = k + 1;
            let trimmed = line.trim();
            if let Some(head) = trimmed.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
                if head == "meta" {
                    section = Section::Meta;
                } else if let Some(name) = head.strip_prefix("table ") {
                    bodies.push((lineno, String::new()));
                    report
                        .tables
                        .push(Table::with_columns(name.trim(), Vec::new()));
                    section = Section::Table(report.tables.len() - 1);
                } else {
                    return Err(Error::Parse {
                        row: lineno,
                        col: 1,
                        msg: format!("unknown section `{head}`"),
                    });
                }
                continue;
            }
            match section {
                Section::None if trimmed.is_empty() => {}
                Section::None => {
                    return Err(Error::Parse {
                        row: lineno,
                        col: 1,
                        msg: "content before first section".into(),
                    })
                }
                Section::Meta => {
                    if trimmed.is_empty() {
                        continue;
                    }
                    let (k, v) = trimmed.split_once(" = ").ok_or_else(|| Error::Parse {
                        row: lineno,
                        col: 1,
                        msg: "expected `key = value`".into(),
                    })?;
                    report.meta.push((k.to_string(), v.to_string()));
                }
                Section::Table(i) => {
                    if !trimmed.is_empty() {
                        bodies[i].1.push_str(line);
                        bodies[i].1.push('\n');
                    }
                }
            }
        }
        for (table, (start, body)) in report.tables.iter_mut().zip(bodies) {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(body.as_bytes());
            let mut first = true;
            for rec in reader.records() {
                let rec = rec.map_err(|e| {
                    let row = start + e.position().map_or(0, |p| p.line() as usize);
                    Error::Parse {
                        row,
                        col: 0,
                        msg: e.to_string(),
                    }
                })?;
                let cells: Vec<String> = rec.iter().map(String::from).collect();
                if first {
                    table.columns = cells;
                    first = false;
                } else {
                    table.rows.push(cells);
                }
            }
        }
        Ok(report)
    }

    pub fn from_json(text: &str) -> Result<Report> {
        let bad = |msg: &str| Error::Parse {
            row: 0,
            col: 0,
            msg: msg.to_string(),
        };
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            row: e.line(),
            col: e.column(),
            msg: e.to_string(),
        })?;
        let mut report = Report::default();
        for (k, val) in v
            .get("meta")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing meta object"))?
        {
            let s = val
                .as_str()
                .ok_or_else(|| bad("meta values must be strings"))?;
            report.meta.push((k.clone(), s.to_string()));
        }
        for (name, t) in v
            .get("tables")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing tables object"))?
        {
            let as_strings = |v: &Value| -> Result<Vec<String>> {
                v.as_array()
                    .ok_or_else(|| bad("expected an array"))?
                    .iter()
                    .map(|c| match c {
                        Value::String(s) => Ok(s.clone()),
                        Value::Number(x) => Ok(x.to_string()),
                        Value::Null => Ok(String::new()),
                        _ => Err(bad("table cells must be numbers or strings")),
                    })
                    .collect()
            };
            let mut table = Table::with_columns(name.clone(), as_strings(&t["columns"])?);
            for row in t["rows"]
                .as_array()
                .ok_or_else(|| bad("rows must be an array"))?
            {
                table.rows.push(as_strings(row)?);
            }
            report.tables.push(table);
        }
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Report> {
        Self::parse(&read_text(path)?)
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        write_text(path, &self.render(format))
    }
}

fn json_cell(cell: &str) -> Value {
    if let Ok(i) = cell.parse::<i64>() {
        return Value::from(i);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ if cell.is_empty() => Value::Null,
        _ => Value::String(cell.to_string()),
    }
}

// ----------------------------------------------------------- run config

/// `[model]`: structure of the model fitted by `estimate`. Index sets are
/// one-based series positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub q: usize,
    pub s: usize,
    pub p: usize,
    pub i1: Vec<usize>,
    pub level: Vec<usize>,
    pub trend: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            q: 2,
            s: 0,
            p: 2,
            i1: Vec::new(),
            level: Vec::new(),
            trend: Vec::new(),
        }
    }
}

fn zero_based(name: &str, set: &[usize]) -> Result<Vec<usize>> {
    set.iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| Error::Config(format!("model.{name}: series positions start at 1")))
        })
        .collect()
}

impl ModelSection {
    pub fn to_spec(&self, n: usize, t_len: usize) -> Result<ModelSpec> {
        ModelSpec::new(
            n,
            t_len,
            self.q,
            self.s,
            self.p,
            &zero_based("i1", &self.i1)?,
            &zero_based("level", &self.level)?,
            &zero_based("trend", &self.trend)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiName {
    Estimated,
}

/// `phi = "estimated"` or a fixed numeric value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSetting {
    Fixed(f64),
    Named(PhiName),
}

impl PhiSetting {
    pub fn policy(self) -> PhiPolicy {
        match self {
            PhiSetting::Fixed(v) => PhiPolicy::Fixed(v),
            PhiSetting::Named(PhiName::Estimated) => PhiPolicy::Estimated,
        }
    }
}

impl FromStr for PhiSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "estimated" {
            return Ok(PhiSetting::Named(PhiName::Estimated));
        }
        s.parse()
            .map(PhiSetting::Fixed)
            .map_err(|_| Error::Config(format!("phi must be `estimated` or a number, got `{s}`")))
    }
}

/// `[em]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmSection {
    pub tol: f64,
    pub max_iter: usize,
    pub phi: PhiSetting,
    pub standardize: bool,
    pub kappa: f64,
    pub gamma_e_from_levels: bool,
}

impl Default for EmSection {
    fn default() -> Self {
        EmSection {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            phi: PhiSetting::Named(PhiName::Estimated),
            standardize: false,
            kappa: DEFAULT_KAPPA,
            gamma_e_from_levels: false,
        }
    }
}

impl EmSection {
    pub fn options(&self) -> Result<EmOptions> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(
                "em.tol must be positive and em.max_iter at least 1".into(),
            ));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config("em.kappa must be positive".into()));
        }
        if let PhiSetting::Fixed(v) = self.phi {
            if !(v > 0.0) {
                return Err(Error::Config("a fixed em.phi must be positive".into()));
            }
        }
        Ok(EmOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            phi: self.phi.policy(),
            standardize: self.standardize,
            init: InitOptions {
                kappa: self.kappa,
                gamma_e_from_levels: self.gamma_e_from_levels,
            },
        })
    }

    /// Measurement-error variance used with true parameters.
    pub fn diagnostic_phi(&self) -> f64 {
        match self.phi {
            PhiSetting::Fixed(v) => v,
            PhiSetting::Named(_) => DEFAULT_PHI,
        }
    }
}

/// Per-cell overrides of the `[mc]` design in a benchmark grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nb: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<InnovationDist>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// `[mc]`: simulation design, replication count, seed and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n: usize,
    pub t_len: usize,
    pub q: usize,
    pub s: usize,
    pub d: usize,
    pub n1: usize,
    pub nb: usize,
    pub tau: f64,
    pub theta: f64,
    pub mu: f64,
    pub dist: InnovationDist,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub burn_in: usize,
    pub seed: u64,
    pub replications: usize,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// First period scored by the MSE.
    pub t_bar: usize,
    /// Demean series before the levels principal components.
    pub pc_demean: bool,
    /// Cross-section sizes for `diagnose`.
    pub diagnose_n: Vec<usize>,
    pub horizon: usize,
    pub steady_tol: f64,
    pub grid: Vec<CellOverride>,
}

impl Default for McSection {
    fn default() -> Self {
        let base = McConfig::default();
        McSection {
            n: base.n,
            t_len: base.t_len,
            q: base.q,
            s: base.s,
            d: base.d,
            n1: base.n1,
            nb: base.nb,
            tau: base.tau,
            theta: base.theta,
            mu: base.mu,
            dist: base.dist,
            delta: base.delta,
            burn_in: base.burn_in,
            seed: 1,
            replications: 100,
            jobs: 0,
            t_bar: crate::bench::DEFAULT_T_BAR,
            pc_demean: false,
            diagnose_n: vec![5, 10, 25, 100],
            horizon: 10,
            steady_tol: crate::bench::DEFAULT_STEADY_TOL,
            grid: Vec::new(),
        }
    }
}

impl McSection {
    pub fn base(&self) -> McConfig {
        McConfig {
            n: self.n,
            t_len: self.t_len,
            q: self.q,
            s: self.s,
            d: self.d,
            n1: self.n1,
            nb: self.nb,
            tau: self.tau,
            theta: self.theta,
            mu: self.mu,
            dist: self.dist,
            delta: self.delta,
            burn_in: self.burn_in,
        }
    }

    /// Benchmark cells: the base design alone, or the base with each grid
    /// entry applied.
    pub fn cells(&self) -> Vec<McConfig> {
        let base = self.base();
        if self.grid.is_empty() {
            return vec![base];
        }
        self.grid
            .iter()
            .map(|o| McConfig {
                n: o.n.unwrap_or(base.n),
                t_len: o.t_len.unwrap_or(base.t_len),
                q: o.q.unwrap_or(base.q),
                s: o.s.unwrap_or(base.s),
                d: o.d.unwrap_or(base.d),
                n1: o.n1.unwrap_or(base.n1),
                nb: o.nb.unwrap_or(base.nb),
                tau: o.tau.unwrap_or(base.tau),
                theta: o.theta.unwrap_or(base.theta),
                mu: o.mu.unwrap_or(base.mu),
                dist: o.dist.unwrap_or(base.dist),
                delta: o.delta.or(base.delta),
                burn_in: base.burn_in,
            })
            .collect()
    }
}

/// `[io]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Truth report written by `simulate`; enables MSE output in `estimate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: Format,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            input: None,
            truth: None,
            out_dir: PathBuf::from("."),
            format: Format::Csv,
        }
    }
}

/// Complete configuration of one CLI run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub em: EmSection,
    pub mc: McSection,
    pub io: IoSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Sets `section.key` from a TOML literal; text that is not a valid
    /// literal is taken as a string.
    pub fn with_override(&self, key: &str, raw: &str) -> Result<Self> {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{key}` must look like section.key")))?;
        let value = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut root = toml::Value::try_from(self).expect("run config serializes");
        let slot = root
            .get_mut(section)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| Error::Config(format!("unknown config section `{section}`")))?;
        slot.insert(field.to_string(), value);
        root.try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))
    }

    /// Flattened `section.key = literal` pairs.
    pub fn to_meta(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("run config serializes");
        let mut out = Vec::new();
        if let toml::Value::Table(sections) = value {
            for (section, body) in sections {
                if let toml::Value::Table(body) = body {
                    for (k, v) in body {
                        out.push((format!("{section}.{k}"), v.to_string()));
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`RunConfig::to_meta`]; keys without a section prefix are
    /// ignored.
    pub fn from_meta(meta: &[(String, String)]) -> Result<Self> {
        let mut doc = String::new();
        for section in ["model", "em", "mc", "io"] {
            let _ = writeln!(doc, "[{section}]");
            for (k, v) in meta {
                if let Some(key) = k.strip_prefix(section).and_then(|r| r.strip_prefix('.')) {
                    let _ = writeln!(doc, "{key} = {v}");
                }
            }
        }
        Self::from_toml(&doc)
    }
}
