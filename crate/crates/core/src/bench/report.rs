//! Result tables: long-form CSV and the wide Markdown layout
//! (one row per sample size × category count, one column per mode × method).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::trainer::Mode;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "sample_size,num_categories,mode,method,mean_accuracy,std_dev,repetitions,seed";
/// Method tag of baseline rows.
pub const NO_METHOD: &str = "none";
pub const MISSING: &str = "—";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sample_size: usize,
    pub num_categories: usize,
    pub mode: Mode,
    pub method: String,
    pub mean_accuracy: f64,
    pub std_dev: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// Per-repetition accuracies, in repetition order. Not written to CSV.
    #[serde(skip)]
    pub accuracies: Vec<f64>,
}

impl ResultRow {
    /// Mean and sample standard deviation of per-repetition accuracies.
    pub fn from_accuracies(
        sample_size: usize,
        num_categories: usize,
        mode: Mode,
        method: &str,
        seed: u64,
        accuracies: Vec<f64>,
    ) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let std_dev = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        ResultRow {
            sample_size,
            num_categories,
            mode,
            method: method.to_string(),
            mean_accuracy: mean,
            std_dev,
            repetitions: accuracies.len(),
            seed,
            accuracies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub sample_size: usize,
    pub num_categories: usize,
    pub mode: Mode,
    pub method: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown table format `{other}` (md|csv)"
            ))),
        }
    }
}

fn method_rank(method: &str) -> usize {
    match method {
        NO_METHOD => 0,
        "eda" => 1,
        "bt_a" | "google" => 2,
        "bt_b" | "opus" => 3,
        "combined" => 4,
        _ => 5,
    }
}

pub fn compare_methods(a: &str, b: &str) -> Ordering {
    method_rank(a).cmp(&method_rank(b)).then_with(|| a.cmp(b))
}

pub fn method_label(method: &str) -> &str {
    match method {
        "eda" => "EDA",
        "bt_a" => "BT-A",
        "bt_b" => "BT-B",
        "google" => "Google",
        "opus" => "OPUS-MT",
        "combined" => "Combined",
        other => other,
    }
}

fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::Baseline => "Baseline",
        Mode::Standard => "Standard",
        Mode::Bagg => "BAGG",
    }
}

/// Cells keyed by `(num_categories, sample_size)`, then `(mode, method)`.
pub type Grid<'a> = BTreeMap<(usize, usize), BTreeMap<(Mode, String), &'a ResultRow>>;

/// One column of the wide layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub mode: Mode,
    pub method: String,
}

impl Column {
    pub fn header(&self) -> String {
        match self.mode {
            Mode::Baseline => mode_label(self.mode).to_string(),
            _ => format!("{} {}", mode_label(self.mode), method_label(&self.method)),
        }
    }
}

impl ResultTable {
    /// Rows ordered by sample size, category count, mode, then method.
    pub fn sorted_rows(&self) -> Vec<&ResultRow> {
        let mut rows: Vec<&ResultRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            (a.sample_size, a.num_categories, a.mode)
                .cmp(&(b.sample_size, b.num_categories, b.mode))
                .then_with(|| compare_methods(&a.method, &b.method))
        });
        rows
    }

    /// Baseline first, then standard and BAGG columns by method order.
    pub fn columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = Vec::new();
        for mode in Mode::ALL {
            let mut methods: Vec<&str> = self
                .rows
                .iter()
                .filter(|r| r.mode == mode)
                .map(|r| r.method.as_str())
                .collect();
            methods.sort_by(|a, b| compare_methods(a, b));
            methods.dedup();
            cols.extend(methods.into_iter().map(|m| Column {
                mode,
                method: m.to_string(),
            }));
        }
        cols
    }

    /// `(num_categories, sample_size)` keys in display order, each mapped to
    /// the cells present for it.
    pub fn grid(&self) -> Grid<'_> {
        let mut grid = Grid::new();
        for r in &self.rows {
            grid.entry((r.num_categories, r.sample_size))
                .or_default()
                .insert((r.mode, r.method.clone()), r);
        }
        grid
    }
}

pub fn percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// Renders the table as wide Markdown or long-form CSV.
pub fn format_table(table: &ResultTable, format: TableFormat) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Invalid("cannot format an empty result table".into()));
    }
    Ok(match format {
        TableFormat::Csv => to_csv(table),
        TableFormat::Markdown => to_markdown(table),
    })
}

fn to_markdown(table: &ResultTable) -> String {
    let cols = table.columns();
    let mut out = String::new();
    let headers: Vec<String> = cols.iter().map(Column::header).collect();
    let _ = writeln!(
        out,
        "| Sample Size | Categories | {} |",
        headers.join(" | ")
    );
    let _ = writeln!(out, "|---:|---:|{}", "---:|".repeat(cols.len()));
    for ((cats, n), cells) in table.grid() {
        let values: Vec<String> = cols
            .iter()
            .map(|c| {
                cells
                    .get(&(c.mode, c.method.clone()))
                    .map(|r| percent(r.mean_accuracy))
                    .unwrap_or_else(|| MISSING.to_string())
            })
            .collect();
        let _ = writeln!(out, "| {n} | {cats} | {} |", values.join(" | "));
    }
    out
}

fn to_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in table.sorted_rows() {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{},{}",
            r.sample_size,
            r.num_categories,
            r.mode,
            csv_field(&r.method),
            r.mean_accuracy,
            r.std_dev,
            r.repetitions,
            r.seed
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Deserialize)]
struct CsvRow {
    sample_size: usize,
    num_categories: usize,
    mode: Mode,
    method: String,
    mean_accuracy: f64,
    std_dev: f64,
    repetitions: usize,
    seed: u64,
}

/// Parses the long-form CSV written by [`format_table`].
pub fn parse_csv(text: &str) -> Result<ResultTable> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if headers != CSV_HEADER {
        return Err(Error::Invalid(format!(
            "unexpected results header `{headers}`"
        )));
    }
    let mut rows = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let r = row?;
        rows.push(ResultRow {
            sample_size: r.sample_size,
            num_categories: r.num_categories,
            mode: r.mode,
            method: r.method,
            mean_accuracy: r.mean_accuracy,
            std_dev: r.std_dev,
            repetitions: r.repetitions,
            seed: r.seed,
            accuracies: Vec::new(),
        });
    }
    Ok(ResultTable {
        rows,
        skipped: Vec::new(),
    })
}

pub fn read_results(path: &Path) -> Result<ResultTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}
