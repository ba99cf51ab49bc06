//! File formats.
//!
//! Logit file (CSV, UTF-8, LF line endings):
//!
//! ```text
//! label,z_0,z_1,...,z_{K-1}
//! 3,0.12,-1.5,...
//! ,0.5,0.25,...        <- empty label = unlabeled row
//! ```
//!
//! Report file: `dataset,score,alpha,trial,coverage,avg_size`, floats with
//! six decimals. Sweep file: `temperature,avg_size,coverage_d3,threshold`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::EvalRow;
use crate::temperature::SweepResult;
use crate::types::{LogitVector, PredictionSet};

pub const REPORT_HEADER: &str = "dataset,score,alpha,trial,coverage,avg_size";
pub const SWEEP_HEADER: &str = "temperature,avg_size,coverage_d3,threshold";
pub const SETS_HEADER: &str = "prediction_set";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogitFormat {
    #[default]
    Csv,
    Tsv,
}

impl LogitFormat {
    fn delimiter(self) -> u8 {
        match self {
            LogitFormat::Csv => b',',
            LogitFormat::Tsv => b'\t',
        }
    }

    /// Picks the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => LogitFormat::Tsv,
            _ => LogitFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitRow {
    pub label: Option<usize>,
    pub logits: LogitVector,
}

/// Logits for a set of examples, all with the same class count.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitTable {
    num_classes: usize,
    rows: Vec<LogitRow>,
}

impl LogitTable {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        Ok(LogitTable {
            num_classes,
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, row: LogitRow) -> Result<()> {
        if row.logits.num_classes() != self.num_classes {
            return Err(Error::Shape {
                expected: self.num_classes,
                got: row.logits.num_classes(),
            });
        }
        if let Some(y) = row.label {
            if y >= self.num_classes {
                return Err(Error::InvalidInput(format!(
                    "label {y} out of range for {} classes",
                    self.num_classes
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn rows(&self) -> &[LogitRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(logits, label)` for every labeled row, in file order.
    pub fn labeled(&self) -> Vec<(LogitVector, usize)> {
        self.rows
            .iter()
            .filter_map(|r| r.label.map(|y| (r.logits.clone(), y)))
            .collect()
    }

    /// Logits of every row, labeled or not.
    pub fn logits(&self) -> Vec<LogitVector> {
        self.rows.iter().map(|r| r.logits.clone()).collect()
    }

    /// Appends all rows of `other`; class counts must agree.
    pub fn extend(&mut self, other: LogitTable) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::Shape {
                expected: self.num_classes,
                got: other.num_classes,
            });
        }
        self.rows.extend(other.rows);
        Ok(())
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn load_logits(path: impl AsRef<Path>, format: LogitFormat) -> Result<LogitTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, format!("unreadable header: {e}")))?
        .clone();
    if header.get(0) != Some("label") {
        return Err(parse_err(path, 1, "header must start with `label`"));
    }
    let k = header.len() - 1;
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("z_{i}") {
            return Err(parse_err(
                path,
                1,
                format!("expected column `z_{i}`, found `{name}`"),
            ));
        }
    }
    let mut table =
        LogitTable::new(k).map_err(|_| parse_err(path, 1, format!("header declares {k} classes; need at least 2")))?;

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != k + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", k + 1, record.len()),
            ));
        }
        let label = match record.get(0).unwrap_or("").trim() {
            "" => None,
            s => {
                let y: usize = s
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("invalid label `{s}`")))?;
                if y >= k {
                    return Err(parse_err(
                        path,
                        line,
                        format!("label {y} out of range for {k} classes"),
                    ));
                }
                Some(y)
            }
        };
        let mut values = Vec::with_capacity(k);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid logit `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("non-finite logit `{field}`")));
            }
            values.push(v);
        }
        let logits = LogitVector::new(values).map_err(|e| parse_err(path, line, e.to_string()))?;
        table.push(LogitRow { label, logits })?;
    }
    Ok(table)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes logits with shortest round-trip float formatting.
pub fn save_logits(table: &LogitTable, path: impl AsRef<Path>, format: LogitFormat) -> Result<()> {
    let path = path.as_ref();
    let sep = format.delimiter() as char;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "label").map_err(io)?;
    for i in 0..table.num_classes() {
        write!(w, "{sep}z_{i}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for row in table.rows() {
        if let Some(y) = row.label {
            write!(w, "{y}").map_err(io)?;
        }
        for v in row.logits.as_slice() {
            write!(w, "{sep}{v:?}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn check_field(name: &str) -> Result<()> {
    if name.contains([',', '"', '\n', '\r']) {
        return Err(Error::InvalidInput(format!(
            "report field `{name}` must not contain commas, quotes or newlines"
        )));
    }
    Ok(())
}

fn sorted_rows(rows: &[EvalRow]) -> Vec<&EvalRow> {
    let mut sorted: Vec<&EvalRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then_with(|| a.score.cmp(&b.score))
            .then_with(|| a.alpha.total_cmp(&b.alpha))
            .then_with(|| a.trial.cmp(&b.trial))
    });
    sorted
}

/// Writes the report CSV, sorted by `(dataset, score, alpha, trial)`.
pub fn write_report<W: Write>(rows: &[EvalRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in sorted_rows(rows) {
        writeln!(
            w,
            "{},{},{:.6},{},{:.6},{:.6}",
            r.dataset, r.score, r.alpha, r.trial, r.coverage, r.avg_size
        )?;
    }
    w.flush()
}

pub fn save_report(rows: &[EvalRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if rows.is_empty() {
        return Err(Error::InvalidInput("no report rows to write".into()));
    }
    for r in rows {
        check_field(&r.dataset)?;
        check_field(&r.score)?;
    }
    let w = create(path)?;
    write_report(rows, w).map_err(|e| Error::io(path, e))
}

/// Reads the six report columns back; per-class and scenario fields are left empty.
pub fn load_report(path: impl AsRef<Path>) -> Result<Vec<EvalRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != REPORT_HEADER {
        return Err(parse_err(path, 1, format!("expected header `{REPORT_HEADER}`")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid number `{}`", &record[i])))
        };
        rows.push(EvalRow {
            dataset: record[0].to_string(),
            score: record[1].to_string(),
            alpha: num(2)?,
            trial: record[3]
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid trial `{}`", &record[3])))?,
            coverage: num(4)?,
            avg_size: num(5)?,
            ..EvalRow::default()
        });
    }
    Ok(rows)
}

pub fn save_sweep(sweep: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{SWEEP_HEADER}").map_err(io)?;
    for p in &sweep.per_t {
        writeln!(
            w,
            "{:.6},{:.6},{:.6},{:.6}",
            p.temperature, p.avg_size, p.coverage_d3, p.threshold
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One line per set: semicolon-joined class indices, empty for an empty set.
pub fn save_prediction_sets(sets: &[PredictionSet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{SETS_HEADER}").map_err(io)?;
    for s in sets {
        let line: Vec<String> = s.members().iter().map(usize::to_string).collect();
        writeln!(w, "{}", line.join(";")).map_err(io)?;
    }
    w.flush().map_err(io)
}
