//! Citation matrix and journal metadata ingestion.
//!
//! Two matrix layouts are accepted:
//!
//! * dense CSV: the first row is an ignored corner cell followed by the
//!   cited labels, every following row is a citing label followed by one
//!   count per cited column;
//! * edge-list CSV: header `citing,cited,count`, one row per nonzero pair.
//!
//! Labels are canonicalized by trimming and collapsing internal whitespace.
//! Case is significant.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}, column {column}: malformed number {value:?}")]
    Parse {
        line: u64,
        column: usize,
        value: String,
    },
    #[error("line {line}, column {column}: {value:?} is {reason}")]
    Domain {
        line: u64,
        column: usize,
        value: String,
        reason: &'static str,
    },
    #[error("line {line}, column {column}: missing cell")]
    MissingCell { line: u64, column: usize },
    #[error("line {line}: {found} cells, header has {expected}")]
    ExtraCells {
        line: u64,
        found: usize,
        expected: usize,
    },
    #[error("line {line}: missing journal label")]
    MissingLabel { line: u64 },
    #[error("duplicate {axis} label {label:?}")]
    DuplicateLabel { axis: Axis, label: String },
    #[error("duplicate edge {citing:?} -> {cited:?}")]
    DuplicatePair { citing: String, cited: String },
    #[error("bad header: expected {expected:?}, found {found:?}")]
    Header { expected: &'static str, found: String },
    #[error("empty input")]
    Empty,
    #[error("count table is {rows}x{cols}, labels are {citing}x{cited}")]
    Shape {
        rows: usize,
        cols: usize,
        citing: usize,
        cited: usize,
    },
}

/// Matrix axis: rows hold citing journals, columns hold cited journals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Citing,
    Cited,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Citing => f.write_str("citing"),
            Axis::Cited => f.write_str("cited"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    DenseCsv,
    EdgeListCsv,
}

pub const EDGE_LIST_HEADER: &str = "citing,cited,count";
pub const METADATA_HEADER: &str = "label,total_cites,impact_factor";

/// Trim and collapse internal runs of whitespace to a single space.
pub fn canonicalize(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Citing-by-cited count table. `counts[i][j]` is the number of times
/// citing journal `i` cites journal `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationMatrix {
    citing: Vec<String>,
    cited: Vec<String>,
    counts: Vec<u64>,
    citing_index: HashMap<String, usize>,
    cited_index: HashMap<String, usize>,
}

fn index_labels(labels: &[String], axis: Axis) -> Result<HashMap<String, usize>, IngestError> {
    let mut index = HashMap::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        if index.insert(label.clone(), i).is_some() {
            return Err(IngestError::DuplicateLabel {
                axis,
                label: label.clone(),
            });
        }
    }
    Ok(index)
}

impl CitationMatrix {
    /// Build a matrix from labels and row-major counts. Labels are
    /// canonicalized; duplicates after canonicalization are rejected.
    pub fn new(
        citing: Vec<String>,
        cited: Vec<String>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self, IngestError> {
        let shape_err = || IngestError::Shape {
            rows: counts.len(),
            cols: counts.first().map_or(0, Vec::len),
            citing: citing.len(),
            cited: cited.len(),
        };
        if counts.len() != citing.len() || counts.iter().any(|r| r.len() != cited.len()) {
            return Err(shape_err());
        }
        let flat = counts.into_iter().flatten().collect();
        Self::from_flat(citing, cited, flat)
    }

    fn from_flat(
        citing: Vec<String>,
        cited: Vec<String>,
        counts: Vec<u64>,
    ) -> Result<Self, IngestError> {
        let citing: Vec<String> = citing.iter().map(|l| canonicalize(l)).collect();
        let cited: Vec<String> = cited.iter().map(|l| canonicalize(l)).collect();
        debug_assert_eq!(counts.len(), citing.len() * cited.len());
        let citing_index = index_labels(&citing, Axis::Citing)?;
        let cited_index = index_labels(&cited, Axis::Cited)?;
        Ok(Self {
            citing,
            cited,
            counts,
            citing_index,
            cited_index,
        })
    }

    pub fn citing_labels(&self) -> &[String] {
        &self.citing
    }

    pub fn cited_labels(&self) -> &[String] {
        &self.cited
    }

    pub fn n_citing(&self) -> usize {
        self.citing.len()
    }

    pub fn n_cited(&self) -> usize {
        self.cited.len()
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cited.len() + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let n = self.cited.len();
        &self.counts[i * n..(i + 1) * n]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u64> + '_ {
        (0..self.citing.len()).map(move |i| self.count(i, j))
    }

    pub fn citing_position(&self, label: &str) -> Option<usize> {
        self.citing_index.get(&canonicalize(label)).copied()
    }

    pub fn cited_position(&self, label: &str) -> Option<usize> {
        self.cited_index.get(&canonicalize(label)).copied()
    }

    /// Count for a labelled pair; journals missing from an axis count as zero.
    pub fn count_by_label(&self, citing: &str, cited: &str) -> u64 {
        match (self.citing_position(citing), self.cited_position(cited)) {
            (Some(i), Some(j)) => self.count(i, j),
            _ => 0,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.cited.len().max(1)).take(self.citing.len())
    }

    pub fn transpose(&self) -> CitationMatrix {
        let (r, c) = (self.citing.len(), self.cited.len());
        let mut counts = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                counts.push(self.count(i, j));
            }
        }
        CitationMatrix {
            citing: self.cited.clone(),
            cited: self.citing.clone(),
            counts,
            citing_index: self.cited_index.clone(),
            cited_index: self.citing_index.clone(),
        }
    }

    /// Square restriction to `labels` on both axes, in the given order.
    /// Journals absent from an axis contribute zero rows or columns.
    pub fn restrict(&self, labels: &[String]) -> Result<CitationMatrix, IngestError> {
        let rows: Vec<Option<usize>> = labels.iter().map(|l| self.citing_position(l)).collect();
        let cols: Vec<Option<usize>> = labels.iter().map(|l| self.cited_position(l)).collect();
        let mut counts = Vec::with_capacity(labels.len() * labels.len());
        for r in &rows {
            for c in &cols {
                counts.push(match (r, c) {
                    (Some(i), Some(j)) => self.count(*i, *j),
                    _ => 0,
                });
            }
        }
        Self::from_flat(labels.to_vec(), labels.to_vec(), counts)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn open(path: &Path) -> Result<String, IngestError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| io_err(path, e))?;
    Ok(text)
}

pub fn parse_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<CitationMatrix, IngestError> {
    let text = open(path.as_ref())?;
    parse_matrix_str(&text, format)
}

/// Guess the layout from the first line: an edge-list header selects
/// [`MatrixFormat::EdgeListCsv`], anything else is dense.
pub fn detect_format(text: &str) -> MatrixFormat {
    let first = text.lines().next().unwrap_or("");
    let normalized: Vec<String> = first.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    if normalized.join(",") == EDGE_LIST_HEADER {
        MatrixFormat::EdgeListCsv
    } else {
        MatrixFormat::DenseCsv
    }
}

pub fn parse_matrix_str(text: &str, format: MatrixFormat) -> Result<CitationMatrix, IngestError> {
    match format {
        MatrixFormat::DenseCsv => parse_dense(text),
        MatrixFormat::EdgeListCsv => parse_edge_list(text),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Parse a non-negative integral count. Integral decimals such as `3.0`
/// are accepted; fractions and negatives are domain errors.
fn parse_count(value: &str, line: u64, column: usize) -> Result<u64, IngestError> {
    if let Ok(n) = value.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = value.parse().map_err(|_| IngestError::Parse {
        line,
        column,
        value: value.to_string(),
    })?;
    let domain = |reason| IngestError::Domain {
        line,
        column,
        value: value.to_string(),
        reason,
    };
    if !x.is_finite() {
        return Err(IngestError::Parse {
            line,
            column,
            value: value.to_string(),
        });
    }
    if x < 0.0 && x != 0.0 {
        return Err(domain("negative"));
    }
    if x.fract() != 0.0 {
        return Err(domain("not an integer"));
    }
    if x >= u64::MAX as f64 {
        return Err(domain("out of range"));
    }
    Ok(x as u64)
}

fn parse_dense(text: &str) -> Result<CitationMatrix, IngestError> {
    let mut records = reader(text).into_records();
    let header = records.next().ok_or(IngestError::Empty)??;
    let cited: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if cited.is_empty() {
        return Err(IngestError::Empty);
    }
    let width = cited.len() + 1;
    let mut citing = Vec::new();
    let mut counts = Vec::new();
    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() > width {
            return Err(IngestError::ExtraCells {
                line,
                found: record.len(),
                expected: width,
            });
        }
        let label = &record[0];
        if label.is_empty() {
            return Err(IngestError::MissingLabel { line });
        }
        citing.push(label.to_string());
        for column in 1..width {
            match record.get(column) {
                Some(cell) if !cell.is_empty() => counts.push(parse_count(cell, line, column + 1)?),
                _ => {
                    return Err(IngestError::MissingCell {
                        line,
                        column: column + 1,
                    })
                }
            }
        }
    }
    CitationMatrix::from_flat(citing, cited, counts)
}

fn parse_edge_list(text: &str) -> Result<CitationMatrix, IngestError> {
    let mut records = reader(text).into_records();
    let header = records.next().ok_or(IngestError::Empty)??;
    let found: Vec<String> = header.iter().map(str::to_ascii_lowercase).collect();
    if found.join(",") != EDGE_LIST_HEADER {
        return Err(IngestError::Header {
            expected: EDGE_LIST_HEADER,
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut citing: Vec<String> = Vec::new();
    let mut cited: Vec<String> = Vec::new();
    let mut citing_pos: HashMap<String, usize> = HashMap::new();
    let mut cited_pos: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();

    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() > 3 {
            return Err(IngestError::ExtraCells {
                line,
                found: record.len(),
                expected: 3,
            });
        }
        let field = |k: usize| record.get(k).filter(|s| !s.is_empty());
        let from = canonicalize(field(0).ok_or(IngestError::MissingLabel { line })?);
        let to = canonicalize(field(1).ok_or(IngestError::MissingLabel { line })?);
        let value = field(2).ok_or(IngestError::MissingCell { line, column: 3 })?;
        let n = parse_count(value, line, 3)?;

        let i = *citing_pos.entry(from.clone()).or_insert_with(|| {
            citing.push(from.clone());
            citing.len() - 1
        });
        let j = *cited_pos.entry(to.clone()).or_insert_with(|| {
            cited.push(to.clone());
            cited.len() - 1
        });
        if cells.insert((i, j), n).is_some() {
            return Err(IngestError::DuplicatePair {
                citing: from,
                cited: to,
            });
        }
    }
    if citing.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut counts = vec![0u64; citing.len() * cited.len()];
    for ((i, j), n) in cells {
        counts[i * cited.len() + j] = n;
    }
    CitationMatrix::from_flat(citing, cited, counts)
}

/// Optional per-journal metadata. Values are carried through to reports,
/// never derived.
#[derive(Debug, Clone, PartialEq)]
pub struct JournalMeta {
    pub label: String,
    pub total_cites: Option<u64>,
    pub impact_factor: Option<f64>,
}

pub fn parse_metadata(path: impl AsRef<Path>) -> Result<Vec<JournalMeta>, IngestError> {
    let text = open(path.as_ref())?;
    parse_metadata_str(&text)
}

pub fn parse_metadata_str(text: &str) -> Result<Vec<JournalMeta>, IngestError> {
    let mut records = reader(text).into_records().peekable();
    // The header is optional so that single-line snippets parse too.
    if let Some(Ok(first)) = records.peek() {
        let lowered: Vec<String> = first.iter().map(str::to_ascii_lowercase).collect();
        if lowered.join(",") == METADATA_HEADER {
            records.next();
        }
    }
    let mut out = Vec::new();
    for record in records {
        let record = record?;
        let line = line_of(&record);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() > 3 {
            return Err(IngestError::ExtraCells {
                line,
                found: record.len(),
                expected: 3,
            });
        }
        let label = canonicalize(record.get(0).unwrap_or(""));
        if label.is_empty() {
            return Err(IngestError::MissingLabel { line });
        }
        let total_cites = match record.get(1).filter(|s| !s.is_empty()) {
            Some(v) => Some(parse_count(v, line, 2)?),
            None => None,
        };
        let impact_factor = match record.get(2).filter(|s| !s.is_empty()) {
            Some(v) => {
                let x: f64 = v.parse().map_err(|_| IngestError::Parse {
                    line,
                    column: 3,
                    value: v.to_string(),
                })?;
                if !x.is_finite() {
                    return Err(IngestError::Parse {
                        line,
                        column: 3,
                        value: v.to_string(),
                    });
                }
                if x < 0.0 {
                    return Err(IngestError::Domain {
                        line,
                        column: 3,
                        value: v.to_string(),
                        reason: "negative",
                    });
                }
                Some(x)
            }
            None => None,
        };
        out.push(JournalMeta {
            label,
            total_cites,
            impact_factor,
        });
    }
    Ok(out)
}

/// Structural observations about a matrix. Never an error.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    /// All-zero rows.
    pub never_cites: Vec<String>,
    /// All-zero columns.
    pub never_cited: Vec<String>,
    pub citing_axis_only: Vec<String>,
    pub cited_axis_only: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.never_cites.is_empty()
            && self.never_cited.is_empty()
            && self.citing_axis_only.is_empty()
            && self.cited_axis_only.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "no issues");
        }
        for label in &self.never_cites {
            writeln!(f, "{label}: never cites")?;
        }
        for label in &self.never_cited {
            writeln!(f, "{label}: never cited")?;
        }
        for label in &self.citing_axis_only {
            writeln!(f, "{label}: citing axis only")?;
        }
        for label in &self.cited_axis_only {
            writeln!(f, "{label}: cited axis only")?;
        }
        Ok(())
    }
}

pub fn validate_matrix(m: &CitationMatrix) -> ValidationReport {
    let never_cites = m
        .citing_labels()
        .iter()
        .zip(m.rows())
        .filter(|(_, row)| row.iter().all(|&c| c == 0))
        .map(|(l, _)| l.clone())
        .collect();
    let never_cited = (0..m.n_cited())
        .filter(|&j| m.column(j).all(|c| c == 0))
        .map(|j| m.cited_labels()[j].clone())
        .collect();
    let citing_axis_only = m
        .citing_labels()
        .iter()
        .filter(|l| m.cited_position(l).is_none())
        .cloned()
        .collect();
    let cited_axis_only = m
        .cited_labels()
        .iter()
        .filter(|l| m.citing_position(l).is_none())
        .cloned()
        .collect();
    ValidationReport {
        never_cites,
        never_cited,
        citing_axis_only,
        cited_axis_only,
    }
}
