//! Reading and writing embedding matrices, label assignments, and prediction
//! matrices.
//!
//! Embeddings travel in two interchangeable encodings:
//!
//! * CSV with header `id,f0,...,f{D-1}`, one sample per row, floats written
//!   with nine significant digits (enough to round-trip `f32` exactly);
//! * the `EMB1` binary form: the four magic bytes `EMB1`, then `N` and `D` as
//!   little-endian `u32`, then `N·D` little-endian IEEE-754 `f32` values in
//!   row-major order. Ids are implicitly `0..N-1`; arbitrary ids live only in
//!   the CSV form.
//!
//! Labels travel as `id,label` CSV and prediction matrices as `id,p0,...`
//! CSV. In every CSV form, lines starting with `#` are metadata comments and
//! are skipped; data rows are numbered from 1 in error reports, and columns
//! count CSV fields from 0 (so feature `f3` is column 4).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Magic bytes opening every EMB1 file.
pub const EMB1_MAGIC: [u8; 4] = *b"EMB1";

/// Tolerance on `|row sum - 1|` for prediction rows.
pub const ROW_SUM_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing or malformed header, expected `{expected}`")]
    MissingHeader { expected: String },
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("cannot parse `{text}` at row {row}, column {col}")]
    BadField { row: usize, col: usize, text: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("duplicate sample id {0}")]
    DuplicateId(u64),
    #[error("bad magic bytes, expected `EMB1`")]
    BadMagic,
    #[error("file size mismatch: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("binary output requires contiguous ids 0..N-1")]
    NonContiguousIds,
    #[error("matrix too large for EMB1 (dimensions must fit in u32)")]
    TooLarge,
    #[error("negative label at row {row}")]
    NegativeLabel { row: usize },
    #[error("row {row} sums to {sum}, outside 1 ± {ROW_SUM_TOL}")]
    RowNotNormalized { row: usize, sum: f64 },
    #[error("negative probability at row {row}, column {col}")]
    NegativeProbability { row: usize, col: usize },
    #[error("label set must contain at least two classes")]
    TooFewClasses,
    #[error("class index {class} for id {id} is out of range (c = {classes})")]
    ClassIndexOutOfRange { id: u64, class: usize, classes: usize },
    #[error("need at least one row and one column")]
    EmptyMatrix,
    #[error("data length {len} does not match rows x cols = {expected}")]
    ShapeMismatch { len: usize, expected: usize },
    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// N x D feature matrix with stable sample ids.
///
/// Row order is load order; `ids[i]` names row `i`. Values are finite `f32`
/// (the interchange precision); numeric kernels widen to `f64` internally.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<u64>,
    data: Vec<f32>,
    rows: usize,
    cols: usize,
}

impl EmbeddingMatrix {
    /// Builds a matrix from ids and row-major data, validating the type
    /// invariants (non-empty, finite, unique ids).
    pub fn new(ids: Vec<u64>, data: Vec<f32>, cols: usize) -> Result<Self, IngestError> {
        let rows = ids.len();
        if rows == 0 || cols == 0 {
            return Err(IngestError::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(IngestError::ShapeMismatch { len: data.len(), expected: rows * cols });
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(IngestError::NonFiniteValue { row: i / cols, col: i % cols });
            }
        }
        let mut seen = BTreeSet::new();
        for &id in &ids {
            if !seen.insert(id) {
                return Err(IngestError::DuplicateId(id));
            }
        }
        Ok(Self { ids, data, rows, cols })
    }

    pub fn n_samples(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.cols
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Row-major backing slice, length `n_samples() * dim()`.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    /// True when ids are exactly `0..N-1`, the precondition for EMB1 output.
    pub fn has_contiguous_ids(&self) -> bool {
        self.ids.iter().enumerate().all(|(i, &id)| id == i as u64)
    }

    /// Sub-matrix over the given distinct row positions, keeping their ids.
    ///
    /// Panics if `rows` is empty or out of range; callers pass positions they
    /// derived from this matrix.
    pub fn restrict(&self, rows: &[usize]) -> Self {
        assert!(!rows.is_empty(), "restrict needs at least one row");
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            ids.push(self.ids[r]);
            data.extend_from_slice(self.row(r));
        }
        Self { ids, data, rows: rows.len(), cols: self.cols }
    }
}

/// Map from sample id to class index, with the class count `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    labels: BTreeMap<u64, usize>,
    classes: usize,
}

impl LabelAssignment {
    pub fn new(labels: BTreeMap<u64, usize>, classes: usize) -> Result<Self, IngestError> {
        if classes < 2 {
            return Err(IngestError::TooFewClasses);
        }
        for (&id, &class) in &labels {
            if class >= classes {
                return Err(IngestError::ClassIndexOutOfRange { id, class, classes });
            }
        }
        Ok(Self { labels, classes })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn class_of(&self, id: u64) -> Option<usize> {
        self.labels.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// (id, class) pairs in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, usize)> + '_ {
        self.labels.iter().map(|(&id, &class)| (id, class))
    }

    /// Ids grouped by class, ascending within each class.
    pub fn ids_by_class(&self) -> Vec<Vec<u64>> {
        let mut groups = vec![Vec::new(); self.classes];
        for (&id, &class) in &self.labels {
            groups[class].push(id);
        }
        groups
    }
}

/// N x c matrix of per-sample class probabilities.
///
/// Rows are validated (entries non-negative, sum within [`ROW_SUM_TOL`] of 1)
/// and renormalized to sum exactly to 1 at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    ids: Vec<u64>,
    probs: Vec<f64>,
    rows: usize,
    classes: usize,
}

impl PredictionMatrix {
    pub fn new(ids: Vec<u64>, mut probs: Vec<f64>, classes: usize) -> Result<Self, IngestError> {
        let rows = ids.len();
        if rows == 0 || classes == 0 {
            return Err(IngestError::EmptyMatrix);
        }
        if probs.len() != rows * classes {
            return Err(IngestError::ShapeMismatch { len: probs.len(), expected: rows * classes });
        }
        let mut seen = BTreeSet::new();
        for &id in &ids {
            if !seen.insert(id) {
                return Err(IngestError::DuplicateId(id));
            }
        }
        for r in 0..rows {
            let row = &mut probs[r * classes..(r + 1) * classes];
            let mut sum = 0.0;
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(IngestError::NonFiniteValue { row: r + 1, col: c + 1 });
                }
                if v < 0.0 {
                    return Err(IngestError::NegativeProbability { row: r + 1, col: c + 1 });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(IngestError::RowNotNormalized { row: r + 1, sum });
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        Ok(Self { ids, probs, rows, classes })
    }

    pub fn n_samples(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.classes..(i + 1) * self.classes]
    }
}

/// Nine significant digits: the smallest count that round-trips every f32.
fn format_f32(v: f32) -> String {
    format!("{v:.8e}")
}

/// Lines that carry content: skips blank lines and `#` comments.
fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim_end).filter(|l| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('#')
    })
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

// ---------------------------------------------------------------------------
// Embeddings CSV
// ---------------------------------------------------------------------------

pub fn parse_embeddings_csv(text: &str) -> Result<EmbeddingMatrix, IngestError> {
    let expected_header = "id,f0,...,f{D-1}".to_string();
    let mut lines = content_lines(text);
    let header = lines
        .next()
        .ok_or_else(|| IngestError::MissingHeader { expected: expected_header.clone() })?;
    let fields = split_fields(header);
    if fields.len() < 2 || fields[0] != "id" {
        return Err(IngestError::MissingHeader { expected: expected_header });
    }
    for (j, f) in fields[1..].iter().enumerate() {
        if *f != format!("f{j}") {
            return Err(IngestError::MissingHeader { expected: expected_header });
        }
    }
    let dim = fields.len() - 1;

    let mut ids = Vec::new();
    let mut seen = BTreeSet::new();
    let mut data = Vec::new();
    for (row0, line) in lines.enumerate() {
        let row = row0 + 1;
        let parts = split_fields(line);
        if parts.len() != dim + 1 {
            return Err(IngestError::RaggedRow { row, got: parts.len(), expected: dim + 1 });
        }
        let id: u64 = parts[0]
            .parse()
            .map_err(|_| IngestError::BadField { row, col: 0, text: parts[0].to_string() })?;
        if !seen.insert(id) {
            return Err(IngestError::DuplicateId(id));
        }
        ids.push(id);
        for (j, p) in parts[1..].iter().enumerate() {
            let v: f32 = p
                .parse()
                .map_err(|_| IngestError::BadField { row, col: j + 1, text: p.to_string() })?;
            if !v.is_finite() {
                return Err(IngestError::NonFiniteValue { row, col: j + 1 });
            }
            data.push(v);
        }
    }
    EmbeddingMatrix::new(ids, data, dim)
}

pub fn embeddings_to_csv(m: &EmbeddingMatrix) -> String {
    let mut out = String::from("id");
    for j in 0..m.dim() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for i in 0..m.n_samples() {
        out.push_str(&m.ids()[i].to_string());
        for &v in m.row(i) {
            out.push(',');
            out.push_str(&format_f32(v));
        }
        out.push('\n');
    }
    out
}

pub fn read_embeddings_csv(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, IngestError> {
    parse_embeddings_csv(&fs::read_to_string(path)?)
}

pub fn write_embeddings_csv(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), IngestError> {
    fs::write(path, embeddings_to_csv(m))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Embeddings EMB1 binary
// ---------------------------------------------------------------------------

pub fn embeddings_to_bin(m: &EmbeddingMatrix) -> Result<Vec<u8>, IngestError> {
    if !m.has_contiguous_ids() {
        return Err(IngestError::NonContiguousIds);
    }
    let n = u32::try_from(m.n_samples()).map_err(|_| IngestError::TooLarge)?;
    let d = u32::try_from(m.dim()).map_err(|_| IngestError::TooLarge)?;
    let mut out = Vec::with_capacity(12 + m.data().len() * 4);
    out.extend_from_slice(&EMB1_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for &v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn embeddings_from_bin(bytes: &[u8]) -> Result<EmbeddingMatrix, IngestError> {
    if bytes.len() >= 4 && bytes[..4] != EMB1_MAGIC {
        return Err(IngestError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(IngestError::TruncatedFile { expected: 12, actual: bytes.len() as u64 });
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if n == 0 || d == 0 {
        return Err(IngestError::EmptyMatrix);
    }
    let expected = 12u64 + 4 * (n as u64) * (d as u64);
    if bytes.len() as u64 != expected {
        return Err(IngestError::TruncatedFile { expected, actual: bytes.len() as u64 });
    }
    let mut data = Vec::with_capacity(n * d);
    for (i, chunk) in bytes[12..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(IngestError::NonFiniteValue { row: i / d, col: i % d });
        }
        data.push(v);
    }
    EmbeddingMatrix::new((0..n as u64).collect(), data, d)
}

pub fn read_embeddings_bin(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, IngestError> {
    embeddings_from_bin(&fs::read(path)?)
}

pub fn write_embeddings_bin(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), IngestError> {
    fs::write(path, embeddings_to_bin(m)?)?;
    Ok(())
}

/// Reads embeddings from either encoding, deciding by the EMB1 magic bytes.
pub fn read_embeddings_auto(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, IngestError> {
    let bytes = fs::read(path)?;
    if bytes.len() >= 4 && bytes[..4] == EMB1_MAGIC {
        embeddings_from_bin(&bytes)
    } else {
        parse_embeddings_csv(&String::from_utf8_lossy(&bytes))
    }
}

// ---------------------------------------------------------------------------
// Labels CSV
// ---------------------------------------------------------------------------

pub fn parse_labels_csv(text: &str) -> Result<LabelAssignment, IngestError> {
    let expected_header = "id,label".to_string();
    let mut lines = content_lines(text);
    let header = lines
        .next()
        .ok_or_else(|| IngestError::MissingHeader { expected: expected_header.clone() })?;
    let fields = split_fields(header);
    if fields != ["id", "label"] {
        return Err(IngestError::MissingHeader { expected: expected_header });
    }
    let mut labels = BTreeMap::new();
    let mut max_label = 0usize;
    for (row0, line) in lines.enumerate() {
        let row = row0 + 1;
        let parts = split_fields(line);
        if parts.len() != 2 {
            return Err(IngestError::RaggedRow { row, got: parts.len(), expected: 2 });
        }
        let id: u64 = parts[0]
            .parse()
            .map_err(|_| IngestError::BadField { row, col: 0, text: parts[0].to_string() })?;
        let label: i64 = parts[1]
            .parse()
            .map_err(|_| IngestError::BadField { row, col: 1, text: parts[1].to_string() })?;
        if label < 0 {
            return Err(IngestError::NegativeLabel { row });
        }
        if labels.insert(id, label as usize).is_some() {
            return Err(IngestError::DuplicateId(id));
        }
        max_label = max_label.max(label as usize);
    }
    if labels.is_empty() {
        return Err(IngestError::TooFewClasses);
    }
    LabelAssignment::new(labels, max_label + 1)
}

pub fn labels_to_csv(labels: &LabelAssignment) -> String {
    let mut out = String::from("id,label\n");
    for (id, class) in labels.iter() {
        out.push_str(&format!("{id},{class}\n"));
    }
    out
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelAssignment, IngestError> {
    parse_labels_csv(&fs::read_to_string(path)?)
}

pub fn write_labels(labels: &LabelAssignment, path: impl AsRef<Path>) -> Result<(), IngestError> {
    fs::write(path, labels_to_csv(labels))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Predictions CSV
// ---------------------------------------------------------------------------

pub fn parse_predictions_csv(text: &str) -> Result<PredictionMatrix, IngestError> {
    let expected_header = "id,p0,...,p{c-1}".to_string();
    let mut lines = content_lines(text);
    let header = lines
        .next()
        .ok_or_else(|| IngestError::MissingHeader { expected: expected_header.clone() })?;
    let fields = split_fields(header);
    if fields.len() < 2 || fields[0] != "id" {
        return Err(IngestError::MissingHeader { expected: expected_header });
    }
    for (j, f) in fields[1..].iter().enumerate() {
        if *f != format!("p{j}") {
            return Err(IngestError::MissingHeader { expected: expected_header });
        }
    }
    let classes = fields.len() - 1;

    let mut ids = Vec::new();
    let mut seen = BTreeSet::new();
    let mut probs = Vec::new();
    for (row0, line) in lines.enumerate() {
        let row = row0 + 1;
        let parts = split_fields(line);
        if parts.len() != classes + 1 {
            return Err(IngestError::RaggedRow { row, got: parts.len(), expected: classes + 1 });
        }
        let id: u64 = parts[0]
            .parse()
            .map_err(|_| IngestError::BadField { row, col: 0, text: parts[0].to_string() })?;
        if !seen.insert(id) {
            return Err(IngestError::DuplicateId(id));
        }
        ids.push(id);
        let mut sum = 0.0f64;
        let start = probs.len();
        for (j, p) in parts[1..].iter().enumerate() {
            let v: f64 = p
                .parse()
                .map_err(|_| IngestError::BadField { row, col: j + 1, text: p.to_string() })?;
            if !v.is_finite() {
                return Err(IngestError::NonFiniteValue { row, col: j + 1 });
            }
            if v < 0.0 {
                return Err(IngestError::NegativeProbability { row, col: j + 1 });
            }
            sum += v;
            probs.push(v);
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(IngestError::RowNotNormalized { row, sum });
        }
        for v in &mut probs[start..] {
            *v /= sum;
        }
    }
    if ids.is_empty() {
        return Err(IngestError::EmptyMatrix);
    }
    // Rows were validated and renormalized above; the constructor re-checks.
    PredictionMatrix::new(ids, probs, classes)
}

pub fn predictions_to_csv(p: &PredictionMatrix) -> String {
    let mut out = String::from("id");
    for j in 0..p.classes() {
        out.push_str(&format!(",p{j}"));
    }
    out.push('\n');
    for i in 0..p.n_samples() {
        out.push_str(&p.ids()[i].to_string());
        for &v in p.row(i) {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionMatrix, IngestError> {
    parse_predictions_csv(&fs::read_to_string(path)?)
}

pub fn write_predictions(p: &PredictionMatrix, path: impl AsRef<Path>) -> Result<(), IngestError> {
    fs::write(path, predictions_to_csv(p))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeddings_csv_basic() {
        let m = parse_embeddings_csv("id,f0,f1\n0,1.0,2.0\n1,3.0,4.0\n").unwrap();
        assert_eq!(m.n_samples(), 2);
        assert_eq!(m.dim(), 2);
        assert_eq!(m.ids(), &[0, 1]);
        assert_eq!(m.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn embeddings_csv_ragged_row() {
        let err = parse_embeddings_csv("id,f0,f1\n0,1.0,2.0\n1,3.0\n").unwrap_err();
        match err {
            IngestError::RaggedRow { row, .. } => assert_eq!(row, 2),
            other => panic!("expected RaggedRow, got {other:?}"),
        }
    }

    #[test]
    fn embeddings_csv_duplicate_id() {
        let err = parse_embeddings_csv("id,f0\n0,1.0\n0,2.0\n").unwrap_err();
        match err {
            IngestError::DuplicateId(id) => assert_eq!(id, 0),
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn embeddings_csv_missing_header() {
        assert!(matches!(
            parse_embeddings_csv("0,1.0\n1,2.0\n"),
            Err(IngestError::MissingHeader { .. })
        ));
    }

    #[test]
    fn embeddings_csv_non_finite() {
        let err = parse_embeddings_csv("id,f0,f1\n0,1.0,NaN\n").unwrap_err();
        match err {
            IngestError::NonFiniteValue { row, col } => {
                assert_eq!((row, col), (1, 2));
            }
            other => panic!("expected NonFiniteValue, got {other:?}"),
        }
    }

    #[test]
    fn embeddings_csv_skips_comments() {
        let m = parse_embeddings_csv("# meta: x=1\nid,f0\n0,1.5\n").unwrap();
        assert_eq!(m.get(0, 0), 1.5);
    }

    #[test]
    fn emb1_minimal_file() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"EMB1");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&0.0f32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        let m = embeddings_from_bin(&bytes).unwrap();
        assert_eq!(m.n_samples(), 1);
        assert_eq!(m.dim(), 2);
        assert_eq!(m.ids(), &[0]);
        assert_eq!(m.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn emb1_truncated() {
        assert!(matches!(
            embeddings_from_bin(b"EMB1\x01\x00\x00"),
            Err(IngestError::TruncatedFile { expected: 12, actual: 7 })
        ));
    }

    #[test]
    fn emb1_bad_magic() {
        assert!(matches!(embeddings_from_bin(b"XMB1aaaaaaaaaaaa"), Err(IngestError::BadMagic)));
    }

    #[test]
    fn emb1_size_arithmetic() {
        let m = EmbeddingMatrix::new(vec![0, 1], vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let bytes = embeddings_to_bin(&m).unwrap();
        assert_eq!(bytes.len(), 28);
    }

    #[test]
    fn emb1_non_contiguous_ids() {
        let m = EmbeddingMatrix::new(vec![0, 2], vec![1.0, 2.0], 1).unwrap();
        assert!(matches!(embeddings_to_bin(&m), Err(IngestError::NonContiguousIds)));
    }

    #[test]
    fn labels_basic() {
        let l = parse_labels_csv("id,label\n0,0\n1,1\n2,1\n").unwrap();
        assert_eq!(l.classes(), 2);
        assert_eq!(l.class_of(0), Some(0));
        assert_eq!(l.class_of(1), Some(1));
        assert_eq!(l.class_of(2), Some(1));
    }

    #[test]
    fn labels_negative() {
        assert!(matches!(
            parse_labels_csv("id,label\n0,-1\n"),
            Err(IngestError::NegativeLabel { row: 1 })
        ));
    }

    #[test]
    fn labels_duplicate() {
        assert!(matches!(
            parse_labels_csv("id,label\n0,0\n0,1\n"),
            Err(IngestError::DuplicateId(0))
        ));
    }

    #[test]
    fn predictions_uniform_row() {
        let p = parse_predictions_csv("id,p0,p1\n0,0.5,0.5\n").unwrap();
        assert_eq!(p.classes(), 2);
        assert_eq!(p.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn predictions_not_normalized() {
        let err = parse_predictions_csv("id,p0,p1\n0,0.9,0.2\n").unwrap_err();
        match err {
            IngestError::RowNotNormalized { row, sum } => {
                assert_eq!(row, 1);
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("expected RowNotNormalized, got {other:?}"),
        }
    }

    #[test]
    fn predictions_one_hot() {
        let p = parse_predictions_csv("id,p0,p1\n0,1.0,0.0\n").unwrap();
        assert_eq!(p.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn predictions_negative() {
        assert!(matches!(
            parse_predictions_csv("id,p0,p1\n0,1.2,-0.2\n"),
            Err(IngestError::NegativeProbability { row: 1, col: 2 })
        ));
    }

    #[test]
    fn predictions_near_one_renormalized() {
        let p = parse_predictions_csv("id,p0,p1\n0,0.500001,0.5\n").unwrap();
        let row = p.row(0);
        assert!((row[0] + row[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_and_binary_agree() {
        let m = EmbeddingMatrix::new(
            vec![0, 1, 2],
            vec![0.1, -2.5e-8, 3.25, 4.0, 5.5, 1.0e7],
            2,
        )
        .unwrap();
        let via_csv = parse_embeddings_csv(&embeddings_to_csv(&m)).unwrap();
        let via_bin = embeddings_from_bin(&embeddings_to_bin(&m).unwrap()).unwrap();
        assert_eq!(via_csv, via_bin);
        assert_eq!(via_csv, m);
    }

    #[test]
    fn restrict_keeps_ids() {
        let m = EmbeddingMatrix::new(vec![10, 20, 30], vec![1.0, 2.0, 3.0], 1).unwrap();
        let s = m.restrict(&[2, 0]);
        assert_eq!(s.ids(), &[30, 10]);
        assert_eq!(s.data(), &[3.0, 1.0]);
    }
}
