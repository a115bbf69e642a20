//! Dataset ingestion and fixtures.
//!
//! Features are kept on their raw scale; there is no normalization step.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objective::Bounds;

/// Width added on each side of a constant feature so its bounds stay valid.
pub const CONSTANT_FEATURE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub points: Matrix,
    pub labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        points: Matrix,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if points.n_rows() == 0 || points.n_cols() == 0 {
            return Err(Error::invalid(
                "dataset needs at least one row and one feature",
            ));
        }
        if let Some((i, v)) = points
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::invalid(format!(
                "non-finite value {v} at row {}, feature {}",
                i / points.n_cols(),
                i % points.n_cols()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != points.n_rows() {
                return Err(Error::invalid(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.n_rows()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            points,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.points.n_rows()
    }

    pub fn d(&self) -> usize {
        self.points.n_cols()
    }

    /// Distinct labels in first-seen order.
    pub fn distinct_labels(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for l in self.labels.iter().flatten() {
            if !seen.contains(&l.as_str()) {
                seen.push(l.as_str());
            }
        }
        seen
    }

    /// Writes the features (and labels, as the last column) without a header,
    /// using shortest round-trip float formatting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (i, row) in self.points.rows().enumerate() {
            let mut line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            if let Some(labels) = &self.labels {
                line.push(labels[i].clone());
            }
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<usize> for ColumnRef {
    fn from(i: usize) -> Self {
        ColumnRef::Index(i)
    }
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub label_column: Option<ColumnRef>,
    pub delimiter: u8,
    pub has_header: bool,
    /// Zero-based columns to drop, e.g. record IDs.
    pub skip_columns: BTreeSet<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            label_column: None,
            delimiter: b',',
            has_header: false,
            skip_columns: BTreeSet::new(),
        }
    }
}

impl CsvSchema {
    /// Label in the last column, no header. Matches the UCI `.data` files for
    /// Iris, Glass (after dropping the ID column), Vowel, CMC and Cancer.
    pub fn label_last() -> Self {
        Self {
            label_column: Some(ColumnRef::Index(usize::MAX)),
            ..Self::default()
        }
    }
}

/// Loads a numeric table. Every column that is neither the label nor
/// skipped must parse as a finite real.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;

    let header: Option<Vec<String>> = if schema.has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n_cols: Option<usize> = None;
    let mut label_idx: Option<usize> = None;
    let mut n_features = 0;
    let row_offset = usize::from(schema.has_header);

    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => Error::Format(format!(
                "{}: inconsistent column counts ({e})",
                path.display()
            )),
            _ => e.into(),
        })?;
        let row = r + row_offset;
        if n_cols.is_none() {
            let cols = header.as_ref().map_or(record.len(), Vec::len);
            label_idx = resolve_label(schema.label_column.as_ref(), header.as_deref(), cols)?;
            if let Some(&bad) = schema.skip_columns.iter().find(|&&c| c >= cols) {
                return Err(Error::invalid(format!(
                    "skip column {bad} is outside the {cols} columns"
                )));
            }
            n_features = (0..cols)
                .filter(|c| Some(*c) != label_idx && !schema.skip_columns.contains(c))
                .count();
            if n_features == 0 {
                return Err(Error::Format("no feature columns left".into()));
            }
            n_cols = Some(cols);
        }
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                labels.push(cell.to_string());
            } else if !schema.skip_columns.contains(&c) {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: c,
                    message: format!("`{cell}` is not a real number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: c,
                        message: format!("`{cell}` is not finite"),
                    });
                }
                values.push(v);
            }
        }
    }

    if n_cols.is_none() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    let n = values.len() / n_features;
    let name = path.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    Dataset::new(
        name,
        Matrix::new(n, n_features, values)?,
        label_idx.map(|_| labels),
    )
}

fn resolve_label(
    label: Option<&ColumnRef>,
    header: Option<&[String]>,
    cols: usize,
) -> Result<Option<usize>> {
    match label {
        None => Ok(None),
        Some(ColumnRef::Index(usize::MAX)) => Ok(Some(cols - 1)),
        Some(ColumnRef::Index(i)) if *i < cols => Ok(Some(*i)),
        Some(ColumnRef::Index(i)) => Err(Error::invalid(format!(
            "label column {i} is outside the {cols} columns"
        ))),
        Some(ColumnRef::Name(name)) => {
            let header = header.ok_or_else(|| {
                Error::invalid(format!(
                    "label column `{name}` given by name but the file has no header"
                ))
            })?;
            header
                .iter()
                .position(|h| h == name)
                .map(Some)
                .ok_or_else(|| Error::invalid(format!("no column named `{name}`")))
        }
    }
}

/// Isotropic Gaussian blobs around `centers` (one row per blob). Labels are
/// the blob indices.
pub fn synthetic_blobs(
    centers: &Matrix,
    points_per_blob: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::invalid("spread must be positive"));
    }
    if centers.n_rows() == 0 || points_per_blob == 0 {
        return Err(Error::invalid(
            "need at least one blob and one point per blob",
        ));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(centers.n_rows() * points_per_blob * centers.n_cols());
    let mut labels = Vec::with_capacity(centers.n_rows() * points_per_blob);
    for (b, center) in centers.rows().enumerate() {
        for _ in 0..points_per_blob {
            values.extend(center.iter().map(|c| c + noise.sample(&mut rng)));
            labels.push(b.to_string());
        }
    }
    Dataset::new(
        "blobs",
        Matrix::new(labels.len(), centers.n_cols(), values)?,
        Some(labels),
    )
}

/// Per-feature min and max, widened by [`CONSTANT_FEATURE_EPSILON`] on
/// features that do not vary.
pub fn feature_bounds(points: &Matrix) -> Result<Bounds> {
    if points.n_rows() == 0 || points.n_cols() == 0 {
        return Err(Error::invalid("feature bounds of an empty matrix"));
    }
    let mut lower = points.row(0).to_vec();
    let mut upper = lower.clone();
    for row in points.rows().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            lower[j] = lower[j].min(v);
            upper[j] = upper[j].max(v);
        }
    }
    for (lo, hi) in lower.iter_mut().zip(upper.iter_mut()) {
        if lo == hi {
            *lo -= CONSTANT_FEATURE_EPSILON;
            *hi += CONSTANT_FEATURE_EPSILON;
        }
    }
    Bounds::new(lower, upper)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use proptest::prelude::*;
    use rand::Rng;
    use tempfile::NamedTempFile;

    use super::*;

    fn csv_file(contents: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_row_without_label() {
        let f = csv_file("1.0,2.0\n");
        let ds = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!((ds.n(), ds.d()), (1, 2));
        assert_eq!(ds.points.row(0), &[1.0, 2.0]);
        assert!(ds.labels.is_none());
    }

    #[test]
    fn bad_cell_reports_position() {
        let f = csv_file("1,2,a\n3,abc,b\n");
        let err = load_csv(f.path(), &CsvSchema::label_last()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
        // header rows count towards the reported row
        let f = csv_file("x,y\n1,2\nnan?,3\n");
        let schema = CsvSchema {
            has_header: true,
            ..CsvSchema::default()
        };
        assert!(matches!(
            load_csv(f.path(), &schema),
            Err(Error::Parse {
                row: 2,
                column: 0,
                ..
            })
        ));
    }

    #[test]
    fn missing_values_are_rejected() {
        let f = csv_file("1,2\n3,?\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default()),
            Err(Error::Parse { .. })
        ));
        let f = csv_file("1,2\n3,inf\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn ragged_and_empty_files() {
        let f = csv_file("1,2\n3\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default()),
            Err(Error::Format(_))
        ));
        let f = csv_file("");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::default()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &CsvSchema::default()),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn label_by_name_and_skip_columns() {
        let f = csv_file("id;a;class;b\n7;1.5;x;2\n8;2.5;y;3\n");
        let schema = CsvSchema {
            label_column: Some("class".into()),
            delimiter: b';',
            has_header: true,
            skip_columns: [0].into(),
        };
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.points.to_rows(), vec![vec![1.5, 2.0], vec![2.5, 3.0]]);
        assert_eq!(ds.labels.unwrap(), vec!["x", "y"]);

        let no_header = CsvSchema {
            label_column: Some("class".into()),
            ..CsvSchema::default()
        };
        assert!(load_csv(f.path(), &no_header).is_err());
        let out_of_range = CsvSchema {
            label_column: Some(9.into()),
            ..CsvSchema::default()
        };
        let g = csv_file("1,2\n");
        assert!(matches!(
            load_csv(g.path(), &out_of_range),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn blobs_are_deterministic_and_tight() {
        let centers = Matrix::from_rows(&[[0.0, 0.0], [10.0, -5.0]]).unwrap();
        let a = synthetic_blobs(&centers, 20, 1e-9, 5).unwrap();
        let b = synthetic_blobs(&centers, 20, 1e-9, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 40);
        for (i, row) in a.points.rows().enumerate() {
            let c = centers.row(i / 20);
            assert!(row.iter().zip(c).all(|(x, y)| (x - y).abs() < 1e-6));
        }
        assert_eq!(a.distinct_labels(), vec!["0", "1"]);
        assert!(synthetic_blobs(&centers, 20, 0.0, 5).is_err());
    }

    #[test]
    fn bounds_widen_constant_columns() {
        let m = Matrix::from_rows(&[[0.0, 5.0], [2.0, 5.0]]).unwrap();
        let b = feature_bounds(&m).unwrap();
        assert_eq!(b.lower(), &[0.0, 5.0 - 1e-9]);
        assert_eq!(b.upper(), &[2.0, 5.0 + 1e-9]);
        let single = Matrix::from_rows(&[[3.0, -1.0]]).unwrap();
        let b = feature_bounds(&single).unwrap();
        assert!(b.lower()[0] < 3.0 && 3.0 < b.upper()[0]);
    }

    #[test]
    fn bounds_match_column_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-50.0..50.0)).collect())
            .collect();
        let b = feature_bounds(&Matrix::from_rows(&rows).unwrap()).unwrap();
        for j in 0..3 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in &rows {
                if r[j] < lo {
                    lo = r[j];
                }
                if r[j] > hi {
                    hi = r[j];
                }
            }
            assert_eq!((b.lower()[j], b.upper()[j]), (lo, hi));
        }
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(
            rows in proptest::collection::vec(
                proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 3),
                1..20,
            )
        ) {
            let labels: Vec<String> = (0..rows.len()).map(|i| format!("c{}", i % 3)).collect();
            let ds = Dataset::new("t", Matrix::from_rows(&rows).unwrap(), Some(labels)).unwrap();
            let file = NamedTempFile::new().unwrap();
            ds.write_csv(file.path()).unwrap();
            let back = load_csv(file.path(), &CsvSchema::label_last()).unwrap();
            let same = back.points.as_slice().iter().zip(ds.points.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
            prop_assert_eq!(back.labels, ds.labels);
        }
    }
}
