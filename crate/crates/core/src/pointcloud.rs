//! Point clouds (embedding matrices) and their on-disk formats.
//!
//! Coordinates are held as a dense row-major `f64` matrix. Labels are optional
//! and come from a CSV column or from a newline-delimited sidecar file, since
//! NPY arrays cannot carry strings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::npy;

/// `n` points in `dim`-dimensional space with optional per-point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    n: usize,
    dim: usize,
    labels: Option<Vec<String>>,
    source: String,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates, validating shape and finiteness.
    pub fn new(coords: Vec<f64>, n: usize, dim: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Shape(format!("a point cloud needs at least 2 points, got {n}")));
        }
        if dim < 1 {
            return Err(Error::Shape("a point cloud needs at least 1 coordinate".into()));
        }
        if coords.len() != n * dim {
            return Err(Error::Shape(format!("declared shape {n}x{dim} does not match {} values", coords.len())));
        }
        if let Some(pos) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: pos / dim, col: pos % dim });
        }
        Ok(Self { coords, n, dim, labels: None, source: String::new() })
    }

    /// Builds a cloud from a slice of rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Shape(format!("row {i} has {} columns, expected {dim}", row.len())));
            }
            coords.extend_from_slice(row);
        }
        Self::new(coords, rows.len(), dim)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::Validation(format!("{} labels supplied for {} points", labels.len(), self.n)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[i].as_str())
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Resolves a label to its unique point index.
    pub fn find_label(&self, label: &str) -> Result<usize> {
        let matches: Vec<usize> =
            self.labels.iter().flatten().enumerate().filter(|(_, l)| l.as_str() == label).map(|(i, _)| i).collect();
        match matches.as_slice() {
            [] => Err(Error::UnknownLabel(label.to_string())),
            [i] => Ok(*i),
            _ => Err(Error::AmbiguousLabel { label: label.to_string(), matches }),
        }
    }

    /// Returns a new cloud with every coordinate mapped through `f(row)`.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut dim = self.dim;
        for i in 0..self.n {
            let mapped = f(self.row(i));
            dim = mapped.len();
            coords.extend(mapped);
        }
        let mut out = Self::new(coords, self.n, dim)?;
        out.labels = self.labels.clone();
        out.source = self.source.clone();
        Ok(out)
    }
}

/// Loads a 2-D float32/float64 NPY array. 32-bit data is widened to `f64`.
pub fn load_npy(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let array = npy::decode(&bytes)?;
    Ok(PointCloud::new(array.data, array.rows, array.cols)?.with_source(path.display().to_string()))
}

/// Writes the coordinates as a little-endian float64 NPY v1.0 array.
pub fn save_npy(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = npy::encode_f64(cloud.coords(), cloud.n(), cloud.dim());
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a rectangular CSV of numbers, optionally taking labels from one column.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).flexible(true).from_reader(file);

    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Format(format!("ragged CSV: row {row} has {} fields, expected {w}", record.len())))
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            if Some(col) == label_column {
                labels.push(field.to_string());
                continue;
            }
            let value: f64 =
                field.trim().parse().map_err(|e| Error::Parse { row, col, msg: format!("{field:?}: {e}") })?;
            coords.push(value);
        }
        n += 1;
    }
    let width = width.unwrap_or(0);
    if let Some(c) = label_column {
        if n > 0 && c >= width {
            return Err(Error::Parameter(format!("label column {c} out of range for {width} columns")));
        }
    }
    let dim = width - usize::from(label_column.is_some() && width > 0);
    let cloud = PointCloud::new(coords, n, dim)?.with_source(path.display().to_string());
    if label_column.is_some() {
        cloud.with_labels(labels)
    } else {
        Ok(cloud)
    }
}

/// Writes the cloud as CSV with a header row. Labels, when present, go in column 0.
pub fn save_csv(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| Error::Format(e.to_string());

    let mut header: Vec<String> = Vec::with_capacity(cloud.dim() + 1);
    if cloud.labels().is_some() {
        header.push("label".into());
    }
    header.extend((0..cloud.dim()).map(|j| format!("x{j}")));
    writer.write_record(&header).map_err(wrap)?;

    for i in 0..cloud.n() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        if let Some(label) = cloud.label(i) {
            record.push(label.to_string());
        }
        // `{:?}` prints the shortest representation that parses back bit-identically.
        record.extend(cloud.row(i).iter().map(|x| format!("{x:?}")));
        writer.write_record(&record).map_err(wrap)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reads newline-delimited labels, one per point.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file).lines().map(|l| l.map_err(|e| Error::io(path, e))).collect()
}

/// Writes labels one per line.
pub fn save_labels(labels: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for label in labels {
        writeln!(w, "{label}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_and_nonfinite_clouds() {
        assert!(matches!(PointCloud::new(vec![1.0], 1, 1), Err(Error::Shape(_))));
        assert!(matches!(PointCloud::new(vec![], 2, 0), Err(Error::Shape(_))));
        assert!(matches!(PointCloud::new(vec![0.0; 5], 2, 3), Err(Error::Shape(_))));
        let err = PointCloud::new(vec![0.0, 1.0, 2.0, f64::NAN, 4.0, 5.0], 3, 2).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }));
    }

    #[test]
    fn label_count_must_match() {
        let cloud = PointCloud::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(cloud.clone().with_labels(vec!["a".into()]).is_err());
        let cloud = cloud.with_labels(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(cloud.find_label("b").unwrap(), 1);
    }

    #[test]
    fn ambiguous_label_lists_matches() {
        let cloud = PointCloud::from_rows(&[[0.0], [1.0], [2.0]])
            .unwrap()
            .with_labels(vec!["$".into(), "#".into(), "$".into()])
            .unwrap();
        match cloud.find_label("$") {
            Err(Error::AmbiguousLabel { matches, .. }) => assert_eq!(matches, vec![0, 2]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(cloud.find_label("x"), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn csv_header_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "x,y\n0,0\n1,0\n").unwrap();
        let c = load_csv(&p, true, None).unwrap();
        assert_eq!((c.n(), c.dim()), (2, 2));

        std::fs::write(&p, "a,1,2\nb,3,4\nc,5,6\n").unwrap();
        let c = load_csv(&p, false, Some(0)).unwrap();
        assert_eq!(c.labels().unwrap(), ["a", "b", "c"]);
        assert_eq!(c.dim(), 2);
        assert_eq!(c.row(2), [5.0, 6.0]);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "0,0\n1\n").unwrap();
        assert!(matches!(load_csv(&p, false, None), Err(Error::Format(_))));
        std::fs::write(&p, "0,0\n1,zz\n").unwrap();
        assert!(matches!(load_csv(&p, false, None), Err(Error::Parse { row: 1, col: 1, .. })));
    }
}
