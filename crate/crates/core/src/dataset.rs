//! Dense row-major feature matrices and labeled datasets, with CSV I/O.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values do not fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }

    /// New matrix holding the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }
}

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = features.cols().max(1);
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// One past the largest label.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Read a CSV with a header row whose last column is `label`.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Self, Vec<String>)> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header.last().map(String::as_str) != Some("label") {
            return Err(Error::Parse("last CSV column must be named `label`".into()));
        }
        let n_feat = header.len() - 1;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != header.len() {
                return Err(Error::Malformed { line, msg: format!("expected {} fields", header.len()) });
            }
            for j in 0..n_feat {
                let v: f64 = rec[j]
                    .parse()
                    .map_err(|_| Error::Malformed { line, msg: format!("bad number {:?}", &rec[j]) })?;
                data.push(v);
            }
            let label: usize = rec[n_feat]
                .parse()
                .map_err(|_| Error::Malformed { line, msg: format!("bad label {:?}", &rec[n_feat]) })?;
            labels.push(label);
        }
        let features = Matrix::new(labels.len(), n_feat, data)?;
        Ok((Self::new(features, labels)?, header[..n_feat].to_vec()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Write with a header; features are printed with round-trip precision.
    pub fn write_csv<W: Write>(&self, writer: W, feature_names: &[String]) -> Result<()> {
        if feature_names.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "{} column names for {} features",
                feature_names.len(),
                self.n_features()
            )));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = feature_names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        let mut buf = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            buf.clear();
            buf.extend(self.features.row(i).iter().map(|v| v.to_string()));
            buf.push(self.labels[i].to_string());
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, feature_names: &[String]) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?), feature_names)
    }
}

/// `f0, f1, …` column names.
pub fn default_feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::new(Matrix::from_rows(&[vec![0.1, 0.25], vec![1.0 / 3.0, 0.0]]).unwrap(), vec![2, 0]).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        ds.write_csv(&mut buf, &names).unwrap();
        let (back, header) = Dataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back, ds);
        assert_eq!(header, names);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(Dataset::read_csv("a,b\n1,2\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(
            Dataset::read_csv("a,label\nx,2\n".as_bytes()),
            Err(Error::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            Dataset::read_csv("a,label\nNaN,2\n".as_bytes()),
            Err(Error::NonFinite { row: 0, col: 0 })
        ));
    }

    #[test]
    fn shape_checks() {
        assert!(Matrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Dataset::new(Matrix::zeros(2, 1), vec![0]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
