//! CSV tables (header row, shortest round-trip floats) and JSON reports.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    /// Columns named `prefix_1 … prefix_n` after the leading names.
    pub fn with_indexed(lead: &[&str], prefix: &str, n: usize) -> Self {
        let mut header: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
        header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        Self { header, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} fields, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Rows of a matrix, each prefixed by `lead[r]`.
    pub fn from_matrix(lead_name: &str, lead: &[f64], prefix: &str, m: &DMatrix<f64>) -> Result<Self> {
        let mut t = Self::with_indexed(&[lead_name], prefix, m.ncols());
        for (r, v) in lead.iter().enumerate() {
            let mut row = vec![*v];
            row.extend(m.row(r).iter());
            t.push(row)?;
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            // `{}` on f64 is the shortest string that parses back to the same value
            w.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = vec![];
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("{}: bad number {s:?}: {e}", path.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_table_layout() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = CsvTable::from_matrix("t", &[0.0, 0.5], "v", &m).unwrap();
        assert_eq!(t.header, vec!["t", "v_1", "v_2", "v_3"]);
        assert_eq!(t.rows[1], vec![0.5, 4.0, 5.0, 6.0]);
        assert_eq!(t.column("v_2").unwrap(), vec![2.0, 5.0]);
        assert!(CsvTable::new(&["a"]).push(vec![1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip_exactly(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.csv");
            let mut t = CsvTable::with_indexed(&[], "x", vals.len());
            t.push(vals.clone()).unwrap();
            t.write(&path).unwrap();
            let back = CsvTable::read(&path).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
