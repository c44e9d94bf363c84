//! Covariate matrix, response and per-feature sort orders.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// An n x p design with response, stored column-major.
///
/// `sort_idx[j]` lists observation indices in ascending order of feature `j`,
/// ties broken by index, so `x_{j,(s)}` is `columns[j][sort_idx[j][s - 1]]`.
#[derive(Clone, Debug)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    sort_idx: Vec<Vec<usize>>,
    feature_names: Vec<String>,
    response_name: String,
}

/// Companion record written next to a saved CSV.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Sidecar {
    pub response: String,
    pub features: Vec<String>,
    pub n: usize,
    pub checksum: String,
}

impl Dataset {
    /// Builds a dataset from covariate columns and a response.
    pub fn new(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let names = (0..columns.len()).map(|j| format!("x{}", j + 1)).collect();
        Self::with_names(columns, y, names, "y".to_string())
    }

    pub fn with_names(
        columns: Vec<Vec<f64>>,
        y: Vec<f64>,
        feature_names: Vec<String>,
        response_name: String,
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::TooFewObservations(n));
        }
        if columns.is_empty() {
            return Err(Error::NoCovariates);
        }
        if feature_names.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "column {} has {} values, response has {}",
                    feature_names[j],
                    col.len(),
                    n
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonNumeric {
                    row: i + 1,
                    column: feature_names[j].clone(),
                    value: col[i].to_string(),
                });
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumeric {
                row: i + 1,
                column: response_name,
                value: y[i].to_string(),
            });
        }
        let sort_idx = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Ok(Self {
            columns,
            y,
            sort_idx,
            feature_names,
            response_name,
        })
    }

    /// Builds a dataset from row-major covariates.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("ragged covariate rows".into()));
        }
        let columns = (0..p)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::new(columns, y)
    }

    /// Reads a CSV with a header row. Every column except `response` is a covariate.
    pub fn load_csv(path: impl AsRef<Path>, response: &str) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_csv(&bytes, response)
    }

    pub fn parse_csv(bytes: &[u8], response: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(bytes);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let response_col = header
            .iter()
            .position(|h| h == response)
            .ok_or_else(|| Error::MissingResponse(response.to_string()))?;

        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            let row = r + 1;
            for (c, name) in header.iter().enumerate() {
                let cell = record.get(c).unwrap_or("");
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    return Err(Error::MissingValue {
                        row,
                        column: name.clone(),
                    });
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => cols[c].push(v),
                    _ => {
                        return Err(Error::NonNumeric {
                            row,
                            column: name.clone(),
                            value: cell.to_string(),
                        })
                    }
                }
            }
        }
        let y = cols.remove(response_col);
        let mut names = header;
        let response_name = names.remove(response_col);
        Self::with_names(cols, y, names, response_name)
    }

    /// Writes the dataset as CSV (covariates then response) and a `.json` sidecar.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_csv_bytes()?;
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        fs::write(path, &bytes).map_err(io_err)?;
        let sidecar = Sidecar {
            response: self.response_name.clone(),
            features: self.feature_names.clone(),
            n: self.n(),
            checksum: checksum(&bytes),
        };
        let side_path = path.with_extension("json");
        fs::write(&side_path, serde_json::to_vec_pretty(&sidecar)?).map_err(|source| Error::Io {
            path: side_path,
            source,
        })
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.feature_names.clone();
        header.push(self.response_name.clone());
        w.write_record(&header)
            .map_err(|e| Error::Csv(e.to_string()))?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.columns.iter().map(|c| c[i].to_string()).collect();
            rec.push(self.y[i].to_string());
            w.write_record(&rec)
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn sort_order(&self, j: usize) -> &[usize] {
        &self.sort_idx[j]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    /// The `s`-th order statistic of feature `j`, 1-based.
    pub fn order_statistic(&self, j: usize, s: usize) -> Result<f64> {
        self.check_feature(j)?;
        if s == 0 || s > self.n() {
            return Err(Error::RankOutOfRange {
                rank: s,
                max: self.n(),
            });
        }
        Ok(self.columns[j][self.sort_idx[j][s - 1]])
    }

    /// True when rank `s` separates distinct values: `x_{j,(s)} < x_{j,(s+1)}`.
    pub fn is_cut_point(&self, j: usize, s: usize) -> bool {
        s >= 1
            && s < self.n()
            && self.columns[j][self.sort_idx[j][s - 1]] < self.columns[j][self.sort_idx[j][s]]
    }

    pub fn check_feature(&self, j: usize) -> Result<()> {
        if j >= self.p() {
            return Err(Error::FeatureOutOfRange {
                feature: j,
                p: self.p(),
            });
        }
        Ok(())
    }

    /// Same covariates with a different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "response has {} values, expected {}",
                y.len(),
                self.n()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumeric {
                row: i + 1,
                column: self.response_name.clone(),
                value: y[i].to_string(),
            });
        }
        Ok(Self { y, ..self.clone() })
    }

    /// The rows listed in `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Self::with_names(
            columns,
            y,
            self.feature_names.clone(),
            self.response_name.clone(),
        )
    }

    /// SHA-256 of the canonical CSV rendering.
    pub fn checksum(&self) -> Result<String> {
        Ok(checksum(&self.to_csv_bytes()?))
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistics_follow_sort_order() {
        let d = Dataset::from_rows(&[vec![3.0], vec![1.0], vec![2.0], vec![1.0]], vec![0.0; 4])
            .unwrap();
        let got: Vec<f64> = (1..=4).map(|s| d.order_statistic(0, s).unwrap()).collect();
        assert_eq!(got, vec![1.0, 1.0, 2.0, 3.0]);
        assert!(!d.is_cut_point(0, 1));
        assert!(d.is_cut_point(0, 2));
        assert!(d.order_statistic(0, 5).is_err());
        assert!(d.order_statistic(1, 1).is_err());
    }

    #[test]
    fn parse_errors_are_distinct() {
        let bad = b"a,y\n1,2\nfoo,3\n";
        assert!(matches!(
            Dataset::parse_csv(bad, "y"),
            Err(Error::NonNumeric { row: 2, .. })
        ));
        let missing = b"a,y\n1,\n";
        assert!(matches!(
            Dataset::parse_csv(missing, "y"),
            Err(Error::MissingValue { row: 1, .. })
        ));
        assert!(matches!(
            Dataset::parse_csv(b"a,y\n1,2\n3,4\n", "z"),
            Err(Error::MissingResponse(_))
        ));
        assert!(matches!(
            Dataset::parse_csv(b"a,y\n1,2\n", "y"),
            Err(Error::TooFewObservations(1))
        ));
    }
}
