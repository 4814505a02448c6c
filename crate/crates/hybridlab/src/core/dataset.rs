use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::CurrentProfile;
use crate::error::{Error, Result};

/// One time-stamped measurement row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub time_s: f64,
    pub current_a: f64,
    pub voltage_v: f64,
    pub temperature_c: Option<f64>,
    pub soh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub cell_capacity_ah: f64,
    pub label: String,
}

/// A time series of current, true voltage, and optional temperature / SoH
/// columns, used for training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<DatasetRow>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>, meta: DatasetMeta) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if rows.windows(2).any(|w| w[1].time_s <= w[0].time_s) {
            return Err(Error::Data("dataset times must be strictly increasing".into()));
        }
        for r in &rows {
            if !r.voltage_v.is_finite() || r.voltage_v <= 0.0 || r.voltage_v >= 10.0 {
                return Err(Error::Data(format!(
                    "voltage {} V at t = {} s outside (0, 10) V",
                    r.voltage_v, r.time_s
                )));
            }
            if let Some(s) = r.soh {
                if !(s > 0.0 && s <= 1.0) {
                    return Err(Error::Data(format!("soh {s} outside (0, 1]")));
                }
            }
        }
        // optional columns are all-or-none
        let has_t = rows[0].temperature_c.is_some();
        let has_soh = rows[0].soh.is_some();
        if rows.iter().any(|r| r.temperature_c.is_some() != has_t || r.soh.is_some() != has_soh) {
            return Err(Error::Data("optional columns must be present on every row or none".into()));
        }
        Ok(Dataset { rows, meta })
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn voltages(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.voltage_v).collect()
    }

    pub fn has_temperature(&self) -> bool {
        self.rows[0].temperature_c.is_some()
    }

    pub fn has_soh(&self) -> bool {
        self.rows[0].soh.is_some()
    }

    /// Reconstructs the driving current profile from the time/current
    /// columns (zero-order hold on the same grid).
    pub fn profile(&self) -> Result<CurrentProfile> {
        CurrentProfile::new(self.rows.iter().map(|r| (r.time_s, r.current_a)).collect())
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (ti, ci, vi) = match (col("time_s"), col("current_a"), col("voltage_v")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::CsvParse {
                    line: 1,
                    what: "expected columns time_s,current_a,voltage_v".into(),
                })
            }
        };
        let tci = col("temperature_c");
        let si = col("soh");
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::CsvParse { line, what: e.to_string() })?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or(Error::CsvParse { line, what: "missing field".into() })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::CsvParse { line, what: e.to_string() })
            };
            rows.push(DatasetRow {
                time_s: parse(ti)?,
                current_a: parse(ci)?,
                voltage_v: parse(vi)?,
                temperature_c: tci.map(parse).transpose()?,
                soh: si.map(parse).transpose()?,
            });
        }
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Dataset::new(rows, DatasetMeta { cell_capacity_ah: 0.0, label })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("time_s,current_a,voltage_v");
        if self.has_temperature() {
            out.push_str(",temperature_c");
        }
        if self.has_soh() {
            out.push_str(",soh");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.time_s, r.current_a, r.voltage_v));
            if let Some(t) = r.temperature_c {
                out.push_str(&format!(",{t}"));
            }
            if let Some(s) = r.soh {
                out.push_str(&format!(",{s}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, v: f64) -> DatasetRow {
        DatasetRow { time_s: t, current_a: 1.0, voltage_v: v, temperature_c: None, soh: None }
    }

    #[test]
    fn validation() {
        assert!(Dataset::new(vec![], DatasetMeta::default()).is_err());
        assert!(Dataset::new(vec![row(0.0, 4.0), row(0.0, 4.0)], DatasetMeta::default()).is_err());
        assert!(Dataset::new(vec![row(0.0, 11.0)], DatasetMeta::default()).is_err());
        assert!(Dataset::new(vec![row(0.0, -1.0)], DatasetMeta::default()).is_err());
        let mut r = row(0.0, 4.0);
        r.soh = Some(1.5);
        assert!(Dataset::new(vec![r], DatasetMeta::default()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            DatasetRow { time_s: 0.0, current_a: 2.5, voltage_v: 4.05, temperature_c: Some(25.0), soh: Some(0.95) },
            DatasetRow { time_s: 1.0, current_a: 2.5, voltage_v: 4.0412345678901, temperature_c: Some(25.1), soh: Some(0.95) },
        ];
        let ds = Dataset::new(rows, DatasetMeta { cell_capacity_ah: 2.5, label: "x".into() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        ds.to_csv(&p).unwrap();
        let back = Dataset::from_csv(&p).unwrap();
        assert_eq!(ds.rows(), back.rows());
    }

    #[test]
    fn csv_optional_columns_omitted() {
        let ds = Dataset::new(vec![row(0.0, 4.0), row(1.0, 3.9)], DatasetMeta::default()).unwrap();
        let s = ds.to_csv_string();
        assert!(s.starts_with("time_s,current_a,voltage_v\n"));
        assert!(!s.contains("temperature_c"));
    }

    #[test]
    fn csv_parse_error_has_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "time_s,current_a,voltage_v\n0,1,4.0\n1,oops,3.9\n").unwrap();
        match Dataset::from_csv(&p) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
