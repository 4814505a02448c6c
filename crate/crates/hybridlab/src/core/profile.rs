use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-stamped applied current, interpreted as zero-order hold between
/// samples. Positive current = discharge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct CurrentProfile {
    /// (time [s], current [A]) pairs; time strictly increasing from 0.
    samples: Vec<(f64, f64)>,
}

impl CurrentProfile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::DegenerateProfile("need at least 2 samples".into()));
        }
        if samples[0].0 != 0.0 {
            return Err(Error::DegenerateProfile("profile must start at t = 0".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::DegenerateProfile("times must be strictly increasing".into()));
        }
        if samples.iter().any(|(t, i)| !t.is_finite() || !i.is_finite()) {
            return Err(Error::DegenerateProfile("non-finite sample".into()));
        }
        Ok(CurrentProfile { samples })
    }

    /// Constant-current profile over [0, duration].
    pub fn constant(current_a: f64, duration_s: f64) -> Result<Self> {
        CurrentProfile::new(vec![(0.0, current_a), (duration_s, current_a)])
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().unwrap().0
    }

    /// Zero-order-hold value of the most recent sample at or before `t`.
    pub fn current_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.end_time()).contains(&t) {
            return Err(Error::OutOfRange { t, end: self.end_time() });
        }
        let idx = self
            .samples
            .partition_point(|&(ts, _)| ts <= t)
            .saturating_sub(1);
        Ok(self.samples[idx].1)
    }

    pub fn max_abs_current(&self) -> f64 {
        self.samples.iter().map(|(_, i)| i.abs()).fold(0.0, f64::max)
    }

    /// Rescales every current so the maximum magnitude equals `target_max`.
    pub fn scale_to_max(&self, target_max: f64) -> Result<Self> {
        if target_max <= 0.0 {
            return Err(Error::Argument(format!("target_max must be > 0, got {target_max}")));
        }
        let max = self.max_abs_current();
        if max == 0.0 {
            return Err(Error::DegenerateProfile("all-zero profile cannot be scaled".into()));
        }
        let k = target_max / max;
        CurrentProfile::new(self.samples.iter().map(|&(t, i)| (t, i * k)).collect())
    }

    /// Reads a `time_s,current_a` CSV (header required).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(e.to_string()))?
            .clone();
        let ti = headers.iter().position(|h| h == "time_s");
        let ci = headers.iter().position(|h| h == "current_a");
        let (ti, ci) = match (ti, ci) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::CsvParse {
                    line: 1,
                    what: "expected columns time_s,current_a".into(),
                })
            }
        };
        let mut samples = Vec::new();
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
            samples.push((parse(ti)?, parse(ci)?));
        }
        CurrentProfile::new(samples)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("time_s,current_a\n");
        for (t, i) in &self.samples {
            out.push_str(&format!("{t},{i}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

impl TryFrom<Vec<(f64, f64)>> for CurrentProfile {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        CurrentProfile::new(v)
    }
}

impl From<CurrentProfile> for Vec<(f64, f64)> {
    fn from(p: CurrentProfile) -> Self {
        p.samples
    }
}

/// Current as a dimensionless multiple of the nominal-capacity current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CRate(f64);

impl CRate {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::Argument(format!("C-rate must be >= 0, got {value}")));
        }
        Ok(CRate(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Current in amperes for a cell of the given nominal capacity.
    pub fn to_amps(self, capacity_ah: f64) -> f64 {
        self.0 * capacity_ah
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_order_hold() {
        let p = CurrentProfile::new(vec![(0.0, 5.0), (10.0, 0.0)]).unwrap();
        assert_eq!(p.current_at(3.0).unwrap(), 5.0);
        assert_eq!(p.current_at(10.0).unwrap(), 0.0);
        let p = CurrentProfile::new(vec![(0.0, 1.0), (2.0, 2.0), (4.0, 3.0)]).unwrap();
        assert_eq!(p.current_at(2.5).unwrap(), 2.0);
        assert_eq!(p.current_at(2.0).unwrap(), 2.0);
        assert_eq!(p.current_at(0.0).unwrap(), 1.0);
    }

    #[test]
    fn current_at_out_of_range() {
        let p = CurrentProfile::new(vec![(0.0, 5.0), (10.0, 0.0)]).unwrap();
        assert!(matches!(p.current_at(-0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.current_at(10.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn scaling() {
        let p = CurrentProfile::new(vec![(0.0, 2.5), (5.0, -1.0), (9.0, 0.5)]).unwrap();
        let q = p.scale_to_max(20.0).unwrap();
        for ((t0, i0), (t1, i1)) in p.samples().iter().zip(q.samples()) {
            assert_eq!(t0, t1);
            assert_eq!(i0 * 8.0, *i1);
        }
        // identity scaling
        let r = p.scale_to_max(2.5).unwrap();
        assert_eq!(p, r);
        // signs preserved
        let p = CurrentProfile::new(vec![(0.0, -1.0), (1.0, 2.0)]).unwrap();
        let q = p.scale_to_max(4.0).unwrap();
        assert_eq!(q.samples(), &[(0.0, -2.0), (1.0, 4.0)]);
    }

    #[test]
    fn scaling_zero_profile_fails() {
        let p = CurrentProfile::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert!(matches!(p.scale_to_max(1.0), Err(Error::DegenerateProfile(_))));
    }

    #[test]
    fn scale_round_trip() {
        let p = CurrentProfile::new(vec![(0.0, 1.3), (1.0, -0.7), (2.0, 2.9)]).unwrap();
        let back = p.scale_to_max(17.0).unwrap().scale_to_max(2.9).unwrap();
        for ((_, a), (_, b)) in p.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(CurrentProfile::new(vec![(0.0, 1.0)]).is_err());
        assert!(CurrentProfile::new(vec![(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(CurrentProfile::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn crate_validation() {
        assert!(CRate::new(-1.0).is_err());
        assert_eq!(CRate::new(2.0).unwrap().to_amps(2.5), 5.0);
    }
}
