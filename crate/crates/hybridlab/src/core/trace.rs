use crate::error::{Error, Result};

/// Why a simulation stopped before the end of its driving profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub time_s: f64,
    pub voltage_v: f64,
    /// true if the lower voltage bound was hit, false for the upper.
    pub lower: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time_s: f64,
    pub current_a: f64,
    pub voltage_v: f64,
    /// State-feature values, in the order of `SimTrace::feature_names`.
    pub features: Vec<f64>,
}

/// Per-step output of a physical simulation: voltage plus the named state
/// features handed to the hybrid layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    feature_names: Vec<String>,
    records: Vec<TraceRecord>,
    pub cutoff: Option<Cutoff>,
}

impl SimTrace {
    pub fn new(feature_names: Vec<String>, records: Vec<TraceRecord>) -> Result<Self> {
        let n = feature_names.len();
        if records.iter().any(|r| r.features.len() != n) {
            return Err(Error::Argument("trace record feature count mismatch".into()));
        }
        Ok(SimTrace { feature_names, records, cutoff: None })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn voltages(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.voltage_v).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("time_s,current_a,voltage_v");
        for f in &self.feature_names {
            out.push(',');
            out.push_str(f);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{}", r.time_s, r.current_a, r.voltage_v));
            for v in &r.features {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_count_checked() {
        let rec = TraceRecord { time_s: 0.0, current_a: 0.0, voltage_v: 4.0, features: vec![1.0] };
        assert!(SimTrace::new(vec!["a".into(), "b".into()], vec![rec]).is_err());
    }

    #[test]
    fn csv_header_lists_features() {
        let rec = TraceRecord { time_s: 0.0, current_a: 1.0, voltage_v: 4.0, features: vec![0.5, 300.0] };
        let tr = SimTrace::new(vec!["soc_bulk".into(), "temperature".into()], vec![rec]).unwrap();
        assert!(tr.to_csv_string().starts_with("time_s,current_a,voltage_v,soc_bulk,temperature\n"));
    }
}
