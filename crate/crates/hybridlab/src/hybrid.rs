//! Composition layer: a physical model in cascade with an FNN, either as a
//! residual corrector (hybrid-1, predicting dV = V_true - V_phy) or as a
//! direct voltage predictor (hybrid-2), with optional SoH as an extra input
//! for aging-aware variants.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::core::{rer, rmse, CurrentProfile, Dataset, SimTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::fnn::{FnnModel, TrainConfig};
use crate::ndc::{simulate_ndc, NdcParams, NDC_FEATURES};
use crate::spmt::{simulate_spmt, SpmtParams, SPMT_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Framework {
    #[serde(rename = "hybrid-1")]
    Hybrid1,
    #[serde(rename = "hybrid-2")]
    Hybrid2,
}

impl std::fmt::Display for Framework {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Framework::Hybrid1 => "hybrid-1",
            Framework::Hybrid2 => "hybrid-2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhysicalModelKind {
    Spmt,
    Ndc,
}

impl std::fmt::Display for PhysicalModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhysicalModelKind::Spmt => "spmt",
            PhysicalModelKind::Ndc => "ndc",
        })
    }
}

/// Ordered input wiring from physical state (plus current and optional SoH)
/// into the FNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub features: Vec<String>,
    pub physical_model: PhysicalModelKind,
    pub framework: Framework,
    pub aging_aware: bool,
}

impl FeatureSpec {
    /// Paper-default wiring: SPMT feeds [soc_bulk, soc_surf, temperature,
    /// current], NDC feeds [v_b, v_s, v_1, temperature, current]; aging-aware
    /// variants append soh last.
    pub fn default_for(
        physical_model: PhysicalModelKind,
        framework: Framework,
        aging_aware: bool,
    ) -> Self {
        let mut features: Vec<String> = match physical_model {
            PhysicalModelKind::Spmt => SPMT_FEATURES.iter().map(|s| s.to_string()).collect(),
            PhysicalModelKind::Ndc => {
                let mut f: Vec<String> = NDC_FEATURES.iter().map(|s| s.to_string()).collect();
                f.push("temperature".into());
                f
            }
        };
        features.push("current".into());
        if aging_aware {
            features.push("soh".into());
        }
        FeatureSpec { features, physical_model, framework, aging_aware }
    }

    pub fn validate(&self) -> Result<()> {
        let allowed: &[&str] = match self.physical_model {
            PhysicalModelKind::Spmt => &["soc_bulk", "soc_surf", "temperature", "current", "soh"],
            PhysicalModelKind::Ndc => &["v_b", "v_s", "v_1", "temperature", "current", "soh"],
        };
        if self.features.is_empty() {
            return Err(Error::Wiring("feature list is empty".into()));
        }
        for f in &self.features {
            if !allowed.contains(&f.as_str()) {
                return Err(Error::Wiring(format!(
                    "feature '{f}' not available for {} models",
                    self.physical_model
                )));
            }
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].contains(f) {
                return Err(Error::Wiring(format!("duplicate feature '{f}'")));
            }
        }
        if !self.features.iter().any(|f| f == "current") {
            return Err(Error::Wiring("feature 'current' is required".into()));
        }
        let has_soh = self.features.iter().any(|f| f == "soh");
        if self.aging_aware && !has_soh {
            return Err(Error::Wiring("aging-aware spec requires feature 'soh'".into()));
        }
        Ok(())
    }
}

/// Parameters of whichever physical model backs the hybrid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhysicsParams {
    Spmt(SpmtParams),
    Ndc(NdcParams),
}

impl PhysicsParams {
    pub fn kind(&self) -> PhysicalModelKind {
        match self {
            PhysicsParams::Spmt(_) => PhysicalModelKind::Spmt,
            PhysicsParams::Ndc(_) => PhysicalModelKind::Ndc,
        }
    }

    pub fn nominal_capacity_ah(&self) -> f64 {
        match self {
            PhysicsParams::Spmt(p) => p.nominal_capacity_ah(),
            PhysicsParams::Ndc(p) => p.nominal_capacity_ah(),
        }
    }

    pub fn c_rate_current(&self, c_rate: f64) -> f64 {
        match self {
            PhysicsParams::Spmt(p) => p.c_rate_current(c_rate),
            PhysicsParams::Ndc(p) => p.c_rate_current(c_rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhysicsParams::Spmt(p) => p.validate(),
            PhysicsParams::Ndc(p) => p.validate(),
        }
    }

    /// Open-loop simulation on the profile's uniform step grid. The SPMT
    /// starts at ambient temperature; the NDC starts fully relaxed.
    pub fn simulate(&self, initial_soc: f64, profile: &CurrentProfile, dt: f64) -> Result<SimTrace> {
        match self {
            PhysicsParams::Spmt(p) => simulate_spmt(p, initial_soc, p.thermal.t_amb, profile, dt),
            PhysicsParams::Ndc(p) => simulate_ndc(p, initial_soc, profile, dt),
        }
    }
}

/// Projects a simulation record (already augmented with any dataset-sourced
/// columns) onto the spec's feature order. `names`/`values` are parallel.
pub fn assemble_features(
    spec: &FeatureSpec,
    names: &[String],
    values: &[f64],
    current: f64,
    soh: Option<f64>,
) -> Result<Vec<f64>> {
    spec.features
        .iter()
        .map(|f| match f.as_str() {
            "current" => Ok(current),
            "soh" => soh.ok_or_else(|| Error::Wiring("missing feature 'soh'".into())),
            name => names
                .iter()
                .position(|n| n == name)
                .map(|i| values[i])
                .ok_or_else(|| Error::Wiring(format!("missing feature '{name}'"))),
        })
        .collect()
}

/// Combines the physical voltage with the FNN output per framework:
/// hybrid-1 adds the predicted residual, hybrid-2 returns the FNN output.
pub fn combine(framework: Framework, v_phy: f64, fnn_out: f64) -> f64 {
    match framework {
        Framework::Hybrid1 => v_phy + fnn_out,
        Framework::Hybrid2 => fnn_out,
    }
}

/// A trained hybrid: feature wiring plus the residual/voltage network.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub spec: FeatureSpec,
    pub fnn: FnnModel,
}

impl HybridModel {
    pub fn new(spec: FeatureSpec, fnn: FnnModel) -> Result<Self> {
        spec.validate()?;
        if fnn.input_dim() != spec.features.len() {
            return Err(Error::Wiring(format!(
                "network expects {} inputs but spec lists {} features",
                fnn.input_dim(),
                spec.features.len()
            )));
        }
        if fnn.output_dim() != 1 {
            return Err(Error::Wiring("network must have a single output".into()));
        }
        Ok(HybridModel { spec, fnn })
    }

    /// Hybrid terminal-voltage prediction for one simulation record.
    pub fn predict_voltage(
        &self,
        names: &[String],
        record: &TraceRecord,
        v_phy: f64,
        soh: Option<f64>,
    ) -> Result<f64> {
        let x = assemble_features(&self.spec, names, &record.features, record.current_a, soh)?;
        let out = self.fnn.forward(&x)?[0];
        Ok(combine(self.spec.framework, v_phy, out))
    }
}

/// Checks that the dataset rows and trace records share a time grid over
/// their common prefix and returns its length. A timestamp mismatch is an
/// alignment error carrying the first offending time.
fn aligned_len(trace: &SimTrace, dataset: &Dataset) -> Result<usize> {
    let n = trace.records().len().min(dataset.rows().len());
    if n == 0 {
        return Err(Error::Data("no overlapping samples between trace and dataset".into()));
    }
    for i in 0..n {
        let (tt, td) = (trace.records()[i].time_s, dataset.rows()[i].time_s);
        if (tt - td).abs() > 1e-9 {
            return Err(Error::Alignment(td));
        }
    }
    Ok(n)
}

/// Per-step feature names/values with dataset-sourced columns spliced in:
/// NDC hybrids take temperature from the dataset since the circuit model
/// has no thermal state.
fn frame_at(
    spec: &FeatureSpec,
    trace: &SimTrace,
    dataset: Option<&Dataset>,
    i: usize,
) -> (Vec<String>, Vec<f64>) {
    let rec = &trace.records()[i];
    let mut names = trace.feature_names().to_vec();
    let mut values = rec.features.clone();
    if spec.features.iter().any(|f| f == "temperature") && !names.iter().any(|n| n == "temperature") {
        if let Some(t) = dataset.and_then(|d| d.rows()[i].temperature_c) {
            names.push("temperature".into());
            values.push(t);
        }
    }
    (names, values)
}

/// Supervised pairs for FNN training: inputs in spec feature order,
/// targets per framework (residual V_true - V_phy for hybrid-1, V_true for
/// hybrid-2).
pub fn build_training_pairs(
    spec: &FeatureSpec,
    trace: &SimTrace,
    dataset: &Dataset,
) -> Result<(Array2<f64>, Array2<f64>)> {
    spec.validate()?;
    let n = aligned_len(trace, dataset)?;
    let d = spec.features.len();
    let mut inputs = Array2::zeros((n, d));
    let mut targets = Array2::zeros((n, 1));
    for i in 0..n {
        let rec = &trace.records()[i];
        let row = &dataset.rows()[i];
        let (names, values) = frame_at(spec, trace, Some(dataset), i);
        let x = assemble_features(spec, &names, &values, rec.current_a, row.soh)?;
        for (j, v) in x.into_iter().enumerate() {
            inputs[[i, j]] = v;
        }
        targets[[i, 0]] = match spec.framework {
            Framework::Hybrid1 => row.voltage_v - rec.voltage_v,
            Framework::Hybrid2 => row.voltage_v,
        };
    }
    Ok((inputs, targets))
}

/// Evaluation result over one profile/dataset pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rmse_phy: f64,
    pub rmse_hybrid: f64,
    /// Relative error reduction in percent.
    pub rer: f64,
    pub times: Vec<f64>,
    pub v_true: Vec<f64>,
    pub v_phy: Vec<f64>,
    pub v_hybrid: Vec<f64>,
    /// true if the physical simulation cut off before the dataset ended.
    pub truncated: bool,
}

impl EvalReport {
    pub fn residuals_phy(&self) -> Vec<f64> {
        self.v_true.iter().zip(&self.v_phy).map(|(t, p)| t - p).collect()
    }

    pub fn residuals_hybrid(&self) -> Vec<f64> {
        self.v_true.iter().zip(&self.v_hybrid).map(|(t, h)| t - h).collect()
    }
}

/// Runs the physical model open-loop on the profile, applies the hybrid
/// correction per step, and reports RMSE/RER against the dataset voltages.
pub fn evaluate(
    hybrid: &HybridModel,
    params: &PhysicsParams,
    initial_soc: f64,
    profile: &CurrentProfile,
    dataset: &Dataset,
    dt: f64,
) -> Result<EvalReport> {
    if params.kind() != hybrid.spec.physical_model {
        return Err(Error::Wiring(format!(
            "artifact expects a {} model but a {} model was supplied",
            hybrid.spec.physical_model,
            params.kind()
        )));
    }
    let trace = params.simulate(initial_soc, profile, dt)?;
    let n = aligned_len(&trace, dataset)?;
    let mut v_true = Vec::with_capacity(n);
    let mut v_phy = Vec::with_capacity(n);
    let mut v_hybrid = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    for i in 0..n {
        let rec = &trace.records()[i];
        let row = &dataset.rows()[i];
        let (names, values) = frame_at(&hybrid.spec, &trace, Some(dataset), i);
        let x = assemble_features(&hybrid.spec, &names, &values, rec.current_a, row.soh)?;
        let out = hybrid.fnn.forward(&x)?[0];
        times.push(rec.time_s);
        v_true.push(row.voltage_v);
        v_phy.push(rec.voltage_v);
        v_hybrid.push(combine(hybrid.spec.framework, rec.voltage_v, out));
    }
    let rmse_phy = rmse(&v_true, &v_phy)?;
    let rmse_hybrid = rmse(&v_true, &v_hybrid)?;
    // a physically perfect baseline leaves nothing to reduce
    let rer = if rmse_phy == 0.0 { 0.0 } else { rer(rmse_phy, rmse_hybrid)? };
    Ok(EvalReport {
        rmse_phy,
        rmse_hybrid,
        rer,
        times,
        v_true,
        v_phy,
        v_hybrid,
        truncated: n < dataset.rows().len(),
    })
}

/// Open-loop hybrid prediction without ground truth. For NDC hybrids whose
/// spec includes temperature, a constant ambient temperature must be given.
pub fn predict_series(
    hybrid: &HybridModel,
    params: &PhysicsParams,
    initial_soc: f64,
    profile: &CurrentProfile,
    dt: f64,
    ambient_temperature_c: Option<f64>,
    soh: Option<f64>,
) -> Result<(SimTrace, Vec<f64>)> {
    if params.kind() != hybrid.spec.physical_model {
        return Err(Error::Wiring("artifact/model kind mismatch".into()));
    }
    if hybrid.spec.aging_aware && soh.is_none() {
        return Err(Error::Wiring("missing feature 'soh'".into()));
    }
    let trace = params.simulate(initial_soc, profile, dt)?;
    let mut v_hybrid = Vec::with_capacity(trace.records().len());
    for rec in trace.records() {
        let mut names = trace.feature_names().to_vec();
        let mut values = rec.features.clone();
        if hybrid.spec.features.iter().any(|f| f == "temperature")
            && !names.iter().any(|n| n == "temperature")
        {
            let t = ambient_temperature_c
                .ok_or_else(|| Error::Wiring("missing feature 'temperature'".into()))?;
            names.push("temperature".into());
            values.push(t);
        }
        let x = assemble_features(&hybrid.spec, &names, &values, rec.current_a, soh)?;
        let out = hybrid.fnn.forward(&x)?[0];
        v_hybrid.push(combine(hybrid.spec.framework, rec.voltage_v, out));
    }
    Ok((trace, v_hybrid))
}

/// Training metadata stored with the artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub config: TrainConfig,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
}

/// On-disk model artifact: the FNN payload plus feature wiring and training
/// metadata, serialized as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    #[serde(flatten)]
    pub fnn: FnnModel,
    pub feature_names: Vec<String>,
    pub framework_tag: Framework,
    pub aging_aware: bool,
    pub physical_model: PhysicalModelKind,
    pub training: TrainingMeta,
}

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

impl ModelArtifact {
    pub fn from_model(model: &HybridModel, training: TrainingMeta) -> Self {
        ModelArtifact {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            fnn: model.fnn.clone(),
            feature_names: model.spec.features.clone(),
            framework_tag: model.spec.framework,
            aging_aware: model.spec.aging_aware,
            physical_model: model.spec.physical_model,
            training,
        }
    }

    pub fn into_model(self) -> Result<HybridModel> {
        if self.schema_version != ARTIFACT_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported artifact schema version {}",
                self.schema_version
            )));
        }
        let spec = FeatureSpec {
            features: self.feature_names,
            physical_model: self.physical_model,
            framework: self.framework_tag,
            aging_aware: self.aging_aware,
        };
        HybridModel::new(spec, self.fnn)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Data(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{DatasetMeta, DatasetRow};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spmt_spec(framework: Framework) -> FeatureSpec {
        FeatureSpec::default_for(PhysicalModelKind::Spmt, framework, false)
    }

    fn zero_fnn(inputs: usize) -> FnnModel {
        let mut f = FnnModel::new(&[inputs, 4, 1], 0).unwrap();
        for w in &mut f.weights {
            w.fill(0.0);
        }
        f
    }

    #[test]
    fn default_feature_orders() {
        let s = spmt_spec(Framework::Hybrid1);
        assert_eq!(s.features, ["soc_bulk", "soc_surf", "temperature", "current"]);
        let n = FeatureSpec::default_for(PhysicalModelKind::Ndc, Framework::Hybrid1, true);
        assert_eq!(n.features, ["v_b", "v_s", "v_1", "temperature", "current", "soh"]);
        s.validate().unwrap();
        n.validate().unwrap();
    }

    #[test]
    fn spec_validation_rejections() {
        let mut s = spmt_spec(Framework::Hybrid1);
        s.features = vec!["soc_bulk".into()];
        assert!(s.validate().is_err(), "current required");
        let mut s = spmt_spec(Framework::Hybrid1);
        s.features.push("v_b".into());
        assert!(s.validate().is_err(), "v_b not an spmt feature");
        let mut s = spmt_spec(Framework::Hybrid1);
        s.aging_aware = true;
        assert!(s.validate().is_err(), "aging-aware needs soh");
        let mut s = spmt_spec(Framework::Hybrid1);
        s.features.push("current".into());
        assert!(s.validate().is_err(), "duplicate feature");
    }

    #[test]
    fn assemble_ordered_projection() {
        let spec = spmt_spec(Framework::Hybrid1);
        let names: Vec<String> =
            ["soc_bulk", "soc_surf", "temperature"].iter().map(|s| s.to_string()).collect();
        let x = assemble_features(&spec, &names, &[0.8, 0.75, 298.15], 5.0, None).unwrap();
        assert_eq!(x, vec![0.8, 0.75, 298.15, 5.0]);
    }

    #[test]
    fn assemble_appends_soh_last() {
        let mut spec = spmt_spec(Framework::Hybrid1);
        spec.aging_aware = true;
        spec.features.push("soh".into());
        let names: Vec<String> =
            ["soc_bulk", "soc_surf", "temperature"].iter().map(|s| s.to_string()).collect();
        let x = assemble_features(&spec, &names, &[0.8, 0.75, 298.15], 5.0, Some(0.81)).unwrap();
        assert_eq!(*x.last().unwrap(), 0.81);
        assert_eq!(x.len(), 5);
    }

    #[test]
    fn assemble_ndc_projection() {
        let spec = FeatureSpec::default_for(PhysicalModelKind::Ndc, Framework::Hybrid1, false);
        let names: Vec<String> =
            ["v_b", "v_s", "v_1", "temperature"].iter().map(|s| s.to_string()).collect();
        let x = assemble_features(&spec, &names, &[0.5, 0.48, 0.02, 300.0], 10.0, None).unwrap();
        assert_eq!(x, vec![0.5, 0.48, 0.02, 300.0, 10.0]);
    }

    #[test]
    fn assemble_missing_feature_named() {
        let spec = spmt_spec(Framework::Hybrid1);
        let names = vec!["soc_bulk".to_string()];
        match assemble_features(&spec, &names, &[0.8], 5.0, None) {
            Err(Error::Wiring(msg)) => assert!(msg.contains("soc_surf"), "{msg}"),
            other => panic!("expected wiring error, got {other:?}"),
        }
    }

    #[test]
    fn combine_frameworks() {
        assert_eq!(combine(Framework::Hybrid1, 3.8, 0.1), 3.9);
        assert_eq!(combine(Framework::Hybrid2, 3.8, 3.95), 3.95);
        // zero-output network: hybrid-1 is the identity, hybrid-2 is 0 V
        assert_eq!(combine(Framework::Hybrid1, 3.8, 0.0), 3.8);
        assert_eq!(combine(Framework::Hybrid2, 3.8, 0.0), 0.0);
    }

    #[test]
    fn framework_equivalence_property() {
        // hybrid-1 with g equals hybrid-2 with the stub g' = v_phy + g
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let v_phy = rng.gen_range(2.8..4.2);
            let g = rng.gen_range(-0.5..0.5);
            let h1 = combine(Framework::Hybrid1, v_phy, g);
            let h2 = combine(Framework::Hybrid2, v_phy, v_phy + g);
            assert!((h1 - h2).abs() <= 1e-12);
        }
    }

    #[test]
    fn hybrid1_affine_unit_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v_phy = rng.gen_range(2.8..4.2);
            let g = rng.gen_range(-0.5..0.5);
            let delta = rng.gen_range(-0.1..0.1);
            let a = combine(Framework::Hybrid1, v_phy, g);
            let b = combine(Framework::Hybrid1, v_phy, g + delta);
            assert!((b - a - delta).abs() <= 1e-12);
        }
    }

    fn spmt_trace_and_dataset() -> (PhysicsParams, SimTrace, Dataset) {
        let p = SpmtParams::synthetic_cell();
        let i = p.c_rate_current(1.0);
        let profile = CurrentProfile::constant(i, 60.0).unwrap();
        let params = PhysicsParams::Spmt(p);
        let trace = params.simulate(1.0, &profile, 1.0).unwrap();
        let rows: Vec<DatasetRow> = trace
            .records()
            .iter()
            .map(|r| DatasetRow {
                time_s: r.time_s,
                current_a: r.current_a,
                voltage_v: r.voltage_v,
                temperature_c: None,
                soh: None,
            })
            .collect();
        let ds = Dataset::new(rows, DatasetMeta::default()).unwrap();
        (params, trace, ds)
    }

    #[test]
    fn pairs_zero_residual_for_perfect_physics() {
        let (_, trace, ds) = spmt_trace_and_dataset();
        let spec = spmt_spec(Framework::Hybrid1);
        let (x, y) = build_training_pairs(&spec, &trace, &ds).unwrap();
        assert_eq!(x.nrows(), trace.records().len());
        assert_eq!(x.ncols(), 4);
        assert!(y.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn pairs_targets_per_framework() {
        let (_, trace, mut_ds) = spmt_trace_and_dataset();
        // shift truth up 0.1 V
        let rows: Vec<DatasetRow> = mut_ds
            .rows()
            .iter()
            .map(|r| DatasetRow { voltage_v: r.voltage_v + 0.1, ..*r })
            .collect();
        let ds = Dataset::new(rows, DatasetMeta::default()).unwrap();
        let (_, y1) = build_training_pairs(&spmt_spec(Framework::Hybrid1), &trace, &ds).unwrap();
        assert!(y1.iter().all(|v| (v - 0.1).abs() < 1e-12));
        let (_, y2) = build_training_pairs(&spmt_spec(Framework::Hybrid2), &trace, &ds).unwrap();
        for (t, row) in y2.iter().zip(ds.rows()) {
            assert_eq!(*t, row.voltage_v);
        }
    }

    #[test]
    fn pairs_alignment_error_lists_timestamp() {
        let (_, trace, ds) = spmt_trace_and_dataset();
        let rows: Vec<DatasetRow> = ds
            .rows()
            .iter()
            .map(|r| DatasetRow { time_s: r.time_s + 0.5, ..*r })
            .collect();
        let shifted = Dataset::new(rows, DatasetMeta::default()).unwrap();
        match build_training_pairs(&spmt_spec(Framework::Hybrid1), &trace, &shifted) {
            Err(Error::Alignment(t)) => assert_relative_eq!(t, 0.5),
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_zero_weight_hybrid1_is_identity() {
        let (params, _, ds) = spmt_trace_and_dataset();
        let hybrid =
            HybridModel::new(spmt_spec(Framework::Hybrid1), zero_fnn(4)).unwrap();
        let profile = ds.profile().unwrap();
        let rep = evaluate(&hybrid, &params, 1.0, &profile, &ds, 1.0).unwrap();
        // truth here IS the physics, so both errors vanish identically;
        // check the hybrid column equals the physical column instead
        assert_eq!(rep.v_phy, rep.v_hybrid);
        assert_relative_eq!(rep.rmse_hybrid, rep.rmse_phy);
    }

    #[test]
    fn evaluate_zero_weight_rer_zero_on_imperfect_truth() {
        let (params, _, ds) = spmt_trace_and_dataset();
        let rows: Vec<DatasetRow> = ds
            .rows()
            .iter()
            .map(|r| DatasetRow { voltage_v: r.voltage_v - 0.05, ..*r })
            .collect();
        let ds = Dataset::new(rows, DatasetMeta::default()).unwrap();
        let hybrid = HybridModel::new(spmt_spec(Framework::Hybrid1), zero_fnn(4)).unwrap();
        let profile = ds.profile().unwrap();
        let rep = evaluate(&hybrid, &params, 1.0, &profile, &ds, 1.0).unwrap();
        assert_relative_eq!(rep.rmse_phy, 0.05, max_relative = 1e-9);
        assert_relative_eq!(rep.rer, 0.0);
    }

    #[test]
    fn evaluate_open_loop_ignores_dataset_voltages() {
        // scrambling truth voltages must not change the physical trace
        let (params, _, ds) = spmt_trace_and_dataset();
        let hybrid = HybridModel::new(spmt_spec(Framework::Hybrid1), zero_fnn(4)).unwrap();
        let profile = ds.profile().unwrap();
        let rep1 = evaluate(&hybrid, &params, 1.0, &profile, &ds, 1.0).unwrap();
        let rows: Vec<DatasetRow> = ds
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| DatasetRow { voltage_v: 3.3 + 0.01 * (i % 7) as f64, ..*r })
            .collect();
        let scrambled = Dataset::new(rows, DatasetMeta::default()).unwrap();
        let rep2 = evaluate(&hybrid, &params, 1.0, &profile, &scrambled, 1.0).unwrap();
        assert_eq!(rep1.v_phy, rep2.v_phy);
    }

    #[test]
    fn evaluate_rejects_model_kind_mismatch() {
        let (_, _, ds) = spmt_trace_and_dataset();
        let hybrid = HybridModel::new(spmt_spec(Framework::Hybrid1), zero_fnn(4)).unwrap();
        let ndc = PhysicsParams::Ndc(NdcParams::synthetic_cell());
        let profile = ds.profile().unwrap();
        assert!(matches!(
            evaluate(&hybrid, &ndc, 1.0, &profile, &ds, 1.0),
            Err(Error::Wiring(_))
        ));
    }

    #[test]
    fn ndc_temperature_comes_from_dataset() {
        let p = NdcParams::synthetic_cell();
        let i = p.c_rate_current(1.0);
        let profile = CurrentProfile::constant(i, 30.0).unwrap();
        let params = PhysicsParams::Ndc(p);
        let trace = params.simulate(0.9, &profile, 1.0).unwrap();
        let rows: Vec<DatasetRow> = trace
            .records()
            .iter()
            .map(|r| DatasetRow {
                time_s: r.time_s,
                current_a: r.current_a,
                voltage_v: r.voltage_v,
                temperature_c: Some(25.0 + 0.01 * r.time_s),
                soh: None,
            })
            .collect();
        let ds = Dataset::new(rows, DatasetMeta::default()).unwrap();
        let spec = FeatureSpec::default_for(PhysicalModelKind::Ndc, Framework::Hybrid1, false);
        let (x, _) = build_training_pairs(&spec, &trace, &ds).unwrap();
        // temperature column (index 3) equals the dataset series
        for (i, row) in ds.rows().iter().enumerate() {
            assert_eq!(x[[i, 3]], row.temperature_c.unwrap());
        }
    }

    #[test]
    fn predict_requires_soh_for_aging_artifacts() {
        let spec = FeatureSpec::default_for(PhysicalModelKind::Ndc, Framework::Hybrid1, true);
        let hybrid = HybridModel::new(spec, zero_fnn(6)).unwrap();
        let params = PhysicsParams::Ndc(NdcParams::synthetic_cell());
        let profile = CurrentProfile::constant(1.0, 10.0).unwrap();
        match predict_series(&hybrid, &params, 0.9, &profile, 1.0, Some(25.0), None) {
            Err(Error::Wiring(msg)) => assert!(msg.contains("soh")),
            other => panic!("expected wiring error, got {other:?}"),
        }
    }

    #[test]
    fn artifact_round_trip_predictions_identical() {
        let spec = spmt_spec(Framework::Hybrid1);
        let fnn = FnnModel::new(&[4, 8, 1], 21).unwrap();
        let hybrid = HybridModel::new(spec, fnn).unwrap();
        let meta = TrainingMeta {
            seed: 21,
            config: TrainConfig::default(),
            final_train_loss: Some(1e-6),
            final_val_loss: None,
        };
        let art = ModelArtifact::from_model(&hybrid, meta);
        let json = art.to_json().unwrap();
        let back = ModelArtifact::from_json(&json).unwrap().into_model().unwrap();
        assert_eq!(hybrid, back);
        let names: Vec<String> =
            ["soc_bulk", "soc_surf", "temperature"].iter().map(|s| s.to_string()).collect();
        let rec = TraceRecord {
            time_s: 0.0,
            current_a: 2.5,
            voltage_v: 3.9,
            features: vec![0.7, 0.65, 299.0],
        };
        let a = hybrid.predict_voltage(&names, &rec, 3.9, None).unwrap();
        let b = back.predict_voltage(&names, &rec, 3.9, None).unwrap();
        assert_eq!(a, b);
    }
}
