//! Run configuration: one JSON document with model, truth, training,
//! experiment and output sections, plus narrow CLI overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::core::CurrentProfile;
use crate::datagen::{load_drive_cycle, synthetic_drive_cycle, TruthSpec};
use crate::error::{Error, Result};
use crate::fnn::TrainConfig;
use crate::hybrid::{FeatureSpec, Framework, PhysicalModelKind, PhysicsParams};
use crate::ndc::NdcParams;
use crate::spmt::SpmtParams;

/// Model section: which physical model to run, with optional explicit
/// parameters (the bundled synthetic cell otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub kind: PhysicalModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spmt: Option<SpmtParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndc: Option<NdcParams>,
}

impl ModelSection {
    pub fn params(&self) -> Result<PhysicsParams> {
        let p = match self.kind {
            PhysicalModelKind::Spmt => {
                PhysicsParams::Spmt(self.spmt.clone().unwrap_or_else(SpmtParams::synthetic_cell))
            }
            PhysicalModelKind::Ndc => {
                PhysicsParams::Ndc(self.ndc.clone().unwrap_or_else(NdcParams::synthetic_cell))
            }
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    pub framework: Framework,
    pub aging_aware: bool,
    /// Explicit feature order; model defaults when omitted.
    pub features: Option<Vec<String>>,
    pub hidden_layers: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            framework: Framework::Hybrid1,
            aging_aware: false,
            features: None,
            hidden_layers: vec![32, 32],
            train: TrainConfig::default(),
        }
    }
}

impl TrainingSection {
    pub fn feature_spec(&self, kind: PhysicalModelKind) -> Result<FeatureSpec> {
        let mut spec = FeatureSpec::default_for(kind, self.framework, self.aging_aware);
        if let Some(f) = &self.features {
            spec.features = f.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
        })
    }
}

/// Where a profile's current shape comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    /// Constant discharge at the given C-rate; duration defaults to 75% of
    /// the time to sweep the full capacity.
    ConstantCRate { c_rate: f64, duration_s: Option<f64> },
    /// Drive-cycle CSV (time_s,current_a), normalized then scaled so the
    /// peak magnitude hits the given C-rate.
    CycleCsv { path: String, peak_c_rate: f64 },
    /// Bundled synthetic cycle generator, seeded.
    SyntheticCycle { seed: u64, duration_s: f64, peak_c_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    pub role: Role,
    #[serde(flatten)]
    pub source: ProfileSource,
}

impl ProfileSpec {
    /// Materializes the current profile in amps for the given cell.
    pub fn build(&self, params: &PhysicsParams, base_dir: &Path) -> Result<CurrentProfile> {
        match &self.source {
            ProfileSource::ConstantCRate { c_rate, duration_s } => {
                if !(*c_rate > 0.0) {
                    return Err(Error::Config(format!(
                        "profile '{}': c_rate must be > 0",
                        self.name
                    )));
                }
                let duration = duration_s.unwrap_or(0.75 * 3600.0 / c_rate);
                CurrentProfile::constant(params.c_rate_current(*c_rate), duration)
            }
            ProfileSource::CycleCsv { path, peak_c_rate } => {
                let full = base_dir.join(path);
                let cycle = load_drive_cycle(&full)?;
                cycle.scaled(params.c_rate_current(*peak_c_rate))
            }
            ProfileSource::SyntheticCycle { seed, duration_s, peak_c_rate } => {
                let cycle = synthetic_drive_cycle(&self.name, *duration_s, *seed)?;
                cycle.scaled(params.c_rate_current(*peak_c_rate))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub dt_s: f64,
    pub initial_soc: f64,
    pub seed: u64,
    pub profiles: Vec<ProfileSpec>,
    /// Non-empty enables aging-series generation.
    pub soh_grid: Vec<f64>,
    /// Optional voltage-window overrides applied to the model parameters.
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            dt_s: 1.0,
            initial_soc: 1.0,
            seed: 42,
            profiles: Vec::new(),
            soh_grid: Vec::new(),
            v_min: None,
            v_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: String,
    /// Emit SVG plots alongside reports.
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), plots: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub truth: Option<TruthSpec>,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory the config file was loaded from; relative paths resolve
    /// against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        if !(self.experiment.dt_s > 0.0) {
            return Err(Error::Config("experiment dt_s must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.experiment.initial_soc) {
            return Err(Error::Config("experiment initial_soc must be in [0, 1]".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.experiment.profiles {
            if !seen.insert(p.name.clone()) {
                return Err(Error::Config(format!("duplicate profile name '{}'", p.name)));
            }
            if let ProfileSource::CycleCsv { path, .. } = &p.source {
                let full = self.base_dir.join(path);
                if !full.exists() {
                    return Err(Error::Config(format!(
                        "profile '{}': cycle file {} does not exist",
                        p.name,
                        full.display()
                    )));
                }
            }
        }
        if let Some(truth) = &self.truth {
            truth.validate()?;
            if truth.base != self.model.kind {
                return Err(Error::Config(format!(
                    "truth base {} does not match model kind {}",
                    truth.base, self.model.kind
                )));
            }
            for &soh in &self.experiment.soh_grid {
                if !(soh >= truth.aging.soh_min && soh <= 1.0) {
                    return Err(Error::Config(format!(
                        "soh_grid value {soh} outside aging domain [{}, 1.0]",
                        truth.aging.soh_min
                    )));
                }
            }
        }
        self.training.feature_spec(self.model.kind)?;
        if self.training.aging_aware && self.experiment.soh_grid.is_empty() {
            return Err(Error::Config(
                "aging-aware training requires a non-empty soh_grid".into(),
            ));
        }
        if self.training.hidden_layers.is_empty() || self.training.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden_layers must be non-empty and nonzero".into()));
        }
        drop(params);
        Ok(())
    }

    /// Model parameters with any experiment-level voltage-window override.
    pub fn params(&self) -> Result<PhysicsParams> {
        let mut p = self.model.params()?;
        match &mut p {
            PhysicsParams::Spmt(m) => {
                if let Some(v) = self.experiment.v_min {
                    m.v_min = v;
                }
                if let Some(v) = self.experiment.v_max {
                    m.v_max = v;
                }
            }
            PhysicsParams::Ndc(m) => {
                if let Some(v) = self.experiment.v_min {
                    m.v_min = v;
                }
                if let Some(v) = self.experiment.v_max {
                    m.v_max = v;
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    /// Truth spec, defaulting to the model-matched perturbed truth.
    pub fn truth_spec(&self) -> TruthSpec {
        self.truth.clone().unwrap_or(match self.model.kind {
            PhysicalModelKind::Spmt => TruthSpec::default_spmt(),
            PhysicalModelKind::Ndc => TruthSpec::default_ndc(),
        })
    }

    /// FNN layer sizes for the configured feature spec.
    pub fn layer_sizes(&self) -> Result<Vec<usize>> {
        let spec = self.training.feature_spec(self.model.kind)?;
        let mut sizes = vec![spec.features.len()];
        sizes.extend_from_slice(&self.training.hidden_layers);
        sizes.push(1);
        Ok(sizes)
    }
}
