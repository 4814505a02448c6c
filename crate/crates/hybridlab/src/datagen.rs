//! Ground-truth synthesis: a perturbed-physics "truth" model standing in
//! for a higher-fidelity benchmark, drive-cycle ingestion, and aging-series
//! generation. The truth model is the chosen physical model with modified
//! parameters, an added SoC-dependent ohmic term, an optional lumped
//! thermal attachment for the circuit model, and Gaussian voltage noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::core::{CurrentProfile, Dataset, DatasetMeta, DatasetRow};
use crate::error::{Error, Result};
use crate::hybrid::{PhysicalModelKind, PhysicsParams};
use crate::ndc::{ndc_soc, ndc_voltage, step_ndc, NdcState};
use crate::spmt::GAS_CONSTANT;

/// Lumped thermal ODE attached to the NDC truth model, with an Arrhenius
/// temperature multiplier on the ohmic resistance (resistance drops as the
/// cell heats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NdcThermalAttachment {
    /// Lumped heat capacity [J/K].
    pub heat_capacity: f64,
    /// Convective coefficient [W/K].
    pub h_cell: f64,
    /// Ambient temperature [deg C].
    pub t_amb_c: f64,
    /// Activation energy of the resistance multiplier [J/mol].
    pub e_act: f64,
}

impl Default for NdcThermalAttachment {
    fn default() -> Self {
        NdcThermalAttachment { heat_capacity: 80.0, h_cell: 0.5, t_amb_c: 25.0, e_act: 15000.0 }
    }
}

/// SoH-to-parameter map: capacity scales with SoH, resistances grow as
/// 1 + resistance_growth * (1 - SoH).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgingMap {
    pub resistance_growth: f64,
    /// Lower edge of the supported SoH domain.
    pub soh_min: f64,
}

impl Default for AgingMap {
    fn default() -> Self {
        AgingMap { resistance_growth: 3.0, soh_min: 0.81 }
    }
}

impl AgingMap {
    pub fn resistance_multiplier(&self, soh: f64) -> f64 {
        1.0 + self.resistance_growth * (1.0 - soh)
    }
}

/// Configuration of the synthetic ground-truth model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthSpec {
    pub base: PhysicalModelKind,
    /// SPMT solid diffusivity multiplier.
    pub d_s_mult: f64,
    /// SPMT film resistance multiplier.
    pub r_f_mult: f64,
    /// NDC R0 coefficient multiplier.
    pub gamma_mult: f64,
    /// NDC R1 multiplier.
    pub r1_mult: f64,
    /// Added SoC-dependent series resistance
    /// g1 + g2 exp(-g3 soc) + g4 exp(-g5 (1 - soc)) [ohm].
    pub extra_resistance: [f64; 5],
    /// Thermal attachment; only used for NDC-based truth.
    pub thermal: Option<NdcThermalAttachment>,
    /// Zero-mean Gaussian voltage noise standard deviation [V].
    pub noise_std_v: f64,
    pub aging: AgingMap,
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec::default_spmt()
    }
}

impl TruthSpec {
    /// Identity truth: the plain physical model plus nothing.
    pub fn identity(base: PhysicalModelKind) -> Self {
        TruthSpec {
            base,
            d_s_mult: 1.0,
            r_f_mult: 1.0,
            gamma_mult: 1.0,
            r1_mult: 1.0,
            extra_resistance: [0.0; 5],
            thermal: None,
            noise_std_v: 0.0,
            aging: AgingMap::default(),
        }
    }

    /// Default SPMT-based truth: slower diffusion, more film resistance,
    /// and an added SoC-dependent ohmic term.
    pub fn default_spmt() -> Self {
        TruthSpec {
            d_s_mult: 0.7,
            r_f_mult: 1.5,
            extra_resistance: [0.003, 0.006, 10.0, 0.003, 8.0],
            noise_std_v: 1e-3,
            ..TruthSpec::identity(PhysicalModelKind::Spmt)
        }
    }

    /// Default NDC-based truth: thermal attachment with a temperature-
    /// dependent resistance, perturbed R0/R1, and an added ohmic term.
    pub fn default_ndc() -> Self {
        TruthSpec {
            gamma_mult: 1.4,
            r1_mult: 1.5,
            extra_resistance: [0.002, 0.004, 10.0, 0.002, 8.0],
            thermal: Some(NdcThermalAttachment::default()),
            noise_std_v: 1e-3,
            ..TruthSpec::identity(PhysicalModelKind::Ndc)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, what) in [
            (self.d_s_mult, "d_s_mult"),
            (self.r_f_mult, "r_f_mult"),
            (self.gamma_mult, "gamma_mult"),
            (self.r1_mult, "r1_mult"),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("truth {what} must be > 0")));
            }
        }
        if !(self.noise_std_v >= 0.0) {
            return Err(Error::Config("noise std must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.aging.soh_min) {
            return Err(Error::Config("aging soh_min must be in (0, 1)".into()));
        }
        if self.aging.resistance_growth < 0.0 {
            return Err(Error::Config("aging resistance_growth must be >= 0".into()));
        }
        Ok(())
    }

    pub fn extra_resistance_at(&self, soc: f64) -> f64 {
        let [g1, g2, g3, g4, g5] = self.extra_resistance;
        g1 + g2 * (-g3 * soc).exp() + g4 * (-g5 * (1.0 - soc)).exp()
    }

    /// Applies the perturbation multipliers to the base parameters.
    pub fn perturb(&self, base: &PhysicsParams) -> Result<PhysicsParams> {
        self.validate()?;
        if base.kind() != self.base {
            return Err(Error::Config(format!(
                "truth base is {} but {} parameters were given",
                self.base,
                base.kind()
            )));
        }
        let mut out = base.clone();
        match &mut out {
            PhysicsParams::Spmt(p) => {
                p.pos.d_s_ref *= self.d_s_mult;
                p.neg.d_s_ref *= self.d_s_mult;
                p.pos.r_f *= self.r_f_mult;
                p.neg.r_f *= self.r_f_mult;
            }
            PhysicsParams::Ndc(p) => {
                for g in &mut p.r0_coeffs {
                    *g *= self.gamma_mult;
                }
                p.r_1 *= self.r1_mult;
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Applies the aging map on top of the perturbations.
    pub fn perturb_aged(&self, base: &PhysicsParams, soh: f64) -> Result<PhysicsParams> {
        if !(soh >= self.aging.soh_min && soh <= 1.0) {
            return Err(Error::Config(format!(
                "soh {soh} outside aging domain [{}, 1.0]",
                self.aging.soh_min
            )));
        }
        let mut out = self.perturb(base)?;
        apply_aging_to_params(&mut out, soh, self.aging.resistance_multiplier(soh));
        Ok(out)
    }
}

/// Scales capacity by soh and resistances by the growth multiplier. Also
/// used to age the plain physical model for aging-aware evaluation.
pub fn apply_aging_to_params(params: &mut PhysicsParams, soh: f64, r_mult: f64) {
    match params {
        PhysicsParams::Spmt(p) => {
            p.area *= soh;
            p.pos.r_f *= r_mult;
            p.neg.r_f *= r_mult;
        }
        PhysicsParams::Ndc(p) => {
            p.c_b *= soh;
            p.c_s *= soh;
            for g in &mut p.r0_coeffs {
                *g *= r_mult;
            }
            p.r_1 *= r_mult;
        }
    }
}

/// A named normalized current shape (unit max magnitude).
#[derive(Debug, Clone, PartialEq)]
pub struct DriveCycle {
    pub name: String,
    pub shape: CurrentProfile,
}

impl DriveCycle {
    /// Scales the unit shape so its peak magnitude hits `target_amps`.
    pub fn scaled(&self, target_amps: f64) -> Result<CurrentProfile> {
        self.shape.scale_to_max(target_amps)
    }
}

/// Loads a time_s,current_a CSV and normalizes it to unit max magnitude.
pub fn load_drive_cycle(path: &Path) -> Result<DriveCycle> {
    let raw = CurrentProfile::from_csv(path)?;
    let shape = raw.scale_to_max(1.0)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cycle".into());
    Ok(DriveCycle { name, shape })
}

/// Deterministic synthetic drive cycle: piecewise-constant 5 s segments of
/// mostly-discharge current with occasional regen dips, unit max magnitude.
pub fn synthetic_drive_cycle(name: &str, duration_s: f64, seed: u64) -> Result<DriveCycle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seg = 5.0;
    let n = (duration_s / seg).ceil() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..n {
        let level: f64 = if rng.gen::<f64>() < 0.15 {
            rng.gen_range(-0.4..0.0) // regen / rest dip
        } else {
            rng.gen_range(0.1..1.0)
        };
        samples.push((k as f64 * seg, level));
    }
    samples.push((duration_s, 0.0));
    let shape = CurrentProfile::new(samples)?.scale_to_max(1.0)?;
    Ok(DriveCycle { name: name.to_string(), shape })
}

/// Standard-normal draw via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Splitmix-style derivation of independent per-job seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9e3779b97f4a7c15)).wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn truth_rows_spmt(
    spec: &TruthSpec,
    params: &PhysicsParams,
    profile: &CurrentProfile,
    initial_soc: f64,
    dt: f64,
) -> Result<Vec<DatasetRow>> {
    let trace = params.simulate(initial_soc, profile, dt)?;
    let soc_idx = trace.feature_index("soc_bulk").expect("spmt trace has soc_bulk");
    let t_idx = trace.feature_index("temperature").expect("spmt trace has temperature");
    Ok(trace
        .records()
        .iter()
        .map(|r| {
            let soc = r.features[soc_idx];
            let v = r.voltage_v - spec.extra_resistance_at(soc) * r.current_a;
            DatasetRow {
                time_s: r.time_s,
                current_a: r.current_a,
                voltage_v: v,
                temperature_c: Some(r.features[t_idx] - 273.15),
                soh: None,
            }
        })
        .collect())
}

fn truth_rows_ndc(
    spec: &TruthSpec,
    params: &PhysicsParams,
    profile: &CurrentProfile,
    initial_soc: f64,
    dt: f64,
) -> Result<Vec<DatasetRow>> {
    let p = match params {
        PhysicsParams::Ndc(p) => p,
        _ => unreachable!("checked by perturb"),
    };
    p.validate()?;
    let mut state = NdcState::from_soc(initial_soc)?;
    let thermal = spec.thermal;
    let t_ref_k = thermal.map_or(298.15, |th| th.t_amb_c + 273.15);
    let mut temp_k = t_ref_k;
    let n_steps = (profile.end_time() / dt + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let t_now = k as f64 * dt;
        let current = profile.current_at(t_now.min(profile.end_time()))?;
        let soc = ndc_soc(p, &state);
        // negative activation: resistance falls as the cell heats
        let r_mult = (-spec.thermal.map_or(0.0, |th| th.e_act) / GAS_CONSTANT
            * (1.0 / t_ref_k - 1.0 / temp_k))
            .exp();
        let r_extra = spec.extra_resistance_at(soc);
        let v_base = ndc_voltage(p, &state, current)?;
        let r0 = p.r0_of_soc(soc);
        // swap the plain R0 drop for the temperature-scaled one, then add
        // the extra SoC-dependent term
        let v = v_base + r0 * current - r0 * r_mult * current - r_extra * current;
        if !v.is_finite() {
            return Err(Error::NumericalFailure { time: t_now, what: "non-finite truth voltage".into() });
        }
        rows.push(DatasetRow {
            time_s: t_now,
            current_a: current,
            voltage_v: v,
            temperature_c: Some(temp_k - 273.15),
            soh: None,
        });
        if v < p.v_min || v > p.v_max || k == n_steps {
            break;
        }
        if let Some(th) = thermal {
            let q_gen = current * current * (r0 * r_mult + r_extra + p.r_1);
            let q_conv = -th.h_cell * (temp_k - (th.t_amb_c + 273.15));
            temp_k += dt * (q_gen + q_conv) / th.heat_capacity;
        }
        state = step_ndc(p, &state, current, dt)?;
    }
    Ok(rows)
}

/// Simulates the perturbed truth model over the profile and emits a Dataset
/// with noisy voltages. Deterministic per seed.
pub fn generate_truth(
    spec: &TruthSpec,
    base: &PhysicsParams,
    profile: &CurrentProfile,
    initial_soc: f64,
    dt: f64,
    seed: u64,
    label: &str,
) -> Result<Dataset> {
    let perturbed = spec.perturb(base)?;
    generate_with_params(spec, &perturbed, profile, initial_soc, dt, seed, label, None)
}

fn generate_with_params(
    spec: &TruthSpec,
    perturbed: &PhysicsParams,
    profile: &CurrentProfile,
    initial_soc: f64,
    dt: f64,
    seed: u64,
    label: &str,
    soh: Option<f64>,
) -> Result<Dataset> {
    let mut rows = match spec.base {
        PhysicalModelKind::Spmt => truth_rows_spmt(spec, perturbed, profile, initial_soc, dt)?,
        PhysicalModelKind::Ndc => truth_rows_ndc(spec, perturbed, profile, initial_soc, dt)?,
    };
    if spec.noise_std_v > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in &mut rows {
            r.voltage_v += spec.noise_std_v * gaussian(&mut rng);
        }
    }
    for r in &mut rows {
        r.soh = soh;
    }
    let meta = DatasetMeta {
        cell_capacity_ah: perturbed.nominal_capacity_ah(),
        label: label.to_string(),
    };
    Dataset::new(rows, meta)
}

/// One dataset per (soh, profile), aging applied to the truth parameters
/// and the soh column filled. Each file gets an independent derived seed.
pub fn generate_aging_series(
    spec: &TruthSpec,
    base: &PhysicsParams,
    soh_grid: &[f64],
    profiles: &[(String, CurrentProfile)],
    initial_soc: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<Dataset>> {
    let mut out = Vec::with_capacity(soh_grid.len() * profiles.len());
    let mut job = 0u64;
    for &soh in soh_grid {
        let aged = spec.perturb_aged(base, soh)?;
        for (name, profile) in profiles {
            let label = format!("{name}_soh{:03}", (soh * 100.0).round() as u32);
            let ds = generate_with_params(
                spec,
                &aged,
                profile,
                initial_soc,
                dt,
                derive_seed(seed, job),
                &label,
                Some(soh),
            )?;
            out.push(ds);
            job += 1;
        }
    }
    Ok(out)
}
