//! Single particle model with thermal dynamics (SPMT).
//!
//! Each electrode is one spherical particle with Fick diffusion of lithium
//! in the solid phase, Butler–Volmer kinetics at the surface, Arrhenius
//! temperature coupling of diffusion and kinetics, and a lumped thermal
//! ODE. Outputs terminal voltage plus the state features SoC_bulk,
//! SoC_surf and T.
//!
//! Positive current = discharge (lithium leaves the negative particle).

use serde::{Deserialize, Serialize};

use crate::core::{CurrentProfile, Cutoff, SimTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::interp::Table;

pub const FARADAY: f64 = 96485.33212;
pub const GAS_CONSTANT: f64 = 8.314462618;

pub const SPMT_FEATURES: [&str; 3] = ["soc_bulk", "soc_surf", "temperature"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Electrode {
    Positive,
    Negative,
}

impl Electrode {
    pub fn name(self) -> &'static str {
        match self {
            Electrode::Positive => "positive",
            Electrode::Negative => "negative",
        }
    }
}

/// Per-electrode parameters. Charge-transfer coefficients are fixed at
/// alpha_a = alpha_c = 0.5, which gives the asinh closed form for the
/// overpotential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeParams {
    /// Solid diffusion coefficient at `t_ref` [m^2/s].
    pub d_s_ref: f64,
    /// Particle radius [m].
    pub r_s: f64,
    /// Specific interfacial area [1/m].
    pub a_s: f64,
    /// Electrode thickness [m].
    pub l: f64,
    /// Kinetic reaction rate at `t_ref`.
    pub k_ref: f64,
    /// Maximum solid concentration [mol/m^3].
    pub c_s_max: f64,
    /// Film resistance [ohm m^2]; may be 0.
    pub r_f: f64,
    /// Activation energy of diffusion [J/mol].
    pub e_d: f64,
    /// Activation energy of kinetics [J/mol].
    pub e_k: f64,
    /// Equilibrium potential vs stoichiometry [V].
    pub ocp: Table,
    /// Entropic coefficient dU/dT vs stoichiometry [V/K].
    pub docp_dt: Table,
    /// Stoichiometry at 0% SoC.
    pub stoich_empty: f64,
    /// Stoichiometry at 100% SoC.
    pub stoich_full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Lumped heat capacity of the cell [J/K].
    pub heat_capacity: f64,
    /// Convective heat transfer coefficient [W/K].
    pub h_cell: f64,
    /// Ambient temperature [K].
    pub t_amb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmtParams {
    pub pos: ElectrodeParams,
    pub neg: ElectrodeParams,
    /// Electrode surface area [m^2].
    pub area: f64,
    /// Constant electrolyte concentration [mol/m^3].
    pub c_e0: f64,
    /// Arrhenius reference temperature [K].
    pub t_ref: f64,
    pub thermal: ThermalParams,
    /// Radial finite-volume shells per particle.
    pub n_r: usize,
    /// Lower voltage cutoff [V].
    pub v_min: f64,
    /// Upper voltage cutoff [V].
    pub v_max: f64,
}

impl SpmtParams {
    pub fn validate(&self) -> Result<()> {
        for (e, name) in [(&self.pos, "positive"), (&self.neg, "negative")] {
            for (v, what) in [
                (e.d_s_ref, "d_s_ref"),
                (e.r_s, "r_s"),
                (e.a_s, "a_s"),
                (e.l, "l"),
                (e.k_ref, "k_ref"),
                (e.c_s_max, "c_s_max"),
            ] {
                if !(v > 0.0) {
                    return Err(Error::Config(format!("{name} {what} must be > 0, got {v}")));
                }
            }
            if e.r_f < 0.0 {
                return Err(Error::Config(format!("{name} r_f must be >= 0")));
            }
            if !(0.0..=1.0).contains(&e.stoich_empty) || !(0.0..=1.0).contains(&e.stoich_full) {
                return Err(Error::Config(format!("{name} stoichiometry window outside [0,1]")));
            }
        }
        if !(self.area > 0.0 && self.c_e0 > 0.0 && self.t_ref > 0.0) {
            return Err(Error::Config("area, c_e0 and t_ref must be > 0".into()));
        }
        if !(self.thermal.heat_capacity > 0.0 && self.thermal.h_cell > 0.0 && self.thermal.t_amb > 0.0) {
            return Err(Error::Config("thermal parameters must be > 0".into()));
        }
        if self.n_r < 3 {
            return Err(Error::Config("n_r must be >= 3".into()));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::Config("voltage window must satisfy v_min < v_max".into()));
        }
        Ok(())
    }

    /// Total charge moved by sweeping the negative electrode across its full
    /// stoichiometry range [C].
    pub fn full_capacity_coulombs(&self) -> f64 {
        FARADAY * self.area * self.neg.l * self.neg.a_s * self.neg.r_s * self.neg.c_s_max / 3.0
    }

    /// Nominal capacity over the configured stoichiometry window [Ah].
    pub fn nominal_capacity_ah(&self) -> f64 {
        self.full_capacity_coulombs() * (self.neg.stoich_full - self.neg.stoich_empty) / 3600.0
    }

    pub fn c_rate_current(&self, c_rate: f64) -> f64 {
        c_rate * self.nominal_capacity_ah()
    }

    /// Synthetic LCO/graphite-like cell, ~2.5 Ah, 3.2–4.1 V window.
    /// OCP tables are synthetic fits, not taken from any published cell.
    pub fn synthetic_cell() -> Self {
        let neg_ocp = Table::new(&[
            (0.0, 1.286834),
            (0.004, 0.855988),
            (0.008, 0.696693),
            (0.013, 0.604901),
            (0.02, 0.526207),
            (0.03, 0.441283),
            (0.045, 0.348792),
            (0.06, 0.288720),
            (0.08, 0.241960),
            (0.1, 0.216651),
            (0.125, 0.198660),
            (0.15, 0.186234),
            (0.175, 0.175188),
            (0.2, 0.164454),
            (0.24, 0.148830),
            (0.28, 0.137111),
            (0.33, 0.128439),
            (0.38, 0.124124),
            (0.44, 0.120942),
            (0.5, 0.116057),
            (0.56, 0.106139),
            (0.62, 0.095068),
            (0.68, 0.089230),
            (0.74, 0.087160),
            (0.8, 0.085922),
            (0.86, 0.082870),
            (0.92, 0.071377),
            (1.0, 0.004431),
        ])
        .unwrap();
        let pos_ocp = Table::new(&[
            (0.0, 6.459537),
            (0.46, 4.389537),
            (0.49, 4.260361),
            (0.52, 4.194072),
            (0.55, 4.145771),
            (0.58, 4.105473),
            (0.61, 4.069969),
            (0.64, 4.038036),
            (0.67, 4.009159),
            (0.7, 3.983078),
            (0.73, 3.959602),
            (0.76, 3.938512),
            (0.79, 3.919486),
            (0.82, 3.902009),
            (0.85, 3.885205),
            (0.88, 3.867436),
            (0.9, 3.853459),
            (0.92, 3.835395),
            (0.94, 3.808421),
            (0.955, 3.775073),
            (0.97, 3.713312),
            (0.985, 3.555696),
            (1.0, 3.405696),
        ])
        .unwrap();
        // small synthetic entropic coefficients [V/K]
        let neg_dudt = Table::new(&[(0.0, 1.0e-4), (0.3, 2.0e-5), (1.0, -4.0e-5)]).unwrap();
        let pos_dudt = Table::new(&[(0.0, -8.0e-5), (0.5, -4.0e-5), (1.0, -1.0e-5)]).unwrap();
        let eps_neg = 0.58;
        let eps_pos = 0.50;
        let r_s = 10e-6;
        SpmtParams {
            neg: ElectrodeParams {
                d_s_ref: 3.9e-14,
                r_s,
                a_s: 3.0 * eps_neg / r_s,
                l: 88e-6,
                k_ref: 5e-6,
                c_s_max: 30555.0,
                r_f: 0.01,
                e_d: 35000.0,
                e_k: 20000.0,
                ocp: neg_ocp,
                docp_dt: neg_dudt,
                stoich_empty: 0.03,
                stoich_full: 0.86,
            },
            pos: ElectrodeParams {
                d_s_ref: 1.0e-13,
                r_s,
                a_s: 3.0 * eps_pos / r_s,
                l: 111e-6,
                k_ref: 2.3e-6,
                c_s_max: 51554.0,
                r_f: 0.005,
                e_d: 35000.0,
                e_k: 20000.0,
                ocp: pos_ocp,
                docp_dt: pos_dudt,
                stoich_empty: 0.9824,
                stoich_full: 0.53,
            },
            area: 0.072,
            c_e0: 1000.0,
            t_ref: 298.15,
            thermal: ThermalParams { heat_capacity: 60.0, h_cell: 0.25, t_amb: 298.15 },
            n_r: 30,
            v_min: 3.2,
            v_max: 4.1,
        }
    }
}

/// Discretized concentration fields plus lumped temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SpmtState {
    /// Shell-center concentrations, positive particle [mol/m^3].
    pub c_pos: Vec<f64>,
    /// Shell-center concentrations, negative particle [mol/m^3].
    pub c_neg: Vec<f64>,
    /// Lumped cell temperature [K].
    pub temperature: f64,
}

impl SpmtState {
    /// Uniform concentrations at stoichiometries consistent with `soc`.
    pub fn from_soc(params: &SpmtParams, soc: f64, temperature: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::Argument(format!("initial soc {soc} outside [0,1]")));
        }
        if !(temperature > 0.0) {
            return Err(Error::Argument("temperature must be > 0 K".into()));
        }
        let stoich = |e: &ElectrodeParams| e.stoich_empty + soc * (e.stoich_full - e.stoich_empty);
        Ok(SpmtState {
            c_pos: vec![stoich(&params.pos) * params.pos.c_s_max; params.n_r],
            c_neg: vec![stoich(&params.neg) * params.neg.c_s_max; params.n_r],
            temperature,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpmtOutputs {
    pub voltage: f64,
    pub soc_bulk: f64,
    pub soc_surf: f64,
    pub temperature: f64,
    pub eta_pos: f64,
    pub eta_neg: f64,
    pub c_ss_pos: f64,
    pub c_ss_neg: f64,
}

/// Molar flux at the particle surface: j_n- = +I/(a F A L), j_n+ = -I/(a F A L).
pub fn molar_flux(params: &SpmtParams, current: f64, electrode: Electrode) -> f64 {
    let (e, sign) = match electrode {
        Electrode::Negative => (&params.neg, 1.0),
        Electrode::Positive => (&params.pos, -1.0),
    };
    sign * current / (e.a_s * FARADAY * params.area * e.l)
}

/// Arrhenius temperature correction: psi_ref * exp[(E/R)(1/T_ref - 1/T)].
pub fn arrhenius(psi_ref: f64, e_psi: f64, t: f64, t_ref: f64) -> f64 {
    psi_ref * (e_psi / GAS_CONSTANT * (1.0 / t_ref - 1.0 / t)).exp()
}

/// One implicit-Euler step of the conservative finite-volume discretization
/// of spherical Fick diffusion. Zero flux at the center; `j_n` leaves
/// through the surface.
pub fn step_diffusion(conc: &[f64], r_s: f64, d_s: f64, j_n: f64, dt: f64) -> Result<Vec<f64>> {
    let n = conc.len();
    if n < 3 {
        return Err(Error::Argument("need at least 3 radial shells".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Argument("dt must be > 0".into()));
    }
    let dr = r_s / n as f64;
    // face radii r_i = i*dr; shell volume (r_{i+1}^3 - r_i^3)/3 (4*pi dropped)
    let face = |i: usize| i as f64 * dr;
    let vol = |i: usize| (face(i + 1).powi(3) - face(i).powi(3)) / 3.0;

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = conc.to_vec();
    for i in 0..n {
        let v = vol(i);
        let w = if i > 0 { d_s * face(i).powi(2) / dr } else { 0.0 };
        let e = if i < n - 1 { d_s * face(i + 1).powi(2) / dr } else { 0.0 };
        diag[i] = 1.0 + dt * (w + e) / v;
        if i > 0 {
            lower[i] = -dt * w / v;
        }
        if i < n - 1 {
            upper[i] = -dt * e / v;
        }
    }
    rhs[n - 1] -= dt * j_n * face(n).powi(2) / vol(n - 1);

    // Thomas solve
    for i in 1..n {
        let pivot = diag[i - 1];
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return Err(Error::Solver("singular tridiagonal system".into()));
        }
        let m = lower[i] / pivot;
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut out = vec![0.0; n];
    if diag[n - 1].abs() < 1e-300 || !diag[n - 1].is_finite() {
        return Err(Error::Solver("singular tridiagonal system".into()));
    }
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = (rhs[i] - upper[i] * out[i + 1]) / diag[i];
    }
    Ok(out)
}

/// Volume-averaged concentration over the finite-volume shells.
pub fn bulk_concentration(conc: &[f64], r_s: f64) -> f64 {
    let n = conc.len();
    let dr = r_s / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, c) in conc.iter().enumerate() {
        let v = ((i as f64 + 1.0) * dr).powi(3) - (i as f64 * dr).powi(3);
        num += v * c;
        den += v;
    }
    num / den
}

/// Total lithium content of a particle in the discrete scheme, up to the
/// constant 4*pi factor [mol * m^-? consistent with `step_diffusion`].
pub fn total_moles(conc: &[f64], r_s: f64) -> f64 {
    let n = conc.len();
    let dr = r_s / n as f64;
    conc.iter()
        .enumerate()
        .map(|(i, c)| c * (((i as f64 + 1.0) * dr).powi(3) - (i as f64 * dr).powi(3)) / 3.0)
        .sum()
}

/// Exchange current density i0 = k(T) * sqrt(c_e0 * c_ss * (c_s_max - c_ss)).
fn exchange_current(params: &SpmtParams, e: &ElectrodeParams, c_ss: f64, t: f64) -> f64 {
    let k = arrhenius(e.k_ref, e.e_k, t, params.t_ref);
    k * (params.c_e0 * c_ss * (e.c_s_max - c_ss)).sqrt()
}

/// Butler–Volmer overpotential, inverted under alpha_a = alpha_c = 0.5:
/// eta = (2RT/F) asinh(F j_n / (2 i0)).
pub fn overpotential(
    params: &SpmtParams,
    c_ss: f64,
    j_n: f64,
    t: f64,
    electrode: Electrode,
) -> Result<f64> {
    let e = match electrode {
        Electrode::Positive => &params.pos,
        Electrode::Negative => &params.neg,
    };
    if c_ss <= 0.0 {
        return Err(Error::Saturation { electrode: electrode.name(), kind: "depletion", time: f64::NAN, c_ss });
    }
    if c_ss >= e.c_s_max {
        return Err(Error::Saturation { electrode: electrode.name(), kind: "saturation", time: f64::NAN, c_ss });
    }
    let i0 = exchange_current(params, e, c_ss, t);
    Ok(2.0 * GAS_CONSTANT * t / FARADAY * (FARADAY * j_n / (2.0 * i0)).asinh())
}

fn surface_concentration(e: &ElectrodeParams, conc: &[f64], j_n: f64, d_s: f64) -> f64 {
    // first-order reconstruction from the outermost cell center to the
    // surface using the flux boundary condition dc/dr = -j_n/D
    let dr = e.r_s / conc.len() as f64;
    conc[conc.len() - 1] - 0.5 * dr * j_n / d_s
}

fn output_voltage_inner(
    params: &SpmtParams,
    state: &SpmtState,
    current: f64,
    clamp: bool,
) -> Result<SpmtOutputs> {
    let t = state.temperature;
    let mut css = [0.0; 2];
    let mut eta = [0.0; 2];
    let mut u = [0.0; 2];
    for (idx, (e, conc, electrode)) in [
        (&params.pos, &state.c_pos, Electrode::Positive),
        (&params.neg, &state.c_neg, Electrode::Negative),
    ]
    .into_iter()
    .enumerate()
    {
        let j_n = molar_flux(params, current, electrode);
        let d_s = arrhenius(e.d_s_ref, e.e_d, t, params.t_ref);
        let mut c_ss = surface_concentration(e, conc, j_n, d_s);
        if clamp {
            let eps = 1e-6 * e.c_s_max;
            c_ss = c_ss.clamp(eps, e.c_s_max - eps);
        }
        css[idx] = c_ss;
        eta[idx] = overpotential(params, c_ss, j_n, t, electrode)?;
        u[idx] = e.ocp.eval(c_ss / e.c_s_max);
    }
    let film = params.pos.r_f / (params.pos.a_s * params.pos.l)
        + params.neg.r_f / (params.neg.a_s * params.neg.l);
    let voltage = u[0] - u[1] + eta[0] - eta[1] - film * current;
    let c_bar_neg = bulk_concentration(&state.c_neg, params.neg.r_s);
    Ok(SpmtOutputs {
        voltage,
        soc_bulk: c_bar_neg / params.neg.c_s_max,
        soc_surf: css[1] / params.neg.c_s_max,
        temperature: t,
        eta_pos: eta[0],
        eta_neg: eta[1],
        c_ss_pos: css[0],
        c_ss_neg: css[1],
    })
}

/// Terminal voltage and state features for the given state and applied
/// current.
pub fn output_voltage(params: &SpmtParams, state: &SpmtState, current: f64) -> Result<SpmtOutputs> {
    output_voltage_inner(params, state, current, false)
}

/// Explicit substepped Euler update of the lumped thermal ODE. Heat
/// generation uses the discharge-positive convention: ohmic dissipation
/// I*(OCV_bulk - V) is nonnegative during discharge.
pub fn step_thermal(
    state: &SpmtState,
    params: &SpmtParams,
    current: f64,
    voltage: f64,
    dt: f64,
) -> f64 {
    let x_bar = bulk_concentration(&state.c_neg, params.neg.r_s) / params.neg.c_s_max;
    let y_bar = bulk_concentration(&state.c_pos, params.pos.r_s) / params.pos.c_s_max;
    let ocv_bulk = params.pos.ocp.eval(y_bar) - params.neg.ocp.eval(x_bar);
    let dudt = params.pos.docp_dt.eval(y_bar) - params.neg.docp_dt.eval(x_bar);
    let th = &params.thermal;
    let mut t = state.temperature;
    let n_sub = (dt / 0.05).ceil().max(1.0) as usize;
    let h = dt / n_sub as f64;
    for _ in 0..n_sub {
        let q_gen = current * (ocv_bulk - voltage) - current * t * dudt;
        let q_conv = -th.h_cell * (t - th.t_amb);
        t += h * (q_gen + q_conv) / th.heat_capacity;
    }
    t
}

/// Simulates the SPMT over a current profile on the uniform step grid
/// t = 0, dt, 2dt, ... Halts early with a cutoff flag when the voltage
/// leaves [v_min, v_max].
pub fn simulate_spmt(
    params: &SpmtParams,
    initial_soc: f64,
    initial_t: f64,
    profile: &CurrentProfile,
    dt: f64,
) -> Result<SimTrace> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::Argument("dt must be > 0".into()));
    }
    let mut state = SpmtState::from_soc(params, initial_soc, initial_t)?;
    let n_steps = (profile.end_time() / dt + 1e-9).floor() as usize;
    let mut records = Vec::with_capacity(n_steps + 1);
    let mut cutoff = None;

    for k in 0..=n_steps {
        let t_now = k as f64 * dt;
        let current = profile.current_at(t_now.min(profile.end_time()))?;
        let out = match output_voltage_inner(params, &state, current, false) {
            Ok(o) => o,
            Err(Error::Saturation { electrode, kind, c_ss, .. }) => {
                // graceful end-of-discharge: clamp once and stop if the
                // clamped voltage confirms we are at the window edge
                let clamped = output_voltage_inner(params, &state, current, true)?;
                if clamped.voltage < params.v_min || clamped.voltage > params.v_max {
                    records.push(TraceRecord {
                        time_s: t_now,
                        current_a: current,
                        voltage_v: clamped.voltage,
                        features: vec![clamped.soc_bulk, clamped.soc_surf, clamped.temperature],
                    });
                    cutoff = Some(Cutoff {
                        time_s: t_now,
                        voltage_v: clamped.voltage,
                        lower: clamped.voltage < params.v_min,
                    });
                    break;
                }
                return Err(Error::Saturation { electrode, kind, time: t_now, c_ss });
            }
            Err(e) => return Err(e),
        };
        if !out.voltage.is_finite() || !state.temperature.is_finite() {
            return Err(Error::NumericalFailure { time: t_now, what: "non-finite state".into() });
        }
        records.push(TraceRecord {
            time_s: t_now,
            current_a: current,
            voltage_v: out.voltage,
            features: vec![out.soc_bulk, out.soc_surf, out.temperature],
        });
        if out.voltage < params.v_min || out.voltage > params.v_max {
            cutoff = Some(Cutoff {
                time_s: t_now,
                voltage_v: out.voltage,
                lower: out.voltage < params.v_min,
            });
            break;
        }
        if k == n_steps {
            break;
        }
        let temp = state.temperature;
        for (e, conc, electrode) in [
            (&params.pos, &mut state.c_pos, Electrode::Positive),
            (&params.neg, &mut state.c_neg, Electrode::Negative),
        ] {
            let j_n = molar_flux(params, current, electrode);
            let d_s = arrhenius(e.d_s_ref, e.e_d, temp, params.t_ref);
            *conc = step_diffusion(conc, e.r_s, d_s, j_n, dt)?;
        }
        state.temperature = step_thermal(&state, params, current, out.voltage, dt);
    }

    let mut trace = SimTrace::new(
        SPMT_FEATURES.iter().map(|s| s.to_string()).collect(),
        records,
    )?;
    trace.cutoff = cutoff;
    Ok(trace)
}
