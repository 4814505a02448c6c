//! Nonlinear double capacitor (NDC) equivalent circuit model.
//!
//! A linear two-capacitor diffusion subcircuit (C_b, C_s bridged by
//! R_b + R_s) plus a scalar R_1 C_1 transient branch, with the nonlinear
//! output voltage h(V_s) - V_1 - R_0(SoC) * I.
//!
//! The circuit equations are linear time-invariant, so stepping uses the
//! exact matrix exponential; the discrete charge balance
//! C_b dV_b + C_s dV_s = -I dt holds to machine precision.
//!
//! The paper-level state equations use charge-positive current; this module
//! negates at the boundary so all public signatures take discharge-positive
//! current like the rest of the crate.

use serde::{Deserialize, Serialize};

use crate::core::{CurrentProfile, Cutoff, SimTrace, TraceRecord};
use crate::error::{Error, Result};

pub const NDC_FEATURES: [&str; 3] = ["v_b", "v_s", "v_1"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdcParams {
    /// Bulk capacitor [F].
    pub c_b: f64,
    /// Surface capacitor [F].
    pub c_s: f64,
    /// Transient branch capacitor [F].
    pub c_1: f64,
    /// Bulk resistance [ohm].
    pub r_b: f64,
    /// Surface resistance [ohm]; 0 is allowed and the default.
    pub r_s: f64,
    /// Transient branch resistance [ohm].
    pub r_1: f64,
    /// Rational open-circuit-voltage coefficients alpha_1..alpha_6.
    pub h_coeffs: [f64; 6],
    /// SoC-dependent ohmic resistance coefficients gamma_1..gamma_5.
    pub r0_coeffs: [f64; 5],
    /// Lower voltage cutoff [V].
    pub v_min: f64,
    /// Upper voltage cutoff [V].
    pub v_max: f64,
}

impl NdcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_b > self.c_s && self.c_s > 0.0) {
            return Err(Error::Config("need C_b > C_s > 0".into()));
        }
        if !(self.r_b > self.r_s && self.r_s >= 0.0) {
            return Err(Error::Config("need R_b > R_s >= 0".into()));
        }
        if !(self.c_1 > 0.0 && self.r_1 > 0.0) {
            return Err(Error::Config("need C_1 > 0 and R_1 > 0".into()));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::Config("voltage window must satisfy v_min < v_max".into()));
        }
        // h denominator nonzero and R0 positive across the operating range
        for k in 0..=100 {
            let v = k as f64 / 100.0;
            let den = v.powi(3)
                + self.h_coeffs[3] * v * v
                + self.h_coeffs[4] * v
                + self.h_coeffs[5];
            if den.abs() < 1e-9 {
                return Err(Error::Config(format!("h(V_s) denominator vanishes near V_s = {v}")));
            }
            if self.r0_of_soc(v) <= 0.0 {
                return Err(Error::Config(format!("R0(SoC) not positive at SoC = {v}")));
            }
        }
        Ok(())
    }

    /// Total charge capacity C_b + C_s [C]; V_b = V_s = 1 V is a full cell.
    pub fn capacity_coulombs(&self) -> f64 {
        self.c_b + self.c_s
    }

    pub fn nominal_capacity_ah(&self) -> f64 {
        self.capacity_coulombs() / 3600.0
    }

    pub fn c_rate_current(&self, c_rate: f64) -> f64 {
        c_rate * self.nominal_capacity_ah()
    }

    /// Open-circuit voltage h(V_s) = (a1 Vs^2 + a2 Vs + a3)/(Vs^3 + a4 Vs^2 + a5 Vs + a6).
    pub fn h_of_vs(&self, v_s: f64) -> Result<f64> {
        let [a1, a2, a3, a4, a5, a6] = self.h_coeffs;
        let den = v_s.powi(3) + a4 * v_s * v_s + a5 * v_s + a6;
        if den.abs() < 1e-12 {
            return Err(Error::Singularity(v_s));
        }
        Ok((a1 * v_s * v_s + a2 * v_s + a3) / den)
    }

    /// SoC-dependent ohmic resistance
    /// R0 = g1 + g2 exp(-g3 soc) + g4 exp(-g5 (1 - soc)).
    pub fn r0_of_soc(&self, soc: f64) -> f64 {
        let [g1, g2, g3, g4, g5] = self.r0_coeffs;
        g1 + g2 * (-g3 * soc).exp() + g4 * (-g5 * (1.0 - soc)).exp()
    }

    /// Synthetic fit for a 2.5 Ah cell in a 2.8–4.2 V window. The
    /// coefficients are not identified from any physical cell.
    pub fn synthetic_cell() -> Self {
        NdcParams {
            c_b: 7500.0,
            c_s: 1500.0,
            c_1: 2000.0,
            r_b: 0.02,
            r_s: 0.005,
            r_1: 0.01,
            h_coeffs: [43.6, 45.8, 24.0, 6.0, 12.0, 8.0],
            r0_coeffs: [0.012, 0.01, 10.0, 0.002, 8.0],
            v_min: 2.8,
            v_max: 4.2,
        }
    }
}

/// Capacitor voltages (V_b, V_s, V_1). V_b = V_s = 0 is a depleted cell,
/// V_b = V_s = 1 a full one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdcState {
    pub v_b: f64,
    pub v_s: f64,
    pub v_1: f64,
}

impl NdcState {
    pub fn from_soc(soc: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(Error::Argument(format!("initial soc {soc} outside [0,1]")));
        }
        Ok(NdcState { v_b: soc, v_s: soc, v_1: 0.0 })
    }
}

/// SoC = (C_b V_b + C_s V_s)/(C_b + C_s).
pub fn ndc_soc(params: &NdcParams, state: &NdcState) -> f64 {
    (params.c_b * state.v_b + params.c_s * state.v_s) / (params.c_b + params.c_s)
}

/// One exact matrix-exponential step of the LTI circuit under a current
/// held constant over [0, dt]. `current` is discharge-positive.
pub fn step_ndc(params: &NdcParams, state: &NdcState, current: f64, dt: f64) -> Result<NdcState> {
    if !(dt > 0.0) {
        return Err(Error::Argument("dt must be > 0".into()));
    }
    let i_int = -current; // internal charge-positive current
    let r = params.r_b + params.r_s;
    let a = 1.0 / (params.c_b * r);
    let b = 1.0 / (params.c_s * r);
    // diffusion block: A2 = [[-a, a], [b, -b]] satisfies A2^2 = lam*A2 with
    // lam = -(a+b), so exp(A2 t) = I + A2 (e^{lam t} - 1)/lam and the
    // forced-response integral has the same rank-1 structure.
    let lam = -(a + b);
    let e = (lam * dt).exp();
    let phi_coeff = (e - 1.0) / lam; // multiplies A2
    let int_coeff = (phi_coeff - dt) / lam; // multiplies A2 in the integral of exp
    let b_vec = [params.r_s / (params.c_b * r), params.r_b / (params.c_s * r)];
    // phi * x
    let ax = [-a * state.v_b + a * state.v_s, b * state.v_b - b * state.v_s];
    let mut v_b = state.v_b + phi_coeff * ax[0];
    let mut v_s = state.v_s + phi_coeff * ax[1];
    // gamma * u, gamma = (dt I + int_coeff A2) B
    let ab = [-a * b_vec[0] + a * b_vec[1], b * b_vec[0] - b * b_vec[1]];
    v_b += (dt * b_vec[0] + int_coeff * ab[0]) * i_int;
    v_s += (dt * b_vec[1] + int_coeff * ab[1]) * i_int;
    // scalar V_1 block: dV1/dt = -V1/(R1 C1) - I/C1
    let tau1 = params.r_1 * params.c_1;
    let d = (-dt / tau1).exp();
    let v_1 = d * state.v_1 - params.r_1 * (1.0 - d) * i_int;
    Ok(NdcState { v_b, v_s, v_1 })
}

/// Terminal voltage h(V_s) - V_1 - R0(SoC) * I (discharge-positive I).
pub fn ndc_voltage(params: &NdcParams, state: &NdcState, current: f64) -> Result<f64> {
    let soc = ndc_soc(params, state);
    Ok(params.h_of_vs(state.v_s)? - state.v_1 - params.r0_of_soc(soc) * current)
}

/// Simulates the NDC over a current profile on the uniform step grid.
/// Initial state V_b = V_s = initial_soc, V_1 = 0.
pub fn simulate_ndc(
    params: &NdcParams,
    initial_soc: f64,
    profile: &CurrentProfile,
    dt: f64,
) -> Result<SimTrace> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::Argument("dt must be > 0".into()));
    }
    let mut state = NdcState::from_soc(initial_soc)?;
    let n_steps = (profile.end_time() / dt + 1e-9).floor() as usize;
    let mut records = Vec::with_capacity(n_steps + 1);
    let mut cutoff = None;
    for k in 0..=n_steps {
        let t_now = k as f64 * dt;
        let current = profile.current_at(t_now.min(profile.end_time()))?;
        let voltage = ndc_voltage(params, &state, current)?;
        if !voltage.is_finite() {
            return Err(Error::NumericalFailure { time: t_now, what: "non-finite voltage".into() });
        }
        records.push(TraceRecord {
            time_s: t_now,
            current_a: current,
            voltage_v: voltage,
            features: vec![state.v_b, state.v_s, state.v_1],
        });
        if voltage < params.v_min || voltage > params.v_max {
            cutoff = Some(Cutoff { time_s: t_now, voltage_v: voltage, lower: voltage < params.v_min });
            break;
        }
        if k == n_steps {
            break;
        }
        state = step_ndc(params, &state, current, dt)?;
    }
    let mut trace = SimTrace::new(NDC_FEATURES.iter().map(|s| s.to_string()).collect(), records)?;
    trace.cutoff = cutoff;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> NdcParams {
        NdcParams::synthetic_cell()
    }

    #[test]
    fn rest_equilibrium() {
        let p = params();
        let st = NdcState { v_b: 0.7, v_s: 0.7, v_1 : 0.05 };
        let next = step_ndc(&p, &st, 0.0, 1.0).unwrap();
        assert_relative_eq!(next.v_b, 0.7, max_relative = 1e-14);
        assert_relative_eq!(next.v_s, 0.7, max_relative = 1e-14);
        // V_1 decays geometrically with ratio exp(-dt/(R1 C1))
        let ratio = (-1.0 / (p.r_1 * p.c_1)).exp();
        assert_relative_eq!(next.v_1, 0.05 * ratio, max_relative = 1e-12);
    }

    #[test]
    fn rest_relaxation_to_charge_weighted_mean() {
        let p = params();
        let mut st = NdcState { v_b: 0.8, v_s: 0.6, v_1: 0.0 };
        for _ in 0..200 {
            st = step_ndc(&p, &st, 0.0, 60.0).unwrap();
        }
        let target = (p.c_b * 0.8 + p.c_s * 0.6) / (p.c_b + p.c_s);
        assert_relative_eq!(st.v_b, target, max_relative = 1e-9);
        assert_relative_eq!(st.v_s, target, max_relative = 1e-9);
    }

    #[test]
    fn charge_balance_exact_per_step() {
        let p = params();
        let mut st = NdcState::from_soc(0.9).unwrap();
        let dt = 1.0;
        for k in 0..500 {
            let i = 2.5 * ((k as f64 * 0.05).sin() + 1.2);
            let next = step_ndc(&p, &st, i, dt).unwrap();
            let dq = p.c_b * (next.v_b - st.v_b) + p.c_s * (next.v_s - st.v_s);
            assert_relative_eq!(dq, -i * dt, max_relative = 1e-10);
            st = next;
        }
    }

    #[test]
    fn step_is_linear_in_state_and_current() {
        let p = params();
        let x1 = NdcState { v_b: 0.8, v_s: 0.7, v_1: 0.01 };
        let x2 = NdcState { v_b: 0.3, v_s: 0.4, v_1: -0.02 };
        let (a, b) = (0.6, -1.3);
        let combined = NdcState {
            v_b: a * x1.v_b + b * x2.v_b,
            v_s: a * x1.v_s + b * x2.v_s,
            v_1: a * x1.v_1 + b * x2.v_1,
        };
        let lhs = step_ndc(&p, &combined, a * 5.0 + b * (-2.0), 1.0).unwrap();
        let y1 = step_ndc(&p, &x1, 5.0, 1.0).unwrap();
        let y2 = step_ndc(&p, &x2, -2.0, 1.0).unwrap();
        assert_relative_eq!(lhs.v_b, a * y1.v_b + b * y2.v_b, max_relative = 1e-12);
        assert_relative_eq!(lhs.v_s, a * y1.v_s + b * y2.v_s, max_relative = 1e-12);
        assert_relative_eq!(lhs.v_1, a * y1.v_1 + b * y2.v_1, max_relative = 1e-12);
    }

    #[test]
    fn h_of_vs_cases() {
        let mut p = params();
        p.h_coeffs = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        assert_relative_eq!(p.h_of_vs(0.0).unwrap(), 1.0);
        assert_relative_eq!(p.h_of_vs(1.0).unwrap(), 0.5);
        p.h_coeffs = [0.0, 0.0, 3.0 * 8.0, 0.0, 0.0, 8.0];
        assert_relative_eq!(p.h_of_vs(0.0).unwrap(), 3.0);
        // fitted coefficients vs direct evaluation
        let p = params();
        let [a1, a2, a3, a4, a5, a6] = p.h_coeffs;
        let v = 0.5;
        let expect = (a1 * v * v + a2 * v + a3) / (v.powi(3) + a4 * v * v + a5 * v + a6);
        assert_relative_eq!(p.h_of_vs(v).unwrap(), expect, max_relative = 1e-15);
    }

    #[test]
    fn h_singularity_detected() {
        let mut p = params();
        p.h_coeffs = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        assert!(matches!(p.h_of_vs(0.0), Err(Error::Singularity(_))));
    }

    #[test]
    fn soc_endpoints_and_weighting() {
        let p = params();
        assert_relative_eq!(ndc_soc(&p, &NdcState { v_b: 1.0, v_s: 1.0, v_1: 0.0 }), 1.0);
        assert_relative_eq!(ndc_soc(&p, &NdcState { v_b: 0.0, v_s: 0.0, v_1: 0.0 }), 0.0);
        let p2 = NdcParams { c_b: 9000.0, c_s: 1000.0, ..p };
        assert_relative_eq!(
            ndc_soc(&p2, &NdcState { v_b: 1.0, v_s: 0.5, v_1: 0.0 }),
            0.95,
            max_relative = 1e-14
        );
    }

    #[test]
    fn r0_cases() {
        let mut p = params();
        p.r0_coeffs = [0.02, 0.0, 5.0, 0.0, 5.0];
        assert_eq!(p.r0_of_soc(0.3), 0.02);
        let p = params();
        let [g1, g2, g3, g4, g5] = p.r0_coeffs;
        assert_relative_eq!(p.r0_of_soc(0.0), g1 + g2 + g4 * (-g5).exp(), max_relative = 1e-15);
        let expect = g1 + g2 * (-g3 * 0.5).exp() + g4 * (-g5 * 0.5).exp();
        assert_relative_eq!(p.r0_of_soc(0.5), expect, max_relative = 1e-15);
    }

    #[test]
    fn voltage_drops_with_discharge_current() {
        let p = params();
        let st = NdcState::from_soc(0.8).unwrap();
        let v0 = ndc_voltage(&p, &st, 0.0).unwrap();
        let v1 = ndc_voltage(&p, &st, 5.0).unwrap();
        let soc = ndc_soc(&p, &st);
        assert_relative_eq!(v0 - v1, p.r0_of_soc(soc) * 5.0, max_relative = 1e-12);
        assert_relative_eq!(v0, p.h_of_vs(0.8).unwrap(), max_relative = 1e-15);
    }

    #[test]
    fn simulate_equilibrium_profile() {
        let p = params();
        let profile = CurrentProfile::constant(0.0, 50.0).unwrap();
        let tr = simulate_ndc(&p, 0.7, &profile, 1.0).unwrap();
        let v = p.h_of_vs(0.7).unwrap();
        for r in tr.records() {
            assert_relative_eq!(r.voltage_v, v, max_relative = 1e-12);
        }
    }

    #[test]
    fn simulate_soc_equals_coulomb_counting() {
        let p = params();
        let i = p.c_rate_current(1.0);
        let profile = CurrentProfile::constant(i, 1800.0).unwrap();
        let tr = simulate_ndc(&p, 1.0, &profile, 1.0).unwrap();
        let cap = p.capacity_coulombs();
        for r in tr.records() {
            let st = NdcState { v_b: r.features[0], v_s: r.features[1], v_1: r.features[2] };
            let soc = ndc_soc(&p, &st);
            let cc = 1.0 - i * r.time_s / cap;
            assert_relative_eq!(soc, cc, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn rest_after_pulse_relaxes_to_h() {
        let p = params();
        let i = p.c_rate_current(2.0);
        let profile = CurrentProfile::new(vec![(0.0, i), (120.0, 0.0), (7200.0, 0.0)]).unwrap();
        let tr = simulate_ndc(&p, 0.9, &profile, 1.0).unwrap();
        assert!(tr.cutoff.is_none());
        let last = tr.records().last().unwrap();
        let st = NdcState { v_b: last.features[0], v_s: last.features[1], v_1: last.features[2] };
        // fully relaxed: V_b ~ V_s, V_1 ~ 0, voltage ~ h(V_s)
        assert_relative_eq!(st.v_b, st.v_s, epsilon = 1e-6);
        assert!(st.v_1.abs() < 1e-9);
        assert_relative_eq!(last.voltage_v, p.h_of_vs(st.v_s).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn validation_rejects_bad_ordering() {
        let mut p = params();
        p.c_s = p.c_b + 1.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.r_s = p.r_b;
        assert!(p.validate().is_err());
    }
}
