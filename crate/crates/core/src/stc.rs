//! Calcium-based synaptic tagging and capture.
//!
//! Spine calcium sets a tag through a three-level flag, dendritic calcium
//! gates synthesis of plasticity-related proteins (PRP), and their product
//! drives `y`, which maps to a bounded efficacy factor `z ∈ [z_l, z_h]`.
//!
//! Time constants of the tag/PRP/y system are in seconds. Steppers take `dt`
//! in milliseconds, like the rest of the simulator, and convert.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StcParams {
    pub z_low: f64,
    pub z_high: f64,
    /// s
    pub tau_y: f64,
    /// 1/s
    pub alpha_tag: f64,
    /// 1/s
    pub beta_tag_ltd: f64,
    /// 1/s
    pub beta_tag_ltp: f64,
    pub ca0_spine: f64,
    pub ca1_spine: f64,
    /// PRP synthesis rate while dendritic calcium is above threshold (1/s).
    pub alpha_prp: f64,
    /// s
    pub tau_prp: f64,
    pub ca0_dend: f64,
    /// Spine calcium per unit |NMDA current| per ms.
    pub spine_ca_gain: f64,
    /// ms
    pub spine_ca_tau: f64,
}

impl Default for StcParams {
    fn default() -> Self {
        Self {
            z_low: 0.5,
            z_high: 5.0,
            tau_y: 1.0,
            alpha_tag: 0.5,
            beta_tag_ltd: 0.5,
            beta_tag_ltp: 0.5,
            ca0_spine: 0.1,
            ca1_spine: 0.2,
            alpha_prp: 0.000833,
            tau_prp: 0.5,
            ca0_dend: 0.12,
            spine_ca_gain: 45.0,
            spine_ca_tau: 200.0,
        }
    }
}

impl StcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_low < 1.0 && 1.0 < self.z_high && self.z_low > 0.0) {
            return Err(Error::Config(format!(
                "need 0 < z_low < 1 < z_high, got z_low={}, z_high={}",
                self.z_low, self.z_high
            )));
        }
        if !(self.ca0_spine < self.ca1_spine) {
            return Err(Error::Config(format!(
                "need ca0_spine < ca1_spine, got {} and {}",
                self.ca0_spine, self.ca1_spine
            )));
        }
        for (name, v) in [
            ("tau_y", self.tau_y),
            ("tau_prp", self.tau_prp),
            ("spine_ca_tau", self.spine_ca_tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("alpha_tag", self.alpha_tag),
            ("beta_tag_ltd", self.beta_tag_ltd),
            ("beta_tag_ltp", self.beta_tag_ltp),
            ("alpha_prp", self.alpha_prp),
            ("spine_ca_gain", self.spine_ca_gain),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    Depress = -1,
    Idle = 0,
    Potentiate = 1,
}

impl Flag {
    pub fn value(self) -> f64 {
        self as i8 as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlasticityState {
    pub y: f64,
    pub tag: f64,
    pub flag: Option<Flag>,
    /// Integral of `prp_rate` since the start of the run.
    pub prp: f64,
    pub prp_rate: f64,
    pub ca_spine: f64,
    /// Copy of the owning dendrite's calcium, refreshed every plasticity tick.
    pub ca_dend: f64,
}

impl PlasticityState {
    pub fn flag(&self) -> Flag {
        self.flag.unwrap_or(Flag::Idle)
    }
}

/// Efficacy factor as a function of `y`, written as a bound minus a fraction
/// of the range. The dominant exponential is factored out, so it stays finite
/// for any finite `y`, and every operation is monotone, so rounding can never
/// make `z` decrease as `y` grows.
pub fn z_of_y(y: f64, p: &StcParams) -> f64 {
    let (zl, zh) = (p.z_low, p.z_high);
    let up = 1.0 - zl;
    let down = zh - 1.0;
    if y >= 0.0 {
        let r = (-2.0 * y).exp();
        zh - (zh - zl) / (1.0 + up / (down * r))
    } else {
        let r = (2.0 * y).exp();
        zl + (zh - zl) / (1.0 + down / (up * r))
    }
}

pub fn flag_of_spine_calcium(ca_s: f64, p: &StcParams) -> Flag {
    if ca_s < p.ca0_spine {
        Flag::Idle
    } else if ca_s <= p.ca1_spine {
        Flag::Depress
    } else {
        Flag::Potentiate
    }
}

/// Tag relaxation over `dt_ms`, exact for a flag held constant over the step.
pub fn step_tag(state: &PlasticityState, p: &StcParams, dt_ms: f64) -> PlasticityState {
    let dt = dt_ms * 1e-3;
    let flag = state.flag();
    let beta = match flag {
        Flag::Idle => 0.0,
        Flag::Depress => p.beta_tag_ltd,
        Flag::Potentiate => p.beta_tag_ltp,
    };
    let rate = p.alpha_tag + beta;
    let mut next = *state;
    if rate > 0.0 {
        let target = beta * flag.value() / rate;
        next.tag = target + (state.tag - target) * (-rate * dt).exp();
    }
    next
}

/// PRP synthesis rate constant for a given dendritic calcium level.
pub fn prp_synthesis(ca_d: f64, p: &StcParams) -> f64 {
    if ca_d < p.ca0_dend {
        0.0
    } else {
        p.alpha_prp
    }
}

/// Advances `(prp_rate, prp)` with the trapezoidal rule, which keeps `prp`
/// equal to the trapezoidal quadrature of `prp_rate`. The integral feedback
/// uses `prp` itself.
pub fn step_prp(state: &PlasticityState, p: &StcParams, ca_d: f64, dt_ms: f64) -> PlasticityState {
    let h = dt_ms * 1e-3;
    let ap = prp_synthesis(ca_d, p);
    let k = 1.0 / p.tau_prp + ap;
    // rate' = -k·rate - (k/4)·prp + ap,  prp' = rate
    let (r, q) = (state.prp_rate, state.prp);
    let half = 0.5 * h;
    let f_r = -k * r - 0.25 * k * q + ap;
    // (I - h/2·A)·x_{n+1} = (I + h/2·A)·x_n + h·b
    let rhs_r = r + half * f_r + half * ap;
    let rhs_q = q + half * r;
    let a11 = 1.0 + half * k;
    let a12 = half * 0.25 * k;
    let a21 = -half;
    let det = a11 - a12 * a21;
    let r_next = (rhs_r - a12 * rhs_q) / det;
    let q_next = rhs_q + half * r_next;
    let mut next = *state;
    next.prp_rate = r_next;
    next.prp = q_next;
    next.ca_dend = ca_d;
    next
}

/// One Euler step of `dy/dt = tag·prp / τ_y`.
pub fn step_y(state: &PlasticityState, p: &StcParams, dt_ms: f64) -> PlasticityState {
    let mut next = *state;
    next.y += dt_ms * 1e-3 * state.tag * state.prp / p.tau_y;
    next
}

/// Spine calcium driven by `|nmda_current|` held constant over `dt_ms`.
pub fn step_spine_calcium(state: &PlasticityState, p: &StcParams, nmda_current: f64, dt_ms: f64) -> PlasticityState {
    let decay = (-dt_ms / p.spine_ca_tau).exp();
    let target = p.spine_ca_gain * nmda_current.abs() * p.spine_ca_tau;
    let mut next = *state;
    next.ca_spine = crate::synapse::flush_negligible(target + (state.ca_spine - target) * decay);
    next
}

/// Maximal conductance of a plastic synapse scaled by its efficacy factor.
#[inline]
pub fn effective_gmax(base_gmax: f64, z: f64) -> f64 {
    z * base_gmax
}

/// One full plasticity tick of length `dt_ms`: flag from spine calcium, then
/// tag, PRP and `y`. Spine calcium must already be current.
pub fn tick(state: &PlasticityState, p: &StcParams, ca_d: f64, dt_ms: f64) -> PlasticityState {
    let mut s = *state;
    s.flag = Some(flag_of_spine_calcium(s.ca_spine, p));
    s = step_tag(&s, p, dt_ms);
    s = step_prp(&s, p, ca_d, dt_ms);
    s = step_y(&s, p, dt_ms);
    debug_assert!({
        let z = z_of_y(s.y, p);
        (p.z_low..=p.z_high).contains(&z)
    });
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z_OF_ONE: f64 = 2.660_675_237_742_387_8;

    #[test]
    fn z_identities_and_limits() {
        let p = StcParams::default();
        assert_eq!(z_of_y(0.0, &p), 1.0);
        assert!((z_of_y(30.0, &p) - 5.0).abs() < 1e-6);
        assert!((z_of_y(-30.0, &p) - 0.5).abs() < 1e-6);
        assert!((z_of_y(1.0, &p) - Z_OF_ONE).abs() < 1e-14);
        for y in [-500.0, -200.0, 200.0, 500.0] {
            let z = z_of_y(y, &p);
            assert!(z.is_finite() && (0.5..=5.0).contains(&z));
        }
    }

    #[test]
    fn flag_thresholds() {
        let p = StcParams::default();
        assert_eq!(flag_of_spine_calcium(0.05, &p), Flag::Idle);
        assert_eq!(flag_of_spine_calcium(0.15, &p), Flag::Depress);
        assert_eq!(flag_of_spine_calcium(0.25, &p), Flag::Potentiate);
        assert_eq!(flag_of_spine_calcium(0.1, &p), Flag::Depress);
        assert_eq!(flag_of_spine_calcium(0.2, &p), Flag::Depress);
    }

    #[test]
    fn tag_stays_zero_without_flag() {
        let p = StcParams::default();
        let mut s = PlasticityState::default();
        for _ in 0..10_000 {
            s.flag = Some(Flag::Idle);
            s = step_tag(&s, &p, 1.0);
        }
        assert_eq!(s.tag, 0.0);
    }

    #[test]
    fn tag_approaches_half_under_held_flag() {
        let p = StcParams::default();
        // Closed form: tag(t) = ±0.5·(1 - e^{-t}) with α_T + β_T = 1/s.
        for (flag, sign) in [(Flag::Potentiate, 1.0), (Flag::Depress, -1.0)] {
            let mut s = PlasticityState { flag: Some(flag), ..Default::default() };
            for k in 1..=20_000 {
                s = step_tag(&s, &p, 1.0);
                if k % 1000 == 0 {
                    let t = k as f64 * 1e-3;
                    let exact = sign * 0.5 * (1.0 - (-t).exp());
                    assert!((s.tag - exact).abs() < 1e-12);
                }
            }
            assert!((s.tag - sign * 0.5).abs() < 1e-4);
        }
    }

    #[test]
    fn prp_silent_without_dendritic_calcium() {
        let p = StcParams::default();
        let mut s = PlasticityState::default();
        for _ in 0..10_000 {
            s = step_prp(&s, &p, 0.11, 1.0);
        }
        assert_eq!((s.prp, s.prp_rate), (0.0, 0.0));
        assert_eq!(prp_synthesis(0.12, &p), 0.000833);
        assert_eq!(prp_synthesis(0.119, &p), 0.0);
    }

    #[test]
    fn y_examples() {
        let p = StcParams::default();
        let s = PlasticityState { tag: 0.5, prp: 0.0, ..Default::default() };
        assert_eq!(step_y(&s, &p, 1.0).y, 0.0);
        let s = PlasticityState { tag: 0.0, prp: 2.0, ..Default::default() };
        assert_eq!(step_y(&s, &p, 1.0).y, 0.0);
        let mut s = PlasticityState { tag: 0.5, prp: 2.0, ..Default::default() };
        for _ in 0..1000 {
            s = step_y(&s, &p, 1.0);
        }
        assert!((s.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spine_calcium_relaxes_to_steady_state() {
        let p = StcParams::default();
        let mut s = PlasticityState::default();
        assert_eq!(step_spine_calcium(&s, &p, 0.0, 1.0).ca_spine, 0.0);
        let current = -0.002;
        for _ in 0..(7.0 * p.spine_ca_tau) as usize {
            s = step_spine_calcium(&s, &p, current, 1.0);
        }
        let steady = p.spine_ca_gain * 0.002 * p.spine_ca_tau;
        assert!((s.ca_spine - steady).abs() / steady < 0.01);
    }

    #[test]
    fn effective_gmax_examples() {
        assert_eq!(effective_gmax(0.1, 1.0), 0.1);
        assert_eq!(effective_gmax(0.1, 5.0), 0.5);
        assert_eq!(effective_gmax(0.1, 0.5), 0.05);
    }

    #[test]
    fn default_constants() {
        let p = StcParams::default();
        assert_eq!((p.z_low, p.z_high, p.tau_y), (0.5, 5.0, 1.0));
        assert_eq!((p.alpha_tag, p.beta_tag_ltd, p.beta_tag_ltp), (0.5, 0.5, 0.5));
        assert_eq!((p.ca0_spine, p.ca1_spine), (0.1, 0.2));
        assert_eq!((p.alpha_prp, p.tau_prp, p.ca0_dend), (0.000833, 0.5, 0.12));
    }
}
