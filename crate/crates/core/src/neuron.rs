//! Membrane dynamics for the two neuron classes of the integration network.
//!
//! The pyramidal cell has a soma and a dendrite, each carrying leak, fast
//! sodium, delayed-rectifier potassium, high-threshold calcium and a
//! calcium-activated AHP potassium current, coupled through `g_ds` / `g_sd`.
//! Kinetics are Traub-style. The interneuron is a single fast-spiking
//! compartment with Wang-Buzsaki kinetics.
//!
//! Each step first advances the gating variables by exponential Euler at the
//! old voltage, then takes forward Euler steps for voltage and calcium using
//! the new gates. The staggering makes spike timing close to second order in
//! `dt` at no extra cost.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Default membrane integration step (ms).
pub const DEFAULT_DT: f64 = 0.025;
/// Default spike detection threshold (mV).
pub const SPIKE_THRESHOLD: f64 = 0.0;

/// `x / (1 - exp(-x / k))`, continuous through `x = 0`.
#[inline]
fn linoid(x: f64, k: f64) -> f64 {
    let u = x / k;
    if u.abs() < 1e-6 {
        k * (1.0 + 0.5 * u)
    } else {
        x / (1.0 - (-u).exp())
    }
}

/// Channel densities and reversal potentials of one pyramidal compartment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompartmentChannels {
    /// mS/cm²
    pub g_na: f64,
    pub g_k: f64,
    pub g_leak: f64,
    pub g_ca: f64,
    pub g_ahp: f64,
    /// mV
    pub e_na: f64,
    pub e_k: f64,
    pub e_leak: f64,
    pub e_ca: f64,
    /// Calcium per unit inward calcium current per ms.
    pub ca_gain: f64,
    /// ms
    pub tau_ca: f64,
    /// Calcium level at which the AHP conductance is half activated.
    pub ahp_half_ca: f64,
}

impl CompartmentChannels {
    pub fn soma() -> Self {
        Self {
            g_na: 100.0,
            g_k: 80.0,
            g_leak: 0.1,
            g_ca: 1.0,
            g_ahp: 0.5,
            e_na: 50.0,
            e_k: -100.0,
            e_leak: -67.0,
            e_ca: 120.0,
            ca_gain: 0.002,
            tau_ca: 80.0,
            ahp_half_ca: 1.0,
        }
    }

    pub fn dendrite() -> Self {
        Self {
            g_na: 20.0,
            g_k: 16.0,
            g_ca: 2.0,
            ca_gain: 0.0002,
            ..Self::soma()
        }
    }

    fn validate(&self, which: &str) -> Result<()> {
        let positive = [
            ("g_leak", self.g_leak),
            ("tau_ca", self.tau_ca),
            ("ahp_half_ca", self.ahp_half_ca),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{which}.{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("g_na", self.g_na),
            ("g_k", self.g_k),
            ("g_ca", self.g_ca),
            ("g_ahp", self.g_ahp),
            ("ca_gain", self.ca_gain),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{which}.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for CompartmentChannels {
    fn default() -> Self {
        Self::soma()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PyramidalParams {
    /// µF/cm²
    pub c_m: f64,
    /// Dendrite-to-soma coupling seen by the soma.
    pub g_ds: f64,
    /// Soma-to-dendrite coupling seen by the dendrite.
    pub g_sd: f64,
    pub soma: CompartmentChannels,
    pub dendrite: CompartmentChannels,
}

impl Default for PyramidalParams {
    fn default() -> Self {
        Self {
            c_m: 3.4,
            g_ds: 0.11,
            g_sd: 0.33,
            soma: CompartmentChannels::soma(),
            dendrite: CompartmentChannels::dendrite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterneuronParams {
    /// µF/cm²
    pub c_m: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub g_leak: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_leak: f64,
    /// Temperature factor on the h and n kinetics.
    pub phi: f64,
}

impl Default for InterneuronParams {
    fn default() -> Self {
        Self {
            c_m: 1.0,
            g_na: 35.0,
            g_k: 9.0,
            g_leak: 0.1,
            e_na: 55.0,
            e_k: -90.0,
            e_leak: -65.0,
            phi: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuronParams {
    pub pyramidal: PyramidalParams,
    pub interneuron: InterneuronParams,
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let p = &self.pyramidal;
        for (name, v) in [("c_m", p.c_m), ("g_ds", p.g_ds), ("g_sd", p.g_sd)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("pyramidal.{name} must be positive, got {v}")));
            }
        }
        p.soma.validate("pyramidal.soma")?;
        p.dendrite.validate("pyramidal.dendrite")?;
        let i = &self.interneuron;
        for (name, v) in [
            ("c_m", i.c_m),
            ("g_leak", i.g_leak),
            ("phi", i.phi),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("interneuron.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("g_na", i.g_na), ("g_k", i.g_k)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("interneuron.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Na activation, Na inactivation and K activation of one compartment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub m: f64,
    pub h: f64,
    pub n: f64,
}

impl Gates {
    fn in_unit_interval(&self) -> bool {
        [self.m, self.h, self.n].iter().all(|x| (0.0..=1.0).contains(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidalState {
    pub v_soma: f64,
    pub v_dend: f64,
    pub soma_gates: Gates,
    pub dend_gates: Gates,
    pub ca_soma: f64,
    pub ca_dend: f64,
    pub last_spike_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterneuronState {
    pub v: f64,
    pub h: f64,
    pub n: f64,
    pub last_spike_time: Option<f64>,
}

mod traub {
    use super::linoid;

    #[inline]
    pub fn alpha_m(v: f64) -> f64 {
        0.32 * linoid(v + 54.0, 4.0)
    }
    #[inline]
    pub fn beta_m(v: f64) -> f64 {
        0.28 * linoid(-(v + 27.0), 5.0)
    }
    #[inline]
    pub fn alpha_h(v: f64) -> f64 {
        0.128 * (-(v + 50.0) / 18.0).exp()
    }
    #[inline]
    pub fn beta_h(v: f64) -> f64 {
        4.0 / (1.0 + (-(v + 27.0) / 5.0).exp())
    }
    #[inline]
    pub fn alpha_n(v: f64) -> f64 {
        0.032 * linoid(v + 52.0, 5.0)
    }
    #[inline]
    pub fn beta_n(v: f64) -> f64 {
        0.5 * (-(v + 57.0) / 40.0).exp()
    }
    /// Instantaneous high-threshold calcium activation.
    #[inline]
    pub fn ca_inf(v: f64) -> f64 {
        1.0 / (1.0 + (-(v + 25.0) / 2.5).exp())
    }
}

mod wang_buzsaki {
    use super::linoid;

    #[inline]
    pub fn m_inf(v: f64) -> f64 {
        let a = 0.1 * linoid(v + 35.0, 10.0);
        let b = 4.0 * (-(v + 60.0) / 18.0).exp();
        a / (a + b)
    }
    #[inline]
    pub fn alpha_h(v: f64) -> f64 {
        0.07 * (-(v + 58.0) / 20.0).exp()
    }
    #[inline]
    pub fn beta_h(v: f64) -> f64 {
        1.0 / ((-(v + 28.0) / 10.0).exp() + 1.0)
    }
    #[inline]
    pub fn alpha_n(v: f64) -> f64 {
        0.01 * linoid(v + 34.0, 10.0)
    }
    #[inline]
    pub fn beta_n(v: f64) -> f64 {
        0.125 * (-(v + 44.0) / 80.0).exp()
    }
}

/// Voltage-dependent coefficients of one pyramidal compartment for a fixed
/// `dt`: `(inf, decay)` pairs for m, h, n, then the calcium activation.
type TraubRow = [f64; 7];
/// Interneuron coefficients: m∞, then `(inf, decay)` for h and n.
type WbRow = [f64; 5];

#[inline]
fn gate_pair(a: f64, b: f64, dt: f64) -> (f64, f64) {
    let k = a + b;
    (a / k, (-dt * k).exp())
}

fn traub_row(v: f64, dt: f64) -> TraubRow {
    let (mi, md) = gate_pair(traub::alpha_m(v), traub::beta_m(v), dt);
    let (hi, hd) = gate_pair(traub::alpha_h(v), traub::beta_h(v), dt);
    let (ni, nd) = gate_pair(traub::alpha_n(v), traub::beta_n(v), dt);
    [mi, md, hi, hd, ni, nd, traub::ca_inf(v)]
}

fn wb_row(v: f64, dt: f64, phi: f64) -> WbRow {
    let (hi, hd) = gate_pair(phi * wang_buzsaki::alpha_h(v), phi * wang_buzsaki::beta_h(v), dt);
    let (ni, nd) = gate_pair(phi * wang_buzsaki::alpha_n(v), phi * wang_buzsaki::beta_n(v), dt);
    [wang_buzsaki::m_inf(v), hi, hd, ni, nd]
}

/// Rows tabulated on a uniform voltage grid, linearly interpolated.
#[derive(Debug, Clone)]
struct VoltageTable<const N: usize> {
    v_min: f64,
    inv_step: f64,
    rows: Vec<[f64; N]>,
}

const TABLE_V_MIN: f64 = -150.0;
const TABLE_V_MAX: f64 = 100.0;
const TABLE_STEP: f64 = 0.05;

impl<const N: usize> VoltageTable<N> {
    fn build(f: impl Fn(f64) -> [f64; N]) -> Self {
        let n = ((TABLE_V_MAX - TABLE_V_MIN) / TABLE_STEP).round() as usize + 1;
        let rows = (0..n).map(|i| f(TABLE_V_MIN + i as f64 * TABLE_STEP)).collect();
        Self {
            v_min: TABLE_V_MIN,
            inv_step: 1.0 / TABLE_STEP,
            rows,
        }
    }

    #[inline]
    fn lookup(&self, v: f64) -> Option<[f64; N]> {
        let x = (v - self.v_min) * self.inv_step;
        if !(x >= 0.0 && x < (self.rows.len() - 1) as f64) {
            return None;
        }
        let i = x as usize;
        let frac = x - i as f64;
        let (lo, hi) = (&self.rows[i], &self.rows[i + 1]);
        let mut out = [0.0; N];
        for k in 0..N {
            out[k] = lo[k] + frac * (hi[k] - lo[k]);
        }
        Some(out)
    }
}

/// Precomputed gate kinetics for one `dt`, used by the network event loop in
/// place of evaluating the rate functions every step.
#[derive(Debug, Clone)]
pub struct KineticsTable {
    dt: f64,
    phi: f64,
    traub: VoltageTable<7>,
    wb: VoltageTable<5>,
}

impl KineticsTable {
    pub fn new(params: &NeuronParams, dt: f64) -> Self {
        let phi = params.interneuron.phi;
        Self {
            dt,
            phi,
            traub: VoltageTable::build(|v| traub_row(v, dt)),
            wb: VoltageTable::build(|v| wb_row(v, dt, phi)),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    fn traub(&self, v: f64) -> TraubRow {
        self.traub.lookup(v).unwrap_or_else(|| traub_row(v, self.dt))
    }

    #[inline]
    fn wb(&self, v: f64) -> WbRow {
        self.wb.lookup(v).unwrap_or_else(|| wb_row(v, self.dt, self.phi))
    }
}

/// Ionic current (outward positive) and calcium influx of one compartment.
#[inline]
fn compartment_currents(ch: &CompartmentChannels, v: f64, g: &Gates, ca: f64, ca_act: f64) -> (f64, f64) {
    let m3 = g.m * g.m * g.m;
    let n2 = g.n * g.n;
    let i_na = ch.g_na * m3 * g.h * (v - ch.e_na);
    let i_k = ch.g_k * n2 * n2 * (v - ch.e_k);
    let i_leak = ch.g_leak * (v - ch.e_leak);
    let i_ca = ch.g_ca * ca_act * (v - ch.e_ca);
    let i_ahp = ch.g_ahp * (ca / (ca + ch.ahp_half_ca)) * (v - ch.e_k);
    (i_na + i_k + i_leak + i_ca + i_ahp, -i_ca)
}

#[inline]
fn advance_gates(g: &Gates, row: &TraubRow) -> Gates {
    Gates {
        m: row[0] + (g.m - row[0]) * row[1],
        h: row[2] + (g.h - row[2]) * row[3],
        n: row[4] + (g.n - row[4]) * row[5],
    }
}

fn steady_gates(v: f64) -> Gates {
    let inf = |a: f64, b: f64| a / (a + b);
    Gates {
        m: inf(traub::alpha_m(v), traub::beta_m(v)),
        h: inf(traub::alpha_h(v), traub::beta_h(v)),
        n: inf(traub::alpha_n(v), traub::beta_n(v)),
    }
}

impl PyramidalState {
    /// Resting equilibrium of the cell under zero input, found by relaxation.
    pub fn resting(params: &PyramidalParams) -> Self {
        let v0 = params.soma.e_leak;
        let mut s = Self {
            v_soma: v0,
            v_dend: params.dendrite.e_leak,
            soma_gates: steady_gates(v0),
            dend_gates: steady_gates(params.dendrite.e_leak),
            ca_soma: 0.0,
            ca_dend: 0.0,
            last_spike_time: None,
        };
        let dt = DEFAULT_DT;
        // 4 s covers many multiples of the slowest (calcium) time constant.
        for _ in 0..(4000.0 / dt) as usize {
            s.advance(params, dt, 0.0, 0.0);
        }
        s
    }

    pub fn gating(&self) -> [f64; 6] {
        let (a, b) = (self.soma_gates, self.dend_gates);
        [a.m, a.h, a.n, b.m, b.h, b.n]
    }

    /// In-place step evaluating the rate functions directly; callers are
    /// responsible for finiteness checks.
    #[inline]
    pub fn advance(&mut self, p: &PyramidalParams, dt: f64, i_syn_soma: f64, i_syn_dend: f64) {
        let rows = (traub_row(self.v_soma, dt), traub_row(self.v_dend, dt));
        self.advance_rows(p, dt, rows, i_syn_soma, i_syn_dend);
    }

    /// As [`advance`](Self::advance) with tabulated kinetics.
    #[inline]
    pub fn advance_tabulated(&mut self, p: &PyramidalParams, k: &KineticsTable, i_syn_soma: f64, i_syn_dend: f64) {
        let rows = (k.traub(self.v_soma), k.traub(self.v_dend));
        self.advance_rows(p, k.dt, rows, i_syn_soma, i_syn_dend);
    }

    #[inline]
    fn advance_rows(&mut self, p: &PyramidalParams, dt: f64, rows: (TraubRow, TraubRow), i_syn_soma: f64, i_syn_dend: f64) {
        let (vs, vd) = (self.v_soma, self.v_dend);
        let (rs, rd) = rows;
        self.soma_gates = advance_gates(&self.soma_gates, &rs);
        self.dend_gates = advance_gates(&self.dend_gates, &rd);

        let (ion_s, influx_s) = compartment_currents(&p.soma, vs, &self.soma_gates, self.ca_soma, rs[6]);
        let (ion_d, influx_d) = compartment_currents(&p.dendrite, vd, &self.dend_gates, self.ca_dend, rd[6]);
        let dvs = (-ion_s - p.g_ds * (vs - vd) + i_syn_soma) / p.c_m;
        let dvd = (-ion_d - p.g_sd * (vd - vs) + i_syn_dend) / p.c_m;

        self.ca_soma += dt * (p.soma.ca_gain * influx_s - self.ca_soma / p.soma.tau_ca);
        self.ca_dend += dt * (p.dendrite.ca_gain * influx_d - self.ca_dend / p.dendrite.tau_ca);
        self.v_soma = vs + dt * dvs;
        self.v_dend = vd + dt * dvd;

        debug_assert!(self.soma_gates.in_unit_interval() && self.dend_gates.in_unit_interval());
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite(|| "soma voltage".into(), self.v_soma)?;
        ensure_finite(|| "dendrite voltage".into(), self.v_dend)?;
        ensure_finite(|| "soma calcium".into(), self.ca_soma)?;
        ensure_finite(|| "dendrite calcium".into(), self.ca_dend)?;
        for (i, g) in self.gating().into_iter().enumerate() {
            ensure_finite(|| format!("gating variable {i}"), g)?;
        }
        Ok(())
    }
}

/// Advances a pyramidal cell by `dt` ms. Synaptic currents are injected
/// (positive depolarizes) into the named compartment.
pub fn step_pyramidal(
    state: &PyramidalState,
    params: &NeuronParams,
    dt: f64,
    i_syn_soma: f64,
    i_syn_dend: f64,
) -> Result<PyramidalState> {
    check_dt(dt)?;
    ensure_finite(|| "somatic synaptic current".into(), i_syn_soma)?;
    ensure_finite(|| "dendritic synaptic current".into(), i_syn_dend)?;
    state.check_finite()?;
    let mut next = *state;
    next.advance(&params.pyramidal, dt, i_syn_soma, i_syn_dend);
    next.check_finite()?;
    Ok(next)
}

impl InterneuronState {
    pub fn resting(params: &InterneuronParams) -> Self {
        let v = params.e_leak;
        let mut s = Self {
            v,
            h: wang_buzsaki::alpha_h(v) / (wang_buzsaki::alpha_h(v) + wang_buzsaki::beta_h(v)),
            n: wang_buzsaki::alpha_n(v) / (wang_buzsaki::alpha_n(v) + wang_buzsaki::beta_n(v)),
            last_spike_time: None,
        };
        for _ in 0..(2000.0 / DEFAULT_DT) as usize {
            s.advance(params, DEFAULT_DT, 0.0);
        }
        s
    }

    pub fn gating(&self) -> [f64; 2] {
        [self.h, self.n]
    }

    #[inline]
    pub fn advance(&mut self, p: &InterneuronParams, dt: f64, i_syn: f64) {
        let row = wb_row(self.v, dt, p.phi);
        self.advance_row(p, dt, row, i_syn);
    }

    #[inline]
    pub fn advance_tabulated(&mut self, p: &InterneuronParams, k: &KineticsTable, i_syn: f64) {
        let row = k.wb(self.v);
        self.advance_row(p, k.dt, row, i_syn);
    }

    #[inline]
    fn advance_row(&mut self, p: &InterneuronParams, dt: f64, row: WbRow, i_syn: f64) {
        let v = self.v;
        self.h = row[1] + (self.h - row[1]) * row[2];
        self.n = row[3] + (self.n - row[3]) * row[4];

        let m = row[0];
        let n2 = self.n * self.n;
        let i_na = p.g_na * m * m * m * self.h * (v - p.e_na);
        let i_k = p.g_k * n2 * n2 * (v - p.e_k);
        let i_leak = p.g_leak * (v - p.e_leak);
        let dv = (-i_leak - i_na - i_k + i_syn) / p.c_m;
        self.v = v + dt * dv;
        debug_assert!((0.0..=1.0).contains(&self.h) && (0.0..=1.0).contains(&self.n));
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite(|| "interneuron voltage".into(), self.v)?;
        ensure_finite(|| "interneuron h".into(), self.h)?;
        ensure_finite(|| "interneuron n".into(), self.n)?;
        Ok(())
    }
}

pub fn step_interneuron(
    state: &InterneuronState,
    params: &NeuronParams,
    dt: f64,
    i_syn: f64,
) -> Result<InterneuronState> {
    check_dt(dt)?;
    ensure_finite(|| "interneuron synaptic current".into(), i_syn)?;
    state.check_finite()?;
    let mut next = *state;
    next.advance(&params.interneuron, dt, i_syn);
    next.check_finite()?;
    Ok(next)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= 0.1 {
        Ok(())
    } else {
        Err(Error::Config(format!("membrane dt must lie in (0, 0.1] ms, got {dt}")))
    }
}

/// Upward crossing of `threshold` between two consecutive samples.
#[inline]
pub fn detect_spike(v_prev: f64, v_now: f64, threshold: f64) -> bool {
    v_prev < threshold && threshold <= v_now
}
