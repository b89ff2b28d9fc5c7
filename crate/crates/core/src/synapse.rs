//! Receptor conductances and synaptic currents.
//!
//! Conductances follow the second-order linear ODE
//! `τr·τd·g'' + (τr + τd)·g' + g = ḡ·x(t)`, split into the cascade
//! `τr·a' = -a + ḡ·x`, `τd·g' = -g + a` and advanced with its exact
//! propagator, so spike trains superpose exactly. Each presynaptic spike is an
//! impulse scaled so that an isolated spike peaks at `ḡ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extracellular magnesium concentration of the NMDA block.
pub const NMDA_MG: f64 = 1.0;
/// Voltage slope of the NMDA block (1/mV).
pub const NMDA_BETA: f64 = 0.08;
/// Offset of the NMDA block.
pub const NMDA_GAMMA: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceptorKind {
    Ampa,
    Nmda,
    Gaba,
}

impl ReceptorKind {
    /// Reversal potential in mV.
    pub const fn reversal(self) -> f64 {
        match self {
            ReceptorKind::Ampa | ReceptorKind::Nmda => 0.0,
            ReceptorKind::Gaba => -80.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    /// mS/cm²
    pub g_max: f64,
    /// ms
    pub tau_rise: f64,
    /// ms
    pub tau_decay: f64,
}

impl BetaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_rise > 0.0 && self.tau_decay > 0.0) {
            return Err(Error::Config(format!(
                "synaptic time constants must be positive (tau_rise={}, tau_decay={})",
                self.tau_rise, self.tau_decay
            )));
        }
        if !(self.g_max >= 0.0 && self.g_max.is_finite()) {
            return Err(Error::Config(format!("g_max must be non-negative, got {}", self.g_max)));
        }
        Ok(())
    }

    /// Time (ms) at which the unit impulse response peaks.
    pub fn peak_time(&self) -> f64 {
        let (r, d) = (self.tau_rise, self.tau_decay);
        if same_tau(r, d) {
            r
        } else {
            r * d / (d - r) * (d / r).ln()
        }
    }

    /// Response of the ODE to a unit-area impulse at `t = 0`, with `ḡ = 1`.
    pub fn unit_impulse_response(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let (r, d) = (self.tau_rise, self.tau_decay);
        if same_tau(r, d) {
            t / (r * r) * (-t / r).exp()
        } else {
            ((-t / d).exp() - (-t / r).exp()) / (d - r)
        }
    }

    /// Impulse area that makes one isolated spike peak at exactly `ḡ`.
    pub fn spike_weight(&self) -> f64 {
        1.0 / self.unit_impulse_response(self.peak_time())
    }
}

fn same_tau(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.max(b)
}

/// Per-step propagator of the conductance cascade for one parameter set and `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaKernel {
    decay_aux: f64,
    decay_g: f64,
    aux_to_g: f64,
    /// Jump of the auxiliary variable per spike, per unit `ḡ`.
    jump: f64,
}

impl BetaKernel {
    pub fn new(params: &BetaParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let (r, d) = (params.tau_rise, params.tau_decay);
        let er = (-dt / r).exp();
        let ed = (-dt / d).exp();
        let aux_to_g = if same_tau(r, d) {
            dt / r * er
        } else {
            r / (d - r) * (ed - er)
        };
        Ok(Self {
            decay_aux: er,
            decay_g: ed,
            aux_to_g,
            jump: params.spike_weight() / r,
        })
    }

    /// Auxiliary-variable jump caused by one spike at unit `ḡ`.
    #[inline]
    pub fn jump_per_unit(&self) -> f64 {
        self.jump
    }

    /// Advances `(g, aux)` by one step. `drive` is the number of spikes arriving
    /// this step times the conductance scale they carry.
    #[inline]
    pub fn advance(&self, g: &mut f64, aux: &mut f64, drive: f64) {
        let a = *aux + drive * self.jump;
        *g = flush_negligible(*g * self.decay_g + a * self.aux_to_g);
        *aux = flush_negligible(a * self.decay_aux);
    }
}

/// Magnitude below which decaying quantities are set to exactly zero.
/// Without it they settle on subnormal floats, which a decay factor close to
/// one cannot shrink further and which are very slow to compute with.
pub const NEGLIGIBLE: f64 = 1e-30;

#[inline]
pub fn flush_negligible(x: f64) -> f64 {
    if x.abs() < NEGLIGIBLE {
        0.0
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductanceState {
    /// mS/cm²
    pub g: f64,
    /// Auxiliary first-order variable of the cascade (mS/cm²).
    pub g_aux: f64,
    pub params: BetaParams,
}

impl ConductanceState {
    pub fn new(params: BetaParams) -> Self {
        Self {
            g: 0.0,
            g_aux: 0.0,
            params,
        }
    }
}

/// Advances one conductance by `dt`; `spike` marks a presynaptic spike arriving
/// at the start of the step.
pub fn step_conductance(cs: &ConductanceState, dt: f64, spike: bool) -> Result<ConductanceState> {
    let kernel = BetaKernel::new(&cs.params, dt)?;
    let mut next = *cs;
    let drive = if spike { cs.params.g_max } else { 0.0 };
    kernel.advance(&mut next.g, &mut next.g_aux, drive);
    Ok(next)
}

/// Ligand-gated current `g·(V - E)`, outward positive (µA/cm²).
#[inline]
pub fn ligand_current(g: f64, v_m: f64, e_syn: f64) -> f64 {
    g * (v_m - e_syn)
}

/// Magnesium unblock factor of the NMDA receptor.
#[inline]
pub fn nmda_unblock(v_m: f64) -> f64 {
    1.0 / (1.0 + NMDA_MG * (-NMDA_BETA * v_m + NMDA_GAMMA).exp())
}

#[inline]
pub fn nmda_current(g: f64, v_m: f64, e_syn: f64) -> f64 {
    g * nmda_unblock(v_m) * (v_m - e_syn)
}

/// Connection classes of the integration network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConnectionClass {
    /// VF → AVI
    S1,
    /// AF → AVI
    S2,
    /// AVI → INB
    S3,
    /// INB → AVI
    S4,
}

impl ConnectionClass {
    pub const ALL: [ConnectionClass; 4] = [Self::S1, Self::S2, Self::S3, Self::S4];
}

/// One row of the synapse parameter table. `None` means the receptor is not
/// present on that connection class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynapseRow {
    pub g_ampa: Option<f64>,
    pub g_nmda: Option<f64>,
    pub g_gaba: Option<f64>,
    pub tau_rise: f64,
    pub tau_decay: f64,
}

impl Default for SynapseRow {
    fn default() -> Self {
        Self {
            g_ampa: None,
            g_nmda: None,
            g_gaba: None,
            tau_rise: 2.0,
            tau_decay: 2.0,
        }
    }
}

impl SynapseRow {
    pub fn receptor(&self, kind: ReceptorKind) -> Option<BetaParams> {
        let g = match kind {
            ReceptorKind::Ampa => self.g_ampa,
            ReceptorKind::Nmda => self.g_nmda,
            ReceptorKind::Gaba => self.g_gaba,
        }?;
        Some(BetaParams {
            g_max: g,
            tau_rise: self.tau_rise,
            tau_decay: self.tau_decay,
        })
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        for kind in [ReceptorKind::Ampa, ReceptorKind::Nmda, ReceptorKind::Gaba] {
            if let Some(p) = self.receptor(kind) {
                p.validate().map_err(|e| Error::Config(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Receptor parameters for the four connection classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynapseTable {
    pub s1: SynapseRow,
    pub s2: SynapseRow,
    pub s3: SynapseRow,
    pub s4: SynapseRow,
}

impl Default for SynapseTable {
    fn default() -> Self {
        Self {
            s1: SynapseRow {
                g_ampa: Some(0.1),
                g_nmda: Some(0.1),
                g_gaba: None,
                tau_rise: 5.0,
                tau_decay: 100.0,
            },
            s2: SynapseRow {
                g_ampa: Some(1.0),
                tau_rise: 2.0,
                tau_decay: 2.0,
                ..SynapseRow::default()
            },
            s3: SynapseRow {
                g_ampa: Some(0.01),
                tau_rise: 2.0,
                tau_decay: 2.0,
                ..SynapseRow::default()
            },
            s4: SynapseRow {
                g_gaba: Some(0.0002),
                tau_rise: 5.0,
                tau_decay: 100.0,
                ..SynapseRow::default()
            },
        }
    }
}

impl SynapseTable {
    pub fn row(&self, class: ConnectionClass) -> &SynapseRow {
        match class {
            ConnectionClass::S1 => &self.s1,
            ConnectionClass::S2 => &self.s2,
            ConnectionClass::S3 => &self.s3,
            ConnectionClass::S4 => &self.s4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for class in ConnectionClass::ALL {
            self.row(class).validate(&format!("{class:?}"))?;
        }
        Ok(())
    }
}
