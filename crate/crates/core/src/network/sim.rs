use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::topology::NetworkTopology;
use crate::encoding::PoissonLayer;
use crate::error::{ensure_finite, Error, Result};
use crate::neuron::{detect_spike, InterneuronState, KineticsTable, NeuronParams, PyramidalState, DEFAULT_DT, SPIKE_THRESHOLD};
use crate::stc::{self, PlasticityState, StcParams};
use crate::synapse::{nmda_unblock, BetaKernel, ConnectionClass, ReceptorKind, SynapseTable};

/// Everything needed to turn a topology into a runnable network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkParams {
    pub neuron: NeuronParams,
    pub synapses: SynapseTable,
    pub stc: StcParams,
    /// Membrane integration step (ms).
    pub dt: f64,
    /// Interval between plasticity updates (ms).
    pub plasticity_tick_ms: f64,
    /// When set, record `(t, synapse, y, z, tag, prp)` every this many ms.
    pub trace_interval_ms: Option<f64>,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            neuron: NeuronParams::default(),
            synapses: SynapseTable::default(),
            stc: StcParams::default(),
            dt: DEFAULT_DT,
            plasticity_tick_ms: 1.0,
            trace_interval_ms: None,
        }
    }
}

fn steps_per(interval_ms: f64, dt: f64, what: &str) -> Result<u64> {
    let n = (interval_ms / dt).round();
    if n < 1.0 || ((n * dt) - interval_ms).abs() > 1e-9 * interval_ms.max(1.0) {
        return Err(Error::Config(format!(
            "{what} ({interval_ms} ms) must be a positive multiple of dt ({dt} ms)"
        )));
    }
    Ok(n as u64)
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::Config(format!("dt must lie in (0, 0.1] ms, got {}", self.dt)));
        }
        self.neuron.validate()?;
        self.synapses.validate()?;
        self.stc.validate()?;
        steps_per(self.plasticity_tick_ms, self.dt, "plasticity tick")?;
        if let Some(t) = self.trace_interval_ms {
            let tick = steps_per(self.plasticity_tick_ms, self.dt, "plasticity tick")?;
            if steps_per(t, self.dt, "trace interval")? % tick != 0 {
                return Err(Error::Config("trace interval must be a multiple of the plasticity tick".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    Vf,
    Af,
    Avi,
    Inb,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Vf => "VF",
            Layer::Af => "AF",
            Layer::Avi => "AVI",
            Layer::Inb => "INB",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub time_ms: f64,
    pub layer: Layer,
    pub index: u32,
}

/// One plastic VF→AVI synapse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticSynapse {
    pub pre: u32,
    pub post: u32,
    /// Unit-`ḡ` conductance trace shared by the AMPA and NMDA receptors.
    pub unit: f64,
    pub unit_aux: f64,
    pub z: f64,
    pub plasticity: PlasticityState,
    /// ∫|I_NMDA| dt over the current plasticity tick (µA/cm²·ms).
    nmda_charge: f64,
}

/// Summed conductance of all fixed synapses of one class onto one neuron.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PooledConductance {
    pub g: f64,
    pub aux: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time_ms: f64,
    pub synapse: u32,
    pub y: f64,
    pub z: f64,
    pub tag: f64,
    pub prp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    /// Membrane steps taken so far; the clock is `step · dt`.
    pub step: u64,
    pub dt: f64,
    pub avi: Vec<PyramidalState>,
    pub inb: Vec<InterneuronState>,
    /// Sorted by `(post, pre)`.
    pub s1: Vec<PlasticSynapse>,
    /// AF→AVI, one pool per AVI neuron.
    pub s2: Vec<PooledConductance>,
    /// AVI→INB, one pool per INB neuron.
    pub s3: Vec<PooledConductance>,
    /// INB→AVI, one pool per AVI neuron.
    pub s4: Vec<PooledConductance>,
    avi_fired: Vec<bool>,
    inb_fired: Vec<bool>,
    pub spike_log: Vec<SpikeEvent>,
    pub plasticity_trace: Vec<TraceRow>,
}

impl SimulationState {
    pub fn clock_ms(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn z_values(&self) -> Vec<f64> {
        self.s1.iter().map(|s| s.z).collect()
    }

    /// Number of spikes of `layer` in `[t0, t1)`.
    pub fn spike_count(&self, layer: Layer, t0: f64, t1: f64) -> usize {
        self.events_in(t0, t1).iter().filter(|e| e.layer == layer).count()
    }

    fn events_in(&self, t0: f64, t1: f64) -> &[SpikeEvent] {
        let lo = self.spike_log.partition_point(|e| e.time_ms < t0);
        let hi = self.spike_log.partition_point(|e| e.time_ms < t1);
        &self.spike_log[lo..hi]
    }

    /// Writes the spike log as `time_ms neuron_layer neuron_index` lines.
    pub fn write_spike_log(&self, path: &Path) -> Result<()> {
        let mut out = String::from("time_ms neuron_layer neuron_index\n");
        for e in &self.spike_log {
            let _ = writeln!(out, "{} {} {}", e.time_ms, e.layer, e.index);
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes the plasticity trace as `time_ms synapse y z tag prp` columns.
    pub fn write_plasticity_trace(&self, path: &Path) -> Result<()> {
        let mut out = String::from("time_ms synapse y z tag prp\n");
        for r in &self.plasticity_trace {
            let _ = writeln!(out, "{} {} {} {} {} {}", r.time_ms, r.synapse, r.y, r.z, r.tag, r.prp);
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Copy of the dynamic state with empty logs.
    pub fn clone_without_logs(&self) -> Self {
        Self {
            step: self.step,
            dt: self.dt,
            avi: self.avi.clone(),
            inb: self.inb.clone(),
            s1: self.s1.clone(),
            s2: self.s2.clone(),
            s3: self.s3.clone(),
            s4: self.s4.clone(),
            avi_fired: self.avi_fired.clone(),
            inb_fired: self.inb_fired.clone(),
            spike_log: Vec::new(),
            plasticity_trace: Vec::new(),
        }
    }

    /// Clears the spike log and plasticity trace, keeping all dynamic state.
    pub fn clear_logs(&mut self) {
        self.spike_log.clear();
        self.plasticity_trace.clear();
    }
}

/// Firing rates (Hz) of the AVI layer over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AviPattern(pub Vec<f64>);

impl AsRef<[f64]> for AviPattern {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `rate_i` = spikes of AVI neuron `i` in `[t0, t1)` divided by the window in seconds.
pub fn measure_avi_pattern(state: &SimulationState, n_av: usize, t0: f64, t1: f64) -> Result<AviPattern> {
    if !(t1 > t0) {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    let mut counts = vec![0.0; n_av];
    for e in state.events_in(t0, t1) {
        if e.layer == Layer::Avi {
            counts[e.index as usize] += 1.0;
        }
    }
    let seconds = (t1 - t0) / 1000.0;
    Ok(AviPattern(counts.into_iter().map(|c| c / seconds).collect()))
}

/// Input applied during one call to [`Simulator::simulate`]. `None` leaves a
/// layer silent.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stimulus<'a> {
    pub vf: Option<&'a [f64]>,
    pub af: Option<&'a [f64]>,
    /// Seed of the Poisson streams for this presentation.
    pub seed: u64,
}

impl Stimulus<'_> {
    pub fn silent() -> Self {
        Self::default()
    }
}

/// Compiled network: topology plus per-class propagators and adjacency.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub topology: NetworkTopology,
    pub params: NetworkParams,
    kernel_s1: BetaKernel,
    kernel_s2: BetaKernel,
    kernel_s3: BetaKernel,
    kernel_s4: BetaKernel,
    g_ampa_s1: f64,
    g_nmda_s1: f64,
    g_s2: f64,
    g_s3: f64,
    g_s4: f64,
    /// Postsynaptic targets of each presynaptic neuron, per fixed class.
    af_targets: Vec<Vec<u32>>,
    avi_targets: Vec<Vec<u32>>,
    inb_targets: Vec<Vec<u32>>,
    /// `s1_by_pre[j]` lists indices into `SimulationState::s1` whose pre is `j`.
    s1_by_pre: Vec<Vec<u32>>,
    kinetics: KineticsTable,
    tick_steps: u64,
    trace_steps: Option<u64>,
}

fn targets(topo: &NetworkTopology, class: ConnectionClass) -> Vec<Vec<u32>> {
    let (n_pre, _) = NetworkTopology::endpoints(&topo.sizes, class);
    let mut t = vec![Vec::new(); n_pre];
    for &(pre, post) in &topo.projection(class).edges {
        t[pre as usize].push(post);
    }
    t
}

impl Simulator {
    pub fn new(topology: NetworkTopology, params: NetworkParams) -> Result<Self> {
        params.validate()?;
        let dt = params.dt;
        let tab = &params.synapses;
        let kernel = |class: ConnectionClass, kind: ReceptorKind| -> Result<(BetaKernel, f64)> {
            match tab.row(class).receptor(kind) {
                Some(p) => Ok((BetaKernel::new(&p, dt)?, p.g_max)),
                None => Ok((BetaKernel::new(&crate::synapse::BetaParams { g_max: 0.0, tau_rise: 1.0, tau_decay: 1.0 }, dt)?, 0.0)),
            }
        };
        let (kernel_s1, g_ampa_s1) = kernel(ConnectionClass::S1, ReceptorKind::Ampa)?;
        let g_nmda_s1 = tab.s1.g_nmda.unwrap_or(0.0);
        let (kernel_s2, g_s2) = kernel(ConnectionClass::S2, ReceptorKind::Ampa)?;
        let (kernel_s3, g_s3) = kernel(ConnectionClass::S3, ReceptorKind::Ampa)?;
        let (kernel_s4, g_s4) = kernel(ConnectionClass::S4, ReceptorKind::Gaba)?;

        let s1_edges = sorted_s1(&topology);
        let mut s1_by_pre = vec![Vec::new(); topology.sizes.n_v];
        for (k, &(pre, _)) in s1_edges.iter().enumerate() {
            s1_by_pre[pre as usize].push(k as u32);
        }
        let tick_steps = steps_per(params.plasticity_tick_ms, dt, "plasticity tick")?;
        let trace_steps = params
            .trace_interval_ms
            .map(|t| steps_per(t, dt, "trace interval"))
            .transpose()?;
        Ok(Self {
            kinetics: KineticsTable::new(&params.neuron, dt),
            af_targets: targets(&topology, ConnectionClass::S2),
            avi_targets: targets(&topology, ConnectionClass::S3),
            inb_targets: targets(&topology, ConnectionClass::S4),
            s1_by_pre,
            topology,
            params,
            kernel_s1,
            kernel_s2,
            kernel_s3,
            kernel_s4,
            g_ampa_s1,
            g_nmda_s1,
            g_s2,
            g_s3,
            g_s4,
            tick_steps,
            trace_steps,
        })
    }

    /// Network at rest with all plastic synapses at baseline (`z = 1`).
    pub fn initial_state(&self) -> SimulationState {
        let sizes = self.topology.sizes;
        let avi_rest = PyramidalState::resting(&self.params.neuron.pyramidal);
        let inb_rest = InterneuronState::resting(&self.params.neuron.interneuron);
        let s1 = sorted_s1(&self.topology)
            .into_iter()
            .map(|(pre, post)| PlasticSynapse {
                pre,
                post,
                unit: 0.0,
                unit_aux: 0.0,
                z: 1.0,
                plasticity: PlasticityState::default(),
                nmda_charge: 0.0,
            })
            .collect();
        SimulationState {
            step: 0,
            dt: self.params.dt,
            avi: vec![avi_rest; sizes.n_av],
            inb: vec![inb_rest; sizes.n_i],
            s1,
            s2: vec![PooledConductance::default(); sizes.n_av],
            s3: vec![PooledConductance::default(); sizes.n_i],
            s4: vec![PooledConductance::default(); sizes.n_av],
            avi_fired: vec![false; sizes.n_av],
            inb_fired: vec![false; sizes.n_i],
            spike_log: Vec::new(),
            plasticity_trace: Vec::new(),
        }
    }

    /// Returns membranes and conductances to rest without touching plasticity.
    pub fn reset_dynamics(&self, state: &mut SimulationState) {
        let fresh = self.initial_state();
        state.avi = fresh.avi;
        state.inb = fresh.inb;
        state.s2 = fresh.s2;
        state.s3 = fresh.s3;
        state.s4 = fresh.s4;
        state.avi_fired = fresh.avi_fired;
        state.inb_fired = fresh.inb_fired;
        for s in &mut state.s1 {
            s.unit = 0.0;
            s.unit_aux = 0.0;
            s.nmda_charge = 0.0;
        }
    }

    /// Advances the whole network by `duration_ms`.
    pub fn simulate(
        &self,
        state: &mut SimulationState,
        stimulus: &Stimulus<'_>,
        duration_ms: f64,
        plasticity_on: bool,
    ) -> Result<()> {
        let sizes = self.topology.sizes;
        let dt = self.params.dt;
        if state.dt != dt {
            return Err(Error::Config(format!("state dt {} differs from network dt {dt}", state.dt)));
        }
        let mut vf = match stimulus.vf {
            Some(v) if v.len() != sizes.n_v => return Err(Error::InputLength { expected: sizes.n_v, found: v.len() }),
            Some(v) => Some(PoissonLayer::new(v, dt, stimulus.seed, 0)?),
            None => None,
        };
        let mut af = match stimulus.af {
            Some(v) if v.len() != sizes.n_a => return Err(Error::InputLength { expected: sizes.n_a, found: v.len() }),
            Some(v) => Some(PoissonLayer::new(v, dt, stimulus.seed, 1 << 32)?),
            None => None,
        };
        let steps = (duration_ms / dt).round() as u64;

        let mut vf_spk = vec![false; sizes.n_v];
        let mut af_spk = vec![false; sizes.n_a];
        let mut drive_s2 = vec![0.0; sizes.n_av];
        let mut drive_s3 = vec![0.0; sizes.n_i];
        let mut drive_s4 = vec![0.0; sizes.n_av];
        let mut dend_syn = vec![0.0; sizes.n_av];
        let mut unblock = vec![0.0; sizes.n_av];
        let pyr = &self.params.neuron.pyramidal;
        let inter = &self.params.neuron.interneuron;

        for _ in 0..steps {
            let t_now = state.clock_ms();
            let t_next = (state.step + 1) as f64 * dt;

            // Presynaptic spikes for this step.
            if let Some(layer) = vf.as_mut() {
                layer.sample(&mut vf_spk);
                log_layer(&mut state.spike_log, &vf_spk, Layer::Vf, t_now);
            }
            if let Some(layer) = af.as_mut() {
                layer.sample(&mut af_spk);
                log_layer(&mut state.spike_log, &af_spk, Layer::Af, t_now);
            }

            // Conductances.
            drive_s2.iter_mut().for_each(|d| *d = 0.0);
            drive_s3.iter_mut().for_each(|d| *d = 0.0);
            drive_s4.iter_mut().for_each(|d| *d = 0.0);
            if af.is_some() {
                for (j, _) in af_spk.iter().enumerate().filter(|(_, &s)| s) {
                    for &post in &self.af_targets[j] {
                        drive_s2[post as usize] += 1.0;
                    }
                }
            }
            for (j, _) in state.avi_fired.iter().enumerate().filter(|(_, &s)| s) {
                for &post in &self.avi_targets[j] {
                    drive_s3[post as usize] += 1.0;
                }
            }
            for (j, _) in state.inb_fired.iter().enumerate().filter(|(_, &s)| s) {
                for &post in &self.inb_targets[j] {
                    drive_s4[post as usize] += 1.0;
                }
            }
            if vf.is_some() {
                for (j, _) in vf_spk.iter().enumerate().filter(|(_, &s)| s) {
                    for &k in &self.s1_by_pre[j] {
                        state.s1[k as usize].unit_aux += self.kernel_s1.jump_per_unit();
                    }
                }
            }
            for syn in &mut state.s1 {
                self.kernel_s1.advance(&mut syn.unit, &mut syn.unit_aux, 0.0);
            }
            for (p, &d) in state.s2.iter_mut().zip(&drive_s2) {
                self.kernel_s2.advance(&mut p.g, &mut p.aux, d * self.g_s2);
            }
            for (p, &d) in state.s3.iter_mut().zip(&drive_s3) {
                self.kernel_s3.advance(&mut p.g, &mut p.aux, d * self.g_s3);
            }
            for (p, &d) in state.s4.iter_mut().zip(&drive_s4) {
                self.kernel_s4.advance(&mut p.g, &mut p.aux, d * self.g_s4);
            }

            // Dendritic S1 currents, accumulated in fixed (post, pre) order.
            for (u, n) in unblock.iter_mut().zip(&state.avi) {
                *u = nmda_unblock(n.v_dend);
            }
            dend_syn.iter_mut().for_each(|x| *x = 0.0);
            let e_exc = ReceptorKind::Ampa.reversal();
            for syn in &mut state.s1 {
                let post = syn.post as usize;
                let v = state.avi[post].v_dend;
                let g_ampa = self.g_ampa_s1 * syn.z * syn.unit;
                let g_nmda = self.g_nmda_s1 * syn.z * syn.unit;
                let i_nmda = g_nmda * unblock[post] * (v - ReceptorKind::Nmda.reversal());
                dend_syn[post] += g_ampa * (v - e_exc) + i_nmda;
                syn.nmda_charge += i_nmda.abs() * dt;
            }

            // Membranes. Synaptic currents are outward-positive, so they are
            // injected with a minus sign.
            let e_gaba = ReceptorKind::Gaba.reversal();
            for (i, n) in state.avi.iter_mut().enumerate() {
                let vs = n.v_soma;
                let soma_syn = state.s2[i].g * (vs - e_exc) + state.s4[i].g * (vs - e_gaba);
                n.advance_tabulated(pyr, &self.kinetics, -soma_syn, -dend_syn[i]);
                let fired = detect_spike(vs, n.v_soma, SPIKE_THRESHOLD);
                state.avi_fired[i] = fired;
                if fired {
                    n.last_spike_time = Some(t_next);
                    state.spike_log.push(SpikeEvent { time_ms: t_next, layer: Layer::Avi, index: i as u32 });
                }
            }
            for (i, n) in state.inb.iter_mut().enumerate() {
                let v = n.v;
                n.advance_tabulated(inter, &self.kinetics, -state.s3[i].g * (v - e_exc));
                let fired = detect_spike(v, n.v, SPIKE_THRESHOLD);
                state.inb_fired[i] = fired;
                if fired {
                    n.last_spike_time = Some(t_next);
                    state.spike_log.push(SpikeEvent { time_ms: t_next, layer: Layer::Inb, index: i as u32 });
                }
            }

            state.step += 1;
            if state.step % self.tick_steps == 0 {
                self.check_finite(state)?;
                if plasticity_on {
                    self.plasticity_tick(state);
                    if let Some(every) = self.trace_steps {
                        if state.step % every == 0 {
                            record_trace(state);
                        }
                    }
                } else {
                    for syn in &mut state.s1 {
                        syn.nmda_charge = 0.0;
                    }
                }
            }
        }
        Ok(())
    }

    fn plasticity_tick(&self, state: &mut SimulationState) {
        let p = &self.params.stc;
        let tick_ms = self.tick_steps as f64 * self.params.dt;
        for syn in &mut state.s1 {
            let ca_d = state.avi[syn.post as usize].ca_dend;
            let mean_current = syn.nmda_charge / tick_ms;
            syn.nmda_charge = 0.0;
            let s = stc::step_spine_calcium(&syn.plasticity, p, mean_current, tick_ms);
            syn.plasticity = stc::tick(&s, p, ca_d, tick_ms);
            syn.z = stc::z_of_y(syn.plasticity.y, p);
        }
    }

    fn check_finite(&self, state: &SimulationState) -> Result<()> {
        for (i, n) in state.avi.iter().enumerate() {
            if !(n.v_soma.is_finite() && n.v_dend.is_finite()) {
                let v = if n.v_soma.is_finite() { n.v_dend } else { n.v_soma };
                ensure_finite(|| format!("AVI neuron {i} membrane voltage"), v)?;
            }
        }
        for (i, n) in state.inb.iter().enumerate() {
            ensure_finite(|| format!("INB neuron {i} membrane voltage"), n.v)?;
        }
        for (k, s) in state.s1.iter().enumerate() {
            ensure_finite(|| format!("S1 synapse {k} efficacy"), s.z)?;
        }
        Ok(())
    }
}

fn sorted_s1(topo: &NetworkTopology) -> Vec<(u32, u32)> {
    let mut e = topo.projection(ConnectionClass::S1).edges.clone();
    e.sort_unstable_by_key(|&(pre, post)| (post, pre));
    e
}

fn log_layer(log: &mut Vec<SpikeEvent>, spikes: &[bool], layer: Layer, t: f64) {
    for (i, _) in spikes.iter().enumerate().filter(|(_, &s)| s) {
        log.push(SpikeEvent { time_ms: t, layer, index: i as u32 });
    }
}

fn record_trace(state: &mut SimulationState) {
    let t = state.clock_ms();
    for (k, s) in state.s1.iter().enumerate() {
        state.plasticity_trace.push(TraceRow {
            time_ms: t,
            synapse: k as u32,
            y: s.plasticity.y,
            z: s.z,
            tag: s.plasticity.tag,
            prp: s.plasticity.prp,
        });
    }
}
