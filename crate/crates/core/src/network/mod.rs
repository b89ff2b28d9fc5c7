//! Four-layer integration network (VF, AF → AVI ↔ INB) and its event loop.

mod sim;
mod topology;

pub use sim::{
    measure_avi_pattern, AviPattern, Layer, NetworkParams, PlasticSynapse, PooledConductance, SimulationState,
    Simulator, SpikeEvent, Stimulus, TraceRow,
};
pub use topology::{build_topology, load_topology, write_topology, FanOut, LayerSizes, NetworkTopology, Preset, Projection};
