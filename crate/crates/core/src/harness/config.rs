use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoding::{load_fv_dataset, load_nosc, synth_fv_split, FvDataset, NoscCodebook, NoscParams, SynthSpec};
use crate::error::{Error, Result};
use crate::network::{build_topology, load_topology, FanOut, LayerSizes, NetworkParams, NetworkTopology, Preset};
use crate::neuron::{NeuronParams, DEFAULT_DT};
use crate::stc::StcParams;
use crate::synapse::SynapseTable;

use super::seeds::{derive_seed, Purpose};

/// Presentation schedule, all in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timing {
    /// Paired VF + AF presentation of one training sample.
    pub train_ms: f64,
    /// Silent consolidation window after each training sample.
    pub train_gap_ms: f64,
    /// VF-only presentation used to collect decoder patterns.
    pub pattern_ms: f64,
    pub test_ms: f64,
    /// Silent lead-in before every pattern or test window.
    pub test_gap_ms: f64,
    /// Return membranes and conductances to rest before every presentation.
    pub reset_between_presentations: bool,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            train_ms: 2000.0,
            train_gap_ms: 4000.0,
            pattern_ms: 1000.0,
            test_ms: 1000.0,
            test_gap_ms: 100.0,
            reset_between_presentations: false,
        }
    }
}

impl Timing {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_ms", self.train_ms),
            ("train_gap_ms", self.train_gap_ms),
            ("pattern_ms", self.pattern_ms),
            ("test_ms", self.test_ms),
            ("test_gap_ms", self.test_gap_ms),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("timing.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Where the feature vectors come from. Files take precedence over the
/// synthetic generator when both paths are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub synthetic: SynthSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            synthetic: SynthSpec::default(),
        }
    }
}

impl DataConfig {
    pub fn load(&self) -> Result<(FvDataset, FvDataset)> {
        match (&self.train, &self.test) {
            (Some(tr), Some(te)) => Ok((load_fv_dataset(tr)?, load_fv_dataset(te)?)),
            (None, None) => synth_fv_split(&self.synthetic),
            _ => Err(Error::Config("data.train and data.test must be given together".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub preset: Preset,
    /// Explicit layer sizes; override the preset.
    pub sizes: Option<LayerSizes>,
    pub fan_out: FanOut,
    /// Edge-list file; overrides sizes, fan-out and the topology seed.
    pub topology_file: Option<PathBuf>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Mnist10,
            sizes: None,
            fan_out: FanOut::default(),
            topology_file: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoscConfig {
    /// Codebook file; overrides generation.
    pub file: Option<PathBuf>,
    /// Generation parameters; the preset's when absent.
    pub params: Option<NoscParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub dt: f64,
    pub plasticity_tick_ms: f64,
    pub trace_interval_ms: Option<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            plasticity_tick_ms: 1.0,
            trace_interval_ms: None,
        }
    }
}

/// Everything that determines a continual-learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed; topology, codebook and every presentation derive from it.
    pub seed: u64,
    /// Where reports, logs and checkpoints go. Nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub nosc: NoscConfig,
    pub timing: Timing,
    pub simulation: SimulationConfig,
    pub neuron: NeuronParams,
    pub synapses: SynapseTable,
    pub stc: StcParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: None,
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            nosc: NoscConfig::default(),
            timing: Timing::default(),
            simulation: SimulationConfig::default(),
            neuron: NeuronParams::default(),
            synapses: SynapseTable::default(),
            stc: StcParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The fully resolved configuration as TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn network_params(&self) -> NetworkParams {
        NetworkParams {
            neuron: self.neuron,
            synapses: self.synapses,
            stc: self.stc,
            dt: self.simulation.dt,
            plasticity_tick_ms: self.simulation.plasticity_tick_ms,
            trace_interval_ms: self.simulation.trace_interval_ms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        self.network_params().validate()?;
        if let Some(s) = &self.network.sizes {
            s.validate()?;
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<NetworkTopology> {
        if let Some(path) = &self.network.topology_file {
            return load_topology(path);
        }
        let sizes = self.network.sizes.unwrap_or_else(|| self.network.preset.sizes());
        build_topology(sizes, self.network.fan_out, derive_seed(self.seed, Purpose::Topology, 0, 0))
    }

    pub fn codebook(&self) -> Result<NoscCodebook> {
        if let Some(path) = &self.nosc.file {
            return load_nosc(path);
        }
        let params = self.nosc.params.unwrap_or_else(|| self.network.preset.nosc());
        crate::encoding::generate_nosc(params, derive_seed(self.seed, Purpose::Codebook, 0, 0))
    }
}
