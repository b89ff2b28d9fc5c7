use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Timing};
use super::report::{overall_accuracy, write_report, Evaluation, RunReport};
use super::seeds::{derive_seed, Purpose};
use crate::decoder::DecoderWeights;
use crate::encoding::{write_nosc, FvDataset, NoscCodebook};
use crate::error::{Error, Result};
use crate::network::{measure_avi_pattern, write_topology, AviPattern, SimulationState, Simulator, Stimulus};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// A configured run: network, codebook and data, ready to simulate.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub sim: Simulator,
    pub codebook: NoscCodebook,
    pub train: FvDataset,
    pub test: FvDataset,
}

impl Experiment {
    pub fn prepare(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let (train, test) = config.data.load()?;
        let topology = config.topology()?;
        let codebook = config.codebook()?;
        let sizes = topology.sizes;
        for ds in [&train, &test] {
            if ds.n_features != sizes.n_v {
                return Err(Error::Config(format!(
                    "{} features per vector but the VF layer has {} neurons",
                    ds.n_features, sizes.n_v
                )));
            }
        }
        if codebook.params.len != sizes.n_a {
            return Err(Error::Config(format!(
                "codes of length {} but the AF layer has {} neurons",
                codebook.params.len, sizes.n_a
            )));
        }
        if train.n_classes() > codebook.params.classes {
            return Err(Error::Config(format!(
                "{} classes but only {} codes",
                train.n_classes(),
                codebook.params.classes
            )));
        }
        let sim = Simulator::new(topology, config.network_params())?;
        Ok(Self {
            config: config.clone(),
            sim,
            codebook,
            train,
            test,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.train.n_classes()
    }
}

/// Everything needed to continue a run after its last completed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    /// First class not yet learned.
    pub next_class: usize,
    pub state: SimulationState,
    pub decoder: DecoderWeights,
    pub report: RunReport,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Network after the last learning step, spike log included.
    pub state: SimulationState,
    pub decoder: DecoderWeights,
}

/// Frozen copy of `state` after the silent lead-in that precedes every
/// pattern or test window. Shared by all presentations of one batch.
fn lead_in(sim: &Simulator, state: &SimulationState, timing: &Timing) -> Result<SimulationState> {
    let mut st = state.clone_without_logs();
    if timing.reset_between_presentations {
        sim.reset_dynamics(&mut st);
    }
    sim.simulate(&mut st, &Stimulus::silent(), timing.test_gap_ms, false)?;
    st.clear_logs();
    Ok(st)
}

/// VF-only presentations with plasticity off, each on its own copy of
/// `start`. Results are in input order whatever the worker count.
pub fn collect_patterns(sim: &Simulator, start: &SimulationState, inputs: &[(&[f64], u64)], window_ms: f64) -> Result<Vec<AviPattern>> {
    let n_av = sim.topology.sizes.n_av;
    inputs
        .par_iter()
        .map(|&(vf, seed)| {
            let mut st = start.clone_without_logs();
            let t0 = st.clock_ms();
            sim.simulate(&mut st, &Stimulus { vf: Some(vf), af: None, seed }, window_ms, false)?;
            measure_avi_pattern(&st, n_av, t0, st.clock_ms())
        })
        .collect()
}

/// Scores labelled patterns against the decoder, predicting among its
/// learned classes only.
pub fn score_patterns(decoder: &DecoderWeights, labelled: &[(usize, Vec<AviPattern>)]) -> Result<Evaluation> {
    let candidates = decoder.learned_classes();
    let mut per_class = Vec::with_capacity(labelled.len());
    let mut counts = Vec::with_capacity(labelled.len());
    let mut mean_patterns = Vec::with_capacity(labelled.len());
    for (class, patterns) in labelled {
        if patterns.is_empty() {
            return Err(Error::EmptyTestClass(*class));
        }
        let mut hits = 0usize;
        let mut mean = vec![0.0; decoder.n_inputs()];
        for p in patterns {
            if decoder.predict(&p.0, &candidates)? == *class {
                hits += 1;
            }
            for (m, x) in mean.iter_mut().zip(&p.0) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= patterns.len() as f64);
        per_class.push((*class, hits as f64 / patterns.len() as f64));
        counts.push(patterns.len());
        mean_patterns.push(mean);
    }
    let accs: Vec<f64> = per_class.iter().map(|&(_, a)| a).collect();
    Ok(Evaluation {
        overall: overall_accuracy(&accs, &counts),
        per_class,
        mean_patterns,
    })
}

/// Presents the test samples of `classes` to frozen copies of `state` and
/// scores them. Test sample `s` of class `c` always uses the same input
/// spike trains, so evaluations after different steps differ only through
/// the network.
pub fn evaluate(
    sim: &Simulator,
    state: &SimulationState,
    decoder: &DecoderWeights,
    testset: &FvDataset,
    classes: &[usize],
    timing: &Timing,
    master_seed: u64,
) -> Result<Evaluation> {
    for &c in classes {
        if testset.classes.get(c).map_or(true, Vec::is_empty) {
            return Err(Error::EmptyTestClass(c));
        }
    }
    let start = lead_in(sim, state, timing)?;
    let inputs: Vec<(&[f64], u64)> = classes
        .iter()
        .flat_map(|&c| {
            testset.classes[c]
                .iter()
                .enumerate()
                .map(move |(s, x)| (x.as_slice(), derive_seed(master_seed, Purpose::Test, c as u64, s as u64)))
        })
        .collect();
    let mut patterns = collect_patterns(sim, &start, &inputs, timing.test_ms)?.into_iter();
    let labelled: Vec<(usize, Vec<AviPattern>)> = classes
        .iter()
        .map(|&c| (c, patterns.by_ref().take(testset.classes[c].len()).collect()))
        .collect();
    score_patterns(decoder, &labelled)
}

fn checkpoint_path(config: &RunConfig) -> Option<PathBuf> {
    config.out_dir.as_ref().map(|d| d.join(CHECKPOINT_FILE))
}

/// Runs the class-incremental paradigm from scratch.
pub fn run_continual_learning(config: &RunConfig) -> Result<RunOutcome> {
    run_first_steps(config, usize::MAX)
}

/// Like [`run_continual_learning`] but stops after `steps` learning steps,
/// leaving a checkpoint to resume from when `out_dir` is set.
pub fn run_first_steps(config: &RunConfig, steps: usize) -> Result<RunOutcome> {
    let exp = Experiment::prepare(config)?;
    let state = exp.sim.initial_state();
    let decoder = DecoderWeights::new(exp.sim.topology.sizes.n_av, exp.n_classes());
    let report = RunReport {
        classes: exp.n_classes(),
        presentations: exp.train.classes.iter().map(|c| vec![0; c.len()]).collect(),
        ..RunReport::default()
    };
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = dir.join("manifest.toml");
        fs::write(&manifest, config.to_toml_string()?).map_err(|e| Error::io(&manifest, e))?;
        write_topology(&exp.sim.topology, &dir.join("topology.txt"))?;
        write_nosc(&exp.codebook, &dir.join("codebook.txt"))?;
    }
    let ckpt = Checkpoint {
        config: config.clone(),
        next_class: 0,
        state,
        decoder,
        report,
    };
    drive(&exp, ckpt, steps)
}

/// Continues a run from the checkpoint in its output directory.
pub fn resume_continual_learning(config: &RunConfig) -> Result<RunOutcome> {
    let path = checkpoint_path(config).ok_or_else(|| Error::Config("resuming needs out_dir".into()))?;
    let ckpt = Checkpoint::load(&path)?;
    if ckpt.config != *config {
        return Err(Error::Config("checkpoint was written by a different configuration".into()));
    }
    let exp = Experiment::prepare(config)?;
    drive(&exp, ckpt, usize::MAX)
}

fn drive(exp: &Experiment, mut ckpt: Checkpoint, max_steps: usize) -> Result<RunOutcome> {
    let config = &exp.config;
    let timing = &config.timing;
    let sim = &exp.sim;
    let ckpt_path = checkpoint_path(config);

    let end = exp.n_classes().min(ckpt.next_class.saturating_add(max_steps));
    for class in ckpt.next_class..end {
        let step_started = Instant::now();
        let code = exp.codebook.dense(class);
        let samples = &exp.train.classes[class];

        // Single pass of paired presentations, each followed by a silent
        // consolidation window with plasticity still on.
        for (s, x) in samples.iter().enumerate() {
            if timing.reset_between_presentations {
                sim.reset_dynamics(&mut ckpt.state);
            }
            let seed = derive_seed(config.seed, Purpose::Train, class as u64, s as u64);
            sim.simulate(&mut ckpt.state, &Stimulus { vf: Some(x), af: Some(&code), seed }, timing.train_ms, true)?;
            ckpt.report.presentations[class][s] += 1;
            sim.simulate(&mut ckpt.state, &Stimulus::silent(), timing.train_gap_ms, true)?;
        }
        assert!(
            ckpt.report.presentations[class].iter().all(|&n| n == 1),
            "every training sample is paired exactly once"
        );

        // Frozen network, VF only: decoder column for this class.
        let start = lead_in(sim, &ckpt.state, timing)?;
        let inputs: Vec<(&[f64], u64)> = samples
            .iter()
            .enumerate()
            .map(|(s, x)| (x.as_slice(), derive_seed(config.seed, Purpose::Pattern, class as u64, s as u64)))
            .collect();
        let patterns = collect_patterns(sim, &start, &inputs, timing.pattern_ms)?;
        ckpt.decoder.learn_class(class, &patterns, false)?;

        let learned: Vec<usize> = (0..=class).collect();
        let eval = evaluate(sim, &ckpt.state, &ckpt.decoder, &exp.test, &learned, timing, config.seed)?;

        let report = &mut ckpt.report;
        report.accuracy.push(eval.per_class.iter().map(|&(_, a)| a).collect());
        report.overall.push(eval.overall);
        report.patterns.push(eval.mean_patterns);
        report.decoders.push(ckpt.decoder.clone());
        let tests: usize = learned.iter().map(|&c| exp.test.classes[c].len()).sum();
        report.wall_clock.simulated_ms += samples.len() as f64 * (timing.train_ms + timing.train_gap_ms)
            + 2.0 * timing.test_gap_ms
            + samples.len() as f64 * timing.pattern_ms
            + tests as f64 * timing.test_ms;
        report.wall_clock.per_step_s.push(step_started.elapsed().as_secs_f64());
        report.wall_clock.total_s += step_started.elapsed().as_secs_f64();
        ckpt.next_class = class + 1;
        if let Some(path) = &ckpt_path {
            ckpt.save(path)?;
        }
    }

    if let Some(dir) = &config.out_dir {
        ckpt.state.write_spike_log(&dir.join("spikes.txt"))?;
        if config.simulation.trace_interval_ms.is_some() {
            ckpt.state.write_plasticity_trace(&dir.join("plasticity_trace.txt"))?;
        }
        write_report(&ckpt.report, dir)?;
    }
    Ok(RunOutcome {
        report: ckpt.report,
        state: ckpt.state,
        decoder: ckpt.decoder,
    })
}
