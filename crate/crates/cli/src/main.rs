use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use avim::encoding::{generate_nosc, synth_fv_split, write_fv_dataset, write_nosc, NoscParams, SynthSpec};
use avim::harness::*;
use avim::network::Preset;
use clap::{Args, Parser, Subcommand};

/// Audio-visual integration network for class-incremental learning.
#[derive(Parser)]
#[command(name = "avim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sparse near-orthogonal codebook file.
    GenNosc(GenNosc),
    /// Generate a synthetic train/test feature dataset pair.
    GenSynth(GenSynth),
    /// Run (or resume) a continual-learning experiment.
    Run(Run),
    /// Re-evaluate the network and decoder saved in a run directory.
    Eval(Eval),
    /// Write accuracy-curve and stability CSVs from a saved report.
    Report(Report),
    /// Print the fully resolved default configuration.
    Config,
}

#[derive(Args)]
struct GenNosc {
    /// Take C, N, n and K from a preset; explicit values override it.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    ones: Option<usize>,
    #[arg(long)]
    max_overlap: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenSynth {
    /// Feature count from a preset; `--features` overrides it.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long, default_value_t = 10)]
    train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    test_per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory receiving `train.fvd` and `test.fvd`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Run {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Network preset. With synthetic data the feature count follows it.
    #[arg(long)]
    preset: Option<Preset>,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this many learning steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct Eval {
    /// Run directory holding a checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Evaluate on this FVD1 test file instead of the run's own test set.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Seed for the test presentations; the run's seed by default.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Report {
    /// Run directory holding `report.json`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenNosc(a) => gen_nosc(a),
        Command::GenSynth(a) => gen_synth(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
        Command::Config => {
            print!("{}", RunConfig::default().to_toml_string()?);
            Ok(())
        }
    }
}

fn gen_nosc(a: GenNosc) -> Result<()> {
    let base = a.preset.map(Preset::nosc);
    let pick = |v: Option<usize>, f: fn(&NoscParams) -> usize, name: &str| {
        v.or(base.as_ref().map(f)).with_context(|| format!("--{name} or --preset is required"))
    };
    let params = NoscParams {
        classes: pick(a.classes, |p| p.classes, "classes")?,
        len: pick(a.len, |p| p.len, "len")?,
        ones: pick(a.ones, |p| p.ones, "ones")?,
        max_overlap: pick(a.max_overlap, |p| p.max_overlap, "max-overlap")?,
    };
    let book = generate_nosc(params, a.seed)?;
    write_nosc(&book, &a.out)?;
    eprintln!("wrote {} codes of length {} to {}", params.classes, params.len, a.out.display());
    Ok(())
}

fn gen_synth(a: GenSynth) -> Result<()> {
    let features = match (a.features, a.preset) {
        (Some(f), _) => f,
        (None, Some(p)) => p.n_vfv(),
        (None, None) => Preset::Mnist10.n_vfv(),
    };
    let spec = SynthSpec {
        classes: a.classes,
        features,
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
        noise: a.noise,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let (train, test) = synth_fv_split(&spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_fv_dataset(&train, &a.out.join("train.fvd"))?;
    write_fv_dataset(&test, &a.out.join("test.fvd"))?;
    eprintln!("wrote {} train and {} test vectors to {}", train.len(), test.len(), a.out.display());
    Ok(())
}

fn run(a: Run) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(out) = a.out {
        cfg.out_dir = Some(out);
    }
    if let Some(p) = a.preset {
        cfg.network.preset = p;
        cfg.data.synthetic.features = p.n_vfv();
    }
    let outcome = match (a.resume, a.steps) {
        (true, None) => resume_continual_learning(&cfg)?,
        (true, Some(_)) => bail!("--steps cannot be combined with --resume"),
        (false, Some(n)) => run_first_steps(&cfg, n)?,
        (false, None) => run_continual_learning(&cfg)?,
    };
    let r = &outcome.report;
    for (i, (row, overall)) in r.accuracy.iter().zip(&r.overall).enumerate() {
        let cells: Vec<String> = row.iter().map(|a| format!("{a:.3}")).collect();
        println!("step {i}: overall {overall:.3}  [{}]", cells.join(" "));
    }
    println!(
        "{:.1} s wall for {:.1} s simulated",
        r.wall_clock.total_s,
        r.wall_clock.simulated_ms / 1000.0
    );
    if let Some(dir) = &cfg.out_dir {
        println!("results in {}", dir.display());
    }
    Ok(())
}

fn eval(a: Eval) -> Result<()> {
    let ckpt = Checkpoint::load(&a.out.join(CHECKPOINT_FILE))?;
    let exp = Experiment::prepare(&ckpt.config)?;
    let test = match &a.test {
        Some(path) => avim::encoding::load_fv_dataset(path)?,
        None => exp.test.clone(),
    };
    let learned = ckpt.decoder.learned_classes();
    if learned.is_empty() {
        bail!("the checkpoint has no learned classes");
    }
    let seed = a.seed.unwrap_or(ckpt.config.seed);
    let e = evaluate(&exp.sim, &ckpt.state, &ckpt.decoder, &test, &learned, &ckpt.config.timing, seed)?;
    let mut csv = String::from("class,accuracy\n");
    for (c, acc) in &e.per_class {
        println!("class {c}: {acc:.3}");
        csv.push_str(&format!("{c},{acc}\n"));
    }
    println!("overall: {:.3}", e.overall);
    write(&a.out.join("eval.csv"), &csv)
}

fn report(a: Report) -> Result<()> {
    let r = RunReport::load_json(&a.out.join("report.json"))?;
    r.validate()?;
    write(&a.out.join("accuracy.csv"), &r.accuracy_csv())?;
    write(&a.out.join("curve.csv"), &r.curve_csv())?;
    write(&a.out.join("patterns.csv"), &r.patterns_csv())?;
    if r.steps() >= 2 {
        write(&a.out.join("stability.csv"), &stability_csv(&representation_stability(&r)?))?;
    } else {
        eprintln!("one learning step only, no stability matrix");
    }
    print!("{}", r.curve_csv());
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
