//! End-to-end acceptance criteria. Every criterion prints one PASS/FAIL line
//! and the test fails if any of them does.

mod common;

use std::collections::HashSet;
use std::io::Write as _;
use std::time::Instant;

use avim::encoding::{generate_nosc, generate_nosc_with_budget, NoscParams, DEFAULT_DRAW_BUDGET};
use avim::harness::*;
use avim::network::*;
use avim::stc::*;
use avim::synapse::ConnectionClass;
use avim::Error;
use common::Check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lines go straight to stderr so they show up without `--nocapture`.
fn report(name: &str, what: &str, started: Instant, result: &Check) {
    let secs = started.elapsed().as_secs_f64();
    let line = match result {
        Ok(detail) => format!("{name} PASS  {what}: {detail} ({secs:.1} s)"),
        Err(reason) => format!("{name} FAIL  {what}: {reason} ({secs:.1} s)"),
    };
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn ensure(ok: bool, reason: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(reason())
    }
}

fn z_function() -> Check {
    let p = StcParams::default();
    let z0 = z_of_y(0.0, &p);
    ensure((z0 - 1.0).abs() <= 1e-12, || format!("z(0) = {z0}"))?;
    let (hi, lo) = (z_of_y(30.0, &p), z_of_y(-30.0, &p));
    ensure((hi - 5.0).abs() <= 1e-6 && (lo - 0.5).abs() <= 1e-6, || format!("z(30) = {hi}, z(-30) = {lo}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ys: Vec<f64> = (0..1000).map(|_| rng.gen_range(-30.0..30.0)).collect();
    ys.sort_by(f64::total_cmp);
    let zs: Vec<f64> = ys.iter().map(|&y| z_of_y(y, &p)).collect();
    for (w, y) in zs.windows(2).zip(ys.windows(2)) {
        // Strict until the tails saturate to the bound in double precision.
        let strict = y[0].abs() < 10.0 && y[1].abs() < 10.0 && y[0] < y[1];
        ensure(w[1] >= w[0] && (!strict || w[1] > w[0]), || format!("z not monotone at y = {}", y[0]))?;
    }
    Ok(format!("z(0) = {z0}, z(±30) = {hi:.9}/{lo:.9}, 1000 samples monotone"))
}

type Ref = [f64; 3];

/// RK4 on the tag/PRP system with calcium held, `h` in seconds.
fn reference_rk4(x: &Ref, p: &StcParams, flag: f64, beta: f64, alpha_p: f64, h: f64) -> Ref {
    let f = |x: &Ref| -> Ref {
        [
            -p.alpha_tag * x[0] + beta * (flag - x[0]),
            -x[1] / p.tau_prp + alpha_p * (1.0 - x[1]) - 0.25 * (1.0 / p.tau_prp + alpha_p) * x[2],
            x[1],
        ]
    };
    let add = |x: &Ref, k: &Ref, s: f64| [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2]];
    let k1 = f(x);
    let k2 = f(&add(x, &k1, h / 2.0));
    let k3 = f(&add(x, &k2, h / 2.0));
    let k4 = f(&add(x, &k3, h));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn stc_fidelity() -> Check {
    let p = StcParams::default();
    let mut worst = 0.0f64;
    for (ca_s, flag, beta) in [(0.3, 1.0, p.beta_tag_ltp), (0.15, -1.0, p.beta_tag_ltd)] {
        let mut s = PlasticityState { ca_spine: ca_s, ..Default::default() };
        let mut x: Ref = [0.0; 3];
        for k in 1..=10_000 {
            s = tick(&s, &p, 0.3, 1.0);
            for _ in 0..100 {
                x = reference_rk4(&x, &p, flag, beta, p.alpha_prp, 1e-5);
            }
            if k % 10 == 0 {
                for (a, b) in [(s.tag, x[0]), (s.prp_rate, x[1]), (s.prp, x[2])] {
                    worst = worst.max(((a - b) / b).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-4, || format!("relative deviation {worst:e} from the reference"))?;

    let sim = Simulator::new(build_topology(Preset::Mnist10.sizes(), FanOut::default(), 1).unwrap(), NetworkParams::default()).unwrap();
    let mut st = sim.initial_state();
    sim.simulate(&mut st, &Stimulus::silent(), 10_000.0, true).map_err(|e| e.to_string())?;
    ensure(st.spike_log.is_empty(), || format!("{} spikes in a silent network", st.spike_log.len()))?;
    for s in &st.s1 {
        let q = &s.plasticity;
        ensure(
            s.z.to_bits() == 1.0f64.to_bits()
                && [q.y, q.tag, q.prp, s.unit, s.unit_aux].iter().all(|v| v.to_bits() == 0),
            || format!("synapse {}->{} drifted while silent", s.pre, s.post),
        )?;
    }
    Ok(format!("max relative deviation {worst:.1e} over 10 s; 10 s silent network quiescent"))
}

fn poisson() -> Check {
    let lines: Result<Vec<String>, String> = [0.25, 0.5, 1.0]
        .iter()
        .enumerate()
        .map(|(k, &v)| common::poisson_statistics(v, 100, 1000, 100 + k as u64))
        .collect();
    Ok(lines?.join("; "))
}

fn nosc() -> Check {
    let book = generate_nosc(NoscParams { classes: 10, len: 15, ones: 2, max_overlap: 1 }, 1).map_err(|e| e.to_string())?;
    ensure(book.verify(), || "codebook violates sparsity or overlap".into())?;
    let max_overlap = (0..10).flat_map(|a| (a + 1..10).map(move |b| (a, b))).map(|(a, b)| book.overlap(a, b)).max();
    let infeasible = NoscParams { classes: 4, len: 4, ones: 2, max_overlap: 0 };
    match generate_nosc_with_budget(infeasible, 1, DEFAULT_DRAW_BUDGET) {
        Err(Error::NoscInfeasible { .. }) => {}
        other => return Err(format!("(4,4,2,0) gave {other:?}")),
    }
    Ok(format!("(10,15,2,1) verified, max overlap {}; (4,4,2,0) rejected", max_overlap.unwrap_or(0)))
}

/// Continual-learning run on the default configuration inside a pool of
/// `threads` workers, with a coarse plasticity trace for the bounds check.
fn full_run(threads: usize) -> Result<(RunOutcome, f64), String> {
    let mut cfg = RunConfig::default();
    cfg.simulation.trace_interval_ms = Some(100.0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let out = pool.install(|| run_continual_learning(&cfg)).map_err(|e| e.to_string())?;
    Ok((out, started.elapsed().as_secs_f64()))
}

fn continual_learning(run: &Result<(RunOutcome, f64), String>) -> Check {
    let (out, secs) = run.as_ref().map_err(Clone::clone)?;
    let r = &out.report;
    r.validate().map_err(|e| e.to_string())?;
    ensure(r.steps() == 5, || format!("{} steps", r.steps()))?;
    let last = r.final_top1().unwrap_or(0.0);
    let (first0, last0) = (r.accuracy[0][0], r.accuracy[r.steps() - 1][0]);
    ensure(last >= 0.9, || format!("final accuracy {last}"))?;
    ensure((first0 - last0).abs() <= 0.1, || format!("class 0 went from {first0} to {last0}"))?;
    Ok(format!(
        "final top-1 {last:.3}, class 0 {first0:.3} -> {last0:.3}, curve {:?}, {secs:.0} s wall for {:.0} s simulated",
        r.overall,
        r.wall_clock.simulated_ms / 1000.0
    ))
}

fn stability(run: &Result<(RunOutcome, f64), String>) -> Check {
    let (out, _) = run.as_ref().map_err(Clone::clone)?;
    let m = representation_stability(&out.report).map_err(|e| e.to_string())?;
    let finals: Vec<Option<f64>> = m.iter().map(|row| *row.last().unwrap()).collect();
    for (c, v) in finals.iter().enumerate() {
        match v {
            Some(v) if *v >= 0.8 => {}
            _ => return Err(format!("class {c}: similarity {v:?}")),
        }
    }
    let min = finals.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!("min similarity {min:.4} over {} classes", finals.len()))
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn determinism(a: &Result<(RunOutcome, f64), String>, b: &Result<(RunOutcome, f64), String>) -> Check {
    let (a, _) = a.as_ref().map_err(Clone::clone)?;
    let (b, _) = b.as_ref().map_err(Clone::clone)?;
    let (ra, rb) = (&a.report, &b.report);
    let acc = |r: &RunReport| r.accuracy.iter().map(|row| bits(row)).collect::<Vec<_>>();
    let pat = |r: &RunReport| r.patterns.iter().flatten().map(|p| bits(p)).collect::<Vec<_>>();
    ensure(acc(ra) == acc(rb), || "accuracy matrices differ".into())?;
    ensure(pat(ra) == pat(rb), || "mean patterns differ".into())?;
    ensure(a.state.spike_log.len() == b.state.spike_log.len(), || "spike log lengths differ".into())?;
    let same_log = a.state.spike_log.iter().zip(&b.state.spike_log).all(|(x, y)| {
        x.time_ms.to_bits() == y.time_ms.to_bits() && x.layer == y.layer && x.index == y.index
    });
    ensure(same_log, || "spike logs differ".into())?;
    ensure(bits(&a.state.z_values()) == bits(&b.state.z_values()), || "final efficacies differ".into())?;
    Ok(format!("1 vs 4 workers: accuracy, patterns and {} logged spikes identical", a.state.spike_log.len()))
}

/// Per-synapse record of a 2 s paired presentation with every VF neuron at
/// `level` and the class-0 code on AF.
struct Protocol {
    stimulated: Vec<usize>,
    z: Vec<f64>,
    /// Spine calcium reached the depression band while PRP was being made.
    eligible: Vec<bool>,
    z_min: f64,
    z_max: f64,
}

fn paired_protocol(level: f64, seed: u64) -> Result<Protocol, String> {
    let topo = build_topology(Preset::Mnist10.sizes(), FanOut::default(), seed).map_err(|e| e.to_string())?;
    let book = generate_nosc(Preset::Mnist10.nosc(), seed).map_err(|e| e.to_string())?;
    let code = book.dense(0);
    let driven: HashSet<u32> = topo
        .projection(ConnectionClass::S2)
        .edges
        .iter()
        .filter(|(pre, _)| code[*pre as usize] > 0.5)
        .map(|&(_, post)| post)
        .collect();
    let sim = Simulator::new(topo, NetworkParams::default()).map_err(|e| e.to_string())?;
    let p = sim.params.stc;
    let vf = vec![level; sim.topology.sizes.n_v];
    let mut st = sim.initial_state();
    let mut eligible = vec![false; st.s1.len()];
    let (mut z_min, mut z_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..2000 {
        let stim = Stimulus { vf: Some(&vf), af: Some(&code), seed: seed * 10_000 + k };
        sim.simulate(&mut st, &stim, 1.0, true).map_err(|e| e.to_string())?;
        for (e, s) in eligible.iter_mut().zip(&st.s1) {
            *e |= s.plasticity.ca_spine >= p.ca0_spine && s.plasticity.ca_dend >= p.ca0_dend;
            z_min = z_min.min(s.z);
            z_max = z_max.max(s.z);
        }
    }
    let stimulated = (0..st.s1.len()).filter(|&i| driven.contains(&st.s1[i].post)).collect();
    Ok(Protocol { stimulated, z: st.z_values(), eligible, z_min, z_max })
}

fn directionality(runs: &[&Result<(RunOutcome, f64), String>]) -> Check {
    let p = StcParams::default();
    let held = |ca_s: f64| {
        let mut s = PlasticityState { ca_spine: ca_s, ..Default::default() };
        for _ in 0..2000 {
            s = tick(&s, &p, 0.2, 1.0);
        }
        z_of_y(s.y, &p)
    };
    let (up, down) = (held(0.3), held(0.15));
    ensure(up > 1.0 && down < 1.0, || format!("held calcium gave z {up} (high) and {down} (moderate)"))?;

    let (mut bound_lo, mut bound_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_up, mut n_down) = (0, 0);
    for seed in 1..=3 {
        let strong = paired_protocol(1.0, seed)?;
        for &i in &strong.stimulated {
            ensure(strong.z[i] > 1.0, || format!("seed {seed}: paired synapse {i} ended at z = {}", strong.z[i]))?;
        }
        n_up += strong.stimulated.len();
        let moderate = paired_protocol(0.25, seed)?;
        for &i in &moderate.stimulated {
            let z = moderate.z[i];
            ensure(z <= 1.0, || format!("seed {seed}: moderate synapse {i} potentiated to {z}"))?;
            if moderate.eligible[i] {
                ensure(z < 1.0, || format!("seed {seed}: moderate synapse {i} stayed at {z}"))?;
                n_down += 1;
            }
        }
        for pr in [&strong, &moderate] {
            bound_lo = bound_lo.min(pr.z_min);
            bound_hi = bound_hi.max(pr.z_max);
        }
    }
    for run in runs {
        let (out, _) = run.as_ref().map_err(Clone::clone)?;
        for row in &out.state.plasticity_trace {
            bound_lo = bound_lo.min(row.z);
            bound_hi = bound_hi.max(row.z);
        }
        for z in out.state.z_values() {
            bound_lo = bound_lo.min(z);
            bound_hi = bound_hi.max(z);
        }
    }
    ensure(bound_lo >= 0.5 && bound_hi <= 5.0, || format!("z left [0.5, 5]: [{bound_lo}, {bound_hi}]"))?;
    Ok(format!(
        "held calcium z {up:.6}/{down:.6}; network: {n_up} paired synapses up, {n_down} moderate synapses down; z within [{bound_lo:.6}, {bound_hi:.6}]"
    ))
}

#[test]
fn acceptance_suite() {
    // libtest prints the test name without a newline; start on a fresh line.
    let _ = writeln!(std::io::stderr().lock());
    let mut failed = Vec::new();
    let mut check = |name: &'static str, what: &str, f: &mut dyn FnMut() -> Check| {
        let started = Instant::now();
        let result = f();
        report(name, what, started, &result);
        if result.is_err() {
            failed.push(name);
        }
    };
    check("AC-1", "efficacy function", &mut z_function);
    check("AC-2", "plasticity integration", &mut stc_fidelity);
    check("AC-3", "Poisson encoder", &mut poisson);
    check("AC-4", "sparse codes", &mut nosc);
    check("AC-5", "readout learning", &mut || common::decoder_fuzz(100, 2024));

    let started = Instant::now();
    let single = full_run(1);
    let four = full_run(4);
    let _ = writeln!(std::io::stderr().lock(), "   (two continual-learning runs took {:.0} s)", started.elapsed().as_secs_f64());
    check("AC-6", "continual learning", &mut || continual_learning(&single));
    check("AC-7", "representation stability", &mut || stability(&single));
    check("AC-8", "determinism", &mut || determinism(&single, &four));
    check("AC-9", "LTP/LTD directionality", &mut || directionality(&[&single, &four]));

    assert!(failed.is_empty(), "failed: {failed:?}");
}
