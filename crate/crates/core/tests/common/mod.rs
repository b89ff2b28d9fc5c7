//! Checks shared by the per-module tests and the acceptance suite. Each
//! returns a short summary on success and a reason on failure.
#![allow(dead_code)]

use avim::decoder::DecoderWeights;
use avim::encoding::{PoissonLayer, MAX_RATE_HZ};
use avim::neuron::DEFAULT_DT;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

/// Spike counts of one input neuron in consecutive windows of `window_ms`.
pub fn window_counts(v: f64, windows: usize, window_ms: f64, seed: u64) -> Vec<u64> {
    let mut layer = PoissonLayer::new(&[v], DEFAULT_DT, seed, 0).unwrap();
    let steps = (window_ms / DEFAULT_DT).round() as usize;
    let mut buf = [false];
    (0..windows)
        .map(|_| {
            (0..steps)
                .filter(|_| {
                    layer.sample(&mut buf);
                    buf[0]
                })
                .count() as u64
        })
        .collect()
}

/// Empirical rate over `seconds` inside the 3σ binomial band around `20·v`
/// Hz, and variance/mean of 1 s counts within 20% of 1 over `windows` windows.
pub fn poisson_statistics(v: f64, seconds: usize, windows: usize, seed: u64) -> Check {
    let steps = (1000.0 / DEFAULT_DT).round();
    let p = MAX_RATE_HZ * v * DEFAULT_DT / 1000.0;
    let counts = window_counts(v, seconds, 1000.0, seed);
    let n = steps * seconds as f64;
    let total = counts.iter().sum::<u64>() as f64;
    let (mean, sd) = (n * p, (n * p * (1.0 - p)).sqrt());
    if (total - mean).abs() > 3.0 * sd {
        return Err(format!("v={v}: {total} spikes in {seconds} s, band {mean:.0}±{:.0}", 3.0 * sd));
    }
    let counts = window_counts(v, windows, 1000.0, seed ^ 0x5eed);
    let m = counts.iter().sum::<u64>() as f64 / windows as f64;
    let var = counts.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / (windows - 1) as f64;
    let window_sd = (steps * p * (1.0 - p) / windows as f64).sqrt();
    if (m - steps * p).abs() > 3.0 * window_sd {
        return Err(format!("v={v}: window mean {m:.3} vs {:.3}", steps * p));
    }
    let fano = var / m;
    if (fano - 1.0).abs() > 0.2 {
        return Err(format!("v={v}: variance/mean {fano:.3}"));
    }
    Ok(format!("v={v}: {:.3} Hz, variance/mean {fano:.3}", total / seconds as f64))
}

/// Mean then normalize, summing in reverse order and normalizing by a scaled
/// hypotenuse so it shares no arithmetic path with the decoder.
pub fn oracle_column(patterns: &[Vec<f64>]) -> Vec<f64> {
    let n = patterns[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|i| patterns.iter().rev().map(|p| p[i]).sum::<f64>() / patterns.len() as f64)
        .collect();
    let norm = mean.iter().fold(0.0f64, |acc, x| acc.hypot(*x));
    mean.iter().map(|x| x / norm).collect()
}

fn random_pattern(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..200.0) })
        .collect()
}

/// Fuzzes `learn_class` against the oracle, checking column locality bitwise
/// and unit norms of every learned column.
pub fn decoder_fuzz(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let n = rng.gen_range(1..80);
        let classes = rng.gen_range(1..12);
        let mut w = DecoderWeights::new(n, classes);
        // Random prior state: some classes already learned.
        for c in 0..classes {
            if rng.gen_bool(0.5) {
                let mut p = random_pattern(&mut rng, n);
                p[rng.gen_range(0..n)] += 1.0;
                w.learn_class(c, &[p], false).unwrap();
            }
        }
        let k = rng.gen_range(0..classes);
        let count = rng.gen_range(1..25);
        let mut patterns: Vec<Vec<f64>> = (0..count).map(|_| random_pattern(&mut rng, n)).collect();
        patterns[0][rng.gen_range(0..n)] += 1.0;
        let before = w.clone();
        w.learn_class(k, &patterns, true).unwrap();

        let expected = oracle_column(&patterns);
        for (a, b) in w.column(k).iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
        if worst > 1e-9 {
            return Err(format!("case {case}: deviation {worst:e} from the oracle"));
        }
        for c in (0..classes).filter(|&c| c != k) {
            let same = before.column(c).iter().zip(w.column(c)).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same || before.is_learned(c) != w.is_learned(c) {
                return Err(format!("case {case}: learning class {k} touched column {c}"));
            }
        }
        for c in w.learned_classes() {
            let norm = w.column(c).iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(format!("case {case}: column {c} has norm {norm}"));
            }
        }
    }
    Ok(format!("{cases} cases, max deviation {worst:.1e}"))
}
