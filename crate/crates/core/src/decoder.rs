//! Energy-normalized linear readout trained one class column at a time.
//!
//! Learning class `k` sets column `k` to the mean of the class's AVI firing
//! rate patterns and rescales it to unit Euclidean norm. No other column is
//! touched, which is what protects earlier classes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderWeights {
    n_inputs: usize,
    /// Column-major: column `c` is `w[c * n_inputs..(c + 1) * n_inputs]`.
    w: Vec<f64>,
    learned: Vec<bool>,
}

impl DecoderWeights {
    pub fn new(n_inputs: usize, n_classes: usize) -> Self {
        Self {
            n_inputs,
            w: vec![0.0; n_inputs * n_classes],
            learned: vec![false; n_classes],
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_classes(&self) -> usize {
        self.learned.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.w[c * self.n_inputs..(c + 1) * self.n_inputs]
    }

    pub fn is_learned(&self, c: usize) -> bool {
        self.learned.get(c).copied().unwrap_or(false)
    }

    pub fn learned_classes(&self) -> Vec<usize> {
        (0..self.n_classes()).filter(|&c| self.learned[c]).collect()
    }

    /// `W(i, c)`
    pub fn weight(&self, i: usize, c: usize) -> f64 {
        self.w[c * self.n_inputs + i]
    }

    fn check_class(&self, c: usize) -> Result<()> {
        if c < self.n_classes() {
            Ok(())
        } else {
            Err(Error::ClassOutOfRange {
                class: c,
                classes: self.n_classes(),
            })
        }
    }

    fn check_pattern(&self, p: &[f64]) -> Result<()> {
        if p.len() == self.n_inputs {
            Ok(())
        } else {
            Err(Error::PatternLength {
                expected: self.n_inputs,
                found: p.len(),
            })
        }
    }

    /// Sets column `k` to the normalized mean of `patterns`.
    pub fn learn_class<P: AsRef<[f64]>>(&mut self, k: usize, patterns: &[P], allow_relearn: bool) -> Result<()> {
        self.check_class(k)?;
        if self.learned[k] && !allow_relearn {
            return Err(Error::AlreadyLearned(k));
        }
        if patterns.is_empty() {
            return Err(Error::NoPatterns(k));
        }
        let mut mean = vec![0.0; self.n_inputs];
        for p in patterns {
            let p = p.as_ref();
            self.check_pattern(p)?;
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let count = patterns.len() as f64;
        for m in &mut mean {
            *m /= count;
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroNormPattern(k));
        }
        let col = &mut self.w[k * self.n_inputs..(k + 1) * self.n_inputs];
        for (w, m) in col.iter_mut().zip(&mean) {
            *w = m / norm;
        }
        self.learned[k] = true;
        Ok(())
    }

    /// Linear score of class `c` for `pattern`.
    pub fn score(&self, pattern: &[f64], c: usize) -> f64 {
        self.column(c).iter().zip(pattern).map(|(w, x)| w * x).sum()
    }

    /// Highest-scoring learned class among `candidates`; ties go to the
    /// lowest class index.
    pub fn predict(&self, pattern: &[f64], candidates: &[usize]) -> Result<usize> {
        self.check_pattern(pattern)?;
        let mut best: Option<(usize, f64)> = None;
        for &c in candidates {
            if !self.is_learned(c) {
                continue;
            }
            let s = self.score(pattern, c);
            best = match best {
                Some((bc, bs)) if bs > s || (bs == s && bc < c) => Some((bc, bs)),
                _ => Some((c, s)),
            };
        }
        best.map(|(c, _)| c).ok_or(Error::NoLearnedCandidate)
    }

    /// Writes the matrix as `N_av` rows of `C` whitespace-separated weights.
    pub fn write_matrix(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.n_inputs {
            let row: Vec<String> = (0..self.n_classes()).map(|c| format!("{}", self.weight(i, c))).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
