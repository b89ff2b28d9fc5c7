use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::DecoderWeights;
use crate::error::{Error, Result};

/// Accuracy of one evaluation over the learned classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `(class, accuracy)` for every evaluated class, in class order.
    pub per_class: Vec<(usize, f64)>,
    /// Sample-weighted mean over all evaluated test samples.
    pub overall: f64,
    /// Mean AVI pattern of each evaluated class, same order as `per_class`.
    pub mean_patterns: Vec<Vec<f64>>,
}

/// Sample-weighted mean of per-class accuracies.
pub fn overall_accuracy(per_class: &[f64], counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let hits: f64 = per_class.iter().zip(counts).map(|(a, &n)| a * n as f64).sum();
    hits / total as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    /// Seconds spent on each learning step, training through evaluation.
    pub per_step_s: Vec<f64>,
    pub total_s: f64,
    /// Simulated network time across all presentations (ms).
    pub simulated_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub classes: usize,
    /// `accuracy[i][j]`: accuracy on class `j` after learning step `i`, `j <= i`.
    pub accuracy: Vec<Vec<f64>>,
    /// Sample-weighted accuracy over the learned classes after each step.
    pub overall: Vec<f64>,
    /// `patterns[i][j]`: mean test-time AVI pattern of class `j` after step `i`.
    pub patterns: Vec<Vec<Vec<f64>>>,
    /// Decoder after each learning step.
    pub decoders: Vec<DecoderWeights>,
    /// Paired presentations per training sample, `[class][sample]`.
    pub presentations: Vec<Vec<u32>>,
    pub wall_clock: WallClock,
}

impl RunReport {
    pub fn steps(&self) -> usize {
        self.accuracy.len()
    }

    /// Overall accuracy after the last completed step.
    pub fn final_top1(&self) -> Option<f64> {
        self.overall.last().copied()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.accuracy.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::Config(format!("accuracy row {i} has {} entries", row.len())));
            }
            if row.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::Config(format!("accuracy row {i} leaves [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))
    }

    /// `step,class,accuracy` rows.
    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("step,class,accuracy\n");
        for (i, row) in self.accuracy.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                let _ = writeln!(out, "{i},{j},{a}");
            }
        }
        out
    }

    /// `step,learned_classes,overall_accuracy` rows, the accuracy curve.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("step,learned_classes,overall_accuracy\n");
        for (i, a) in self.overall.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{a}", i + 1);
        }
        out
    }

    /// `step,class,rate_0,...` rows of mean AVI patterns.
    pub fn patterns_csv(&self) -> String {
        let n = self.patterns.first().and_then(|s| s.first()).map_or(0, Vec::len);
        let mut out = String::from("step,class");
        for k in 0..n {
            let _ = write!(out, ",rate_{k}");
        }
        out.push('\n');
        for (i, step) in self.patterns.iter().enumerate() {
            for (j, p) in step.iter().enumerate() {
                let _ = write!(out, "{i},{j}");
                for x in p {
                    let _ = write!(out, ",{x}");
                }
                out.push('\n');
            }
        }
        out
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na > 0.0 && nb > 0.0 {
        Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
    } else {
        None
    }
}

/// `m[c][j]`: cosine similarity between class `c`'s mean pattern after step
/// `j` and after its own learning step `c`, for `j >= c`. Entries are `None`
/// where either pattern is silent; rows hold the steps `c..steps`.
pub fn representation_stability(report: &RunReport) -> Result<Vec<Vec<Option<f64>>>> {
    let steps = report.patterns.len();
    if steps < 2 {
        return Err(Error::NotEnoughSteps { needed: 2, found: steps });
    }
    Ok((0..steps)
        .map(|c| {
            let reference = &report.patterns[c][c];
            (c..steps).map(|j| cosine(reference, &report.patterns[j][c])).collect()
        })
        .collect())
}

/// `class,step,similarity` rows; undefined entries are written as `nan`.
pub fn stability_csv(m: &[Vec<Option<f64>>]) -> String {
    let mut out = String::from("class,step,similarity\n");
    for (c, row) in m.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            match v {
                Some(v) => {
                    let _ = writeln!(out, "{c},{},{v}", c + k);
                }
                None => {
                    let _ = writeln!(out, "{c},{},nan", c + k);
                }
            }
        }
    }
    out
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes the CSV tables, decoder snapshots and `report.json` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "accuracy.csv", &report.accuracy_csv())?;
    write(dir, "curve.csv", &report.curve_csv())?;
    write(dir, "patterns.csv", &report.patterns_csv())?;
    if report.patterns.len() >= 2 {
        write(dir, "stability.csv", &stability_csv(&representation_stability(report)?))?;
    }
    for (i, w) in report.decoders.iter().enumerate() {
        w.write_matrix(&dir.join(format!("decoder_step{i}.txt")))?;
    }
    report.save_json(&dir.join("report.json"))
}
