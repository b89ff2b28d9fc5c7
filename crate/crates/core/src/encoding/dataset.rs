use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Visual feature vectors grouped by class. All values lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FvDataset {
    pub n_features: usize,
    pub split: Split,
    /// `classes[c]` holds the samples of class `c` in file order.
    pub classes: Vec<Vec<Vec<f64>>>,
}

impl FvDataset {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Writes the `FVD1` text format: header `FVD1 <N_vfv> <C> <split>`, then
/// `<class> <v1> … <vN>` per sample, classes in index order.
pub fn write_fv_dataset(ds: &FvDataset, path: &Path) -> Result<()> {
    let mut out = format!("FVD1 {} {} {}\n", ds.n_features, ds.n_classes(), ds.split);
    for (c, samples) in ds.classes.iter().enumerate() {
        for s in samples {
            let _ = write!(out, "{c}");
            for v in s {
                // `{}` on f64 prints the shortest representation that parses back exactly.
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_fv_dataset(path: &Path) -> Result<FvDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fv_dataset(&text, path)
}

fn parse_fv_dataset(text: &str, path: &Path) -> Result<FvDataset> {
    let mut lines = text.lines().enumerate();
    let header_err = |reason: String| Error::MalformedHeader {
        path: path.into(),
        reason,
    };
    let (_, header) = lines.next().ok_or_else(|| header_err("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "FVD1" {
        return Err(header_err(format!("expected `FVD1 <N_vfv> <C> <split>`, got {header:?}")));
    }
    let n_features: usize = fields[1]
        .parse()
        .map_err(|_| header_err(format!("bad feature count {:?}", fields[1])))?;
    let n_classes: usize = fields[2]
        .parse()
        .map_err(|_| header_err(format!("bad class count {:?}", fields[2])))?;
    let split: Split = fields[3].parse().map_err(header_err)?;
    if n_features == 0 || n_classes == 0 {
        return Err(header_err("feature and class counts must be positive".into()));
    }

    let mut classes = vec![Vec::new(); n_classes];
    for (i, line) in lines {
        let line_no = i + 1;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        let parse_err = |reason: String| Error::Parse {
            path: path.into(),
            line: line_no,
            reason,
        };
        let class: usize = first.parse().map_err(|_| parse_err(format!("bad class index {first:?}")))?;
        if class >= n_classes {
            return Err(parse_err(format!("class index {class} >= C = {n_classes}")));
        }
        let values = tokens
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("bad value {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n_features {
            return Err(Error::RowLength {
                path: path.into(),
                line: line_no,
                expected: n_features,
                found: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ValueOutOfRange {
                path: path.into(),
                line: line_no,
                value: bad,
            });
        }
        classes[class].push(values);
    }
    if let Some(missing) = classes.iter().position(Vec::is_empty) {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            reason: format!("header declares {n_classes} classes but class {missing} has no samples"),
        });
    }
    Ok(FvDataset {
        n_features,
        split,
        classes,
    })
}

/// Parameters of a synthetic feature dataset standing in for CNN features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub classes: usize,
    pub features: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of the per-feature Gaussian noise.
    pub noise: f64,
    /// Mean activation of a class's active features.
    pub high: f64,
    /// Mean activation of all other features.
    pub low: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            features: 15,
            train_per_class: 10,
            test_per_class: 20,
            noise: 0.05,
            high: 0.9,
            low: 0.05,
            seed: 1,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.features == 0 {
            return Err(Error::Config("synthetic dataset needs classes and features > 0".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        for (name, v) in [("high", self.high), ("low", self.low)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Class means: disjoint blocks of active features when they fit,
    /// otherwise distinct random subsets.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        let (c, n) = (self.classes, self.features);
        let block = (n / c).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6d65_616e);
        let mut actives: Vec<Vec<usize>> = Vec::with_capacity(c);
        for k in 0..c {
            if (k + 1) * block <= n {
                actives.push((k * block..(k + 1) * block).collect());
            } else {
                loop {
                    let mut cand = index::sample(&mut rng, n, block).into_vec();
                    cand.sort_unstable();
                    if !actives.contains(&cand) || actives.len() >= binomial(n, block) {
                        actives.push(cand);
                        break;
                    }
                }
            }
        }
        actives
            .into_iter()
            .map(|act| {
                let mut m = vec![self.low; n];
                for i in act {
                    m[i] = self.high;
                }
                m
            })
            .collect()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn sample_split(spec: &SynthSpec, means: &[Vec<f64>], per_class: usize, split: Split, rng: &mut ChaCha8Rng) -> FvDataset {
    let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE)).expect("finite noise");
    let classes = means
        .iter()
        .map(|mean| {
            (0..per_class)
                .map(|_| {
                    mean.iter()
                        .map(|&m| {
                            if spec.noise == 0.0 {
                                m
                            } else {
                                (m + noise.sample(rng)).clamp(0.0, 1.0)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    FvDataset {
        n_features: spec.features,
        split,
        classes,
    }
}

/// Train and test splits drawn around the same class means.
pub fn synth_fv_split(spec: &SynthSpec) -> Result<(FvDataset, FvDataset)> {
    spec.validate()?;
    let means = spec.class_means();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let train = sample_split(spec, &means, spec.train_per_class, Split::Train, &mut rng);
    rng.set_stream(1);
    let test = sample_split(spec, &means, spec.test_per_class, Split::Test, &mut rng);
    Ok((train, test))
}

/// A single synthetic split with `per_class` samples per class.
pub fn synth_fv_dataset(classes: usize, features: usize, per_class: usize, noise: f64, seed: u64) -> Result<FvDataset> {
    let spec = SynthSpec {
        classes,
        features,
        train_per_class: per_class,
        test_per_class: 0,
        noise,
        seed,
        ..SynthSpec::default()
    };
    Ok(synth_fv_split(&spec)?.0)
}
