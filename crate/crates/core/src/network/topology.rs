use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::NoscParams;
use crate::error::{Error, Result};
use crate::synapse::ConnectionClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSizes {
    pub n_v: usize,
    pub n_a: usize,
    pub n_av: usize,
    pub n_i: usize,
}

impl LayerSizes {
    /// `N_a = N_v`, `N_av = 3·N_v`, `N_i = 0.25·N_av` (rounded).
    pub fn from_visual(n_v: usize) -> Result<Self> {
        if n_v < 4 {
            return Err(Error::Config(format!("derived sizes need N_v >= 4, got {n_v}")));
        }
        let n_av = 3 * n_v;
        Ok(Self {
            n_v,
            n_a: n_v,
            n_av,
            n_i: (0.25 * n_av as f64).round() as usize,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if [self.n_v, self.n_a, self.n_av, self.n_i].contains(&0) {
            return Err(Error::Config(format!("layer sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Network configurations used for the three benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Mnist10,
    Emnist20,
    Cifar100,
}

impl Preset {
    pub fn sizes(self) -> LayerSizes {
        let (n_v, n_a, n_av, n_i) = match self {
            Preset::Mnist10 => (15, 15, 50, 12),
            Preset::Emnist20 => (20, 20, 67, 16),
            Preset::Cifar100 => (50, 50, 167, 40),
        };
        LayerSizes { n_v, n_a, n_av, n_i }
    }

    /// Feature-vector length expected by the preset.
    pub fn n_vfv(self) -> usize {
        self.sizes().n_v
    }

    pub fn nosc(self) -> NoscParams {
        let (classes, len, ones, max_overlap) = match self {
            Preset::Mnist10 => (10, 15, 3, 1),
            Preset::Emnist20 => (20, 20, 3, 1),
            Preset::Cifar100 => (100, 50, 5, 2),
        };
        NoscParams { classes, len, ones, max_overlap }
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist10" => Ok(Preset::Mnist10),
            "emnist20" => Ok(Preset::Emnist20),
            "cifar100" => Ok(Preset::Cifar100),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

/// Mean out-degree of each connection class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FanOut {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl Default for FanOut {
    fn default() -> Self {
        Self {
            s1: 4.0,
            s2: 6.0,
            s3: 1.5,
            s4: 10.0,
        }
    }
}

impl FanOut {
    pub fn of(&self, class: ConnectionClass) -> f64 {
        match class {
            ConnectionClass::S1 => self.s1,
            ConnectionClass::S2 => self.s2,
            ConnectionClass::S3 => self.s3,
            ConnectionClass::S4 => self.s4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub class: ConnectionClass,
    pub plastic: bool,
    /// `(pre, post)` pairs, grouped by presynaptic neuron.
    pub edges: Vec<(u32, u32)>,
}

impl Projection {
    pub fn out_degrees(&self, n_pre: usize) -> Vec<usize> {
        let mut d = vec![0; n_pre];
        for &(pre, _) in &self.edges {
            d[pre as usize] += 1;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub sizes: LayerSizes,
    pub seed: u64,
    /// Indexed in `ConnectionClass::ALL` order.
    pub projections: [Projection; 4],
}

impl NetworkTopology {
    pub fn projection(&self, class: ConnectionClass) -> &Projection {
        &self.projections[class as usize]
    }

    /// Pre/post layer sizes of a connection class.
    pub fn endpoints(sizes: &LayerSizes, class: ConnectionClass) -> (usize, usize) {
        match class {
            ConnectionClass::S1 => (sizes.n_v, sizes.n_av),
            ConnectionClass::S2 => (sizes.n_a, sizes.n_av),
            ConnectionClass::S3 => (sizes.n_av, sizes.n_i),
            ConnectionClass::S4 => (sizes.n_i, sizes.n_av),
        }
    }
}

/// Out-degree of each presynaptic neuron for a mean fan-out `ratio`. Integer
/// ratios are exact; fractional ones alternate between floor and ceil in a
/// seeded order so the mean matches.
fn degrees(ratio: f64, n_pre: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_pre).collect();
    order.shuffle(rng);
    let mut d = vec![0; n_pre];
    for (k, &pre) in order.iter().enumerate() {
        d[pre] = ((k + 1) as f64 * ratio).floor() as usize - (k as f64 * ratio).floor() as usize;
    }
    d
}

pub fn build_topology(sizes: LayerSizes, fan_out: FanOut, seed: u64) -> Result<NetworkTopology> {
    sizes.validate()?;
    let build = |class: ConnectionClass| -> Result<Projection> {
        let (n_pre, n_post) = NetworkTopology::endpoints(&sizes, class);
        let ratio = fan_out.of(class);
        if !(ratio >= 0.0 && ratio.is_finite()) {
            return Err(Error::Config(format!("{class:?} fan-out must be non-negative, got {ratio}")));
        }
        if ratio.ceil() as usize > n_post {
            return Err(Error::Config(format!(
                "{class:?} fan-out {ratio} exceeds postsynaptic layer size {n_post}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64 + 1);
        let deg = degrees(ratio, n_pre, &mut rng);
        let mut edges = Vec::with_capacity(deg.iter().sum());
        for (pre, &k) in deg.iter().enumerate() {
            let mut targets = index::sample(&mut rng, n_post, k).into_vec();
            targets.sort_unstable();
            edges.extend(targets.into_iter().map(|post| (pre as u32, post as u32)));
        }
        Ok(Projection {
            class,
            plastic: class == ConnectionClass::S1,
            edges,
        })
    };
    Ok(NetworkTopology {
        sizes,
        seed,
        projections: [
            build(ConnectionClass::S1)?,
            build(ConnectionClass::S2)?,
            build(ConnectionClass::S3)?,
            build(ConnectionClass::S4)?,
        ],
    })
}

/// Writes `EDGES1 <N_v> <N_a> <N_av> <N_i> <seed>` followed by `<class> <pre> <post>` lines.
pub fn write_topology(topo: &NetworkTopology, path: &Path) -> Result<()> {
    let s = topo.sizes;
    let mut out = format!("EDGES1 {} {} {} {} {}\n", s.n_v, s.n_a, s.n_av, s.n_i, topo.seed);
    for p in &topo.projections {
        for &(pre, post) in &p.edges {
            let _ = writeln!(out, "{:?} {pre} {post}", p.class);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_topology(path: &Path) -> Result<NetworkTopology> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let bad_header = |reason: &str| Error::MalformedHeader {
        path: path.into(),
        reason: reason.into(),
    };
    let (_, header) = lines.next().ok_or_else(|| bad_header("empty file"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 6 || f[0] != "EDGES1" {
        return Err(bad_header("expected `EDGES1 <N_v> <N_a> <N_av> <N_i> <seed>`"));
    }
    let num = |s: &str| s.parse::<u64>().map_err(|_| bad_header(&format!("not an integer: {s}")));
    let sizes = LayerSizes {
        n_v: num(f[1])? as usize,
        n_a: num(f[2])? as usize,
        n_av: num(f[3])? as usize,
        n_i: num(f[4])? as usize,
    };
    sizes.validate()?;
    let seed = num(f[5])?;
    let mut edges: [Vec<(u32, u32)>; 4] = Default::default();
    for (i, line) in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: path.into(),
            line: i + 1,
            reason,
        };
        if t.len() != 3 {
            return Err(err(format!("expected `<class> <pre> <post>`, got {line:?}")));
        }
        let class = match t[0] {
            "S1" => ConnectionClass::S1,
            "S2" => ConnectionClass::S2,
            "S3" => ConnectionClass::S3,
            "S4" => ConnectionClass::S4,
            other => return Err(err(format!("unknown connection class {other:?}"))),
        };
        let pre: u32 = t[1].parse().map_err(|_| err(format!("bad index {:?}", t[1])))?;
        let post: u32 = t[2].parse().map_err(|_| err(format!("bad index {:?}", t[2])))?;
        let (n_pre, n_post) = NetworkTopology::endpoints(&sizes, class);
        if pre as usize >= n_pre || post as usize >= n_post {
            return Err(err(format!("edge ({pre}, {post}) out of range for {class:?}")));
        }
        edges[class as usize].push((pre, post));
    }
    let [e1, e2, e3, e4] = edges;
    let proj = |class, edges| Projection {
        class,
        plastic: class == ConnectionClass::S1,
        edges,
    };
    Ok(NetworkTopology {
        sizes,
        seed,
        projections: [
            proj(ConnectionClass::S1, e1),
            proj(ConnectionClass::S2, e2),
            proj(ConnectionClass::S3, e3),
            proj(ConnectionClass::S4, e4),
        ],
    })
}
