use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Firing rate (Hz) of an input neuron at activation 1.
pub const MAX_RATE_HZ: f64 = 20.0;

fn check_activation(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::ActivationOutOfRange(v))
    }
}

/// Bernoulli approximation of a Poisson train at `MAX_RATE_HZ · v`: each step
/// of `dt` ms spikes independently with probability `rate · dt / 1000`.
pub fn poisson_spikes<R: Rng + ?Sized>(v: f64, duration_ms: f64, dt: f64, rng: &mut R) -> Result<Vec<bool>> {
    check_activation(v)?;
    let p = MAX_RATE_HZ * v * dt / 1000.0;
    let steps = (duration_ms / dt).round() as usize;
    Ok((0..steps).map(|_| rng.gen::<f64>() < p).collect())
}

/// A layer of independent Poisson inputs, one RNG stream per neuron so the
/// draws of one neuron never depend on another's.
#[derive(Debug, Clone)]
pub struct PoissonLayer {
    probs: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
}

impl PoissonLayer {
    /// `stream_base` separates layers that share a presentation seed.
    pub fn new(activations: &[f64], dt: f64, seed: u64, stream_base: u64) -> Result<Self> {
        for &v in activations {
            check_activation(v)?;
        }
        let probs = activations.iter().map(|v| MAX_RATE_HZ * v * dt / 1000.0).collect();
        let rngs = (0..activations.len())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_base + i as u64);
                rng
            })
            .collect();
        Ok(Self { probs, rngs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Draws one step into `out`.
    #[inline]
    pub fn sample(&mut self, out: &mut [bool]) {
        for ((o, &p), rng) in out.iter_mut().zip(&self.probs).zip(&mut self.rngs) {
            *o = p > 0.0 && rng.gen::<f64>() < p;
        }
    }
}
