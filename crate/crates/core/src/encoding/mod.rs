//! Input side of the network: auditory codes, visual feature datasets and
//! rate-coded Poisson spike generation.

mod dataset;
mod nosc;
mod poisson;

pub use dataset::{load_fv_dataset, synth_fv_dataset, synth_fv_split, write_fv_dataset, FvDataset, Split, SynthSpec};
pub use nosc::{generate_nosc, generate_nosc_with_budget, load_nosc, write_nosc, NoscCodebook, NoscParams, DEFAULT_DRAW_BUDGET};
pub use poisson::{poisson_spikes, PoissonLayer, MAX_RATE_HZ};
