pub mod decoder;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod network;
pub mod neuron;
pub mod stc;
pub mod synapse;

pub use error::{Error, Result};
