//! Simulation and training toolkit for passive coherent photonic reservoirs
//! with an integrated optical readout.
//!
//! The pipeline in one sentence: a bit stream is intensity-modulated onto an
//! optical carrier, fed through a 4-port swirl reservoir simulated as a
//! discrete-time coherent linear circuit, weighted per node in amplitude and
//! phase, combined, and detected by a single photodiode whose `|z|^2`
//! response is the only nonlinearity in the system.
//!
//! The interesting part is what happens when the readout weights are realized
//! by imperfect hardware: a finite number of settable levels, an extinction
//! ratio that forbids fully blocking light, and Gaussian drift on every
//! element. [`quantization`] models those constraints, [`training`] trains
//! through the photodiode with full-batch Adam, and [`explorative`]
//! implements the partition-retraining search that recovers most of the
//! full-resolution performance on heavily quantized weights.
//!
//! [`experiments`] ties everything together into reproducible, resumable
//! parameter sweeps and plots; the `phorc` binary exposes them on the
//! command line.

pub mod error;
pub mod experiments;
pub mod explorative;
pub mod quantization;
pub mod readout;
pub mod reservoir;
pub mod rng;
pub mod signals;
pub mod training;

pub use error::{Error, Result};
