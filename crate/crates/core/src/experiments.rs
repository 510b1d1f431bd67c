//! Experiment orchestration: configuration files, the end-to-end task
//! pipeline, Monte Carlo noise evaluation, resumable parameter sweeps, and
//! deterministic SVG plots.
//!
//! A sweep walks the Cartesian product of quantization cells (paired
//! amplitude/phase level counts × extinction ratios), noise levels, seeds,
//! and the three readout methods:
//!
//! * `full` — the trained full-precision readout (drift noise is still
//!   applied, scaled by the comparison cell's grid steps, so all methods face
//!   the same physical drift);
//! * `naive` — the full-precision readout snapped to the nearest grid point;
//! * `explorative` — the partition-retraining search seeded from the same
//!   full-precision readout.
//!
//! Every row of the results CSV is reproducible in isolation: cell-level RNG
//! streams are derived from the run seed and the cell coordinates, never from
//! execution order. Partial result files resume without recomputation and a
//! finished file rewrites byte-identically.

pub mod config;
pub mod pipeline;
pub mod plot;
pub mod sweep;

pub use config::{ExperimentConfig, Task};
pub use pipeline::{prepare, train_baseline, PreparedTask};
pub use plot::emit_plots;
pub use sweep::{monte_carlo, run_sweep, Method, NoiseStats, SweepRow, SweepStats};
