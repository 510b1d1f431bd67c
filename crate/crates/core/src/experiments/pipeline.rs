//! End-to-end task preparation: bit stream -> targets -> modulated input ->
//! reservoir simulation -> warm-up-trimmed train/val/test splits.

use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Task};
use crate::readout::ReadoutWeights;
use crate::reservoir::{build_swirl, simulate, SwirlTopology};
use crate::signals::{generate_bits, header_target, modulate, xor_target, BitSequence};
use crate::training::{init_weights, train_full, PartitionMask, SplitData, TrainOutcome};

/// A fully simulated task instance for one run seed.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub topology: SwirlTopology,
    /// Input bits of the whole stream (train ++ val ++ test).
    pub bits: BitSequence,
    /// Per-bit targets aligned with `bits`.
    pub targets: BitSequence,
    pub train: SplitData,
    pub val: SplitData,
    pub test: SplitData,
    /// Bits dropped from the start of each split (reservoir fill time plus
    /// the task's own memory).
    pub warmup_bits: usize,
    pub seed: u64,
}

/// Bits the task looks back on: targets within this distance of a split
/// start depend on earlier bits.
fn task_memory_bits(config: &ExperimentConfig) -> Result<usize> {
    Ok(match config.task {
        Task::Header => config.header_pattern_bits()?.len() - 1,
        Task::Xor => config.xor_delay,
    })
}

/// Simulate the configured task once for `seed`. One contiguous stream of
/// `n_train + n_val + n_test` bits is generated, modulated, and run through a
/// seed-specific reservoir; the state matrix is then cut into contiguous
/// train/val/test splits. The first `warmup_bits` bits of every split are
/// excluded from training and scoring: the reservoir's delay lines need
/// `ceil(max_delay / samples_per_bit)` bits to fill, and the task target
/// additionally looks back `task_memory` bits.
pub fn prepare(config: &ExperimentConfig, seed: u64) -> Result<PreparedTask> {
    config.validate()?;
    let total_bits = config.n_train_bits + config.n_val_bits + config.n_test_bits;
    let bits = generate_bits(total_bits, seed)?;

    let targets = match config.task {
        Task::Header => header_target(&bits, &config.header_pattern_bits()?)?,
        Task::Xor => {
            if config.xor_delay >= total_bits {
                return Err(Error::invalid_config(format!(
                    "xor_delay {} must be smaller than the {total_bits}-bit stream",
                    config.xor_delay
                )));
            }
            xor_target(&bits, config.xor_delay)?
        }
    };

    let spb = config.signal.samples_per_bit;
    let signal = modulate(&bits, spb, config.signal.alpha)?;
    let topology = build_swirl(
        config.topology.rows,
        config.topology.cols,
        config.topology.delay_samples,
        config.topology.waveguide_loss,
        seed,
    )?;
    let states = simulate(&topology, &signal)?;

    let warmup_bits = topology.max_delay().div_ceil(spb) + task_memory_bits(config)?;
    let boundaries = [
        (0, config.n_train_bits),
        (config.n_train_bits, config.n_train_bits + config.n_val_bits),
        (config.n_train_bits + config.n_val_bits, total_bits),
    ];
    let mut splits = Vec::with_capacity(3);
    for (name, (start, end)) in ["train", "val", "test"].iter().zip(boundaries) {
        let kept_start = start + warmup_bits;
        if kept_start >= end {
            return Err(Error::invalid_config(format!(
                "{name} split of {} bits is consumed entirely by the {warmup_bits}-bit warm-up",
                end - start
            )));
        }
        let split_states = states.slice_rows(kept_start * spb, end * spb)?;
        let split_bits = targets.slice(kept_start, end)?;
        splits.push(SplitData::new(split_states, split_bits.bits().to_vec())?);
    }
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");

    Ok(PreparedTask {
        topology,
        bits,
        targets,
        train,
        val,
        test,
        warmup_bits,
        seed,
    })
}

/// Train the full-precision baseline readout on the prepared train split,
/// starting from seed-derived random weights with every weight free.
pub fn train_baseline(
    prepared: &PreparedTask,
    config: &ExperimentConfig,
    l2_lambda: f64,
    record_history: bool,
) -> Result<TrainOutcome> {
    let n = prepared.train.states.n_nodes();
    let init = init_weights(n, prepared.seed)?;
    let mask = PartitionMask::all_free(n)?;
    let train_config = config.train_config(prepared.seed, l2_lambda);
    train_full(
        &prepared.train.states,
        &prepared.train.target_samples,
        &init,
        &mask,
        &train_config,
        record_history,
    )
}

/// Write readout weights as CSV (`node_index,amplitude,phase`).
pub fn write_weights(path: &std::path::Path, weights: &ReadoutWeights) -> Result<()> {
    weights.write_csv(path)
}
