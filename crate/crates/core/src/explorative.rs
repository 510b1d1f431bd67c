//! Explorative partition retraining: recover quantization losses by
//! repeatedly retraining a randomly chosen free subset of the quantized
//! readout weights while the rest stay frozen on their grid values.
//!
//! Starting from the direct quantization of a fully trained full-precision
//! readout, each iteration draws `n_partitions` random free/frozen splits,
//! retrains the free weights continuously from the incumbent's values,
//! requantizes, and scores on the validation split (threshold refit on the
//! training split). A challenger replaces the incumbent only when strictly
//! better by `(BER, MSE)` lexicographic order, so the incumbent wins ties and
//! among tied challengers the lowest candidate index wins. The free fraction
//! starts at `1 - initial_fixed_ratio` and shrinks by `ratio_growth` each
//! iteration.
//!
//! Candidate draws use an RNG derived from `(seed, PARTITION, iteration,
//! candidate)`, so results are independent of thread scheduling; parallel and
//! serial runs are bit-identical.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantization::{direct_quantize, QuantizationSpec};
use crate::readout::ReadoutWeights;
use crate::rng::{derive_rng, stream};
use crate::training::{
    evaluate, init_weights, train, PartitionMask, SplitData, ThresholdSource, TrainConfig,
};

/// Schedule of the explorative search.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorativeConfig {
    /// Fraction of weights frozen in the first iteration (free fraction is
    /// `1 - initial_fixed_ratio`).
    pub initial_fixed_ratio: f64,
    /// Random partitions drawn per iteration.
    pub n_partitions: usize,
    pub n_iterations: usize,
    /// Factor by which the free fraction shrinks between iterations.
    pub ratio_growth: f64,
    pub seed: u64,
}

impl Default for ExplorativeConfig {
    fn default() -> Self {
        Self {
            initial_fixed_ratio: 0.5,
            n_partitions: 20,
            n_iterations: 4,
            ratio_growth: 2.0,
            seed: 1,
        }
    }
}

impl ExplorativeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_fixed_ratio > 0.0 && self.initial_fixed_ratio < 1.0) {
            return Err(Error::invalid_argument(format!(
                "initial_fixed_ratio must lie in (0, 1), got {}",
                self.initial_fixed_ratio
            )));
        }
        if self.n_partitions == 0 {
            return Err(Error::invalid_argument("n_partitions must be >= 1"));
        }
        if self.n_iterations == 0 {
            return Err(Error::invalid_argument("n_iterations must be >= 1"));
        }
        if self.ratio_growth <= 0.0 || !self.ratio_growth.is_finite() {
            return Err(Error::invalid_argument(
                "ratio_growth must be finite and > 0",
            ));
        }
        Ok(())
    }

    /// Free weights in iteration `i` (1-based) for `n` weights total.
    pub fn n_free(&self, iteration: usize, n: usize) -> usize {
        let rho = (1.0 - self.initial_fixed_ratio) / self.ratio_growth.powi(iteration as i32 - 1);
        ((rho * n as f64).ceil() as usize).min(n)
    }
}

/// One scored configuration in the search log. `candidate` is `None` for the
/// incumbent entering an iteration (or the initial direct quantization at
/// iteration 0); exactly one record per logged iteration has `selected`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub iteration: usize,
    pub candidate: Option<usize>,
    pub n_free: usize,
    pub val_ber: f64,
    pub val_mse: f64,
    pub selected: bool,
}

/// Result of the explorative search.
#[derive(Debug, Clone)]
pub struct ExplorativeOutcome {
    /// Final incumbent; every weight lies exactly on the quantization grid.
    pub weights: ReadoutWeights,
    /// The full-precision readout the search started from.
    pub full_precision: ReadoutWeights,
    /// Direct quantization of `full_precision` (the iteration-0 incumbent).
    pub direct: ReadoutWeights,
    pub log: Vec<CandidateRecord>,
    pub final_val_ber: f64,
    pub final_val_mse: f64,
}

/// Validation score of `weights` with the decision threshold refit on the
/// training split. Returns `(val_ber, val_mse)`.
pub fn score_candidate(
    weights: &ReadoutWeights,
    train_split: &SplitData,
    val_split: &SplitData,
) -> Result<(f64, f64)> {
    let train_rep = evaluate(
        &train_split.states,
        weights,
        &train_split.target_bits,
        train_split.samples_per_bit(),
        ThresholdSource::FitSelf,
    )?;
    let val_rep = evaluate(
        &val_split.states,
        weights,
        &val_split.target_bits,
        val_split.samples_per_bit(),
        ThresholdSource::Fixed(train_rep.threshold),
    )?;
    Ok((val_rep.ber, val_rep.mse))
}

/// Train a full-precision readout from scratch, then run the explorative
/// search on its quantization. `train_config` drives the baseline training,
/// `retrain_config` each candidate retraining.
pub fn explorative_retrain(
    train_split: &SplitData,
    val_split: &SplitData,
    qspec: &QuantizationSpec,
    train_config: &TrainConfig,
    retrain_config: &TrainConfig,
    explore: &ExplorativeConfig,
) -> Result<ExplorativeOutcome> {
    let n = train_split.states.n_nodes();
    let init = init_weights(n, train_config.seed)?;
    let mask = PartitionMask::all_free(n)?;
    let full_precision = train(
        &train_split.states,
        &train_split.target_samples,
        &init,
        &mask,
        train_config,
    )?;
    explorative_retrain_from(
        &full_precision,
        train_split,
        val_split,
        qspec,
        retrain_config,
        explore,
    )
}

/// Explorative search starting from an already trained full-precision
/// readout (useful when the same baseline feeds several quantization specs).
pub fn explorative_retrain_from(
    full_precision: &ReadoutWeights,
    train_split: &SplitData,
    val_split: &SplitData,
    qspec: &QuantizationSpec,
    retrain_config: &TrainConfig,
    explore: &ExplorativeConfig,
) -> Result<ExplorativeOutcome> {
    explore.validate()?;
    retrain_config.validate()?;
    let n = train_split.states.n_nodes();
    if full_precision.len() != n {
        return Err(Error::invalid_argument(format!(
            "{} weights for {} reservoir nodes",
            full_precision.len(),
            n
        )));
    }

    let direct = direct_quantize(full_precision, qspec);
    let mut incumbent = direct.clone();
    let mut incumbent_score = score_candidate(&incumbent, train_split, val_split)?;
    let mut log = vec![CandidateRecord {
        iteration: 0,
        candidate: None,
        n_free: 0,
        val_ber: incumbent_score.0,
        val_mse: incumbent_score.1,
        selected: true,
    }];

    for iteration in 1..=explore.n_iterations {
        let n_free = explore.n_free(iteration, n);
        if n_free == 0 {
            log::warn!(
                "explorative iteration {iteration}: free fraction underflowed to zero weights, skipping"
            );
            continue;
        }

        // Candidates are scored in parallel; each draws from its own derived
        // RNG, so the outcome is order- and scheduling-independent.
        let candidates: Vec<(usize, ReadoutWeights, (f64, f64))> = (0..explore.n_partitions)
            .into_par_iter()
            .map(|c| -> Result<(usize, ReadoutWeights, (f64, f64))> {
                let mut rng = derive_rng(
                    explore.seed,
                    &[stream::PARTITION, iteration as u64, c as u64],
                );
                let free = rand::seq::index::sample(&mut rng, n, n_free).into_vec();
                let mask = PartitionMask::from_free_indices(n, &free)?;
                let trained = train(
                    &train_split.states,
                    &train_split.target_samples,
                    &incumbent,
                    &mask,
                    retrain_config,
                )?;
                let requantized = direct_quantize(&trained, qspec);
                let score = score_candidate(&requantized, train_split, val_split)?;
                Ok((c, requantized, score))
            })
            .collect::<Result<_>>()?;

        log.push(CandidateRecord {
            iteration,
            candidate: None,
            n_free,
            val_ber: incumbent_score.0,
            val_mse: incumbent_score.1,
            selected: false,
        });
        let incumbent_row = log.len() - 1;

        let mut winner: Option<usize> = None;
        for (c, weights, score) in &candidates {
            log.push(CandidateRecord {
                iteration,
                candidate: Some(*c),
                n_free,
                val_ber: score.0,
                val_mse: score.1,
                selected: false,
            });
            // Strict lexicographic improvement; ties keep the incumbent (or
            // the earlier challenger).
            let better = score.0 < incumbent_score.0
                || (score.0 == incumbent_score.0 && score.1 < incumbent_score.1);
            if better {
                incumbent = weights.clone();
                incumbent_score = *score;
                winner = Some(log.len() - 1);
            }
        }
        let selected_row = winner.unwrap_or(incumbent_row);
        log[selected_row].selected = true;
    }

    Ok(ExplorativeOutcome {
        weights: incumbent,
        full_precision: full_precision.clone(),
        direct,
        log,
        final_val_ber: incumbent_score.0,
        final_val_mse: incumbent_score.1,
    })
}

/// Write the search log as CSV (`iteration,candidate,n_free,val_ber,val_mse,selected`;
/// an empty candidate field marks incumbent rows).
pub fn write_candidate_log(path: &std::path::Path, log: &[CandidateRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path.to_path_buf(), std::io::Error::other(e)))?;
    writer.write_record([
        "iteration",
        "candidate",
        "n_free",
        "val_ber",
        "val_mse",
        "selected",
    ])?;
    for r in log {
        writer.write_record([
            r.iteration.to_string(),
            r.candidate.map(|c| c.to_string()).unwrap_or_default(),
            r.n_free.to_string(),
            format!("{}", r.val_ber),
            format!("{}", r.val_mse),
            r.selected.to_string(),
        ])?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.to_path_buf(), e))?;
    Ok(())
}
