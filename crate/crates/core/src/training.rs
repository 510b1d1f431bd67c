//! Readout training and evaluation: full-batch Adam on MSE-through-photodiode
//! loss with L2 amplitude regularization, per-weight freeze masks, and
//! threshold-based bit-error-rate evaluation.
//!
//! The loss over the `T` aligned samples is
//! `L = (1/T) * sum_t (|z[t]|^2 - d[t])^2 + lambda * sum_k a_k^2` with
//! `z[t] = sum_k a_k exp(i*phi_k) x_k[t]`. Gradients flow through the
//! photodiode analytically:
//! `dy/da_k = 2 Re(conj(z) exp(i*phi_k) x_k)` and
//! `dy/dphi_k = 2 Re(conj(z) i a_k exp(i*phi_k) x_k)`.
//! Training is full-batch (the streams are short) and deterministic given its
//! inputs; amplitudes are projected back into [0, 1] and phases wrapped after
//! every step, and frozen weights are returned bit-identical.
//!
//! Bit decisions use the mean detected intensity over each bit's samples; the
//! decision threshold is fitted on training statistics by exhaustive scan
//! over the midpoints of adjacent sorted statistics (plus sentinels below and
//! above), picking the lowest-BER threshold and breaking ties toward the
//! lowest value.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::readout::{forward, wrap_phase, ReadoutWeights};
use crate::reservoir::StateMatrix;
use crate::rng::{derive_rng, stream};

const TAU: f64 = std::f64::consts::TAU;

/// Regularization grid searched when no explicit value is configured.
pub const L2_LAMBDA_GRID: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_lambda: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Seeds weight initialization helpers; the Adam loop itself draws no
    /// randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 2000,
            l2_lambda: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::invalid_argument("learning_rate must be > 0"));
        }
        if self.l2_lambda < 0.0 || !self.l2_lambda.is_finite() {
            return Err(Error::invalid_argument("l2_lambda must be >= 0"));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid_argument(format!(
                    "{name} must lie in (0, 1), got {b}"
                )));
            }
        }
        if self.adam_epsilon <= 0.0 || !self.adam_epsilon.is_finite() {
            return Err(Error::invalid_argument("adam_epsilon must be > 0"));
        }
        Ok(())
    }
}

/// Free/frozen partition over weight pairs; `true` marks a retrained weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMask {
    free: Vec<bool>,
}

impl PartitionMask {
    pub fn new(free: Vec<bool>) -> Result<Self> {
        if free.is_empty() {
            return Err(Error::invalid_argument(
                "mask must cover at least one weight",
            ));
        }
        Ok(Self { free })
    }

    /// Mask with every weight retrained.
    pub fn all_free(n: usize) -> Result<Self> {
        Self::new(vec![true; n])
    }

    /// Mask freeing exactly the listed weight indices.
    pub fn from_free_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut free = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(Error::invalid_argument(format!(
                    "free index {i} out of range for {n} weights"
                )));
            }
            free[i] = true;
        }
        Self::new(free)
    }

    pub fn free(&self) -> &[bool] {
        &self.free
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn n_free(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        self.free
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }
}

/// BER/MSE statistics of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Misclassified bits / evaluated bits.
    pub ber: f64,
    /// Mean squared per-sample error of the detected intensity.
    pub mse: f64,
    /// Decision threshold applied to the per-bit mean intensity.
    pub threshold: f64,
    pub n_bits_evaluated: usize,
}

/// Where [`evaluate`] takes its decision threshold from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSource {
    /// Fit the threshold on this evaluation's own statistics (used on the
    /// training split).
    FitSelf,
    /// Apply a threshold fitted elsewhere (training-split fit applied to
    /// validation/test).
    Fixed(f64),
}

/// A state matrix aligned with its per-bit targets; warm-up has already been
/// trimmed by the caller. The per-sample target holds each bit's value
/// constant over that bit's samples.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub states: StateMatrix,
    pub target_bits: Vec<u8>,
    pub target_samples: Vec<f64>,
}

impl SplitData {
    pub fn new(states: StateMatrix, target_bits: Vec<u8>) -> Result<Self> {
        if target_bits.is_empty() {
            return Err(Error::invalid_argument(
                "split must contain at least one bit",
            ));
        }
        if target_bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid_argument("target bits must be 0 or 1"));
        }
        let spb = states.samples_per_bit();
        if states.n_steps() != target_bits.len() * spb {
            return Err(Error::invalid_argument(format!(
                "{} state steps do not cover {} bits at {} samples per bit",
                states.n_steps(),
                target_bits.len(),
                spb
            )));
        }
        let target_samples = target_bits
            .iter()
            .flat_map(|&b| std::iter::repeat_n(f64::from(b), spb))
            .collect();
        Ok(Self {
            states,
            target_bits,
            target_samples,
        })
    }

    pub fn samples_per_bit(&self) -> usize {
        self.states.samples_per_bit()
    }

    pub fn n_bits(&self) -> usize {
        self.target_bits.len()
    }
}

/// Random initial weights: amplitudes uniform in [0.1, 0.9], phases uniform
/// in [0, 2*pi) (all amplitudes drawn first, then all phases).
pub fn init_weights(n: usize, seed: u64) -> Result<ReadoutWeights> {
    if n == 0 {
        return Err(Error::invalid_argument("weight count must be >= 1"));
    }
    let mut rng = derive_rng(seed, &[stream::WEIGHT_INIT]);
    let amps: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
    let phases: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    ReadoutWeights::new(amps, phases)
}

fn check_alignment(states: &StateMatrix, weights: &ReadoutWeights, targets: &[f64]) -> Result<()> {
    if states.n_nodes() != weights.len() {
        return Err(Error::invalid_argument(format!(
            "{} reservoir nodes but {} weights",
            states.n_nodes(),
            weights.len()
        )));
    }
    if states.n_steps() != targets.len() {
        return Err(Error::invalid_argument(format!(
            "{} state steps but {} target samples",
            states.n_steps(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::invalid_argument("target series must be non-empty"));
    }
    Ok(())
}

/// MSE-through-photodiode loss with L2 amplitude regularization.
pub fn loss(
    states: &StateMatrix,
    weights: &ReadoutWeights,
    target_samples: &[f64],
    l2_lambda: f64,
) -> Result<f64> {
    check_alignment(states, weights, target_samples)?;
    let y = forward(states, weights)?;
    let t_len = y.len() as f64;
    let mse: f64 = y
        .iter()
        .zip(target_samples)
        .map(|(yt, dt)| (yt - dt) * (yt - dt))
        .sum::<f64>()
        / t_len;
    let reg: f64 = weights.amplitudes().iter().map(|a| a * a).sum::<f64>() * l2_lambda;
    Ok(mse + reg)
}

/// Analytic gradient of [`loss`] with respect to every amplitude and phase.
pub fn gradient(
    states: &StateMatrix,
    weights: &ReadoutWeights,
    target_samples: &[f64],
    l2_lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_alignment(states, weights, target_samples)?;
    let n = weights.len();
    let t_len = states.n_steps();
    let w = weights.complex_weights();
    let values = states.values();

    // c_k = sum_t e[t] * conj(z[t]) * x_k[t]; then
    // dL/da_k = (4/T) Re(e^{i phi_k} c_k) + 2 lambda a_k and
    // dL/dphi_k = -(4/T) a_k Im(e^{i phi_k} c_k).
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for (t, row) in values.rows().into_iter().enumerate() {
        let mut z = Complex64::new(0.0, 0.0);
        for (x, wk) in row.iter().zip(&w) {
            z += wk * x;
        }
        let e = z.norm_sqr() - target_samples[t];
        let g = e * z.conj();
        for (ck, x) in c.iter_mut().zip(row.iter()) {
            *ck += g * x;
        }
    }

    let scale = 4.0 / t_len as f64;
    let mut grad_a = Vec::with_capacity(n);
    let mut grad_p = Vec::with_capacity(n);
    for ((&a, &phi), ck) in weights.amplitudes().iter().zip(weights.phases()).zip(&c) {
        let u = Complex64::from_polar(1.0, phi);
        let uc = u * ck;
        grad_a.push(scale * uc.re + 2.0 * l2_lambda * a);
        grad_p.push(-scale * a * uc.im);
    }
    Ok((grad_a, grad_p))
}

/// Result of [`train_full`]: trained weights plus the loss trajectory.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: ReadoutWeights,
    /// Loss before the first update.
    pub initial_loss: f64,
    /// Loss after the final update.
    pub final_loss: f64,
    /// Per-epoch losses: entry `e` is the loss before update `e`, with the
    /// final loss appended (present when history recording was requested).
    pub history: Option<Vec<f64>>,
}

/// [`train_full`] without history recording, returning just the weights.
pub fn train(
    states: &StateMatrix,
    target_samples: &[f64],
    init: &ReadoutWeights,
    mask: &PartitionMask,
    config: &TrainConfig,
) -> Result<ReadoutWeights> {
    train_full(states, target_samples, init, mask, config, false).map(|o| o.weights)
}

/// Run `config.epochs` full-batch Adam steps on the free weights, projecting
/// amplitudes into [0, 1] and wrapping phases after every step. Frozen
/// weights are returned bit-identical to `init`.
pub fn train_full(
    states: &StateMatrix,
    target_samples: &[f64],
    init: &ReadoutWeights,
    mask: &PartitionMask,
    config: &TrainConfig,
    record_history: bool,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_alignment(states, init, target_samples)?;
    if mask.len() != init.len() {
        return Err(Error::invalid_argument(format!(
            "mask covers {} weights but there are {}",
            mask.len(),
            init.len()
        )));
    }
    let n_free = mask.n_free();
    if n_free == 0 {
        return Err(Error::invalid_argument(
            "training requires at least one free weight",
        ));
    }

    let t_len = states.n_steps();
    let values = states.values();
    let free_idx = mask.free_indices();

    // Frozen weights contribute a constant field; fold it once.
    let w_init = init.complex_weights();
    let mut z_frozen = vec![Complex64::new(0.0, 0.0); t_len];
    for (k, (&frozen_free, &wk)) in mask.free().iter().zip(&w_init).enumerate() {
        if !frozen_free {
            for (zf, x) in z_frozen.iter_mut().zip(values.column(k)) {
                *zf += wk * x;
            }
        }
    }
    // Contiguous per-node columns for the free weights.
    let cols: Vec<Vec<Complex64>> = free_idx
        .iter()
        .map(|&k| values.column(k).to_vec())
        .collect();

    let mut amps = init.amplitudes().to_vec();
    let mut phases = init.phases().to_vec();

    // Adam state over the free parameters: slot f is amplitude f, slot
    // n_free + f is phase f.
    let mut m = vec![0.0f64; 2 * n_free];
    let mut v = vec![0.0f64; 2 * n_free];
    let mut b1t = 1.0f64;
    let mut b2t = 1.0f64;

    let mut z = vec![Complex64::new(0.0, 0.0); t_len];
    let mut g = vec![Complex64::new(0.0, 0.0); t_len];
    let inv_t = 1.0 / t_len as f64;
    let scale = 4.0 * inv_t;
    let lambda = config.l2_lambda;

    let mut history = record_history.then(|| Vec::with_capacity(config.epochs + 1));
    let mut initial_loss = None;

    let current_loss = |z: &[Complex64], amps: &[f64], d: &[f64]| -> f64 {
        let mse: f64 = z
            .iter()
            .zip(d)
            .map(|(zt, dt)| {
                let e = zt.norm_sqr() - dt;
                e * e
            })
            .sum::<f64>()
            * inv_t;
        mse + lambda * amps.iter().map(|a| a * a).sum::<f64>()
    };

    for _epoch in 0..config.epochs {
        // Pass 1: combined field z[t] = z_frozen[t] + sum_f w_f x_f[t].
        z.copy_from_slice(&z_frozen);
        for (f, col) in cols.iter().enumerate() {
            let k = free_idx[f];
            let wk = Complex64::from_polar(amps[k], phases[k]);
            for (zt, &x) in z.iter_mut().zip(col) {
                *zt += wk * x;
            }
        }

        // Pass 2: residuals and the shared factor g[t] = e[t] * conj(z[t]).
        let mut sq_err = 0.0f64;
        for (gt, (zt, dt)) in g.iter_mut().zip(z.iter().zip(target_samples)) {
            let e = zt.norm_sqr() - dt;
            sq_err += e * e;
            *gt = e * zt.conj();
        }
        let epoch_loss = sq_err * inv_t + lambda * amps.iter().map(|a| a * a).sum::<f64>();
        if !epoch_loss.is_finite() {
            return Err(Error::numerical(format!(
                "loss became non-finite at epoch {_epoch}"
            )));
        }
        if initial_loss.is_none() {
            initial_loss = Some(epoch_loss);
        }
        if let Some(h) = history.as_mut() {
            h.push(epoch_loss);
        }

        // Adam step on the free parameters.
        b1t *= config.adam_beta1;
        b2t *= config.adam_beta2;
        let mc = 1.0 / (1.0 - b1t);
        let vc = 1.0 / (1.0 - b2t);
        for (f, col) in cols.iter().enumerate() {
            let k = free_idx[f];
            let mut c = Complex64::new(0.0, 0.0);
            for (gt, &x) in g.iter().zip(col) {
                c += gt * x;
            }
            let u = Complex64::from_polar(1.0, phases[k]);
            let uc = u * c;
            let grad_a = scale * uc.re + 2.0 * lambda * amps[k];
            let grad_p = -scale * amps[k] * uc.im;

            for (slot, grad, theta) in [
                (f, grad_a, &mut amps[k]),
                (n_free + f, grad_p, &mut phases[k]),
            ] {
                m[slot] = config.adam_beta1 * m[slot] + (1.0 - config.adam_beta1) * grad;
                v[slot] = config.adam_beta2 * v[slot] + (1.0 - config.adam_beta2) * grad * grad;
                let mhat = m[slot] * mc;
                let vhat = v[slot] * vc;
                *theta -= config.learning_rate * mhat / (vhat.sqrt() + config.adam_epsilon);
            }
            amps[k] = amps[k].clamp(0.0, 1.0);
            phases[k] = wrap_phase(phases[k]);
        }
    }

    // Loss at the final weights (one extra forward pass).
    z.copy_from_slice(&z_frozen);
    for (f, col) in cols.iter().enumerate() {
        let k = free_idx[f];
        let wk = Complex64::from_polar(amps[k], phases[k]);
        for (zt, &x) in z.iter_mut().zip(col) {
            *zt += wk * x;
        }
    }
    let final_loss = current_loss(&z, &amps, target_samples);
    if !final_loss.is_finite() {
        return Err(Error::numerical("final training loss is non-finite"));
    }
    let initial_loss = initial_loss.unwrap_or(final_loss);
    if let Some(h) = history.as_mut() {
        h.push(final_loss);
    }

    Ok(TrainOutcome {
        weights: ReadoutWeights::new(amps, phases)?,
        initial_loss,
        final_loss,
        history,
    })
}

/// Mean detected intensity per bit (the decision statistic).
pub fn bit_statistics(y: &[f64], samples_per_bit: usize) -> Result<Vec<f64>> {
    if samples_per_bit == 0 {
        return Err(Error::invalid_argument("samples_per_bit must be >= 1"));
    }
    if y.is_empty() || !y.len().is_multiple_of(samples_per_bit) {
        return Err(Error::invalid_argument(format!(
            "{} samples do not form whole bits of {samples_per_bit}",
            y.len()
        )));
    }
    Ok(y.chunks_exact(samples_per_bit)
        .map(|chunk| chunk.iter().sum::<f64>() / samples_per_bit as f64)
        .collect())
}

/// Exhaustively scan thresholds (sentinels below/above plus all midpoints of
/// adjacent distinct sorted statistics), minimizing training BER; ties take
/// the lowest threshold. Decision rule: statistic >= threshold reads as 1.
/// Returns `(threshold, ber)`.
pub fn fit_threshold(stats: &[f64], bits: &[u8]) -> Result<(f64, f64)> {
    if stats.is_empty() || stats.len() != bits.len() {
        return Err(Error::invalid_argument(format!(
            "{} statistics vs {} bits",
            stats.len(),
            bits.len()
        )));
    }
    if stats.iter().any(|s| !s.is_finite()) {
        return Err(Error::numerical("bit statistics contain non-finite values"));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid_argument("bits must be 0 or 1"));
    }

    let n = stats.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| stats[i].total_cmp(&stats[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| stats[i]).collect();
    let labels: Vec<u8> = order.iter().map(|&i| bits[i]).collect();

    let total_ones: usize = labels.iter().map(|&b| usize::from(b)).sum();
    // errors(cut) with bits at sorted positions >= cut predicted 1:
    // ones in the prefix [0, cut) plus zeros in the suffix [cut, n).
    let mut prefix_ones = 0usize;
    let errors_at = |prefix_ones: usize, cut: usize| -> usize {
        let suffix_zeros = (n - cut) - (total_ones - prefix_ones);
        prefix_ones + suffix_zeros
    };

    // cut = 0: everything predicted 1 (threshold below the minimum).
    let mut best_err = errors_at(0, 0);
    let mut best_threshold = sorted[0] - 1.0;
    for cut in 1..=n {
        prefix_ones += usize::from(labels[cut - 1]);
        if cut < n {
            if sorted[cut - 1] < sorted[cut] {
                let err = errors_at(prefix_ones, cut);
                if err < best_err {
                    best_err = err;
                    best_threshold = sorted[cut - 1] + (sorted[cut] - sorted[cut - 1]) / 2.0;
                }
            }
        } else {
            // cut = n: everything predicted 0 (threshold above the maximum).
            let err = errors_at(prefix_ones, n);
            if err < best_err {
                best_err = err;
                best_threshold = sorted[n - 1] + 1.0;
            }
        }
    }
    Ok((best_threshold, best_err as f64 / n as f64))
}

/// Threshold-detect the per-bit mean intensity and report BER and MSE.
pub fn evaluate(
    states: &StateMatrix,
    weights: &ReadoutWeights,
    target_bits: &[u8],
    samples_per_bit: usize,
    threshold_source: ThresholdSource,
) -> Result<EvalReport> {
    if target_bits.is_empty() {
        return Err(Error::invalid_argument("evaluation set must be non-empty"));
    }
    if samples_per_bit != states.samples_per_bit() {
        return Err(Error::invalid_argument(format!(
            "samples_per_bit {samples_per_bit} does not match the state matrix ({})",
            states.samples_per_bit()
        )));
    }
    if states.n_steps() != target_bits.len() * samples_per_bit {
        return Err(Error::invalid_argument(format!(
            "{} state steps do not cover {} bits at {samples_per_bit} samples per bit",
            states.n_steps(),
            target_bits.len()
        )));
    }
    if target_bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid_argument("target bits must be 0 or 1"));
    }

    let y = forward(states, weights)?;
    let stats = bit_statistics(&y, samples_per_bit)?;
    let threshold = match threshold_source {
        ThresholdSource::FitSelf => fit_threshold(&stats, target_bits)?.0,
        ThresholdSource::Fixed(t) => {
            if !t.is_finite() {
                return Err(Error::invalid_argument("threshold must be finite"));
            }
            t
        }
    };

    let n_bits = target_bits.len();
    let errors = stats
        .iter()
        .zip(target_bits)
        .filter(|(&s, &b)| u8::from(s >= threshold) != b)
        .count();
    let mse = y
        .iter()
        .zip(
            target_bits
                .iter()
                .flat_map(|&b| std::iter::repeat_n(f64::from(b), samples_per_bit)),
        )
        .map(|(yt, dt)| (yt - dt) * (yt - dt))
        .sum::<f64>()
        / y.len() as f64;
    if !mse.is_finite() {
        return Err(Error::numerical("evaluation MSE is non-finite"));
    }

    Ok(EvalReport {
        ber: errors as f64 / n_bits as f64,
        mse,
        threshold,
        n_bits_evaluated: n_bits,
    })
}

/// Score of one regularization candidate on the validation split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaScore {
    pub lambda: f64,
    pub val_ber: f64,
    pub val_mse: f64,
}

/// Grid-search the L2 regularization strength: train at each candidate from
/// the same initialization, score on validation (threshold fitted on the
/// training split), and pick the lowest validation BER, breaking ties by
/// validation MSE and then by candidate order.
pub fn select_l2_lambda(
    train_split: &SplitData,
    val_split: &SplitData,
    base: &TrainConfig,
    candidates: &[f64],
) -> Result<(f64, Vec<LambdaScore>)> {
    if candidates.is_empty() {
        return Err(Error::invalid_argument("lambda grid must be non-empty"));
    }
    let n = train_split.states.n_nodes();
    let init = init_weights(n, base.seed)?;
    let mask = PartitionMask::all_free(n)?;

    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<LambdaScore> = None;
    for &lambda in candidates {
        let cfg = TrainConfig {
            l2_lambda: lambda,
            ..base.clone()
        };
        let weights = train(
            &train_split.states,
            &train_split.target_samples,
            &init,
            &mask,
            &cfg,
        )?;
        let train_rep = evaluate(
            &train_split.states,
            &weights,
            &train_split.target_bits,
            train_split.samples_per_bit(),
            ThresholdSource::FitSelf,
        )?;
        let val_rep = evaluate(
            &val_split.states,
            &weights,
            &val_split.target_bits,
            val_split.samples_per_bit(),
            ThresholdSource::Fixed(train_rep.threshold),
        )?;
        let score = LambdaScore {
            lambda,
            val_ber: val_rep.ber,
            val_mse: val_rep.mse,
        };
        scores.push(score);
        let better = match &best {
            None => true,
            Some(b) => {
                score.val_ber < b.val_ber
                    || (score.val_ber == b.val_ber && score.val_mse < b.val_mse)
            }
        };
        if better {
            best = Some(score);
        }
    }
    Ok((best.expect("at least one candidate").lambda, scores))
}
