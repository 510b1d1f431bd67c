//! Resumable parameter sweeps over quantization cells, noise levels, seeds,
//! and readout methods, with Monte Carlo drift evaluation per cell.
//!
//! The results file is a plain CSV, appended row by row as cells finish so an
//! interrupted run loses at most one row (a torn trailing line is detected
//! and dropped on resume). Rows already present are never recomputed. After
//! a run completes, the file is rewritten in a canonical row order through a
//! temp-file rename, so any two runs that computed the same cells produce
//! byte-identical files.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Task};
use crate::experiments::pipeline::{prepare, train_baseline, PreparedTask};
use crate::explorative::explorative_retrain_from;
use crate::quantization::{apply_drift_noise, direct_quantize, QuantizationSpec};
use crate::readout::ReadoutWeights;
use crate::rng::{derive_rng, derive_seed, stream};
use crate::training::{evaluate, select_l2_lambda, SplitData, ThresholdSource, L2_LAMBDA_GRID};

/// The three readout realizations compared in every cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    /// Full-precision trained weights (drift still applies, scaled by the
    /// cell's grid steps).
    Full,
    /// Nearest-grid-point quantization of the full-precision weights.
    Naive,
    /// Explorative partition retraining on the quantization grid.
    Explorative,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Full, Method::Naive, Method::Explorative];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Naive => "naive",
            Method::Explorative => "explorative",
        }
    }

    fn index(self) -> u64 {
        match self {
            Method::Full => 0,
            Method::Naive => 1,
            Method::Explorative => 2,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Method::Full),
            "naive" => Ok(Method::Naive),
            "explorative" => Ok(Method::Explorative),
            other => Err(Error::invalid_argument(format!("unknown method {other:?}"))),
        }
    }
}

/// Monte Carlo drift statistics of one (weights, spec) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStats {
    pub ber_mean: f64,
    /// Population standard deviation across draws (0 for one draw).
    pub ber_std: f64,
    pub mse_mean: f64,
}

/// Evaluate `weights` under `mc_draws` independent drift realizations. Each
/// draw perturbs the weights per the spec's noise model, refits the decision
/// threshold on the training split (threshold calibration is cheap in
/// hardware and would track drift), and scores the test split. With
/// `noise_level = 0` the evaluation is deterministic: one draw, zero std.
///
/// Draw `d` uses the RNG stream `(seed, DRIFT, d)`, so any draw is
/// reproducible in isolation.
pub fn monte_carlo(
    weights: &ReadoutWeights,
    spec: &QuantizationSpec,
    train_split: &SplitData,
    test_split: &SplitData,
    mc_draws: usize,
    seed: u64,
) -> Result<NoiseStats> {
    if mc_draws == 0 {
        return Err(Error::invalid_argument("mc_draws must be >= 1"));
    }

    let eval_once = |w: &ReadoutWeights| -> Result<(f64, f64)> {
        let train_rep = evaluate(
            &train_split.states,
            w,
            &train_split.target_bits,
            train_split.samples_per_bit(),
            ThresholdSource::FitSelf,
        )?;
        let test_rep = evaluate(
            &test_split.states,
            w,
            &test_split.target_bits,
            test_split.samples_per_bit(),
            ThresholdSource::Fixed(train_rep.threshold),
        )?;
        Ok((test_rep.ber, test_rep.mse))
    };

    if spec.noise_level() == 0.0 {
        let (ber, mse) = eval_once(weights)?;
        return Ok(NoiseStats {
            ber_mean: ber,
            ber_std: 0.0,
            mse_mean: mse,
        });
    }

    let mut bers = Vec::with_capacity(mc_draws);
    let mut mse_sum = 0.0;
    for d in 0..mc_draws {
        let mut rng = derive_rng(seed, &[stream::DRIFT, d as u64]);
        let noisy = apply_drift_noise(weights, spec, &mut rng);
        let (ber, mse) = eval_once(&noisy)?;
        bers.push(ber);
        mse_sum += mse;
    }
    let n = mc_draws as f64;
    let mean = bers.iter().sum::<f64>() / n;
    let var = bers.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / n;
    Ok(NoiseStats {
        ber_mean: mean,
        ber_std: var.sqrt(),
        mse_mean: mse_sum / n,
    })
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub task: Task,
    pub method: Method,
    pub amp_levels: usize,
    pub phase_levels: usize,
    pub extinction_ratio: f64,
    pub noise_level: f64,
    pub seed: u64,
    pub ber_mean: f64,
    pub ber_std: f64,
    /// Smallest nonzero BER measurable on this test split
    /// (1 / evaluated test bits).
    pub ber_floor: f64,
    pub mse_mean: f64,
}

pub const CSV_HEADER: &str =
    "task,method,amp_levels,phase_levels,extinction_ratio,noise_level,seed,ber_mean,ber_std,ber_floor,mse_mean";

/// Identity of a row within a results file. Float axes compare by bit
/// pattern; the shortest-round-trip CSV float format preserves bits exactly.
type RowKey = (Task, Method, usize, usize, u64, u64, u64);

impl SweepRow {
    fn key(&self) -> RowKey {
        (
            self.task,
            self.method,
            self.amp_levels,
            self.phase_levels,
            self.extinction_ratio.to_bits(),
            self.noise_level.to_bits(),
            self.seed,
        )
    }

    /// Canonical file order: the CSV columns compared left to right.
    fn sort_key(&self) -> (Task, Method, usize, usize, f64, f64, u64) {
        (
            self.task,
            self.method,
            self.amp_levels,
            self.phase_levels,
            self.extinction_ratio,
            self.noise_level,
            self.seed,
        )
    }

    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.task,
            self.method,
            self.amp_levels,
            self.phase_levels,
            self.extinction_ratio,
            self.noise_level,
            self.seed,
            self.ber_mean,
            self.ber_std,
            self.ber_floor,
            self.mse_mean
        )
    }

    fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::invalid_config(format!(
                "results row has {} fields, expected 11: {line:?}",
                fields.len()
            )));
        }
        let bad = |what: &str| Error::invalid_config(format!("bad {what} in results row {line:?}"));
        Ok(SweepRow {
            task: fields[0].parse().map_err(|_| bad("task"))?,
            method: fields[1].parse().map_err(|_| bad("method"))?,
            amp_levels: fields[2].parse().map_err(|_| bad("amp_levels"))?,
            phase_levels: fields[3].parse().map_err(|_| bad("phase_levels"))?,
            extinction_ratio: fields[4].parse().map_err(|_| bad("extinction_ratio"))?,
            noise_level: fields[5].parse().map_err(|_| bad("noise_level"))?,
            seed: fields[6].parse().map_err(|_| bad("seed"))?,
            ber_mean: fields[7].parse().map_err(|_| bad("ber_mean"))?,
            ber_std: fields[8].parse().map_err(|_| bad("ber_std"))?,
            ber_floor: fields[9].parse().map_err(|_| bad("ber_floor"))?,
            mse_mean: fields[10].parse().map_err(|_| bad("mse_mean"))?,
        })
    }
}

/// Read rows from a results file. A missing file yields no rows. A trailing
/// line without `\n` (torn by an interrupted write) is dropped; the second
/// return value reports how many complete rows were kept in that case
/// (`None` when the file was clean).
pub fn read_results(path: &Path) -> Result<(Vec<SweepRow>, Option<usize>)> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), None)),
        Err(e) => return Err(Error::io(path.to_path_buf(), e)),
    };
    if text.is_empty() {
        return Ok((Vec::new(), None));
    }
    let torn = !text.ends_with('\n');
    let complete = match text.rfind('\n') {
        Some(last) if torn => &text[..=last],
        _ if torn => "", // no newline at all: the header itself is torn
        _ => &text[..],
    };
    let mut lines = complete.lines();
    if complete.is_empty() {
        return Ok((Vec::new(), Some(0)));
    }
    let header = lines.next().unwrap_or_default();
    if header != CSV_HEADER {
        return Err(Error::invalid_config(format!(
            "results file {} has unexpected header {header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        rows.push(SweepRow::parse_csv_line(line)?);
    }
    let kept = torn.then_some(rows.len());
    Ok((rows, kept))
}

/// Write `rows` (already in the desired order) atomically: temp file in the
/// same directory, then rename over the target.
fn write_results_atomic(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, text.as_bytes()).map_err(|e| Error::io(tmp.clone(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    Ok(())
}

/// Outcome summary of [`run_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepStats {
    /// Rows in the final file.
    pub n_rows: usize,
    /// Rows computed by this invocation.
    pub n_computed: usize,
    /// Requested rows that were already present and skipped.
    pub n_skipped: usize,
}

/// Resolve the L2 regularization strength for this run: the configured value
/// if present, else a validation-BER grid search on the first configured
/// seed, cached in a sidecar file next to the results so resumed runs reuse
/// the exact same value without recomputing.
fn resolve_lambda(
    config: &ExperimentConfig,
    out_path: &Path,
    prepared_first: &mut Option<PreparedTask>,
) -> Result<f64> {
    if let Some(l) = config.training.l2_lambda {
        return Ok(l);
    }
    let sidecar = out_path.with_extension("lambda.toml");
    if let Ok(text) = std::fs::read_to_string(&sidecar) {
        #[derive(serde::Deserialize)]
        struct Sidecar {
            lambda: f64,
        }
        let parsed: Sidecar = toml::from_str(&text).map_err(|e| {
            Error::invalid_config(format!("lambda sidecar {}: {e}", sidecar.display()))
        })?;
        log::info!(
            "reusing l2_lambda = {} from {}",
            parsed.lambda,
            sidecar.display()
        );
        return Ok(parsed.lambda);
    }

    let first_seed = config.seeds[0];
    let prepared = prepare(config, first_seed)?;
    let base = config.train_config(first_seed, 0.0);
    let (lambda, scores) =
        select_l2_lambda(&prepared.train, &prepared.val, &base, &L2_LAMBDA_GRID)?;
    for s in &scores {
        log::debug!(
            "lambda {:>8}: val_ber {:.5} val_mse {:.6}",
            s.lambda,
            s.val_ber,
            s.val_mse
        );
    }
    log::info!("selected l2_lambda = {lambda} on seed {first_seed}");
    std::fs::write(
        &sidecar,
        format!(
            "# selected by validation-BER grid search on seed {first_seed}\nlambda = {lambda}\n"
        ),
    )
    .map_err(|e| Error::io(sidecar.clone(), e))?;
    *prepared_first = Some(prepared);
    Ok(lambda)
}

/// Run the configured sweep, appending missing rows to `out_path` and
/// finishing with a canonical-order atomic rewrite. Already-present rows are
/// skipped without recomputation, so interrupted runs resume cheaply and a
/// completed file reruns with zero compute.
pub fn run_sweep(config: &ExperimentConfig, out_path: &Path) -> Result<SweepStats> {
    config.validate()?;

    let (existing, torn_kept) = read_results(out_path)?;
    if let Some(kept) = torn_kept {
        log::warn!(
            "results file {} had a torn trailing line; kept {kept} complete rows",
            out_path.display()
        );
        write_results_atomic(out_path, &existing)?;
    }
    let mut have: BTreeSet<RowKey> = existing.iter().map(|r| r.key()).collect();

    // Fail on an unwritable output before any compute.
    let mut appender = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out_path)
        .map_err(|e| Error::io(out_path.to_path_buf(), e))?;
    let file_was_empty = existing.is_empty() && torn_kept.is_none();
    if file_was_empty {
        appender
            .write_all(format!("{CSV_HEADER}\n").as_bytes())
            .map_err(|e| Error::io(out_path.to_path_buf(), e))?;
    }

    let mut prepared_first: Option<PreparedTask> = None;
    let lambda = resolve_lambda(config, out_path, &mut prepared_first)?;

    let mut all_rows = existing;
    let mut n_computed = 0usize;
    let mut n_skipped = 0usize;

    for &seed in &config.seeds {
        // Cell plan for this seed: every (levels, E, noise, method) row.
        let mut missing: Vec<(usize, usize, f64, f64, Method)> = Vec::new();
        for &(na, np) in &config.level_pairs() {
            for &e in &config.extinction_ratio {
                for &eta in &config.noise_level {
                    for method in Method::ALL {
                        let key = (
                            config.task,
                            method,
                            na,
                            np,
                            e.to_bits(),
                            eta.to_bits(),
                            seed,
                        );
                        if have.contains(&key) {
                            n_skipped += 1;
                        } else {
                            missing.push((na, np, e, eta, method));
                        }
                    }
                }
            }
        }
        if missing.is_empty() {
            log::info!("seed {seed}: all rows present, skipping");
            continue;
        }
        log::info!("seed {seed}: computing {} rows", missing.len());

        let prepared = match prepared_first.take() {
            Some(p) if p.seed == seed => p,
            _ => prepare(config, seed)?,
        };
        let baseline = train_baseline(&prepared, config, lambda, false)?;
        let w_fp = baseline.weights;
        log::debug!(
            "seed {seed}: baseline loss {:.6} -> {:.6}",
            baseline.initial_loss,
            baseline.final_loss
        );
        let ber_floor = 1.0 / prepared.test.n_bits() as f64;

        // Lazy per-cell caches shared across noise levels.
        let mut naive_cache: BTreeMap<(usize, usize, u64), ReadoutWeights> = BTreeMap::new();
        let mut expl_cache: BTreeMap<(usize, usize, u64), ReadoutWeights> = BTreeMap::new();

        for (na, np, e, eta, method) in missing {
            let cell = (na, np, e.to_bits());
            let grid_spec = QuantizationSpec::new(na, np, e, 0.0)?;
            let weights = match method {
                Method::Full => &w_fp,
                Method::Naive => naive_cache
                    .entry(cell)
                    .or_insert_with(|| direct_quantize(&w_fp, &grid_spec)),
                Method::Explorative => {
                    if let Entry::Vacant(slot) = expl_cache.entry(cell) {
                        let outcome = explorative_retrain_from(
                            &w_fp,
                            &prepared.train,
                            &prepared.val,
                            &grid_spec,
                            &config.retrain_config(seed, lambda),
                            &config.explorative_config(seed),
                        )?;
                        log::debug!(
                            "seed {seed} cell Na={na} Nphi={np} E={e}: explorative val BER {:.5}",
                            outcome.final_val_ber
                        );
                        slot.insert(outcome.weights);
                    }
                    &expl_cache[&cell]
                }
            };

            let noisy_spec = QuantizationSpec::new(na, np, e, eta)?;
            let cell_seed = derive_seed(
                seed,
                &[
                    stream::MC_CELL,
                    method.index(),
                    na as u64,
                    np as u64,
                    e.to_bits(),
                    eta.to_bits(),
                ],
            );
            let stats = monte_carlo(
                weights,
                &noisy_spec,
                &prepared.train,
                &prepared.test,
                config.mc_draws,
                cell_seed,
            )?;

            let row = SweepRow {
                task: config.task,
                method,
                amp_levels: na,
                phase_levels: np,
                extinction_ratio: e,
                noise_level: eta,
                seed,
                ber_mean: stats.ber_mean,
                ber_std: stats.ber_std,
                ber_floor,
                mse_mean: stats.mse_mean,
            };
            appender
                .write_all(format!("{}\n", row.to_csv_line()).as_bytes())
                .and_then(|()| appender.flush())
                .map_err(|e| Error::io(out_path.to_path_buf(), e))?;
            have.insert(row.key());
            all_rows.push(row);
            n_computed += 1;
        }
    }
    drop(appender);

    // Canonical order + atomic rewrite: any two runs over the same cells
    // leave byte-identical files.
    all_rows.sort_by(|a, b| {
        let (t1, m1, a1, p1, e1, n1, s1) = a.sort_key();
        let (t2, m2, a2, p2, e2, n2, s2) = b.sort_key();
        (t1, m1, a1, p1)
            .cmp(&(t2, m2, a2, p2))
            .then(e1.total_cmp(&e2))
            .then(n1.total_cmp(&n2))
            .then(s1.cmp(&s2))
    });
    all_rows.dedup_by_key(|r| r.key());
    write_results_atomic(out_path, &all_rows)?;

    Ok(SweepStats {
        n_rows: all_rows.len(),
        n_computed,
        n_skipped,
    })
}
