//! Command-line front end for the photonic reservoir pipeline.
//!
//! Subcommands mirror the processing stages: `simulate` (reservoir states),
//! `train` (full-precision readout), `quantize` (snap to the hardware grid),
//! `retrain` (explorative partition search), `sweep` (the full experiment
//! grid into a results CSV, resumable), and `plot` (SVG curves from results).
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 I/O error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};

use phorc::error::{Error, Result};
use phorc::experiments::config::{ExperimentConfig, Task};
use phorc::experiments::pipeline::{prepare, train_baseline, PreparedTask};
use phorc::experiments::plot::emit_plots;
use phorc::experiments::sweep::{read_results, run_sweep};
use phorc::explorative::{explorative_retrain_from, score_candidate, write_candidate_log};
use phorc::quantization::{direct_quantize, QuantizationSpec};
use phorc::readout::ReadoutWeights;
use phorc::reservoir::{build_swirl, simulate};
use phorc::signals::{generate_bits, header_target, modulate, xor_target};
use phorc::training::{select_l2_lambda, L2_LAMBDA_GRID};

#[derive(Parser)]
#[command(
    name = "phorc",
    version,
    about = "Photonic reservoir computing with quantized optical readout"
)]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Use this single seed instead of the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel candidate evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the reservoir and record node states for the whole input stream.
    Simulate,
    /// Train full-precision readout weights on the training split.
    Train,
    /// Snap trained weights onto the first configured quantization grid.
    Quantize {
        /// Weights CSV to quantize (default: <out>/weights_full.csv).
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Explorative partition retraining on the first configured grid.
    Retrain {
        /// Start from these full-precision weights instead of training.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Run the full experiment grid into <out>/results.csv (resumable).
    Sweep,
    /// Render SVG plots from sweep results.
    Plot {
        /// Results CSV to plot (default: <out>/results.csv).
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version exit cleanly; genuine usage errors exit 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::invalid_argument("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::invalid_argument(format!("thread pool setup failed: {e}")))?;
    }

    match &cli.command {
        Command::Simulate => cmd_simulate(cli),
        Command::Train => cmd_train(cli),
        Command::Quantize { weights } => cmd_quantize(cli, weights.as_deref()),
        Command::Retrain { weights } => cmd_retrain(cli, weights.as_deref()),
        Command::Sweep => cmd_sweep(cli),
        Command::Plot { results } => cmd_plot(cli, results.as_deref()),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let config = ExperimentConfig::from_path(&cli.config)?;
    config.validate()?;
    Ok(config)
}

/// Seed for the single-pipeline commands: `--seed`, else the config's first.
fn pick_seed(cli: &Cli, config: &ExperimentConfig) -> u64 {
    cli.seed.unwrap_or(config.seeds[0])
}

fn ensure_out_dir(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(cli.out.clone(), e))
}

/// First cell of the sweep grid; the single-shot `quantize` / `retrain`
/// commands operate on this one hardware configuration.
fn first_spec(config: &ExperimentConfig) -> Result<QuantizationSpec> {
    let (na, np) = config.level_pairs()[0];
    QuantizationSpec::new(na, np, config.extinction_ratio[0], config.noise_level[0])
}

/// The training regularization weight: configured value if present,
/// otherwise grid-searched on the validation split.
fn resolve_lambda(config: &ExperimentConfig, prepared: &PreparedTask) -> Result<f64> {
    if let Some(l) = config.training.l2_lambda {
        return Ok(l);
    }
    let base = config.train_config(prepared.seed, 0.0);
    let (lambda, scores) =
        select_l2_lambda(&prepared.train, &prepared.val, &base, &L2_LAMBDA_GRID)?;
    for s in &scores {
        log::info!(
            "lambda {:.0e}: val BER {:.4}, val MSE {:.6}",
            s.lambda,
            s.val_ber,
            s.val_mse
        );
    }
    log::info!("selected l2_lambda = {lambda:.0e}");
    Ok(lambda)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.to_path_buf(), e))
}

fn cmd_simulate(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let seed = pick_seed(cli, &config);
    ensure_out_dir(cli)?;

    let total_bits = config.n_train_bits + config.n_val_bits + config.n_test_bits;
    let bits = generate_bits(total_bits, seed)?;
    let targets = match config.task {
        Task::Header => header_target(&bits, &config.header_pattern_bits()?)?,
        Task::Xor => xor_target(&bits, config.xor_delay)?,
    };
    let input = modulate(&bits, config.signal.samples_per_bit, config.signal.alpha)?;
    let topology = build_swirl(
        config.topology.rows,
        config.topology.cols,
        config.topology.delay_samples,
        config.topology.waveguide_loss,
        seed,
    )?;
    let states = simulate(&topology, &input)?;

    let topo_path = cli.out.join("topology.toml");
    let topo_text = toml::to_string_pretty(&topology)
        .map_err(|e| Error::invalid_config(format!("topology serialization failed: {e}")))?;
    write_text(&topo_path, &topo_text)?;

    let bits_path = cli.out.join("bits.csv");
    let mut bits_text = String::from("bit_index,input_bit,target_bit\n");
    for (i, (b, t)) in bits.bits().iter().zip(targets.bits()).enumerate() {
        bits_text.push_str(&format!("{i},{b},{t}\n"));
    }
    write_text(&bits_path, &bits_text)?;

    let states_path = cli.out.join("states.csv");
    let values = states.values();
    let mut text = String::with_capacity(values.len() * 20);
    text.push('t');
    for k in 0..states.n_nodes() {
        text.push_str(&format!(",node_{k}_re,node_{k}_im"));
    }
    text.push('\n');
    for t in 0..states.n_steps() {
        text.push_str(&t.to_string());
        for k in 0..states.n_nodes() {
            let v = values[(t, k)];
            text.push_str(&format!(",{},{}", v.re, v.im));
        }
        text.push('\n');
    }
    write_text(&states_path, &text)?;

    println!(
        "simulated {} nodes / {} edges for {} samples ({} bits, seed {seed})",
        states.n_nodes(),
        topology.edges.len(),
        states.n_steps(),
        total_bits,
    );
    for p in [&topo_path, &bits_path, &states_path] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_train(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let seed = pick_seed(cli, &config);
    ensure_out_dir(cli)?;

    let prepared = prepare(&config, seed)?;
    let lambda = resolve_lambda(&config, &prepared)?;
    let record_history = cli.verbose > 0;
    let outcome = train_baseline(&prepared, &config, lambda, record_history)?;

    let weights_path = cli.out.join("weights_full.csv");
    outcome.weights.write_csv(&weights_path)?;

    if let Some(history) = &outcome.history {
        let curve_path = cli.out.join("training_curve.csv");
        let mut text = String::from("epoch,loss\n");
        for (epoch, loss) in history.iter().enumerate() {
            text.push_str(&format!("{epoch},{loss}\n"));
        }
        write_text(&curve_path, &text)?;
        println!("wrote {}", curve_path.display());
    }

    let (val_ber, val_mse) = score_candidate(&outcome.weights, &prepared.train, &prepared.val)?;
    println!(
        "trained {} epochs (seed {seed}, lambda {lambda:.0e}): loss {:.6} -> {:.6}, val BER {val_ber:.4}, val MSE {val_mse:.6}",
        config.training.epochs, outcome.initial_loss, outcome.final_loss,
    );
    println!("wrote {}", weights_path.display());
    Ok(())
}

fn cmd_quantize(cli: &Cli, weights_arg: Option<&Path>) -> Result<()> {
    let config = load_config(cli)?;
    let seed = pick_seed(cli, &config);
    ensure_out_dir(cli)?;

    let weights_path = weights_arg
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join("weights_full.csv"));
    let full = ReadoutWeights::read_csv(&weights_path)?;
    let spec = first_spec(&config)?;
    let naive = direct_quantize(&full, &spec);

    let out_path = cli.out.join("weights_naive.csv");
    naive.write_csv(&out_path)?;

    let prepared = prepare(&config, seed)?;
    let (full_ber, _) = score_candidate(&full, &prepared.train, &prepared.val)?;
    let (naive_ber, _) = score_candidate(&naive, &prepared.train, &prepared.val)?;
    println!(
        "quantized to {} amplitude x {} phase levels (E = {}): val BER {full_ber:.4} -> {naive_ber:.4}",
        spec.amp_levels(),
        spec.phase_levels(),
        spec.extinction_ratio(),
    );
    println!("wrote {}", out_path.display());
    Ok(())
}

fn cmd_retrain(cli: &Cli, weights_arg: Option<&Path>) -> Result<()> {
    let config = load_config(cli)?;
    let seed = pick_seed(cli, &config);
    ensure_out_dir(cli)?;

    let prepared = prepare(&config, seed)?;
    let lambda = resolve_lambda(&config, &prepared)?;
    let full = match weights_arg {
        Some(path) => ReadoutWeights::read_csv(path)?,
        None => train_baseline(&prepared, &config, lambda, false)?.weights,
    };

    let spec = first_spec(&config)?;
    let outcome = explorative_retrain_from(
        &full,
        &prepared.train,
        &prepared.val,
        &spec,
        &config.retrain_config(seed, lambda),
        &config.explorative_config(seed),
    )?;

    let weights_path = cli.out.join("weights_explorative.csv");
    outcome.weights.write_csv(&weights_path)?;
    let log_path = cli.out.join("explorative_log.csv");
    write_candidate_log(&log_path, &outcome.log)?;

    let (direct_ber, _) = score_candidate(&outcome.direct, &prepared.train, &prepared.val)?;
    println!(
        "explorative retrain (seed {seed}, {} partitions x {} iterations): val BER {direct_ber:.4} (direct) -> {:.4}",
        config.explorative.n_partitions, config.explorative.n_iterations, outcome.final_val_ber,
    );
    println!("wrote {}", weights_path.display());
    println!("wrote {}", log_path.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli) -> Result<()> {
    let mut config = load_config(cli)?;
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    ensure_out_dir(cli)?;

    let out_path = cli.out.join("results.csv");
    let stats = run_sweep(&config, &out_path)?;
    println!(
        "sweep complete: {} rows ({} computed, {} reused)",
        stats.n_rows, stats.n_computed, stats.n_skipped
    );
    println!("wrote {}", out_path.display());
    Ok(())
}

fn cmd_plot(cli: &Cli, results_arg: Option<&Path>) -> Result<()> {
    let results_path = results_arg
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join("results.csv"));
    let (rows, torn) = read_results(&results_path)?;
    if torn.is_some() {
        log::warn!(
            "results file {} ends mid-row; plotting the complete rows",
            results_path.display()
        );
    }
    if rows.is_empty() {
        return Err(Error::invalid_argument(format!(
            "no rows in {}; run `phorc sweep` first",
            results_path.display()
        )));
    }

    let plot_dir = cli.out.join("plots");
    let files = emit_plots(&rows, &plot_dir)?;
    println!("rendered {} plots from {} rows", files.len(), rows.len());
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
