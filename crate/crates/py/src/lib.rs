//! Python bindings for the `phorc` photonic reservoir simulator.
//!
//! The module mirrors the library's main types and operations: topology
//! construction, signal generation, reservoir simulation, readout training,
//! quantization, explorative retraining, Monte Carlo noise evaluation, and
//! the sweep driver. Values cross the boundary as plain Python types
//! (`list[complex]` for optical fields and reservoir states).

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use phorc::experiments::config::ExperimentConfig;
use phorc::experiments::sweep;
use phorc::explorative::{self, ExplorativeConfig};
use phorc::quantization::{self, QuantizationSpec};
use phorc::readout::ReadoutWeights;
use phorc::reservoir::{self, SwirlTopology};
use phorc::signals::{self, BitSequence, OpticalSignal};
use phorc::training::{self, PartitionMask, SplitData, ThresholdSource, TrainConfig};

fn err(e: phorc::Error) -> PyErr {
    use phorc::Error as E;
    match &e {
        E::InvalidArgument(_) | E::InvalidConfig(_) => PyValueError::new_err(e.to_string()),
        E::Io { .. } | E::Csv(_) => PyIOError::new_err(e.to_string()),
        E::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn bit_sequence(bits: Vec<u8>) -> PyResult<BitSequence> {
    BitSequence::new(bits).map_err(err)
}

// --- topology ---------------------------------------------------------------

/// A 4-port swirl reservoir topology (nodes, delayed edges, input coupling).
#[pyclass(frozen, name = "SwirlTopology", module = "phorc_py")]
struct PySwirlTopology {
    inner: SwirlTopology,
}

#[pymethods]
impl PySwirlTopology {
    /// Build a `rows x cols` swirl with per-edge delay `delay_samples`,
    /// waveguide power loss per hop, and seeded random edge phases.
    #[staticmethod]
    fn build(
        rows: usize,
        cols: usize,
        delay_samples: usize,
        waveguide_loss: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let inner =
            reservoir::build_swirl(rows, cols, delay_samples, waveguide_loss, seed).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = SwirlTopology::from_toml_str(text).map_err(err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.edges.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SwirlTopology(rows={}, cols={}, edges={})",
            self.inner.rows,
            self.inner.cols,
            self.inner.edges.len()
        )
    }
}

// --- signals ----------------------------------------------------------------

/// A sampled complex optical input field.
#[pyclass(frozen, name = "OpticalSignal", module = "phorc_py")]
struct PyOpticalSignal {
    inner: OpticalSignal,
}

#[pymethods]
impl PyOpticalSignal {
    #[new]
    fn new(samples: Vec<Complex64>, samples_per_bit: usize) -> PyResult<Self> {
        let inner = OpticalSignal::new(samples, samples_per_bit).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn samples(&self) -> Vec<Complex64> {
        self.inner.samples().to_vec()
    }

    #[getter]
    fn samples_per_bit(&self) -> usize {
        self.inner.samples_per_bit()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Uniform i.i.d. random bits, deterministic per seed.
#[pyfunction]
fn generate_bits(n_bits: usize, seed: u64) -> PyResult<Vec<u8>> {
    Ok(signals::generate_bits(n_bits, seed)
        .map_err(err)?
        .bits()
        .to_vec())
}

/// On-off-keyed field samples for a bit stream, with optional single-pole
/// smoothing of the modulator transitions.
#[pyfunction]
#[pyo3(signature = (bits, samples_per_bit, smoothing_alpha = 0.0))]
fn modulate(
    bits: Vec<u8>,
    samples_per_bit: usize,
    smoothing_alpha: f64,
) -> PyResult<PyOpticalSignal> {
    let bits = bit_sequence(bits)?;
    let inner = signals::modulate(&bits, samples_per_bit, smoothing_alpha).map_err(err)?;
    Ok(PyOpticalSignal { inner })
}

/// Target bit `t` is 1 iff the bit window ending at `t` equals `pattern`
/// (a string of '0'/'1' characters).
#[pyfunction]
fn header_target(bits: Vec<u8>, pattern: &str) -> PyResult<Vec<u8>> {
    let bits = bit_sequence(bits)?;
    let pattern = BitSequence::parse(pattern).map_err(err)?;
    Ok(signals::header_target(&bits, &pattern)
        .map_err(err)?
        .bits()
        .to_vec())
}

/// Target bit `t` is `bits[t] XOR bits[t - delay]`; earlier positions are 0.
#[pyfunction]
#[pyo3(signature = (bits, delay = 4))]
fn xor_target(bits: Vec<u8>, delay: usize) -> PyResult<Vec<u8>> {
    let bits = bit_sequence(bits)?;
    Ok(signals::xor_target(&bits, delay)
        .map_err(err)?
        .bits()
        .to_vec())
}

// --- reservoir states ---------------------------------------------------------

/// Complex node fields over time, `n_steps x n_nodes`.
#[pyclass(frozen, name = "ReservoirStates", module = "phorc_py")]
struct PyReservoirStates {
    inner: reservoir::StateMatrix,
}

#[pymethods]
impl PyReservoirStates {
    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn samples_per_bit(&self) -> usize {
        self.inner.samples_per_bit()
    }

    /// All states as a list (over time steps) of lists (over nodes).
    fn values(&self) -> Vec<Vec<Complex64>> {
        self.inner
            .values()
            .rows()
            .into_iter()
            .map(|row| row.to_vec())
            .collect()
    }

    /// The sub-matrix covering bits `start_bit..end_bit`.
    fn slice_bits(&self, start_bit: usize, end_bit: usize) -> PyResult<Self> {
        let spb = self.inner.samples_per_bit();
        let inner = self
            .inner
            .slice_rows(start_bit * spb, end_bit * spb)
            .map_err(err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "ReservoirStates(n_steps={}, n_nodes={}, samples_per_bit={})",
            self.inner.n_steps(),
            self.inner.n_nodes(),
            self.inner.samples_per_bit()
        )
    }
}

/// Propagate an optical signal through the reservoir and record every node
/// field over time.
#[pyfunction]
fn simulate(topology: &PySwirlTopology, signal: &PyOpticalSignal) -> PyResult<PyReservoirStates> {
    let inner = reservoir::simulate(&topology.inner, &signal.inner).map_err(err)?;
    Ok(PyReservoirStates { inner })
}

// --- readout ------------------------------------------------------------------

/// Per-node readout amplitude and phase weights.
#[pyclass(frozen, name = "ReadoutWeights", module = "phorc_py")]
struct PyReadoutWeights {
    inner: ReadoutWeights,
}

#[pymethods]
impl PyReadoutWeights {
    #[new]
    fn new(amplitudes: Vec<f64>, phases: Vec<f64>) -> PyResult<Self> {
        let inner = ReadoutWeights::new(amplitudes, phases).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn amplitudes(&self) -> Vec<f64> {
        self.inner.amplitudes().to_vec()
    }

    #[getter]
    fn phases(&self) -> Vec<f64> {
        self.inner.phases().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).map_err(err)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        let inner = ReadoutWeights::read_csv(&path).map_err(err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!("ReadoutWeights(n={})", self.inner.len())
    }
}

/// MSE-through-photodiode loss with L2 amplitude regularization.
#[pyfunction]
#[pyo3(signature = (states, weights, target_samples, l2_lambda = 1e-4))]
fn loss(
    states: &PyReservoirStates,
    weights: &PyReadoutWeights,
    target_samples: Vec<f64>,
    l2_lambda: f64,
) -> PyResult<f64> {
    training::loss(&states.inner, &weights.inner, &target_samples, l2_lambda).map_err(err)
}

/// Analytic gradient of `loss` as `(d_amplitudes, d_phases)`.
#[pyfunction]
#[pyo3(signature = (states, weights, target_samples, l2_lambda = 1e-4))]
fn gradient(
    states: &PyReservoirStates,
    weights: &PyReadoutWeights,
    target_samples: Vec<f64>,
    l2_lambda: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    training::gradient(&states.inner, &weights.inner, &target_samples, l2_lambda).map_err(err)
}

/// Train readout weights with full-batch Adam from a seeded random
/// initialization. Returns `(weights, initial_loss, final_loss)`.
#[pyfunction]
#[pyo3(signature = (states, target_samples, *, learning_rate = 0.01, epochs = 2000, l2_lambda = 1e-4, seed = 1))]
fn train_readout(
    states: &PyReservoirStates,
    target_samples: Vec<f64>,
    learning_rate: f64,
    epochs: usize,
    l2_lambda: f64,
    seed: u64,
) -> PyResult<(PyReadoutWeights, f64, f64)> {
    let init = training::init_weights(states.inner.n_nodes(), seed).map_err(err)?;
    let mask = PartitionMask::all_free(states.inner.n_nodes()).map_err(err)?;
    let config = TrainConfig {
        learning_rate,
        epochs,
        l2_lambda,
        seed,
        ..TrainConfig::default()
    };
    let outcome =
        training::train_full(&states.inner, &target_samples, &init, &mask, &config, false)
            .map_err(err)?;
    Ok((
        PyReadoutWeights {
            inner: outcome.weights,
        },
        outcome.initial_loss,
        outcome.final_loss,
    ))
}

/// Threshold-detect the readout intensity per bit and score it against the
/// target bits. Returns `(ber, mse, threshold)`; pass `threshold` to reuse a
/// decision threshold fitted elsewhere (e.g. on the training split).
#[pyfunction]
#[pyo3(signature = (states, weights, target_bits, threshold = None))]
fn evaluate_ber(
    states: &PyReservoirStates,
    weights: &PyReadoutWeights,
    target_bits: Vec<u8>,
    threshold: Option<f64>,
) -> PyResult<(f64, f64, f64)> {
    let source = match threshold {
        Some(t) => ThresholdSource::Fixed(t),
        None => ThresholdSource::FitSelf,
    };
    let report = training::evaluate(
        &states.inner,
        &weights.inner,
        &target_bits,
        states.inner.samples_per_bit(),
        source,
    )
    .map_err(err)?;
    Ok((report.ber, report.mse, report.threshold))
}

// --- quantization ---------------------------------------------------------------

/// Hardware quantization model: amplitude levels spanning `[1/extinction, 1]`,
/// uniform phase levels, and drift noise scaled by the level spacing.
#[pyclass(frozen, name = "QuantizationSpec", module = "phorc_py")]
struct PyQuantizationSpec {
    inner: QuantizationSpec,
}

#[pymethods]
impl PyQuantizationSpec {
    #[new]
    fn new(
        amp_levels: usize,
        phase_levels: usize,
        extinction_ratio: f64,
        noise_level: f64,
    ) -> PyResult<Self> {
        let inner = QuantizationSpec::new(amp_levels, phase_levels, extinction_ratio, noise_level)
            .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn amp_levels(&self) -> usize {
        self.inner.amp_levels()
    }

    #[getter]
    fn phase_levels(&self) -> usize {
        self.inner.phase_levels()
    }

    #[getter]
    fn extinction_ratio(&self) -> f64 {
        self.inner.extinction_ratio()
    }

    #[getter]
    fn noise_level(&self) -> f64 {
        self.inner.noise_level()
    }

    #[getter]
    fn w_min(&self) -> f64 {
        self.inner.w_min()
    }

    #[getter]
    fn amp_step(&self) -> f64 {
        self.inner.amp_step()
    }

    #[getter]
    fn phase_step(&self) -> f64 {
        self.inner.phase_step()
    }

    fn amp_grid(&self) -> Vec<f64> {
        self.inner.amp_grid()
    }

    fn phase_grid(&self) -> Vec<f64> {
        self.inner.phase_grid()
    }

    fn __repr__(&self) -> String {
        format!(
            "QuantizationSpec(amp_levels={}, phase_levels={}, extinction_ratio={}, noise_level={})",
            self.inner.amp_levels(),
            self.inner.phase_levels(),
            self.inner.extinction_ratio(),
            self.inner.noise_level()
        )
    }
}

/// Nearest settable amplitude (ties up; values below `w_min` clamp to it).
#[pyfunction]
fn quantize_amplitude(a: f64, spec: &PyQuantizationSpec) -> PyResult<f64> {
    quantization::quantize_amplitude(a, &spec.inner).map_err(err)
}

/// Circularly nearest settable phase.
#[pyfunction]
fn quantize_phase(phi: f64, spec: &PyQuantizationSpec) -> f64 {
    quantization::quantize_phase(phi, &spec.inner)
}

/// Snap every weight to the nearest settable level.
#[pyfunction]
fn direct_quantize(weights: &PyReadoutWeights, spec: &PyQuantizationSpec) -> PyReadoutWeights {
    PyReadoutWeights {
        inner: quantization::direct_quantize(&weights.inner, &spec.inner),
    }
}

// --- explorative retraining and noise evaluation ----------------------------------

/// Explorative partition retraining from a full-precision readout: freeze a
/// shrinking random subset on the quantization grid, retrain the free rest,
/// keep the best quantized candidate by validation BER. Returns
/// `(weights, val_ber, val_mse)`.
#[pyfunction]
#[pyo3(signature = (full, train_states, train_bits, val_states, val_bits, spec, *,
                    retrain_epochs = 100, learning_rate = 0.01, l2_lambda = 1e-4,
                    n_partitions = 20, n_iterations = 4, initial_fixed_ratio = 0.5,
                    ratio_growth = 2.0, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn explorative_retrain(
    full: &PyReadoutWeights,
    train_states: &PyReservoirStates,
    train_bits: Vec<u8>,
    val_states: &PyReservoirStates,
    val_bits: Vec<u8>,
    spec: &PyQuantizationSpec,
    retrain_epochs: usize,
    learning_rate: f64,
    l2_lambda: f64,
    n_partitions: usize,
    n_iterations: usize,
    initial_fixed_ratio: f64,
    ratio_growth: f64,
    seed: u64,
) -> PyResult<(PyReadoutWeights, f64, f64)> {
    let train = SplitData::new(train_states.inner.clone(), train_bits).map_err(err)?;
    let val = SplitData::new(val_states.inner.clone(), val_bits).map_err(err)?;
    let retrain_config = TrainConfig {
        learning_rate,
        epochs: retrain_epochs,
        l2_lambda,
        seed,
        ..TrainConfig::default()
    };
    let explore = ExplorativeConfig {
        initial_fixed_ratio,
        n_partitions,
        n_iterations,
        ratio_growth,
        seed,
    };
    let outcome = explorative::explorative_retrain_from(
        &full.inner,
        &train,
        &val,
        &spec.inner,
        &retrain_config,
        &explore,
    )
    .map_err(err)?;
    Ok((
        PyReadoutWeights {
            inner: outcome.weights,
        },
        outcome.final_val_ber,
        outcome.final_val_mse,
    ))
}

/// Evaluate weights under seeded Gaussian drift draws; the decision threshold
/// is refitted on the training split per draw. Returns
/// `(ber_mean, ber_std, mse_mean)`.
#[pyfunction]
#[pyo3(signature = (weights, spec, train_states, train_bits, test_states, test_bits, *,
                    mc_draws = 100, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo(
    weights: &PyReadoutWeights,
    spec: &PyQuantizationSpec,
    train_states: &PyReservoirStates,
    train_bits: Vec<u8>,
    test_states: &PyReservoirStates,
    test_bits: Vec<u8>,
    mc_draws: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64)> {
    let train = SplitData::new(train_states.inner.clone(), train_bits).map_err(err)?;
    let test = SplitData::new(test_states.inner.clone(), test_bits).map_err(err)?;
    let stats = sweep::monte_carlo(&weights.inner, &spec.inner, &train, &test, mc_draws, seed)
        .map_err(err)?;
    Ok((stats.ber_mean, stats.ber_std, stats.mse_mean))
}

/// Run the full sweep described by a TOML experiment config (text, not a
/// path) into `out_path`, resuming any rows already present. Returns
/// `(n_rows, n_computed, n_skipped)`.
#[pyfunction]
fn run_sweep(config_toml: &str, out_path: PathBuf) -> PyResult<(usize, usize, usize)> {
    let config = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    let stats = sweep::run_sweep(&config, &out_path).map_err(err)?;
    Ok((stats.n_rows, stats.n_computed, stats.n_skipped))
}

#[pymodule]
fn phorc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySwirlTopology>()?;
    m.add_class::<PyOpticalSignal>()?;
    m.add_class::<PyReservoirStates>()?;
    m.add_class::<PyReadoutWeights>()?;
    m.add_class::<PyQuantizationSpec>()?;
    m.add_function(wrap_pyfunction!(generate_bits, m)?)?;
    m.add_function(wrap_pyfunction!(modulate, m)?)?;
    m.add_function(wrap_pyfunction!(header_target, m)?)?;
    m.add_function(wrap_pyfunction!(xor_target, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(train_readout, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_ber, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(quantize_phase, m)?)?;
    m.add_function(wrap_pyfunction!(direct_quantize, m)?)?;
    m.add_function(wrap_pyfunction!(explorative_retrain, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
