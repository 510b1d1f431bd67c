//! Optical readout: complex weighting of node fields, coherent combination,
//! and photodiode detection.
//!
//! Weights are parameterized as (amplitude, phase) pairs rather than
//! (Re, Im) because the hardware trims those two physical axes independently;
//! the quantization grids in [`crate::quantization`] act on them separately.
//! Detection is the only nonlinearity in the system: the combined field
//! `z[t] = sum_k a_k * exp(i*phi_k) * x_k[t]` maps to the real intensity
//! `y[t] = |z[t]|^2`.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::reservoir::StateMatrix;

const TAU: f64 = std::f64::consts::TAU;

/// Wrap a finite angle into [0, 2*pi).
pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// N trainable optical weights: amplitudes in [0, 1] (no amplification) and
/// phases stored wrapped into [0, 2*pi).
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
}

impl ReadoutWeights {
    /// Validate amplitudes (finite, within [0, 1]) and wrap phases.
    pub fn new(amplitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid_argument(
                "weights must cover at least one node",
            ));
        }
        if amplitudes.len() != phases.len() {
            return Err(Error::invalid_argument(format!(
                "{} amplitudes but {} phases",
                amplitudes.len(),
                phases.len()
            )));
        }
        for (k, &a) in amplitudes.iter().enumerate() {
            if !a.is_finite() || !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid_argument(format!(
                    "amplitude[{k}] = {a} outside [0, 1]"
                )));
            }
        }
        for (k, &p) in phases.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::invalid_argument(format!(
                    "phase[{k}] = {p} is not finite"
                )));
            }
        }
        let phases = phases.into_iter().map(wrap_phase).collect();
        Ok(Self { amplitudes, phases })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    /// Always false: the constructor rejects empty weight vectors.
    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// The complex weights `a_k * exp(i*phi_k)`.
    pub fn complex_weights(&self) -> Vec<Complex64> {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    /// Write as CSV rows `(node_index, amplitude, phase)` with full
    /// round-trip decimal precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| Error::io(path.to_path_buf(), std::io::Error::other(e)))?;
        writer
            .write_record(["node_index", "amplitude", "phase"])
            .map_err(Error::from)?;
        for k in 0..self.len() {
            writer
                .write_record([
                    k.to_string(),
                    format!("{}", self.amplitudes[k]),
                    format!("{}", self.phases[k]),
                ])
                .map_err(Error::from)?;
        }
        writer
            .flush()
            .map_err(|e| Error::io(path.to_path_buf(), e))?;
        Ok(())
    }

    /// Read weights written by [`ReadoutWeights::write_csv`]; node indices
    /// must be the contiguous sequence 0..N in order.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::io(path.to_path_buf(), std::io::Error::other(e)))?;
        let mut amplitudes = Vec::new();
        let mut phases = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(Error::from)?;
            if record.len() != 3 {
                return Err(Error::invalid_argument(format!(
                    "weights CSV row {row} has {} fields, expected 3",
                    record.len()
                )));
            }
            let index: usize = record[0].parse().map_err(|_| {
                Error::invalid_argument(format!("bad node_index {:?} in row {row}", &record[0]))
            })?;
            if index != row {
                return Err(Error::invalid_argument(format!(
                    "weights CSV row {row} has node_index {index}; indices must be contiguous"
                )));
            }
            let amp: f64 = record[1].parse().map_err(|_| {
                Error::invalid_argument(format!("bad amplitude {:?} in row {row}", &record[1]))
            })?;
            let phase: f64 = record[2].parse().map_err(|_| {
                Error::invalid_argument(format!("bad phase {:?} in row {row}", &record[2]))
            })?;
            amplitudes.push(amp);
            phases.push(phase);
        }
        Self::new(amplitudes, phases)
    }
}

/// Coherent combination of one time step's fields:
/// `z = sum_k a_k * exp(i*phi_k) * x_k`.
pub fn combine_field(fields: &[Complex64], weights: &ReadoutWeights) -> Result<Complex64> {
    if fields.len() != weights.len() {
        return Err(Error::invalid_argument(format!(
            "{} node fields but {} weights",
            fields.len(),
            weights.len()
        )));
    }
    let w = weights.complex_weights();
    Ok(fields.iter().zip(&w).map(|(x, wk)| wk * x).sum())
}

/// The combined field series `z[t]` over all time steps.
pub fn combine_series(states: &StateMatrix, weights: &ReadoutWeights) -> Result<Vec<Complex64>> {
    if states.n_nodes() != weights.len() {
        return Err(Error::invalid_argument(format!(
            "{} reservoir nodes but {} weights",
            states.n_nodes(),
            weights.len()
        )));
    }
    let w = weights.complex_weights();
    let values = states.values();
    let mut z = Vec::with_capacity(states.n_steps());
    for row in values.rows() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, wk) in row.iter().zip(&w) {
            acc += wk * x;
        }
        z.push(acc);
    }
    Ok(z)
}

/// Photodiode output intensity `y[t] = |z[t]|^2` for every time step.
pub fn forward(states: &StateMatrix, weights: &ReadoutWeights) -> Result<Vec<f64>> {
    Ok(combine_series(states, weights)?
        .into_iter()
        .map(|z| z.norm_sqr())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn synthetic_states(t_len: usize, n: usize, seed: u64) -> StateMatrix {
        let mut rng = crate::rng::derive_rng(seed, &[0xF1E1D5]);
        let values = Array2::from_shape_fn((t_len, n), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        StateMatrix::new(values, 1).unwrap()
    }

    fn random_weights(n: usize, seed: u64) -> ReadoutWeights {
        let mut rng = crate::rng::derive_rng(seed, &[0xF1E1D6]);
        let amps = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let phases = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        ReadoutWeights::new(amps, phases).unwrap()
    }

    #[test]
    fn constructor_validates() {
        assert!(ReadoutWeights::new(vec![], vec![]).is_err());
        assert!(ReadoutWeights::new(vec![0.5], vec![0.0, 0.1]).is_err());
        assert!(ReadoutWeights::new(vec![1.2], vec![0.0]).is_err());
        assert!(ReadoutWeights::new(vec![-0.1], vec![0.0]).is_err());
        assert!(ReadoutWeights::new(vec![0.5], vec![f64::NAN]).is_err());

        // Phases wrap into [0, 2*pi).
        let w = ReadoutWeights::new(vec![0.5, 0.5], vec![-1.0, 7.0]).unwrap();
        for &p in w.phases() {
            assert!((0.0..TAU).contains(&p));
        }
    }

    #[test]
    fn zero_amplitudes_give_zero_output() {
        let states = synthetic_states(50, 4, 1);
        let w = ReadoutWeights::new(vec![0.0; 4], vec![0.3; 4]).unwrap();
        let y = forward(&states, &w).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_weight_passes_field_through() {
        let values = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
        let states = StateMatrix::new(values, 1).unwrap();
        let w = ReadoutWeights::new(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(forward(&states, &w).unwrap(), vec![1.0]);
    }

    #[test]
    fn destructive_interference_cancels() {
        let values = Array2::from_elem((1, 2), Complex64::new(1.0, 0.0));
        let states = StateMatrix::new(values, 1).unwrap();
        let w = ReadoutWeights::new(vec![1.0, 1.0], vec![0.0, std::f64::consts::PI]).unwrap();
        let y = forward(&states, &w).unwrap();
        assert!(y[0].abs() < 1e-30, "y = {}", y[0]);
    }

    #[test]
    fn combine_field_selects_single_node() {
        let fields = [Complex64::new(0.3, -0.4), Complex64::new(2.0, 1.0)];
        let w = ReadoutWeights::new(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(combine_field(&fields, &w).unwrap(), fields[0]);

        // Half weight on a synthetic field of 2 gives exactly 1.
        let fields = [Complex64::new(2.0, 0.0)];
        let w = ReadoutWeights::new(vec![0.5], vec![0.0]).unwrap();
        assert_eq!(
            combine_field(&fields, &w).unwrap(),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn global_phase_invariance() {
        let states = synthetic_states(100, 8, 2);
        let w = random_weights(8, 3);
        let y = forward(&states, &w).unwrap();
        for theta in [0.4, 1.9, 5.0] {
            let shifted = ReadoutWeights::new(
                w.amplitudes().to_vec(),
                w.phases().iter().map(|p| p + theta).collect(),
            )
            .unwrap();
            let ys = forward(&states, &shifted).unwrap();
            for (a, b) in y.iter().zip(&ys) {
                let scale = a.abs().max(1e-12);
                assert!((a - b).abs() / scale <= 1e-12, "{a} vs {b}");
            }
            // The combined field is rotated by exactly e^{i*theta}.
            let z = combine_series(&states, &w).unwrap();
            let zs = combine_series(&states, &shifted).unwrap();
            let rot = Complex64::from_polar(1.0, theta);
            for (a, b) in z.iter().zip(&zs) {
                assert!((a * rot - b).norm() <= 1e-12 * a.norm().max(1e-12));
            }
        }
    }

    #[test]
    fn non_negative_output() {
        let states = synthetic_states(200, 6, 4);
        let w = random_weights(6, 5);
        assert!(forward(&states, &w).unwrap().iter().all(|&y| y >= 0.0));
    }

    #[test]
    fn power_of_two_amplitude_scaling_is_exact() {
        // Scaling all amplitudes by c = 0.5 scales intensities by exactly
        // c^2 = 0.25: powers of two commute exactly with every FP operation
        // involved.
        let states = synthetic_states(64, 5, 6);
        let w = random_weights(5, 7);
        let half = ReadoutWeights::new(
            w.amplitudes().iter().map(|a| a * 0.5).collect(),
            w.phases().to_vec(),
        )
        .unwrap();
        let y = forward(&states, &w).unwrap();
        let yh = forward(&states, &half).unwrap();
        for (a, b) in y.iter().zip(&yh) {
            assert_eq!(*b, 0.25 * a);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let states = synthetic_states(10, 4, 8);
        let w = random_weights(3, 9);
        assert!(forward(&states, &w).is_err());
        assert!(combine_series(&states, &w).is_err());
        assert!(combine_field(&[Complex64::new(1.0, 0.0); 4], &w).is_err());
    }

    #[test]
    fn csv_round_trip_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.csv");
        let w = random_weights(16, 10);
        w.write_csv(&path).unwrap();
        let back = ReadoutWeights::read_csv(&path).unwrap();
        assert_eq!(w, back);

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("node_index,amplitude,phase\n"));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_rejects_gapped_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.csv");
        std::fs::write(&path, "node_index,amplitude,phase\n0,0.5,0.0\n2,0.5,0.0\n").unwrap();
        assert!(ReadoutWeights::read_csv(&path).is_err());
    }

    #[test]
    fn wrap_phase_edge_cases() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert_eq!(wrap_phase(TAU), 0.0);
        assert!((0.0..TAU).contains(&wrap_phase(-1e-30)));
        assert!((0.0..TAU).contains(&wrap_phase(1e9)));
        let inside = 3.1;
        assert_eq!(wrap_phase(inside), inside);
    }
}
