//! Hardware weighting-element model: uniform amplitude and phase grids plus
//! Gaussian drift noise scaled to the grid step.
//!
//! An optical weighting element cannot switch fully off: its extinction ratio
//! `E` bounds the smallest settable field amplitude at `w_min = 1/E`, and the
//! `N_a` settable amplitudes are evenly spaced over `[w_min, 1]` with step
//! `dw = (1 - w_min) / (N_a - 1)`. Phases use `N_phi` levels evenly spaced
//! over `[0, 2*pi)` with step `dphi = 2*pi / N_phi` and circular (wrap-around)
//! distance. Drift noise is Gaussian with standard deviation expressed in
//! units of the grid step: `sigma_amp = eta * dw`, `sigma_phase = eta * dphi`.
//!
//! Nearest-level rounding resolves exact ties toward the higher level (for
//! phases: the next level counter-clockwise, wrapping past 2*pi to level 0).
//! Amplitudes below `w_min` automatically round up to `w_min`, the lowest
//! grid level.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::readout::{wrap_phase, ReadoutWeights};

const TAU: f64 = std::f64::consts::TAU;

/// Grid and noise parameters of the hardware weighting elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationSpec {
    amp_levels: usize,
    phase_levels: usize,
    extinction_ratio: f64,
    noise_level: f64,
}

impl QuantizationSpec {
    /// Validate and build a spec: `amp_levels >= 2`, `phase_levels >= 1`,
    /// `extinction_ratio > 1`, `noise_level >= 0`.
    pub fn new(
        amp_levels: usize,
        phase_levels: usize,
        extinction_ratio: f64,
        noise_level: f64,
    ) -> Result<Self> {
        if amp_levels < 2 {
            return Err(Error::invalid_argument(format!(
                "amp_levels must be >= 2, got {amp_levels}"
            )));
        }
        if phase_levels < 1 {
            return Err(Error::invalid_argument("phase_levels must be >= 1"));
        }
        if !extinction_ratio.is_finite() || extinction_ratio <= 1.0 {
            return Err(Error::invalid_argument(format!(
                "extinction_ratio must be a finite value > 1, got {extinction_ratio}"
            )));
        }
        if !noise_level.is_finite() || noise_level < 0.0 {
            return Err(Error::invalid_argument(format!(
                "noise_level must be a finite value >= 0, got {noise_level}"
            )));
        }
        Ok(Self {
            amp_levels,
            phase_levels,
            extinction_ratio,
            noise_level,
        })
    }

    pub fn amp_levels(&self) -> usize {
        self.amp_levels
    }

    pub fn phase_levels(&self) -> usize {
        self.phase_levels
    }

    pub fn extinction_ratio(&self) -> f64 {
        self.extinction_ratio
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    /// Lowest settable amplitude, `1 / extinction_ratio`.
    pub fn w_min(&self) -> f64 {
        1.0 / self.extinction_ratio
    }

    /// Amplitude grid step `(1 - w_min) / (amp_levels - 1)`.
    pub fn amp_step(&self) -> f64 {
        (1.0 - self.w_min()) / (self.amp_levels - 1) as f64
    }

    /// Phase grid step `2*pi / phase_levels`.
    pub fn phase_step(&self) -> f64 {
        TAU / self.phase_levels as f64
    }

    /// Amplitude level `j` (0-based). Computed as an exact interpolation so
    /// the endpoints are `w_min` and `1.0` with no rounding slack.
    pub fn amp_level(&self, j: usize) -> f64 {
        debug_assert!(j < self.amp_levels);
        let f = j as f64 / (self.amp_levels - 1) as f64;
        self.w_min() * (1.0 - f) + f
    }

    /// Phase level `k` (0-based): `2*pi * k / phase_levels`.
    pub fn phase_level(&self, k: usize) -> f64 {
        debug_assert!(k < self.phase_levels);
        TAU * k as f64 / self.phase_levels as f64
    }

    /// All `amp_levels` settable amplitudes, ascending.
    pub fn amp_grid(&self) -> Vec<f64> {
        (0..self.amp_levels).map(|j| self.amp_level(j)).collect()
    }

    /// All `phase_levels` settable phases, ascending.
    pub fn phase_grid(&self) -> Vec<f64> {
        (0..self.phase_levels)
            .map(|k| self.phase_level(k))
            .collect()
    }

    /// Amplitude drift standard deviation `noise_level * amp_step`.
    pub fn amp_sigma(&self) -> f64 {
        self.noise_level * self.amp_step()
    }

    /// Phase drift standard deviation `noise_level * phase_step`.
    pub fn phase_sigma(&self) -> f64 {
        self.noise_level * self.phase_step()
    }
}

/// Nearest amplitude grid level to `a` (ties to the higher level). Any
/// `a < w_min` maps to `w_min`, the lowest level.
pub fn quantize_amplitude(a: f64, spec: &QuantizationSpec) -> Result<f64> {
    if !a.is_finite() || !(0.0..=1.0).contains(&a) {
        return Err(Error::invalid_argument(format!(
            "amplitude {a} outside [0, 1]"
        )));
    }
    let n = spec.amp_levels;
    let step = spec.amp_step();
    let estimate = ((a - spec.w_min()) / step).round();
    let j0 = if estimate.is_finite() && estimate > 0.0 {
        (estimate as usize).min(n - 1)
    } else {
        0
    };
    // The arithmetic estimate is within one level of the true nearest; scan a
    // small window around it with the documented tie rule so the result
    // matches a brute-force scan over the explicit grid exactly.
    let lo = j0.saturating_sub(2);
    let hi = (j0 + 2).min(n - 1);
    let mut best_j = lo;
    let mut best_d = (a - spec.amp_level(lo)).abs();
    for j in lo + 1..=hi {
        let d = (a - spec.amp_level(j)).abs();
        if d < best_d || (d == best_d && j == best_j + 1) {
            best_j = j;
            best_d = d;
        }
    }
    Ok(spec.amp_level(best_j))
}

/// Circularly nearest phase grid level to `phi` (after wrapping into
/// [0, 2*pi)); ties go to the next level counter-clockwise, wrapping to
/// level 0 past the top.
pub fn quantize_phase(phi: f64, spec: &QuantizationSpec) -> f64 {
    assert!(phi.is_finite(), "phase must be finite, got {phi}");
    let n = spec.phase_levels;
    let w = wrap_phase(phi);
    if n == 1 {
        return 0.0;
    }
    let circ_dist = |k: usize| -> f64 {
        let d = (w - spec.phase_level(k)).abs();
        d.min(TAU - d)
    };
    let estimate = (w / spec.phase_step() + 0.5).floor();
    let k0 = if estimate > 0.0 {
        estimate as usize % n
    } else {
        0
    };
    // Candidate window around the estimate, visited in ascending level order
    // with the same tie rule as a full scan: on a distance tie the level
    // lying above the wrapped phase wins (the counter-clockwise neighbor;
    // on the wrap tie near 2*pi that is level 0, which the scan visits
    // first and which the top level must not displace).
    let mut ks: Vec<usize> = (-2i64..=2)
        .map(|d| (k0 as i64 + d).rem_euclid(n as i64) as usize)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    let mut best_k = ks[0];
    let mut best_d = circ_dist(ks[0]);
    for &k in &ks[1..] {
        let d = circ_dist(k);
        if d < best_d || (d == best_d && spec.phase_level(k) > w) {
            best_k = k;
            best_d = d;
        }
    }
    spec.phase_level(best_k)
}

/// Add Gaussian drift to every weight: amplitude noise `N(0, (eta*dw)^2)`
/// clamped back into [0, 1], phase noise `N(0, (eta*dphi)^2)` wrapped mod
/// 2*pi. Draws are independent per weight per call (amplitude first, then
/// phase, in node order). Drift is physical, so noisy amplitudes may fall
/// below `w_min` and off-grid.
pub fn apply_drift_noise<R: Rng + ?Sized>(
    weights: &ReadoutWeights,
    spec: &QuantizationSpec,
    rng: &mut R,
) -> ReadoutWeights {
    let sigma_a = spec.amp_sigma();
    let sigma_p = spec.phase_sigma();
    let mut amps = Vec::with_capacity(weights.len());
    let mut phases = Vec::with_capacity(weights.len());
    for k in 0..weights.len() {
        let na: f64 = rng.sample(StandardNormal);
        let np: f64 = rng.sample(StandardNormal);
        amps.push((weights.amplitudes()[k] + sigma_a * na).clamp(0.0, 1.0));
        phases.push(weights.phases()[k] + sigma_p * np);
    }
    ReadoutWeights::new(amps, phases).expect("drifted weights stay within bounds")
}

/// Element-wise nearest-level quantization of both axes: the naive
/// train-once, quantize-once baseline.
pub fn direct_quantize(weights: &ReadoutWeights, spec: &QuantizationSpec) -> ReadoutWeights {
    let amps = weights
        .amplitudes()
        .iter()
        .map(|&a| quantize_amplitude(a, spec).expect("weight amplitudes lie in [0, 1]"))
        .collect();
    let phases = weights
        .phases()
        .iter()
        .map(|&p| quantize_phase(p, spec))
        .collect();
    ReadoutWeights::new(amps, phases).expect("quantized weights stay within bounds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Independent oracle: brute-force nearest level over the explicit grid,
    /// scanning ascending with ties displaced by the next-higher level.
    fn oracle_amp(a: f64, spec: &QuantizationSpec) -> f64 {
        let grid = spec.amp_grid();
        let mut best_j = 0usize;
        let mut best_d = (a - grid[0]).abs();
        for (j, &level) in grid.iter().enumerate().skip(1) {
            let d = (a - level).abs();
            if d < best_d || (d == best_d && j == best_j + 1) {
                best_j = j;
                best_d = d;
            }
        }
        grid[best_j]
    }

    /// Independent oracle for the circular phase grid: full ascending scan;
    /// on a distance tie the level above the wrapped phase wins (for the
    /// wrap tie at `2*pi - dphi/2` that is level 0, visited first, which the
    /// top level must not displace).
    fn oracle_phase(phi: f64, spec: &QuantizationSpec) -> f64 {
        let w = wrap_phase(phi);
        let grid = spec.phase_grid();
        let mut best_k = 0usize;
        let mut best_d = {
            let d = (w - grid[0]).abs();
            d.min(TAU - d)
        };
        for (k, &level) in grid.iter().enumerate().skip(1) {
            let d = (w - level).abs();
            let d = d.min(TAU - d);
            if d < best_d || (d == best_d && level > w) {
                best_k = k;
                best_d = d;
            }
        }
        grid[best_k]
    }

    #[test]
    fn spec_validation() {
        assert!(QuantizationSpec::new(1, 8, 10.0, 0.0).is_err());
        assert!(QuantizationSpec::new(8, 0, 10.0, 0.0).is_err());
        assert!(QuantizationSpec::new(8, 8, 1.0, 0.0).is_err());
        assert!(QuantizationSpec::new(8, 8, 10.0, -0.1).is_err());
        assert!(QuantizationSpec::new(8, 8, f64::INFINITY, 0.0).is_err());
        assert!(QuantizationSpec::new(8, 8, 10.0, 0.5).is_ok());
    }

    #[test]
    fn extinction_ratio_ten_gives_w_min_tenth() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.0).unwrap();
        assert_eq!(spec.w_min(), 0.1);
    }

    #[test]
    fn grid_matches_hand_computed_values() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.0).unwrap();
        assert_eq!(spec.amp_step(), 0.9 / 7.0);
        let grid = spec.amp_grid();
        assert_eq!(grid.len(), 8);
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[7], 1.0);
        assert_abs_diff_eq!(grid[1], 0.2285714285714286, epsilon = 1e-12);

        let spec = QuantizationSpec::new(2, 1, 2.0, 0.0).unwrap();
        assert_eq!(spec.amp_grid(), vec![0.5, 1.0]);
    }

    #[test]
    fn grid_endpoints_exact_across_specs() {
        for n in [2usize, 3, 8, 16, 32, 1000] {
            for e in [1.5, 2.0, 3.0, 5.0, 10.0, 1e6] {
                let spec = QuantizationSpec::new(n, 8, e, 0.0).unwrap();
                let grid = spec.amp_grid();
                assert_eq!(grid[0], 1.0 / e);
                assert_eq!(grid[n - 1], 1.0);
                for w in grid.windows(2) {
                    assert!(w[1] > w[0]);
                }
            }
        }
    }

    #[test]
    fn quantize_amplitude_examples() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.0).unwrap();
        assert_eq!(quantize_amplitude(0.05, &spec).unwrap(), 0.1);
        assert_eq!(quantize_amplitude(0.0, &spec).unwrap(), 0.1);
        assert_eq!(quantize_amplitude(1.0, &spec).unwrap(), 1.0);
        let q = quantize_amplitude(0.5, &spec).unwrap();
        assert_eq!(q, spec.amp_level(3));
        assert_abs_diff_eq!(q, 0.4857143, epsilon = 1e-6);
    }

    #[test]
    fn quantize_amplitude_rejects_out_of_range() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.0).unwrap();
        assert!(quantize_amplitude(-0.01, &spec).is_err());
        assert!(quantize_amplitude(1.01, &spec).is_err());
        assert!(quantize_amplitude(f64::NAN, &spec).is_err());
    }

    #[test]
    fn quantize_phase_examples() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.0).unwrap();
        assert_eq!(quantize_phase(0.0, &spec), 0.0);
        // 6.2 is circularly closer to 2*pi (= level 0) than to 7*pi/4.
        assert_eq!(quantize_phase(6.2, &spec), 0.0);
        // 3.2 is nearest to pi.
        assert_eq!(quantize_phase(3.2, &spec), PI);
    }

    #[test]
    fn quantize_phase_single_level() {
        let spec = QuantizationSpec::new(8, 1, 10.0, 0.0).unwrap();
        for phi in [0.0, 0.1, 3.0, 6.3, -2.0, 12.0] {
            assert_eq!(quantize_phase(phi, &spec), 0.0);
        }
    }

    #[test]
    fn quantizers_match_brute_force_oracle() {
        for n in [2usize, 8, 16, 32] {
            for e in [2.0, 5.0, 10.0] {
                let spec = QuantizationSpec::new(n, 8, e, 0.0).unwrap();
                let mut a = 0.0f64;
                while a <= 1.0 {
                    let got = quantize_amplitude(a, &spec).unwrap();
                    assert_eq!(got, oracle_amp(a, &spec), "a={a} n={n} e={e}");
                    a += 0.001;
                }
                assert_eq!(quantize_amplitude(1.0, &spec).unwrap(), 1.0);
            }
        }
        for n_phi in [1usize, 8, 32] {
            let spec = QuantizationSpec::new(8, n_phi, 10.0, 0.0).unwrap();
            let mut phi = 0.0f64;
            while phi < 2.0 * TAU {
                assert_eq!(
                    quantize_phase(phi, &spec),
                    oracle_phase(phi, &spec),
                    "phi={phi} n_phi={n_phi}"
                );
                phi += 0.003;
            }
        }
    }

    #[test]
    fn quantizers_handle_exact_midpoints() {
        // Ties go to the higher level.
        let spec = QuantizationSpec::new(2, 4, 2.0, 0.0).unwrap();
        // Amplitude grid {0.5, 1.0}; midpoint 0.75 exactly representable.
        assert_eq!(quantize_amplitude(0.75, &spec).unwrap(), 1.0);
        // Phase grid {0, pi/2, pi, 3pi/2}; midpoints at odd multiples of
        // pi/4. The wrap tie at 7pi/4 + pi/4 = 2pi belongs to level 0.
        let dphi = spec.phase_step();
        assert_eq!(quantize_phase(0.5 * dphi, &spec), spec.phase_level(1));
        assert_eq!(quantize_phase(2.5 * dphi, &spec), spec.phase_level(3));
        assert_eq!(quantize_phase(3.5 * dphi, &spec), 0.0);
        assert_eq!(oracle_phase(3.5 * dphi, &spec), 0.0);
        assert_eq!(oracle_amp(0.75, &spec), 1.0);

        // Two-level phase grid: the tie below pi goes up to pi, the tie
        // above pi wraps up to level 0.
        let spec2 = QuantizationSpec::new(2, 2, 2.0, 0.0).unwrap();
        assert_eq!(quantize_phase(0.5 * PI, &spec2), PI);
        assert_eq!(quantize_phase(1.5 * PI, &spec2), 0.0);
        assert_eq!(oracle_phase(1.5 * PI, &spec2), 0.0);
    }

    #[test]
    fn quantization_is_idempotent() {
        for n in [2usize, 8, 17] {
            for e in [2.0, 10.0] {
                let spec = QuantizationSpec::new(n, n, e, 0.0).unwrap();
                for j in 0..n {
                    let level = spec.amp_level(j);
                    assert_eq!(quantize_amplitude(level, &spec).unwrap(), level);
                    let p = spec.phase_level(j);
                    assert_eq!(quantize_phase(p, &spec), p);
                }
            }
        }
    }

    #[test]
    fn quantization_error_is_bounded() {
        let spec = QuantizationSpec::new(16, 16, 5.0, 0.0).unwrap();
        let half_a = spec.amp_step() / 2.0;
        let half_p = spec.phase_step() / 2.0;
        let mut a = 0.0f64;
        while a <= 1.0 {
            let q = quantize_amplitude(a, &spec).unwrap();
            let bound = if a < spec.w_min() {
                spec.w_min() - a + 1e-15
            } else {
                half_a * (1.0 + 1e-12)
            };
            assert!((q - a).abs() <= bound, "a={a} q={q}");
            a += 0.0007;
        }
        let mut phi = 0.0f64;
        while phi < TAU {
            let q = quantize_phase(phi, &spec);
            let d = (q - phi).abs();
            let d = d.min(TAU - d);
            assert!(d <= half_p * (1.0 + 1e-12), "phi={phi} q={q}");
            phi += 0.0007;
        }
    }

    #[test]
    fn drift_noise_zero_is_identity() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.0).unwrap();
        let w = direct_quantize(
            &ReadoutWeights::new(vec![0.3, 0.8, 0.55], vec![0.1, 2.0, 5.9]).unwrap(),
            &spec,
        );
        let mut rng = crate::rng::derive_rng(1, &[crate::rng::stream::DRIFT]);
        let noisy = apply_drift_noise(&w, &spec, &mut rng);
        assert_eq!(w, noisy);
    }

    #[test]
    fn drift_noise_sigma_example() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.5).unwrap();
        assert_abs_diff_eq!(spec.amp_sigma(), 0.0642857, epsilon = 1e-6);
    }

    #[test]
    fn drift_noise_moments_match_spec() {
        // Monte Carlo moment check on one weight sitting mid-grid.
        let spec = QuantizationSpec::new(8, 64, 10.0, 0.5).unwrap();
        let level = quantize_amplitude(0.5, &spec).unwrap();
        let w = ReadoutWeights::new(vec![level], vec![PI]).unwrap();
        let n = 100_000usize;
        let mut rng = crate::rng::derive_rng(7, &[crate::rng::stream::DRIFT, 42]);
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for _ in 0..n {
            let noisy = apply_drift_noise(&w, &spec, &mut rng);
            let a = noisy.amplitudes()[0];
            sum += a;
            sum_sq += a * a;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let sigma = spec.amp_sigma();
        assert!(
            (var.sqrt() - sigma).abs() <= 0.02 * sigma,
            "sample sigma {} vs {}",
            var.sqrt(),
            sigma
        );
        assert!(
            (mean - level).abs() <= 3.0 * sigma / (n as f64).sqrt(),
            "sample mean {mean} vs level {level}"
        );
    }

    #[test]
    fn drift_noise_clamps_and_wraps() {
        let spec = QuantizationSpec::new(2, 2, 1.25, 20.0).unwrap();
        let w = ReadoutWeights::new(vec![0.8, 1.0, 0.8], vec![0.0, 3.0, 6.0]).unwrap();
        let mut rng = crate::rng::derive_rng(3, &[crate::rng::stream::DRIFT]);
        for _ in 0..200 {
            let noisy = apply_drift_noise(&w, &spec, &mut rng);
            for &a in noisy.amplitudes() {
                assert!((0.0..=1.0).contains(&a));
            }
            for &p in noisy.phases() {
                assert!((0.0..TAU).contains(&p));
            }
        }
    }

    #[test]
    fn direct_quantize_idempotent_and_degenerate() {
        let spec = QuantizationSpec::new(8, 8, 10.0, 0.0).unwrap();
        let w = ReadoutWeights::new(vec![0.3, 0.8, 0.01], vec![0.1, 2.0, 6.2]).unwrap();
        let q = direct_quantize(&w, &spec);
        assert_eq!(direct_quantize(&q, &spec), q);

        // Degenerate grid: every phase collapses to 0, every amplitude to
        // w_min or 1.
        let spec = QuantizationSpec::new(2, 1, 10.0, 0.0).unwrap();
        let q = direct_quantize(&w, &spec);
        for &p in q.phases() {
            assert_eq!(p, 0.0);
        }
        for &a in q.amplitudes() {
            assert!(a == 0.1 || a == 1.0);
        }
    }
}
