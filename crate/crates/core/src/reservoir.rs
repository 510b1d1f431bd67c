//! Passive coherent reservoir: swirl topology construction and time-domain
//! simulation.
//!
//! The reservoir is a grid of passive nodes connected by delayed waveguides.
//! Orientation follows the "swirl" pattern: each grid cell circulates its four
//! corner nodes, clockwise and counter-clockwise in a checkerboard
//! alternation. Interior edges receive a consistent direction from both
//! adjacent cells; perimeter edges are bidirectional so no light is trapped.
//! Every node therefore keeps in-degree and out-degree at most 4 (a "4-port"
//! node).
//!
//! Each node is a pure combiner-splitter. Incoming fields combine through a
//! single-mode M:1 combiner, which passes the symmetric superposition
//! `(1/sqrt(M)) * sum` of its M inputs (the orthogonal superpositions leave
//! through the discarded ports) — a bare unnormalized sum would let in-phase
//! fields add up to a local power gain, and a "passive" network with gain can
//! and does go unstable for some phase realizations. The combined field is
//! split over the outgoing edges with per-edge field transmission
//! `sqrt((1 - loss) / out_degree)`, so the forwarded power fraction per node
//! is exactly `1 - loss` and the whole circuit contracts stored energy by at
//! least that factor per hop, for every phase realization. All nonlinearity
//! lives in the downstream photodiode. The simulation is a discrete-time
//! recursion at the input sampling rate; all edge delays are at least one
//! sample, which makes the recursion well defined.

use std::collections::BTreeSet;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};
use crate::signals::OpticalSignal;

const TAU: f64 = std::f64::consts::TAU;

/// One directed waveguide between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    /// Propagation delay in samples; always >= 1.
    pub delay_samples: usize,
    /// Field transmission amplitude in (0, 1].
    pub transmission: f64,
    /// Propagation phase in [0, 2*pi).
    pub phase: f64,
}

/// A grid reservoir with swirl-oriented directed edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwirlTopology {
    pub rows: usize,
    pub cols: usize,
    pub edges: Vec<Edge>,
    /// Per-node complex input coupling; total coupled power sums to <= 1.
    pub input_coupling: Vec<Complex64>,
}

impl SwirlTopology {
    pub fn n_nodes(&self) -> usize {
        self.rows * self.cols
    }

    /// Largest edge delay in samples (0 for an edgeless topology).
    pub fn max_delay(&self) -> usize {
        self.edges
            .iter()
            .map(|e| e.delay_samples)
            .max()
            .unwrap_or(0)
    }

    /// Check the passive-circuit invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::invalid_argument(
                "topology grid must be at least 2x2",
            ));
        }
        if self.input_coupling.len() != n {
            return Err(Error::invalid_argument(format!(
                "input_coupling has {} entries for {} nodes",
                self.input_coupling.len(),
                n
            )));
        }
        let mut out_power = vec![0.0f64; n];
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::invalid_argument(format!(
                    "edge {}->{} references a node outside 0..{}",
                    e.src, e.dst, n
                )));
            }
            if e.delay_samples == 0 {
                return Err(Error::invalid_argument(
                    "edge delays must be >= 1 sample (no delay-free loops)",
                ));
            }
            if !(e.transmission > 0.0 && e.transmission <= 1.0) || !e.transmission.is_finite() {
                return Err(Error::invalid_argument(format!(
                    "edge transmission {} outside (0, 1]",
                    e.transmission
                )));
            }
            if !e.phase.is_finite() {
                return Err(Error::invalid_argument("edge phase must be finite"));
            }
            out_power[e.src] += e.transmission * e.transmission;
        }
        for (k, p) in out_power.iter().enumerate() {
            if *p > 1.0 + 1e-9 {
                return Err(Error::invalid_argument(format!(
                    "node {k} splits more power than it receives ({p} > 1)"
                )));
            }
        }
        let in_power: f64 = self.input_coupling.iter().map(|c| c.norm_sqr()).sum();
        if !in_power.is_finite() || in_power > 1.0 + 1e-9 {
            return Err(Error::invalid_argument(format!(
                "input coupling power {in_power} exceeds 1"
            )));
        }
        Ok(())
    }

    /// Serialize to TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| Error::invalid_config(format!("topology serialization failed: {e}")))
    }

    /// Parse and validate a topology from TOML.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let topo: SwirlTopology = toml::from_str(s)
            .map_err(|e| Error::invalid_config(format!("topology parse failed: {e}")))?;
        topo.validate()?;
        Ok(topo)
    }

    /// Restrict the input drive to the nodes where `active` is true,
    /// re-normalizing to unit total coupled power and keeping per-node input
    /// phases. `active` must cover every node and select at least one.
    pub fn with_input_mask(&self, active: &[bool]) -> Result<Self> {
        let n = self.n_nodes();
        if active.len() != n {
            return Err(Error::invalid_argument(format!(
                "input mask has {} entries for {} nodes",
                active.len(),
                n
            )));
        }
        let n_active = active.iter().filter(|&&a| a).count();
        if n_active == 0 {
            return Err(Error::invalid_argument(
                "input mask must keep at least one node driven",
            ));
        }
        let rescale = (n as f64 / n_active as f64).sqrt();
        let input_coupling = self
            .input_coupling
            .iter()
            .zip(active)
            .map(|(c, &a)| {
                if a {
                    c * rescale
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let masked = Self {
            input_coupling,
            ..self.clone()
        };
        masked.validate()?;
        Ok(masked)
    }
}

/// T x N complex node output fields produced by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    values: Array2<Complex64>,
    samples_per_bit: usize,
}

impl StateMatrix {
    /// Wrap a T x N field matrix; entries must be finite.
    pub fn new(values: Array2<Complex64>, samples_per_bit: usize) -> Result<Self> {
        if samples_per_bit == 0 {
            return Err(Error::invalid_argument("samples_per_bit must be >= 1"));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::numerical("state matrix contains non-finite fields"));
        }
        Ok(Self {
            values,
            samples_per_bit,
        })
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    /// Number of time steps T.
    pub fn n_steps(&self) -> usize {
        self.values.nrows()
    }

    /// Number of nodes N.
    pub fn n_nodes(&self) -> usize {
        self.values.ncols()
    }

    pub fn samples_per_bit(&self) -> usize {
        self.samples_per_bit
    }

    /// Owned copy of the rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_steps() {
            return Err(Error::invalid_argument(format!(
                "invalid row slice [{start}, {end}) for {} steps",
                self.n_steps()
            )));
        }
        Ok(Self {
            values: self.values.slice(ndarray::s![start..end, ..]).to_owned(),
            samples_per_bit: self.samples_per_bit,
        })
    }
}

/// Node id for grid position (r, c) in row-major order.
fn node_id(r: usize, c: usize, cols: usize) -> usize {
    r * cols + c
}

/// Build the swirl reservoir: checkerboard-circulating cells, bidirectional
/// perimeter edges, equal power split per node with waveguide loss, and
/// i.i.d. uniform random edge/input phases drawn deterministically from
/// `seed`.
pub fn build_swirl(
    rows: usize,
    cols: usize,
    delay_samples: usize,
    waveguide_loss: f64,
    seed: u64,
) -> Result<SwirlTopology> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid_argument(format!(
            "swirl grid must be at least 2x2, got {rows}x{cols}"
        )));
    }
    if delay_samples == 0 {
        return Err(Error::invalid_argument("delay_samples must be >= 1"));
    }
    if !(0.0..1.0).contains(&waveguide_loss) {
        return Err(Error::invalid_argument(format!(
            "waveguide_loss must lie in [0, 1), got {waveguide_loss}"
        )));
    }

    let n = rows * cols;
    let mut directed: BTreeSet<(usize, usize)> = BTreeSet::new();

    // Circulate each grid cell: clockwise when (r + c) is even, else
    // counter-clockwise. Interior edges are traversed by two cells that agree
    // on the direction, so inserting into a set deduplicates them.
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let tl = node_id(r, c, cols);
            let tr = node_id(r, c + 1, cols);
            let br = node_id(r + 1, c + 1, cols);
            let bl = node_id(r + 1, c, cols);
            let cycle = if (r + c) % 2 == 0 {
                [(tl, tr), (tr, br), (br, bl), (bl, tl)]
            } else {
                [(tl, bl), (bl, br), (br, tr), (tr, tl)]
            };
            for (src, dst) in cycle {
                directed.insert((src, dst));
            }
        }
    }

    // Perimeter edges belong to a single cell; make them bidirectional.
    for c in 0..cols - 1 {
        for r in [0, rows - 1] {
            let a = node_id(r, c, cols);
            let b = node_id(r, c + 1, cols);
            directed.insert((a, b));
            directed.insert((b, a));
        }
    }
    for r in 0..rows - 1 {
        for c in [0, cols - 1] {
            let a = node_id(r, c, cols);
            let b = node_id(r + 1, c, cols);
            directed.insert((a, b));
            directed.insert((b, a));
        }
    }

    let mut out_degree = vec![0usize; n];
    for &(src, _) in &directed {
        out_degree[src] += 1;
    }

    // Phases are drawn in the canonical sorted edge order, then one input
    // phase per node, so the construction is bit-reproducible per seed.
    let mut rng = derive_rng(seed, &[stream::TOPOLOGY]);
    let edges = directed
        .iter()
        .map(|&(src, dst)| Edge {
            src,
            dst,
            delay_samples,
            transmission: ((1.0 - waveguide_loss) / out_degree[src] as f64).sqrt(),
            phase: rng.random_range(0.0..TAU),
        })
        .collect();
    let amp = (1.0 / n as f64).sqrt();
    let input_coupling = (0..n)
        .map(|_| Complex64::from_polar(amp, rng.random_range(0.0..TAU)))
        .collect();

    let topo = SwirlTopology {
        rows,
        cols,
        edges,
        input_coupling,
    };
    topo.validate()?;
    Ok(topo)
}

/// Run the discrete-time coherent recursion
/// `s_k[t] = (1/sqrt(m_k)) * sum_{(j->k)} transmission * exp(i*phase)
///           * s_j[t - delay] + input_coupling_k * u[t]`
/// with zero initial state, where `m_k` is node k's in-degree (the
/// single-mode combiner normalization; see the module docs). Returns all node
/// fields over time.
pub fn simulate(topology: &SwirlTopology, input: &OpticalSignal) -> Result<StateMatrix> {
    topology.validate()?;
    if input.is_empty() {
        return Err(Error::invalid_argument("input signal must be non-empty"));
    }

    let n = topology.n_nodes();
    let t_len = input.len();

    // Incoming edge list per destination, in canonical edge order, with the
    // combiner normalization folded into the coefficients.
    let mut in_edges: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); n];
    for e in &topology.edges {
        in_edges[e.dst].push((
            e.src,
            e.delay_samples,
            Complex64::from_polar(e.transmission, e.phase),
        ));
    }
    for list in &mut in_edges {
        if list.len() > 1 {
            let norm = 1.0 / (list.len() as f64).sqrt();
            for (_, _, coeff) in list.iter_mut() {
                *coeff *= norm;
            }
        }
    }

    let u = input.samples();
    let mut values = Array2::<Complex64>::zeros((t_len, n));
    for t in 0..t_len {
        for k in 0..n {
            let mut acc = topology.input_coupling[k] * u[t];
            for &(src, delay, coeff) in &in_edges[k] {
                if t >= delay {
                    acc += coeff * values[[t - delay, src]];
                }
            }
            values[[t, k]] = acc;
        }
    }

    StateMatrix::new(values, input.samples_per_bit())
}
