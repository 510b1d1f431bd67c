//! Bit streams, optical modulation, and task target construction.
//!
//! Bits are encoded as non-return-to-zero optical fields at a fixed number of
//! samples per bit (field amplitude `sqrt(bit)`, so detected intensity equals
//! the bit value for an identity system), optionally shaped by a one-pole
//! low-pass filter that emulates finite modulator bandwidth. Targets are
//! defined per bit: header detection (pattern match ending at the current
//! bit) and delayed XOR.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{derive_rng, stream};

/// An ordered stream of binary symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence {
    bits: Vec<u8>,
}

impl BitSequence {
    /// Wrap raw bits; every element must be 0 or 1 and the stream non-empty.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid_argument(
                "bit sequence must contain at least one bit",
            ));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid_argument(
                "bit sequence elements must be 0 or 1",
            ));
        }
        Ok(Self { bits })
    }

    /// Parse a string of '0'/'1' characters, e.g. `"1101"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::invalid_argument(format!(
                    "invalid bit character {other:?} in pattern {s:?}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// Always false: the constructor rejects empty streams.
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Contiguous sub-stream `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.bits.len() {
            return Err(Error::invalid_argument(format!(
                "invalid bit slice [{start}, {end}) for {} bits",
                self.bits.len()
            )));
        }
        Self::new(self.bits[start..end].to_vec())
    }
}

/// A sampled complex optical field produced by modulating a bit stream.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalSignal {
    samples: Vec<Complex64>,
    samples_per_bit: usize,
}

impl OpticalSignal {
    /// Wrap raw samples (used for synthetic inputs such as impulses).
    /// Modulated signals additionally satisfy
    /// `samples.len() == bits.len() * samples_per_bit`.
    pub fn new(samples: Vec<Complex64>, samples_per_bit: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid_argument("optical signal must be non-empty"));
        }
        if samples_per_bit == 0 {
            return Err(Error::invalid_argument("samples_per_bit must be >= 1"));
        }
        Ok(Self {
            samples,
            samples_per_bit,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_per_bit(&self) -> usize {
        self.samples_per_bit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Uniform i.i.d. random bits, deterministic per seed.
pub fn generate_bits(n_bits: usize, seed: u64) -> Result<BitSequence> {
    if n_bits == 0 {
        return Err(Error::invalid_argument("n_bits must be >= 1"));
    }
    let mut rng = derive_rng(seed, &[stream::BITS]);
    let bits = (0..n_bits).map(|_| rng.random_range(0..2u8)).collect();
    BitSequence::new(bits)
}

/// Encode bits as an NRZ optical field at `samples_per_bit` samples per bit.
///
/// Bit `b` becomes `samples_per_bit` samples of field amplitude `sqrt(b)`.
/// With `smoothing_alpha` > 0 the rectangular waveform is passed through the
/// one-pole low-pass filter `y[t] = (1 - alpha) * x[t] + alpha * y[t-1]`
/// (unit DC gain, `y[-1] = 0`); `alpha = 0` keeps ideal rectangular pulses.
/// The imaginary part is always zero (pure intensity modulation).
pub fn modulate(
    bits: &BitSequence,
    samples_per_bit: usize,
    smoothing_alpha: f64,
) -> Result<OpticalSignal> {
    if samples_per_bit == 0 {
        return Err(Error::invalid_argument("samples_per_bit must be >= 1"));
    }
    if !(0.0..1.0).contains(&smoothing_alpha) {
        return Err(Error::invalid_argument(format!(
            "smoothing_alpha must lie in [0, 1), got {smoothing_alpha}"
        )));
    }
    let mut samples = Vec::with_capacity(bits.len() * samples_per_bit);
    let mut prev = 0.0f64;
    for &b in bits.bits() {
        let level = f64::from(b).sqrt();
        for _ in 0..samples_per_bit {
            let value = if smoothing_alpha == 0.0 {
                level
            } else {
                (1.0 - smoothing_alpha) * level + smoothing_alpha * prev
            };
            prev = value;
            samples.push(Complex64::new(value, 0.0));
        }
    }
    OpticalSignal::new(samples, samples_per_bit)
}

/// Header-detection target: `target[t] = 1` iff the window of bits ending at
/// `t` equals `pattern`; positions before the first full window are 0.
pub fn header_target(bits: &BitSequence, pattern: &BitSequence) -> Result<BitSequence> {
    let l = pattern.len();
    if l > bits.len() {
        return Err(Error::invalid_argument(format!(
            "pattern length {l} exceeds stream length {}",
            bits.len()
        )));
    }
    let b = bits.bits();
    let p = pattern.bits();
    let target = (0..b.len())
        .map(|t| {
            if t + 1 >= l && b[t + 1 - l..=t] == *p {
                1u8
            } else {
                0u8
            }
        })
        .collect();
    BitSequence::new(target)
}

/// Delayed-XOR target: `target[t] = bits[t] ^ bits[t - delay]` for
/// `t >= delay`, and 0 before that.
pub fn xor_target(bits: &BitSequence, delay: usize) -> Result<BitSequence> {
    if delay == 0 {
        return Err(Error::invalid_argument("xor delay must be >= 1"));
    }
    if delay >= bits.len() {
        return Err(Error::invalid_argument(format!(
            "xor delay {delay} must be smaller than the stream length {}",
            bits.len()
        )));
    }
    let b = bits.bits();
    let target = (0..b.len())
        .map(|t| if t >= delay { b[t] ^ b[t - delay] } else { 0u8 })
        .collect();
    BitSequence::new(target)
}
