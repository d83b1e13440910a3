//! Fixed-point range compressor.
//!
//! Mirrors the hardware correlator: the reference pulse (RX1) is conjugated
//! by negating its Q component, both memories are DC-corrected with the mean
//! of the *previous* PRI, and every lag is an exact integer sum of 448
//! complex products. Magnitudes follow the hardware word widths: lag
//! components fit in 42 bits, `re² + im²` in 85 bits, which is cut to 64 bits
//! before the integer square root.

use num_complex::Complex;
use num_integer::Roots;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

use crate::scene::PulsePair;
use crate::waveform::IqBuffer;

/// Width of the signed accumulator checked at run time. DC-corrected samples
/// are 17 bits wide; 448 of their products stay well below this.
pub const ACCUMULATOR_LIMIT_BITS: u32 = 48;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XcorrError {
    #[error("{which} has {got} samples, engine expects {expected}")]
    LengthMismatch { which: &'static str, got: usize, expected: usize },
    #[error("lag {lag}: accumulator needs {bits} magnitude bits (signed limit {ACCUMULATOR_LIMIT_BITS})")]
    AccumulatorOverflow { lag: usize, bits: u32 },
    #[error("lag range {start}..{end} outside 0..{n_lags}")]
    LagRange { start: usize, end: usize, n_lags: usize },
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

/// How the 85-bit magnitude-squared word is cut down to 64 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// Drop the low bits (logical right shift).
    #[default]
    DropLsb,
    /// Keep the low 64 bits, clamping anything larger to `u64::MAX`.
    SaturateMsb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub taps: usize,
    pub window_len: usize,
    pub sample_bits: u32,
    pub accum_bits_expected: u32,
    pub magsq_bits_expected: u32,
    pub truncate_to_bits: u32,
    #[serde(default)]
    pub truncation: TruncationMode,
    #[serde(default = "default_true")]
    pub dc_correction: bool,
}

fn default_true() -> bool {
    true
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            taps: 448,
            window_len: 3136,
            sample_bits: 16,
            accum_bits_expected: 42,
            magsq_bits_expected: 85,
            truncate_to_bits: 64,
            truncation: TruncationMode::DropLsb,
            dc_correction: true,
        }
    }
}

impl EngineConfig {
    /// Number of output lags, `window_len - taps` (2688 by default).
    pub fn n_lags(&self) -> usize {
        self.window_len - self.taps
    }

    /// Bits dropped from `re² + im²` in [`TruncationMode::DropLsb`].
    pub fn truncation_shift(&self) -> u32 {
        self.magsq_bits_expected.saturating_sub(self.truncate_to_bits)
    }

    pub fn validate(&self) -> Result<(), XcorrError> {
        if self.taps == 0 || self.taps >= self.window_len {
            return Err(XcorrError::Config(format!(
                "taps ({}) must be in 1..window_len ({})",
                self.taps, self.window_len
            )));
        }
        if self.truncate_to_bits > 64 || self.truncate_to_bits == 0 {
            return Err(XcorrError::Config("truncate_to_bits must be in 1..=64".into()));
        }
        if self.magsq_bits_expected > 128 {
            return Err(XcorrError::Config("magsq_bits_expected must be <= 128".into()));
        }
        Ok(())
    }
}

/// Per-channel DC offset, in codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DcEstimate {
    pub mean_i: i32,
    pub mean_q: i32,
}

impl DcEstimate {
    pub const ZERO: DcEstimate = DcEstimate { mean_i: 0, mean_q: 0 };
}

fn div_round_half_away(sum: i64, n: i64) -> i64 {
    let q = (2 * sum.abs() + n) / (2 * n);
    if sum < 0 {
        -q
    } else {
        q
    }
}

/// Arithmetic mean of I and Q over the buffer, rounded half away from zero.
/// An empty buffer has zero mean.
pub fn dc_estimate(buffer: &IqBuffer) -> DcEstimate {
    let n = buffer.len() as i64;
    if n == 0 {
        return DcEstimate::ZERO;
    }
    let (si, sq) = buffer
        .samples()
        .iter()
        .fold((0i64, 0i64), |(si, sq), s| (si + s.re as i64, sq + s.im as i64));
    DcEstimate {
        mean_i: div_round_half_away(si, n) as i32,
        mean_q: div_round_half_away(sq, n) as i32,
    }
}

/// Number of bits needed to hold `|v|` (two's complement sign not counted).
pub fn bit_length(v: i64) -> u32 {
    64 - v.unsigned_abs().leading_zeros()
}

/// DC-corrected, split-component copies of both memories as they sit in the
/// correlator's shift registers.
struct Registers {
    ref_i: Vec<i64>,
    ref_q_neg: Vec<i64>,
    echo_i: Vec<i64>,
    echo_q: Vec<i64>,
}

impl Registers {
    fn load(rx1: &IqBuffer, rx2: &IqBuffer, dc1: DcEstimate, dc2: DcEstimate) -> Self {
        let ref_i = rx1.samples().iter().map(|s| s.re as i64 - dc1.mean_i as i64).collect();
        // Conjugation: Q is negated on its way into the buffer.
        let ref_q_neg = rx1.samples().iter().map(|s| -(s.im as i64 - dc1.mean_q as i64)).collect();
        let echo_i = rx2.samples().iter().map(|s| s.re as i64 - dc2.mean_i as i64).collect();
        let echo_q = rx2.samples().iter().map(|s| s.im as i64 - dc2.mean_q as i64).collect();
        Self { ref_i, ref_q_neg, echo_i, echo_q }
    }

    fn lag(&self, m: usize) -> Result<Complex<i64>, XcorrError> {
        let k = self.ref_i.len();
        let bi = &self.echo_i[m..m + k];
        let bq = &self.echo_q[m..m + k];
        let mut re = 0i64;
        let mut im = 0i64;
        for j in 0..k {
            let (ci, cq) = (self.ref_i[j], self.ref_q_neg[j]);
            re += ci * bi[j] - cq * bq[j];
            im += ci * bq[j] + cq * bi[j];
        }
        let bits = bit_length(re).max(bit_length(im));
        if bits + 1 > ACCUMULATOR_LIMIT_BITS {
            return Err(XcorrError::AccumulatorOverflow { lag: m, bits });
        }
        Ok(Complex::new(re, im))
    }
}

fn check_lengths(cfg: &EngineConfig, rx1: &IqBuffer, rx2: &IqBuffer) -> Result<(), XcorrError> {
    if rx1.len() != cfg.taps {
        return Err(XcorrError::LengthMismatch { which: "rx1", got: rx1.len(), expected: cfg.taps });
    }
    if rx2.len() != cfg.window_len {
        return Err(XcorrError::LengthMismatch { which: "rx2", got: rx2.len(), expected: cfg.window_len });
    }
    Ok(())
}

/// Correlate a subset of lags: `out[i] = sum_k conj(rx1'[k]) rx2'[k + m]` for
/// `m` in `lags`, where `x' = x - dc`.
pub fn cross_correlate_lags(
    cfg: &EngineConfig,
    rx1: &IqBuffer,
    rx2: &IqBuffer,
    dc1: DcEstimate,
    dc2: DcEstimate,
    lags: Range<usize>,
) -> Result<Vec<Complex<i64>>, XcorrError> {
    check_lengths(cfg, rx1, rx2)?;
    if lags.start > lags.end || lags.end > cfg.n_lags() {
        return Err(XcorrError::LagRange { start: lags.start, end: lags.end, n_lags: cfg.n_lags() });
    }
    let regs = Registers::load(rx1, rx2, dc1, dc2);
    lags.map(|m| regs.lag(m)).collect()
}

/// All `window_len - taps` lags, computed on the calling thread.
pub fn cross_correlate(
    cfg: &EngineConfig,
    rx1: &IqBuffer,
    rx2: &IqBuffer,
    dc1: DcEstimate,
    dc2: DcEstimate,
) -> Result<Vec<Complex<i64>>, XcorrError> {
    cross_correlate_lags(cfg, rx1, rx2, dc1, dc2, 0..cfg.n_lags())
}

/// As [`cross_correlate`], split across the rayon pool. Bit-identical to the
/// sequential result.
pub fn cross_correlate_par(
    cfg: &EngineConfig,
    rx1: &IqBuffer,
    rx2: &IqBuffer,
    dc1: DcEstimate,
    dc2: DcEstimate,
) -> Result<Vec<Complex<i64>>, XcorrError> {
    check_lengths(cfg, rx1, rx2)?;
    let regs = Registers::load(rx1, rx2, dc1, dc2);
    (0..cfg.n_lags()).into_par_iter().map(|m| regs.lag(m)).collect()
}

/// `re² + im²` at full width (at most 85 bits for in-contract lags).
pub fn magnitude_squared(lag: Complex<i64>) -> u128 {
    let re = lag.re.unsigned_abs() as u128;
    let im = lag.im.unsigned_abs() as u128;
    re * re + im * im
}

/// Cut a magnitude-squared word to 64 bits.
pub fn truncate_magsq(s: u128, mode: TruncationMode, shift: u32) -> u64 {
    match mode {
        TruncationMode::DropLsb => u64::try_from(s >> shift).unwrap_or(u64::MAX),
        TruncationMode::SaturateMsb => u64::try_from(s).unwrap_or(u64::MAX),
    }
}

/// Integer magnitude per lag: `floor(sqrt(truncate(re² + im²)))`.
///
/// With the default 21-bit shift small lags collapse to zero (e.g. (3, 4)
/// gives `sqrt(25 >> 21) = 0`); the shift is applied uniformly so full-scale
/// peaks never overflow.
pub fn magnitude(lags: &[Complex<i64>], mode: TruncationMode, shift: u32) -> Vec<u64> {
    lags.iter()
        .map(|&l| truncate_magsq(magnitude_squared(l), mode, shift).sqrt())
        .collect()
}

/// `atan2(im, re)` per lag, in (-pi, pi]; the zero lag maps to 0.
pub fn phase(lags: &[Complex<i64>]) -> Vec<f64> {
    lags.iter()
        .map(|l| if l.re == 0 && l.im == 0 { 0.0 } else { (l.im as f64).atan2(l.re as f64) })
        .collect()
}

/// Index of the largest magnitude; ties go to the lowest index.
pub fn peak_bin(magnitude: &[u64]) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &m) in magnitude.iter().enumerate() {
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

/// Compressed output of one PRI.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub pulse_index: u64,
    pub lags: Vec<Complex<i64>>,
    pub magnitude: Vec<u64>,
    pub phase: Vec<f64>,
}

impl RangeProfile {
    pub fn peak_bin(&self) -> Option<usize> {
        peak_bin(&self.magnitude)
    }
}

/// Stateful correlator for one stream of pulses. Holds the DC estimates that
/// feed forward from one PRI to the next; the first PRI uses zero means.
#[derive(Debug, Clone)]
pub struct RangeCompressor {
    cfg: EngineConfig,
    dc_rx1: DcEstimate,
    dc_rx2: DcEstimate,
    parallel: bool,
}

impl RangeCompressor {
    pub fn new(cfg: EngineConfig) -> Result<Self, XcorrError> {
        cfg.validate()?;
        Ok(Self { cfg, dc_rx1: DcEstimate::ZERO, dc_rx2: DcEstimate::ZERO, parallel: false })
    }

    /// Spread full-profile correlation over the rayon pool.
    pub fn with_parallelism(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// DC estimates that will be applied to the next PRI, `(rx1, rx2)`.
    pub fn pending_dc(&self) -> (DcEstimate, DcEstimate) {
        (self.dc_rx1, self.dc_rx2)
    }

    pub fn reset(&mut self) {
        self.dc_rx1 = DcEstimate::ZERO;
        self.dc_rx2 = DcEstimate::ZERO;
    }

    fn advance(&mut self, rx1: &IqBuffer, rx2: &IqBuffer) -> (DcEstimate, DcEstimate) {
        let current = (self.dc_rx1, self.dc_rx2);
        if self.cfg.dc_correction {
            self.dc_rx1 = dc_estimate(rx1);
            self.dc_rx2 = dc_estimate(rx2);
            current
        } else {
            (DcEstimate::ZERO, DcEstimate::ZERO)
        }
    }

    /// Full range profile for one PRI; updates the DC feedback.
    pub fn compress(&mut self, rx1: &IqBuffer, rx2: &IqBuffer, pulse_index: u64) -> Result<RangeProfile, XcorrError> {
        check_lengths(&self.cfg, rx1, rx2)?;
        let (dc1, dc2) = self.advance(rx1, rx2);
        let lags = if self.parallel {
            cross_correlate_par(&self.cfg, rx1, rx2, dc1, dc2)?
        } else {
            cross_correlate(&self.cfg, rx1, rx2, dc1, dc2)?
        };
        let magnitude = magnitude(&lags, self.cfg.truncation, self.cfg.truncation_shift());
        let phase = phase(&lags);
        Ok(RangeProfile { pulse_index, lags, magnitude, phase })
    }

    pub fn compress_pair(&mut self, pair: &PulsePair) -> Result<RangeProfile, XcorrError> {
        self.compress(&pair.rx1, &pair.rx2, pair.pulse_index)
    }

    /// Only the requested lags; the DC feedback advances exactly as in
    /// [`compress`](Self::compress), so both paths agree lag for lag.
    pub fn compress_lags(&mut self, rx1: &IqBuffer, rx2: &IqBuffer, lags: Range<usize>) -> Result<Vec<Complex<i64>>, XcorrError> {
        check_lengths(&self.cfg, rx1, rx2)?;
        let (dc1, dc2) = self.advance(rx1, rx2);
        cross_correlate_lags(&self.cfg, rx1, rx2, dc1, dc2, lags)
    }
}
