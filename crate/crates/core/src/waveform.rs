//! Linear-FM reference pulse and the 16-bit sample format of the datapath.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::Real;

/// Largest positive code of a 16-bit converter; the float full scale ±1.0
/// maps onto ±`FULL_SCALE`.
pub const FULL_SCALE: f64 = 32767.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("chirp must have at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("bandwidth {bandwidth_hz} Hz exceeds complex sample rate {sample_rate_hz} Hz")]
    BandwidthAboveSampleRate { bandwidth_hz: f64, sample_rate_hz: f64 },
    #[error("{field} must be strictly positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("quantization headroom must lie in (0, 1], got {0}")]
    Headroom(f64),
}

/// Parameters of the transmitted linear-FM pulse.
///
/// At baseband the sweep runs symmetrically from `-B/2` to `+B/2` around
/// `sweep_offset_hz` (zero unless an experiment moves it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub initial_phase_rad: f64,
    #[serde(default)]
    pub sweep_offset_hz: f64,
}

impl Default for ChirpParams {
    /// 5.755 GHz carrier, 40 MHz sweep over 3.73 µs sampled at 120 MS/s.
    fn default() -> Self {
        Self {
            carrier_hz: 5.755e9,
            bandwidth_hz: 40e6,
            duration_s: 3.73e-6,
            sample_rate_hz: 120e6,
            initial_phase_rad: 0.0,
            sweep_offset_hz: 0.0,
        }
    }
}

impl ChirpParams {
    /// Number of samples in one pulse, `round(duration * sample_rate)`.
    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round().max(0.0) as usize
    }

    /// Angular chirp rate `2 pi B / tau` in rad/s².
    pub fn chirp_rate(&self) -> f64 {
        2.0 * PI * self.bandwidth_hz / self.duration_s
    }

    pub fn wavelength_m(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Instantaneous baseband frequency at time `t` after the pulse start.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.sweep_offset_hz - self.bandwidth_hz / 2.0 + self.bandwidth_hz * t / self.duration_s
    }

    /// Baseband phase polynomial at time `t` after the pulse start.
    pub fn phase_at(&self, t: f64) -> f64 {
        let start = self.sweep_offset_hz - self.bandwidth_hz / 2.0;
        2.0 * PI * start * t + 0.5 * self.chirp_rate() * t * t + self.initial_phase_rad
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        for (field, value) in [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("duration_s", self.duration_s),
            ("sample_rate_hz", self.sample_rate_hz),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(WaveformError::NonPositive { field, value });
            }
        }
        if self.bandwidth_hz > self.sample_rate_hz {
            return Err(WaveformError::BandwidthAboveSampleRate {
                bandwidth_hz: self.bandwidth_hz,
                sample_rate_hz: self.sample_rate_hz,
            });
        }
        let n = self.sample_count();
        if n < 2 {
            return Err(WaveformError::TooShort(n));
        }
        Ok(())
    }
}

/// Unit-modulus baseband chirp, one sample per `1 / sample_rate`.
pub fn synthesize_chirp<T: Real>(params: &ChirpParams) -> Result<Vec<Complex<T>>, WaveformError> {
    params.validate()?;
    let n = params.sample_count();
    let fs = T::of(params.sample_rate_hz);
    let two_pi = T::of(2.0) * T::PI();
    let start = T::of(params.sweep_offset_hz - params.bandwidth_hz / 2.0);
    let half_rate = T::of(0.5 * params.chirp_rate());
    let phi0 = T::of(params.initial_phase_rad);
    Ok((0..n)
        .map(|i| {
            let t = T::of_usize(i) / fs;
            let phase = two_pi * start * t + half_rate * t * t + phi0;
            Complex::from_polar(T::one(), phase)
        })
        .collect())
}

/// One pulse repetition interval's worth of 16-bit I/Q samples.
///
/// The length is fixed when the buffer is built.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IqBuffer {
    samples: Vec<Complex<i16>>,
}

impl IqBuffer {
    pub fn new(samples: Vec<Complex<i16>>) -> Self {
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        Self { samples: vec![Complex::new(0, 0); len] }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex<i16>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<i16>> {
        self.samples
    }

    /// Map codes back to float full scale, undoing a quantization performed
    /// with `headroom`.
    pub fn dequantize(&self, headroom: f64) -> Vec<Complex<f64>> {
        let scale = 1.0 / (headroom * FULL_SCALE);
        self.samples
            .iter()
            .map(|s| Complex::new(s.re as f64 * scale, s.im as f64 * scale))
            .collect()
    }
}

impl From<Vec<Complex<i16>>> for IqBuffer {
    fn from(samples: Vec<Complex<i16>>) -> Self {
        Self::new(samples)
    }
}

/// Result of quantizing a float waveform: the codes plus how many components
/// clipped at the converter limits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quantized {
    pub buffer: IqBuffer,
    pub saturated: usize,
}

fn quantize_component(v: f64, scale: f64, saturated: &mut usize) -> i16 {
    // f64::round is round-half-away-from-zero.
    let r = (v * scale).round();
    if r > i16::MAX as f64 {
        *saturated += 1;
        i16::MAX
    } else if r < i16::MIN as f64 {
        *saturated += 1;
        i16::MIN
    } else if r.is_nan() {
        *saturated += 1;
        0
    } else {
        r as i16
    }
}

/// Quantize float samples to 16-bit codes: `round(v * headroom * 32767)`,
/// saturating at the `i16` limits.
pub fn quantize<T: Real>(samples: &[Complex<T>], headroom: f64) -> Result<Quantized, WaveformError> {
    if !(headroom > 0.0 && headroom <= 1.0) {
        return Err(WaveformError::Headroom(headroom));
    }
    let scale = headroom * FULL_SCALE;
    let mut saturated = 0;
    let codes = samples
        .iter()
        .map(|s| {
            Complex::new(
                quantize_component(s.re.to_f64_lossy(), scale, &mut saturated),
                quantize_component(s.im.to_f64_lossy(), scale, &mut saturated),
            )
        })
        .collect();
    Ok(Quantized { buffer: IqBuffer::new(codes), saturated })
}
