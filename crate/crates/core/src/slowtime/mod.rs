//! Slow-time processing of one range bin: phase unwrapping, displacement,
//! averaging, vibration spectra and the spectrum history.

mod phase;
mod spectrum;
mod waterfall;

pub use phase::{
    displacement, displacement_from_phases, mean_displacement, peak_to_peak, unwrap, unwrap_with_report,
    wrap_to_pi, DisplacementTrace, PhaseTracker, Unwrapped, AMBIGUITY_THRESHOLD,
};
pub use spectrum::{
    vibration_spectrum, AxisMode, PackAccumulator, SpectrumAnalyzer, SpectrumBin, SpectrumInput, SpectrumOptions,
    VibrationSpectrum, WindowKind,
};
pub use waterfall::Waterfall;

use num_complex::Complex;
use thiserror::Error;

use crate::xcorr::RangeProfile;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlowTimeError {
    #[error("window of {window} samples exceeds trace length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("window must hold at least {min} samples, got {window}")]
    WindowTooShort { window: usize, min: usize },
    #[error("pack incomplete: {have} of {need} samples")]
    IncompletePack { have: usize, need: usize },
    #[error("spectrum has {got} bins, waterfall rows have {expected}")]
    RowLength { got: usize, expected: usize },
    #[error("waterfall capacity must be at least 1")]
    ZeroCapacity,
    #[error("pulse {got} follows pulse {previous}; bin series must be gap-free")]
    Gap { previous: u64, got: u64 },
    #[error("bin {bin} outside profile of {len} lags")]
    BinOutOfRange { bin: usize, len: usize },
    #[error("PRF must be positive")]
    BadPrf,
}

/// Slow-time samples of a single range bin, one per PRI, in pulse order.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSeries<T: Real> {
    pub bin_index: usize,
    pub samples: Vec<Complex<T>>,
    pub prf_hz: T,
}

impl<T: Real> BinSeries<T> {
    pub fn new(bin_index: usize, prf_hz: T) -> Result<Self, SlowTimeError> {
        if !(prf_hz > T::zero()) {
            return Err(SlowTimeError::BadPrf);
        }
        Ok(Self { bin_index, samples: Vec::new(), prf_hz })
    }

    pub fn with_samples(bin_index: usize, samples: Vec<Complex<T>>, prf_hz: T) -> Result<Self, SlowTimeError> {
        let mut s = Self::new(bin_index, prf_hz)?;
        s.samples = samples;
        Ok(s)
    }

    /// Collect `bin` from consecutive range profiles.
    pub fn from_profiles<'a, I>(profiles: I, bin: usize, prf_hz: T) -> Result<Self, SlowTimeError>
    where
        I: IntoIterator<Item = &'a RangeProfile>,
    {
        let mut series = Self::new(bin, prf_hz)?;
        let mut previous: Option<u64> = None;
        for p in profiles {
            if let Some(prev) = previous {
                if p.pulse_index != prev + 1 {
                    return Err(SlowTimeError::Gap { previous: prev, got: p.pulse_index });
                }
            }
            previous = Some(p.pulse_index);
            let lag = p.lags.get(bin).ok_or(SlowTimeError::BinOutOfRange { bin, len: p.lags.len() })?;
            series.samples.push(lag_to_complex(*lag));
        }
        Ok(series)
    }

    pub fn push(&mut self, sample: Complex<T>) {
        self.samples.push(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Integer correlator output as a float sample.
pub fn lag_to_complex<T: Real>(lag: Complex<i64>) -> Complex<T> {
    Complex::new(T::of(lag.re as f64), T::of(lag.im as f64))
}
