//! Baseband chain of a pulse radar for displacement and vibration monitoring.
//!
//! The crate is split the way the hardware is: [`waveform`] builds the
//! linear-FM reference pulse, [`scene`] simulates targets and the channel and
//! produces the two 16-bit receive memories of one pulse repetition interval,
//! [`xcorr`] is the fixed-point range compressor that turns those memories
//! into a range profile, and [`slowtime`] tracks a single range bin from pulse
//! to pulse to recover displacement, vibration spectra and a waterfall.
//!
//! Float code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the double-precision instantiations used by the runtime.

pub mod scalar;
pub mod scene;
pub mod slowtime;
pub mod waveform;
pub mod xcorr;

pub use num_complex::Complex;
pub use scalar::Real;

/// Speed of light in vacuum, m/s (exact by definition of the metre).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type ComplexF32 = Complex<f32>;
pub type ComplexF64 = Complex<f64>;

pub type BinSeriesF32 = slowtime::BinSeries<f32>;
pub type BinSeriesF64 = slowtime::BinSeries<f64>;
pub type DisplacementTraceF32 = slowtime::DisplacementTrace<f32>;
pub type DisplacementTraceF64 = slowtime::DisplacementTrace<f64>;
pub type VibrationSpectrumF32 = slowtime::VibrationSpectrum<f32>;
pub type VibrationSpectrumF64 = slowtime::VibrationSpectrum<f64>;
pub type WaterfallF32 = slowtime::Waterfall<f32>;
pub type WaterfallF64 = slowtime::Waterfall<f64>;
pub type PackAccumulatorF64 = slowtime::PackAccumulator<f64>;
pub type PhaseTrackerF64 = slowtime::PhaseTracker<f64>;
