use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::phase::displacement_from_phases;
use super::{BinSeries, SlowTimeError};
use crate::{Real, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AxisMode {
    #[default]
    Frequency,
    /// Doppler velocity, `v = f * lambda / 2`.
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Rectangular,
    Hann,
}

/// What gets transformed: the complex bin samples, or the unwrapped
/// displacement derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumInput {
    #[default]
    Complex,
    Displacement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions<T> {
    pub axis: AxisMode,
    pub window: WindowKind,
    pub input: SpectrumInput,
    pub carrier_hz: T,
}

impl<T: Real> Default for SpectrumOptions<T> {
    fn default() -> Self {
        Self {
            axis: AxisMode::Frequency,
            window: WindowKind::Rectangular,
            input: SpectrumInput::Complex,
            carrier_hz: T::of(5.755e9),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin<T> {
    pub freq_hz: T,
    /// `freq_hz` or the matching velocity, depending on the axis mode.
    pub axis_value: T,
    pub magnitude: T,
}

/// One-sided magnitude spectrum of a pack, `0..=prf/2`.
///
/// Power at `+f` and `-f` is folded together and the result is scaled so
/// that the squared magnitudes sum to the energy of the transformed pack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VibrationSpectrum<T> {
    pub bins: Vec<SpectrumBin<T>>,
    pub pack_size: usize,
    pub axis_mode: AxisMode,
    pub resolution_hz: T,
}

impl<T: Real> VibrationSpectrum<T> {
    pub fn magnitudes(&self) -> Vec<T> {
        self.bins.iter().map(|b| b.magnitude).collect()
    }

    /// Index of the strongest bin, lowest index on ties.
    pub fn peak_index(&self) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, b) in self.bins.iter().enumerate() {
            if best.is_none_or(|(_, m)| b.magnitude > m) {
                best = Some((i, b.magnitude));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn peak(&self) -> Option<&SpectrumBin<T>> {
        self.peak_index().map(|i| &self.bins[i])
    }

    /// Re-label the axis without touching magnitudes.
    pub fn with_axis(mut self, axis: AxisMode, carrier_hz: T) -> Self {
        let half_lambda = T::of(SPEED_OF_LIGHT) / carrier_hz / T::of(2.0);
        for b in &mut self.bins {
            b.axis_value = match axis {
                AxisMode::Frequency => b.freq_hz,
                AxisMode::Velocity => b.freq_hz * half_lambda,
            };
        }
        self.axis_mode = axis;
        self
    }
}

/// Planned transform for a fixed pack size.
#[derive(Clone)]
pub struct SpectrumAnalyzer<T: Real> {
    pack_size: usize,
    opts: SpectrumOptions<T>,
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
}

impl<T: Real> std::fmt::Debug for SpectrumAnalyzer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("pack_size", &self.pack_size)
            .field("opts", &self.opts)
            .finish_non_exhaustive()
    }
}

impl<T: Real> SpectrumAnalyzer<T> {
    pub fn new(pack_size: usize, opts: SpectrumOptions<T>) -> Result<Self, SlowTimeError> {
        if pack_size < 2 {
            return Err(SlowTimeError::WindowTooShort { window: pack_size, min: 2 });
        }
        let fft = FftPlanner::new().plan_fft_forward(pack_size);
        let window = match opts.window {
            WindowKind::Rectangular => vec![T::one(); pack_size],
            WindowKind::Hann => (0..pack_size)
                .map(|n| {
                    let x = T::of(2.0) * T::PI() * T::of_usize(n) / T::of_usize(pack_size);
                    T::of(0.5) * (T::one() - x.cos())
                })
                .collect(),
        };
        Ok(Self { pack_size, opts, fft, window })
    }

    pub fn pack_size(&self) -> usize {
        self.pack_size
    }

    pub fn options(&self) -> &SpectrumOptions<T> {
        &self.opts
    }

    pub fn set_axis(&mut self, axis: AxisMode) {
        self.opts.axis = axis;
    }

    /// The mean-removed, windowed sequence that is fed to the FFT.
    pub fn prepare(&self, pack: &[Complex<T>]) -> Result<Vec<Complex<T>>, SlowTimeError> {
        if pack.len() != self.pack_size {
            return Err(SlowTimeError::IncompletePack { have: pack.len(), need: self.pack_size });
        }
        let mut x: Vec<Complex<T>> = match self.opts.input {
            SpectrumInput::Complex => pack.to_vec(),
            SpectrumInput::Displacement => {
                let phases: Vec<T> = pack.iter().map(|s| s.arg()).collect();
                displacement_from_phases(&phases, self.opts.carrier_hz)
                    .values_m
                    .into_iter()
                    .map(|v| Complex::new(v, T::zero()))
                    .collect()
            }
        };
        let n = T::of_usize(self.pack_size);
        let mean = x.iter().fold(Complex::new(T::zero(), T::zero()), |a, &v| a + v) / n;
        for (v, &w) in x.iter_mut().zip(&self.window) {
            *v = (*v - mean) * w;
        }
        Ok(x)
    }

    pub fn analyze(&self, pack: &[Complex<T>], prf_hz: T) -> Result<VibrationSpectrum<T>, SlowTimeError> {
        let mut x = self.prepare(pack)?;
        self.fft.process(&mut x);
        let n = self.pack_size;
        let nf = T::of_usize(n);
        let resolution = prf_hz / nf;
        let half_lambda = T::of(SPEED_OF_LIGHT) / self.opts.carrier_hz / T::of(2.0);
        let bins = (0..=n / 2)
            .map(|k| {
                let mut p = x[k].norm_sqr();
                if k != 0 && 2 * k != n {
                    p += x[n - k].norm_sqr();
                }
                let freq = T::of_usize(k) * resolution;
                let axis_value = match self.opts.axis {
                    AxisMode::Frequency => freq,
                    AxisMode::Velocity => freq * half_lambda,
                };
                SpectrumBin { freq_hz: freq, axis_value, magnitude: (p / nf).sqrt() }
            })
            .collect();
        Ok(VibrationSpectrum { bins, pack_size: n, axis_mode: self.opts.axis, resolution_hz: resolution })
    }
}

/// Spectrum of the most recent `pack_size` samples of `series`.
pub fn vibration_spectrum<T: Real>(
    series: &BinSeries<T>,
    pack_size: usize,
    opts: SpectrumOptions<T>,
) -> Result<VibrationSpectrum<T>, SlowTimeError> {
    if series.len() < pack_size {
        return Err(SlowTimeError::IncompletePack { have: series.len(), need: pack_size });
    }
    let analyzer = SpectrumAnalyzer::new(pack_size, opts)?;
    analyzer.analyze(&series.samples[series.len() - pack_size..], series.prf_hz)
}

/// Collects bin samples into non-overlapping packs and emits a spectrum each
/// time a pack completes.
#[derive(Debug, Clone)]
pub struct PackAccumulator<T: Real> {
    analyzer: SpectrumAnalyzer<T>,
    prf_hz: T,
    pending: Vec<Complex<T>>,
}

impl<T: Real> PackAccumulator<T> {
    pub fn new(pack_size: usize, prf_hz: T, opts: SpectrumOptions<T>) -> Result<Self, SlowTimeError> {
        if !(prf_hz > T::zero()) {
            return Err(SlowTimeError::BadPrf);
        }
        let analyzer = SpectrumAnalyzer::new(pack_size, opts)?;
        Ok(Self { analyzer, prf_hz, pending: Vec::with_capacity(pack_size) })
    }

    pub fn push(&mut self, sample: Complex<T>) -> Option<VibrationSpectrum<T>> {
        self.pending.push(sample);
        if self.pending.len() < self.analyzer.pack_size() {
            return None;
        }
        let spectrum = self.analyzer.analyze(&self.pending, self.prf_hz).ok();
        self.pending.clear();
        spectrum
    }

    pub fn filled(&self) -> usize {
        self.pending.len()
    }

    pub fn pack_size(&self) -> usize {
        self.analyzer.pack_size()
    }

    pub fn reset(&mut self) {
        self.pending.clear();
    }

    /// Change the pack length; discards any partial pack.
    pub fn set_pack_size(&mut self, pack_size: usize) -> Result<(), SlowTimeError> {
        self.analyzer = SpectrumAnalyzer::new(pack_size, *self.analyzer.options())?;
        self.pending.clear();
        Ok(())
    }

    pub fn set_axis(&mut self, axis: AxisMode) {
        self.analyzer.set_axis(axis);
    }

    pub fn axis(&self) -> AxisMode {
        self.analyzer.options().axis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pulse_radar_oracle::{dense_dft, pm_harmonics, C64};
    use std::f64::consts::PI;

    const F0: f64 = 5.755e9;

    /// Bin samples of a noise-free vibrating target: `A exp(-j (phi0 + m sin(2 pi f t)))`.
    fn pm_series(f_vib: f64, mod_index: f64, prf: f64, n: usize) -> BinSeries<f64> {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / prf;
                Complex::from_polar(3.0e9, -(0.4 + mod_index * (2.0 * PI * f_vib * t).sin()))
            })
            .collect();
        BinSeries::with_samples(24, samples, prf).unwrap()
    }

    fn band_power(s: &VibrationSpectrum<f64>, freq: f64, half_width: usize) -> f64 {
        let centre = (freq / s.resolution_hz).round() as usize;
        s.bins[centre.saturating_sub(half_width)..=(centre + half_width).min(s.bins.len() - 1)]
            .iter()
            .map(|b| b.magnitude * b.magnitude)
            .sum()
    }

    #[test]
    fn twelve_hertz_lands_in_bin_31() {
        let s = vibration_spectrum(&pm_series(12.0, 0.05, 100.0, 256), 256, SpectrumOptions::default()).unwrap();
        assert_eq!(s.resolution_hz, 0.390625);
        assert_eq!(s.bins.len(), 129);
        assert_eq!(s.peak_index(), Some(31));
        assert!((s.peak().unwrap().freq_hz - 12.109375).abs() < 1e-12);
    }

    #[test]
    fn static_target_has_no_lines() {
        let tone = vibration_spectrum(&pm_series(12.0, 0.05, 100.0, 256), 256, SpectrumOptions::default()).unwrap();
        let flat = vibration_spectrum(&pm_series(12.0, 0.0, 100.0, 256), 256, SpectrumOptions::default()).unwrap();
        let tone_peak = tone.peak().unwrap().magnitude;
        let worst = flat.bins.iter().map(|b| b.magnitude).fold(0.0, f64::max);
        assert!(worst < tone_peak * 1e-2, "residual {worst} vs tone {tone_peak}");
    }

    #[test]
    fn harmonics_follow_bessel_levels() {
        let m = 1.206;
        let opts = SpectrumOptions { window: WindowKind::Hann, ..Default::default() };
        let s = vibration_spectrum(&pm_series(12.0, m, 100.0, 256), 256, opts).unwrap();
        let fundamental = band_power(&s, 12.0, 3);
        for (f, level) in pm_harmonics(m, 12.0).into_iter().take(3).skip(1) {
            let measured_db = 10.0 * (band_power(&s, f, 3) / fundamental).log10();
            let expected_db = 20.0 * level.log10();
            assert!((measured_db - expected_db).abs() < 1.0, "{f} Hz: {measured_db:.2} dB vs {expected_db:.2} dB");
        }
    }

    #[test]
    fn peak_within_one_bin_across_band() {
        for f in (1..=9).map(|i| 5.0 * i as f64) {
            let s = vibration_spectrum(&pm_series(f, 0.3, 100.0, 256), 256, SpectrumOptions::default()).unwrap();
            let peak = s.peak().unwrap().freq_hz;
            assert!((peak - f).abs() <= s.resolution_hz, "{f} Hz -> {peak}");
        }
    }

    #[test]
    fn aliased_tone_folds() {
        let s = vibration_spectrum(&pm_series(70.0, 0.1, 100.0, 256), 256, SpectrumOptions::default()).unwrap();
        let peak = s.peak().unwrap().freq_hz;
        assert!((peak - 30.0).abs() <= s.resolution_hz, "peak {peak}");
    }

    #[test]
    fn parseval_and_dense_dft_agree() {
        for window in [WindowKind::Rectangular, WindowKind::Hann] {
            let series = pm_series(17.3, 0.8, 100.0, 64);
            let analyzer = SpectrumAnalyzer::new(64, SpectrumOptions { window, ..Default::default() }).unwrap();
            let prepared = analyzer.prepare(&series.samples).unwrap();
            let energy: f64 = prepared.iter().map(|c| c.norm_sqr()).sum();
            let s = analyzer.analyze(&series.samples, 100.0).unwrap();
            let total: f64 = s.bins.iter().map(|b| b.magnitude * b.magnitude).sum();
            assert!((total / energy - 1.0).abs() < 1e-9);
            let dense = dense_dft(&prepared.iter().map(|c| C64::new(c.re, c.im)).collect::<Vec<_>>());
            for (k, b) in s.bins.iter().enumerate() {
                let mut p = dense[k].norm_sqr();
                if k != 0 && k != 32 {
                    p += dense[64 - k].norm_sqr();
                }
                assert!(((p / 64.0).sqrt() - b.magnitude).abs() <= 1e-9 * energy.sqrt());
            }
        }
    }

    #[test]
    fn velocity_axis_scales_by_half_wavelength() {
        let opts = SpectrumOptions { axis: AxisMode::Velocity, ..Default::default() };
        let s = vibration_spectrum(&pm_series(12.0, 0.05, 100.0, 256), 256, opts).unwrap();
        let b = s.bins[31];
        assert!((b.axis_value - b.freq_hz * SPEED_OF_LIGHT / F0 / 2.0).abs() < 1e-15);
        let back = s.with_axis(AxisMode::Frequency, F0);
        assert_eq!(back.bins[31].axis_value, back.bins[31].freq_hz);
    }

    #[test]
    fn displacement_input_mode() {
        let opts = SpectrumOptions { input: SpectrumInput::Displacement, ..Default::default() };
        let s = vibration_spectrum(&pm_series(20.0, 2.0, 100.0, 256), 256, opts).unwrap();
        // displacement of a pure sinusoid has a single line
        assert!((s.peak().unwrap().freq_hz - 20.0).abs() <= s.resolution_hz);
        assert!(band_power(&s, 40.0, 3) < 1e-3 * band_power(&s, 20.0, 3));
    }

    #[test]
    fn incomplete_pack_is_rejected() {
        let short = pm_series(12.0, 0.1, 100.0, 100);
        assert_eq!(
            vibration_spectrum(&short, 256, SpectrumOptions::default()),
            Err(SlowTimeError::IncompletePack { have: 100, need: 256 })
        );
    }

    #[test]
    fn accumulator_emits_per_pack() {
        let series = pm_series(12.0, 0.1, 100.0, 600);
        let mut acc = PackAccumulator::new(256, 100.0, SpectrumOptions::default()).unwrap();
        let emitted: Vec<_> = series.samples.iter().filter_map(|&s| acc.push(s)).collect();
        assert_eq!(emitted.len(), 2);
        assert_eq!(acc.filled(), 600 - 512);
        let direct = SpectrumAnalyzer::new(256, SpectrumOptions::default()).unwrap();
        assert_eq!(emitted[1], direct.analyze(&series.samples[256..512], 100.0).unwrap());
        acc.set_pack_size(128).unwrap();
        assert_eq!(acc.filled(), 0);
        assert_eq!(acc.pack_size(), 128);
    }

    #[test]
    fn single_precision_spectrum() {
        let samples: Vec<Complex<f32>> = (0..256)
            .map(|i| Complex::from_polar(1.0f32, -(0.1 * (2.0 * std::f32::consts::PI * 12.0 * i as f32 / 100.0).sin())))
            .collect();
        let series = BinSeries::with_samples(3, samples, 100.0f32).unwrap();
        let s = vibration_spectrum(&series, 256, SpectrumOptions::default()).unwrap();
        assert_eq!(s.peak_index(), Some(31));
    }
}
