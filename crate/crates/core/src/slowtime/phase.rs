use num_complex::Complex;

use super::{BinSeries, SlowTimeError};
use crate::{Real, SPEED_OF_LIGHT};

/// Wrapped steps larger than this fraction of pi are counted as ambiguous:
/// the target may have moved close to a quarter wavelength in one PRI.
pub const AMBIGUITY_THRESHOLD: f64 = 0.9;

/// Reduce an angle to (-pi, pi], returning the reduced value and the number of
/// whole turns removed.
pub fn wrap_to_pi<T: Real>(x: T) -> (T, i64) {
    let two_pi = T::PI() + T::PI();
    let turns = (x / two_pi).round();
    let mut w = x - turns * two_pi;
    let mut k = turns.to_i64().unwrap_or(0);
    if w <= -T::PI() {
        w += two_pi;
        k -= 1;
    } else if w > T::PI() {
        w -= two_pi;
        k += 1;
    }
    (w, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unwrapped<T> {
    pub phases: Vec<T>,
    /// Steps that needed a nonzero multiple of 2 pi.
    pub corrections: usize,
    /// Steps whose corrected size exceeded [`AMBIGUITY_THRESHOLD`] * pi.
    pub ambiguous_steps: usize,
}

/// One-dimensional unwrap: every consecutive difference is brought into
/// (-pi, pi] by adding a multiple of 2 pi; the first element is unchanged.
pub fn unwrap<T: Real>(phases: &[T]) -> Vec<T> {
    unwrap_with_report(phases).phases
}

pub fn unwrap_with_report<T: Real>(phases: &[T]) -> Unwrapped<T> {
    let limit = T::of(AMBIGUITY_THRESHOLD) * T::PI();
    let mut out = Vec::with_capacity(phases.len());
    let (mut corrections, mut ambiguous_steps) = (0, 0);
    if let Some(&first) = phases.first() {
        out.push(first);
        let mut acc = first;
        for w in phases.windows(2) {
            let (step, turns) = wrap_to_pi(w[1] - w[0]);
            if turns != 0 {
                corrections += 1;
            }
            if step.abs() > limit {
                ambiguous_steps += 1;
            }
            acc += step;
            out.push(acc);
        }
    }
    Unwrapped { phases: out, corrections, ambiguous_steps }
}

/// Displacement relative to the first pulse, in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementTrace<T> {
    pub values_m: Vec<T>,
    pub unwrap_corrections: usize,
    pub ambiguous_steps: usize,
}

impl<T: Real> DisplacementTrace<T> {
    pub fn len(&self) -> usize {
        self.values_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_m.is_empty()
    }
}

fn metres_per_radian<T: Real>(carrier_hz: T) -> T {
    T::of(SPEED_OF_LIGHT) / (T::of(4.0) * T::PI() * carrier_hz)
}

/// `dR_n = c / (4 pi f0) * -(phi_n - phi_0)` on the unwrapped phase.
///
/// The echo phase falls as range grows, so the difference is negated to
/// report a receding target as positive displacement.
pub fn displacement_from_phases<T: Real>(phases: &[T], carrier_hz: T) -> DisplacementTrace<T> {
    let u = unwrap_with_report(phases);
    let scale = metres_per_radian(carrier_hz);
    let values_m = match u.phases.first() {
        Some(&p0) => u.phases.iter().map(|&p| (p0 - p) * scale).collect(),
        None => Vec::new(),
    };
    DisplacementTrace { values_m, unwrap_corrections: u.corrections, ambiguous_steps: u.ambiguous_steps }
}

pub fn displacement<T: Real>(series: &BinSeries<T>, carrier_hz: T) -> DisplacementTrace<T> {
    let phases: Vec<T> = series.samples.iter().map(|s| s.arg()).collect();
    displacement_from_phases(&phases, carrier_hz)
}

/// Mean of the last `window` displacement values.
pub fn mean_displacement<T: Real>(trace: &DisplacementTrace<T>, window: usize) -> Result<T, SlowTimeError> {
    let tail = tail(trace, window, 1)?;
    Ok(tail.iter().fold(T::zero(), |a, &v| a + v) / T::of_usize(window))
}

/// `max - min` over the last `window` displacement values.
pub fn peak_to_peak<T: Real>(trace: &DisplacementTrace<T>, window: usize) -> Result<T, SlowTimeError> {
    let tail = tail(trace, window, 2)?;
    let (lo, hi) = tail
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

fn tail<T: Real>(trace: &DisplacementTrace<T>, window: usize, min: usize) -> Result<&[T], SlowTimeError> {
    if window < min {
        return Err(SlowTimeError::WindowTooShort { window, min });
    }
    let len = trace.values_m.len();
    if window > len {
        return Err(SlowTimeError::WindowTooLong { window, len });
    }
    Ok(&trace.values_m[len - window..])
}

/// Streaming counterpart of [`displacement`]: one bin sample in, one
/// displacement out, relative to the first sample since the last reset.
#[derive(Debug, Clone)]
pub struct PhaseTracker<T: Real> {
    scale: T,
    reference: Option<T>,
    last_raw: T,
    unwrapped: T,
    corrections: usize,
    ambiguous_steps: usize,
}

impl<T: Real> PhaseTracker<T> {
    pub fn new(carrier_hz: T) -> Self {
        Self {
            scale: metres_per_radian(carrier_hz),
            reference: None,
            last_raw: T::zero(),
            unwrapped: T::zero(),
            corrections: 0,
            ambiguous_steps: 0,
        }
    }

    pub fn reset(&mut self) {
        self.reference = None;
        self.corrections = 0;
        self.ambiguous_steps = 0;
    }

    pub fn push(&mut self, sample: Complex<T>) -> T {
        let raw = sample.arg();
        match self.reference {
            None => {
                self.reference = Some(raw);
                self.unwrapped = raw;
            }
            Some(_) => {
                let (step, turns) = wrap_to_pi(raw - self.last_raw);
                if turns != 0 {
                    self.corrections += 1;
                }
                if step.abs() > T::of(AMBIGUITY_THRESHOLD) * T::PI() {
                    self.ambiguous_steps += 1;
                }
                self.unwrapped += step;
            }
        }
        self.last_raw = raw;
        (self.reference.unwrap_or(raw) - self.unwrapped) * self.scale
    }

    pub fn corrections(&self) -> usize {
        self.corrections
    }

    pub fn ambiguous_steps(&self) -> usize {
        self.ambiguous_steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const F0: f64 = 5.755e9;

    #[test]
    fn unwrap_examples() {
        assert_eq!(unwrap::<f64>(&[0.0, 0.1, 0.2]), vec![0.0, 0.1, 0.2]);
        let u = unwrap::<f64>(&[3.0, -3.0]);
        assert_eq!(u[0], 3.0);
        assert!((u[1] - 3.283_185_307_179_586).abs() < 1e-12);
        let input = [0.0, PI * 0.999, -PI * 0.999];
        let u = unwrap_with_report(&input);
        let r = pulse_radar_oracle::unwrap_reference(&input);
        for (a, b) in u.phases.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((u.phases[2] - 1.001 * PI).abs() < 1e-12);
        assert_eq!(u.corrections, 1);
        assert_eq!(u.ambiguous_steps, 1);
        assert!(unwrap::<f64>(&[]).is_empty());
    }

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap_to_pi(PI).0, PI);
        assert_eq!(wrap_to_pi(-PI).0, PI);
        assert!((wrap_to_pi(3.0 * PI + 0.1).0 - (-PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn displacement_examples() {
        let flat = displacement_from_phases(&[0.4; 10], F0);
        assert!(flat.values_m.iter().all(|&v| v == 0.0));
        // phase falls by 2 pi in small steps -> half a wavelength
        let ramp: Vec<f64> = (0..=20).map(|i| -2.0 * PI * i as f64 / 20.0).map(|p| wrap_to_pi(p).0).collect();
        let t = displacement_from_phases(&ramp, F0);
        assert!((t.values_m[20] - 0.026_046_260_469_157).abs() < 1e-12);
        assert_eq!(t.unwrap_corrections, 1);
        let t = displacement_from_phases(&[0.0, -1.2062], F0);
        assert!((t.values_m[1] - 0.005_000_170_748_107).abs() < 1e-12);
    }

    #[test]
    fn averages_and_extremes() {
        let tr = |v: Vec<f64>| DisplacementTrace { values_m: v, unwrap_corrections: 0, ambiguous_steps: 0 };
        assert!((mean_displacement(&tr(vec![0.005; 200]), 128).unwrap() - 0.005).abs() < 1e-15);
        let alt: Vec<f64> = (0..256).map(|i| if i % 2 == 0 { 0.001 } else { -0.001 }).collect();
        assert!(mean_displacement(&tr(alt), 128).unwrap().abs() < 1e-15);
        assert_eq!(peak_to_peak(&tr(vec![0.2; 10]), 5).unwrap(), 0.0);
        let sine: Vec<f64> = (0..256).map(|n| 0.005 * (2.0 * PI * 12.0 * n as f64 / 100.0).sin()).collect();
        let p2p = peak_to_peak(&tr(sine), 256).unwrap();
        let oracle = pulse_radar_oracle::sampled_sine_peak_to_peak(12.0, 0.005, 0.0, 100.0, 0, 256);
        assert_eq!(p2p, oracle);
        assert!((p2p - 0.010).abs() < 1e-4);
        assert_eq!(mean_displacement(&tr(vec![1.0; 3]), 4), Err(SlowTimeError::WindowTooLong { window: 4, len: 3 }));
        assert_eq!(peak_to_peak(&tr(vec![1.0; 3]), 1), Err(SlowTimeError::WindowTooShort { window: 1, min: 2 }));
    }

    #[test]
    fn tracker_matches_batch() {
        let phases: Vec<f64> = (0..300).map(|n| wrap_to_pi(0.3 + 2.5 * (n as f64 * 0.07).sin()).0).collect();
        let batch = displacement_from_phases(&phases, F0);
        let mut tracker = PhaseTracker::new(F0);
        for (p, expected) in phases.iter().zip(&batch.values_m) {
            let got = tracker.push(Complex::from_polar(2.0, *p));
            assert!((got - expected).abs() < 1e-12);
        }
        assert_eq!(tracker.corrections(), batch.unwrap_corrections);
        tracker.reset();
        assert_eq!(tracker.push(Complex::new(0.0, 1.0)), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let t = displacement_from_phases(&[0.0f32, -1.2062], 5.755e9f32);
        assert!((t.values_m[1] - 0.005).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn wrap_then_unwrap_recovers_path(start in -10.0f64..10.0, steps in prop::collection::vec(-3.1f64..3.1, 1..200)) {
            let mut path = vec![start];
            for s in &steps {
                let last = *path.last().unwrap();
                path.push(last + s);
            }
            let wrapped: Vec<f64> = path.iter().map(|&p| wrap_to_pi(p).0).collect();
            let u = unwrap(&wrapped);
            let k = path[0] - u[0];
            prop_assert!((k / (2.0 * PI) - (k / (2.0 * PI)).round()).abs() < 1e-9);
            for (a, b) in u.iter().zip(&path) {
                prop_assert!((a + k - b).abs() < 1e-9);
            }
        }

        #[test]
        fn displacement_is_linear(alpha in -3.0f64..3.0, steps in prop::collection::vec(-0.3f64..0.3, 2..50)) {
            let mut path = vec![0.0];
            for s in &steps {
                let last = *path.last().unwrap();
                path.push(last + s);
            }
            let scaled: Vec<f64> = path.iter().map(|p| alpha * p).collect();
            let a = displacement_from_phases(&path, F0);
            let b = displacement_from_phases(&scaled, F0);
            for (x, y) in a.values_m.iter().zip(&b.values_m) {
                prop_assert!((alpha * x - y).abs() < 1e-12);
            }
        }
    }
}
