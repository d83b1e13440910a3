//! Floating-point reference implementations for the pulse-radar test suites.
//!
//! Everything here is deliberately naive: direct sums, dense DFTs, power
//! series. Nothing in this crate is fast and nothing in the streaming path
//! depends on it. The functions take plain `f64` / `Complex<f64>` inputs so
//! they stay independent of the engine's types.

use num_complex::Complex;
use std::f64::consts::PI;

pub type C64 = Complex<f64>;

/// Direct-sum cross-correlation, `out[m] = sum_k conj(rx1[k]) * rx2[k + m]`
/// for `m in 0..n_lags`.
///
/// Exact for integer-valued inputs as long as every partial sum stays below
/// 2^53.
pub fn float_xcorr(rx1: &[C64], rx2: &[C64], n_lags: usize) -> Vec<C64> {
    assert!(rx1.len() + n_lags <= rx2.len() + 1, "lags run past rx2");
    (0..n_lags)
        .map(|m| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, a) in rx1.iter().enumerate() {
                acc += a.conj() * rx2[k + m];
            }
            acc
        })
        .collect()
}

/// Same quantity computed as a linear convolution of the conjugated,
/// time-reversed reference with the echo, then re-indexed so that lag 0 is
/// the first full overlap.
pub fn float_xcorr_via_convolution(rx1: &[C64], rx2: &[C64], n_lags: usize) -> Vec<C64> {
    let k_len = rx1.len();
    let h: Vec<C64> = rx1.iter().rev().map(|x| x.conj()).collect();
    // y[n] = sum_j h[j] * rx2[n - j]; full overlap starts at n = k_len - 1.
    (0..n_lags)
        .map(|m| {
            let n = m + k_len - 1;
            let mut acc = C64::new(0.0, 0.0);
            for (j, hj) in h.iter().enumerate() {
                if n >= j && n - j < rx2.len() {
                    acc += hj * rx2[n - j];
                }
            }
            acc
        })
        .collect()
}

/// Dense O(N^2) forward DFT, `X[k] = sum_n x[n] exp(-j 2 pi k n / N)`.
pub fn dense_dft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, v)| {
                    // reduce k*i mod n first so the angle stays small
                    let idx = (k * i) % n;
                    let ang = -2.0 * PI * idx as f64 / n as f64;
                    v * C64::new(ang.cos(), ang.sin())
                })
                .sum()
        })
        .collect()
}

/// Closed-form autocorrelation of a continuous linear-FM envelope.
///
/// The envelope sweeps `bandwidth_hz` over `duration_s`, centred on
/// `center_hz`. Returns `R(offset) = integral conj(s(t)) s(t + offset) dt`,
/// which is `(tau - |d|) sinc(mu d (tau - |d|)) exp(j 2 pi f_c d)` with
/// `mu = B / tau`. Zero outside `|offset| <= tau`.
pub fn analytic_psf(offset_s: f64, bandwidth_hz: f64, duration_s: f64, center_hz: f64) -> C64 {
    let d = offset_s.abs();
    if d > duration_s {
        return C64::new(0.0, 0.0);
    }
    let overlap = duration_s - d;
    let mu = bandwidth_hz / duration_s;
    let x = mu * offset_s * overlap;
    let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
    let rot = 2.0 * PI * center_hz * offset_s;
    C64::new(rot.cos(), rot.sin()) * (overlap * sinc)
}

/// Bessel function of the first kind, integer order, by its power series.
/// Accurate to ~1e-15 for the small arguments used in the tests (|x| < 10).
pub fn bessel_j(order: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(order as i32);
    for i in 1..=order {
        term /= i as f64;
    }
    let mut sum = term;
    let q = -(half * half);
    for s in 1..200u32 {
        term *= q / (s as f64 * (s + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Relative line levels of `exp(j m sin(2 pi f t))`: `(k, |J_k(m)| / |J_1(m)|)`
/// for harmonics `k = 1..=5`, located at `k * f_vib`.
///
/// When `J_1(m)` is zero the absolute levels `|J_k(m)|` are returned instead.
pub fn pm_harmonics(mod_index: f64, f_vib_hz: f64) -> Vec<(f64, f64)> {
    assert!(mod_index >= 0.0, "modulation index must be non-negative");
    let j1 = bessel_j(1, mod_index).abs();
    let norm = if j1 > 0.0 { j1 } else { 1.0 };
    (1..=5u32)
        .map(|k| (k as f64 * f_vib_hz, bessel_j(k, mod_index).abs() / norm))
        .collect()
}

/// Extremes of a sinusoid sampled at `n / rate` for `n in start..start+len`.
/// Returns `max - min` of the samples.
pub fn sampled_sine_peak_to_peak(
    freq_hz: f64,
    peak: f64,
    phase_rad: f64,
    rate_hz: f64,
    start: u64,
    len: usize,
) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in start..start + len as u64 {
        let v = peak * (2.0 * PI * freq_hz * n as f64 / rate_hz + phase_rad).sin();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// Reference phase unwrap: integrate wrapped differences.
pub fn unwrap_reference(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let mut d = p - phases[i - 1];
            while d > PI {
                d -= 2.0 * PI;
                offset -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
    }
    out
}
