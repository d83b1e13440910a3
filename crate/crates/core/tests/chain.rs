//! Scene, correlator and slow-time stages run together.

use pulse_radar_core::scene::{ChannelSpec, MotionProgram, SceneRenderer, SceneSpec, Step, TargetSpec, DEFAULT_WINDOW_LEN};
use pulse_radar_core::slowtime::{displacement, peak_to_peak, vibration_spectrum, BinSeries, SpectrumOptions};
use pulse_radar_core::waveform::{ChirpParams, FULL_SCALE};
use pulse_radar_core::xcorr::{cross_correlate, DcEstimate, EngineConfig, RangeCompressor};
use pulse_radar_core::SPEED_OF_LIGHT;
use pulse_radar_oracle::{analytic_psf, sampled_sine_peak_to_peak};
use std::f64::consts::PI;

const PRF: f64 = 100.0;
const HEADROOM: f64 = 0.9;

fn renderer() -> SceneRenderer {
    SceneRenderer::new(ChirpParams::default(), DEFAULT_WINDOW_LEN, PRF, HEADROOM).unwrap()
}

fn range_for_delay(samples: f64) -> f64 {
    samples / 120e6 * SPEED_OF_LIGHT / 2.0
}

fn scene(target: TargetSpec, snr_db: Option<f64>, seed: u64) -> SceneSpec {
    SceneSpec { targets: vec![target], channel: ChannelSpec { snr_db, noise_seed: seed, rx1_noise_db: None } }
}

/// Offset (in samples) where the analytic envelope falls to -3 dB.
fn half_power_offset(p: &ChirpParams) -> f64 {
    let level = |x: f64| analytic_psf(x / p.sample_rate_hz, p.bandwidth_hz, p.duration_s, 0.0).norm() / (p.duration_s);
    let (mut lo, mut hi) = (0.0, 3.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if level(mid) > std::f64::consts::FRAC_1_SQRT_2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn envelope_matches_analytic_shape_at_half_power() {
    let p = ChirpParams::default();
    let r = renderer();
    let x3 = half_power_offset(&p);
    assert!(x3 > 1.0 && x3 < 2.0, "half-power offset {x3}");
    let amplitude = 0.8;
    // Scale of a unit-offset echo: codes² per second of overlap.
    let scale = amplitude * (HEADROOM * FULL_SCALE).powi(2) * p.sample_rate_hz;
    let cfg = EngineConfig::default();
    let mut worst = 0.0f64;
    for (m, delay) in [(300usize, 300.0 + x3), (300, 300.0 - x3), (1200, 1200.0), (1200, 1200.0 + 0.5)] {
        let target = TargetSpec::fixed(range_for_delay(delay), amplitude);
        let pair = r.render_pulse(&scene(target, None, 0), 0).unwrap();
        let lags = cross_correlate(&cfg, &pair.rx1, &pair.rx2, DcEstimate::ZERO, DcEstimate::ZERO).unwrap();
        for (lag, value) in lags.iter().enumerate().take(m + 3).skip(m - 2) {
            let offset_s = (lag as f64 - delay) / p.sample_rate_hz;
            let expected = scale * analytic_psf(offset_s, p.bandwidth_hz, p.duration_s, 0.0).norm();
            let measured = (value.re as f64).hypot(value.im as f64);
            let err = (measured - expected).abs() / expected;
            let at_half_power = ((lag as f64 - delay).abs() - x3).abs() < 1e-9;
            if at_half_power || lag == m {
                worst = worst.max(err);
                assert!(err < 0.02, "delay {delay} lag {lag}: measured {measured:.4e} expected {expected:.4e}");
            }
        }
    }
    println!("worst envelope error at -3 dB points and peaks: {:.3} %", worst * 100.0);
}

#[test]
fn static_target_phase_is_stable_at_25_db() {
    let r = renderer();
    let sc = scene(TargetSpec::fixed(30.0, 0.5), Some(25.0), 17);
    let mut comp = RangeCompressor::new(EngineConfig::default()).unwrap();
    let phases: Vec<f64> = (0..300)
        .map(|n| {
            let pair = r.render_pulse(&sc, n).unwrap();
            let lag = comp.compress_lags(&pair.rx1, &pair.rx2, 24..25).unwrap()[0];
            (lag.im as f64).atan2(lag.re as f64)
        })
        .collect();
    let mean = phases.iter().sum::<f64>() / phases.len() as f64;
    let std = (phases.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / phases.len() as f64).sqrt();
    let spread = phases.iter().copied().fold(f64::NEG_INFINITY, f64::max) - phases.iter().copied().fold(f64::INFINITY, f64::min);
    println!("static phase at 25 dB: std {:.3} mrad, spread {:.3} mrad", std * 1e3, spread * 1e3);
    assert!(std < 5e-3);
}

#[test]
fn phase_law_survives_quantization() {
    let r = renderer();
    let lambda = SPEED_OF_LIGHT / 5.755e9;
    let cfg = EngineConfig::default();
    let mut worst = 0.0f64;
    for k in 1..=7 {
        let step = k as f64 * lambda / 16.0;
        let target = TargetSpec {
            range0_m: 30.0,
            amplitude: 1.0,
            motion: MotionProgram::StepSchedule { steps: vec![Step { pulse_index: 1, offset_m: step }], ramp_pulses: 0 },
        };
        let sc = scene(target, None, 0);
        let phase = |n| {
            let pair = r.render_pulse(&sc, n).unwrap();
            let lag = cross_correlate(&cfg, &pair.rx1, &pair.rx2, DcEstimate::ZERO, DcEstimate::ZERO).unwrap()[24];
            (lag.im as f64).atan2(lag.re as f64)
        };
        let measured = phase(1) - phase(0);
        let expected = -4.0 * PI * 5.755e9 * step / SPEED_OF_LIGHT;
        let err = (measured - expected + PI).rem_euclid(2.0 * PI) - PI;
        worst = worst.max(err.abs());
    }
    println!("phase law after quantization: worst error {:.4} mrad", worst * 1e3);
    assert!(worst < 5e-3);
}

#[test]
fn vibration_is_recovered_end_to_end() {
    let r = renderer();
    let (freq, peak) = (12.0, 5e-3);
    let target = TargetSpec {
        range0_m: 30.0,
        amplitude: 0.5,
        motion: MotionProgram::Sinusoid { freq_hz: freq, peak_amp_m: peak, phase_rad: 0.0 },
    };
    let sc = scene(target, None, 0);
    let mut comp = RangeCompressor::new(EngineConfig::default()).unwrap().with_parallelism(true);
    let mut profiles = Vec::new();
    let mut truth = Vec::new();
    for n in 0..256 {
        let pair = r.render_pulse(&sc, n).unwrap();
        truth.push(pair.truth[0].delta_r_m);
        profiles.push(comp.compress_pair(&pair).unwrap());
    }
    assert_eq!(profiles[0].peak_bin(), Some(24));
    let series = BinSeries::from_profiles(&profiles, 24, PRF).unwrap();
    let trace = displacement(&series, 5.755e9);
    let worst = trace
        .values_m
        .iter()
        .zip(&truth)
        .map(|(d, t)| (d - (t - truth[0])).abs())
        .fold(0.0, f64::max);
    println!("worst displacement error {:.4} mm", worst * 1e3);
    assert!(worst < 0.05e-3);
    let p2p = peak_to_peak(&trace, 256).unwrap();
    let expected = sampled_sine_peak_to_peak(freq, peak, 0.0, PRF, 0, 256);
    assert!((p2p - expected).abs() < 0.1e-3, "p2p {p2p} expected {expected}");
    assert!((p2p - 10e-3).abs() < 0.1e-3);
    let spectrum = vibration_spectrum(&series, 256, SpectrumOptions::default()).unwrap();
    assert_eq!(spectrum.peak_index(), Some(31));
    assert!((spectrum.peak().unwrap().freq_hz - 12.109375).abs() < 1e-12);
}
