//! Timing of one full range compression (all lags of one PRI).

use pulse_radar_core::scene::{ChannelSpec, SceneRenderer, SceneSpec, TargetSpec};
use pulse_radar_core::xcorr::RangeCompressor;
use serde::Serialize;
use std::fmt;
use std::time::Instant;

use crate::config::SystemConfig;
use crate::pipeline::PipelineError;

/// FPGA correlation time of the reference hardware, microseconds.
pub const FPGA_REFERENCE_US: f64 = 121.63;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50_us: f64,
    pub p90_us: f64,
    pub p99_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub taps: usize,
    pub lags: usize,
    pub parallel: bool,
    pub mean_us: f64,
    pub min_us: f64,
    pub max_us: f64,
    /// Absent for a single iteration.
    pub percentiles: Option<Percentiles>,
    pub pri_us: f64,
    pub fpga_reference_us: f64,
    pub within_budget: bool,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.parallel { "parallel" } else { "single thread" };
        writeln!(f, "range compression, {} taps x {} lags, {mode}, {} iterations", self.taps, self.lags, self.iterations)?;
        writeln!(f, "  mean   {:>10.2} us", self.mean_us)?;
        writeln!(f, "  min    {:>10.2} us", self.min_us)?;
        writeln!(f, "  max    {:>10.2} us", self.max_us)?;
        if let Some(p) = &self.percentiles {
            writeln!(f, "  p50    {:>10.2} us", p.p50_us)?;
            writeln!(f, "  p90    {:>10.2} us", p.p90_us)?;
            writeln!(f, "  p99    {:>10.2} us", p.p99_us)?;
        }
        writeln!(f, "  FPGA reference {:>10.2} us ({:.1}x)", self.fpga_reference_us, self.mean_us / self.fpga_reference_us)?;
        let verdict = if self.within_budget { "within" } else { "OVER" };
        write!(f, "  PRI budget     {:>10.2} us ({verdict})", self.pri_us)
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank]
}

/// Correlate a realistic noisy pulse `iterations` times.
pub fn bench_xcorr(cfg: &SystemConfig, iterations: usize, parallel: bool) -> Result<BenchReport, PipelineError> {
    let iterations = iterations.max(1);
    let renderer = SceneRenderer::new(cfg.chirp, cfg.engine.window_len, cfg.prf_hz, cfg.headroom)?;
    let scene = SceneSpec {
        targets: vec![TargetSpec::fixed(30.0, 0.5), TargetSpec::fixed(210.0, 0.2)],
        channel: ChannelSpec { snr_db: Some(13.0), noise_seed: 1, rx1_noise_db: None },
    };
    let pair = renderer.render_pulse(&scene, 0)?;
    let mut compressor = RangeCompressor::new(cfg.engine)?.with_parallelism(parallel);
    compressor.compress_pair(&pair)?;
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        let profile = compressor.compress_pair(&pair)?;
        samples.push(t.elapsed().as_secs_f64() * 1e6);
        std::hint::black_box(profile);
    }
    let mean_us = samples.iter().sum::<f64>() / iterations as f64;
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let pri_us = cfg.pri_s() * 1e6;
    Ok(BenchReport {
        iterations,
        taps: cfg.engine.taps,
        lags: cfg.engine.n_lags(),
        parallel,
        mean_us,
        min_us: sorted[0],
        max_us: sorted[iterations - 1],
        percentiles: (iterations > 1).then(|| Percentiles {
            p50_us: percentile(&sorted, 50.0),
            p90_us: percentile(&sorted, 90.0),
            p99_us: percentile(&sorted, 99.0),
        }),
        pri_us,
        fpga_reference_us: FPGA_REFERENCE_US,
        within_budget: mean_us < pri_us,
    })
}
