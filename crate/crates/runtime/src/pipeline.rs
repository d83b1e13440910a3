//! Per-PRI processing: render, correlate, then slow-time analysis of the
//! selected bin. The DC feedback, phase tracker and pack accumulator all live
//! in one [`Processor`], which sees pulses strictly in order.

use num_complex::Complex;
use pulse_radar_core::scene::{delay_of, MotionProgram, PulsePair, SceneError, SceneRenderer, SceneSpec, TargetTruth};
use pulse_radar_core::slowtime::{
    lag_to_complex, AxisMode, PackAccumulator, PhaseTracker, SpectrumOptions, VibrationSpectrum, Waterfall,
};
use pulse_radar_core::xcorr::{RangeCompressor, RangeProfile, XcorrError};
use std::collections::VecDeque;
use thiserror::Error;

use crate::config::{check_pack_size, SystemConfig};
use crate::protocol::{CommandError, ControlIn, DecimatedProfile, ErrorCode, FrameOut, SpectrumOut, Timestamps, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Xcorr(#[from] XcorrError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Result of processing one PRI.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseResult {
    pub profile: RangeProfile,
    pub bin_index: usize,
    pub bin_sample: Complex<i64>,
    /// Displacement since the bin was selected.
    pub displacement_m: f64,
    pub mean_displacement_m: Option<f64>,
    pub spectrum: Option<VibrationSpectrum<f64>>,
    pub truth: Vec<TargetTruth>,
    pub saturated: usize,
}

impl PulseResult {
    pub fn frame(&self, stride: usize, timestamps: Timestamps) -> (FrameOut, DecimatedProfile) {
        let pulse_index = self.profile.pulse_index;
        let frame = FrameOut {
            schema_version: SCHEMA_VERSION,
            pulse_index,
            bin_index: self.bin_index,
            bin_sample: [self.bin_sample.re, self.bin_sample.im],
            displacement_m: self.displacement_m,
            mean_displacement_m: self.mean_displacement_m,
            peak_bin: self.profile.peak_bin(),
            profile_stride: stride,
            spectrum: self.spectrum.as_ref().map(|s| SpectrumOut::new(pulse_index, s)),
            truth: self.truth.clone(),
            saturated: self.saturated,
            timestamps,
        };
        (frame, DecimatedProfile::new(pulse_index, &self.profile.magnitude, stride))
    }
}

/// Range compression plus slow-time state for one pulse stream.
#[derive(Debug)]
pub struct Processor {
    compressor: RangeCompressor,
    selected_bin: Option<usize>,
    tracker: PhaseTracker<f64>,
    pack: PackAccumulator<f64>,
    waterfall: Waterfall<f64>,
    recent: VecDeque<f64>,
    avg_window: usize,
    n_lags: usize,
}

impl Processor {
    pub fn new(cfg: &SystemConfig) -> Result<Self, PipelineError> {
        let compressor = RangeCompressor::new(cfg.engine)?.with_parallelism(cfg.parallel);
        let opts = SpectrumOptions {
            axis: cfg.axis,
            window: cfg.window,
            input: cfg.spectrum_input,
            carrier_hz: cfg.chirp.carrier_hz,
        };
        let slow = |e: pulse_radar_core::slowtime::SlowTimeError| PipelineError::Config(e.to_string());
        Ok(Self {
            compressor,
            selected_bin: cfg.selected_bin,
            tracker: PhaseTracker::new(cfg.chirp.carrier_hz),
            pack: PackAccumulator::new(cfg.pack_size, cfg.prf_hz, opts).map_err(slow)?,
            waterfall: Waterfall::new(cfg.waterfall_capacity).map_err(slow)?,
            recent: VecDeque::with_capacity(cfg.avg_window),
            avg_window: cfg.avg_window,
            n_lags: cfg.engine.n_lags(),
        })
    }

    pub fn selected_bin(&self) -> Option<usize> {
        self.selected_bin
    }

    pub fn pack_size(&self) -> usize {
        self.pack.pack_size()
    }

    pub fn axis(&self) -> AxisMode {
        self.pack.axis()
    }

    pub fn waterfall(&self) -> &Waterfall<f64> {
        &self.waterfall
    }

    pub fn process(&mut self, pair: &PulsePair) -> Result<PulseResult, PipelineError> {
        let profile = self.compressor.compress_pair(pair)?;
        let bin_index = match self.selected_bin {
            Some(b) => b,
            None => {
                let b = profile.peak_bin().unwrap_or(0);
                log::info!("pulse {}: monitoring peak bin {b}", pair.pulse_index);
                self.selected_bin = Some(b);
                b
            }
        };
        let bin_sample = profile.lags[bin_index];
        let displacement_m = self.tracker.push(lag_to_complex(bin_sample));
        if self.recent.len() == self.avg_window {
            self.recent.pop_front();
        }
        self.recent.push_back(displacement_m);
        let mean_displacement_m = (self.recent.len() == self.avg_window)
            .then(|| self.recent.iter().sum::<f64>() / self.avg_window as f64);
        let spectrum = self.pack.push(lag_to_complex(bin_sample));
        if let Some(s) = &spectrum {
            if self.waterfall.push(s).is_err() {
                self.waterfall.clear();
                self.waterfall.push(s).expect("empty waterfall accepts any row");
            }
        }
        Ok(PulseResult {
            profile,
            bin_index,
            bin_sample,
            displacement_m,
            mean_displacement_m,
            spectrum,
            truth: pair.truth.clone(),
            saturated: pair.saturated,
        })
    }

    /// Monitor another bin. Displacement restarts from zero and the pack
    /// and averaging window are emptied.
    pub fn select_bin(&mut self, bin: usize) -> Result<(), CommandError> {
        if bin >= self.n_lags {
            return Err(CommandError::invalid(format!("bin {bin} outside 0..{}", self.n_lags)));
        }
        self.selected_bin = Some(bin);
        self.reset_slow_time();
        self.waterfall.clear();
        Ok(())
    }

    pub fn set_pack_size(&mut self, pack_size: usize) -> Result<(), CommandError> {
        check_pack_size(pack_size).map_err(CommandError::invalid)?;
        self.pack.set_pack_size(pack_size).map_err(|e| CommandError::invalid(e.to_string()))?;
        self.waterfall.clear();
        Ok(())
    }

    pub fn set_axis(&mut self, axis: AxisMode) {
        self.pack.set_axis(axis);
    }

    pub fn reset_slow_time(&mut self) {
        self.tracker.reset();
        self.pack.reset();
        self.recent.clear();
    }

    /// Discard the partial pack.
    pub fn reset_pack(&mut self) {
        self.pack.reset();
    }
}

fn warn_if_aliased(target: usize, motion: &MotionProgram, prf_hz: f64) {
    if motion.aliases_at(prf_hz) {
        log::warn!("target {target}: vibration at or above PRF/2 ({} Hz) will alias", prf_hz / 2.0);
    }
}

/// Simulated front end feeding a [`Processor`].
#[derive(Debug)]
pub struct Pipeline {
    renderer: SceneRenderer,
    scene: SceneSpec,
    processor: Processor,
    next_pulse: u64,
    running: bool,
}

impl Pipeline {
    pub fn new(cfg: &SystemConfig) -> Result<Self, PipelineError> {
        cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let renderer = SceneRenderer::new(cfg.chirp, cfg.engine.window_len, cfg.prf_hz, cfg.headroom)?;
        // Reject a scene that does not fit before the first pulse.
        renderer.render_rx2_float(&cfg.scene.targets, 0)?;
        for (id, t) in cfg.scene.targets.iter().enumerate() {
            warn_if_aliased(id, &t.motion, cfg.prf_hz);
        }
        Ok(Self {
            renderer,
            scene: cfg.scene.clone(),
            processor: Processor::new(cfg)?,
            next_pulse: 0,
            running: cfg.autostart,
        })
    }

    pub fn next_pulse(&self) -> u64 {
        self.next_pulse
    }

    pub fn running(&self) -> bool {
        self.running
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    pub fn processor(&self) -> &Processor {
        &self.processor
    }

    pub fn render(&self, pulse_index: u64) -> Result<PulsePair, PipelineError> {
        Ok(self.renderer.render_pulse(&self.scene, pulse_index)?)
    }

    /// Render and process the next pulse.
    pub fn step(&mut self) -> Result<(PulsePair, PulseResult), PipelineError> {
        let pair = self.render(self.next_pulse)?;
        let result = self.processor.process(&pair)?;
        self.next_pulse += 1;
        Ok((pair, result))
    }

    /// Apply a command between pulses. Rejected commands leave the state
    /// untouched.
    pub fn apply(&mut self, cmd: &ControlIn) -> Result<(), CommandError> {
        match cmd {
            ControlIn::SelectBin { bin } => self.processor.select_bin(*bin),
            ControlIn::SetPackSize { pack_size } => self.processor.set_pack_size(*pack_size),
            ControlIn::SetMotion { target, motion } => {
                let Some(spec) = self.scene.targets.get(*target) else {
                    return Err(CommandError::new(
                        ErrorCode::UnknownTarget,
                        format!("no target {target}; scene has {}", self.scene.targets.len()),
                    ));
                };
                let mut updated = spec.clone();
                updated.motion = motion.clone();
                updated.validate(f64::INFINITY).map_err(CommandError::invalid)?;
                let delay = delay_of(&updated, self.next_pulse, self.renderer.prf_hz());
                let samples = delay * self.renderer.params().sample_rate_hz;
                if !(samples >= 0.0 && samples <= self.renderer.max_delay_samples() as f64) {
                    return Err(CommandError::new(
                        ErrorCode::OutsideWindow,
                        format!("target {target} would sit at {samples:.2} samples, outside the receive window"),
                    ));
                }
                warn_if_aliased(*target, &updated.motion, self.renderer.prf_hz());
                self.scene.targets[*target] = updated;
                Ok(())
            }
            ControlIn::SetSnr { snr_db } => {
                if snr_db.is_some_and(|db| !db.is_finite()) {
                    return Err(CommandError::invalid("snr_db must be finite or null"));
                }
                self.scene.channel.snr_db = *snr_db;
                Ok(())
            }
            ControlIn::Start => {
                if !self.running {
                    self.running = true;
                    self.processor.reset_pack();
                }
                Ok(())
            }
            ControlIn::Stop => {
                self.running = false;
                Ok(())
            }
            ControlIn::SetAxisMode { mode } => {
                self.processor.set_axis(*mode);
                Ok(())
            }
        }
    }

    /// Stop after a rendering failure, e.g. a target that drifted out of the window.
    pub fn halt(&mut self) {
        self.running = false;
    }
}
