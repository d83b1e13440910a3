//! System configuration: waveform, engine, slow-time settings and the scene,
//! loaded from a JSON file.

use pulse_radar_core::scene::{ChannelSpec, MotionProgram, SceneSpec, TargetSpec, DEFAULT_WINDOW_LEN};
use pulse_radar_core::slowtime::{AxisMode, SpectrumInput, WindowKind};
use pulse_radar_core::waveform::{ChirpParams, WaveformError};
use pulse_radar_core::xcorr::{EngineConfig, XcorrError};
use pulse_radar_core::SPEED_OF_LIGHT;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Engine(#[from] XcorrError),
}

/// Everything needed to run the chain. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub chirp: ChirpParams,
    pub engine: EngineConfig,
    pub prf_hz: f64,
    /// Pulses per vibration spectrum. Must be a power of two.
    pub pack_size: usize,
    /// Pulses averaged for the displacement read-out.
    pub avg_window: usize,
    /// Fraction of full scale used by a unit-amplitude signal.
    pub headroom: f64,
    /// Scene description file, resolved relative to the config file. When
    /// set it replaces `scene`.
    pub scene_file: Option<PathBuf>,
    pub scene: SceneSpec,
    pub serve_addr: String,
    /// Pace pulses on the wall clock at `prf_hz`.
    pub realtime: bool,
    /// Start producing pulses as soon as the server is up.
    pub autostart: bool,
    /// Monitored range bin; `None` picks the peak of the first profile.
    pub selected_bin: Option<usize>,
    /// Decimation stride for the profile sent to clients.
    pub profile_stride: usize,
    pub waterfall_capacity: usize,
    pub axis: AxisMode,
    pub window: WindowKind,
    pub spectrum_input: SpectrumInput,
    /// Host processing time reserved inside each PRI, seconds.
    pub compute_budget_s: f64,
    /// Spread each correlation over all cores.
    pub parallel: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            chirp: ChirpParams::default(),
            engine: EngineConfig::default(),
            prf_hz: 100.0,
            pack_size: 256,
            avg_window: 128,
            headroom: 0.9,
            scene_file: None,
            scene: demo_scene(),
            serve_addr: "127.0.0.1:8640".into(),
            realtime: true,
            autostart: true,
            selected_bin: None,
            profile_stride: 4,
            waterfall_capacity: 100,
            axis: AxisMode::Frequency,
            window: WindowKind::Rectangular,
            spectrum_input: SpectrumInput::Complex,
            compute_budget_s: 5e-3,
            parallel: true,
        }
    }
}

/// A plate vibrating at 12 Hz, 30 m away, at 20 dB SNR.
pub fn demo_scene() -> SceneSpec {
    SceneSpec {
        targets: vec![TargetSpec {
            range0_m: 30.0,
            amplitude: 0.5,
            motion: MotionProgram::Sinusoid { freq_hz: 12.0, peak_amp_m: 1e-3, phase_rad: 0.0 },
        }],
        channel: ChannelSpec { snr_db: Some(20.0), noise_seed: 1, rx1_noise_db: None },
    }
}

impl SystemConfig {
    /// Parse a config file and pull in its scene file, if any.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut cfg: SystemConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        if let Some(scene_path) = &cfg.scene_file {
            let resolved = match path.parent() {
                Some(dir) if scene_path.is_relative() => dir.join(scene_path),
                _ => scene_path.clone(),
            };
            cfg.scene = load_scene(&resolved)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pri_s(&self) -> f64 {
        1.0 / self.prf_hz
    }

    /// Receive window duration in seconds.
    pub fn window_s(&self) -> f64 {
        self.engine.window_len as f64 / self.chirp.sample_rate_hz
    }

    /// Range spanned by one lag, `c / (2 fs)`.
    pub fn range_bin_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.chirp.sample_rate_hz)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.chirp.validate()?;
        self.engine.validate()?;
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.engine.taps != self.chirp.sample_count() {
            return invalid(format!(
                "engine.taps ({}) must equal the chirp length ({})",
                self.engine.taps,
                self.chirp.sample_count()
            ));
        }
        if !(self.prf_hz.is_finite() && self.prf_hz > 0.0) {
            return invalid(format!("prf_hz must be positive, got {}", self.prf_hz));
        }
        if !(self.compute_budget_s >= 0.0) {
            return invalid("compute_budget_s must be non-negative".into());
        }
        if self.pri_s() <= self.window_s() + self.compute_budget_s {
            return invalid(format!(
                "PRI of {:.6} s does not cover the {:.6} s window plus the {:.6} s compute budget",
                self.pri_s(),
                self.window_s(),
                self.compute_budget_s
            ));
        }
        check_pack_size(self.pack_size).map_err(ConfigError::Invalid)?;
        if self.avg_window == 0 {
            return invalid("avg_window must be at least 1".into());
        }
        if !(self.headroom > 0.0 && self.headroom <= 1.0) {
            return invalid(format!("headroom must be in (0, 1], got {}", self.headroom));
        }
        if self.profile_stride == 0 || self.profile_stride > u16::MAX as usize {
            return invalid("profile_stride must be in 1..=65535".into());
        }
        if self.waterfall_capacity == 0 {
            return invalid("waterfall_capacity must be at least 1".into());
        }
        if let Some(bin) = self.selected_bin {
            if bin >= self.engine.n_lags() {
                return invalid(format!("selected_bin {bin} outside 0..{}", self.engine.n_lags()));
            }
        }
        if self.engine.window_len != DEFAULT_WINDOW_LEN {
            log::info!("non-default receive window of {} samples", self.engine.window_len);
        }
        Ok(())
    }
}

/// Pack sizes are powers of two so every spectrum uses a radix-2 transform.
pub fn check_pack_size(n: usize) -> Result<(), String> {
    if n < 2 || !n.is_power_of_two() {
        return Err(format!("pack_size must be a power of two >= 2, got {n}"));
    }
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<SceneSpec, ConfigError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })
}
