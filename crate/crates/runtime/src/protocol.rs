//! Wire protocol between the runtime and its clients.
//!
//! Every WebSocket text message is one JSON object. Clients send
//! [`ControlMessage`]s; the server sends [`ServerMessage`]s tagged by `type`.
//! Each PRI produces one `frame` text message and one binary message holding
//! the decimated magnitude profile of the same pulse:
//!
//! ```text
//! offset  size       field
//! 0       4          magic "PRPF"
//! 4       2          u16 schema version
//! 6       2          u16 decimation stride
//! 8       8          u64 pulse index
//! 16      4          u32 lags before decimation
//! 20      4          u32 value count n
//! 24      4 * n      u32 magnitudes, max over each group of `stride` lags
//! ```
//!
//! All integers are little-endian. Frames are never dropped; binary profiles
//! are latest-wins and may skip pulses when a client falls behind.

use num_complex::Complex;
use pulse_radar_core::scene::{MotionProgram, TargetTruth};
use pulse_radar_core::slowtime::{AxisMode, VibrationSpectrum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u16 = 1;
pub const PROFILE_MAGIC: [u8; 4] = *b"PRPF";
pub const PROFILE_HEADER_LEN: usize = 24;

/// Operator commands. They take effect at the next PRI boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum ControlIn {
    SelectBin { bin: usize },
    SetPackSize { pack_size: usize },
    SetMotion { target: usize, motion: MotionProgram },
    /// `null` switches the echo noise off.
    SetSnr { snr_db: Option<f64> },
    Start,
    Stop,
    SetAxisMode { mode: AxisMode },
}

impl ControlIn {
    pub fn name(&self) -> &'static str {
        match self {
            ControlIn::SelectBin { .. } => "select_bin",
            ControlIn::SetPackSize { .. } => "set_pack_size",
            ControlIn::SetMotion { .. } => "set_motion",
            ControlIn::SetSnr { .. } => "set_snr",
            ControlIn::Start => "start",
            ControlIn::Stop => "stop",
            ControlIn::SetAxisMode { .. } => "set_axis_mode",
        }
    }
}

/// A command plus an optional client-chosen id echoed in the reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub command: ControlIn,
}

impl ControlMessage {
    pub fn parse(text: &str) -> Result<Self, CommandError> {
        serde_json::from_str(text).map_err(|e| CommandError::new(ErrorCode::Malformed, e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    InvalidArgument,
    UnknownTarget,
    OutsideWindow,
    TooManyClients,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{code:?}: {message}")]
pub struct CommandError {
    pub code: ErrorCode,
    pub message: String,
}

impl CommandError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidArgument, message)
    }
}

/// Sent once when a client connects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub schema_version: u16,
    pub n_lags: usize,
    pub range_bin_m: f64,
    pub profile_stride: usize,
    pub prf_hz: f64,
    pub pack_size: usize,
    pub axis_mode: AxisMode,
    pub selected_bin: Option<usize>,
    pub running: bool,
    pub next_pulse: u64,
}

/// Microseconds since the stream started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Timestamps {
    /// Nominal start of the PRI, `pulse_index * PRI` after the first tick.
    pub scheduled_us: u64,
    /// When processing of the PRI started.
    pub started_us: u64,
    /// When the frame was handed to the clients.
    pub emitted_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOut {
    /// Last pulse of the pack.
    pub pulse_index: u64,
    pub pack_size: usize,
    pub resolution_hz: f64,
    pub axis_mode: AxisMode,
    pub axis: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl SpectrumOut {
    pub fn new(pulse_index: u64, s: &VibrationSpectrum<f64>) -> Self {
        Self {
            pulse_index,
            pack_size: s.pack_size,
            resolution_hz: s.resolution_hz,
            axis_mode: s.axis_mode,
            axis: s.bins.iter().map(|b| b.axis_value).collect(),
            magnitude: s.magnitudes(),
        }
    }
}

/// Per-PRI output for the selected bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOut {
    pub schema_version: u16,
    pub pulse_index: u64,
    pub bin_index: usize,
    /// Raw correlator output `[re, im]` of the selected lag.
    pub bin_sample: [i64; 2],
    pub displacement_m: f64,
    /// Mean over the averaging window, once it has filled.
    pub mean_displacement_m: Option<f64>,
    pub peak_bin: Option<usize>,
    /// Stride of the binary profile sent alongside.
    pub profile_stride: usize,
    pub spectrum: Option<SpectrumOut>,
    pub truth: Vec<TargetTruth>,
    pub saturated: usize,
    pub timestamps: Timestamps,
}

impl FrameOut {
    pub fn bin_sample(&self) -> Complex<i64> {
        Complex::new(self.bin_sample[0], self.bin_sample[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(Hello),
    Frame(Box<FrameOut>),
    /// The command was applied; `pulse_index` is the first pulse it affects.
    Ack { id: Option<u64>, cmd: String, pulse_index: u64 },
    Error { id: Option<u64>, code: ErrorCode, message: String },
}

impl ServerMessage {
    pub fn error(id: Option<u64>, err: CommandError) -> Self {
        ServerMessage::Error { id, code: err.code, message: err.message }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Peak-preserving max-decimation of a magnitude profile.
pub fn decimate(magnitude: &[u64], stride: usize) -> Vec<u32> {
    magnitude
        .chunks(stride.max(1))
        .map(|c| c.iter().copied().max().map_or(0, |m| u32::try_from(m).unwrap_or(u32::MAX)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecimatedProfile {
    pub pulse_index: u64,
    pub stride: u16,
    pub full_len: u32,
    pub values: Vec<u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileDecodeError {
    #[error("profile frame of {0} bytes is shorter than its header")]
    Short(usize),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported schema version {0}")]
    Version(u16),
    #[error("header announces {announced} values, payload holds {bytes} bytes")]
    Length { announced: u32, bytes: usize },
}

impl DecimatedProfile {
    pub fn new(pulse_index: u64, magnitude: &[u64], stride: usize) -> Self {
        Self {
            pulse_index,
            stride: stride as u16,
            full_len: magnitude.len() as u32,
            values: decimate(magnitude, stride),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PROFILE_HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(&PROFILE_MAGIC);
        out.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
        out.extend_from_slice(&self.stride.to_le_bytes());
        out.extend_from_slice(&self.pulse_index.to_le_bytes());
        out.extend_from_slice(&self.full_len.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProfileDecodeError> {
        if bytes.len() < PROFILE_HEADER_LEN {
            return Err(ProfileDecodeError::Short(bytes.len()));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != PROFILE_MAGIC {
            return Err(ProfileDecodeError::BadMagic(magic));
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != SCHEMA_VERSION {
            return Err(ProfileDecodeError::Version(version));
        }
        let count = u32_at(20);
        let payload = &bytes[PROFILE_HEADER_LEN..];
        if payload.len() != 4 * count as usize {
            return Err(ProfileDecodeError::Length { announced: count, bytes: payload.len() });
        }
        Ok(Self {
            pulse_index: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            stride: u16_at(6),
            full_len: u32_at(16),
            values: payload.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect(),
        })
    }
}
