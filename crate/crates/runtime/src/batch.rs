//! Offline runs: simulate N pulses into a recording plus derived outputs, or
//! replay a recording through the same processing.
//!
//! An output directory holds:
//!
//! * `recording.prrx`: raw receive memories (see [`crate::recording`]).
//! * `profiles.bin`: "PRPL", u16 version, then per pulse u64 pulse index,
//!   u32 lag count and that many (i64 re, i64 im) correlator outputs,
//!   little-endian.
//! * `trace.csv`: one row per pulse for the monitored bin.
//! * `spectra.csv`: one row per spectrum bin of every completed pack.
//! * `summary.json`: [`BatchSummary`].
//!
//! Everything except the recording is a function of the recording alone, so
//! `replay` rewrites these files byte for byte.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

use crate::config::SystemConfig;
use crate::pipeline::{Pipeline, PipelineError, Processor, PulseResult};
use crate::recording::{RecordingError, RecordingHeader, RecordingReader, RecordingWriter};

pub const RECORDING_FILE: &str = "recording.prrx";
pub const PROFILES_FILE: &str = "profiles.bin";
pub const TRACE_FILE: &str = "trace.csv";
pub const SPECTRA_FILE: &str = "spectra.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const PROFILES_MAGIC: [u8; 4] = *b"PRPL";
pub const PROFILES_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> BatchError {
    let context = context.into();
    move |source| BatchError::Io { context, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub pulses: u64,
    pub selected_bin: Option<usize>,
    pub first_peak_bin: Option<usize>,
    pub spectra: u64,
    /// Strongest bin of the last completed spectrum.
    pub last_spectrum_peak_bin: Option<usize>,
    pub last_spectrum_peak_hz: Option<f64>,
    pub final_displacement_m: Option<f64>,
    /// Mean over the last `avg_window` pulses.
    pub mean_displacement_m: Option<f64>,
    /// Peak-to-peak displacement over the last pack (or the whole run if shorter).
    pub peak_to_peak_m: Option<f64>,
    pub saturated: u64,
}

struct Outputs {
    dir: Option<std::path::PathBuf>,
    profiles: Box<dyn Write>,
    trace: Box<dyn Write>,
    spectra: Box<dyn Write>,
    n_truth: usize,
    summary: BatchSummary,
    history: Vec<f64>,
    pack_size: usize,
}

impl Outputs {
    /// Writers for `dir`; with `None` everything is computed and discarded.
    fn create(dir: Option<&Path>, n_truth: usize, pack_size: usize) -> Result<Self, BatchError> {
        if let Some(dir) = dir {
            std::fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
        }
        let open = |name: &str| -> Result<Box<dyn Write>, BatchError> {
            match dir {
                Some(dir) => Ok(Box::new(BufWriter::new(
                    File::create(dir.join(name)).map_err(io_err(format!("creating {name}")))?,
                ))),
                None => Ok(Box::new(io::sink())),
            }
        };
        let mut out = Self {
            dir: dir.map(Path::to_path_buf),
            profiles: open(PROFILES_FILE)?,
            trace: open(TRACE_FILE)?,
            spectra: open(SPECTRA_FILE)?,
            n_truth,
            summary: BatchSummary {
                pulses: 0,
                selected_bin: None,
                first_peak_bin: None,
                spectra: 0,
                last_spectrum_peak_bin: None,
                last_spectrum_peak_hz: None,
                final_displacement_m: None,
                mean_displacement_m: None,
                peak_to_peak_m: None,
                saturated: 0,
            },
            history: Vec::new(),
            pack_size,
        };
        out.write_headers().map_err(io_err("writing headers"))?;
        Ok(out)
    }

    fn write_headers(&mut self) -> io::Result<()> {
        self.profiles.write_all(&PROFILES_MAGIC)?;
        self.profiles.write_all(&PROFILES_VERSION.to_le_bytes())?;
        write!(self.trace, "pulse_index,bin,re,im,displacement_m,mean_displacement_m")?;
        for t in 0..self.n_truth {
            write!(self.trace, ",truth_{t}_m")?;
        }
        writeln!(self.trace)?;
        writeln!(self.spectra, "pulse_index,bin,freq_hz,axis_value,magnitude")
    }

    fn push(&mut self, r: &PulseResult) -> io::Result<()> {
        let p = &r.profile;
        self.profiles.write_all(&p.pulse_index.to_le_bytes())?;
        self.profiles.write_all(&(p.lags.len() as u32).to_le_bytes())?;
        for l in &p.lags {
            self.profiles.write_all(&l.re.to_le_bytes())?;
            self.profiles.write_all(&l.im.to_le_bytes())?;
        }
        write!(self.trace, "{},{},{},{},{},", p.pulse_index, r.bin_index, r.bin_sample.re, r.bin_sample.im, r.displacement_m)?;
        if let Some(m) = r.mean_displacement_m {
            write!(self.trace, "{m}")?;
        }
        for t in &r.truth {
            write!(self.trace, ",{}", t.delta_r_m)?;
        }
        writeln!(self.trace)?;
        if let Some(s) = &r.spectrum {
            for (k, b) in s.bins.iter().enumerate() {
                writeln!(self.spectra, "{},{k},{},{},{}", p.pulse_index, b.freq_hz, b.axis_value, b.magnitude)?;
            }
            self.summary.spectra += 1;
            self.summary.last_spectrum_peak_bin = s.peak_index();
            self.summary.last_spectrum_peak_hz = s.peak().map(|b| b.freq_hz);
        }
        let sm = &mut self.summary;
        if sm.pulses == 0 {
            sm.first_peak_bin = p.peak_bin();
        }
        if sm.selected_bin != Some(r.bin_index) {
            self.history.clear();
        }
        sm.pulses += 1;
        sm.selected_bin = Some(r.bin_index);
        sm.final_displacement_m = Some(r.displacement_m);
        sm.mean_displacement_m = r.mean_displacement_m;
        sm.saturated += r.saturated as u64;
        self.history.push(r.displacement_m);
        Ok(())
    }

    fn finish(mut self) -> Result<BatchSummary, BatchError> {
        let tail = &self.history[self.history.len().saturating_sub(self.pack_size)..];
        if tail.len() >= 2 {
            let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
            self.summary.peak_to_peak_m = Some(max - min);
        }
        for (w, name) in [(&mut self.profiles, PROFILES_FILE), (&mut self.trace, TRACE_FILE), (&mut self.spectra, SPECTRA_FILE)] {
            w.flush().map_err(io_err(format!("writing {name}")))?;
        }
        if let Some(dir) = &self.dir {
            let json = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
            std::fs::write(dir.join(SUMMARY_FILE), json + "\n").map_err(io_err(format!("writing {SUMMARY_FILE}")))?;
        }
        Ok(self.summary)
    }
}

/// Simulate `n_pulses` PRIs and write all outputs to `out_dir`.
pub fn run_batch(cfg: &SystemConfig, n_pulses: u64, out_dir: &Path) -> Result<BatchSummary, BatchError> {
    let mut pipeline = Pipeline::new(cfg)?;
    let mut outputs = Outputs::create(Some(out_dir), cfg.scene.targets.len(), cfg.pack_size)?;
    let file = File::create(out_dir.join(RECORDING_FILE)).map_err(io_err(format!("creating {RECORDING_FILE}")))?;
    let mut recording = RecordingWriter::new(BufWriter::new(file), &RecordingHeader::new(cfg))?;
    for _ in 0..n_pulses {
        let (pair, result) = pipeline.step()?;
        recording.write(&pair)?;
        outputs.push(&result).map_err(io_err("writing outputs"))?;
    }
    recording.finish()?;
    let summary = outputs.finish()?;
    log::info!("simulated {n_pulses} pulses into {}", out_dir.display());
    Ok(summary)
}

/// Re-run the processing stored in a recording. With `out_dir` the derived
/// files are rewritten there; without it only the summary is computed.
pub fn replay(recording: &Path, out_dir: Option<&Path>) -> Result<BatchSummary, BatchError> {
    let file = File::open(recording).map_err(io_err(format!("opening {}", recording.display())))?;
    let mut reader = RecordingReader::new(BufReader::new(file))?;
    let cfg = reader.header().config.clone();
    let mut processor = Processor::new(&cfg)?;
    let mut outputs = Outputs::create(out_dir, reader.header().scene.targets.len(), cfg.pack_size)?;
    while let Some(pair) = reader.next_pair()? {
        let result = processor.process(&pair)?;
        outputs.push(&result).map_err(io_err("writing outputs"))?;
    }
    outputs.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pulse_radar_core::scene::{ChannelSpec, MotionProgram, SceneSpec, TargetSpec};

    fn cfg() -> SystemConfig {
        SystemConfig {
            scene: SceneSpec {
                targets: vec![TargetSpec {
                    range0_m: 30.0,
                    amplitude: 0.5,
                    motion: MotionProgram::Sinusoid { freq_hz: 12.0, peak_amp_m: 1e-3, phase_rad: 0.0 },
                }],
                channel: ChannelSpec { snr_db: Some(20.0), noise_seed: 11, rx1_noise_db: None },
            },
            pack_size: 16,
            avg_window: 8,
            realtime: false,
            ..Default::default()
        }
    }

    #[test]
    fn zero_pulses_gives_empty_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_batch(&cfg(), 0, dir.path()).unwrap();
        assert_eq!(s.pulses, 0);
        assert_eq!(s.selected_bin, None);
        assert_eq!(std::fs::read(dir.path().join(PROFILES_FILE)).unwrap(), b"PRPL\x01\x00");
        let trace = std::fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
        assert_eq!(trace, "pulse_index,bin,re,im,displacement_m,mean_displacement_m,truth_0_m\n");
        let rec = RecordingReader::new(File::open(dir.path().join(RECORDING_FILE)).unwrap()).unwrap();
        assert_eq!(rec.count(), 0);
    }

    #[test]
    fn replay_rewrites_identical_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s = run_batch(&cfg(), 40, a.path()).unwrap();
        assert_eq!(s.pulses, 40);
        assert_eq!(s.selected_bin, Some(24));
        assert_eq!(s.spectra, 2);
        let r = replay(&a.path().join(RECORDING_FILE), Some(b.path())).unwrap();
        assert_eq!(r, s);
        for name in [PROFILES_FILE, TRACE_FILE, SPECTRA_FILE, SUMMARY_FILE] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert!(x == y, "{name} differs");
        }
        assert_eq!(replay(&a.path().join(RECORDING_FILE), None).unwrap(), s);
    }

    #[test]
    fn csv_shapes() {
        let dir = tempfile::tempdir().unwrap();
        run_batch(&cfg(), 17, dir.path()).unwrap();
        let trace = std::fs::read_to_string(dir.path().join(TRACE_FILE)).unwrap();
        let rows: Vec<&str> = trace.lines().collect();
        assert_eq!(rows.len(), 18);
        assert!(rows[1].starts_with("0,24,"));
        assert_eq!(rows[1].split(',').count(), 7);
        assert_eq!(rows[7].split(',').nth(5), Some(""));
        assert_ne!(rows[8].split(',').nth(5), Some(""));
        let spectra = std::fs::read_to_string(dir.path().join(SPECTRA_FILE)).unwrap();
        assert_eq!(spectra.lines().count(), 1 + 9);
        assert!(spectra.lines().nth(1).unwrap().starts_with("15,0,0,0,"));
        let profiles = std::fs::read(dir.path().join(PROFILES_FILE)).unwrap();
        assert_eq!(profiles.len(), 6 + 17 * (12 + 2688 * 16));
    }
}
