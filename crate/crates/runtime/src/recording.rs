//! Recording files: the raw receive memories of every PRI plus the
//! configuration they were produced with, enough to replay the processing
//! bit for bit.
//!
//! ```text
//! magic      4        "PRRX"
//! version    u16      1
//! header_len u32      length of the JSON header in bytes
//! header     JSON     {"config": SystemConfig, "scene": SceneSpec, "noise_prng": "chacha8"}
//! records    until end of file, each:
//!   record_len  u32   bytes that follow in this record
//!   pulse_index u64
//!   saturated   u32   components clipped during quantization
//!   n_truth     u16   then n_truth x f64 range offset (m), one per target
//!   n_rx1       u32   then n_rx1 x (i16 I, i16 Q)
//!   n_rx2       u32   then n_rx2 x (i16 I, i16 Q)
//! ```
//!
//! All integers and floats are little-endian.

use num_complex::Complex;
use pulse_radar_core::scene::{PulsePair, SceneSpec, TargetTruth, NOISE_PRNG};
use pulse_radar_core::waveform::IqBuffer;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

use crate::config::SystemConfig;

pub const MAGIC: [u8; 4] = *b"PRRX";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a recording (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported recording version {0}")]
    Version(u16),
    #[error("header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("record {index} is truncated")]
    Truncated { index: u64 },
    #[error("record {index} is malformed: {reason}")]
    Malformed { index: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub config: SystemConfig,
    pub scene: SceneSpec,
    pub noise_prng: String,
}

impl RecordingHeader {
    pub fn new(config: &SystemConfig) -> Self {
        Self { config: config.clone(), scene: config.scene.clone(), noise_prng: NOISE_PRNG.into() }
    }
}

pub struct RecordingWriter<W: Write> {
    out: W,
    records: u64,
}

impl<W: Write> RecordingWriter<W> {
    pub fn new(mut out: W, header: &RecordingHeader) -> Result<Self, RecordingError> {
        let json = serde_json::to_vec(header)?;
        out.write_all(&MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u32).to_le_bytes())?;
        out.write_all(&json)?;
        Ok(Self { out, records: 0 })
    }

    pub fn write(&mut self, pair: &PulsePair) -> Result<(), RecordingError> {
        let mut rec = Vec::with_capacity(26 + 8 * pair.truth.len() + 4 * (pair.rx1.len() + pair.rx2.len()));
        rec.extend_from_slice(&pair.pulse_index.to_le_bytes());
        rec.extend_from_slice(&(pair.saturated as u32).to_le_bytes());
        rec.extend_from_slice(&(pair.truth.len() as u16).to_le_bytes());
        for t in &pair.truth {
            rec.extend_from_slice(&t.delta_r_m.to_le_bytes());
        }
        for buf in [&pair.rx1, &pair.rx2] {
            rec.extend_from_slice(&(buf.len() as u32).to_le_bytes());
            for s in buf.samples() {
                rec.extend_from_slice(&s.re.to_le_bytes());
                rec.extend_from_slice(&s.im.to_le_bytes());
            }
        }
        self.out.write_all(&(rec.len() as u32).to_le_bytes())?;
        self.out.write_all(&rec)?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<W, RecordingError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub struct RecordingReader<R: Read> {
    input: R,
    header: RecordingHeader,
    index: u64,
}

impl<R: Read> RecordingReader<R> {
    pub fn new(mut input: R) -> Result<Self, RecordingError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(RecordingError::BadMagic(magic));
        }
        let mut v = [0u8; 2];
        input.read_exact(&mut v)?;
        let version = u16::from_le_bytes(v);
        if version != VERSION {
            return Err(RecordingError::Version(version));
        }
        let mut len = [0u8; 4];
        input.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut json)?;
        let header = serde_json::from_slice(&json)?;
        Ok(Self { input, header, index: 0 })
    }

    pub fn header(&self) -> &RecordingHeader {
        &self.header
    }

    /// Next record, or `None` at a clean end of file.
    pub fn next_pair(&mut self) -> Result<Option<PulsePair>, RecordingError> {
        let mut len = [0u8; 4];
        match read_full(&mut self.input, &mut len)? {
            0 => return Ok(None),
            4 => {}
            _ => return Err(RecordingError::Truncated { index: self.index }),
        }
        let mut rec = vec![0u8; u32::from_le_bytes(len) as usize];
        if read_full(&mut self.input, &mut rec)? != rec.len() {
            return Err(RecordingError::Truncated { index: self.index });
        }
        let pair = parse_record(&rec).map_err(|reason| RecordingError::Malformed { index: self.index, reason })?;
        self.index += 1;
        Ok(Some(pair))
    }
}

impl<R: Read> Iterator for RecordingReader<R> {
    type Item = Result<PulsePair, RecordingError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_pair().transpose()
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.buf.len() < n {
            return Err(format!("needs {n} more bytes, {} left", self.buf.len()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn iq(&mut self) -> Result<IqBuffer, String> {
        let n = u32::from_le_bytes(self.array()?) as usize;
        let raw = self.take(n.checked_mul(4).ok_or("sample count overflows")?)?;
        Ok(IqBuffer::new(
            raw.chunks_exact(4)
                .map(|c| Complex::new(i16::from_le_bytes([c[0], c[1]]), i16::from_le_bytes([c[2], c[3]])))
                .collect(),
        ))
    }
}

fn parse_record(rec: &[u8]) -> Result<PulsePair, String> {
    let mut c = Cursor { buf: rec };
    let pulse_index = u64::from_le_bytes(c.array()?);
    let saturated = u32::from_le_bytes(c.array()?) as usize;
    let n_truth = u16::from_le_bytes(c.array()?) as usize;
    let truth = (0..n_truth)
        .map(|target| Ok(TargetTruth { target, delta_r_m: f64::from_le_bytes(c.array()?) }))
        .collect::<Result<Vec<_>, String>>()?;
    let rx1 = c.iq()?;
    let rx2 = c.iq()?;
    if !c.buf.is_empty() {
        return Err(format!("{} trailing bytes", c.buf.len()));
    }
    Ok(PulsePair { rx1, rx2, pulse_index, truth, saturated })
}
