//! RIFF/WAVE reader and writer for PCM16 mono 16 kHz files.
//!
//! The reader requires "fmt " and "data" chunks and skips unknown chunks
//! (honoring the RIFF pad byte); anything that is not 16-bit mono PCM at the
//! expected rate is rejected with a descriptive error.

use super::{Signal, SignalKind, SAMPLE_RATE};
use crate::error::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

fn rd_u16(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn rd_u32(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.len() < 12 {
        return Err(Error::format("missing RIFF header (file too short)"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::format("missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::format("missing WAVE form type"));
    }

    let mut off = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = rd_u32(&bytes, off + 4) as usize;
        let body_start = off + 8;
        if body_start + size > bytes.len() {
            return Err(Error::format(format!(
                "truncated {:?} chunk: declared {} bytes, {} available",
                String::from_utf8_lossy(id),
                size,
                bytes.len() - body_start
            )));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::format("fmt chunk shorter than 16 bytes"));
                }
                fmt = Some((
                    rd_u16(body, 0),
                    rd_u16(body, 2),
                    rd_u32(body, 4),
                    rd_u16(body, 14),
                ));
            }
            b"data" => data = Some(body),
            _ => {} // unknown chunk: skip
        }
        off = body_start + size + (size & 1); // RIFF pads odd chunks
    }

    let (codec, channels, rate, bits) = fmt.ok_or_else(|| Error::format("missing fmt chunk"))?;
    if codec != 1 {
        return Err(Error::format(format!(
            "unsupported codec {codec}: only PCM (1) is accepted"
        )));
    }
    if channels != 1 {
        return Err(Error::format(format!(
            "unsupported channel count {channels}: only mono is accepted"
        )));
    }
    if bits != 16 {
        return Err(Error::format(format!(
            "unsupported bit depth {bits}: only 16-bit PCM is accepted"
        )));
    }
    if rate != SAMPLE_RATE {
        return Err(Error::format(format!(
            "unsupported sample rate {rate} Hz: expected {SAMPLE_RATE} Hz"
        )));
    }
    let data = data.ok_or_else(|| Error::format("missing data chunk"))?;
    if data.len() % 2 != 0 {
        return Err(Error::format("data chunk has odd byte length"));
    }
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    Ok(Signal::new(samples, rate, SignalKind::Clean))
}

pub fn write_wav(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let n = signal.samples.len();
    let data_bytes = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_bytes).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_bytes.to_le_bytes());
    for &s in signal.samples.iter() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(&out)?;
    Ok(())
}
