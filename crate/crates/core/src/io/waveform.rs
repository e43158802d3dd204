//! Waveform container: one acquisition event per file.
//!
//! Layout: a magic line, a single-line JSON header, then the samples of every
//! channel in header order. Binary payloads are little-endian `f64`,
//! channel-major; CSV payloads hold one line of comma-separated values per
//! channel.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Channel, ChannelKind, SpectralFrame};

pub const WAVEFORM_MAGIC: &str = "DIPLS-WAVEFORM 1";
pub const WAVEFORM_EXTENSION: &str = "dwf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WaveformEncoding {
    #[default]
    F64le,
    Csv,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelHeader {
    id: String,
    kind: ChannelKind,
    unit: String,
    n_samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    sample_id: String,
    condition_id: String,
    timestamp: String,
    sample_rate: f64,
    duration: f64,
    fundamental_f: f64,
    encoding: WaveformEncoding,
    channels: Vec<ChannelHeader>,
}

pub fn write_waveform(path: &Path, frame: &SpectralFrame, encoding: WaveformEncoding) -> Result<()> {
    let header = Header {
        sample_id: frame.sample_id.clone(),
        condition_id: frame.condition_id.clone(),
        timestamp: frame.timestamp.clone(),
        sample_rate: frame.sample_rate,
        duration: frame.duration,
        fundamental_f: frame.fundamental_f,
        encoding,
        channels: frame
            .channels
            .iter()
            .map(|c| ChannelHeader {
                id: c.id.clone(),
                kind: c.kind,
                unit: c.unit.clone(),
                n_samples: c.samples.len(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::json("waveform header", e))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{WAVEFORM_MAGIC}").map_err(io_err)?;
    writeln!(w, "{json}").map_err(io_err)?;
    for c in &frame.channels {
        match encoding {
            WaveformEncoding::F64le => {
                for v in &c.samples {
                    w.write_all(&v.to_le_bytes()).map_err(io_err)?;
                }
            }
            WaveformEncoding::Csv => {
                let line: Vec<String> = c.samples.iter().map(f64::to_string).collect();
                writeln!(w, "{}", line.join(",")).map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

fn corrupt(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{}: {what}", path.display()))
}

/// Splits off the first line (without its newline).
fn take_line<'a>(bytes: &'a [u8], path: &Path, what: &str) -> Result<(&'a [u8], &'a [u8])> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| corrupt(path, format!("missing {what}")))?;
    Ok((&bytes[..end], &bytes[end + 1..]))
}

pub fn read_waveform(path: &Path) -> Result<SpectralFrame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, rest) = take_line(&bytes, path, "magic line")?;
    if magic != WAVEFORM_MAGIC.as_bytes() {
        return Err(corrupt(path, "not a waveform container (bad magic line)"));
    }
    let (json, payload) = take_line(rest, path, "header")?;
    let header: Header = serde_json::from_slice(json)
        .map_err(|e| corrupt(path, format!("ill-formed header: {e}")))?;

    let channels = match header.encoding {
        WaveformEncoding::F64le => {
            let total: usize = header.channels.iter().map(|c| c.n_samples).sum();
            if payload.len() != total * 8 {
                return Err(corrupt(
                    path,
                    format!("payload has {} bytes, header announces {}", payload.len(), total * 8),
                ));
            }
            let mut offset = 0;
            header
                .channels
                .into_iter()
                .map(|c| {
                    let chunk = &payload[offset..offset + 8 * c.n_samples];
                    offset += 8 * c.n_samples;
                    let samples = chunk
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                        .collect();
                    Channel {
                        id: c.id,
                        kind: c.kind,
                        unit: c.unit,
                        samples,
                    }
                })
                .collect::<Vec<_>>()
        }
        WaveformEncoding::Csv => {
            let text = std::str::from_utf8(payload).map_err(|_| corrupt(path, "CSV payload is not UTF-8"))?;
            let lines: Vec<&str> = text.lines().collect();
            if lines.len() != header.channels.len() {
                return Err(corrupt(
                    path,
                    format!("payload has {} lines, header lists {} channels", lines.len(), header.channels.len()),
                ));
            }
            header
                .channels
                .into_iter()
                .zip(lines)
                .map(|(c, line)| {
                    let samples = line
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| corrupt(path, format!("channel {}: {e}", c.id)))?;
                    if samples.len() != c.n_samples {
                        return Err(corrupt(
                            path,
                            format!("channel {} has {} values, header says {}", c.id, samples.len(), c.n_samples),
                        ));
                    }
                    Ok(Channel {
                        id: c.id,
                        kind: c.kind,
                        unit: c.unit,
                        samples,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let frame = SpectralFrame {
        sample_id: header.sample_id,
        condition_id: header.condition_id,
        timestamp: header.timestamp,
        channels,
        sample_rate: header.sample_rate,
        duration: header.duration,
        fundamental_f: header.fundamental_f,
    };
    frame.validate().map_err(|e| corrupt(path, e))?;
    Ok(frame)
}
