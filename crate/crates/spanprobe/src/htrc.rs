//! HTRC binary traces: little-endian `"HTRC"`, version `u32 = 1`, layer,
//! d and n as `u32`, then `n·d` f32 hidden values row-major, `n` f64
//! chosen-token log-probabilities and `n` f64 entropies.

use std::fs;
use std::path::{Path, PathBuf};

use spanprobe_core::corpus::LabeledSample;
use spanprobe_core::trace::ActivationTrace;

use crate::error::{Error, Result};
use crate::fsio;

pub const MAGIC: &[u8; 4] = b"HTRC";
pub const VERSION: u32 = 1;
const HEADER: usize = 20;

pub fn encode(trace: &ActivationTrace) -> Vec<u8> {
    let n = trace.n as usize;
    let mut out = Vec::with_capacity(HEADER + trace.hidden.len() * 4 + n * 16);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, trace.layer, trace.d, trace.n] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &trace.hidden {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in trace.chosen_logprob.iter().chain(&trace.next_token_entropy) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.at + N;
        let chunk = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| Error::Data(format!("truncated trace: need {end} bytes, have {}", self.bytes.len())))?;
        self.at = end;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
}

/// Decode and validate. `sample_id` is not part of the binary layout.
pub fn decode(bytes: &[u8], sample_id: &str) -> Result<ActivationTrace> {
    let mut r = Reader { bytes, at: 0 };
    let magic: [u8; 4] = r.take()?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("not an HTRC trace (magic {magic:?})")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported HTRC version {version}")));
    }
    let (layer, d, n) = (r.u32()?, r.u32()?, r.u32()?);
    let cells = (n as usize)
        .checked_mul(d as usize)
        .ok_or_else(|| Error::Data("trace dimensions overflow".into()))?;
    let expected = HEADER as u64 + cells as u64 * 4 + u64::from(n) * 16;
    if bytes.len() as u64 != expected {
        return Err(Error::Data(format!("trace payload is {} bytes, header implies {expected}", bytes.len())));
    }
    let hidden = (0..cells).map(|_| r.take().map(f32::from_le_bytes)).collect::<Result<Vec<_>>>()?;
    let mut f64s = |count| (0..count).map(|_| r.take().map(f64::from_le_bytes)).collect::<Result<Vec<_>>>();
    let chosen_logprob = f64s(n as usize)?;
    let next_token_entropy = f64s(n as usize)?;
    let trace = ActivationTrace { sample_id: sample_id.into(), layer, d, n, hidden, chosen_logprob, next_token_entropy };
    trace.validate()?;
    Ok(trace)
}

pub fn write_trace(trace: &ActivationTrace, path: &Path) -> Result<()> {
    trace.validate()?;
    fsio::write_atomic(path, &encode(trace))
}

/// Read a trace; its sample id is taken from the file name.
pub fn read_trace(path: &Path) -> Result<ActivationTrace> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Data(format!("{}: bad trace file name", path.display())))?;
    let id = unescape_id(stem).ok_or_else(|| Error::Data(format!("{}: bad trace file name", path.display())))?;
    decode(&fsio::read(path)?, &id).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// File-name-safe, reversible encoding of a sample id.
pub fn escape_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

pub fn unescape_id(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

pub fn trace_path(dir: &Path, sample_id: &str) -> PathBuf {
    dir.join(format!("{}.htrc", escape_id(sample_id)))
}

pub fn write_trace_dir(dir: &Path, traces: &[ActivationTrace]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for t in traces {
        write_trace(t, &trace_path(dir, &t.sample_id))?;
    }
    Ok(())
}

/// Traces for `samples`, in sample order.
pub fn read_trace_dir(dir: &Path, samples: &[LabeledSample]) -> Result<Vec<ActivationTrace>> {
    samples
        .iter()
        .map(|s| {
            let t = read_trace(&trace_path(dir, &s.id))?;
            if t.n_tokens() != s.n_tokens() {
                return Err(Error::Data(format!(
                    "trace for {} has {} tokens, sample has {}",
                    s.id,
                    t.n,
                    s.n_tokens()
                )));
            }
            Ok(t)
        })
        .collect()
}

/// Debug mirror: one JSON object per trace, values widened to f64 text.
pub fn write_trace_jsonl(traces: &[ActivationTrace], path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t).map_err(|e| Error::Data(e.to_string()))?);
        out.push('\n');
    }
    fsio::write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> ActivationTrace {
        let (n, d) = (7u32, 16u32);
        ActivationTrace {
            sample_id: "s/1 é".into(),
            layer: 3,
            d,
            n,
            hidden: (0..n * d).map(|i| (i as f32 * 0.37).sin() * 1e3 + f32::EPSILON * i as f32).collect(),
            chosen_logprob: (0..n).map(|i| -(i as f64) * 0.1 - 1e-300).collect(),
            next_token_entropy: (0..n).map(|i| i as f64 / 3.0).collect(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample_trace();
        let back = decode(&encode(&t), &t.sample_id).unwrap();
        assert_eq!(back.hidden.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), t.hidden.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back, t);
        let dir = tempfile::tempdir().unwrap();
        write_trace_dir(dir.path(), std::slice::from_ref(&t)).unwrap();
        assert_eq!(read_trace(&trace_path(dir.path(), &t.sample_id)).unwrap(), t);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let t = sample_trace();
        let mut bytes = encode(&t);
        bytes[0] = b'X';
        assert!(decode(&bytes, "x").unwrap_err().to_string().contains("magic"));
        let mut bytes = encode(&t);
        bytes[4] = 2;
        assert!(decode(&bytes, "x").unwrap_err().to_string().contains("version"));
        let bytes = encode(&t);
        assert!(decode(&bytes[..bytes.len() - 3], "x").is_err());
        let mut bad = t.clone();
        bad.next_token_entropy[2] = -0.1;
        assert!(decode(&encode(&bad), "x").is_err());
        let mut nan = t;
        nan.hidden[5] = f32::NAN;
        assert!(decode(&encode(&nan), "x").is_err());
    }

    #[test]
    fn id_escaping_round_trips() {
        for id in ["toy-0001", "a/b c", "é%", ""] {
            assert_eq!(unescape_id(&escape_id(id)).unwrap(), id);
        }
    }
}
