//! Versioned binary checkpoints: `"SPCK"`, `u32` format version, `u32`
//! header length, a JSON header, then every value as little-endian f64.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use spanprobe_core::probe::ProbeHead;
use spanprobe_core::refmodel::{AdapterSet, LoraAdapter, LoraTarget, ModelConfig, ModelParams};
use spanprobe_core::tensor::Mat;

use crate::error::{Error, Result};
use crate::fsio;

pub const MAGIC: &[u8; 4] = b"SPCK";
pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelHeader {
    kind: String,
    tool_version: String,
    config: ModelConfig,
    n_values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterShape {
    pub target: LoraTarget,
    pub rank: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProbeHeader {
    kind: String,
    tool_version: String,
    layer: usize,
    d: usize,
    /// Hash of the model checkpoint the probe was trained on, if any.
    model_sha256: Option<String>,
    adapters: Vec<AdapterShape>,
    n_values: usize,
}

/// A trained probe: head plus optional adapters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCheckpoint {
    pub head: ProbeHead,
    pub adapters: Option<AdapterSet>,
    pub model_sha256: Option<String>,
}

fn pack<H: Serialize>(header: &H, values: impl Iterator<Item = f64>) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn unpack<H: DeserializeOwned>(bytes: &[u8], kind: &str) -> Result<(H, Vec<f64>)> {
    let bad = |m: &str| Error::Data(format!("{kind} checkpoint: {m}"));
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported format version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let value: serde_json::Value = serde_json::from_slice(header_bytes).map_err(|e| bad(&e.to_string()))?;
    if value.get("kind").and_then(|k| k.as_str()) != Some(kind) {
        return Err(bad("wrong checkpoint kind"));
    }
    let header: H = serde_json::from_value(value).map_err(|e| bad(&e.to_string()))?;
    let payload = &bytes[12 + hlen..];
    if !payload.len().is_multiple_of(8) {
        return Err(bad("payload is not a whole number of f64 values"));
    }
    let values: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{kind} checkpoint holds non-finite values")));
    }
    Ok((header, values))
}

pub fn encode_model(params: &ModelParams) -> Vec<u8> {
    let n = params.tensors().iter().map(|t| t.len()).sum();
    let header =
        ModelHeader { kind: "model".into(), tool_version: TOOL_VERSION.into(), config: params.config.clone(), n_values: n };
    pack(&header, params.tensors().into_iter().flat_map(|t| t.iter().copied()))
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    let (h, values): (ModelHeader, _) = unpack(bytes, "model")?;
    h.config.validate()?;
    let mut params = ModelParams::zeros(&h.config);
    let mut tensors = params.tensors_mut();
    let expected: usize = tensors.iter().map(|t| t.len()).sum();
    if values.len() != expected || h.n_values != expected {
        return Err(Error::Data(format!("model checkpoint holds {} values, config needs {expected}", values.len())));
    }
    let mut off = 0;
    for t in tensors.iter_mut() {
        let n = t.len();
        t.copy_from_slice(&values[off..off + n]);
        off += n;
    }
    Ok(params)
}

pub fn encode_probe(p: &ProbeCheckpoint) -> Vec<u8> {
    let ads = p.adapters.as_ref().map(|a| a.adapters.as_slice()).unwrap_or(&[]);
    let shapes = ads.iter().map(|a| AdapterShape { target: a.target, rank: a.rank, alpha: a.alpha }).collect();
    let mut values: Vec<f64> = p.head.w.clone();
    values.push(p.head.b);
    for a in ads {
        values.extend_from_slice(&a.a.data);
        values.extend_from_slice(&a.b.data);
    }
    let header = ProbeHeader {
        kind: "probe".into(),
        tool_version: TOOL_VERSION.into(),
        layer: p.head.layer,
        d: p.head.dim(),
        model_sha256: p.model_sha256.clone(),
        adapters: shapes,
        n_values: values.len(),
    };
    pack(&header, values.into_iter())
}

pub fn decode_probe(bytes: &[u8]) -> Result<ProbeCheckpoint> {
    let (h, values): (ProbeHeader, _) = unpack(bytes, "probe")?;
    let d = h.d;
    let expected = d + 1 + h.adapters.iter().map(|a| 2 * a.rank * d).sum::<usize>();
    if values.len() != expected || h.n_values != expected {
        return Err(Error::Data(format!("probe checkpoint holds {} values, header needs {expected}", values.len())));
    }
    let head = ProbeHead { w: values[..d].to_vec(), b: values[d], layer: h.layer };
    let mut off = d + 1;
    let mut adapters = Vec::with_capacity(h.adapters.len());
    for s in &h.adapters {
        let n = s.rank * d;
        let a = Mat::from_vec(s.rank, d, values[off..off + n].to_vec());
        let b = Mat::from_vec(d, s.rank, values[off + n..off + 2 * n].to_vec());
        off += 2 * n;
        adapters.push(LoraAdapter { target: s.target, rank: s.rank, alpha: s.alpha, a, b });
    }
    let adapters = (!adapters.is_empty()).then_some(AdapterSet { adapters });
    Ok(ProbeCheckpoint { head, adapters, model_sha256: h.model_sha256 })
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_model(params))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    decode_model(&fsio::read(path)?).map_err(|e| prefix(path, e))
}

pub fn save_probe(p: &ProbeCheckpoint, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_probe(p))
}

pub fn load_probe(path: &Path) -> Result<ProbeCheckpoint> {
    decode_probe(&fsio::read(path)?).map_err(|e| prefix(path, e))
}

fn prefix(path: &Path, e: Error) -> Error {
    match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanprobe_core::refmodel::{init_model, LoraConfig};

    #[test]
    fn model_and_probe_round_trip() {
        let cfg = ModelConfig { d_model: 16, n_layers: 2, n_heads: 2, d_ff: 32, max_seq_len: 32, ..Default::default() };
        let m = init_model(&cfg).unwrap();
        let bytes = encode_model(&m);
        assert_eq!(decode_model(&bytes).unwrap(), m);
        let ads = AdapterSet::init(&cfg, 1, &LoraConfig::default(), 4).unwrap();
        let p = ProbeCheckpoint {
            head: ProbeHead { w: (0..16).map(|i| i as f64 * 0.1).collect(), b: -0.5, layer: 1 },
            adapters: Some(ads),
            model_sha256: Some(crate::fsio::sha256_hex(&bytes)),
        };
        assert_eq!(decode_probe(&encode_probe(&p)).unwrap(), p);
        assert!(decode_model(&encode_probe(&p)).is_err());
    }
}
