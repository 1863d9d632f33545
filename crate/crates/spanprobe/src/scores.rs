//! Scored-span CSV tables and the metrics report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use spanprobe_core::evalproto::{evaluate, MethodMetrics, ScoredSpan};

use crate::error::{Error, Result};
use crate::fsio;

pub fn scores_to_csv(rows: &[ScoredSpan]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(["sample_id", "span_id", "method", "score", "label"]).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_scores(rows: &[ScoredSpan], path: &Path) -> Result<()> {
    fsio::write_atomic(path, &scores_to_csv(rows)?)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoredSpan>> {
    let bytes = fsio::read(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<ScoredSpan>().enumerate() {
        let row = rec.map_err(|e| Error::Data(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if !row.score.is_finite() || row.label > 1 {
            return Err(Error::Data(format!("{} row {}: bad score or label", path.display(), i + 2)));
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRef {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub inputs: Vec<InputRef>,
    pub methods: BTreeMap<String, MethodMetrics>,
}

/// Pool the rows of every CSV and compute per-method metrics.
pub fn eval_report(paths: &[&Path]) -> Result<EvalReport> {
    let mut rows = Vec::new();
    let mut inputs = Vec::new();
    for p in paths {
        rows.extend(read_scores(p)?);
        inputs.push(InputRef {
            file: p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: fsio::sha256_file(p)?,
        });
    }
    Ok(EvalReport { tool_version: env!("CARGO_PKG_VERSION").into(), inputs, methods: evaluate(&rows)? })
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanprobe_core::evalproto::SpanId;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            ScoredSpan { sample_id: "a,b".into(), span_id: SpanId::Index(2), method: "probe".into(), score: 0.1 + 0.2, label: 1 },
            ScoredSpan { sample_id: "c".into(), span_id: SpanId::Completion, method: "probe".into(), score: 1e-300, label: 0 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_scores(&rows, &p).unwrap();
        assert_eq!(read_scores(&p).unwrap(), rows);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("sample_id,span_id,method,score,label\n"));
        let rep = eval_report(&[&p]).unwrap();
        assert_eq!(rep.methods["probe"].auc, 1.0);
    }
}
