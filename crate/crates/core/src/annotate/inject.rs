use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::EntitySpan;
use crate::error::{invalid, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Date,
    Number,
    Name,
}

/// A perturbable word in a passage, by byte range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub start: usize,
    pub end: usize,
    pub kind: EditKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedEdit {
    /// Byte range in the perturbed passage.
    pub start: usize,
    pub end: usize,
    pub original: String,
    pub perturbed: String,
    pub kind: EditKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub original: String,
    pub perturbed: String,
    pub edits: Vec<InjectedEdit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    pub seed: u64,
    /// Edits per whitespace-separated word.
    pub rate: f64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        InjectionConfig { seed: 0, rate: 1.0 / 40.0 }
    }
}

pub const DECOY_NAMES: &[&str] = &[
    "Halvorsen", "Okafor", "Marchetti", "Lindqvist", "Brennan", "Takahashi", "Delacroix", "Novak", "Castellano",
    "Whitfield", "Ramaswamy", "Kowalczyk", "Ashworth", "Villanueva", "Eriksen", "Montague",
];

fn sentence_initial(text: &[u8], start: usize) -> bool {
    match text[..start].iter().rev().find(|b| !b.is_ascii_whitespace()) {
        None => true,
        Some(b) => matches!(b, b'.' | b'!' | b'?' | b'"' | b':'),
    }
}

/// Dates (four-digit years 1000..=2099), other digit runs, and capitalized
/// words that do not open a sentence.
pub fn find_sites(passage: &str) -> Vec<Site> {
    let bytes = passage.as_bytes();
    let mut sites = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
            i += 1;
        }
        // words glued to non-ASCII letters are left alone
        if i < bytes.len() && bytes[i] >= 0x80 || start > 0 && bytes[start - 1] >= 0x80 {
            continue;
        }
        let word = &bytes[start..i];
        let kind = if word.iter().all(u8::is_ascii_digit) {
            if word.len() > 9 {
                continue;
            }
            let year_like = word.len() == 4 && word[0] != b'0' && (1000..=2099).contains(&parse_u64(word));
            if year_like {
                EditKind::Date
            } else {
                EditKind::Number
            }
        } else if word.len() >= 2
            && word[0].is_ascii_uppercase()
            && word[1..].iter().all(u8::is_ascii_lowercase)
            && !sentence_initial(bytes, start)
        {
            EditKind::Name
        } else {
            continue;
        };
        sites.push(Site { start, end: i, kind });
    }
    sites
}

fn parse_u64(digits: &[u8]) -> u64 {
    digits.iter().fold(0, |acc, d| acc * 10 + u64::from(d - b'0'))
}

fn perturb(word: &str, kind: EditKind, rng: &mut seed::Rng) -> String {
    let delta = rng.random_range(1..=9u64);
    let up = rng.random_bool(0.5);
    match kind {
        EditKind::Date => {
            let y = parse_u64(word.as_bytes());
            let cand = if up { y + delta } else { y - delta };
            let y2 = if cand / 100 == y / 100 { cand } else if up { y - delta } else { y + delta };
            alloc::format!("{y2}")
        }
        EditKind::Number => {
            let n = parse_u64(word.as_bytes());
            let n2 = if up || n < delta { n + delta } else { n - delta };
            alloc::format!("{n2:0width$}", width = word.len())
        }
        EditKind::Name => {
            let choices: Vec<&&str> = DECOY_NAMES.iter().filter(|d| **d != word).collect();
            String::from(*choices[rng.random_range(0..choices.len())])
        }
    }
}

/// Seeded perturbation of about `rate` edits per word (at least one when a
/// site exists). A passage without sites yields an empty record.
pub fn inject_errors(passage: &str, cfg: &InjectionConfig) -> Result<InjectionRecord> {
    if passage.is_empty() {
        return Err(invalid("cannot inject into an empty passage"));
    }
    if !(cfg.rate.is_finite() && cfg.rate >= 0.0) {
        return Err(invalid("injection rate must be finite and non-negative"));
    }
    let sites = find_sites(passage);
    let words = passage.split_whitespace().count();
    let wanted = (libm::round(words as f64 * cfg.rate) as usize).max(1).min(sites.len());
    let mut rng = seed::named_rng(cfg.seed, seed::stream::INJECTION);
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.shuffle(&mut rng);
    let mut chosen: Vec<Site> = order[..wanted].iter().map(|&i| sites[i]).collect();
    chosen.sort_by_key(|s| s.start);

    let mut perturbed = String::with_capacity(passage.len() + 16);
    let mut edits = Vec::with_capacity(chosen.len());
    let mut cursor = 0;
    for site in chosen {
        perturbed.push_str(&passage[cursor..site.start]);
        let original = &passage[site.start..site.end];
        let new = perturb(original, site.kind, &mut rng);
        let start = perturbed.len();
        perturbed.push_str(&new);
        edits.push(InjectedEdit { start, end: perturbed.len(), original: original.into(), perturbed: new, kind: site.kind });
        cursor = site.end;
    }
    perturbed.push_str(&passage[cursor..]);
    Ok(InjectionRecord { original: passage.into(), perturbed, edits })
}

/// Undo every edit of a record, returning the original passage.
pub fn invert(record: &InjectionRecord) -> Result<String> {
    let mut out = record.perturbed.clone();
    for e in record.edits.iter().rev() {
        if out.get(e.start..e.end) != Some(e.perturbed.as_str()) {
            return Err(invalid(alloc::format!("edit at {}..{} does not match the passage", e.start, e.end)));
        }
        out.replace_range(e.start..e.end, &e.original);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineEval {
    pub edits_total: usize,
    pub edits_detected: usize,
    /// Spans that overlap no edit.
    pub clean_spans: usize,
    pub clean_flagged: usize,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
}

fn overlaps(span: &EntitySpan, e: &InjectedEdit) -> bool {
    span.char_start < e.end && e.start < span.char_end
}

/// Recall over injected edits and false-positive rate over spans on
/// unedited text. `annotations[i]` are spans aligned to `records[i].perturbed`.
pub fn evaluate_pipeline(records: &[InjectionRecord], annotations: &[Vec<EntitySpan>]) -> Result<PipelineEval> {
    if records.len() != annotations.len() {
        return Err(invalid(alloc::format!("{} records but {} annotation sets", records.len(), annotations.len())));
    }
    let mut ev = PipelineEval::default();
    for (rec, spans) in records.iter().zip(annotations) {
        ev.edits_total += rec.edits.len();
        ev.edits_detected += rec
            .edits
            .iter()
            .filter(|e| spans.iter().any(|s| s.label.is_hallucinated() && overlaps(s, e)))
            .count();
        for s in spans.iter().filter(|s| !rec.edits.iter().any(|e| overlaps(s, e))) {
            ev.clean_spans += 1;
            ev.clean_flagged += usize::from(s.label.is_hallucinated());
        }
    }
    ev.recall = (ev.edits_total > 0).then(|| ev.edits_detected as f64 / ev.edits_total as f64);
    ev.fpr = (ev.clean_spans > 0).then(|| ev.clean_flagged as f64 / ev.clean_spans as f64);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_moves_within_century() {
        let rec = inject_errors("She was born in 1952", &InjectionConfig { seed: 7, rate: 1.0 / 40.0 }).unwrap();
        assert_eq!(rec.edits.len(), 1);
        let e = &rec.edits[0];
        assert_eq!(e.kind, EditKind::Date);
        assert_eq!(e.original, "1952");
        assert!(e.perturbed.starts_with("19") && e.perturbed != "1952");
        let again = inject_errors("She was born in 1952", &InjectionConfig { seed: 7, rate: 1.0 / 40.0 }).unwrap();
        assert_eq!(rec, again);
    }

    #[test]
    fn nothing_to_perturb() {
        let rec = inject_errors("the cat sat on the mat", &InjectionConfig::default()).unwrap();
        assert!(rec.edits.is_empty());
        assert_eq!(rec.perturbed, rec.original);
    }

    #[test]
    fn sites_skip_sentence_openers() {
        let s = find_sites("Then Marie moved to Lyon in 1931 with 3 cats.");
        let kinds: Vec<_> = s.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, [EditKind::Name, EditKind::Name, EditKind::Date, EditKind::Number]);
    }

    #[test]
    fn inverse_recovers_original() {
        let text = "In 1887 the architect Gustave built a tower of 300 metres near Paris, and Marie visited 12 times.";
        for seed in 0..20 {
            let rec = inject_errors(text, &InjectionConfig { seed, rate: 0.2 }).unwrap();
            assert!(!rec.edits.is_empty());
            assert_eq!(invert(&rec).unwrap(), text);
            assert!(rec.edits.windows(2).all(|w| w[0].end <= w[1].start));
            for e in &rec.edits {
                assert_ne!(e.original, e.perturbed);
            }
        }
    }
}
