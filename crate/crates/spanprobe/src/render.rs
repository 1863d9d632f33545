//! Highlighted transcripts: characters colored by their probe score, with
//! scores under a floor left plain.

use spanprobe_core::corpus::LabeledSample;

pub const DEFAULT_FLOOR: f64 = 0.4;

/// `(text, score)` runs; `None` below the floor. A character takes the
/// highest score among the byte tokens it spans.
pub fn runs(sample: &LabeledSample, scores: &[f64], floor: f64) -> Vec<(String, Option<f64>)> {
    let mut out: Vec<(String, Option<f64>)> = Vec::new();
    for (start, ch) in sample.completion.char_indices() {
        let end = start + ch.len_utf8();
        let s = sample
            .tokens
            .iter()
            .zip(scores)
            .filter(|(t, _)| t.start < end && start < t.end)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let shown = (s >= floor).then_some(s);
        match out.last_mut() {
            Some((text, prev)) if level(*prev) == level(shown) => {
                text.push(ch);
                *prev = match (*prev, shown) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
            _ => out.push((ch.to_string(), shown)),
        }
    }
    out
}

fn level(score: Option<f64>) -> Option<u8> {
    score.map(|s| (s.clamp(0.0, 1.0) * 4.0).floor().min(3.0) as u8)
}

pub fn render_ansi(sample: &LabeledSample, scores: &[f64], floor: f64) -> String {
    // light to strong red backgrounds, 256-color palette
    const BG: [u8; 4] = [224, 217, 210, 196];
    let mut out = String::new();
    for (text, s) in runs(sample, scores, floor) {
        match level(s) {
            None => out.push_str(&text),
            Some(l) => out.push_str(&format!("\x1b[48;5;{}m{text}\x1b[0m", BG[l as usize])),
        }
    }
    out
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn render_html(sample: &LabeledSample, scores: &[f64], floor: f64) -> String {
    let mut body = String::new();
    for (text, s) in runs(sample, scores, floor) {
        let t = escape_html(&text);
        match s {
            None => body.push_str(&t),
            Some(v) => body.push_str(&format!(
                "<span style=\"background: rgba(220, 38, 38, {:.2})\" title=\"{v:.3}\">{t}</span>",
                0.15 + 0.85 * v.clamp(0.0, 1.0)
            )),
        }
    }
    format!(
        "<!doctype html>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<p><b>{}</b></p>\n<pre style=\"white-space: pre-wrap\">{body}</pre>\n",
        escape_html(&sample.id),
        escape_html(&sample.prompt)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanprobe_core::corpus::{ByteTokenizer, Tokenizer};

    fn sample(text: &str) -> LabeledSample {
        LabeledSample {
            id: "r".into(),
            prompt: "p".into(),
            completion: text.into(),
            tokens: ByteTokenizer.encode(text),
            spans: vec![],
            source_tag: String::new(),
            completion_label: None,
        }
    }

    #[test]
    fn floor_hides_low_scores() {
        let s = sample("ab<c");
        let r = runs(&s, &[0.39, 0.4, 0.9, 0.1], DEFAULT_FLOOR);
        assert_eq!(r[0], ("a".into(), None));
        assert_eq!(r[1].1, Some(0.4));
        let html = render_html(&s, &[0.39, 0.4, 0.9, 0.1], DEFAULT_FLOOR);
        assert!(html.contains("&lt;"));
        assert!(!render_ansi(&s, &[0.0; 4], DEFAULT_FLOOR).contains('\x1b'));
    }

    #[test]
    fn multibyte_characters_stay_whole() {
        let s = sample("é!");
        let r = runs(&s, &[0.2, 0.8, 0.0], 0.4);
        assert_eq!(r[0], ("é".into(), Some(0.8)));
    }
}
