use regex::Regex;
use spanprobe_core::baselines::AnswerExtractor;

/// Final-answer extractor: the last `\boxed{...}` content, else the last
/// number, else the trimmed text.
#[derive(Debug, Clone)]
pub struct RegexExtractor {
    boxed: Regex,
    number: Regex,
}

impl Default for RegexExtractor {
    fn default() -> Self {
        RegexExtractor {
            boxed: Regex::new(r"\\boxed\{([^{}]*)\}").expect("valid pattern"),
            number: Regex::new(r"-?\d+(?:\.\d+)?(?:/\d+)?").expect("valid pattern"),
        }
    }
}

impl AnswerExtractor for RegexExtractor {
    fn extract(&self, text: &str) -> String {
        if let Some(c) = self.boxed.captures_iter(text).last() {
            return c[1].trim().to_string();
        }
        if let Some(m) = self.number.find_iter(text).last() {
            return m.as_str().to_string();
        }
        text.trim().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_final_answer() {
        let x = RegexExtractor::default();
        assert_eq!(x.extract(r"so 2+2 = \boxed{4}."), "4");
        assert_eq!(x.extract("first 3, then 7/2"), "7/2");
        assert_eq!(x.extract("  none "), "none");
    }
}
