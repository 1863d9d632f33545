use proptest::prelude::*;
use spanprobe_core::annotate::{inject_errors, invert, InjectionConfig};
use spanprobe_core::corpus::{align_spans, ByteTokenizer, RawSpan, Tokenizer, VerificationLabel};
use spanprobe_core::evalproto::{auc, recall_at_fpr, roc_from_scores, selective_curve};

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..120).prop_flat_map(|n| {
        (prop::collection::vec(0u8..12, n), prop::collection::vec(any::<bool>(), n))
            .prop_map(|(s, l)| (s.into_iter().map(|v| f64::from(v) / 11.0).collect(), l))
            .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
    })
}

proptest! {
    #[test]
    fn auc_matches_pairwise((s, l) in scored()) {
        let a = auc(&roc_from_scores(&s, &l).unwrap());
        prop_assert!((a - pairwise_auc(&s, &l)).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn recall_matches_threshold_enumeration((s, l) in scored(), cap in 0.0f64..1.0) {
        let n_pos = l.iter().filter(|&&x| x).count() as f64;
        let n_neg = l.len() as f64 - n_pos;
        let mut best = 0.0f64;
        for t in s.iter().copied().chain([f64::INFINITY]) {
            let fp = s.iter().zip(&l).filter(|(v, y)| !**y && **v >= t).count() as f64;
            let tp = s.iter().zip(&l).filter(|(v, y)| **y && **v >= t).count() as f64;
            if fp / n_neg <= cap {
                best = best.max(tp / n_pos);
            }
        }
        prop_assert_eq!(recall_at_fpr(&roc_from_scores(&s, &l).unwrap(), cap), best);
    }

    #[test]
    fn attempt_rate_monotone(scores in prop::collection::vec(0.0f64..1.0, 1..80)) {
        let answers: Vec<(f64, bool)> = scores.iter().map(|&s| (s, s < 0.5)).collect();
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let pts = selective_curve(&answers, &ts).unwrap();
        prop_assert!(pts.windows(2).all(|w| w[0].attempt_rate <= w[1].attempt_rate));
    }

    #[test]
    fn aligned_spans_are_verbatim(text in "[a-e ]{1,60}", picks in prop::collection::vec((0usize..60, 1usize..6), 0..8)) {
        let tokens = ByteTokenizer.encode(&text);
        let raws: Vec<RawSpan> = picks
            .iter()
            .filter_map(|&(a, len)| text.get(a..(a + len).min(text.len())))
            .filter(|s| !s.is_empty())
            .map(|s| RawSpan::new(s, VerificationLabel::NotSupported))
            .chain([RawSpan::new("qqq", VerificationLabel::Supported)])
            .collect();
        let rep = align_spans(&text, &tokens, &raws);
        prop_assert!(rep.rejections.iter().any(|r| r.text == "qqq"));
        for s in &rep.spans {
            prop_assert_eq!(&text[s.char_start..s.char_end], s.text.as_str());
            let (a, b) = s.token_range().unwrap();
            prop_assert!(tokens[a].start <= s.char_start && tokens[b].end >= s.char_end);
        }
        prop_assert_eq!(rep.aligned_count() + rep.rejections.len(), raws.len());
    }

    #[test]
    fn injection_inverts(words in prop::collection::vec("[A-Z][a-z]{1,6}|[a-z]{1,6}|[0-9]{1,5}", 1..40), seed in any::<u64>(), rate in 0.0f64..0.5) {
        let text = words.join(" ");
        let rec = inject_errors(&text, &InjectionConfig { seed, rate }).unwrap();
        prop_assert_eq!(invert(&rec).unwrap(), text.clone());
        prop_assert_eq!(&rec, &inject_errors(&text, &InjectionConfig { seed, rate }).unwrap());
        for e in &rec.edits {
            prop_assert_eq!(&rec.perturbed[e.start..e.end], e.perturbed.as_str());
        }
    }
}
