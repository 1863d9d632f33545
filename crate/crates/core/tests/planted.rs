use spanprobe_core::corpus::synthetic::{planted_traces, PlantedConfig};
use spanprobe_core::evalproto::{auc, roc_from_scores};
use spanprobe_core::probe::{head_scores, train, Features, OptimizerKind, TrainConfig};

#[test]
fn planted_direction_is_recovered() {
    let (tr_s, tr_t, v) = planted_traces(&PlantedConfig { n_samples: 100, seed: 1, ..Default::default() });
    let (te_s, te_t, v2) = planted_traces(&PlantedConfig { n_samples: 25, seed: 2, ..Default::default() });
    assert_eq!(v, v2);
    let cfg = TrainConfig {
        steps: 300,
        batch_size: 16,
        learning_rate: 0.05,
        optimizer: OptimizerKind::adam(),
        ..Default::default()
    };
    let out = train(&tr_s, Features::Traces(&tr_t), &cfg, None).unwrap();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (s, t) in te_s.iter().zip(&te_t) {
        scores.extend(head_scores(t, &out.head).unwrap());
        labels.extend(s.spans.iter().map(|sp| sp.label.is_hallucinated()));
    }
    let a = auc(&roc_from_scores(&scores, &labels).unwrap());
    let cos: f64 = out.head.w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
        / out.head.w.iter().map(|x| x * x).sum::<f64>().sqrt();
    // best achievable: P(N(3,1) > N(0,1)) = Φ(3/√2)
    let bayes = 0.5 * (1.0 + libm::erf(3.0 / 2.0));
    assert!((a - bayes).abs() < 0.015, "auc {a} vs bound {bayes}");
    assert!(cos > 0.95, "cos {cos}");
}
