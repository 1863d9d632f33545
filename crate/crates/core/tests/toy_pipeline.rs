use spanprobe_core::corpus::synthetic::{generate, SyntheticConfig};
use spanprobe_core::evalproto::{metrics, score_spans, Protocol};
use spanprobe_core::probe::{score_sample, train, Features, OptimizerKind, Regularizer, TrainConfig, TrainOutcome};
use spanprobe_core::refmodel::{init_model, LoraConfig, ModelConfig, ModelParams};
use spanprobe_core::corpus::LabeledSample;

fn held_out_auc(out: &TrainOutcome, model: &ModelParams, te: &[LabeledSample]) -> f64 {
    let mut rows = Vec::new();
    for (i, s) in te.iter().enumerate() {
        let p = score_sample(&out.head, out.adapters.as_ref(), &Features::Model(model), i, s).unwrap();
        rows.extend(score_spans(&p, s, Protocol::LongForm, "probe").unwrap());
    }
    metrics(&rows).unwrap().auc
}

#[test]
fn linear_probe_separates_planted_entities() {
    let samples = generate(&SyntheticConfig { n_samples: 200, seed: 0, ..Default::default() });
    let (tr, te) = samples.split_at(160);
    let model = init_model(&ModelConfig { d_model: 64, n_layers: 2, n_heads: 4, d_ff: 128, ..Default::default() }).unwrap();
    let cfg = TrainConfig { steps: 3000, batch_size: 8, learning_rate: 0.05, optimizer: OptimizerKind::adam(), ..Default::default() };
    let out = train(tr, Features::Model(&model), &cfg, Some((te, Features::Model(&model)))).unwrap();
    let auc = held_out_auc(&out, &model, te);
    assert_eq!(out.report.val_auc, Some(auc));
    assert!(auc >= 0.9, "auc {auc}");
}

#[test]
fn lora_steps_reduce_loss() {
    let samples = generate(&SyntheticConfig { n_samples: 24, seed: 4, ..Default::default() });
    let model = init_model(&ModelConfig { d_model: 32, n_layers: 2, n_heads: 2, d_ff: 64, ..Default::default() }).unwrap();
    let cfg = TrainConfig {
        steps: 30,
        batch_size: 4,
        learning_rate: 0.05,
        adapter_learning_rate: 0.01,
        optimizer: OptimizerKind::adam(),
        lora: Some(LoraConfig::default()),
        lambda_reg: 0.01,
        regularizer: Regularizer::Lm,
        ..Default::default()
    };
    let out = train(&samples, Features::Model(&model), &cfg, None).unwrap();
    let l = &out.report.total_loss;
    assert!(l[l.len() - 1] < 0.8 * l[0], "{l:?}");
    assert!(out.adapters.unwrap().adapters.iter().any(|a| a.b.norm_sq() > 0.0));
    assert_eq!(out.report.final_omega, 1.0);
}
