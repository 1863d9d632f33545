//! Central finite differences against the analytic gradient of the full
//! objective, for every trainable entry.

use rand::Rng;
use rand_distr::StandardNormal;
use spanprobe_core::corpus::TokenTargets;
use spanprobe_core::probe::{model_batch, BatchItem, ObjectiveConfig, ProbeHead, Regularizer, SpanTarget};
use spanprobe_core::refmodel::{init_model, AdapterSet, LoraConfig, ModelConfig, ModelInput, ModelParams};
use spanprobe_core::seed;

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-3;
/// Below this both gradients are treated as zero.
const ZERO: f64 = 1e-9;

struct Fixture {
    params: ModelParams,
    inputs: Vec<ModelInput>,
    targets: Vec<TokenTargets>,
    spans: Vec<Vec<SpanTarget>>,
}

fn fixture() -> Fixture {
    let cfg = ModelConfig { vocab_size: 32, d_model: 16, n_layers: 2, n_heads: 2, d_ff: 32, max_seq_len: 32, seed: 3, ..Default::default() };
    let mut params = init_model(&cfg).unwrap();
    // larger weights and non-unit gains so every path carries signal
    let mut rng = seed::rng(99);
    for t in params.tensors_mut() {
        let gain = t.iter().all(|&v| v == 1.0);
        for v in t.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = if gain { 1.0 + 0.2 * z } else { *v * 10.0 };
        }
    }
    let inputs = vec![
        ModelInput { tokens: vec![1, 7, 3, 9, 30, 2, 2, 14, 5, 21], completion_start: 3 },
        ModelInput { tokens: vec![4, 11, 27, 8, 16, 16, 0, 31], completion_start: 2 },
    ];
    let mk = |y: &[f64]| TokenTargets {
        y: y.to_vec(),
        w: y.iter().map(|&v| if v > 0.0 { 10.0 } else { 1.0 }).collect(),
        entity_mask: y.iter().map(|&v| v > 0.0).collect(),
    };
    let targets = vec![mk(&[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0]), mk(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0])];
    let spans = vec![
        vec![SpanTarget { start: 2, end: 3, y: 1.0 }, SpanTarget { start: 5, end: 6, y: 0.0 }],
        vec![SpanTarget { start: 0, end: 1, y: 0.0 }, SpanTarget { start: 3, end: 4, y: 1.0 }],
    ];
    Fixture { params, inputs, targets, spans }
}

fn random_head(layer: usize) -> ProbeHead {
    let mut rng = seed::rng(5);
    ProbeHead { w: (0..16).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect(), b: 0.1, layer }
}

fn adapters(params: &ModelParams, layer: usize, zero_b: bool) -> AdapterSet {
    let mut ads = AdapterSet::init(&params.config, layer, &LoraConfig::default(), 17).unwrap();
    if !zero_b {
        let mut rng = seed::rng(23);
        for ad in &mut ads.adapters {
            for v in &mut ad.b.data {
                *v = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    ads
}

fn check(fx: &Fixture, layer: usize, reg: Regularizer, lambda: f64, omega: f64, zero_b: bool) -> (usize, f64) {
    let mut head = random_head(layer);
    let mut ads = adapters(&fx.params, layer, zero_b);
    let inputs: Vec<&ModelInput> = fx.inputs.iter().collect();
    let items: Vec<BatchItem> =
        fx.targets.iter().zip(&fx.spans).map(|(t, s)| BatchItem { targets: t, spans: s }).collect();
    let cfg = ObjectiveConfig { omega, lambda_reg: lambda, regularizer: reg };
    let (_, grads) = model_batch(&fx.params, Some(&ads), &head, &inputs, &items, &cfg).unwrap();
    let ag = grads.adapters.clone().unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut compare = |analytic: f64, numeric: f64, what: &str| {
        let diff = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        if scale > ZERO {
            let rel = diff / scale;
            worst = worst.max(rel);
            assert!(rel <= TOL, "{what}: analytic {analytic:e} numeric {numeric:e} rel {rel:e} ({reg:?}, ω={omega})");
        }
        checked += 1;
    };

    macro_rules! fd {
        ($slot:expr) => {{
            let orig = $slot;
            $slot = orig + EPS;
            let up = model_batch(&fx.params, Some(&ads), &head, &inputs, &items, &cfg).unwrap().0.total;
            $slot = orig - EPS;
            let dn = model_batch(&fx.params, Some(&ads), &head, &inputs, &items, &cfg).unwrap().0.total;
            $slot = orig;
            (up - dn) / (2.0 * EPS)
        }};
    }

    for j in 0..head.w.len() {
        let num = fd!(head.w[j]);
        compare(grads.w[j], num, "head.w");
    }
    let num = fd!(head.b);
    compare(grads.b, num, "head.b");
    for k in 0..ads.adapters.len() {
        for j in 0..ads.adapters[k].a.data.len() {
            let num = fd!(ads.adapters[k].a.data[j]);
            compare(ag.a[k].data[j], num, "lora.a");
        }
        for j in 0..ads.adapters[k].b.data.len() {
            let num = fd!(ads.adapters[k].b.data[j]);
            compare(ag.b[k].data[j], num, "lora.b");
        }
    }
    (checked, worst)
}

#[test]
fn every_regularizer_and_omega() {
    let fx = fixture();
    for (reg, lambda) in [(Regularizer::None, 0.0), (Regularizer::Lm, 0.3), (Regularizer::Kl, 0.3)] {
        for omega in [0.0, 0.5, 1.0] {
            let (n, worst) = check(&fx, 2, reg, lambda, omega, false);
            assert_eq!(n, 17 + 2 * 4 * 2 * 8 * 16);
            assert!(worst <= TOL);
        }
    }
}

#[test]
fn default_probe_layer_and_zero_b() {
    let fx = fixture();
    // default layer for two blocks is 1: adapters on block 0 only
    let (n, _) = check(&fx, 1, Regularizer::Lm, 0.5, 0.5, true);
    assert_eq!(n, 17 + 4 * 2 * 8 * 16);
    check(&fx, 1, Regularizer::Kl, 0.99, 1.0, false);
}
