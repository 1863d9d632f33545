//! Command-line surface. Exit codes: 0 success, 1 usage, 2 data
//! validation, 3 numeric failure, 4 external service.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spanprobe_core::annotate::{
    annotate_completion, attach_annotations, FlipJudge,
    InjectionRecord, Judge, OracleJudge, PipelineEval,
};
use spanprobe_core::corpus::synthetic::{generate, SyntheticConfig};
use spanprobe_core::corpus::LabeledSample;
use spanprobe_core::evalproto::Protocol;
use spanprobe_core::guard::{run_monitored, MonitorStatus};
use spanprobe_core::probe::{train, Features, OptimizerKind, Regularizer};
use spanprobe_core::refmodel::{init_model, LoraConfig, ModelParams};

use crate::checkpoint::{self, ProbeCheckpoint};
use crate::config::RunConfig;
use crate::dataset::{load_dataset, load_dataset_report, save_dataset};
use crate::error::{Error, Result};
use crate::judge_http::{timed, HttpJudge, HttpJudgeConfig, LedgerEntry};
use crate::manifest::{manifest_path, Manifest};
use crate::pipeline;
use crate::scores::{eval_report, to_json_bytes, write_scores};
use crate::{fsio, htrc, render};

#[derive(Debug, Parser)]
#[command(name = "spanprobe", version, about = "Token-level hallucination probes on transformer hidden states")]
pub struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the bundled synthetic corpus.
    Synth(SynthArgs),
    /// Split a dataset into train and test files.
    Split(SplitArgs),
    /// Initialize a reference model checkpoint.
    InitModel(InitModelArgs),
    /// Align span annotations against completions.
    Align(AlignArgs),
    /// Label completions with a judge.
    Annotate(AnnotateArgs),
    /// Measure label quality on passages with injected errors.
    InjectEval(InjectEvalArgs),
    /// Export hidden-state traces.
    Trace(TraceArgs),
    /// Train a linear or LoRA probe.
    Train(TrainArgs),
    /// Score spans with a trained probe.
    Score(ScoreArgs),
    /// Compute metrics from scored-span CSVs.
    Eval(EvalArgs),
    /// Score spans with uncertainty baselines.
    Baselines(BaselinesArgs),
    /// Generate with the probe watching and abstain past a threshold.
    Monitor(MonitorArgs),
    /// Highlight a completion by probe score.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.35)]
    pub hallucination_rate: f64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct InitModelArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub n_layers: Option<usize>,
    #[arg(long)]
    pub n_heads: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rejection report (JSON); defaults to `<out>.rejections.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MockJudge {
    /// Labels every detected date, number and name as supported.
    Sites,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Judge endpoint; falls back to SPANPROBE_JUDGE_URL.
    #[arg(long)]
    pub judge_url: Option<String>,
    #[arg(long, value_enum, conflicts_with = "judge_url")]
    pub mock_judge: Option<MockJudge>,
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InjectJudge {
    Oracle,
    Flip,
    Http,
}

#[derive(Debug, Args)]
pub struct InjectEvalArgs {
    /// Plain-text passages, one per line.
    #[arg(long)]
    pub passages: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    pub judge: InjectJudge,
    #[arg(long)]
    pub judge_url: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub flip_rate: Option<f64>,
    /// Injection records (JSONL).
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write a JSONL mirror.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegArg {
    None,
    Lm,
    Kl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptArg {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Reference model checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory of HTRC traces.
    #[arg(long, conflicts_with = "model")]
    pub traces: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Validation dataset for a held-out AUC in the report.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub lora: bool,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub lambda_reg: Option<f64>,
    #[arg(long, value_enum)]
    pub regularizer: Option<RegArg>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub adapter_lr: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub layer: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProtocolArg {
    LongForm,
    ShortForm,
    Reasoning,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::LongForm => Protocol::LongForm,
            ProtocolArg::ShortForm => Protocol::ShortForm,
            ProtocolArg::Reasoning => Protocol::Reasoning,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub probe: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, value_enum, default_value = "long-form")]
    pub protocol: ProtocolArg,
    #[arg(long, default_value = "probe")]
    pub method: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long, value_enum, default_value = "long-form")]
    pub protocol: ProtocolArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Also compute semantic entropy by sampling from this model.
    #[arg(long)]
    pub semantic_model: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Limit semantic entropy to the first N samples.
    #[arg(long)]
    pub semantic_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// JSONL with `id` and `prompt` fields (a dataset file works).
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub probe: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub abstain_message: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Ansi,
    Html,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub sample_id: String,
    #[arg(long)]
    pub probe: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[arg(long, value_enum, default_value = "ansi")]
    pub format: Format,
    #[arg(long, default_value_t = render::DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[allow(clippy::large_enum_variant)]
enum Loaded {
    Model(ModelParams, String),
    Traces(Vec<spanprobe_core::trace::ActivationTrace>),
}

impl Loaded {
    fn features(&self) -> Features<'_> {
        match self {
            Loaded::Model(m, _) => Features::Model(m),
            Loaded::Traces(t) => Features::Traces(t),
        }
    }

    fn model_hash(&self) -> Option<String> {
        match self {
            Loaded::Model(_, h) => Some(h.clone()),
            Loaded::Traces(_) => None,
        }
    }
}

fn load_features(f: &FeatureArgs, samples: &[LabeledSample]) -> Result<(Loaded, PathBuf)> {
    match (&f.model, &f.traces) {
        (Some(m), _) => {
            let bytes = fsio::read(m)?;
            Ok((Loaded::Model(checkpoint::decode_model(&bytes)?, fsio::sha256_hex(&bytes)), m.clone()))
        }
        (None, Some(dir)) => Ok((Loaded::Traces(htrc::read_trace_dir(dir, samples)?), dir.clone())),
        (None, None) => Err(Error::Usage("one of --model or --traces is required".into())),
    }
}

fn load_probe_for(path: &Path, features: &Loaded) -> Result<ProbeCheckpoint> {
    let probe = checkpoint::load_probe(path)?;
    if let (Some(want), Some(have)) = (&probe.model_sha256, features.model_hash()) {
        if *want != have {
            return Err(Error::Data(format!("{} was trained on a different model checkpoint", path.display())));
        }
    }
    if probe.adapters.is_some() && !matches!(features, Loaded::Model(..)) {
        return Err(Error::Usage("a LoRA probe needs --model".into()));
    }
    Ok(probe)
}

fn write_jsonl<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Data(e.to_string()))?;
        out.push(b'\n');
    }
    fsio::write_atomic(path, &out)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.apply_seed(s);
    }
    let seed = cfg.seed();
    match cli.command {
        Command::Synth(a) => {
            let synth = SyntheticConfig { n_samples: a.n, hallucination_rate: a.hallucination_rate, seed, ..Default::default() };
            if !(0.0..=1.0).contains(&a.hallucination_rate) {
                return Err(Error::Usage("--hallucination-rate must lie in [0, 1]".into()));
            }
            save_dataset(&generate(&synth), &a.out)?;
            Manifest::new("synth", Some(seed), [("n", a.n as f64), ("hallucination_rate", a.hallucination_rate)])
                .write(&[&a.out], &manifest_path(&a.out))
        }
        Command::Split(a) => {
            let samples = load_dataset(&a.input)?;
            let (tr, te) = pipeline::split(&samples, a.test_fraction, seed)?;
            save_dataset(&tr, &a.train_out)?;
            save_dataset(&te, &a.test_out)?;
            Manifest::new("split", Some(seed), [("test_fraction", a.test_fraction)])
                .inputs(&[&a.input])?
                .write(&[&a.train_out, &a.test_out], &manifest_path(&a.train_out))
        }
        Command::InitModel(a) => {
            let mut m = cfg.model.clone();
            m.d_model = a.d_model.unwrap_or(m.d_model);
            m.n_layers = a.n_layers.unwrap_or(m.n_layers);
            m.n_heads = a.n_heads.unwrap_or(m.n_heads);
            m.d_ff = a.d_ff.unwrap_or(m.d_ff);
            m.max_seq_len = a.max_seq_len.unwrap_or(m.max_seq_len);
            let params = init_model(&m)?;
            checkpoint::save_model(&params, &a.out)?;
            Manifest::new("init-model", Some(seed), &m).write(&[&a.out], &manifest_path(&a.out))
        }
        Command::Align(a) => {
            let report = load_dataset_report(&a.input)?;
            save_dataset(&report.samples, &a.out)?;
            let rpath = a.report.unwrap_or_else(|| {
                let mut s = a.out.as_os_str().to_owned();
                s.push(".rejections.json");
                s.into()
            });
            fsio::write_atomic(&rpath, &to_json_bytes(&report))?;
            eprintln!(
                "aligned {} spans in {} samples; {} rejected, {} merged, {} bad records",
                report.n_spans,
                report.n_samples,
                report.rejected.len(),
                report.merged,
                report.issues.len()
            );
            Manifest::new("align", None, ()).inputs(&[&a.input])?.write(&[&a.out, &rpath], &manifest_path(&a.out))?;
            match report.issues.first() {
                Some(i) => Err(Error::Data(format!(
                    "{} malformed record(s) in {}; first at line {}: {}",
                    report.issues.len(),
                    a.input.display(),
                    i.line,
                    i.message
                ))),
                None => Ok(()),
            }
        }
        Command::Annotate(a) => {
            let samples = load_dataset(&a.input)?;
            let mut judge: Box<dyn Judge> = match a.mock_judge {
                Some(MockJudge::Sites) => Box::new(OracleJudge::default()),
                None => {
                    let jc = HttpJudgeConfig::from_env(a.judge_url.clone()).ok_or_else(|| {
                        Error::Usage("a judge endpoint is required (--judge-url or SPANPROBE_JUDGE_URL)".into())
                    })?;
                    Box::new(HttpJudge::new(jc))
                }
            };
            let mut out = Vec::with_capacity(samples.len());
            let mut ledger = Vec::with_capacity(samples.len());
            for s in samples {
                let (parsed, ms) = timed(|| annotate_completion(&s.prompt, &s.completion, &mut &mut *judge));
                let parsed = parsed?;
                let id = s.id.clone();
                let (labeled, rep) = attach_annotations(s, &parsed.spans);
                ledger.push(LedgerEntry {
                    sample_id: id,
                    spans_returned: parsed.spans.len() + parsed.dropped(),
                    dropped: parsed.dropped(),
                    rejected: rep.rejections.len(),
                    latency_ms: ms,
                });
                out.push(labeled);
            }
            save_dataset(&out, &a.out)?;
            if let Some(l) = &a.ledger {
                write_jsonl(&ledger, l)?;
            }
            Manifest::new("annotate", None, ()).inputs(&[&a.input])?.write(&[&a.out], &manifest_path(&a.out))
        }
        Command::InjectEval(a) => {
            let text = fsio::read_string(&a.passages)?;
            let rate = a.rate.unwrap_or(cfg.inject.rate);
            let flip_rate = a.flip_rate.unwrap_or(cfg.inject.flip_rate);
            let passages: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            let records = pipeline::inject_all(&passages, seed, rate)?;
            let (eval, flips) = match a.judge {
                InjectJudge::Oracle => (pipeline::judge_records(&records, &mut OracleJudge::new(&records))?, None),
                InjectJudge::Flip => {
                    let mut j = FlipJudge::new(&records, seed, flip_rate);
                    let e = pipeline::judge_records(&records, &mut j)?;
                    (e, Some((j.flipped_edits, j.flipped_clean)))
                }
                InjectJudge::Http => {
                    let jc = HttpJudgeConfig::from_env(a.judge_url.clone()).ok_or_else(|| {
                        Error::Usage("a judge endpoint is required (--judge-url or SPANPROBE_JUDGE_URL)".into())
                    })?;
                    (pipeline::judge_records(&records, &mut HttpJudge::new(jc))?, None)
                }
            };
            #[derive(Serialize)]
            struct Report {
                passages: usize,
                rate: f64,
                eval: PipelineEval,
                flipped_edits: Option<usize>,
                flipped_clean: Option<usize>,
            }
            let rep = Report { passages: records.len(), rate, eval, flipped_edits: flips.map(|f| f.0), flipped_clean: flips.map(|f| f.1) };
            fsio::write_atomic(&a.out, &to_json_bytes(&rep))?;
            let mut outs: Vec<&Path> = vec![&a.out];
            if let Some(r) = &a.records {
                write_jsonl::<InjectionRecord>(&records, r)?;
                outs.push(r);
            }
            Manifest::new("inject-eval", Some(seed), [("rate", rate), ("flip_rate", flip_rate)])
                .inputs(&[&a.passages])?
                .write(&outs, &manifest_path(&a.out))
        }
        Command::Trace(a) => {
            let samples = load_dataset(&a.data)?;
            let model = checkpoint::load_model(&a.model)?;
            let layer = a.layer.unwrap_or_else(|| model.config.probe_layer());
            let traces = pipeline::export_traces(&model, &samples, layer)?;
            htrc::write_trace_dir(&a.out_dir, &traces)?;
            let mut outs: Vec<&Path> = vec![&a.out_dir];
            if let Some(j) = &a.jsonl {
                htrc::write_trace_jsonl(&traces, j)?;
                outs.push(j);
            }
            Manifest::new("trace", None, [("layer", layer)])
                .inputs(&[&a.data, &a.model])?
                .write(&outs, &manifest_path(&a.out_dir))
        }
        Command::Train(a) => {
            let samples = load_dataset(&a.data)?;
            let mut t = cfg.train.clone();
            if let Some(v) = a.lambda_reg {
                t.lambda_reg = v;
            }
            if let Some(r) = a.regularizer {
                t.regularizer = match r {
                    RegArg::None => Regularizer::None,
                    RegArg::Lm => Regularizer::Lm,
                    RegArg::Kl => Regularizer::Kl,
                };
            }
            t.steps = a.steps.unwrap_or(t.steps);
            t.batch_size = a.batch_size.unwrap_or(t.batch_size);
            t.learning_rate = a.lr.unwrap_or(t.learning_rate);
            t.adapter_learning_rate = a.adapter_lr.unwrap_or(t.adapter_learning_rate);
            t.alpha = a.alpha.unwrap_or(t.alpha);
            if a.layer.is_some() {
                t.probe_layer = a.layer;
            }
            if let Some(o) = a.optimizer {
                t.optimizer = match o {
                    OptArg::Sgd => OptimizerKind::Sgd,
                    OptArg::Momentum => OptimizerKind::Momentum { beta: 0.9 },
                    OptArg::Adam => OptimizerKind::adam(),
                };
            }
            if a.lora && t.lora.is_none() {
                t.lora = Some(LoraConfig::default());
            }
            if let (Some(r), Some(l)) = (a.rank, t.lora.as_mut()) {
                l.rank = r;
            }
            t.validate()?;
            let (features, fpath) = load_features(&a.features, &samples)?;
            let val = match &a.val {
                Some(p) => Some(load_dataset(p)?),
                None => None,
            };
            let val_features = match (&val, &features) {
                (Some(v), Loaded::Traces(_)) => Some(Loaded::Traces(htrc::read_trace_dir(
                    a.features.traces.as_ref().expect("traces given"),
                    v,
                )?)),
                _ => None,
            };
            let validation = val.as_deref().map(|v| {
                let f = val_features.as_ref().map(Loaded::features).unwrap_or_else(|| features.features());
                (v, f)
            });
            let out = train(&samples, features.features(), &t, validation)?;
            let ck = ProbeCheckpoint { head: out.head, adapters: out.adapters, model_sha256: features.model_hash() };
            checkpoint::save_probe(&ck, &a.out)?;
            let mut outs: Vec<&Path> = vec![&a.out];
            if let Some(r) = &a.report {
                fsio::write_atomic(r, &to_json_bytes(&out.report))?;
                outs.push(r);
            }
            let first = out.report.total_loss.first().copied().unwrap_or(f64::NAN);
            let last = out.report.total_loss.last().copied().unwrap_or(f64::NAN);
            eprintln!("trained {} steps; loss {first:.4} -> {last:.4}", t.steps);
            let mut inputs: Vec<&Path> = vec![&a.data, &fpath];
            if let Some(v) = &a.val {
                inputs.push(v);
            }
            Manifest::new("train", Some(t.seed), &t).inputs(&inputs)?.write(&outs, &manifest_path(&a.out))
        }
        Command::Score(a) => {
            let samples = load_dataset(&a.data)?;
            let (features, fpath) = load_features(&a.features, &samples)?;
            let probe = load_probe_for(&a.probe, &features)?;
            let rows = pipeline::score(&probe, &features.features(), &samples, a.protocol.into(), &a.method)?;
            write_scores(&rows, &a.out)?;
            Manifest::new("score", None, [("method", &a.method)])
                .inputs(&[&a.data, &a.probe, &fpath])?
                .write(&[&a.out], &manifest_path(&a.out))
        }
        Command::Eval(a) => {
            let paths: Vec<&Path> = a.scores.iter().map(PathBuf::as_path).collect();
            let report = eval_report(&paths)?;
            fsio::write_atomic(&a.out, &to_json_bytes(&report))?;
            for (m, r) in &report.methods {
                eprintln!("{m}: auc {:.4}  recall@fpr0.1 {:.4}  ({} pos / {} neg)", r.auc, r.recall_at_fpr_0_1, r.n_pos, r.n_neg);
            }
            Manifest::new("eval", None, ()).inputs(&paths)?.write(&[&a.out], &manifest_path(&a.out))
        }
        Command::Baselines(a) => {
            let samples = load_dataset(&a.data)?;
            let traces = htrc::read_trace_dir(&a.traces, &samples)?;
            let protocol: Protocol = a.protocol.into();
            let mut rows = pipeline::token_baselines(&samples, &traces, protocol)?;
            let mut inputs: Vec<&Path> = vec![&a.data, &a.traces];
            if let Some(mp) = &a.semantic_model {
                let model = checkpoint::load_model(mp)?;
                let k = a.k.unwrap_or(cfg.baselines.k);
                let temperature = a.temperature.unwrap_or(cfg.baselines.temperature);
                let limit = a.semantic_limit.unwrap_or(samples.len()).min(samples.len());
                rows.extend(pipeline::semantic_baseline(&model, &samples[..limit], protocol, k, temperature, seed)?);
                inputs.push(mp);
            }
            write_scores(&rows, &a.out)?;
            Manifest::new("baselines", Some(seed), &cfg.baselines).inputs(&inputs)?.write(&[&a.out], &manifest_path(&a.out))
        }
        Command::Monitor(a) => {
            let prompts = pipeline::load_prompts(&a.prompts)?;
            let model = checkpoint::load_model(&a.model)?;
            let features = Loaded::Model(model, fsio::sha256_file(&a.model)?);
            let probe = load_probe_for(&a.probe, &features)?;
            let Loaded::Model(model, _) = features else { unreachable!() };
            let mut m = cfg.monitor.clone();
            m.threshold = a.threshold.unwrap_or(m.threshold);
            m.max_new_tokens = a.max_new_tokens.unwrap_or(m.max_new_tokens);
            m.temperature = a.temperature.unwrap_or(m.temperature);
            if let Some(msg) = &a.abstain_message {
                m.abstain_message = msg.clone();
            }
            m.validate()?;
            #[derive(Serialize)]
            struct Row {
                prompt_id: String,
                status: MonitorStatus,
                trigger_index: Option<usize>,
                score: Option<f64>,
                max_score: Option<f64>,
                output_text: String,
            }
            let mut rows = Vec::with_capacity(prompts.len());
            for (id, prompt) in &prompts {
                let tokens = pipeline::prompt_tokens(prompt);
                let out = run_monitored(&model, &probe.head, probe.adapters.as_ref(), &tokens, &m)?;
                rows.push(Row {
                    prompt_id: id.clone(),
                    status: out.status,
                    trigger_index: out.trigger_index,
                    score: out.trigger_score,
                    max_score: out.scores.iter().copied().reduce(f64::max),
                    output_text: out.output_text,
                });
            }
            write_jsonl(&rows, &a.out)?;
            let abstained = rows.iter().filter(|r| r.status == MonitorStatus::Abstained).count();
            eprintln!("{abstained} of {} generations abstained at t = {}", rows.len(), m.threshold);
            Manifest::new("monitor", Some(m.seed), &m)
                .inputs(&[&a.prompts, &a.model, &a.probe])?
                .write(&[&a.out], &manifest_path(&a.out))
        }
        Command::Render(a) => {
            let samples = load_dataset(&a.data)?;
            let idx = samples
                .iter()
                .position(|s| s.id == a.sample_id)
                .ok_or_else(|| Error::Data(format!("no sample {:?} in {}", a.sample_id, a.data.display())))?;
            let (features, _) = load_features(&a.features, &samples)?;
            let probe = load_probe_for(&a.probe, &features)?;
            let scores = spanprobe_core::probe::score_sample(
                &probe.head,
                probe.adapters.as_ref(),
                &features.features(),
                idx,
                &samples[idx],
            )?;
            let text = match a.format {
                Format::Ansi => render::render_ansi(&samples[idx], &scores, a.floor) + "\n",
                Format::Html => render::render_html(&samples[idx], &scores, a.floor),
            };
            match &a.out {
                Some(p) => fsio::write_atomic(p, text.as_bytes()),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Data(e.to_string())),
            }
        }
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spanprobe: {e}");
            e.exit_code()
        }
    }
}
