//! Command-line surface: `parse`, `train-bpe`, `pretrain`, `eval-search`,
//! `eval-clone`, `inspect-batch`. Every command writes a
//! `<command>.manifest.json` into its output directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::assembly::ModalTriple;
use crate::corpus::{load_corpus, reserved_kinds, to_triples, train_vocab, Example};
use crate::encoder::{Checkpoint, Encoder, EncoderConfig};
use crate::error::Error;
use crate::evaluation::{clone_search, code_search, Similarity};
use crate::objectives::Reduction;
use crate::syntax::parse;
use crate::tokenizer::Vocab;
use crate::training::{TrainConfig, Trainer};

pub const OUT_DIR_ENV: &str = "CODEMODAL_OUT_DIR";
pub const THREADS_ENV: &str = "CODEMODAL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "codemodal", version, about = "Multi-modal code representation pre-training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Directory for outputs and the run manifest.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads for embedding extraction.
    #[arg(long, env = THREADS_ENV, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct ModelInputs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimilarityArg {
    Dot,
    Cosine,
}

impl From<SimilarityArg> for Similarity {
    fn from(s: SimilarityArg) -> Self {
        match s {
            SimilarityArg::Dot => Similarity::Dot,
            SimilarityArg::Cosine => Similarity::Cosine,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainOverrides {
    /// TOML file with `[encoder]` and `[train]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the parameter-norm penalty.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Objectives to switch off, e.g. `--disable tep,ip`.
    #[arg(long, value_delimiter = ',')]
    pub disable: Vec<String>,
    /// Sum (rather than average) the per-token and per-pair loss terms.
    #[arg(long)]
    pub paper_literal: bool,
    #[arg(long)]
    pub tep_full_pairs: bool,
    #[arg(long)]
    pub warmup_steps: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a mini-language file and print its AST as JSON.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the AST here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a BPE vocabulary over a corpus' comments and code tokens.
    TrainBpe {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 8000)]
        size: usize,
        /// Vocabulary path; defaults to `<out-dir>/vocab.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Pre-train an encoder; writes checkpoints and a JSONL loss log.
    Pretrain {
        #[command(flatten)]
        inputs: ModelInputs,
        #[command(flatten)]
        train: TrainOverrides,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Comment-to-code search; prints an MRR report.
    EvalSearch {
        #[command(flatten)]
        inputs: ModelInputs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        similarity: SimilarityArg,
        #[command(flatten)]
        common: Common,
    },
    /// Clone retrieval over `cluster_id` groups; prints a MAP@R report.
    EvalClone {
        #[command(flatten)]
        inputs: ModelInputs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        similarity: SimilarityArg,
        #[command(flatten)]
        common: Common,
    },
    /// Dump one assembled training batch with all labels.
    InspectBatch {
        #[command(flatten)]
        inputs: ModelInputs,
        #[command(flatten)]
        train: TrainOverrides,
        #[arg(long, default_value_t = 0)]
        step: u64,
        #[command(flatten)]
        common: Common,
    },
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> crate::Result<Self> {
        toml::from_str(text).map_err(|e| {
            let detail = e.message().to_string();
            let field = e
                .span()
                .and_then(|span| key_path_at(text, span.start))
                .or_else(|| detail.split('`').nth(1).map(str::to_string))
                .unwrap_or_else(|| "config".into());
            Error::Config { field, detail }
        })
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { field, detail } => Error::Config { field, detail: format!("{}: {detail}", path.display()) },
            other => other,
        })
    }
}

/// Dotted `table.key` path of the assignment on the line containing `offset`.
fn key_path_at(text: &str, offset: usize) -> Option<String> {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let key = line.split_once('=')?.0.trim().trim_matches('"');
    let table = text[..start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim());
    Some(match table {
        Some(t) if !t.is_empty() => format!("{t}.{key}"),
        _ => key.to_string(),
    })
}

impl TrainOverrides {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut rc = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let t = &mut rc.train;
        if let Some(v) = self.steps {
            t.steps = v;
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.lambda {
            t.l2_lambda = v;
        }
        for name in &self.disable {
            t.objectives.disable(name.trim())?;
        }
        if self.paper_literal {
            t.reduction = Reduction::Sum;
        }
        if self.tep_full_pairs {
            t.tep_full_pairs = true;
        }
        if let Some(v) = self.warmup_steps {
            t.warmup_steps = v;
        }
        if let Some(v) = self.checkpoint_every {
            t.checkpoint_every = v;
        }
        t.validate()?;
        Ok(rc)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

/// Paths written so far; removed on drop unless committed.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf(), written: Vec::new(), committed: false })
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> anyhow::Result<()> {
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.track(path);
        Ok(())
    }

    fn track(&mut self, path: PathBuf) {
        if !self.written.contains(&path) {
            self.written.push(path);
        }
    }

    fn finish(mut self, mut manifest: RunManifest) -> anyhow::Result<()> {
        manifest.outputs = self.written.iter().map(|p| p.display().to_string()).collect();
        let path = self.dir.join(format!("{}.manifest.json", manifest.command));
        let json = serde_json::to_string_pretty(&manifest)? + "\n";
        self.write(path, json.as_bytes())?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn manifest(command: &str, seed: Option<u64>, config: serde_json::Value, inputs: &[&Path]) -> RunManifest {
    RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: Vec::new(),
    }
}

fn load_model_inputs(inputs: &ModelInputs) -> anyhow::Result<(Vec<Example>, Vocab, Vec<ModalTriple>)> {
    let examples = load_corpus(&inputs.corpus)?;
    let vocab = Vocab::load(&inputs.vocab).with_context(|| format!("loading {}", inputs.vocab.display()))?;
    let triples = to_triples(&examples, &vocab)?;
    Ok((examples, vocab, triples))
}

fn load_checkpoint(path: &Path, vocab: &Vocab) -> anyhow::Result<Encoder> {
    let ck = Checkpoint::load(path)?;
    if ck.encoder.vocab_size != vocab.len() {
        bail!(Error::Checkpoint(format!(
            "checkpoint vocab size {} does not match vocabulary ({})",
            ck.encoder.vocab_size,
            vocab.len()
        )));
    }
    Ok(ck.to_encoder()?)
}

/// Runs one command, printing results to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli.command, stdout)
}

pub fn execute(command: Command, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Parse { input, out, common } => {
            let src = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let tree = parse(&src)?;
            let json = serde_json::to_string_pretty(&tree.to_json())? + "\n";
            let mut outs = Outputs::new(&common.out_dir)?;
            match out {
                Some(p) => outs.write(p, json.as_bytes())?,
                None => stdout.write_all(json.as_bytes())?,
            }
            outs.finish(manifest("parse", None, serde_json::Value::Null, &[&input]))
        }
        Command::TrainBpe { corpus, size, out, common } => {
            let examples = load_corpus(&corpus)?;
            let vocab = train_vocab(&examples, size)?;
            let mut outs = Outputs::new(&common.out_dir)?;
            let path = out.unwrap_or_else(|| common.out_dir.join("vocab.txt"));
            outs.write(path.clone(), vocab.to_file_string().as_bytes())?;
            writeln!(
                stdout,
                "trained {} tokens ({} reserved, {} kinds) -> {}",
                vocab.len(),
                vocab.num_reserved(),
                reserved_kinds(&examples).len(),
                path.display()
            )?;
            let config = serde_json::json!({ "size": size });
            outs.finish(manifest("train-bpe", None, config, &[&corpus]))
        }
        Command::Pretrain { inputs, train, resume, common } => pretrain(inputs, train, resume, common, stdout),
        Command::EvalSearch { inputs, checkpoint, similarity, common } => {
            let (_, vocab, triples) = load_model_inputs(&inputs)?;
            let model = load_checkpoint(&checkpoint, &vocab)?;
            let budgets = train_budgets(&checkpoint)?;
            let report = code_search(&model, &triples, &budgets, similarity.into(), common.threads)?;
            emit_report("eval-search", &report, &inputs, &checkpoint, &common, stdout)
        }
        Command::EvalClone { inputs, checkpoint, similarity, common } => {
            let (examples, vocab, triples) = load_model_inputs(&inputs)?;
            let clusters = examples
                .iter()
                .enumerate()
                .map(|(i, e)| e.cluster_id.ok_or_else(|| Error::Corpus(format!("record {} has no cluster_id", i + 1))))
                .collect::<crate::Result<Vec<_>>>()?;
            let model = load_checkpoint(&checkpoint, &vocab)?;
            let budgets = train_budgets(&checkpoint)?;
            let report = clone_search(&model, &triples, &clusters, &budgets, similarity.into(), common.threads)?;
            emit_report("eval-clone", &report, &inputs, &checkpoint, &common, stdout)
        }
        Command::InspectBatch { inputs, train, step, common } => {
            let rc = train.resolve()?;
            let (_, vocab, triples) = load_model_inputs(&inputs)?;
            let mut enc = rc.encoder.clone();
            enc.vocab_size = vocab.len();
            let model = Encoder::init(enc, rc.train.seed)?;
            let mut trainer = Trainer::new(model, triples, rc.train.clone())?;
            let batch = trainer.plan(step)?;
            let mut value = serde_json::to_value(&batch)?;
            if let Some(list) = value.get_mut("examples").and_then(|v| v.as_array_mut()) {
                for (ex, planned) in list.iter_mut().zip(&batch.examples) {
                    let show = |ids: &[u32]| -> Vec<String> {
                        ids.iter().map(|&i| vocab.token(i).unwrap_or("?").to_string()).collect()
                    };
                    ex["tokens"] = serde_json::json!(show(&planned.packed.ids));
                    ex["input_tokens"] = serde_json::json!(show(&planned.input.ids));
                }
            }
            let json = serde_json::to_string_pretty(&value)? + "\n";
            stdout.write_all(json.as_bytes())?;
            let mut outs = Outputs::new(&common.out_dir)?;
            outs.write(common.out_dir.join("batch.json"), json.as_bytes())?;
            let cfg = serde_json::to_value(&rc)?;
            outs.finish(manifest("inspect-batch", Some(rc.train.seed), cfg, &[&inputs.corpus, &inputs.vocab]))
        }
    }
}

/// Budgets recorded in a checkpoint's training metadata, or the defaults.
fn train_budgets(checkpoint: &Path) -> anyhow::Result<crate::assembly::Budgets> {
    let ck = Checkpoint::load(checkpoint)?;
    Ok(ck
        .meta
        .get("train")
        .and_then(|t| serde_json::from_value::<TrainConfig>(t.clone()).ok())
        .map(|t| t.budgets)
        .unwrap_or_default())
}

fn emit_report(
    command: &str,
    report: &crate::evaluation::MetricReport,
    inputs: &ModelInputs,
    checkpoint: &Path,
    common: &Common,
    stdout: &mut dyn Write,
) -> anyhow::Result<()> {
    let json = serde_json::to_string(report)? + "\n";
    stdout.write_all(json.as_bytes())?;
    let mut outs = Outputs::new(&common.out_dir)?;
    outs.write(common.out_dir.join(format!("{command}.json")), json.as_bytes())?;
    outs.finish(manifest(command, None, serde_json::Value::Null, &[&inputs.corpus, &inputs.vocab, checkpoint]))
}

fn pretrain(
    inputs: ModelInputs,
    train: TrainOverrides,
    resume: Option<PathBuf>,
    common: Common,
    stdout: &mut dyn Write,
) -> anyhow::Result<()> {
    let rc = train.resolve()?;
    let (_, vocab, triples) = load_model_inputs(&inputs)?;
    let mut enc = rc.encoder.clone();
    enc.vocab_size = vocab.len();
    enc.validate()?;
    let mut trainer = match &resume {
        Some(p) => Trainer::resume(&Checkpoint::load(p)?, enc.clone(), triples, rc.train.clone())?,
        None => Trainer::new(Encoder::init(enc.clone(), rc.train.seed)?, triples, rc.train.clone())?,
    };

    let mut outs = Outputs::new(&common.out_dir)?;
    let log_path = common.out_dir.join("losses.jsonl");
    let mut log = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(resume.is_some())
            .write(true)
            .truncate(resume.is_none())
            .open(&log_path)
            .with_context(|| format!("opening {}", log_path.display()))?,
    );
    if resume.is_none() {
        outs.track(log_path.clone());
    }
    let every = rc.train.checkpoint_every;
    let dir = common.out_dir.clone();
    let end = rc.train.steps;
    let remaining = end.saturating_sub(trainer.step);
    trainer.run(remaining, |t, r| {
        serde_json::to_writer(&mut log, r)?;
        log.write_all(b"\n")?;
        if every > 0 && t.step % every == 0 && t.step < end {
            let p = dir.join(format!("checkpoint-step{}.ckpt", t.step));
            t.checkpoint().save(&p)?;
            outs.track(p);
        }
        Ok(())
    })?;
    log.flush()?;
    drop(log);

    let final_path = common.out_dir.join("checkpoint.ckpt");
    trainer.checkpoint().save(&final_path)?;
    outs.track(final_path.clone());
    writeln!(
        stdout,
        "trained to step {} with objectives [{}] -> {}",
        trainer.step,
        rc.train.objectives.active().join(", "),
        final_path.display()
    )?;

    let mut cfg = serde_json::to_value(RunConfig { encoder: enc, train: rc.train.clone() })?;
    cfg["active_objectives"] = serde_json::json!(rc.train.objectives.active());
    let mut ins: Vec<&Path> = vec![&inputs.corpus, &inputs.vocab];
    if let Some(r) = &resume {
        ins.push(r);
    }
    outs.finish(manifest("pretrain", Some(rc.train.seed), cfg, &ins))
}

/// Entry point for the binary: returns the process exit code.
pub fn main_entry() -> i32 {
    let mut stdout = std::io::stdout().lock();
    match run(std::env::args_os(), &mut stdout) {
        Ok(()) => 0,
        Err(e) => match e.downcast_ref::<clap::Error>() {
            Some(ce) => {
                let _ = ce.print();
                ce.exit_code()
            }
            None => {
                eprintln!("error: {e:#}");
                1
            }
        },
    }
}
