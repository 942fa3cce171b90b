use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::batch::{plan_batch, PretrainBatch};
use super::config::TrainConfig;
use crate::assembly::ModalTriple;
use crate::encoder::{Checkpoint, Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::numcore::{adam_step, AdamState, Graph};
use crate::seed::{self, tag};

/// Per-step losses. Disabled objectives report exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub step: u64,
    pub epoch: u64,
    pub mmlm: f64,
    pub ip: f64,
    pub tep: f64,
    pub mcl: f64,
    /// `λ‖Θ‖²`.
    pub l2: f64,
    pub total: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub learning_rate: f64,
}

/// Splits example indices into batches for one epoch. Paired and unpaired
/// examples are shuffled and batched separately, then the batches are
/// interleaved. With `min_size` 2, a lone leftover joins the previous batch.
pub fn epoch_batches(
    paired: &[usize],
    unpaired: &[usize],
    batch_size: usize,
    min_size: usize,
    seed: u64,
    epoch: u64,
) -> Vec<Vec<usize>> {
    let mut rng = seed::rng(seed::derive(seed, &[tag::SCHEDULE, epoch]));
    let mut batches = Vec::new();
    for group in [paired, unpaired] {
        let mut idx = group.to_vec();
        idx.shuffle(&mut rng);
        let mut chunks: Vec<Vec<usize>> = idx.chunks(batch_size).map(<[usize]>::to_vec).collect();
        if chunks.len() > 1 && chunks.last().is_some_and(|c| c.len() < min_size) {
            let tail = chunks.pop().unwrap();
            chunks.last_mut().unwrap().extend(tail);
        }
        batches.extend(chunks);
    }
    batches.shuffle(&mut rng);
    batches
}

pub struct Trainer {
    pub model: Encoder,
    pub optimizer: AdamState,
    pub config: TrainConfig,
    /// Steps completed.
    pub step: u64,
    triples: Vec<ModalTriple>,
    paired: Vec<usize>,
    unpaired: Vec<usize>,
    cached: Option<(u64, Vec<Vec<usize>>)>,
}

impl Trainer {
    pub fn new(model: Encoder, triples: Vec<ModalTriple>, config: TrainConfig) -> Result<Self> {
        let optimizer = AdamState::new(config.adam(), &model.params);
        Self::assemble(model, optimizer, 0, triples, config)
    }

    /// Continues from a checkpoint. The stored parameters must fit
    /// `encoder`; the stored step and optimizer moments are restored.
    pub fn resume(
        checkpoint: &Checkpoint,
        encoder: EncoderConfig,
        triples: Vec<ModalTriple>,
        config: TrainConfig,
    ) -> Result<Self> {
        let model = Encoder::from_params(encoder, checkpoint.params.clone())?;
        let mut optimizer = checkpoint
            .optimizer
            .clone()
            .ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state".into()))?;
        optimizer.config = config.adam();
        Self::assemble(model, optimizer, checkpoint.step, triples, config)
    }

    fn assemble(
        model: Encoder,
        optimizer: AdamState,
        step: u64,
        triples: Vec<ModalTriple>,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if triples.is_empty() {
            return Err(Error::Corpus("training corpus is empty".into()));
        }
        let need = config.budgets.max_packed_len();
        if model.config.max_positions < need {
            return Err(Error::config(
                "encoder.max_positions",
                format!("{} is below the longest packed input ({need})", model.config.max_positions),
            ));
        }
        let vocab = model.config.vocab_size;
        for t in &triples {
            t.validate()?;
            let max = t.nl.iter().flatten().chain(&t.pl).chain(&t.ast).copied().max().unwrap_or(0);
            if max as usize >= vocab {
                return Err(Error::Index { what: "token id in training example", index: max as usize, bound: vocab });
            }
        }
        let (paired, unpaired): (Vec<usize>, Vec<usize>) = (0..triples.len()).partition(|&i| triples[i].is_paired());
        if config.objectives.mcl {
            for (name, g) in [("paired", &paired), ("unpaired", &unpaired)] {
                if g.len() == 1 {
                    return Err(Error::Corpus(format!(
                        "contrastive learning needs at least 2 {name} examples, found 1"
                    )));
                }
            }
        }
        Ok(Trainer { model, optimizer, config, step, triples, paired, unpaired, cached: None })
    }

    fn min_batch(&self) -> usize {
        if self.config.objectives.mcl {
            2
        } else {
            1
        }
    }

    pub fn batches_per_epoch(&self) -> u64 {
        epoch_batches(&self.paired, &self.unpaired, self.config.batch_size, self.min_batch(), 0, 0).len() as u64
    }

    /// Example indices of the batch used at `step`. The corpus cycles with a
    /// fresh shuffle each epoch.
    pub fn batch_indices(&mut self, step: u64) -> (u64, Vec<usize>) {
        let per = self.batches_per_epoch();
        let epoch = step / per;
        if self.cached.as_ref().map(|c| c.0) != Some(epoch) {
            let b = epoch_batches(
                &self.paired,
                &self.unpaired,
                self.config.batch_size,
                self.min_batch(),
                self.config.seed,
                epoch,
            );
            self.cached = Some((epoch, b));
        }
        let idx = self.cached.as_ref().unwrap().1[(step % per) as usize].clone();
        (epoch, idx)
    }

    pub fn plan(&mut self, step: u64) -> Result<PretrainBatch> {
        let (epoch, idx) = self.batch_indices(step);
        let batch: Vec<&ModalTriple> = idx.iter().map(|&i| &self.triples[i]).collect();
        plan_batch(&batch, &self.config, self.model.config.vocab_size, epoch, step)
    }

    /// One optimizer step.
    pub fn train_step(&mut self) -> Result<LossReport> {
        let step = self.step;
        let batch = self.plan(step)?;
        let mut g = Graph::new();
        let mut drop_rng = seed::rng(seed::derive(self.config.seed, &[tag::DROPOUT, step]));
        let terms = batch.losses(&mut g, &self.model, &self.config, Some(&mut drop_rng))?;
        let value = |v: Option<crate::numcore::Var>| v.map_or(0.0, |v| g.value(v).item());
        let [mmlm, ip, tep, mcl, l2] = [terms.mmlm, terms.ip, terms.tep, terms.mcl, terms.l2].map(value);
        let total = g.value(terms.total).item();
        if !total.is_finite() {
            return Err(Error::Contract(format!("non-finite loss at step {step}")));
        }
        g.backward(terms.total)?;
        self.model.params.zero_grad();
        self.model.params.accumulate_grads(&g);
        let grad_norm = if self.config.max_grad_norm > 0.0 {
            self.model.params.clip_grad_norm(self.config.max_grad_norm)
        } else {
            self.model.params.grad_norm()
        };
        let lr = self.config.learning_rate_at(step);
        adam_step(&mut self.model.params, &mut self.optimizer, lr)?;
        let report =
            LossReport { step, epoch: batch.epoch, mmlm, ip, tep, mcl, l2, total, grad_norm, learning_rate: lr };
        self.step += 1;
        Ok(report)
    }

    /// Runs `steps` more steps, passing each report to `on_report`.
    pub fn run<F>(&mut self, steps: u64, mut on_report: F) -> Result<Vec<LossReport>>
    where
        F: FnMut(&Trainer, &LossReport) -> Result<()>,
    {
        let mut out = Vec::with_capacity(steps as usize);
        for _ in 0..steps {
            let r = self.train_step()?;
            on_report(self, &r)?;
            out.push(r);
        }
        Ok(out)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::from_encoder(&self.model, Some(&self.optimizer), self.step);
        ck.meta = serde_json::json!({ "train": self.config });
        ck
    }
}
