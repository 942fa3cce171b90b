use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{SchemeMix, TrainConfig};
use crate::assembly::{pack, ModalTriple, PackedInput};
use crate::encoder::Encoder;
use crate::error::Result;
use crate::numcore::{Graph, Var};
use crate::objectives::{
    build_contrastive_batch, loss_ip_logits, loss_mcl, loss_mmlm, loss_tep, paired_scheme_for_epoch, plan_mmlm,
    plan_tep, ContrastiveBatch, MaskPlan, PairingScheme, TepPlan,
};
use crate::seed::{self, tag};
use crate::tokenizer::TokenId;

/// Everything planned for one example of a batch.
#[derive(Debug, Clone, Serialize)]
pub struct PlannedExample {
    pub packed: PackedInput,
    pub mask: Option<MaskPlan>,
    /// The model input: `packed` with the mask plan applied.
    pub input: PackedInput,
    pub tep: TepPlan,
}

/// One assembled pre-training batch with all objective labels.
#[derive(Debug, Clone, Serialize)]
pub struct PretrainBatch {
    pub epoch: u64,
    pub step: u64,
    pub examples: Vec<PlannedExample>,
    pub contrastive: Option<ContrastiveBatch>,
}

fn paired_scheme(mix: SchemeMix, epoch: u64) -> PairingScheme {
    match mix {
        SchemeMix::Alternate => paired_scheme_for_epoch(epoch),
        SchemeMix::NlVsPlast => PairingScheme::NlVsPlast,
        SchemeMix::TripleVsSwapped => PairingScheme::TripleVsSwapped,
    }
}

/// Builds mask, edge, and contrastive plans. Every random draw is keyed by
/// `(cfg.seed, step, example index)`.
pub fn plan_batch(
    triples: &[&ModalTriple],
    cfg: &TrainConfig,
    vocab_size: usize,
    epoch: u64,
    step: u64,
) -> Result<PretrainBatch> {
    let on = cfg.objectives;
    let examples = triples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let packed = pack(t, &cfg.budgets)?;
            let i = i as u64;
            let mask = if on.mmlm {
                Some(plan_mmlm(&packed, vocab_size, seed::derive(cfg.seed, &[tag::MASK, step, i]))?)
            } else {
                None
            };
            let input = mask.as_ref().map_or_else(|| packed.clone(), |m| m.masked(&packed));
            let tep = if on.tep {
                plan_tep(
                    &packed,
                    seed::derive(cfg.seed, &[tag::TEP, step, i]),
                    cfg.tep_negatives_per_positive,
                    cfg.tep_full_pairs,
                )
            } else {
                TepPlan::default()
            };
            Ok(PlannedExample { packed, mask, input, tep })
        })
        .collect::<Result<Vec<_>>>()?;
    let contrastive = if on.mcl {
        Some(build_contrastive_batch(
            triples,
            &cfg.budgets,
            paired_scheme(cfg.scheme_mix, epoch),
            vocab_size,
            seed::derive(cfg.seed, &[tag::CONTRASTIVE, step]),
        )?)
    } else {
        None
    };
    Ok(PretrainBatch { epoch, step, examples, contrastive })
}

/// Graph nodes of each loss term; disabled or empty terms are `None`.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub mmlm: Option<Var>,
    pub ip: Option<Var>,
    pub tep: Option<Var>,
    pub mcl: Option<Var>,
    pub l2: Option<Var>,
    pub total: Var,
}

impl PretrainBatch {
    /// Records the full objective in `g`: one forward pass over the masked
    /// inputs for MMLM, IP and TEP, one over anchors and positives for MCL,
    /// plus the `λ‖Θ‖²` penalty.
    pub fn losses(
        &self,
        g: &mut Graph,
        model: &Encoder,
        cfg: &TrainConfig,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<LossTerms> {
        let on = cfg.objectives;
        let red = cfg.reduction;
        let (mut mmlm, mut ip, mut tep, mut mcl, mut l2) = (None, None, None, None, None);
        if on.mmlm || on.ip || on.tep {
            let seqs: Vec<&[TokenId]> = self.examples.iter().map(|e| e.input.ids.as_slice()).collect();
            let out = model.forward(g, &seqs, dropout.as_deref_mut())?;
            if on.mmlm {
                let mut rows = Vec::new();
                let mut labels = Vec::new();
                for (s, e) in self.examples.iter().enumerate() {
                    if let Some(m) = &e.mask {
                        rows.extend(m.positions.iter().map(|&p| out.row(s, p)));
                        labels.extend_from_slice(&m.labels);
                    }
                }
                let h = g.gather_rows(out.hidden, &rows)?;
                let logits = model.mlm_logits(g, h)?;
                mmlm = Some(loss_mmlm(g, logits, &labels, red)?);
            }
            if on.ip {
                let mut rows = Vec::new();
                let mut labels = Vec::new();
                for (s, e) in self.examples.iter().enumerate() {
                    rows.extend(e.input.pl_positions.iter().map(|&p| out.row(s, p)));
                    labels.extend_from_slice(&e.input.identifier_labels);
                }
                let h = g.gather_rows(out.hidden, &rows)?;
                let logits = model.ip_logits(g, h)?;
                ip = Some(loss_ip_logits(g, logits, &labels, red)?);
            }
            if on.tep {
                let mut plan = TepPlan::default();
                for (s, e) in self.examples.iter().enumerate() {
                    plan.extend(e.tep.offset(out.offsets[s]));
                }
                if !plan.is_empty() {
                    tep = Some(loss_tep(g, out.hidden, &plan, red)?);
                }
            }
        }
        if let Some(cb) = &self.contrastive {
            let seqs: Vec<&[TokenId]> = cb.inputs().iter().map(|p| p.ids.as_slice()).collect();
            let v = model.embed_sequences(g, &seqs, dropout)?;
            let n = cb.len();
            let cols = g.shape(v)[1];
            let anchors = g.slice(v, 0, n, 0, cols)?;
            let positives = g.slice(v, n, n, 0, cols)?;
            mcl = Some(loss_mcl(g, anchors, positives)?);
        }
        if cfg.l2_lambda > 0.0 {
            let all: Vec<Var> = model.params.ids().map(|id| g.param(&model.params, id)).collect();
            let sq = g.sum_squares(&all);
            l2 = Some(g.scale(sq, cfg.l2_lambda));
        }
        let parts: Vec<Var> = [mmlm, ip, tep, mcl, l2].into_iter().flatten().collect();
        let mut total = match parts.first() {
            Some(&v) => v,
            None => g.input(crate::numcore::Tensor::scalar(0.0)),
        };
        for &p in &parts[1.min(parts.len())..] {
            total = g.add(total, p)?;
        }
        Ok(LossTerms { mmlm, ip, tep, mcl, l2, total })
    }
}
