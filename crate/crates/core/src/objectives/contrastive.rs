use serde::{Deserialize, Serialize};

use crate::assembly::{pack, pack_layout, swap_pl_ast, Budgets, Layout, ModalTriple, PackedInput};
use crate::error::{Error, Result};
use crate::objectives::plan_mmlm;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PairingScheme {
    /// Comment alone vs. code and AST, both unmasked.
    NlVsPlast,
    /// Full triple vs. the same triple with code and AST swapped; each side
    /// masked with its own seed.
    TripleVsSwapped,
    /// Unpaired version of the above.
    PairVsSwapped,
}

/// Paired examples alternate schemes by epoch parity.
pub fn paired_scheme_for_epoch(epoch: u64) -> PairingScheme {
    if epoch.is_multiple_of(2) {
        PairingScheme::NlVsPlast
    } else {
        PairingScheme::TripleVsSwapped
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub scheme: PairingScheme,
    pub anchor: PackedInput,
    pub positive: PackedInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Member {
    Anchor(usize),
    Positive(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastiveBatch {
    pub pairs: Vec<ContrastivePair>,
}

impl ContrastiveBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The other anchors and the other positives: `2N − 2` members.
    pub fn negatives_of(&self, i: usize) -> Vec<Member> {
        let n = self.len();
        (0..n).filter(|&j| j != i).map(Member::Anchor).chain((0..n).filter(|&j| j != i).map(Member::Positive)).collect()
    }

    /// Anchors followed by positives, the row order `loss_mcl` expects.
    pub fn inputs(&self) -> Vec<&PackedInput> {
        self.pairs.iter().map(|p| &p.anchor).chain(self.pairs.iter().map(|p| &p.positive)).collect()
    }
}

/// Builds one positive pair per example. Paired examples use
/// `paired_scheme`; unpaired ones always use [`PairingScheme::PairVsSwapped`].
pub fn build_contrastive_batch(
    examples: &[&ModalTriple],
    budgets: &Budgets,
    paired_scheme: PairingScheme,
    vocab_size: usize,
    seed: u64,
) -> Result<ContrastiveBatch> {
    if examples.len() < 2 {
        return Err(Error::Contract(format!("contrastive batch needs at least 2 examples, got {}", examples.len())));
    }
    if paired_scheme == PairingScheme::PairVsSwapped {
        return Err(Error::Contract("PAIR_vs_SWAPPED is reserved for unpaired examples".into()));
    }
    let pairs = examples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let scheme = if t.is_paired() { paired_scheme } else { PairingScheme::PairVsSwapped };
            let i = i as u64;
            match scheme {
                PairingScheme::NlVsPlast => Ok(ContrastivePair {
                    scheme,
                    anchor: pack_layout(t, budgets, Layout::NlOnly)?,
                    positive: pack_layout(t, budgets, Layout::CodeOnly)?,
                }),
                _ => {
                    let base = pack(t, budgets)?;
                    let anchor = plan_mmlm(&base, vocab_size, seed::derive(seed, &[i, 0]))?.masked(&base);
                    let other = plan_mmlm(&base, vocab_size, seed::derive(seed, &[i, 1]))?.masked(&base);
                    let positive = pack(&swap_pl_ast(&other.to_triple()), budgets)?;
                    Ok(ContrastivePair { scheme, anchor, positive })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContrastiveBatch { pairs })
}
