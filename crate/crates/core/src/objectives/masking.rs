use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::PackedInput;
use crate::error::{Error, Result};
use crate::seed;
use crate::tokenizer::{TokenId, MASK, SPECIAL_TOKENS};

pub const MASK_RATE_PERCENT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    Mask,
    Random(TokenId),
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlan {
    /// Sorted positions in the packed sequence.
    pub positions: Vec<usize>,
    pub replacements: Vec<Replacement>,
    /// Original ids at `positions`.
    pub labels: Vec<TokenId>,
}

/// 15% of `maskable`, rounded half up, at least 1.
pub fn mask_count(maskable: usize) -> usize {
    ((MASK_RATE_PERCENT * maskable + 50) / 100).max(1)
}

/// Selects 15% of the maskable positions; each becomes `[MASK]` with
/// probability 0.8, a random regular token with 0.1, and stays with 0.1.
pub fn plan_mmlm(packed: &PackedInput, vocab_size: usize, seed: u64) -> Result<MaskPlan> {
    let maskable = packed.maskable_positions();
    if maskable.is_empty() {
        return Err(Error::Contract("no maskable positions".into()));
    }
    let first_regular = SPECIAL_TOKENS.len();
    if vocab_size <= first_regular {
        return Err(Error::Contract(format!("vocab size {vocab_size} leaves no regular tokens")));
    }
    let mut rng = seed::rng(seed);
    let k = mask_count(maskable.len());
    let mut positions: Vec<usize> = sample(&mut rng, maskable.len(), k).into_iter().map(|i| maskable[i]).collect();
    positions.sort_unstable();
    let replacements = positions
        .iter()
        .map(|_| {
            let u: f64 = rng.gen();
            if u < 0.8 {
                Replacement::Mask
            } else if u < 0.9 {
                Replacement::Random(rng.gen_range(first_regular..vocab_size) as TokenId)
            } else {
                Replacement::Keep
            }
        })
        .collect();
    let labels = positions.iter().map(|&p| packed.ids[p]).collect();
    Ok(MaskPlan { positions, replacements, labels })
}

impl MaskPlan {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn apply(&self, ids: &mut [TokenId]) {
        for (&p, r) in self.positions.iter().zip(&self.replacements) {
            match *r {
                Replacement::Mask => ids[p] = MASK,
                Replacement::Random(id) => ids[p] = id,
                Replacement::Keep => {}
            }
        }
    }

    pub fn masked(&self, packed: &PackedInput) -> PackedInput {
        let mut out = packed.clone();
        self.apply(&mut out.ids);
        out
    }
}
