use std::collections::HashSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::assembly::PackedInput;
use crate::seed;

/// Sampled AST position pairs with edge labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TepPlan {
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<bool>,
}

impl TepPlan {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Shifts every position, for stacking several examples into one batch.
    pub fn offset(&self, by: usize) -> TepPlan {
        TepPlan { pairs: self.pairs.iter().map(|&(i, j)| (i + by, j + by)).collect(), labels: self.labels.clone() }
    }

    pub fn extend(&mut self, other: TepPlan) {
        self.pairs.extend(other.pairs);
        self.labels.extend(other.labels);
    }
}

/// Every retained edge is a positive. Negatives are unordered non-edge AST
/// pairs: `negatives_per_positive` per edge sampled without replacement, or
/// all of them when `full_pairs` is set. No edges yields an empty plan.
pub fn plan_tep(packed: &PackedInput, seed: u64, negatives_per_positive: usize, full_pairs: bool) -> TepPlan {
    if packed.edge_pairs.is_empty() {
        return TepPlan::default();
    }
    let edges: HashSet<(usize, usize)> = packed.edge_pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let ast = &packed.ast_positions;
    let mut candidates = Vec::new();
    for (k, &i) in ast.iter().enumerate() {
        for &j in &ast[k + 1..] {
            if !edges.contains(&(i, j)) {
                candidates.push((i, j));
            }
        }
    }
    let mut plan = TepPlan { pairs: packed.edge_pairs.clone(), labels: vec![true; packed.edge_pairs.len()] };
    let wanted = if full_pairs {
        candidates.len()
    } else {
        (negatives_per_positive * packed.edge_pairs.len()).min(candidates.len())
    };
    let mut picked: Vec<usize> = if wanted == candidates.len() {
        (0..wanted).collect()
    } else {
        sample(&mut seed::rng(seed), candidates.len(), wanted).into_vec()
    };
    picked.sort_unstable();
    plan.pairs.extend(picked.iter().map(|&c| candidates[c]));
    plan.labels.extend(std::iter::repeat_n(false, wanted));
    plan
}
