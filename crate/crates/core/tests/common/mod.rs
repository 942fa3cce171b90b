//! Straight-line scalar reimplementations of the loss formulas, written
//! without the autodiff graph, plus small shared fixtures.
#![allow(dead_code)]

use codemodal::corpus::{to_triples, train_vocab, Example};
use codemodal::evaluation::synthetic::synthetic_corpus;
use codemodal::tokenizer::Vocab;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Σ over masked positions of −log softmax(logits)[true id].
pub fn mmlm_sum(logits: &[Vec<f64>], targets: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &t) in logits.iter().zip(targets) {
        let mut denom = 0.0;
        for x in row {
            denom += x.exp();
        }
        total += -(row[t].exp() / denom).ln();
    }
    total
}

/// Σ over code tokens of −[y ln p + (1 − y) ln(1 − p)].
pub fn ip_sum(p: &[f64], y: &[bool]) -> f64 {
    let mut total = 0.0;
    for (&p, &y) in p.iter().zip(y) {
        total += if y { -p.ln() } else { -(1.0 - p).ln() };
    }
    total
}

/// Σ over sampled pairs of BCE(sigmoid(rep_i · rep_j), y).
pub fn tep_sum(reps: &[Vec<f64>], pairs: &[(usize, usize)], y: &[bool]) -> f64 {
    let mut total = 0.0;
    for (&(i, j), &label) in pairs.iter().zip(y) {
        let mut dot = 0.0;
        for k in 0..reps[i].len() {
            dot += reps[i][k] * reps[j][k];
        }
        let p = 1.0 / (1.0 + (-dot).exp());
        total += if label { -p.ln() } else { -(1.0 - p).ln() };
    }
    total
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One InfoNCE term: −ln e^{v·v⁺} / (e^{v·v⁺} + Σ_k e^{v·v_k⁻}).
pub fn info_nce(v: &[f64], pos: &[f64], negatives: &[&[f64]]) -> f64 {
    let num = dot(v, pos).exp();
    let mut den = num;
    for n in negatives {
        den += dot(v, n).exp();
    }
    -(num / den).ln()
}

/// Both directions of every pair, with negatives enumerated explicitly as
/// the other anchors and the other positives. Returns the 2N terms in the
/// order (anchor→positive for each i, then positive→anchor for each i).
pub fn mcl_terms(anchors: &[Vec<f64>], positives: &[Vec<f64>]) -> Vec<f64> {
    let n = anchors.len();
    let negatives = |i: usize| -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for j in 0..n {
            if j != i {
                out.push(&anchors[j]);
            }
        }
        for j in 0..n {
            if j != i {
                out.push(&positives[j]);
            }
        }
        out
    };
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(info_nce(&anchors[i], &positives[i], &negatives(i)));
    }
    for i in 0..n {
        terms.push(info_nce(&positives[i], &anchors[i], &negatives(i)));
    }
    terms
}

pub fn mcl_sum(anchors: &[Vec<f64>], positives: &[Vec<f64>]) -> f64 {
    mcl_terms(anchors, positives).iter().sum()
}

/// `n` commented synthetic examples.
pub fn examples(n: usize, seed: u64) -> Vec<Example> {
    synthetic_corpus(n, n, seed).iter().map(|r| r.resolve(std::path::Path::new(".")).unwrap()).collect()
}

/// Commented synthetic examples and a vocabulary trained on them.
pub fn synthetic_examples(n: usize, seed: u64, vocab_size: usize) -> (Vec<Example>, Vocab) {
    let examples = examples(n, seed);
    let vocab = train_vocab(&examples, vocab_size).unwrap();
    (examples, vocab)
}

pub fn triples_of(examples: &[Example], vocab: &Vocab) -> Vec<codemodal::assembly::ModalTriple> {
    to_triples(examples, vocab).unwrap()
}
