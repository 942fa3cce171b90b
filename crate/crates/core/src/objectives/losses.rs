use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Graph, Var};
use crate::objectives::TepPlan;
use crate::tokenizer::TokenId;

/// How per-token / per-pair terms combine within one loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    /// Plain sums, as the equations are written.
    Sum,
}

fn reduce(g: &mut Graph, x: Var, r: Reduction) -> Var {
    match r {
        Reduction::Mean => g.mean(x),
        Reduction::Sum => g.sum(x),
    }
}

/// Cross-entropy of `logits` (`[masked, V]`) against the original ids.
pub fn loss_mmlm(g: &mut Graph, logits: Var, targets: &[TokenId], r: Reduction) -> Result<Var> {
    let rows = g.value(logits).rows_cols().0;
    if rows != targets.len() || targets.is_empty() {
        return Err(Error::Shape { op: "loss_mmlm", left: g.shape(logits).to_vec(), right: vec![targets.len()] });
    }
    let logp = g.log_softmax(logits);
    let idx: Vec<usize> = targets.iter().map(|&t| t as usize).collect();
    let picked = g.gather_cols(logp, &idx, 1)?;
    let total = reduce(g, picked, r);
    Ok(g.scale(total, -1.0))
}

fn check_labels(g: &Graph, x: Var, n: usize, op: &'static str) -> Result<()> {
    if g.value(x).numel() != n || n == 0 {
        return Err(Error::Shape { op, left: g.shape(x).to_vec(), right: vec![n] });
    }
    Ok(())
}

/// Binary cross-entropy of identifier probabilities, one per code token.
/// Probabilities outside (0, 1) are a domain error.
pub fn loss_ip(g: &mut Graph, probs: Var, labels: &[bool], r: Reduction) -> Result<Var> {
    check_labels(g, probs, labels.len(), "loss_ip")?;
    if let Some(p) = g.value(probs).data().iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Domain { op: "loss_ip", detail: format!("probability {p} outside (0, 1)") });
    }
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let not_y: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let ln_p = g.ln(probs)?;
    let neg = g.scale(probs, -1.0);
    let q = g.add_const(neg, &vec![1.0; n])?;
    let ln_q = g.ln(q)?;
    let a = g.mul_const(ln_p, y)?;
    let b = g.mul_const(ln_q, not_y)?;
    let ll = g.add(a, b)?;
    let total = reduce(g, ll, r);
    Ok(g.scale(total, -1.0))
}

/// [`loss_ip`] on pre-sigmoid logits, stable for saturated predictions.
pub fn loss_ip_logits(g: &mut Graph, logits: Var, labels: &[bool], r: Reduction) -> Result<Var> {
    check_labels(g, logits, labels.len(), "loss_ip")?;
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let per = g.bce_with_logits(logits, &y)?;
    Ok(reduce(g, per, r))
}

/// Edge prediction: `sigmoid(rep_i · rep_j)` against the plan's labels.
pub fn loss_tep(g: &mut Graph, reps: Var, plan: &TepPlan, r: Reduction) -> Result<Var> {
    if plan.is_empty() {
        return Err(Error::Contract("loss_tep with an empty plan".into()));
    }
    let left: Vec<usize> = plan.pairs.iter().map(|p| p.0).collect();
    let right: Vec<usize> = plan.pairs.iter().map(|p| p.1).collect();
    let a = g.gather_rows(reps, &left)?;
    let b = g.gather_rows(reps, &right)?;
    let prod = g.mul(a, b)?;
    let dots = g.sum_last_axis(prod);
    let y: Vec<f64> = plan.labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let per = g.bce_with_logits(dots, &y)?;
    Ok(reduce(g, per, r))
}

/// Symmetric InfoNCE over projections `anchors` and `positives` (`[N, P]`
/// each). Every row is scored against its partner and the `2N − 2` other
/// rows by raw dot product; the loss sums over both directions of every pair.
pub fn loss_mcl(g: &mut Graph, anchors: Var, positives: Var) -> Result<Var> {
    let terms = loss_mcl_terms(g, anchors, positives)?;
    Ok(g.sum(terms))
}

/// The `2N` per-direction terms of [`loss_mcl`]: entry `i < N` is
/// `l(x_i, x_i⁺)`, entry `N + i` is `l(x_i⁺, x_i)`.
pub fn loss_mcl_terms(g: &mut Graph, anchors: Var, positives: Var) -> Result<Var> {
    if g.shape(anchors) != g.shape(positives) || g.shape(anchors).len() != 2 {
        return Err(Error::Shape {
            op: "loss_mcl",
            left: g.shape(anchors).to_vec(),
            right: g.shape(positives).to_vec(),
        });
    }
    let n = g.shape(anchors)[0];
    if n < 2 {
        return Err(Error::Contract(format!("loss_mcl needs N >= 2, got {n}")));
    }
    let v = g.concat_rows(&[anchors, positives])?;
    let sims = g.matmul_t(v, v)?;
    let mut index = Vec::with_capacity(2 * n * (2 * n - 1));
    for row in 0..2 * n {
        let partner = (row + n) % (2 * n);
        index.push(partner);
        index.extend((0..2 * n).filter(|&c| c != row && c != partner));
    }
    let scores = g.gather_cols(sims, &index, 2 * n - 1)?;
    let logp = g.log_softmax(scores);
    let pos = g.gather_cols(logp, &vec![0; 2 * n], 1)?;
    let pos = g.reshape(pos, &[2 * n])?;
    Ok(g.scale(pos, -1.0))
}
