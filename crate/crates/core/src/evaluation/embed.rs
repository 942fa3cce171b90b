use serde::{Deserialize, Serialize};

use crate::assembly::{pack_layout, Budgets, Layout, ModalTriple};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::numcore::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMode {
    /// `[CLS] comment [SEP]`.
    NlOnly,
    /// `[CLS] code [SEP] ast [SEP]`.
    PlAst,
}

fn embed_one(model: &Encoder, t: &ModalTriple, mode: EmbedMode, budgets: &Budgets) -> Result<Vec<f64>> {
    let layout = match mode {
        EmbedMode::NlOnly => Layout::NlOnly,
        EmbedMode::PlAst => Layout::CodeOnly,
    };
    let packed = pack_layout(t, budgets, layout)?;
    let mut g = Graph::new();
    let v = model.embed_sequences(&mut g, &[&packed.ids], None)?;
    Ok(g.value(v).data().to_vec())
}

/// Projection-space vectors, one per example, computed with dropout off on
/// up to `threads` worker threads. Output order follows input order.
pub fn embed_corpus(
    model: &Encoder,
    triples: &[ModalTriple],
    mode: EmbedMode,
    budgets: &Budgets,
    threads: usize,
) -> Result<Vec<Vec<f64>>> {
    if mode == EmbedMode::NlOnly {
        if let Some(i) = triples.iter().position(|t| !t.is_paired()) {
            return Err(Error::Assembly(format!("example {i} has no comment to embed")));
        }
    }
    let threads = threads.max(1).min(triples.len().max(1));
    let chunk = triples.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = triples
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || part.iter().map(|t| embed_one(model, t, mode, budgets)).collect::<Result<Vec<_>>>())
            })
            .collect();
        let mut out = Vec::with_capacity(triples.len());
        for h in handles {
            out.extend(h.join().expect("embedding worker panicked")?);
        }
        Ok(out)
    })
}
