//! Zero-shot retrieval: comment-to-code search scored by MRR and clone
//! retrieval scored by MAP@R, over projection-head embeddings.

mod embed;
mod metrics;
pub mod synthetic;

pub use embed::{embed_corpus, EmbedMode};
pub use metrics::{map_at_r, mrr, rank_of, MetricReport, RetrievalQuery, Similarity};

use crate::assembly::{Budgets, ModalTriple};
use crate::encoder::Encoder;
use crate::error::Result;

/// Every comment queries the code of every example; its own code is gold.
pub fn code_search(
    model: &Encoder,
    triples: &[ModalTriple],
    budgets: &Budgets,
    sim: Similarity,
    threads: usize,
) -> Result<MetricReport> {
    let queries = embed_corpus(model, triples, EmbedMode::NlOnly, budgets, threads)?;
    let codes = embed_corpus(model, triples, EmbedMode::PlAst, budgets, threads)?;
    let qs: Vec<RetrievalQuery> =
        queries.iter().enumerate().map(|(gold, q)| RetrievalQuery { query: q, candidates: &codes, gold }).collect();
    mrr(&qs, sim)
}

/// Clone retrieval over code embeddings grouped by `clusters`.
pub fn clone_search(
    model: &Encoder,
    triples: &[ModalTriple],
    clusters: &[u64],
    budgets: &Budgets,
    sim: Similarity,
    threads: usize,
) -> Result<MetricReport> {
    let codes = embed_corpus(model, triples, EmbedMode::PlAst, budgets, threads)?;
    map_at_r(&codes, clusters, sim)
}
