use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Dot,
    Cosine,
}

impl Similarity {
    pub fn score(self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        match self {
            Similarity::Dot => dot,
            Similarity::Cosine => {
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot / (na * nb)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub queries: usize,
    /// Queries left out (singleton clusters).
    #[serde(default)]
    pub skipped: usize,
}

/// A code-search query: one gold candidate among `candidates`.
#[derive(Debug, Clone, Copy)]
pub struct RetrievalQuery<'a> {
    pub query: &'a [f64],
    pub candidates: &'a [Vec<f64>],
    pub gold: usize,
}

/// 1-based rank of `gold`; a candidate outranks it when its score is
/// higher, or equal with a smaller index.
pub fn rank_of(scores: &[f64], gold: usize) -> usize {
    let g = scores[gold];
    1 + scores.iter().enumerate().filter(|&(i, &s)| s > g || (s == g && i < gold)).count()
}

pub fn mrr(queries: &[RetrievalQuery], sim: Similarity) -> Result<MetricReport> {
    if queries.is_empty() {
        return Err(Error::Contract("mrr needs at least one query".into()));
    }
    let mut total = 0.0;
    for q in queries {
        if q.gold >= q.candidates.len() {
            return Err(Error::Index { what: "gold candidate", index: q.gold, bound: q.candidates.len() });
        }
        let scores: Vec<f64> = q.candidates.iter().map(|c| sim.score(q.query, c)).collect();
        total += 1.0 / rank_of(&scores, q.gold) as f64;
    }
    Ok(MetricReport { metric: "MRR".into(), value: total / queries.len() as f64, queries: queries.len(), skipped: 0 })
}

/// Each item queries all others. With `R` = its cluster size − 1, the score
/// is the mean over relevant hits in the top `R` of precision-at-hit,
/// divided by `R`. Singleton clusters are skipped and counted.
pub fn map_at_r(embeddings: &[Vec<f64>], clusters: &[u64], sim: Similarity) -> Result<MetricReport> {
    if embeddings.len() != clusters.len() {
        return Err(Error::Shape { op: "map_at_r", left: vec![embeddings.len()], right: vec![clusters.len()] });
    }
    let mut total = 0.0;
    let mut counted = 0;
    let mut skipped = 0;
    for (q, emb) in embeddings.iter().enumerate() {
        let r = clusters.iter().filter(|&&c| c == clusters[q]).count() - 1;
        if r == 0 {
            skipped += 1;
            continue;
        }
        let mut order: Vec<(usize, f64)> =
            embeddings.iter().enumerate().filter(|&(i, _)| i != q).map(|(i, e)| (i, sim.score(emb, e))).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut hits = 0;
        let mut ap = 0.0;
        for (rank, &(i, _)) in order.iter().take(r).enumerate() {
            if clusters[i] == clusters[q] {
                hits += 1;
                ap += hits as f64 / (rank + 1) as f64;
            }
        }
        total += ap / r as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Contract("map_at_r: every cluster is a singleton".into()));
    }
    Ok(MetricReport { metric: "MAP@R".into(), value: total / counted as f64, queries: counted, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_index() {
        assert_eq!(rank_of(&[1.0, 1.0, 1.0], 0), 1);
        assert_eq!(rank_of(&[1.0, 1.0, 1.0], 2), 3);
        assert_eq!(rank_of(&[0.5, 2.0, 1.0], 0), 3);
    }

    #[test]
    fn singletons_are_skipped() {
        let e = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = map_at_r(&e, &[0, 0, 1], Similarity::Dot).unwrap();
        assert_eq!((r.value, r.queries, r.skipped), (1.0, 2, 1));
        assert!(map_at_r(&e[..1], &[0], Similarity::Dot).is_err());
    }
}
