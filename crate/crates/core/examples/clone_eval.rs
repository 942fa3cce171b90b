//! Clone retrieval (MAP@R) over clusters of variable-renamed functions,
//! before and after toy pre-training.

use codemodal::cli::RunConfig;
use codemodal::corpus::{to_triples, train_vocab};
use codemodal::encoder::Encoder;
use codemodal::evaluation::synthetic::{clone_corpus, synthetic_corpus};
use codemodal::evaluation::{clone_search, Similarity};
use codemodal::training::Trainer;

fn main() -> codemodal::Result<()> {
    let rc = RunConfig::from_toml(include_str!("../configs/toy.toml"))?;
    let base = std::path::Path::new(".");
    let train = synthetic_corpus(64, 64, 1).iter().map(|r| r.resolve(base)).collect::<codemodal::Result<Vec<_>>>()?;
    let clones = clone_corpus(8, 4, 3).iter().map(|r| r.resolve(base)).collect::<codemodal::Result<Vec<_>>>()?;
    let clusters: Vec<u64> = clones.iter().map(|e| e.cluster_id.unwrap_or_default()).collect();
    let vocab = train_vocab(&train, 200)?;
    let mut enc = rc.encoder.clone();
    enc.vocab_size = vocab.len();
    let code = to_triples(&clones, &vocab)?;
    let mut trainer = Trainer::new(Encoder::init(enc, rc.train.seed)?, to_triples(&train, &vocab)?, rc.train.clone())?;

    let budgets = &rc.train.budgets;
    let before = clone_search(&trainer.model, &code, &clusters, budgets, Similarity::Cosine, 4)?;
    trainer.run(rc.train.steps, |_, _| Ok(()))?;
    let after = clone_search(&trainer.model, &code, &clusters, budgets, Similarity::Cosine, 4)?;
    println!("{} queries over {} clusters", after.queries, 8);
    println!("MAP@R untrained {:.4}, trained {:.4}", before.value, after.value);
    Ok(())
}
