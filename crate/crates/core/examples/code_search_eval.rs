//! Zero-shot comment-to-code search on a held-out synthetic pool, before and
//! after a short toy pre-training run.

use codemodal::cli::RunConfig;
use codemodal::corpus::{to_triples, train_vocab};
use codemodal::encoder::Encoder;
use codemodal::evaluation::synthetic::synthetic_corpus;
use codemodal::evaluation::{code_search, Similarity};
use codemodal::training::Trainer;

fn main() -> codemodal::Result<()> {
    let rc = RunConfig::from_toml(include_str!("../configs/toy.toml"))?;
    let load = |n, seed| {
        synthetic_corpus(n, n, seed)
            .iter()
            .map(|r| r.resolve(std::path::Path::new(".")))
            .collect::<codemodal::Result<Vec<_>>>()
    };
    let train = load(64, 1)?;
    let held_out = load(50, 2)?;
    let vocab = train_vocab(&train, 200)?;
    let mut enc = rc.encoder.clone();
    enc.vocab_size = vocab.len();
    let eval = to_triples(&held_out, &vocab)?;
    let mut trainer = Trainer::new(Encoder::init(enc, rc.train.seed)?, to_triples(&train, &vocab)?, rc.train.clone())?;

    let random: f64 = (1..=eval.len()).map(|k| 1.0 / k as f64).sum::<f64>() / eval.len() as f64;
    let before = code_search(&trainer.model, &eval, &rc.train.budgets, Similarity::Dot, 4)?;
    trainer.run(rc.train.steps, |_, _| Ok(()))?;
    let after = code_search(&trainer.model, &eval, &rc.train.budgets, Similarity::Dot, 4)?;
    let cosine = code_search(&trainer.model, &eval, &rc.train.budgets, Similarity::Cosine, 4)?;
    println!("random ranking MRR     {random:.4}");
    println!("untrained MRR          {:.4}", before.value);
    println!("{:<22} {:.4} (cosine {:.4})", format!("after {} steps MRR", rc.train.steps), after.value, cosine.value);
    println!("{}", serde_json::to_string(&after)?);
    Ok(())
}
