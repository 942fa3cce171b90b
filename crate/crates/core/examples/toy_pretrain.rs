//! Pre-trains the toy configuration on the synthetic corpus and prints the
//! loss curve every 20 steps.
//!
//! ```text
//! cargo run --release --example toy_pretrain -- model.ckpt
//! ```

use codemodal::cli::RunConfig;
use codemodal::corpus::{to_triples, train_vocab};
use codemodal::encoder::Encoder;
use codemodal::evaluation::synthetic::synthetic_corpus;
use codemodal::training::Trainer;

fn main() -> codemodal::Result<()> {
    let rc = RunConfig::from_toml(include_str!("../configs/toy.toml"))?;
    let examples = synthetic_corpus(64, 64, 1)
        .iter()
        .map(|r| r.resolve(std::path::Path::new(".")))
        .collect::<codemodal::Result<Vec<_>>>()?;
    let vocab = train_vocab(&examples, 200)?;
    let mut enc = rc.encoder.clone();
    enc.vocab_size = vocab.len();
    let model = Encoder::init(enc, rc.train.seed)?;
    let mut trainer = Trainer::new(model, to_triples(&examples, &vocab)?, rc.train.clone())?;
    println!("{:>5} {:>8} {:>8} {:>8} {:>8} {:>8}", "step", "total", "mmlm", "ip", "tep", "mcl");
    trainer.run(rc.train.steps, |_, r| {
        if r.step % 20 == 0 || r.step + 1 == rc.train.steps {
            println!("{:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}", r.step, r.total, r.mmlm, r.ip, r.tep, r.mcl);
        }
        Ok(())
    })?;
    if let Some(path) = std::env::args().nth(1) {
        trainer.checkpoint().save(std::path::Path::new(&path))?;
        println!("saved {path}");
    }
    Ok(())
}
