//! Trains a BPE vocabulary over a synthetic corpus and shows how comments,
//! code, and AST kinds are encoded.
//!
//! ```text
//! cargo run --example train_tokenizer -- 300
//! ```

use codemodal::corpus::train_vocab;
use codemodal::evaluation::synthetic::synthetic_corpus;

fn main() -> codemodal::Result<()> {
    let size: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let examples = synthetic_corpus(64, 64, 1)
        .iter()
        .map(|r| r.resolve(std::path::Path::new(".")))
        .collect::<codemodal::Result<Vec<_>>>()?;
    let vocab = train_vocab(&examples, size)?;
    println!("{} tokens ({} reserved), {} merges", vocab.len(), vocab.num_reserved(), vocab.merges().len());
    println!("first merges: {:?}", &vocab.merges()[..5.min(vocab.merges().len())]);
    for text in ["return the sum of two numbers", "total = total + value", "binary_operator"] {
        let ids = vocab.encode(text);
        let pieces: Vec<&str> = ids.iter().map(|&i| vocab.token(i).unwrap_or("?")).collect();
        println!("{text:?} -> {pieces:?}");
        assert_eq!(vocab.decode(&ids), text);
    }
    Ok(())
}
