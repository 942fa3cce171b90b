//! Writes synthetic corpora for the pipeline:
//!
//! ```text
//! cargo run --example synthetic_corpus -- data/
//! ```
//!
//! produces `train.jsonl` (64 commented functions), `eval.jsonl` (50 held-out
//! commented functions) and `clones.jsonl` (8 clusters of 4 renamed clones).

use std::path::PathBuf;

use codemodal::corpus::write_records;
use codemodal::evaluation::synthetic::{clone_corpus, synthetic_corpus};

fn main() -> codemodal::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let train = synthetic_corpus(64, 64, 1);
    let eval = synthetic_corpus(50, 50, 2);
    let clones = clone_corpus(8, 4, 3);
    write_records(&dir.join("train.jsonl"), &train)?;
    write_records(&dir.join("eval.jsonl"), &eval)?;
    write_records(&dir.join("clones.jsonl"), &clones)?;
    println!("wrote {} / {} / {} records to {}", train.len(), eval.len(), clones.len(), dir.display());
    println!("example: {}", serde_json::to_string(&train[0])?);
    Ok(())
}
