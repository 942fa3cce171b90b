//! Exports a parsed tree as JSON and ingests it back, the path external
//! parsers use to feed other languages into the pipeline.
//!
//! ```text
//! cargo run --example ingest_ast -- tree.json
//! ```
//!
//! With an argument, ingests that file instead and prints its shape.

use std::path::PathBuf;

use codemodal::syntax::{export_ast, ingest_ast, parse, serialize};

fn main() -> codemodal::Result<()> {
    let tree = match std::env::args().nth(1) {
        Some(path) => ingest_ast(&PathBuf::from(path))?,
        None => {
            let dir = tempfile::tempdir()?;
            let path = dir.path().join("tree.json");
            let tree = parse("total = price * count")?;
            export_ast(&tree, &path)?;
            let back = ingest_ast(&path)?;
            assert_eq!(back, tree);
            println!("exported and re-ingested {}", path.display());
            back
        }
    };
    let seq = serialize(&tree);
    println!("{} nodes, {} leaves, {} edges", tree.size(), tree.leaves().len(), seq.edges.len());
    println!("kinds: {}", tree.kinds().join(", "));
    Ok(())
}
