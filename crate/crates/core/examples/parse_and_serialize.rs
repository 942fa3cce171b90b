//! Parses a mini-language snippet, prints its depth-first token sequence with
//! parent edges and identifier flags, and rebuilds the tree from them.
//!
//! ```text
//! cargo run --example parse_and_serialize -- 'result = x + y'
//! ```

use codemodal::syntax::{code_token_labels, parse, serialize};

fn main() -> codemodal::Result<()> {
    let src = std::env::args().nth(1).unwrap_or_else(|| "def area(w, h):\n    return w * h\n".into());
    let tree = parse(&src)?;
    let seq = serialize(&tree);
    println!("{:>4}  {:<20} {:<18} id", "pos", "surface", "kind");
    for (i, t) in seq.tokens.iter().enumerate() {
        println!("{i:>4}  {:<20} {:<18} {}", t.surface, t.kind, u8::from(seq.identifier_flags[i]));
    }
    println!("edges: {:?}", seq.edges);
    let code: Vec<String> = code_token_labels(&tree)
        .iter()
        .map(|s| format!("{}{}", s.surface, if s.is_identifier { "*" } else { "" }))
        .collect();
    println!("code tokens (* = identifier): {}", code.join(" "));
    assert_eq!(seq.to_tree()?, tree);
    println!("round trip ok; AST JSON:\n{}", tree.to_json_string());
    Ok(())
}
