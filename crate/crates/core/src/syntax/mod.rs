//! Mini-language parsing, depth-first AST serialization, identifier labels,
//! and ingestion of externally produced trees.

mod ast;
pub mod gen;
mod parser;
mod sequence;

pub use ast::{export_ast, ingest_ast, ingest_ast_lines, AstNode, IDENTIFIER, LEAF_KINDS, NODE_KINDS};
pub use parser::parse;
pub use sequence::{code_token_labels, serialize, AstSequence, AstToken, CodeTokenSpan};
