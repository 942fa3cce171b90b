//! JSONL corpora: one object per line with an optional `comment`, and either
//! mini-language `code` or an `ast_file` path (relative to the corpus file).
//! Evaluation corpora may carry a `cluster_id`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::ModalTriple;
use crate::error::{Error, Result};
use crate::syntax::{code_token_labels, ingest_ast, parse, AstNode, NODE_KINDS};
use crate::tokenizer::{train_bpe, Vocab};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ast_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_id: Option<u64>,
}

/// A record with its tree resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub comment: Option<String>,
    pub tree: AstNode,
    pub cluster_id: Option<u64>,
}

impl Example {
    pub fn is_paired(&self) -> bool {
        self.comment.as_deref().is_some_and(|c| !c.trim().is_empty())
    }

    pub fn to_triple(&self, vocab: &Vocab) -> Result<ModalTriple> {
        let comment = self.comment.as_deref().filter(|c| !c.trim().is_empty());
        ModalTriple::from_tree(vocab, comment, &self.tree)
    }

    /// Texts this example contributes to tokenizer training: the comment and
    /// every code token.
    pub fn tokenizer_texts(&self) -> Vec<String> {
        let mut out: Vec<String> = self.comment.iter().cloned().collect();
        out.extend(code_token_labels(&self.tree).into_iter().map(|s| s.surface));
        out
    }
}

impl CorpusRecord {
    pub fn resolve(&self, base_dir: &Path) -> Result<Example> {
        let tree = match (&self.code, &self.ast_file) {
            (Some(code), None) => parse(code)?,
            (None, Some(file)) => ingest_ast(&base_dir.join(file))?,
            (Some(_), Some(_)) => return Err(Error::Corpus("record has both `code` and `ast_file`".into())),
            (None, None) => return Err(Error::Corpus("record has neither `code` nor `ast_file`".into())),
        };
        Ok(Example { comment: self.comment.clone(), tree, cluster_id: self.cluster_id })
    }
}

pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Corpus(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Corpus(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Reads and resolves every record; errors carry the file and line.
pub fn load_corpus(path: &Path) -> Result<Vec<Example>> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Corpus(format!("{} contains no records", path.display())));
    }
    records
        .iter()
        .enumerate()
        .map(|(i, r)| r.resolve(&base).map_err(|e| Error::Corpus(format!("{} record {}: {e}", path.display(), i + 1))))
        .collect()
}

/// Internal-node kinds to reserve as atomic tokens: the parser's kinds plus
/// any others found in `examples`, sorted and deduplicated.
pub fn reserved_kinds(examples: &[Example]) -> Vec<String> {
    let mut kinds: std::collections::BTreeSet<String> = NODE_KINDS.iter().map(|k| k.to_string()).collect();
    for e in examples {
        fn walk(n: &AstNode, out: &mut std::collections::BTreeSet<String>) {
            if !n.is_leaf() {
                out.insert(n.kind.clone());
                n.children.iter().for_each(|c| walk(c, out));
            }
        }
        walk(&e.tree, &mut kinds);
    }
    kinds.into_iter().collect()
}

/// Trains one shared vocabulary over comments and code tokens.
pub fn train_vocab(examples: &[Example], target_size: usize) -> Result<Vocab> {
    let texts: Vec<String> = examples.iter().flat_map(Example::tokenizer_texts).collect();
    train_bpe(&texts, target_size, &reserved_kinds(examples))
}

pub fn to_triples(examples: &[Example], vocab: &Vocab) -> Result<Vec<ModalTriple>> {
    examples.iter().map(|e| e.to_triple(vocab)).collect()
}

pub fn write_records(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
