use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Internal node kinds produced by the mini-language parser.
pub const NODE_KINDS: &[&str] = &[
    "module",
    "function_definition",
    "parameters",
    "block",
    "if_statement",
    "else_clause",
    "return_statement",
    "assignment",
    "expression_statement",
    "binary_operator",
    "comparison_operator",
    "unary_operator",
    "call",
    "argument_list",
    "parenthesized_expression",
];

/// Leaf kinds produced by the mini-language parser.
pub const LEAF_KINDS: &[&str] = &["identifier", "integer", "float", "string", "keyword", "operator", "punctuation"];

pub const IDENTIFIER: &str = "identifier";

/// One node of a syntax tree. A node is a leaf exactly when it carries
/// `text`; leaves never have children. Internal nodes may be childless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub kind: String,
    pub text: Option<String>,
    pub children: Vec<AstNode>,
    /// Byte range in the source, when known.
    pub span: Option<(usize, usize)>,
}

impl AstNode {
    pub fn leaf(kind: impl Into<String>, text: impl Into<String>) -> Self {
        AstNode { kind: kind.into(), text: Some(text.into()), children: Vec::new(), span: None }
    }

    pub fn internal(kind: impl Into<String>, children: Vec<AstNode>) -> Self {
        AstNode { kind: kind.into(), text: None, children, span: None }
    }

    pub fn with_span(mut self, start: usize, end: usize) -> Self {
        self.span = Some((start, end));
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.text.is_some()
    }

    pub fn is_identifier(&self) -> bool {
        self.is_leaf() && self.kind == IDENTIFIER
    }

    /// Number of nodes in the subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(AstNode::size).sum::<usize>()
    }

    /// Leaves in source (left-to-right) order.
    pub fn leaves(&self) -> Vec<&AstNode> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a AstNode, out: &mut Vec<&'a AstNode>) {
            if n.is_leaf() {
                out.push(n);
            }
            n.children.iter().for_each(|c| walk(c, out));
        }
        walk(self, &mut out);
        out
    }

    /// Every distinct kind in the tree, sorted.
    pub fn kinds(&self) -> Vec<String> {
        let mut set = std::collections::BTreeSet::new();
        fn walk(n: &AstNode, set: &mut std::collections::BTreeSet<String>) {
            set.insert(n.kind.clone());
            n.children.iter().for_each(|c| walk(c, set));
        }
        walk(self, &mut set);
        set.into_iter().collect()
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("kind".into(), Value::String(self.kind.clone()));
        match &self.text {
            Some(t) => {
                obj.insert("text".into(), Value::String(t.clone()));
            }
            None => {
                obj.insert("children".into(), Value::Array(self.children.iter().map(AstNode::to_json).collect()));
            }
        }
        if let Some((s, e)) = self.span {
            obj.insert("span".into(), Value::from(vec![s, e]));
        }
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("AST JSON is always serializable")
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        from_json_at(value, "root")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)
            .map_err(|e| Error::AstFormat { path: "root".into(), detail: format!("malformed JSON: {e}") })?;
        Self::from_json(&v)
    }
}

fn from_json_at(value: &Value, path: &str) -> Result<AstNode> {
    let fail = |detail: &str| Error::AstFormat { path: path.to_string(), detail: detail.to_string() };
    let obj = value.as_object().ok_or_else(|| fail("node is not an object"))?;
    let kind = match obj.get("kind") {
        Some(Value::String(k)) if !k.is_empty() => k.clone(),
        Some(_) => return Err(fail("`kind` must be a non-empty string")),
        None => return Err(fail("missing `kind` field")),
    };
    let span = match obj.get("span") {
        None => None,
        Some(v) => {
            let pair = v
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some((a[0].as_u64()? as usize, a[1].as_u64()? as usize)))
                .ok_or_else(|| fail("`span` must be [start, end]"))?;
            Some(pair)
        }
    };
    match (obj.get("text"), obj.get("children")) {
        (Some(_), Some(_)) => Err(fail("leaf with children: node has both `text` and `children`")),
        (None, None) => Err(fail("node has neither `text` nor `children`")),
        (Some(t), None) => {
            let text = t.as_str().ok_or_else(|| fail("`text` must be a string"))?;
            Ok(AstNode { kind, text: Some(text.to_string()), children: Vec::new(), span })
        }
        (None, Some(c)) => {
            let arr = c.as_array().ok_or_else(|| fail("`children` must be an array"))?;
            let children = arr
                .iter()
                .enumerate()
                .map(|(i, child)| from_json_at(child, &format!("{path}.children[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Ok(AstNode { kind, text: None, children, span })
        }
    }
}

/// Reads one tree from a JSON file.
pub fn ingest_ast(path: &Path) -> Result<AstNode> {
    let s = std::fs::read_to_string(path)?;
    AstNode::from_json_str(&s).map_err(|e| match e {
        Error::AstFormat { path: p, detail } => Error::AstFormat { path: format!("{}:{p}", path.display()), detail },
        other => other,
    })
}

/// Reads one tree per non-blank line of a JSONL file.
pub fn ingest_ast_lines(path: &Path) -> Result<Vec<AstNode>> {
    let s = std::fs::read_to_string(path)?;
    s.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            AstNode::from_json_str(line).map_err(|e| match e {
                Error::AstFormat { path: p, detail } => {
                    Error::AstFormat { path: format!("{}:{}:{p}", path.display(), i + 1), detail }
                }
                other => other,
            })
        })
        .collect()
}

/// Writes a tree as a single-line JSON document.
pub fn export_ast(root: &AstNode, path: &Path) -> Result<()> {
    std::fs::write(path, root.to_json_string() + "\n")?;
    Ok(())
}
