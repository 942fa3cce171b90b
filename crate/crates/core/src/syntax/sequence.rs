use serde::{Deserialize, Serialize};

use super::ast::AstNode;
use crate::error::{Error, Result};

/// One position of a serialized tree. Internal nodes use their kind as the
/// surface string; leaves use their source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstToken {
    pub surface: String,
    pub kind: String,
    pub leaf: bool,
    pub span: Option<(usize, usize)>,
}

/// Pre-order token sequence of a tree plus its parent→child edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstSequence {
    pub tokens: Vec<AstToken>,
    /// `(parent, child)` positions; parent always precedes child.
    pub edges: Vec<(usize, usize)>,
    pub identifier_flags: Vec<bool>,
}

impl AstSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Rebuilds the tree from tokens and edges.
    pub fn to_tree(&self) -> Result<AstNode> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(Error::Contract("empty AST sequence".into()));
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut has_parent = vec![false; n];
        for &(p, c) in &self.edges {
            if p >= c || c >= n {
                return Err(Error::Contract(format!("bad edge ({p}, {c}) for {n} tokens")));
            }
            if std::mem::replace(&mut has_parent[c], true) {
                return Err(Error::Contract(format!("position {c} has two parents")));
            }
            children[p].push(c);
        }
        if has_parent[0] || has_parent.iter().skip(1).any(|h| !h) {
            return Err(Error::Contract("edges do not form a tree rooted at 0".into()));
        }
        children.iter_mut().for_each(|c| c.sort_unstable());

        fn build(i: usize, toks: &[AstToken], children: &[Vec<usize>]) -> AstNode {
            let t = &toks[i];
            AstNode {
                kind: t.kind.clone(),
                text: t.leaf.then(|| t.surface.clone()),
                children: children[i].iter().map(|&c| build(c, toks, children)).collect(),
                span: t.span,
            }
        }
        Ok(build(0, &self.tokens, &children))
    }
}

/// Depth-first pre-order serialization.
pub fn serialize(root: &AstNode) -> AstSequence {
    let mut seq =
        AstSequence { tokens: Vec::with_capacity(root.size()), edges: Vec::new(), identifier_flags: Vec::new() };
    fn walk(n: &AstNode, parent: Option<usize>, seq: &mut AstSequence) {
        let pos = seq.tokens.len();
        seq.tokens.push(AstToken {
            surface: n.text.clone().unwrap_or_else(|| n.kind.clone()),
            kind: n.kind.clone(),
            leaf: n.is_leaf(),
            span: n.span,
        });
        seq.identifier_flags.push(n.is_identifier());
        if let Some(p) = parent {
            seq.edges.push((p, pos));
        }
        for c in &n.children {
            walk(c, Some(pos), seq);
        }
    }
    walk(root, None, &mut seq);
    seq
}

/// A code token (tree leaf) with its identifier label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeTokenSpan {
    pub surface: String,
    pub is_identifier: bool,
    pub start: usize,
    pub end: usize,
}

/// Leaves in source order with identifier labels. Trees without spans (e.g.
/// ingested ones) get ranges over the leaves joined by single spaces.
pub fn code_token_labels(root: &AstNode) -> Vec<CodeTokenSpan> {
    let leaves = root.leaves();
    let all_spanned = leaves.iter().all(|l| l.span.is_some());
    let mut cursor = 0;
    leaves
        .into_iter()
        .map(|l| {
            let surface = l.text.clone().unwrap_or_default();
            let (start, end) = if all_spanned {
                l.span.unwrap()
            } else {
                let s = cursor;
                cursor += surface.len() + 1;
                (s, s + surface.len())
            };
            CodeTokenSpan { is_identifier: l.is_identifier(), surface, start, end }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn single_leaf() {
        let s = serialize(&AstNode::leaf("identifier", "x"));
        assert_eq!(s.len(), 1);
        assert!(s.edges.is_empty());
        assert_eq!(s.identifier_flags, [true]);
    }

    #[test]
    fn root_with_two_leaves() {
        let t = AstNode::internal("call", vec![AstNode::leaf("identifier", "f"), AstNode::leaf("integer", "1")]);
        let s = serialize(&t);
        let surf: Vec<_> = s.tokens.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surf, ["call", "f", "1"]);
        assert_eq!(s.edges, [(0, 1), (0, 2)]);
        assert_eq!(s.to_tree().unwrap(), t);
    }

    #[test]
    fn operator_edges_reach_leaves_not_siblings() {
        let s = serialize(&parse("result = x + y").unwrap());
        let pos = |surface: &str| s.tokens.iter().position(|t| t.surface == surface).unwrap();
        let (asg, result, eq, bin) = (pos("assignment"), pos("result"), pos("="), pos("binary_operator"));
        assert!(s.edges.contains(&(asg, result)));
        assert!(!s.edges.contains(&(result, eq)) && !s.edges.contains(&(eq, result)));
        for leaf in ["x", "+", "y"] {
            assert!(s.edges.contains(&(bin, pos(leaf))));
        }
        assert!(!s.edges.contains(&(pos("x"), pos("+"))));
    }

    #[test]
    fn identifier_labels() {
        let flags = |src: &str| -> Vec<(String, bool)> {
            code_token_labels(&parse(src).unwrap()).into_iter().map(|s| (s.surface, s.is_identifier)).collect()
        };
        let r = flags("result = x + y");
        assert_eq!(r.iter().map(|x| x.1).collect::<Vec<_>>(), [true, false, true, false, true]);
        assert!(flags("return 42").iter().all(|x| !x.1));
        let l = flags("x = len(\"x\")");
        assert_eq!(l.iter().filter(|x| x.1).count(), 2);
        assert!(l.iter().any(|x| x.0 == "\"x\"" && !x.1));
    }

    #[test]
    fn spans_reconstruct_source() {
        let src = "def f(a):\n    return a * 2\n";
        let spans = code_token_labels(&parse(src).unwrap());
        let mut prev = 0;
        for s in &spans {
            assert!(s.start >= prev);
            assert!(src[prev..s.start].chars().all(char::is_whitespace));
            assert_eq!(&src[s.start..s.end], s.surface);
            prev = s.end;
        }
        assert!(src[prev..].chars().all(char::is_whitespace));
    }
}
