//! Packs comment, code, and AST segments into one model input:
//! `[CLS] nl [SEP] code [SEP] ast [SEP]`, or `[CLS] code [SEP] ast [SEP]`
//! when there is no comment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::syntax::{code_token_labels, serialize, AstNode};
use crate::tokenizer::{TokenId, Vocab, CLS, SEP, UNK};

/// Per-segment token budgets, excluding `[CLS]`/`[SEP]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub nl: usize,
    pub pl: usize,
    pub ast: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { nl: 32, pl: 48, ast: 64 }
    }
}

impl Budgets {
    /// Full-size budgets: 96 / 160 / 256.
    pub fn full_scale() -> Self {
        Budgets { nl: 96, pl: 160, ast: 256 }
    }

    /// Longest packed sequence these budgets can produce.
    pub fn max_packed_len(&self) -> usize {
        self.nl + self.pl + self.ast + 4
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nl", self.nl), ("pl", self.pl), ("ast", self.ast)] {
            if v == 0 {
                return Err(Error::config(format!("budgets.{name}"), "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SegmentOrder {
    #[default]
    PlFirst,
    AstFirst,
}

/// One training example: optional comment ids, code ids with identifier
/// flags, and AST ids with parent→child edges over AST-local positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalTriple {
    pub nl: Option<Vec<TokenId>>,
    pub pl: Vec<TokenId>,
    pub pl_identifier: Vec<bool>,
    pub ast: Vec<TokenId>,
    pub ast_edges: Vec<(usize, usize)>,
    #[serde(default)]
    pub order: SegmentOrder,
}

impl ModalTriple {
    pub fn new(
        nl: Option<Vec<TokenId>>,
        pl: Vec<TokenId>,
        pl_identifier: Vec<bool>,
        ast: Vec<TokenId>,
        ast_edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let t = ModalTriple {
            nl: nl.filter(|w| !w.is_empty()),
            pl,
            pl_identifier,
            ast,
            ast_edges,
            order: SegmentOrder::PlFirst,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pl.is_empty() || self.ast.is_empty() {
            return Err(Error::Assembly("code and AST segments must be non-empty".into()));
        }
        if self.pl.len() != self.pl_identifier.len() {
            return Err(Error::Assembly(format!(
                "{} code ids but {} identifier flags",
                self.pl.len(),
                self.pl_identifier.len()
            )));
        }
        if let Some(&(p, c)) = self.ast_edges.iter().find(|&&(p, c)| p >= c || c >= self.ast.len()) {
            return Err(Error::Assembly(format!("edge ({p}, {c}) invalid for {} AST ids", self.ast.len())));
        }
        Ok(())
    }

    pub fn is_paired(&self) -> bool {
        self.nl.is_some()
    }

    /// Encodes a comment and a tree. Each code token's subwords inherit its
    /// identifier flag; AST edges attach to the first subword of each node.
    pub fn from_tree(vocab: &Vocab, comment: Option<&str>, tree: &AstNode) -> Result<Self> {
        let nl = comment.map(|c| vocab.encode_subwords(c.trim()));

        let mut pl = Vec::new();
        let mut flags = Vec::new();
        for span in code_token_labels(tree) {
            let mut ids = vocab.encode_subwords(&span.surface);
            if ids.is_empty() {
                ids.push(UNK);
            }
            flags.extend(std::iter::repeat_n(span.is_identifier, ids.len()));
            pl.extend(ids);
        }

        let seq = serialize(tree);
        let mut ast = Vec::new();
        let mut first = Vec::with_capacity(seq.len());
        for tok in &seq.tokens {
            first.push(ast.len());
            if tok.leaf {
                let ids = vocab.encode_subwords(&tok.surface);
                if ids.is_empty() {
                    ast.push(UNK);
                } else {
                    ast.extend(ids);
                }
            } else {
                ast.push(vocab.kind_id(&tok.kind).unwrap_or(UNK));
            }
        }
        let edges = seq.edges.iter().map(|&(p, c)| (first[p], first[c])).collect();
        ModalTriple::new(nl, pl, flags, ast, edges)
    }
}

/// Reverses code and AST order; applying it twice restores the original.
pub fn swap_pl_ast(triple: &ModalTriple) -> ModalTriple {
    let mut t = triple.clone();
    t.order = match t.order {
        SegmentOrder::PlFirst => SegmentOrder::AstFirst,
        SegmentOrder::AstFirst => SegmentOrder::PlFirst,
    };
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Segment {
    Cls,
    Nl,
    Sep,
    Pl,
    Ast,
    Pad,
}

/// Which segments to pack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Comment (if any), code, and AST.
    Full,
    /// `[CLS] nl [SEP]` only.
    NlOnly,
    /// Code and AST without the comment.
    CodeOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedInput {
    pub ids: Vec<TokenId>,
    pub segments: Vec<Segment>,
    pub pl_positions: Vec<usize>,
    pub ast_positions: Vec<usize>,
    /// Parent→child edges as positions in `ids`.
    pub edge_pairs: Vec<(usize, usize)>,
    /// One label per entry of `pl_positions`.
    pub identifier_labels: Vec<bool>,
    pub order: SegmentOrder,
}

impl PackedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions eligible for masking (everything but CLS/SEP/PAD).
    pub fn maskable_positions(&self) -> Vec<usize> {
        self.segments
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Segment::Nl | Segment::Pl | Segment::Ast))
            .map(|(i, _)| i)
            .collect()
    }

    /// Recovers the (already truncated) triple, keeping any changed ids.
    pub fn to_triple(&self) -> ModalTriple {
        let pick = |seg: Segment| -> Vec<TokenId> {
            self.ids.iter().zip(&self.segments).filter(|(_, s)| **s == seg).map(|(&i, _)| i).collect()
        };
        let nl = pick(Segment::Nl);
        let ast_start = self.ast_positions.first().copied().unwrap_or(0);
        ModalTriple {
            nl: (!nl.is_empty()).then_some(nl),
            pl: pick(Segment::Pl),
            pl_identifier: self.identifier_labels.clone(),
            ast: pick(Segment::Ast),
            ast_edges: self.edge_pairs.iter().map(|&(p, c)| (p - ast_start, c - ast_start)).collect(),
            order: self.order,
        }
    }
}

/// Packs with the full layout.
pub fn pack(triple: &ModalTriple, budgets: &Budgets) -> Result<PackedInput> {
    pack_layout(triple, budgets, Layout::Full)
}

pub fn pack_layout(triple: &ModalTriple, budgets: &Budgets, layout: Layout) -> Result<PackedInput> {
    budgets.validate()?;
    triple.validate()?;
    let mut p = PackedInput {
        ids: vec![CLS],
        segments: vec![Segment::Cls],
        pl_positions: Vec::new(),
        ast_positions: Vec::new(),
        edge_pairs: Vec::new(),
        identifier_labels: Vec::new(),
        order: triple.order,
    };
    let push_sep = |p: &mut PackedInput| {
        p.ids.push(SEP);
        p.segments.push(Segment::Sep);
    };

    let want_nl = matches!(layout, Layout::Full | Layout::NlOnly);
    if layout == Layout::NlOnly && triple.nl.is_none() {
        return Err(Error::Assembly("NL-only packing of an example without a comment".into()));
    }
    if want_nl {
        if let Some(nl) = &triple.nl {
            for &id in nl.iter().take(budgets.nl) {
                p.ids.push(id);
                p.segments.push(Segment::Nl);
            }
            push_sep(&mut p);
        }
    }
    if layout == Layout::NlOnly {
        return Ok(p);
    }

    let pack_pl = |p: &mut PackedInput| {
        for (k, &id) in triple.pl.iter().take(budgets.pl).enumerate() {
            p.pl_positions.push(p.ids.len());
            p.identifier_labels.push(triple.pl_identifier[k]);
            p.ids.push(id);
            p.segments.push(Segment::Pl);
        }
        push_sep(p);
    };
    let pack_ast = |p: &mut PackedInput| {
        let start = p.ids.len();
        let kept = triple.ast.len().min(budgets.ast);
        for &id in &triple.ast[..kept] {
            p.ast_positions.push(p.ids.len());
            p.ids.push(id);
            p.segments.push(Segment::Ast);
        }
        p.edge_pairs.extend(
            triple.ast_edges.iter().filter(|&&(a, b)| a < kept && b < kept).map(|&(a, b)| (start + a, start + b)),
        );
        push_sep(p);
    };
    match triple.order {
        SegmentOrder::PlFirst => {
            pack_pl(&mut p);
            pack_ast(&mut p);
        }
        SegmentOrder::AstFirst => {
            pack_ast(&mut p);
            pack_pl(&mut p);
        }
    }
    if p.pl_positions.is_empty() {
        return Err(Error::Assembly("code segment empty after truncation".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T1: TokenId = 101;
    const T2: TokenId = 102;
    const T3: TokenId = 103;

    fn triple(nl: Option<Vec<TokenId>>) -> ModalTriple {
        ModalTriple::new(nl, vec![T2], vec![true], vec![T3], vec![]).unwrap()
    }

    #[test]
    fn paired_layout() {
        let p = pack(&triple(Some(vec![T1])), &Budgets::default()).unwrap();
        assert_eq!(p.ids, [CLS, T1, SEP, T2, SEP, T3, SEP]);
        assert_eq!(p.pl_positions, [3]);
        assert_eq!(p.ast_positions, [5]);
        assert_eq!(p.identifier_labels, [true]);
    }

    #[test]
    fn unpaired_layout_omits_nl() {
        let p = pack(&triple(None), &Budgets::default()).unwrap();
        assert_eq!(p.ids, [CLS, T2, SEP, T3, SEP]);
    }

    #[test]
    fn truncation_drops_dangling_edges() {
        let t = ModalTriple::new(None, vec![T2], vec![false], vec![10, 11, 12, 13, 14], vec![(0, 1), (0, 4), (1, 3)])
            .unwrap();
        let b = Budgets { nl: 4, pl: 4, ast: 4 };
        let p = pack(&t, &b).unwrap();
        assert_eq!(p.ast_positions.len(), 4);
        assert_eq!(p.edge_pairs, [(3, 4), (4, 6)]);
    }

    #[test]
    fn swap_reorders_segments() {
        let t = triple(Some(vec![T1]));
        let s = swap_pl_ast(&t);
        let b = Budgets::default();
        assert_eq!(pack(&s, &b).unwrap().ids, [CLS, T1, SEP, T3, SEP, T2, SEP]);
        let u = swap_pl_ast(&triple(None));
        assert_eq!(pack(&u, &b).unwrap().ids, [CLS, T3, SEP, T2, SEP]);
        assert_eq!(pack(&swap_pl_ast(&s), &b).unwrap(), pack(&t, &b).unwrap());
    }

    #[test]
    fn swapped_edges_follow_ast_segment() {
        let t = ModalTriple::new(None, vec![1, 2], vec![true, false], vec![7, 8, 9], vec![(0, 1), (0, 2)]).unwrap();
        let p = pack(&swap_pl_ast(&t), &Budgets::default()).unwrap();
        assert_eq!(p.ast_positions, [1, 2, 3]);
        assert_eq!(p.edge_pairs, [(1, 2), (1, 3)]);
        assert_eq!(p.pl_positions, [5, 6]);
        assert_eq!(p.to_triple(), swap_pl_ast(&t));
    }

    #[test]
    fn nl_only_requires_comment() {
        let b = Budgets::default();
        assert_eq!(pack_layout(&triple(Some(vec![T1])), &b, Layout::NlOnly).unwrap().ids, [CLS, T1, SEP]);
        assert!(pack_layout(&triple(None), &b, Layout::NlOnly).is_err());
        assert_eq!(pack_layout(&triple(Some(vec![T1])), &b, Layout::CodeOnly).unwrap().ids, [CLS, T2, SEP, T3, SEP]);
    }

    #[test]
    fn invalid_triples_rejected() {
        assert!(ModalTriple::new(None, vec![], vec![], vec![1], vec![]).is_err());
        assert!(ModalTriple::new(None, vec![1], vec![true], vec![1, 2], vec![(1, 0)]).is_err());
        assert!(ModalTriple::new(None, vec![1], vec![], vec![1], vec![]).is_err());
    }
}
