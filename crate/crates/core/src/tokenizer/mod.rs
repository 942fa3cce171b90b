//! Byte-pair encoding shared by comments, code, and AST sequences.
//!
//! Text is first split into chunks (a word, a run of punctuation, or
//! whitespace, with a single leading space glued onto the following chunk);
//! merges never cross chunk boundaries, so decoding is plain concatenation.
//! AST node kinds are reserved atomic tokens and are never split.

mod vocab_file;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const CLS: TokenId = 2;
pub const SEP: TokenId = 3;
pub const MASK: TokenId = 4;
pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    merges: Vec<(String, String)>,
    merge_rank: HashMap<(TokenId, TokenId), (usize, TokenId)>,
    num_reserved: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Word,
    Space,
    Other,
}

fn class(c: char) -> CharClass {
    if c.is_alphanumeric() || c == '_' {
        CharClass::Word
    } else if c.is_whitespace() {
        CharClass::Space
    } else {
        CharClass::Other
    }
}

/// Splits text into merge-isolated chunks. Concatenating the chunks gives
/// back the input.
pub fn pre_tokenize(text: &str) -> Vec<&str> {
    let mut chunks = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let start = chars[i].0;
        let mut j = i;
        if chars[i].1 == ' ' && i + 1 < chars.len() && class(chars[i + 1].1) != CharClass::Space {
            j += 1;
        }
        let cls = class(chars[j].1);
        let mut k = j + 1;
        while k < chars.len() && class(chars[k].1) == cls {
            // leave one trailing space for the next chunk
            if cls == CharClass::Space
                && chars[k].1 == ' '
                && k + 1 < chars.len()
                && class(chars[k + 1].1) != CharClass::Space
            {
                break;
            }
            k += 1;
        }
        let end = chars.get(k).map_or(text.len(), |c| c.0);
        chunks.push(&text[start..end]);
        i = k;
    }
    chunks
}

impl Vocab {
    fn from_parts(tokens: Vec<String>, merges: Vec<(String, String)>, num_reserved: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Tokenizer(format!("duplicate token {t:?}")));
            }
        }
        let mut merge_rank = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let lookup = |s: &str| {
                index.get(s).copied().ok_or_else(|| Error::Tokenizer(format!("merge references unknown token {s:?}")))
            };
            let merged = lookup(&format!("{l}{r}"))?;
            merge_rank.entry((lookup(l)?, lookup(r)?)).or_insert((rank, merged));
        }
        Ok(Vocab { tokens, index, merges, merge_rank, num_reserved })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_reserved(&self) -> usize {
        self.num_reserved
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Reserved id of an AST node kind.
    pub fn kind_id(&self, kind: &str) -> Option<TokenId> {
        self.id(kind).filter(|&i| (i as usize) >= SPECIAL_TOKENS.len() && (i as usize) < self.num_reserved)
    }

    pub fn kinds(&self) -> &[String] {
        &self.tokens[SPECIAL_TOKENS.len()..self.num_reserved]
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        (id as usize) < SPECIAL_TOKENS.len()
    }

    pub fn is_reserved(&self, id: TokenId) -> bool {
        (id as usize) < self.num_reserved
    }

    /// Encodes `text`; a text equal to a reserved AST kind maps to that
    /// kind's single id.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        if let Some(id) = self.kind_id(text) {
            return vec![id];
        }
        self.encode_subwords(text)
    }

    /// Pure BPE encoding, never yielding a reserved id other than `[UNK]`.
    pub fn encode_subwords(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        for chunk in pre_tokenize(text) {
            let mut syms: Vec<TokenId> = chunk
                .chars()
                .map(|c| {
                    let mut buf = [0u8; 4];
                    self.id(c.encode_utf8(&mut buf)).unwrap_or(UNK)
                })
                .collect();
            loop {
                let best = syms
                    .windows(2)
                    .filter_map(|w| self.merge_rank.get(&(w[0], w[1])).map(|&(r, m)| (r, w[0], w[1], m)))
                    .min();
                let Some((_, l, r, merged)) = best else { break };
                let mut next = Vec::with_capacity(syms.len());
                let mut i = 0;
                while i < syms.len() {
                    if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                        next.push(merged);
                        i += 2;
                    } else {
                        next.push(syms[i]);
                        i += 1;
                    }
                }
                syms = next;
            }
            out.extend(syms);
        }
        out
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&i| self.token(i).unwrap_or(SPECIAL_TOKENS[UNK as usize])).collect()
    }

    pub fn to_file_string(&self) -> String {
        vocab_file::write(self)
    }

    pub fn from_file_string(s: &str) -> Result<Self> {
        let (tokens, merges, reserved) = vocab_file::read(s)?;
        Vocab::from_parts(tokens, merges, reserved)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Vocab::from_file_string(&std::fs::read_to_string(path)?)
    }
}

/// Learns a vocabulary of exactly `target_size` entries: the special tokens,
/// the reserved `kinds`, every character seen, then merged subwords.
///
/// Merges are chosen by descending pair frequency, ties broken by the
/// lexicographically smallest `(left, right)` pair.
pub fn train_bpe<I, S>(corpus: I, target_size: usize, kinds: &[String]) -> Result<Vocab>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut reserved: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    for k in kinds {
        if !reserved.contains(k) {
            reserved.push(k.clone());
        }
    }
    let num_reserved = reserved.len();

    let mut chunk_counts: BTreeMap<String, u64> = BTreeMap::new();
    for text in corpus {
        for chunk in pre_tokenize(text.as_ref()) {
            *chunk_counts.entry(chunk.to_string()).or_default() += 1;
        }
    }
    if chunk_counts.is_empty() {
        return Err(Error::Tokenizer("empty training corpus".into()));
    }

    let alphabet: std::collections::BTreeSet<String> =
        chunk_counts.keys().flat_map(|w| w.chars().map(String::from)).filter(|c| !reserved.contains(c)).collect();
    let base = num_reserved + alphabet.len();
    if target_size <= base {
        return Err(Error::Tokenizer(format!(
            "target size {target_size} must exceed the {num_reserved} reserved tokens plus {} base characters",
            alphabet.len()
        )));
    }

    let mut tokens = reserved;
    tokens.extend(alphabet);
    let mut index: HashMap<String, TokenId> =
        tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();

    let mut words: Vec<(Vec<TokenId>, u64)> =
        chunk_counts.iter().map(|(w, &n)| (w.chars().map(|c| index[&c.to_string()]).collect(), n)).collect();

    let mut pair_counts: HashMap<(TokenId, TokenId), u64> = HashMap::new();
    for (syms, n) in &words {
        for w in syms.windows(2) {
            *pair_counts.entry((w[0], w[1])).or_default() += n;
        }
    }

    let mut merges = Vec::new();
    while tokens.len() < target_size {
        let best = pair_counts
            .iter()
            .filter(|(&(l, r), &n)| {
                n > 0 && {
                    let merged = format!("{}{}", tokens[l as usize], tokens[r as usize]);
                    index.get(&merged).is_none_or(|&id| (id as usize) >= num_reserved)
                }
            })
            .max_by(|(&(al, ar), &an), (&(bl, br), &bn)| {
                an.cmp(&bn).then_with(|| {
                    (&tokens[bl as usize], &tokens[br as usize]).cmp(&(&tokens[al as usize], &tokens[ar as usize]))
                })
            })
            .map(|(&p, _)| p);
        let Some((l, r)) = best else {
            return Err(Error::Tokenizer(format!(
                "corpus exhausted at {} tokens before reaching target size {target_size}",
                tokens.len()
            )));
        };

        let merged_str = format!("{}{}", tokens[l as usize], tokens[r as usize]);
        let merged = *index.entry(merged_str.clone()).or_insert_with(|| {
            tokens.push(merged_str);
            (tokens.len() - 1) as TokenId
        });
        merges.push((tokens[l as usize].clone(), tokens[r as usize].clone()));

        for (syms, n) in &mut words {
            if !syms.windows(2).any(|w| w[0] == l && w[1] == r) {
                continue;
            }
            for w in syms.windows(2) {
                *pair_counts.get_mut(&(w[0], w[1])).unwrap() -= *n;
            }
            let mut next = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(syms[i]);
                    i += 1;
                }
            }
            *syms = next;
            for w in syms.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_default() += *n;
            }
        }
        pair_counts.retain(|_, n| *n > 0);
    }

    Vocab::from_parts(tokens, merges, num_reserved)
}
